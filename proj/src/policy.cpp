#include "ttsrl/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ttsrl/errors.hpp"

namespace ttsrl {

namespace {

// Context features for one decode step, kept around for backprop.
struct StepFeatures {
  std::vector<double> phi;
  std::vector<int> window_tokens;  // contributors to the window mean
  int last_token = 0;
  int next_row = 0;  // symbol-embedding row used for the next-symbol slot
};

StepFeatures compute_features(const PolicyArch& arch, const Text& prompt,
                              const std::vector<int>& prefix) {
  const int t = static_cast<int>(prefix.size());
  StepFeatures f;
  f.phi.assign(arch.feature_dim(), 0.0);

  // Trailing window over [bos] + prefix.
  const int total = t + 1;
  const int win_len = std::min(total, arch.window);
  f.window_tokens.reserve(win_len);
  for (int i = total - win_len; i < total; ++i) {
    f.window_tokens.push_back(i == 0 ? arch.vocab.bos : prefix[i - 1]);
  }
  f.last_token = t == 0 ? arch.vocab.bos : prefix.back();

  int graphemes = 0;
  for (int tok : prefix) {
    if (arch.vocab.is_grapheme(tok)) ++graphemes;
  }
  const int s_len = static_cast<int>(prompt.length());
  f.next_row = graphemes < s_len ? prompt.symbols[graphemes] : arch.n_symbols;
  return f;
}

void fill_phi(const PolicyArch& arch, const PolicyParams& params, const Text& prompt,
              const std::vector<int>& prefix, StepFeatures& f) {
  const int e = arch.embed_dim;
  const double* tok_emb = params.theta.data() + arch.tok_emb_offset();
  const double* text_emb = params.theta.data() + arch.text_emb_offset();

  const double* last_row = tok_emb + int64_t{f.last_token} * e;
  for (int d = 0; d < e; ++d) f.phi[d] = last_row[d];

  const double inv_win = 1.0 / static_cast<double>(f.window_tokens.size());
  for (int tok : f.window_tokens) {
    const double* row = tok_emb + int64_t{tok} * e;
    for (int d = 0; d < e; ++d) f.phi[e + d] += row[d] * inv_win;
  }

  const double inv_s = 1.0 / static_cast<double>(prompt.length());
  for (int sym : prompt.symbols) {
    const double* row = text_emb + int64_t{sym} * e;
    for (int d = 0; d < e; ++d) f.phi[2 * e + d] += row[d] * inv_s;
  }

  const double* next_row = text_emb + int64_t{f.next_row} * e;
  for (int d = 0; d < e; ++d) f.phi[3 * e + d] = next_row[d];

  int graphemes = 0;
  for (int tok : prefix) {
    if (arch.vocab.is_grapheme(tok)) ++graphemes;
  }
  f.phi[4 * e] = std::min(static_cast<double>(graphemes) / static_cast<double>(prompt.length()), 2.0);
  f.phi[4 * e + 1] =
      std::min(static_cast<double>(prefix.size()) / (4.0 * arch.window), 2.0);
}

void check_context(const PolicyParams& params, const Text& prompt,
                   const std::vector<int>& prefix) {
  validate_params(params);
  if (prompt.length() == 0) throw ValidationError("prompt must be non-empty");
  for (int sym : prompt.symbols) {
    if (sym < 0 || sym >= params.arch.n_symbols)
      throw ConfigError("prompt symbol out of alphabet range");
  }
  for (int tok : prefix) {
    if (tok < 0 || tok >= params.arch.vocab.size)
      throw ConfigError("prefix token out of vocab range");
  }
}

struct ForwardPass {
  StepFeatures features;
  std::vector<double> hidden;
  std::vector<double> logit_vec;
};

ForwardPass forward(const PolicyParams& params, const Text& prompt,
                    const std::vector<int>& prefix) {
  const PolicyArch& arch = params.arch;
  ForwardPass fp;
  fp.features = compute_features(arch, prompt, prefix);
  fill_phi(arch, params, prompt, prefix, fp.features);

  const int h_dim = arch.hidden_dim;
  const int f_dim = arch.feature_dim();
  const int v = arch.vocab.size;
  const double* w1 = params.theta.data() + arch.w1_offset();
  const double* b1 = params.theta.data() + arch.b1_offset();
  const double* w2 = params.theta.data() + arch.w2_offset();
  const double* b2 = params.theta.data() + arch.b2_offset();

  fp.hidden.assign(h_dim, 0.0);
  for (int h = 0; h < h_dim; ++h) {
    double z = b1[h];
    const double* row = w1 + int64_t{h} * f_dim;
    for (int f = 0; f < f_dim; ++f) z += row[f] * fp.features.phi[f];
    fp.hidden[h] = std::tanh(z);
  }

  fp.logit_vec.assign(v, 0.0);
  for (int o = 0; o < v; ++o) {
    double z = b2[o];
    const double* row = w2 + int64_t{o} * h_dim;
    for (int h = 0; h < h_dim; ++h) z += row[h] * fp.hidden[h];
    fp.logit_vec[o] = z;
  }
  return fp;
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

PolicyParams init_policy(const PolicyArch& arch, uint64_t seed, double init_scale) {
  validate_vocab(arch.vocab);
  if (arch.window < 1 || arch.embed_dim < 1 || arch.hidden_dim < 1 || arch.n_symbols < 1)
    throw ConfigError("policy architecture dimensions must be positive");

  PolicyParams params;
  params.arch = arch;
  params.theta.assign(arch.param_count(), 0.0);
  Rng rng = Rng::stream(seed, {rng_tag::kInit});

  const int64_t emb_end = arch.w1_offset();
  for (int64_t i = 0; i < emb_end; ++i) params.theta[i] = init_scale * rng.next_gaussian();

  const double w1_scale = init_scale / std::sqrt(static_cast<double>(arch.feature_dim()));
  for (int64_t i = arch.w1_offset(); i < arch.b1_offset(); ++i)
    params.theta[i] = w1_scale * rng.next_gaussian();

  const double w2_scale = init_scale / std::sqrt(static_cast<double>(arch.hidden_dim));
  for (int64_t i = arch.w2_offset(); i < arch.b2_offset(); ++i)
    params.theta[i] = w2_scale * rng.next_gaussian();

  return params;
}

void validate_params(const PolicyParams& params) {
  if (static_cast<int64_t>(params.theta.size()) != params.arch.param_count())
    throw ConfigError("parameter vector length does not match architecture");
  for (double x : params.theta) {
    if (!std::isfinite(x)) throw ConfigError("non-finite policy parameter");
  }
}

void validate_sampler_config(const SamplerConfig& cfg) {
  if (cfg.top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (!(cfg.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (cfg.repetition_penalty < 1.0) throw ConfigError("repetition_penalty must be >= 1");
  if (cfg.max_len < 1) throw ConfigError("max_len must be >= 1");
}

std::vector<double> logits(const PolicyParams& params, const Text& prompt,
                           const std::vector<int>& prefix) {
  check_context(params, prompt, prefix);
  return forward(params, prompt, prefix).logit_vec;
}

double StepDistribution::prob_of(int token) const {
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == token) return probs[i];
  }
  return 0.0;
}

StepDistribution build_step_distribution(const std::vector<double>& raw_logits,
                                         const std::vector<int>& history,
                                         const SamplerConfig& cfg) {
  validate_sampler_config(cfg);
  const int v = static_cast<int>(raw_logits.size());
  if (v == 0) throw SamplingError("empty logit vector");
  for (double l : raw_logits) {
    if (std::isnan(l)) throw SamplingError("NaN logit");
  }

  // (1) repetition penalty on history tokens, sign-dependent.
  std::vector<double> adj = raw_logits;
  std::vector<char> seen(v, 0);
  for (int tok : history) {
    if (tok >= 0 && tok < v) seen[tok] = 1;
  }
  for (int i = 0; i < v; ++i) {
    if (!seen[i]) continue;
    if (adj[i] > 0.0) {
      adj[i] /= cfg.repetition_penalty;
    } else if (adj[i] < 0.0) {
      adj[i] *= cfg.repetition_penalty;
    }
  }

  // (2) temperature.
  for (double& l : adj) l /= cfg.temperature;

  // (3) top-k, sorted by descending logit with ascending-id tie-break.
  std::vector<int> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (adj[a] != adj[b]) return adj[a] > adj[b];
    return a < b;
  });
  const int keep_k = std::min(cfg.top_k, v);
  order.resize(keep_k);

  // Softmax over the kept set.
  std::vector<double> kept_logits(keep_k);
  for (int i = 0; i < keep_k; ++i) kept_logits[i] = adj[order[i]];
  const double lse = log_sum_exp(kept_logits);
  std::vector<double> probs(keep_k);
  for (int i = 0; i < keep_k; ++i) probs[i] = std::exp(kept_logits[i] - lse);

  // (4) smallest prefix with cumulative probability >= top_p.
  int keep_p = keep_k;
  double cum = 0.0;
  for (int i = 0; i < keep_k; ++i) {
    cum += probs[i];
    if (cum >= cfg.top_p - 1e-12) {
      keep_p = i + 1;
      break;
    }
  }

  // (5) renormalize the surviving prefix.
  StepDistribution dist;
  dist.tokens.assign(order.begin(), order.begin() + keep_p);
  dist.probs.assign(probs.begin(), probs.begin() + keep_p);
  double total = std::accumulate(dist.probs.begin(), dist.probs.end(), 0.0);
  double entropy = 0.0;
  for (double& p : dist.probs) {
    p /= total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  dist.entropy = std::max(0.0, entropy);
  return dist;
}

StepSample sample_step(const std::vector<double>& raw_logits, const std::vector<int>& history,
                       const SamplerConfig& cfg, Rng& rng) {
  StepDistribution dist = build_step_distribution(raw_logits, history, cfg);
  const double u = rng.next_double();
  double cum = 0.0;
  size_t pick = dist.tokens.size() - 1;
  for (size_t i = 0; i < dist.tokens.size(); ++i) {
    cum += dist.probs[i];
    if (u < cum) {
      pick = i;
      break;
    }
  }
  return {dist.tokens[pick], std::log(dist.probs[pick]), dist.entropy};
}

Trajectory rollout(const PolicyParams& params, const Text& prompt, const SamplerConfig& cfg,
                   Rng& rng) {
  validate_sampler_config(cfg);
  if (prompt.length() == 0) throw ValidationError("rollout requires a non-empty prompt");

  Trajectory traj;
  traj.prompt = prompt;
  for (int t = 0; t < cfg.max_len; ++t) {
    const std::vector<double> l = logits(params, prompt, traj.actions);
    const StepSample s = sample_step(l, traj.actions, cfg, rng);
    traj.actions.push_back(s.token);
    traj.step_logprobs.push_back(s.logprob);
    traj.step_entropies.push_back(s.entropy);
    if (s.token == params.arch.vocab.eos) {
      traj.terminated_by_eos = true;
      break;
    }
  }
  return traj;
}

double mean_entropy(const Trajectory& traj) {
  if (traj.actions.empty()) throw InvalidTrajectoryError("trajectory has no steps");
  double sum = 0.0;
  for (double h : traj.step_entropies) sum += h;
  return sum / static_cast<double>(traj.step_entropies.size());
}

std::vector<double> action_logprobs(const PolicyParams& params, const Trajectory& traj) {
  check_context(params, traj.prompt, traj.actions);
  std::vector<double> out;
  out.reserve(traj.actions.size());
  std::vector<int> prefix;
  prefix.reserve(traj.actions.size());
  for (int action : traj.actions) {
    ForwardPass fp = forward(params, traj.prompt, prefix);
    out.push_back(fp.logit_vec[action] - log_sum_exp(fp.logit_vec));
    prefix.push_back(action);
  }
  return out;
}

WeightedLogprobGrad logprob_and_grad(const PolicyParams& params, const Trajectory& traj,
                                     const std::vector<double>& weights) {
  check_context(params, traj.prompt, traj.actions);
  if (weights.size() != traj.actions.size())
    throw ConfigError("weight count does not match trajectory length");

  const PolicyArch& arch = params.arch;
  const int e = arch.embed_dim;
  const int h_dim = arch.hidden_dim;
  const int f_dim = arch.feature_dim();
  const int v = arch.vocab.size;

  WeightedLogprobGrad out;
  out.grad.assign(arch.param_count(), 0.0);

  double* g_tok_emb = out.grad.data() + arch.tok_emb_offset();
  double* g_text_emb = out.grad.data() + arch.text_emb_offset();
  double* g_w1 = out.grad.data() + arch.w1_offset();
  double* g_b1 = out.grad.data() + arch.b1_offset();
  double* g_w2 = out.grad.data() + arch.w2_offset();
  double* g_b2 = out.grad.data() + arch.b2_offset();
  const double* w1 = params.theta.data() + arch.w1_offset();
  const double* w2 = params.theta.data() + arch.w2_offset();

  std::vector<int> prefix;
  prefix.reserve(traj.actions.size());
  std::vector<double> dlogits(v), dh(h_dim), dz1(h_dim), dphi(f_dim);

  for (size_t t = 0; t < traj.actions.size(); ++t) {
    const int action = traj.actions[t];
    const double w = weights[t];
    if (w == 0.0) {
      prefix.push_back(action);
      continue;
    }

    ForwardPass fp = forward(params, traj.prompt, prefix);
    const double lse = log_sum_exp(fp.logit_vec);
    out.value += w * (fp.logit_vec[action] - lse);

    for (int o = 0; o < v; ++o) {
      const double p = std::exp(fp.logit_vec[o] - lse);
      dlogits[o] = w * ((o == action ? 1.0 : 0.0) - p);
    }

    std::fill(dh.begin(), dh.end(), 0.0);
    for (int o = 0; o < v; ++o) {
      const double d = dlogits[o];
      g_b2[o] += d;
      double* g_row = g_w2 + int64_t{o} * h_dim;
      const double* w_row = w2 + int64_t{o} * h_dim;
      for (int h = 0; h < h_dim; ++h) {
        g_row[h] += d * fp.hidden[h];
        dh[h] += w_row[h] * d;
      }
    }

    std::fill(dphi.begin(), dphi.end(), 0.0);
    for (int h = 0; h < h_dim; ++h) {
      dz1[h] = dh[h] * (1.0 - fp.hidden[h] * fp.hidden[h]);
      g_b1[h] += dz1[h];
      double* g_row = g_w1 + int64_t{h} * f_dim;
      const double* w_row = w1 + int64_t{h} * f_dim;
      for (int f = 0; f < f_dim; ++f) {
        g_row[f] += dz1[h] * fp.features.phi[f];
        dphi[f] += w_row[f] * dz1[h];
      }
    }

    // Route feature gradients back into the embedding tables.
    double* last_row = g_tok_emb + int64_t{fp.features.last_token} * e;
    for (int d = 0; d < e; ++d) last_row[d] += dphi[d];

    const double inv_win = 1.0 / static_cast<double>(fp.features.window_tokens.size());
    for (int tok : fp.features.window_tokens) {
      double* row = g_tok_emb + int64_t{tok} * e;
      for (int d = 0; d < e; ++d) row[d] += dphi[e + d] * inv_win;
    }

    const double inv_s = 1.0 / static_cast<double>(traj.prompt.length());
    for (int sym : traj.prompt.symbols) {
      double* row = g_text_emb + int64_t{sym} * e;
      for (int d = 0; d < e; ++d) row[d] += dphi[2 * e + d] * inv_s;
    }

    double* next_row = g_text_emb + int64_t{fp.features.next_row} * e;
    for (int d = 0; d < e; ++d) next_row[d] += dphi[3 * e + d];

    prefix.push_back(action);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'T', 'S', 'R', 'L', 'C', 'P', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t x) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
  os.write(buf, 4);
}

void write_u64(std::ostream& os, uint64_t x) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
  os.write(buf, 8);
}

void write_f64(std::ostream& os, double x) { write_u64(os, std::bit_cast<uint64_t>(x)); }

uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw ValidationError("truncated checkpoint");
  uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(buf[i]) << (8 * i);
  return x;
}

uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw ValidationError("truncated checkpoint");
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return x;
}

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

void write_vec(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) write_f64(os, x);
}

std::vector<double> read_vec(std::istream& is, size_t n) {
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = read_f64(is);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  validate_params(ckpt.params);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidationError("cannot open checkpoint for writing: " + path);

  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kVersion);
  const PolicyArch& arch = ckpt.params.arch;
  write_u32(os, static_cast<uint32_t>(arch.window));
  write_u32(os, static_cast<uint32_t>(arch.embed_dim));
  write_u32(os, static_cast<uint32_t>(arch.hidden_dim));
  write_u32(os, static_cast<uint32_t>(arch.n_symbols));
  write_u32(os, static_cast<uint32_t>(arch.vocab.size));
  write_u32(os, static_cast<uint32_t>(arch.vocab.bos));
  write_u32(os, static_cast<uint32_t>(arch.vocab.eos));
  write_u32(os, static_cast<uint32_t>(arch.vocab.pad));
  write_u32(os, static_cast<uint32_t>(arch.vocab.pause_begin));
  write_u32(os, static_cast<uint32_t>(arch.vocab.grapheme_begin));
  write_u32(os, static_cast<uint32_t>(arch.vocab.n_graphemes));
  write_u64(os, static_cast<uint64_t>(ckpt.params.theta.size()));
  write_vec(os, ckpt.params.theta);
  write_u64(os, ckpt.seed);
  os.put(ckpt.has_trainer_state ? '\1' : '\0');
  if (ckpt.has_trainer_state) {
    const size_t n = ckpt.params.theta.size();
    if (ckpt.ref_theta.size() != n || ckpt.adam_m.size() != n || ckpt.adam_v.size() != n)
      throw ValidationError("trainer-state vectors do not match parameter count");
    write_u64(os, ckpt.step);
    write_u64(os, ckpt.adam_t);
    write_vec(os, ckpt.ref_theta);
    write_vec(os, ckpt.adam_m);
    write_vec(os, ckpt.adam_v);
  }
  if (!os) throw ValidationError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint: " + path);

  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ValidationError("not a checkpoint file: " + path);
  const uint32_t version = read_u32(is);
  if (version != kVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  PolicyArch& arch = ckpt.params.arch;
  arch.window = static_cast<int>(read_u32(is));
  arch.embed_dim = static_cast<int>(read_u32(is));
  arch.hidden_dim = static_cast<int>(read_u32(is));
  arch.n_symbols = static_cast<int>(read_u32(is));
  arch.vocab.size = static_cast<int>(read_u32(is));
  arch.vocab.bos = static_cast<int>(read_u32(is));
  arch.vocab.eos = static_cast<int>(read_u32(is));
  arch.vocab.pad = static_cast<int>(read_u32(is));
  arch.vocab.pause_begin = static_cast<int>(read_u32(is));
  arch.vocab.grapheme_begin = static_cast<int>(read_u32(is));
  arch.vocab.n_graphemes = static_cast<int>(read_u32(is));
  validate_vocab(arch.vocab);

  const uint64_t n = read_u64(is);
  if (n != static_cast<uint64_t>(arch.param_count()))
    throw ValidationError("checkpoint parameter count does not match architecture");
  ckpt.params.theta = read_vec(is, n);
  ckpt.seed = read_u64(is);
  const int flag = is.get();
  if (flag == std::char_traits<char>::eof()) throw ValidationError("truncated checkpoint");
  ckpt.has_trainer_state = flag != 0;
  if (ckpt.has_trainer_state) {
    ckpt.step = read_u64(is);
    ckpt.adam_t = read_u64(is);
    ckpt.ref_theta = read_vec(is, n);
    ckpt.adam_m = read_vec(is, n);
    ckpt.adam_v = read_vec(is, n);
  }
  validate_params(ckpt.params);
  return ckpt;
}

}  // namespace ttsrl
