#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ttsrl/errors.hpp"
#include "ttsrl/policy.hpp"
#include "ttsrl/rng.hpp"

using namespace ttsrl;

namespace {

PolicyArch small_arch(int embed = 2, int hidden = 3, int window = 3, int n_symbols = 4) {
  Alphabet alphabet;
  alphabet.n_symbols = n_symbols;
  alphabet.comma = n_symbols - 2;
  alphabet.period = n_symbols - 1;
  PolicyArch arch;
  arch.window = window;
  arch.embed_dim = embed;
  arch.hidden_dim = hidden;
  arch.vocab = make_vocab(alphabet);
  arch.n_symbols = n_symbols;
  return arch;
}

Text prompt_of(std::initializer_list<int> symbols) {
  Text t;
  t.symbols = symbols;
  return t;
}

// Central finite difference of the weighted log-probability objective.
std::vector<double> fd_gradient(const PolicyParams& params, const Trajectory& traj,
                                const std::vector<double>& weights, double h) {
  std::vector<double> grad(params.theta.size(), 0.0);
  PolicyParams probe = params;
  for (size_t i = 0; i < params.theta.size(); ++i) {
    probe.theta[i] = params.theta[i] + h;
    const double up = logprob_and_grad(probe, traj, weights).value;
    probe.theta[i] = params.theta[i] - h;
    const double down = logprob_and_grad(probe, traj, weights).value;
    probe.theta[i] = params.theta[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double rel_norm_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, ref = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

}  // namespace

TEST_CASE("logits: zero parameters give zero logits") {
  PolicyArch arch = small_arch();
  PolicyParams params;
  params.arch = arch;
  params.theta.assign(arch.param_count(), 0.0);
  const auto l = logits(params, prompt_of({0, 1, 2}), {arch.vocab.symbol_token(1)});
  REQUIRE(static_cast<int>(l.size()) == arch.vocab.size);
  for (double x : l) CHECK(x == 0.0);
}

TEST_CASE("logits: deterministic in the context") {
  PolicyArch arch = small_arch();
  PolicyParams params = init_policy(arch, 9, 0.5);
  const Text prompt = prompt_of({0, 1, 2, 3});
  const std::vector<int> prefix = {arch.vocab.symbol_token(0), arch.vocab.pause_token(1)};
  CHECK(logits(params, prompt, prefix) == logits(params, prompt, prefix));
}

TEST_CASE("logits: hand-computed single-unit model") {
  // One embedding dimension, one hidden unit: the whole map fits on paper.
  PolicyArch arch = small_arch(/*embed=*/1, /*hidden=*/1, /*window=*/2, /*n_symbols=*/2);
  const int v = arch.vocab.size;
  PolicyParams params;
  params.arch = arch;
  params.theta.assign(arch.param_count(), 0.0);

  // tok_emb[t] = 0.1 (t+1); text_emb[s] = 0.2 (s+1)
  for (int t = 0; t < v; ++t) params.theta[arch.tok_emb_offset() + t] = 0.1 * (t + 1);
  for (int s = 0; s < arch.n_symbols + 1; ++s)
    params.theta[arch.text_emb_offset() + s] = 0.2 * (s + 1);
  // w1 = [1, 2, 3, 4, 5, 6] over [last, window, text, next, s1, s2]; b1 = 0.05
  for (int f = 0; f < arch.feature_dim(); ++f) params.theta[arch.w1_offset() + f] = f + 1.0;
  params.theta[arch.b1_offset()] = 0.05;
  // w2[o] = 0.3 (o+1), b2[o] = 0.01 o
  for (int o = 0; o < v; ++o) {
    params.theta[arch.w2_offset() + o] = 0.3 * (o + 1);
    params.theta[arch.b2_offset() + o] = 0.01 * o;
  }

  // Prompt [0, 1]; prefix = one grapheme token of symbol 0.
  const Text prompt = prompt_of({0, 1});
  const int g0 = arch.vocab.symbol_token(0);
  const std::vector<int> prefix = {g0};

  const double e_last = 0.1 * (g0 + 1);
  const double e_win = 0.5 * (0.1 * (arch.vocab.bos + 1) + 0.1 * (g0 + 1));
  const double e_text = 0.5 * (0.2 * 1 + 0.2 * 2);
  const double e_next = 0.2 * 2;  // symbol 1 is next
  const double s1 = 0.5;          // one grapheme over two prompt symbols
  const double s2 = 1.0 / 8.0;    // one step over 4x window
  const double hidden =
      std::tanh(1 * e_last + 2 * e_win + 3 * e_text + 4 * e_next + 5 * s1 + 6 * s2 + 0.05);

  const auto l = logits(params, prompt, prefix);
  for (int o = 0; o < v; ++o) {
    CHECK(l[o] == doctest::Approx(0.3 * (o + 1) * hidden + 0.01 * o).epsilon(1e-12));
  }
}

TEST_CASE("logits: architecture mismatch is rejected") {
  PolicyArch arch = small_arch();
  PolicyParams params = init_policy(arch, 1, 0.5);
  params.theta.pop_back();
  CHECK_THROWS_AS(logits(params, prompt_of({0}), {}), ConfigError);
}

TEST_CASE("sample_step: worked distributions") {
  Rng rng(0);
  SUBCASE("uniform logits over four tokens") {
    SamplerConfig cfg;
    cfg.top_k = 4;
    cfg.top_p = 1.0;
    cfg.temperature = 1.0;
    cfg.repetition_penalty = 1.0;
    const StepSample s = sample_step({0.0, 0.0, 0.0, 0.0}, {}, cfg, rng);
    CHECK(s.entropy == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(s.logprob == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }
  SUBCASE("dominant logit with top_k = 1") {
    SamplerConfig cfg;
    cfg.top_k = 1;
    cfg.top_p = 1.0;
    cfg.temperature = 1.0;
    for (int i = 0; i < 10; ++i) {
      const StepSample s = sample_step({10.0, 0.0, 0.0, 0.0}, {}, cfg, rng);
      CHECK(s.token == 0);
      CHECK(s.entropy == 0.0);
      CHECK(s.logprob == 0.0);
    }
  }
  SUBCASE("tied top logits with a tight nucleus resolve to the lowest id") {
    SamplerConfig cfg;
    cfg.top_k = 2;
    cfg.top_p = 0.5;
    cfg.temperature = 1.0;
    // After top-k the two tied tokens renormalize to 0.5 each; the prefix
    // reaching 0.5 is exactly the first (lowest-id) token.
    const StepDistribution dist = build_step_distribution({1.0, 1.0, 0.0, 0.0}, {}, cfg);
    REQUIRE(dist.tokens.size() == 1);
    CHECK(dist.tokens[0] == 0);
    CHECK(dist.entropy == 0.0);
    CHECK(dist.probs[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("NaN logits are rejected") {
    SamplerConfig cfg;
    CHECK_THROWS_AS(
        build_step_distribution({0.0, std::numeric_limits<double>::quiet_NaN()}, {}, cfg),
        SamplingError);
  }
}

TEST_CASE("sample_step: filtered distribution contract on random cases") {
  Rng rng(77);
  int strict_checks = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int v = 4 + static_cast<int>(rng.next_below(37));
    std::vector<double> raw(v);
    for (double& x : raw) x = 6.0 * (rng.next_double() - 0.5);

    SamplerConfig cfg;
    cfg.top_k = 1 + static_cast<int>(rng.next_below(v + 10));
    cfg.top_p = 0.05 + 0.95 * rng.next_double();
    cfg.temperature = 0.3 + 1.7 * rng.next_double();
    cfg.repetition_penalty = 1.0 + rng.next_double();

    const StepDistribution dist = build_step_distribution(raw, {}, cfg);
    double total = 0.0;
    for (double p : dist.probs) total += p;
    CHECK(std::abs(total - 1.0) < 1e-9);
    CHECK(dist.entropy >= 0.0);
    CHECK(dist.entropy <= std::log(static_cast<double>(cfg.top_k)) + 1e-12);
    CHECK(dist.tokens.size() <= static_cast<size_t>(cfg.top_k));

    // Raising the penalty strictly lowers the filtered probability of a
    // history token with a positive raw logit (degenerate single-token
    // supports are skipped: there is nothing left to redistribute).
    int candidate = -1;
    for (int i = 0; i < v; ++i) {
      if (raw[i] > 0.1 && dist.prob_of(i) > 0.0 && dist.prob_of(i) < 1.0) candidate = i;
    }
    if (candidate >= 0) {
      SamplerConfig harder = cfg;
      harder.repetition_penalty = cfg.repetition_penalty + 0.25;
      const double before =
          build_step_distribution(raw, {candidate}, cfg).prob_of(candidate);
      const double after =
          build_step_distribution(raw, {candidate}, harder).prob_of(candidate);
      if (before > 0.0 && before < 1.0) {
        CHECK(after < before);
        ++strict_checks;
      }
    }
  }
  CHECK(strict_checks > 100);
}

TEST_CASE("rollout: termination") {
  PolicyArch arch = small_arch();
  const Text prompt = prompt_of({0, 1, 2});

  SUBCASE("dominant eos bias stops after one step") {
    PolicyParams params;
    params.arch = arch;
    params.theta.assign(arch.param_count(), 0.0);
    params.theta[arch.b2_offset() + arch.vocab.eos] = 100.0;
    SamplerConfig cfg;
    cfg.top_k = 1;
    cfg.max_len = 16;
    Rng rng = Rng::stream(5, {rng_tag::kRollout, 0});
    Trajectory traj = rollout(params, prompt, cfg, rng);
    CHECK(traj.length() == 1);
    CHECK(traj.actions[0] == arch.vocab.eos);
    CHECK(traj.terminated_by_eos);
  }
  SUBCASE("suppressed eos runs to max_len") {
    PolicyParams params;
    params.arch = arch;
    params.theta.assign(arch.param_count(), 0.0);
    params.theta[arch.b2_offset() + arch.vocab.eos] = -100.0;
    SamplerConfig cfg;
    cfg.top_k = arch.vocab.size - 1;  // eos ranks last and never survives top-k
    cfg.max_len = 8;
    Rng rng = Rng::stream(5, {rng_tag::kRollout, 1});
    Trajectory traj = rollout(params, prompt, cfg, rng);
    CHECK(traj.length() == 8);
    CHECK_FALSE(traj.terminated_by_eos);
    validate_trajectory(traj, arch.vocab);
  }
  SUBCASE("same seed reproduces the trajectory bit for bit") {
    PolicyParams params = init_policy(arch, 21, 0.5);
    SamplerConfig cfg;
    cfg.max_len = 12;
    Rng rng_a = Rng::stream(1234, {rng_tag::kRollout, 3});
    Rng rng_b = Rng::stream(1234, {rng_tag::kRollout, 3});
    Trajectory a = rollout(params, prompt, cfg, rng_a);
    Trajectory b = rollout(params, prompt, cfg, rng_b);
    CHECK(a.actions == b.actions);
    CHECK(a.step_logprobs == b.step_logprobs);
    CHECK(a.step_entropies == b.step_entropies);
  }
  SUBCASE("empty prompt is rejected") {
    PolicyParams params = init_policy(arch, 21, 0.5);
    SamplerConfig cfg;
    Rng rng(0);
    CHECK_THROWS_AS(rollout(params, Text{}, cfg, rng), ValidationError);
  }
}

TEST_CASE("mean_entropy") {
  Trajectory traj;
  traj.prompt = prompt_of({0});
  traj.actions = {7, 7, 7};
  traj.step_logprobs = {-1, -1, -1};
  traj.step_entropies = {0.0, 0.0, 0.0};
  CHECK(mean_entropy(traj) == 0.0);

  traj.actions = {7, 7};
  traj.step_logprobs = {-1, -1};
  traj.step_entropies = {std::log(4.0), std::log(4.0)};
  CHECK(mean_entropy(traj) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  traj.step_entropies = {0.5, 1.5};
  CHECK(mean_entropy(traj) == doctest::Approx(1.0).epsilon(1e-12));

  Trajectory empty;
  CHECK_THROWS_AS(mean_entropy(empty), InvalidTrajectoryError);
}

TEST_CASE("logprob_and_grad: basics") {
  PolicyArch arch = small_arch();
  PolicyParams params = init_policy(arch, 3, 0.6);
  Trajectory traj;
  traj.prompt = prompt_of({0, 2, 1});
  traj.actions = {arch.vocab.symbol_token(0), arch.vocab.pause_token(2),
                  arch.vocab.symbol_token(2), arch.vocab.eos};
  traj.step_logprobs.assign(4, 0.0);
  traj.step_entropies.assign(4, 0.0);

  SUBCASE("zero weights give zero value and gradient") {
    const auto res = logprob_and_grad(params, traj, {0.0, 0.0, 0.0, 0.0});
    CHECK(res.value == 0.0);
    for (double g : res.grad) CHECK(g == 0.0);
  }
  SUBCASE("value equals the weighted sum of per-step log-probabilities") {
    const std::vector<double> weights = {0.5, -1.0, 2.0, 1.0};
    const auto res = logprob_and_grad(params, traj, weights);
    const auto lps = action_logprobs(params, traj);
    double expected = 0.0;
    for (size_t t = 0; t < weights.size(); ++t) expected += weights[t] * lps[t];
    CHECK(res.value == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("doubling the weights doubles value and gradient") {
    const std::vector<double> w1 = {0.5, -1.0, 2.0, 1.0};
    std::vector<double> w2 = w1;
    for (double& w : w2) w *= 2.0;
    const auto a = logprob_and_grad(params, traj, w1);
    const auto b = logprob_and_grad(params, traj, w2);
    CHECK(b.value == doctest::Approx(2.0 * a.value).epsilon(1e-12));
    for (size_t i = 0; i < a.grad.size(); ++i)
      CHECK(b.grad[i] == doctest::Approx(2.0 * a.grad[i]).epsilon(1e-9));
  }
  SUBCASE("weight-length mismatch") {
    CHECK_THROWS_AS(logprob_and_grad(params, traj, {1.0}), ConfigError);
  }
}

TEST_CASE("logprob_and_grad: matches central finite differences") {
  Rng rng(1009);
  for (int trial = 0; trial < 5; ++trial) {
    PolicyArch arch = small_arch();
    REQUIRE(arch.param_count() <= 500);
    PolicyParams params = init_policy(arch, 100 + trial, 0.6);

    Trajectory traj;
    traj.prompt.symbols.clear();
    const size_t prompt_len = 2 + rng.next_below(4);
    for (size_t i = 0; i < prompt_len; ++i)
      traj.prompt.symbols.push_back(static_cast<int>(rng.next_below(arch.n_symbols)));
    const size_t t_len = 3 + rng.next_below(5);
    for (size_t t = 0; t < t_len; ++t)
      traj.actions.push_back(static_cast<int>(rng.next_below(arch.vocab.size)));
    traj.step_logprobs.assign(t_len, 0.0);
    traj.step_entropies.assign(t_len, 0.0);

    std::vector<double> weights(t_len);
    for (double& w : weights) w = 2.0 * rng.next_double() - 1.0;

    const auto res = logprob_and_grad(params, traj, weights);
    const auto fd = fd_gradient(params, traj, weights, 1e-5);
    CHECK(rel_norm_error(res.grad, fd) < 1e-6);
  }
}

TEST_CASE("checkpoint: round trip") {
  PolicyArch arch = small_arch();
  PolicyParams params = init_policy(arch, 77, 0.4);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ttsrl_ckpt_test.ckpt").string();

  SUBCASE("bare policy") {
    Checkpoint ck;
    ck.params = params;
    ck.seed = 12345;
    save_checkpoint(path, ck);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.params.arch == arch);
    CHECK(back.params.theta == params.theta);
    CHECK(back.seed == 12345);
    CHECK_FALSE(back.has_trainer_state);
  }
  SUBCASE("with trainer state") {
    Checkpoint ck;
    ck.params = params;
    ck.seed = 9;
    ck.has_trainer_state = true;
    ck.step = 42;
    ck.adam_t = 42;
    ck.ref_theta = params.theta;
    ck.adam_m.assign(params.theta.size(), 0.125);
    ck.adam_v.assign(params.theta.size(), 0.5);
    save_checkpoint(path, ck);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.step == 42);
    CHECK(back.ref_theta == params.theta);
    CHECK(back.adam_m == ck.adam_m);
    CHECK(back.adam_v == ck.adam_v);
  }
  SUBCASE("corrupt magic is rejected") {
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << "NOTACKPT" << std::string(64, '\0');
    }
    CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
  }
  std::remove(path.c_str());
}
