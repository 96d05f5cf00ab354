#ifndef TTSRL_POLICY_HPP_
#define TTSRL_POLICY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ttsrl/core_types.hpp"
#include "ttsrl/rng.hpp"

namespace ttsrl {

// Fixed-window autoregressive token policy. The state for step t is the
// prompt plus the generated prefix truncated to the last `window` tokens.
// Features feeding the single hidden layer:
//   - embedding of the last prefix token (bos before anything is emitted),
//   - mean token embedding over the trailing window,
//   - mean symbol embedding of the prompt,
//   - symbol embedding of the next unconsumed prompt symbol (a dedicated
//     end-of-text row once every symbol has been covered),
//   - two progress scalars: graphemes emitted / prompt length, and elapsed
//     steps relative to 4x the window.
// logits = W2 * tanh(W1 * features + b1) + b2.
struct PolicyArch {
  int window = 8;
  int embed_dim = 8;
  int hidden_dim = 24;
  Vocab vocab;
  int n_symbols = 16;

  int feature_dim() const { return 4 * embed_dim + 2; }
  // Parameter layout (row-major, in order): token embeddings
  // [vocab.size x E], symbol embeddings [(n_symbols+1) x E], hidden weights
  // [H x F], hidden bias [H], output weights [V x H], output bias [V].
  int64_t tok_emb_offset() const { return 0; }
  int64_t text_emb_offset() const { return int64_t{vocab.size} * embed_dim; }
  int64_t w1_offset() const { return text_emb_offset() + int64_t{n_symbols + 1} * embed_dim; }
  int64_t b1_offset() const { return w1_offset() + int64_t{hidden_dim} * feature_dim(); }
  int64_t w2_offset() const { return b1_offset() + hidden_dim; }
  int64_t b2_offset() const { return w2_offset() + int64_t{vocab.size} * hidden_dim; }
  int64_t param_count() const { return b2_offset() + vocab.size; }

  bool operator==(const PolicyArch&) const = default;
};

struct PolicyParams {
  PolicyArch arch;
  std::vector<double> theta;
};

// Gaussian init: embeddings ~ N(0, scale), layer weights ~ N(0, scale /
// sqrt(fan_in)), biases 0. Deterministic in (arch, seed, scale).
PolicyParams init_policy(const PolicyArch& arch, uint64_t seed, double init_scale = 0.5);

// Throws ConfigError when theta length does not match the architecture or
// context ids are out of range.
void validate_params(const PolicyParams& params);

struct SamplerConfig {
  int top_k = 75;
  double top_p = 0.9;
  double temperature = 1.1;
  double repetition_penalty = 1.1;
  int max_len = 64;
  uint64_t seed = 0;
  bool operator==(const SamplerConfig&) const = default;
};

void validate_sampler_config(const SamplerConfig& cfg);

// Logit vector over the vocab for the given context. Pure and
// deterministic in its inputs.
std::vector<double> logits(const PolicyParams& params, const Text& prompt,
                           const std::vector<int>& prefix);

// Filtered sampling distribution after repetition penalty, temperature,
// top-k, and top-p. `tokens` is sorted by descending adjusted logit with
// ascending-id tie-break; `probs` sums to 1.
struct StepDistribution {
  std::vector<int> tokens;
  std::vector<double> probs;
  double entropy = 0.0;  // nats

  double prob_of(int token) const;
};

StepDistribution build_step_distribution(const std::vector<double>& raw_logits,
                                         const std::vector<int>& history,
                                         const SamplerConfig& cfg);

struct StepSample {
  int token = 0;
  double logprob = 0.0;
  double entropy = 0.0;
};

// Draws one token from the filtered distribution. Throws SamplingError on
// NaN logits.
StepSample sample_step(const std::vector<double>& raw_logits, const std::vector<int>& history,
                       const SamplerConfig& cfg, Rng& rng);

// Generates until eos or cfg.max_len tokens. The trajectory includes the
// terminating eos as its final action when one is sampled.
Trajectory rollout(const PolicyParams& params, const Text& prompt, const SamplerConfig& cfg,
                   Rng& rng);

// Arithmetic mean of per-step entropies. Throws InvalidTrajectoryError on
// an empty trajectory.
double mean_entropy(const Trajectory& traj);

// Log-probabilities of the trajectory's actions under the unfiltered
// temperature-1 softmax (the training-time likelihood; sampler filtering is
// a decode-time heuristic and is deliberately not applied here).
std::vector<double> action_logprobs(const PolicyParams& params, const Trajectory& traj);

struct WeightedLogprobGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// sum_t weights[t] * ln pi_theta(a_t | s_t) and its exact gradient, on the
// unfiltered softmax. Throws ConfigError on weight-length mismatch.
WeightedLogprobGrad logprob_and_grad(const PolicyParams& params, const Trajectory& traj,
                                     const std::vector<double>& weights);

// Versioned binary checkpoint. Layout (all integers and doubles
// little-endian): magic "TTSRLCP1", u32 version, architecture descriptor
// (u32 window, embed_dim, hidden_dim, n_symbols, vocab size/bos/eos/pad/
// pause_begin/grapheme_begin/n_graphemes), u64 param count, theta as f64,
// u64 rng seed, u8 has_trainer_state; when set: u64 step, u64 adam_t,
// reference theta, adam first and second moments (each param-count f64).
struct Checkpoint {
  PolicyParams params;
  uint64_t seed = 0;
  bool has_trainer_state = false;
  uint64_t step = 0;
  uint64_t adam_t = 0;
  std::vector<double> ref_theta;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ttsrl

#endif  // TTSRL_POLICY_HPP_
