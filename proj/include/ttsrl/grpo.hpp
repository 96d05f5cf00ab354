#ifndef TTSRL_GRPO_HPP_
#define TTSRL_GRPO_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "ttsrl/core_types.hpp"
#include "ttsrl/policy.hpp"
#include "ttsrl/prosody.hpp"
#include "ttsrl/rewards.hpp"
#include "ttsrl/sim_env.hpp"

namespace ttsrl {

struct GrpoConfig {
  int group_size = 12;
  int batch_size = 16;
  double learning_rate = 1e-6;
  double clip_epsilon = 0.2;
  double kl_coef = 0.01;          // beta; 0 disables the reference-KL term
  int epochs_per_batch = 1;
  int total_steps = 100;
  bool length_norm = true;        // divide each rollout's objective by its length
  int ref_refresh_interval = 0;   // steps between reference refreshes; 0 = never
  bool operator==(const GrpoConfig&) const = default;
};

void validate_grpo_config(const GrpoConfig& cfg);

// Adam moments; constants documented here.
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  uint64_t t = 0;
};

// Importance ratios outside these bounds are clamped (and counted) so a
// single underflowed old-policy probability cannot blow up the loss.
constexpr double kRatioMin = 1e-6;
constexpr double kRatioMax = 1e6;

// One training prompt: the text to generate, its reference pairing, and an
// optional pause-template set (required when alpha_pro > 0).
struct PromptCase {
  int64_t id = 0;
  Text target;
  ReferencePair ref;
  const PauseTemplateSet* templates = nullptr;
};

// G rollouts from a frozen parameter snapshot, scored and normalized.
// Member i draws from the stream (rollout_seed, kRollout, i). Reward
// errors fail the whole group, tagged with prompt id and member index.
RolloutGroup collect_group(const PolicyParams& params, const PromptCase& prompt_case,
                           int group_size, const SamplerConfig& sampler,
                           const RewardConfig& reward_cfg, const ProsodyConfig& prosody,
                           uint64_t rollout_seed);

struct SurrogateResult {
  double loss = 0.0;
  std::vector<double> grad;
  double mean_kl = 0.0;         // mean per-token reference-KL estimate
  uint64_t ratio_clamped = 0;
};

// Clipped-surrogate loss with per-token reference KL:
//   loss = -(1/G) sum_i (1/T_i) sum_t [ min(rho*A_i, clip(rho, 1-eps, 1+eps)*A_i)
//                                       - beta * (r - ln r - 1) ]
// with rho = pi_new/pi_old and r = pi_ref/pi_new on the unfiltered softmax,
// and the group advantage A_i broadcast to every token of rollout i.
// The returned gradient is exact for this expression.
SurrogateResult surrogate_loss(const RolloutGroup& group, const PolicyParams& params_new,
                               const PolicyParams& params_old, const PolicyParams& params_ref,
                               const GrpoConfig& cfg);

struct TrainStepReport {
  uint64_t step = 0;
  double mean_reward = 0.0;
  double mean_r_intl = 0.0;
  double mean_r_sim = 0.0;
  double mean_r_len = 0.0;
  double mean_r_ent = 0.0;
  double mean_r_pro = 0.0;
  double mean_abs_advantage = 0.0;
  double surrogate_loss = 0.0;
  double kl = 0.0;
  double mean_entropy = 0.0;
  double mean_length = 0.0;
  double grad_norm = 0.0;
  uint64_t ratio_clamped = 0;
};

struct TrainerState {
  PolicyParams params;
  std::vector<double> ref_theta;  // frozen reference policy parameters
  AdamState opt;
  uint64_t step = 0;
  uint64_t master_seed = 0;
};

TrainerState make_trainer_state(PolicyParams params, uint64_t master_seed);

// Collects one group per batch prompt (rollout streams derived from
// (master_seed, step, batch index)), runs epochs_per_batch optimization
// epochs over the collected groups, applies one Adam update per epoch, and
// reports batch statistics. A non-finite gradient aborts the step with
// TrainingError and leaves the state untouched. The reference parameters
// change only at the configured refresh interval.
TrainStepReport train_step(TrainerState& state, std::span<const PromptCase> batch,
                           const GrpoConfig& grpo, const SamplerConfig& sampler,
                           const RewardConfig& reward_cfg, const ProsodyConfig& prosody = {});

}  // namespace ttsrl

#endif  // TTSRL_GRPO_HPP_
