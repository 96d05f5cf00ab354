#ifndef TTSRL_REWARDS_HPP_
#define TTSRL_REWARDS_HPP_

#include <span>
#include <vector>

#include "ttsrl/core_types.hpp"
#include "ttsrl/prosody.hpp"
#include "ttsrl/sim_env.hpp"

namespace ttsrl {

// Unit-cost insert/delete/substitute edit distance (two-row DP).
int levenshtein(std::span<const int> s1, std::span<const int> s2);

// 1 - D_lev(transcript, target) / |target|. Unclamped by default: more
// edits than target symbols yields a negative reward.
// Throws RewardError("r_intl") on an empty target.
double reward_intl(const Text& target, const Text& transcript, bool clamp_at_zero = false);

// Cosine similarity. Throws RewardError("r_sim") on zero-norm or
// mismatched dimensions.
double reward_sim(std::span<const double> e, std::span<const double> e_ref);

struct LengthRewardInputs {
  int t_text = 0;        // target text symbol count
  double duration = 0.0; // generated seconds
  double ref_rate = 0.0; // reference symbols per second
  double a = 0.8;
  double b = 1.25;
};

// 1 iff (t_text / duration) / ref_rate lies in the closed interval [a, b].
// Throws RewardError("r_len") on non-positive duration or ref_rate.
double reward_len(const LengthRewardInputs& in);

// -lambda * max(0, h_bar - h_target); 0 at or below the target.
double reward_ent(double h_bar, double h_target, double lambda_ent);

// Nearest-rank percentile of mean trajectory entropy over a calibration
// set. Throws RewardError("r_ent") when the set is empty.
double estimate_h_target(const std::vector<Trajectory>& calibration, double percentile);

// 1 iff `predicted` equals one template marker-by-marker.
// Throws RewardError("r_pro") when the template set is empty or the
// schemes cannot be compared.
double reward_pro(const PauseSequence& predicted, const PauseTemplateSet& templates);

// All five components plus the weighted total for one scored rollout.
// `templates` may be null only when cfg.alpha_pro == 0, in which case the
// prosody term is skipped and recorded as 0.
RewardBreakdown score_trajectory(const Trajectory& traj, const SynthesisResult& synth,
                                 const ReferencePair& ref, const PauseTemplateSet* templates,
                                 const RewardConfig& cfg, const ProsodyConfig& prosody = {});

}  // namespace ttsrl

#endif  // TTSRL_REWARDS_HPP_
