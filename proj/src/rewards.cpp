#include "ttsrl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ttsrl/errors.hpp"
#include "ttsrl/policy.hpp"

namespace ttsrl {

int levenshtein(std::span<const int> s1, std::span<const int> s2) {
  const size_t n = s1.size();
  const size_t m = s2.size();
  if (n == 0) return static_cast<int>(m);
  if (m == 0) return static_cast<int>(n);

  std::vector<int> prev(m + 1);
  std::vector<int> curr(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= n; ++i) {
    curr[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (s1[i - 1] == s2[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return prev[m];
}

double reward_intl(const Text& target, const Text& transcript, bool clamp_at_zero) {
  if (target.length() == 0) throw RewardError("r_intl", "target text is empty");
  const int dist = levenshtein(target.symbols, transcript.symbols);
  const double r = 1.0 - static_cast<double>(dist) / static_cast<double>(target.length());
  return clamp_at_zero ? std::max(0.0, r) : r;
}

double reward_sim(std::span<const double> e, std::span<const double> e_ref) {
  if (e.size() != e_ref.size() || e.empty())
    throw RewardError("r_sim", "embedding dimensions do not match");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < e.size(); ++i) {
    dot += e[i] * e_ref[i];
    na += e[i] * e[i];
    nb += e_ref[i] * e_ref[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw RewardError("r_sim", "zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double reward_len(const LengthRewardInputs& in) {
  if (!(in.duration > 0.0)) throw RewardError("r_len", "non-positive duration");
  if (!(in.ref_rate > 0.0)) throw RewardError("r_len", "non-positive reference rate");
  const double ratio = (static_cast<double>(in.t_text) / in.duration) / in.ref_rate;
  return (ratio >= in.a && ratio <= in.b) ? 1.0 : 0.0;
}

double reward_ent(double h_bar, double h_target, double lambda_ent) {
  return -lambda_ent * std::max(0.0, h_bar - h_target);
}

double estimate_h_target(const std::vector<Trajectory>& calibration, double percentile) {
  if (calibration.empty()) throw RewardError("r_ent", "empty calibration set");
  std::vector<double> values;
  values.reserve(calibration.size());
  for (const Trajectory& t : calibration) values.push_back(mean_entropy(t));
  std::sort(values.begin(), values.end());
  // Nearest-rank: rank = ceil(p/100 * n), 1-based.
  const size_t n = values.size();
  size_t rank = static_cast<size_t>(std::ceil(percentile / 100.0 * static_cast<double>(n)));
  rank = std::clamp<size_t>(rank, 1, n);
  return values[rank - 1];
}

double reward_pro(const PauseSequence& predicted, const PauseTemplateSet& templates) {
  if (templates.templates.empty()) throw RewardError("r_pro", "empty pause template set");
  if (predicted.scheme != templates.scheme)
    throw RewardError("r_pro", "pause scheme mismatch between prediction and templates");
  for (const PauseSequence& t : templates.templates) {
    if (predicted == t) return 1.0;
  }
  return 0.0;
}

RewardBreakdown score_trajectory(const Trajectory& traj, const SynthesisResult& synth,
                                 const ReferencePair& ref, const PauseTemplateSet* templates,
                                 const RewardConfig& cfg, const ProsodyConfig& prosody) {
  RewardBreakdown out;
  out.r_intl = reward_intl(traj.prompt, synth.transcript, cfg.clamp_intl);
  out.r_sim = reward_sim(synth.speaker_vec, ref.ref_speaker_vec);
  out.r_len = reward_len({static_cast<int>(traj.prompt.length()), synth.total_duration,
                          ref.ref_rate, cfg.len_a, cfg.len_b});
  out.r_ent = reward_ent(mean_entropy(traj), cfg.h_target, cfg.lambda_ent);
  if (cfg.alpha_pro != 0.0) {
    if (templates == nullptr)
      throw RewardError("r_pro", "no pause templates available for prompt");
    PauseSequence predicted = map_silences_to_markers(synth.silence_segments, prosody.thresholds);
    predicted = convert_scheme(predicted, templates->scheme, prosody);
    out.r_pro = reward_pro(predicted, *templates);
  }
  out.total = aggregate_reward(out, cfg);
  return out;
}

}  // namespace ttsrl
