#include "ttsrl/core_types.hpp"

#include <cmath>
#include <set>

#include "ttsrl/errors.hpp"

namespace ttsrl {

Vocab make_vocab(const Alphabet& alphabet) {
  Vocab v;
  v.bos = 0;
  v.eos = 1;
  v.pad = 2;
  v.pause_begin = 3;
  v.grapheme_begin = v.pause_begin + kNumPauseLevels;
  v.n_graphemes = alphabet.n_symbols;
  v.size = v.grapheme_begin + v.n_graphemes;
  validate_vocab(v);
  return v;
}

void validate_vocab(const Vocab& v) {
  if (v.size <= 0) throw ConfigError("vocab size must be positive");
  std::set<int> specials = {v.bos, v.eos, v.pad};
  if (specials.size() != 3)
    throw ConfigError("bos/eos/pad must be distinct");
  for (int id : specials) {
    if (id < 0 || id >= v.size) throw ConfigError("special id out of range");
    if (id >= v.pause_begin && id < v.pause_begin + kNumPauseLevels)
      throw ConfigError("special id overlaps pause-token range");
  }
  if (v.pause_begin < 0 || v.pause_begin + kNumPauseLevels > v.size)
    throw ConfigError("pause-token range out of bounds");
  if (v.n_graphemes < 0 || v.grapheme_begin + v.n_graphemes > v.size)
    throw ConfigError("grapheme range out of bounds");
}

void validate_trajectory(const Trajectory& traj, const Vocab& vocab) {
  const size_t t = traj.actions.size();
  if (t == 0) throw InvalidTrajectoryError("trajectory has no actions");
  if (traj.step_logprobs.size() != t || traj.step_entropies.size() != t)
    throw InvalidTrajectoryError("per-step arrays do not match action count");
  const double h_max = std::log(static_cast<double>(vocab.size));
  for (double h : traj.step_entropies) {
    if (!(h >= 0.0 && h <= h_max + 1e-12))
      throw InvalidTrajectoryError("step entropy outside [0, ln(vocab size)]");
  }
}

std::vector<double> normalize_group_advantages(const std::vector<double>& rewards) {
  const size_t g = rewards.size();
  if (g < 2) throw InvalidGroupError("group size must be >= 2");

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population variance
  const double denom = std::max(std::sqrt(var), kAdvantageStdFloor);

  std::vector<double> adv(g);
  for (size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

double aggregate_reward(const RewardBreakdown& parts, const RewardConfig& cfg) {
  struct Component {
    const char* name;
    double value;
    double alpha;
  };
  const Component components[] = {
      {"r_intl", parts.r_intl, cfg.alpha_intl},
      {"r_sim", parts.r_sim, cfg.alpha_sim},
      {"r_len", parts.r_len, cfg.alpha_len},
      {"r_ent", parts.r_ent, cfg.alpha_ent},
      {"r_pro", parts.r_pro, cfg.alpha_pro},
  };
  double total = 0.0;
  for (const auto& c : components) {
    if (!std::isfinite(c.value))
      throw RewardError(c.name, "non-finite reward component");
    total += c.alpha * c.value;
  }
  return total;
}

}  // namespace ttsrl
