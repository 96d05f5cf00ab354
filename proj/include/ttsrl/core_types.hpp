#ifndef TTSRL_CORE_TYPES_HPP_
#define TTSRL_CORE_TYPES_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace ttsrl {

// Number of discrete pause-strength levels carried by the token alphabet.
constexpr int kNumPauseLevels = 4;

// Guard against division blowup when a rollout group has (near-)zero reward
// variance; such groups yield all-zero advantages.
constexpr double kAdvantageStdFloor = 1e-8;

// Symbol alphabet for texts. Two symbols act as punctuation: a weak
// clause separator ("comma") and a strong sentence terminator ("period").
struct Alphabet {
  int n_symbols = 16;
  int comma = 14;
  int period = 15;
  bool operator==(const Alphabet&) const = default;
};

// Token alphabet of the policy. Layout: [bos, eos, pad, pause#1..#4,
// grapheme tokens]. One grapheme token per text symbol.
struct Vocab {
  int size = 0;
  int bos = 0;
  int eos = 1;
  int pad = 2;
  int pause_begin = 3;  // pause levels 1..4 occupy [pause_begin, pause_begin+4)
  int grapheme_begin = 7;
  int n_graphemes = 0;

  bool is_pause(int token) const {
    return token >= pause_begin && token < pause_begin + kNumPauseLevels;
  }
  // 1-based pause level for a pause token.
  int pause_level(int token) const { return token - pause_begin + 1; }
  int pause_token(int level) const { return pause_begin + level - 1; }
  bool is_grapheme(int token) const {
    return token >= grapheme_begin && token < grapheme_begin + n_graphemes;
  }
  int grapheme_symbol(int token) const { return token - grapheme_begin; }
  int symbol_token(int symbol) const { return grapheme_begin + symbol; }
  bool is_special(int token) const {
    return token == bos || token == eos || token == pad;
  }
  bool operator==(const Vocab&) const = default;
};

Vocab make_vocab(const Alphabet& alphabet);

// Throws ConfigError when ids collide, exceed size, or ranges overlap.
void validate_vocab(const Vocab& vocab);

// A prompt or transcript: a sequence of symbol ids over the Alphabet.
struct Text {
  std::vector<int> symbols;

  size_t length() const { return symbols.size(); }
  bool operator==(const Text& other) const = default;
};

// One sampled token sequence with per-step log-probabilities (of the
// filtered sampling distribution) and per-step entropies in nats.
struct Trajectory {
  Text prompt;
  std::vector<int> actions;
  std::vector<double> step_logprobs;
  std::vector<double> step_entropies;
  bool terminated_by_eos = false;

  size_t length() const { return actions.size(); }
};

// Throws InvalidTrajectoryError on length mismatch, T = 0, or entropies
// outside [0, ln(vocab size)].
void validate_trajectory(const Trajectory& traj, const Vocab& vocab);

// The five reward components and their weighted total.
struct RewardBreakdown {
  double r_intl = 0.0;
  double r_sim = 0.0;
  double r_len = 0.0;
  double r_ent = 0.0;
  double r_pro = 0.0;
  double total = 0.0;
};

struct RewardConfig {
  double alpha_intl = 1.0;
  double alpha_sim = 1.0;
  double alpha_len = 0.1;
  double alpha_ent = 1.0;
  double alpha_pro = 1.0;
  double len_a = 0.8;   // lower tolerance bound on normalized speaking rate
  double len_b = 1.25;  // upper bound; symmetric on log scale around 1
  double lambda_ent = 1.0;
  double h_target = 0.0;
  double h_target_percentile = 75.0;
  bool clamp_intl = false;
  bool operator==(const RewardConfig&) const = default;
};

// Group of rollouts for one prompt, scored and normalized together.
struct RolloutGroup {
  Text prompt;
  std::vector<Trajectory> members;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;

  size_t size() const { return members.size(); }
};

// (r_i - mean) / max(population std, kAdvantageStdFloor). Zero-variance
// groups map to all-zero advantages. Throws InvalidGroupError for G < 2.
std::vector<double> normalize_group_advantages(const std::vector<double>& rewards);

// Weighted sum of the five components under cfg's alpha coefficients.
// Throws RewardError naming the first non-finite component.
double aggregate_reward(const RewardBreakdown& parts, const RewardConfig& cfg);

}  // namespace ttsrl

#endif  // TTSRL_CORE_TYPES_HPP_
