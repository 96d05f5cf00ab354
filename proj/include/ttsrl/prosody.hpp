#ifndef TTSRL_PROSODY_HPP_
#define TTSRL_PROSODY_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ttsrl/core_types.hpp"
#include "ttsrl/sim_env.hpp"

namespace ttsrl {

// Two pause-label schemes: four numeric strength levels (#1..#4), or the
// two-level prosodic-word / prosodic-phrase hierarchy. The pw_pph scheme
// reuses the numeric machinery with level 1 = PW and level 2 = PPH.
enum class PauseScheme { kNumeric, kPwPph };

constexpr int kPwLevel = 1;
constexpr int kPphLevel = 2;

const char* pause_scheme_name(PauseScheme scheme);
PauseScheme parse_pause_scheme(const std::string& name);

struct PauseMarker {
  int position = 0;  // inter-word index into the transcript
  int level = 0;     // numeric: 1..4; pw_pph: kPwLevel or kPphLevel
  bool operator==(const PauseMarker&) const = default;
};

struct PauseSequence {
  PauseScheme scheme = PauseScheme::kNumeric;
  std::vector<PauseMarker> markers;  // positions strictly increasing
  bool operator==(const PauseSequence&) const = default;
};

struct PauseTemplateSet {
  int64_t text_id = 0;
  PauseScheme scheme = PauseScheme::kNumeric;
  std::vector<PauseSequence> templates;  // non-empty, pairwise distinct
};

struct ProsodyConfig {
  // Silence duration d maps to the largest level l with d >= thresholds[l-1];
  // below thresholds[0] no marker is emitted. Defaults round-trip the
  // synthesis pause durations exactly.
  std::array<double, kNumPauseLevels> thresholds = {0.05, 0.15, 0.30, 0.50};
  // Numeric levels <= pw_max_level map to PW, the rest to PPH.
  int pw_max_level = 2;
  bool operator==(const ProsodyConfig&) const = default;
};

// Throws ConfigError when positions are not strictly increasing or a level
// is outside the scheme's range.
void validate_pause_sequence(const PauseSequence& seq);

// Rule-based silence -> marker mapping. Thresholds must be strictly
// ascending (ConfigError otherwise); silence durations must be positive.
PauseSequence map_silences_to_markers(const std::vector<SilenceSegment>& silences,
                                      const std::array<double, kNumPauseLevels>& thresholds);

// Band conversion between schemes; numeric -> pw_pph per cfg.pw_max_level.
// Converting to the sequence's own scheme is the identity.
PauseSequence convert_scheme(const PauseSequence& seq, PauseScheme target,
                             const ProsodyConfig& cfg);

// Produces candidate pause structures for a text. Implementations must
// return at least one valid PauseSequence or throw.
class AnnotatorInterface {
 public:
  virtual ~AnnotatorInterface() = default;
  virtual std::vector<PauseSequence> annotate(const Text& text, int max_candidates) = 0;
  virtual PauseScheme scheme() const = 0;
};

// Deterministic built-in annotator:
//   - period symbol at index i  -> marker (i+1, #4)
//   - comma symbol at index i   -> marker (i+1, #3)
//   - every 6th consecutive unbroken symbol -> intra-clause break, levels
//     alternating #1, #2, #1, ... within the clause (only mid-text).
// For the pw_pph scheme the numeric pattern is band-converted.
class RuleAnnotator : public AnnotatorInterface {
 public:
  RuleAnnotator(Alphabet alphabet, PauseScheme scheme, ProsodyConfig cfg = {})
      : alphabet_(alphabet), scheme_(scheme), cfg_(cfg) {}
  std::vector<PauseSequence> annotate(const Text& text, int max_candidates) override;
  PauseScheme scheme() const override { return scheme_; }

 private:
  Alphabet alphabet_;
  PauseScheme scheme_;
  ProsodyConfig cfg_;
};

// Seeded stochastic annotator: perturbs the rule annotation to produce up
// to max_candidates distinct alternatives. Used for tests and for emitting
// multi-member template sets.
class StochasticAnnotator : public AnnotatorInterface {
 public:
  StochasticAnnotator(Alphabet alphabet, PauseScheme scheme, uint64_t seed,
                      ProsodyConfig cfg = {})
      : rule_(alphabet, scheme, cfg), scheme_(scheme), seed_(seed) {}
  std::vector<PauseSequence> annotate(const Text& text, int max_candidates) override;
  PauseScheme scheme() const override { return scheme_; }

 private:
  RuleAnnotator rule_;
  PauseScheme scheme_;
  uint64_t seed_;
  uint64_t call_index_ = 0;
};

// Template file: UTF-8, one JSON record per line, fields
//   {"text_id": int, "scheme": "numeric"|"pw_pph",
//    "text": [symbol ids], "patterns": [[[position, level], ...], ...]}
// Duplicate text_ids: last record wins (warning to stderr). Duplicate
// patterns within a record are deduplicated.
std::map<int64_t, PauseTemplateSet> load_templates(const std::string& path);

struct AnnotationInput {
  int64_t text_id = 0;
  Text text;
};

// Runs the annotator over the texts and writes the template file consumed
// by load_templates. Texts whose annotation throws are skipped and counted.
struct AnnotateReport {
  size_t written = 0;
  size_t skipped = 0;
};
AnnotateReport annotate_offline(const std::vector<AnnotationInput>& texts,
                                AnnotatorInterface& annotator, int candidates_per_text,
                                const std::string& out_path);

}  // namespace ttsrl

#endif  // TTSRL_PROSODY_HPP_
