#ifndef TTSRL_TASKS_HPP_
#define TTSRL_TASKS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttsrl/core_types.hpp"
#include "ttsrl/prosody.hpp"

namespace ttsrl {

// Desk-scale toy tasks. Each dataset record pairs a target text with a
// reference text and the reference's token realization, mirroring a
// (ref_text, ref_speech, target_text) triplet.
enum class TaskName { kLengthControl, kPauseMatch, kContentCopy, kCombined };

const char* task_name(TaskName task);
TaskName parse_task_name(const std::string& name);

// Tasks with punctuated texts also ship pause templates.
bool task_has_templates(TaskName task);

struct TaskSpec {
  TaskName name = TaskName::kCombined;
  int prompt_count = 64;
  int len_min = 10;
  int len_max = 100;
  uint64_t seed = 0;
  bool operator==(const TaskSpec&) const = default;
};

void validate_task_spec(const TaskSpec& spec, const Alphabet& alphabet);

struct DatasetRecord {
  int64_t id = 0;
  TaskName task = TaskName::kCombined;
  PauseScheme scheme = PauseScheme::kNumeric;
  Text target_text;
  Text ref_text;
  std::vector<int> ref_actions;
};

// Deterministic in (spec, alphabet): record i draws only from the stream
// (spec.seed, kTaskGen, i). Punctuated tasks alternate the pause scheme
// per record (even ids numeric, odd ids pw_pph).
std::vector<DatasetRecord> generate_tasks(const TaskSpec& spec, const Alphabet& alphabet);

// Token realization of a text: one grapheme token per symbol, with pause
// tokens inserted after the marker positions of `pattern` (numeric scheme;
// pass null for a pause-free realization). No eos is appended.
std::vector<int> oracle_actions(const Text& text, const PauseSequence* pattern,
                                const Vocab& vocab);

// Canonical numeric realization of a (possibly pw_pph) pattern: PW -> #1,
// PPH -> #4; numeric patterns pass through.
PauseSequence canonical_numeric_pattern(const PauseSequence& pattern);

// Dataset file: one JSON record per line, fields
//   {"id", "task", "scheme", "target_text", "ref_text", "ref_actions"}.
void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> load_dataset(const std::string& path);

// Writes the pause-template file for every record of a template-bearing
// task (rule annotator, one pattern per text, converted per record scheme).
void write_task_templates(const std::string& path, const std::vector<DatasetRecord>& records,
                          const Alphabet& alphabet, const ProsodyConfig& prosody = {});

// Same templates, built in memory without touching the filesystem.
std::map<int64_t, PauseTemplateSet> build_task_templates(
    const std::vector<DatasetRecord>& records, const Alphabet& alphabet,
    const ProsodyConfig& prosody = {});

// General annotation pass over a dataset: rule-based by default, seeded
// stochastic when a seed is given, up to `candidates` patterns per text.
void annotate_records(const std::string& path, const std::vector<DatasetRecord>& records,
                      const Alphabet& alphabet, const ProsodyConfig& prosody, int candidates,
                      std::optional<uint64_t> stochastic_seed);

}  // namespace ttsrl

#endif  // TTSRL_TASKS_HPP_
