#include "ttsrl/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "ttsrl/errors.hpp"
#include "ttsrl/rng.hpp"

namespace ttsrl {

using ordered_json = nlohmann::ordered_json;

const char* task_name(TaskName task) {
  switch (task) {
    case TaskName::kLengthControl: return "length_control";
    case TaskName::kPauseMatch: return "pause_match";
    case TaskName::kContentCopy: return "content_copy";
    case TaskName::kCombined: return "combined";
  }
  return "combined";
}

TaskName parse_task_name(const std::string& name) {
  if (name == "length_control") return TaskName::kLengthControl;
  if (name == "pause_match") return TaskName::kPauseMatch;
  if (name == "content_copy") return TaskName::kContentCopy;
  if (name == "combined") return TaskName::kCombined;
  throw ValidationError("unknown task name: " + name);
}

bool task_has_templates(TaskName task) {
  return task == TaskName::kPauseMatch || task == TaskName::kCombined;
}

void validate_task_spec(const TaskSpec& spec, const Alphabet& alphabet) {
  if (spec.prompt_count < 1) throw ConfigError("prompt_count must be >= 1");
  if (spec.len_min < 1 || spec.len_max < spec.len_min)
    throw ConfigError("text length range is empty");
  if (task_has_templates(spec.name) && spec.len_min < 4)
    throw ConfigError("punctuated tasks need len_min >= 4");
  if (alphabet.n_symbols < 3) throw ConfigError("alphabet too small");
  if (alphabet.comma < 0 || alphabet.comma >= alphabet.n_symbols ||
      alphabet.period < 0 || alphabet.period >= alphabet.n_symbols ||
      alphabet.comma == alphabet.period)
    throw ConfigError("punctuation symbols invalid");
}

namespace {

std::vector<int> plain_symbols(const Alphabet& alphabet) {
  std::vector<int> out;
  for (int s = 0; s < alphabet.n_symbols; ++s) {
    if (s != alphabet.comma && s != alphabet.period) out.push_back(s);
  }
  return out;
}

Text make_text(Rng& rng, int length, bool punctuated, const Alphabet& alphabet,
               const std::vector<int>& plain) {
  Text text;
  text.symbols.reserve(length);
  if (!punctuated) {
    for (int i = 0; i < length; ++i)
      text.symbols.push_back(plain[rng.next_below(plain.size())]);
    return text;
  }
  // Clauses of 3-6 plain symbols separated by commas, closed by a period;
  // the layout packs the requested length exactly.
  int remaining = length;
  while (remaining > 0) {
    if (remaining <= 8) {
      for (int i = 0; i < remaining - 1; ++i)
        text.symbols.push_back(plain[rng.next_below(plain.size())]);
      text.symbols.push_back(alphabet.period);
      break;
    }
    const int clause = 3 + static_cast<int>(rng.next_below(4));
    for (int i = 0; i < clause; ++i)
      text.symbols.push_back(plain[rng.next_below(plain.size())]);
    text.symbols.push_back(alphabet.comma);
    remaining -= clause + 1;
  }
  return text;
}

}  // namespace

std::vector<DatasetRecord> generate_tasks(const TaskSpec& spec, const Alphabet& alphabet) {
  validate_task_spec(spec, alphabet);
  const Vocab vocab = make_vocab(alphabet);
  const bool punctuated = task_has_templates(spec.name);
  const std::vector<int> plain = plain_symbols(alphabet);
  RuleAnnotator ref_annotator(alphabet, PauseScheme::kNumeric);

  std::vector<DatasetRecord> records;
  records.reserve(spec.prompt_count);
  for (int i = 0; i < spec.prompt_count; ++i) {
    Rng rng = Rng::stream(spec.seed, {rng_tag::kTaskGen, static_cast<uint64_t>(i)});
    DatasetRecord rec;
    rec.id = i;
    rec.task = spec.name;
    rec.scheme = punctuated && i % 2 == 1 ? PauseScheme::kPwPph : PauseScheme::kNumeric;

    const int span = spec.len_max - spec.len_min + 1;
    const int target_len = spec.len_min + static_cast<int>(rng.next_below(span));
    const int ref_len = spec.len_min + static_cast<int>(rng.next_below(span));
    rec.target_text = make_text(rng, target_len, punctuated, alphabet, plain);
    rec.ref_text = make_text(rng, ref_len, punctuated, alphabet, plain);

    if (punctuated) {
      const PauseSequence ref_pattern = ref_annotator.annotate(rec.ref_text, 1)[0];
      rec.ref_actions = oracle_actions(rec.ref_text, &ref_pattern, vocab);
    } else {
      rec.ref_actions = oracle_actions(rec.ref_text, nullptr, vocab);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<int> oracle_actions(const Text& text, const PauseSequence* pattern,
                                const Vocab& vocab) {
  if (pattern != nullptr && pattern->scheme != PauseScheme::kNumeric)
    throw ConfigError("oracle_actions needs a numeric pause pattern");

  std::vector<int> actions;
  size_t marker_idx = 0;
  const size_t n_markers = pattern ? pattern->markers.size() : 0;
  for (size_t i = 0; i <= text.length(); ++i) {
    while (marker_idx < n_markers &&
           pattern->markers[marker_idx].position == static_cast<int>(i)) {
      actions.push_back(vocab.pause_token(pattern->markers[marker_idx].level));
      ++marker_idx;
    }
    if (i < text.length()) actions.push_back(vocab.symbol_token(text.symbols[i]));
  }
  return actions;
}

PauseSequence canonical_numeric_pattern(const PauseSequence& pattern) {
  if (pattern.scheme == PauseScheme::kNumeric) return pattern;
  PauseSequence out;
  out.scheme = PauseScheme::kNumeric;
  for (const PauseMarker& m : pattern.markers) {
    out.markers.push_back({m.position, m.level == kPwLevel ? 1 : 4});
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open dataset for writing: " + path);
  for (const DatasetRecord& rec : records) {
    ordered_json j;
    j["id"] = rec.id;
    j["task"] = task_name(rec.task);
    j["scheme"] = pause_scheme_name(rec.scheme);
    j["target_text"] = rec.target_text.symbols;
    j["ref_text"] = rec.ref_text.symbols;
    j["ref_actions"] = rec.ref_actions;
    out << j.dump() << "\n";
  }
  if (!out) throw ValidationError("dataset write failed: " + path);
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      ordered_json j = ordered_json::parse(line);
      DatasetRecord rec;
      rec.id = j.at("id").get<int64_t>();
      rec.task = parse_task_name(j.at("task").get<std::string>());
      rec.scheme = parse_pause_scheme(j.at("scheme").get<std::string>());
      rec.target_text.symbols = j.at("target_text").get<std::vector<int>>();
      rec.ref_text.symbols = j.at("ref_text").get<std::vector<int>>();
      rec.ref_actions = j.at("ref_actions").get<std::vector<int>>();
      if (rec.target_text.length() == 0 || rec.ref_text.length() == 0)
        throw ValidationError("empty text");
      records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw ValidationError("dataset " + path + " line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  return records;
}

std::map<int64_t, PauseTemplateSet> build_task_templates(
    const std::vector<DatasetRecord>& records, const Alphabet& alphabet,
    const ProsodyConfig& prosody) {
  RuleAnnotator numeric(alphabet, PauseScheme::kNumeric, prosody);
  RuleAnnotator pw_pph(alphabet, PauseScheme::kPwPph, prosody);
  std::map<int64_t, PauseTemplateSet> out;
  for (const DatasetRecord& rec : records) {
    if (!task_has_templates(rec.task)) continue;
    RuleAnnotator& annotator = rec.scheme == PauseScheme::kNumeric ? numeric : pw_pph;
    PauseTemplateSet set;
    set.text_id = rec.id;
    set.scheme = rec.scheme;
    set.templates = annotator.annotate(rec.target_text, 1);
    out[rec.id] = std::move(set);
  }
  return out;
}

void annotate_records(const std::string& path, const std::vector<DatasetRecord>& records,
                      const Alphabet& alphabet, const ProsodyConfig& prosody, int candidates,
                      std::optional<uint64_t> stochastic_seed) {
  std::unique_ptr<AnnotatorInterface> numeric, pw_pph;
  if (stochastic_seed.has_value()) {
    numeric = std::make_unique<StochasticAnnotator>(alphabet, PauseScheme::kNumeric,
                                                    *stochastic_seed, prosody);
    pw_pph = std::make_unique<StochasticAnnotator>(alphabet, PauseScheme::kPwPph,
                                                   *stochastic_seed + 1, prosody);
  } else {
    numeric = std::make_unique<RuleAnnotator>(alphabet, PauseScheme::kNumeric, prosody);
    pw_pph = std::make_unique<RuleAnnotator>(alphabet, PauseScheme::kPwPph, prosody);
  }

  std::vector<AnnotationInput> numeric_inputs;
  std::vector<AnnotationInput> pw_inputs;
  for (const DatasetRecord& rec : records) {
    if (!task_has_templates(rec.task)) continue;
    (rec.scheme == PauseScheme::kNumeric ? numeric_inputs : pw_inputs)
        .push_back({rec.id, rec.target_text});
  }

  // Both schemes end up in one file; records are sorted by text_id so the
  // output does not depend on scheme interleaving.
  const std::string tmp_pw = path + ".pw.tmp";
  annotate_offline(numeric_inputs, *numeric, candidates, path);
  annotate_offline(pw_inputs, *pw_pph, candidates, tmp_pw);

  std::vector<std::pair<int64_t, std::string>> lines;
  for (const std::string& p : {path, tmp_pw}) {
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      lines.emplace_back(ordered_json::parse(line).at("text_id").get<int64_t>(), line);
    }
  }
  std::sort(lines.begin(), lines.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::remove(tmp_pw.c_str());

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open template file for writing: " + path);
  for (const auto& [id, line] : lines) out << line << "\n";
}

void write_task_templates(const std::string& path, const std::vector<DatasetRecord>& records,
                          const Alphabet& alphabet, const ProsodyConfig& prosody) {
  annotate_records(path, records, alphabet, prosody, 1, std::nullopt);
}

}  // namespace ttsrl
