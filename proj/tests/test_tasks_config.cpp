#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ttsrl/config.hpp"
#include "ttsrl/errors.hpp"
#include "ttsrl/tasks.hpp"

using namespace ttsrl;

namespace {

const Alphabet kAlphabet;
const Vocab kVocab = make_vocab(kAlphabet);

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generate_tasks: deterministic output") {
  TaskSpec spec;
  spec.name = TaskName::kCombined;
  spec.prompt_count = 10;
  spec.len_min = 8;
  spec.len_max = 20;
  spec.seed = 7;

  const std::string path_a = temp_path("ttsrl_tasks_a.jsonl");
  const std::string path_b = temp_path("ttsrl_tasks_b.jsonl");
  save_dataset(path_a, generate_tasks(spec, kAlphabet));
  save_dataset(path_b, generate_tasks(spec, kAlphabet));
  CHECK(slurp(path_a) == slurp(path_b));
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST_CASE("generate_tasks: exact lengths for a degenerate range") {
  TaskSpec spec;
  spec.name = TaskName::kContentCopy;
  spec.prompt_count = 20;
  spec.len_min = 5;
  spec.len_max = 5;
  spec.seed = 3;
  for (const DatasetRecord& rec : generate_tasks(spec, kAlphabet)) {
    CHECK(rec.target_text.length() == 5);
    CHECK(rec.ref_text.length() == 5);
  }
}

TEST_CASE("generate_tasks: punctuated tasks pack the requested length exactly") {
  TaskSpec spec;
  spec.name = TaskName::kPauseMatch;
  spec.prompt_count = 30;
  spec.len_min = 6;
  spec.len_max = 24;
  spec.seed = 11;
  int numeric = 0, pw = 0;
  for (const DatasetRecord& rec : generate_tasks(spec, kAlphabet)) {
    CHECK(rec.target_text.length() >= 6);
    CHECK(rec.target_text.length() <= 24);
    CHECK(rec.target_text.symbols.back() == kAlphabet.period);
    (rec.scheme == PauseScheme::kNumeric ? numeric : pw)++;
  }
  CHECK(numeric == 15);
  CHECK(pw == 15);
}

TEST_CASE("generate_tasks: combined records all carry templates") {
  TaskSpec spec;
  spec.name = TaskName::kCombined;
  spec.prompt_count = 12;
  spec.len_min = 6;
  spec.len_max = 18;
  spec.seed = 2;
  auto records = generate_tasks(spec, kAlphabet);
  auto templates = build_task_templates(records, kAlphabet);
  for (const DatasetRecord& rec : records) {
    REQUIRE(templates.count(rec.id) == 1);
    CHECK_FALSE(templates.at(rec.id).templates.empty());
    CHECK(templates.at(rec.id).scheme == rec.scheme);
  }
}

TEST_CASE("oracle_actions: realizes text and pauses") {
  Text text;
  text.symbols = {3, 5, kAlphabet.comma, 2, kAlphabet.period};
  PauseSequence pattern;
  pattern.markers = {{3, 3}, {5, 4}};
  const auto actions = oracle_actions(text, &pattern, kVocab);
  const std::vector<int> expected = {
      kVocab.symbol_token(3),  kVocab.symbol_token(5), kVocab.symbol_token(kAlphabet.comma),
      kVocab.pause_token(3),   kVocab.symbol_token(2), kVocab.symbol_token(kAlphabet.period),
      kVocab.pause_token(4)};
  CHECK(actions == expected);

  // Pause-free realization.
  const auto plain = oracle_actions(text, nullptr, kVocab);
  CHECK(plain.size() == text.length());
}

TEST_CASE("canonical numeric pattern from pw_pph") {
  PauseSequence pw;
  pw.scheme = PauseScheme::kPwPph;
  pw.markers = {{2, kPwLevel}, {5, kPphLevel}};
  PauseSequence numeric = canonical_numeric_pattern(pw);
  CHECK(numeric.scheme == PauseScheme::kNumeric);
  CHECK(numeric.markers[0].level == 1);
  CHECK(numeric.markers[1].level == 4);

  // Band conversion recovers the original labels.
  CHECK(convert_scheme(numeric, PauseScheme::kPwPph, ProsodyConfig{}) == pw);
}

TEST_CASE("dataset: save and load round trip") {
  TaskSpec spec;
  spec.name = TaskName::kCombined;
  spec.prompt_count = 6;
  spec.len_min = 6;
  spec.len_max = 12;
  spec.seed = 5;
  auto records = generate_tasks(spec, kAlphabet);
  const std::string path = temp_path("ttsrl_dataset_roundtrip.jsonl");
  save_dataset(path, records);
  auto loaded = load_dataset(path);
  REQUIRE(loaded.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].id == records[i].id);
    CHECK(loaded[i].task == records[i].task);
    CHECK(loaded[i].scheme == records[i].scheme);
    CHECK(loaded[i].target_text == records[i].target_text);
    CHECK(loaded[i].ref_text == records[i].ref_text);
    CHECK(loaded[i].ref_actions == records[i].ref_actions);
  }
  std::remove(path.c_str());
}

TEST_CASE("task templates: file matches the in-memory build") {
  TaskSpec spec;
  spec.name = TaskName::kPauseMatch;
  spec.prompt_count = 8;
  spec.len_min = 6;
  spec.len_max = 16;
  spec.seed = 9;
  auto records = generate_tasks(spec, kAlphabet);
  const std::string path = temp_path("ttsrl_task_templates.jsonl");
  write_task_templates(path, records, kAlphabet);
  auto from_file = load_templates(path);
  auto in_memory = build_task_templates(records, kAlphabet);
  REQUIRE(from_file.size() == in_memory.size());
  for (const auto& [id, set] : in_memory) {
    REQUIRE(from_file.count(id) == 1);
    CHECK(from_file.at(id).scheme == set.scheme);
    CHECK(from_file.at(id).templates == set.templates);
  }
  std::remove(path.c_str());
}

TEST_CASE("config: round trip is the identity") {
  RunConfig cfg;
  cfg.run.out_dir = "somewhere/else";
  cfg.run.seed = 99;
  cfg.sampler.top_k = 50;
  cfg.reward.alpha_len = 0.25;
  cfg.reward_extras.h_target_auto = true;
  cfg.grpo.total_steps = 1234;
  cfg.task.name = TaskName::kPauseMatch;
  cfg.task.len_min = 6;
  cfg.prosody.thresholds = {0.04, 0.1, 0.2, 0.9};

  RunConfig back = config_from_json(config_to_json(cfg));
  CHECK(back == cfg);

  const std::string path = temp_path("ttsrl_config_roundtrip.json");
  save_config(path, cfg);
  RunConfig from_file = load_config(path);
  CHECK(from_file == cfg);
  std::remove(path.c_str());
}

TEST_CASE("config: unknown keys are rejected") {
  nlohmann::ordered_json j = config_to_json(RunConfig{});
  j["sampler"]["top_q"] = 3;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("config: validation lists every problem at once") {
  RunConfig cfg;
  cfg.sampler.top_p = 1.5;           // invalid
  cfg.grpo.group_size = 1;           // invalid
  cfg.reward.len_a = 2.0;            // invalid (a >= b)
  cfg.task.prompt_count = 0;         // invalid
  try {
    validate_config(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("top_p") != std::string::npos);
    CHECK(msg.find("group_size") != std::string::npos);
    CHECK(msg.find("len_a") != std::string::npos);
    CHECK(msg.find("prompt_count") != std::string::npos);
  }
}

TEST_CASE("config: missing referenced paths are reported") {
  RunConfig cfg;
  cfg.paths.dataset = "/nonexistent/dataset.jsonl";
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}
