#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ttsrl/errors.hpp"
#include "ttsrl/harness.hpp"

using namespace ttsrl;

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ordered_json> read_records(const std::string& path) {
  std::vector<ordered_json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(ordered_json::parse(line));
  }
  return out;
}

// Small, fast run description shared by the harness tests.
RunConfig tiny_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.run.out_dir = out_dir;
  cfg.run.seed = 5;
  cfg.run.eval_prompt_count = 4;
  cfg.run.eval_rollouts = 2;
  cfg.policy.embed_dim = 4;
  cfg.policy.hidden_dim = 8;
  cfg.sampler.max_len = 16;
  cfg.reward.alpha_pro = 0.0;
  cfg.reward.h_target = 2.0;
  cfg.grpo.group_size = 3;
  cfg.grpo.batch_size = 2;
  cfg.grpo.learning_rate = 0.02;
  cfg.grpo.total_steps = 3;
  cfg.task.name = TaskName::kLengthControl;
  cfg.task.prompt_count = 6;
  cfg.task.len_min = 5;
  cfg.task.len_max = 9;
  cfg.task.seed = 40;
  return cfg;
}

RunConfig tiny_pause_config(const std::string& out_dir) {
  RunConfig cfg = tiny_config(out_dir);
  cfg.reward.alpha_pro = 1.0;
  cfg.task.name = TaskName::kCombined;
  cfg.task.len_min = 6;
  cfg.task.len_max = 12;
  return cfg;
}

}  // namespace

TEST_CASE("load_run: materializes cases and held-out prompts") {
  RunConfig cfg = tiny_pause_config(fresh_dir("ttsrl_loadrun"));
  LoadedRun run = load_run(cfg);
  CHECK(run.train_cases.size() == 6);
  CHECK(run.eval_cases.size() == 4);
  for (const PromptCase& pc : run.train_cases) {
    CHECK(pc.target.length() >= 6);
    CHECK(pc.ref.ref_rate > 0.0);
    CHECK(pc.templates != nullptr);
  }
  // Held-out prompts differ from training prompts.
  bool all_same = true;
  for (const PromptCase& e : run.eval_cases) {
    bool found = false;
    for (const PromptCase& t : run.train_cases) found |= e.target == t.target;
    all_same &= found;
  }
  CHECK_FALSE(all_same);
}

TEST_CASE("evaluate_actions: oracle sequences score perfectly") {
  RunConfig cfg = tiny_pause_config(fresh_dir("ttsrl_oracle_eval"));
  LoadedRun run = load_run(cfg);

  std::vector<std::vector<int>> actions;
  for (const PromptCase& pc : run.eval_cases) {
    REQUIRE(pc.templates != nullptr);
    const PauseSequence numeric = canonical_numeric_pattern(pc.templates->templates[0]);
    actions.push_back(oracle_actions(pc.target, &numeric, run.vocab));
  }
  EvalMetrics m = evaluate_actions(run.eval_cases, actions, run.vocab, cfg.reward, cfg.prosody);
  CHECK(m.cer == doctest::Approx(0.0));
  CHECK(m.pause_match_valid);
  CHECK(m.pause_match == doctest::Approx(1.0));
  CHECK(m.mean_entropy == 0.0);
}

TEST_CASE("run_training: metric stream structure") {
  RunConfig cfg = tiny_config(fresh_dir("ttsrl_train_stream"));
  TrainOutcome out = run_training(cfg);

  auto records = read_records(out.metrics_path);
  REQUIRE(records.size() >= 5);  // initial eval + 3 steps + final eval + summary
  CHECK(records.front().at("kind") == "eval");
  CHECK(records.front().at("step") == 0);

  int step_count = 0;
  for (const auto& rec : records) {
    if (rec.at("kind") == "step") {
      CHECK(rec.at("step") == step_count);
      ++step_count;
    }
  }
  CHECK(step_count == 3);
  CHECK(records.back().at("kind") == "summary");
  CHECK(records.back().at("total_steps") == 3);
  CHECK(fs::exists(out.final_checkpoint));
}

TEST_CASE("run_training: byte-identical reruns") {
  RunConfig a = tiny_config(fresh_dir("ttsrl_det_a"));
  RunConfig b = tiny_config(fresh_dir("ttsrl_det_b"));
  TrainOutcome out_a = run_training(a);
  TrainOutcome out_b = run_training(b);
  CHECK(slurp(out_a.metrics_path) == slurp(out_b.metrics_path));
}

TEST_CASE("run_training: zero steps writes an initial evaluation summary") {
  RunConfig cfg = tiny_config(fresh_dir("ttsrl_zero_steps"));
  cfg.grpo.total_steps = 0;
  TrainOutcome out = run_training(cfg);
  auto records = read_records(out.metrics_path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].at("kind") == "eval");
  CHECK(records[1].at("kind") == "summary");
  CHECK(records[1].at("mean_reward") == records[0].at("mean_reward"));
}

TEST_CASE("run_training: resume continues the step index") {
  const std::string dir = fresh_dir("ttsrl_resume");
  RunConfig cfg = tiny_config(dir);
  cfg.grpo.total_steps = 2;
  TrainOutcome first = run_training(cfg);

  cfg.grpo.total_steps = 4;
  TrainOutcome second = run_training(cfg, first.final_checkpoint);
  auto records = read_records(second.metrics_path);

  std::vector<int> steps;
  for (const auto& rec : records) {
    if (rec.at("kind") == "step") steps.push_back(rec.at("step").get<int>());
  }
  CHECK(steps == std::vector<int>{0, 1, 2, 3});

  // A resumed continuation matches an uninterrupted run of the same length.
  RunConfig full = tiny_config(fresh_dir("ttsrl_resume_full"));
  full.grpo.total_steps = 4;
  TrainOutcome whole = run_training(full);
  CHECK(whole.final_params.theta == second.final_params.theta);
}

TEST_CASE("run_eval: matches the step-0 eval record of a fresh run") {
  const std::string dir = fresh_dir("ttsrl_eval_match");
  RunConfig cfg = tiny_config(dir);
  cfg.grpo.total_steps = 0;
  TrainOutcome out = run_training(cfg);

  EvalMetrics m = run_eval(cfg, out.final_checkpoint);
  auto records = read_records(out.metrics_path);
  const ordered_json& step0 = records[0];
  CHECK(m.cer == step0.at("cer").get<double>());
  CHECK(m.mean_sim == step0.at("mean_sim").get<double>());
  CHECK(m.len_in_tol == step0.at("len_in_tol").get<double>());
  CHECK(m.mean_entropy == step0.at("mean_entropy").get<double>());
  CHECK(m.mean_reward == step0.at("mean_reward").get<double>());
}

TEST_CASE("run_eval: architecture mismatch is a version error") {
  const std::string dir = fresh_dir("ttsrl_eval_mismatch");
  RunConfig cfg = tiny_config(dir);
  cfg.grpo.total_steps = 0;
  TrainOutcome out = run_training(cfg);

  RunConfig other = cfg;
  other.policy.hidden_dim = cfg.policy.hidden_dim * 2;
  CHECK_THROWS_AS(run_eval(other, out.final_checkpoint), ValidationError);
}

TEST_CASE("run_ablation: four rungs with zeroed coefficients in order") {
  RunConfig cfg = tiny_pause_config(fresh_dir("ttsrl_ablate"));
  cfg.grpo.total_steps = 1;
  const std::string path = run_ablation(cfg, /*n_seeds=*/1);

  auto records = read_records(path);
  REQUIRE(!records.empty());
  CHECK(records[0].at("kind") == "header");
  CHECK(records[0].at("rungs").size() == 4);

  std::vector<std::string> rung_names;
  int rung_rows = 0, mean_rows = 0;
  for (const auto& rec : records) {
    const std::string kind = rec.at("kind");
    if (kind == "rung") {
      ++rung_rows;
      rung_names.push_back(rec.at("name"));
      CHECK(rec.contains("pause_match"));
      CHECK(rec.contains("composite"));
    }
    if (kind == "rung_mean") ++mean_rows;
  }
  CHECK(rung_rows == 4);
  CHECK(mean_rows == 4);
  CHECK(rung_names == std::vector<std::string>{"intl_sim", "plus_len", "plus_ent", "full"});

  // Rung 1 trained with length/entropy/prosody weights zeroed.
  RunConfig rung1 = load_config(cfg.run.out_dir + "/ablate_rung1_seed0/config.json");
  CHECK(rung1.reward.alpha_len == 0.0);
  CHECK(rung1.reward.alpha_ent == 0.0);
  CHECK(rung1.reward.alpha_pro == 0.0);
  CHECK(rung1.reward.alpha_intl == cfg.reward.alpha_intl);
  RunConfig rung4 = load_config(cfg.run.out_dir + "/ablate_rung4_seed0/config.json");
  CHECK(rung4.reward.alpha_pro == cfg.reward.alpha_pro);
}

TEST_CASE("run_sweep: three cells per axis and a monotonicity record") {
  RunConfig cfg = tiny_config(fresh_dir("ttsrl_sweep"));
  cfg.grpo.total_steps = 1;
  const std::string path = run_sweep(cfg, SweepAxis::kModelScale);

  auto records = read_records(path);
  CHECK(records[0].at("kind") == "header");
  int cells = 0;
  bool has_monotonicity = false;
  for (const auto& rec : records) {
    if (rec.at("kind") == "cell") ++cells;
    if (rec.at("kind") == "monotonicity") has_monotonicity = true;
  }
  CHECK(cells == 3);
  CHECK(has_monotonicity);
}

TEST_CASE("run_training: empty dataset file is rejected") {
  const std::string dir = fresh_dir("ttsrl_empty_ds");
  const std::string ds = dir + "/empty.jsonl";
  std::ofstream(ds).close();
  RunConfig cfg = tiny_config(dir);
  cfg.paths.dataset = ds;
  CHECK_THROWS_AS(run_training(cfg), ValidationError);
}
