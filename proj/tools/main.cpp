#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ttsrl/config.hpp"
#include "ttsrl/errors.hpp"
#include "ttsrl/harness.hpp"
#include "ttsrl/metrics.hpp"
#include "ttsrl/tasks.hpp"

namespace {

bool log_enabled() {
  const char* level = std::getenv("TTSRL_LOG");
  return level != nullptr && std::string(level) != "quiet";
}

void log_info(const std::string& msg) {
  if (log_enabled()) std::cerr << "[ttsrl] " << msg << "\n";
}

struct CommonOpts {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Run config (JSON)")->required();
  cmd->add_option("--out", opts.out_dir, "Override run.out_dir");
  cmd->add_option("--seed", opts.seed, "Override run.seed");
}

ttsrl::RunConfig load_with_overrides(const CommonOpts& opts) {
  ttsrl::RunConfig cfg = ttsrl::load_config(opts.config_path);
  if (opts.out_dir) cfg.run.out_dir = *opts.out_dir;
  if (opts.seed) cfg.run.seed = *opts.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-reward GRPO trainer for a synthetic token-speech environment"};
  app.require_subcommand(1);

  CommonOpts gen_opts;
  auto* gen = app.add_subcommand("gen-tasks", "Generate a task dataset (and pause templates)");
  add_common(gen, gen_opts);

  CommonOpts annotate_opts;
  std::string annotate_in, annotate_out;
  int annotate_k = 1;
  bool annotate_stochastic = false;
  auto* annotate = app.add_subcommand("annotate", "Annotate dataset texts with pause templates");
  add_common(annotate, annotate_opts);
  annotate->add_option("--in", annotate_in, "Dataset file to annotate")->required();
  annotate->add_option("--dest", annotate_out, "Template file to write")->required();
  annotate->add_option("--candidates", annotate_k, "Patterns per text");
  annotate->add_flag("--stochastic", annotate_stochastic,
                     "Seeded stochastic annotator instead of the deterministic rules");

  CommonOpts train_opts;
  std::string resume_path;
  auto* train = app.add_subcommand("train", "Run the training loop");
  add_common(train, train_opts);
  train->add_option("--resume", resume_path, "Checkpoint to continue from");

  CommonOpts ablate_opts;
  int ablate_seeds = 3;
  auto* ablate = app.add_subcommand("ablate", "Cumulative reward-ladder ablation");
  add_common(ablate, ablate_opts);
  ablate->add_option("--seeds", ablate_seeds, "Seeds per rung");

  CommonOpts sweep_opts;
  std::string sweep_axis = "data_scale";
  auto* sweep = app.add_subcommand("sweep", "Scale sweep along one axis");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", sweep_axis, "data_scale or model_scale");

  CommonOpts eval_opts;
  std::string eval_checkpoint;
  std::optional<std::string> eval_dataset, eval_templates;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out prompts");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval->add_option("--dataset", eval_dataset, "Override paths.dataset");
  eval->add_option("--templates", eval_templates, "Override paths.templates");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      ttsrl::RunConfig cfg = load_with_overrides(gen_opts);
      ttsrl::validate_config(cfg);
      std::filesystem::create_directories(cfg.run.out_dir);
      auto records = ttsrl::generate_tasks(cfg.task, cfg.alphabet);
      const std::string dataset_path = cfg.run.out_dir + "/dataset.jsonl";
      ttsrl::save_dataset(dataset_path, records);
      std::cout << dataset_path << "\n";
      if (ttsrl::task_has_templates(cfg.task.name)) {
        const std::string template_path = cfg.run.out_dir + "/templates.jsonl";
        ttsrl::write_task_templates(template_path, records, cfg.alphabet, cfg.prosody);
        std::cout << template_path << "\n";
      }
      log_info("generated " + std::to_string(records.size()) + " records");
    } else if (*annotate) {
      ttsrl::RunConfig cfg = load_with_overrides(annotate_opts);
      auto records = ttsrl::load_dataset(annotate_in);
      std::optional<uint64_t> seed;
      if (annotate_stochastic) seed = annotate_opts.seed.value_or(cfg.run.seed);
      ttsrl::annotate_records(annotate_out, records, cfg.alphabet, cfg.prosody, annotate_k,
                              seed);
      std::cout << annotate_out << "\n";
    } else if (*train) {
      ttsrl::RunConfig cfg = load_with_overrides(train_opts);
      ttsrl::TrainOutcome out = ttsrl::run_training(cfg, resume_path);
      log_info("metrics: " + out.metrics_path);
      std::cout << ttsrl::eval_record(out.steps, out.final_eval).dump() << "\n";
    } else if (*ablate) {
      ttsrl::RunConfig cfg = load_with_overrides(ablate_opts);
      std::cout << ttsrl::run_ablation(cfg, ablate_seeds) << "\n";
    } else if (*sweep) {
      ttsrl::RunConfig cfg = load_with_overrides(sweep_opts);
      std::cout << ttsrl::run_sweep(cfg, ttsrl::parse_sweep_axis(sweep_axis)) << "\n";
    } else if (*eval) {
      ttsrl::RunConfig cfg = load_with_overrides(eval_opts);
      if (eval_dataset) cfg.paths.dataset = *eval_dataset;
      if (eval_templates) cfg.paths.templates = *eval_templates;
      ttsrl::EvalMetrics m = ttsrl::run_eval(cfg, eval_checkpoint);
      std::cout << ttsrl::eval_record(0, m).dump() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
