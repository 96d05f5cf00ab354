#ifndef TTSRL_HARNESS_HPP_
#define TTSRL_HARNESS_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ttsrl/config.hpp"
#include "ttsrl/grpo.hpp"
#include "ttsrl/metrics.hpp"
#include "ttsrl/tasks.hpp"

namespace ttsrl {

// A run config materialized into data: dataset records, pause templates,
// and prompt cases. Held-out evaluation prompts are generated from a
// dedicated seed (derived from the task seed) so the eval set is identical
// across runs that share a task section, regardless of prompt_count.
struct LoadedRun {
  RunConfig cfg;
  Vocab vocab;
  PolicyArch arch;
  std::vector<DatasetRecord> train_records;
  std::vector<DatasetRecord> eval_records;
  std::map<int64_t, PauseTemplateSet> train_templates;
  std::map<int64_t, PauseTemplateSet> eval_templates;
  std::vector<PromptCase> train_cases;  // point into the template maps
  std::vector<PromptCase> eval_cases;

  LoadedRun() = default;
  LoadedRun(const LoadedRun&) = delete;
  LoadedRun& operator=(const LoadedRun&) = delete;
  LoadedRun(LoadedRun&&) = default;
  LoadedRun& operator=(LoadedRun&&) = default;
};

LoadedRun load_run(const RunConfig& cfg);

// Samples `rollouts_per_case` rollouts per prompt (streams derived from
// (eval_seed, kEval, case id, repeat)) and aggregates component metrics.
// Prosody match is measured whenever a case carries templates, independent
// of alpha_pro, so ablation rungs stay comparable.
EvalMetrics evaluate_policy(const PolicyParams& params, std::span<const PromptCase> cases,
                            const SamplerConfig& sampler, const RewardConfig& reward_cfg,
                            const ProsodyConfig& prosody, uint64_t eval_seed,
                            int rollouts_per_case);

// Scores externally supplied action sequences (one per case) with the same
// aggregation; per-step entropies are taken as zero.
EvalMetrics evaluate_actions(std::span<const PromptCase> cases,
                             const std::vector<std::vector<int>>& actions, const Vocab& vocab,
                             const RewardConfig& reward_cfg, const ProsodyConfig& prosody);

// Entropy target from rollouts of `params` on the held-out prompts:
// nearest-rank percentile of mean entropy over rollouts whose
// intelligibility reward is exactly 1 (falling back to all rollouts, with
// a stderr warning, when none are perfect).
double calibrate_h_target(const PolicyParams& params, std::span<const PromptCase> cases,
                          const SamplerConfig& sampler, const RewardConfig& reward_cfg,
                          int rollouts_per_case, uint64_t seed);

struct TrainOutcome {
  std::string metrics_path;
  std::string final_checkpoint;
  PolicyParams final_params;
  EvalMetrics final_eval;
  double resolved_h_target = 0.0;
  uint64_t steps = 0;
};

// Full training run: writes <out_dir>/metrics.jsonl (an eval record at the
// starting step, one step record per train step, periodic eval records,
// a final eval record, and a summary record), periodic checkpoints, and
// <out_dir>/checkpoint_final.ckpt. `resume_from` continues a saved run;
// its metric stream appends at the saved step index.
TrainOutcome run_training(const RunConfig& cfg, const std::string& resume_from = "");

// Cumulative reward ladder: intl+sim, +len, +ent, +pro, trained from
// scratch per rung with shared seeds (cfg.run.seed + s) and evaluated under
// the base reward config on the shared held-out set. Writes
// <out_dir>/ablation.jsonl and returns its path.
std::string run_ablation(const RunConfig& cfg, int n_seeds = 3);

enum class SweepAxis { kDataScale, kModelScale };

SweepAxis parse_sweep_axis(const std::string& name);

// Grid of runs along one axis with a shared held-out evaluation set.
// Writes <out_dir>/sweep.jsonl (header, one cell record per point, and a
// monotonicity record) and returns its path.
std::string run_sweep(const RunConfig& cfg, SweepAxis axis);

// Evaluates a checkpoint on the config's held-out prompts; equals the
// step-0 eval record of a fresh run for the same config and seeds.
EvalMetrics run_eval(const RunConfig& cfg, const std::string& checkpoint_path);

}  // namespace ttsrl

#endif  // TTSRL_HARNESS_HPP_
