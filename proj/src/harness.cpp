#include "ttsrl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ttsrl/errors.hpp"
#include "ttsrl/rewards.hpp"
#include "ttsrl/sim_env.hpp"

namespace ttsrl {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Seed offset for the dedicated held-out prompt set.
constexpr uint64_t kEvalDataTag = 0xE7A1;

void check_records(const std::vector<DatasetRecord>& records, const Alphabet& alphabet,
                   const Vocab& vocab, const std::string& what) {
  if (records.empty()) throw ValidationError(what + " has no records");
  for (const DatasetRecord& rec : records) {
    for (int sym : rec.target_text.symbols) {
      if (sym < 0 || sym >= alphabet.n_symbols)
        throw ValidationError(what + ": record " + std::to_string(rec.id) +
                              " has symbols outside the alphabet");
    }
    for (int tok : rec.ref_actions) {
      if (tok < 0 || tok >= vocab.size)
        throw ValidationError(what + ": record " + std::to_string(rec.id) +
                              " has reference tokens outside the vocab");
    }
  }
}

std::vector<PromptCase> build_cases(const std::vector<DatasetRecord>& records,
                                    const std::map<int64_t, PauseTemplateSet>& templates,
                                    const Vocab& vocab) {
  std::vector<PromptCase> cases;
  cases.reserve(records.size());
  for (const DatasetRecord& rec : records) {
    PromptCase pc;
    pc.id = rec.id;
    pc.target = rec.target_text;
    pc.ref = make_reference(rec.ref_text, rec.ref_actions, vocab);
    auto it = templates.find(rec.id);
    pc.templates = it == templates.end() ? nullptr : &it->second;
    cases.push_back(std::move(pc));
  }
  return cases;
}

// Component scores for one evaluated rollout. Prosody is measured whenever
// templates exist; `pause_valid` reports whether it was.
RewardBreakdown eval_score(const Trajectory& traj, const SynthesisResult& synth,
                           const PromptCase& pc, const RewardConfig& cfg,
                           const ProsodyConfig& prosody, bool* pause_valid) {
  RewardBreakdown bd;
  bd.r_intl = reward_intl(pc.target, synth.transcript, cfg.clamp_intl);
  bd.r_sim = reward_sim(synth.speaker_vec, pc.ref.ref_speaker_vec);
  bd.r_len = reward_len({static_cast<int>(pc.target.length()), synth.total_duration,
                         pc.ref.ref_rate, cfg.len_a, cfg.len_b});
  bd.r_ent = reward_ent(mean_entropy(traj), cfg.h_target, cfg.lambda_ent);
  *pause_valid = pc.templates != nullptr && !pc.templates->templates.empty();
  if (*pause_valid) {
    PauseSequence predicted = map_silences_to_markers(synth.silence_segments, prosody.thresholds);
    predicted = convert_scheme(predicted, pc.templates->scheme, prosody);
    bd.r_pro = reward_pro(predicted, *pc.templates);
  }
  bd.total = aggregate_reward(bd, cfg);
  return bd;
}

struct EvalAccumulator {
  EvalMetrics m;
  size_t n = 0;
  size_t pause_n = 0;

  void add(const RewardBreakdown& bd, bool pause_valid, double h_bar, size_t length) {
    m.cer += 1.0 - bd.r_intl;
    m.mean_sim += bd.r_sim;
    m.len_in_tol += bd.r_len;
    m.mean_entropy += h_bar;
    m.mean_r_ent += bd.r_ent;
    m.mean_reward += bd.total;
    m.mean_length += static_cast<double>(length);
    if (pause_valid) {
      m.pause_match += bd.r_pro;
      ++pause_n;
    }
    ++n;
  }

  EvalMetrics finish() {
    if (n == 0) throw ValidationError("evaluation saw no rollouts");
    const double inv = 1.0 / static_cast<double>(n);
    m.cer *= inv;
    m.mean_sim *= inv;
    m.len_in_tol *= inv;
    m.mean_entropy *= inv;
    m.mean_r_ent *= inv;
    m.mean_reward *= inv;
    m.mean_length *= inv;
    m.pause_match_valid = pause_n > 0;
    if (m.pause_match_valid) m.pause_match /= static_cast<double>(pause_n);
    return m;
  }
};

}  // namespace

LoadedRun load_run(const RunConfig& cfg) {
  validate_config(cfg);
  LoadedRun run;
  run.cfg = cfg;
  run.vocab = make_vocab(cfg.alphabet);
  run.arch = PolicyArch{cfg.policy.window, cfg.policy.embed_dim, cfg.policy.hidden_dim,
                        run.vocab, cfg.alphabet.n_symbols};

  run.train_records = cfg.paths.dataset.empty() ? generate_tasks(cfg.task, cfg.alphabet)
                                                : load_dataset(cfg.paths.dataset);
  TaskSpec eval_spec = cfg.task;
  eval_spec.prompt_count = cfg.run.eval_prompt_count;
  eval_spec.seed = Rng::mix(cfg.task.seed, kEvalDataTag);
  run.eval_records = generate_tasks(eval_spec, cfg.alphabet);

  check_records(run.train_records, cfg.alphabet, run.vocab, "dataset");
  check_records(run.eval_records, cfg.alphabet, run.vocab, "eval set");

  const bool templated = task_has_templates(cfg.task.name);
  if (templated || !cfg.paths.templates.empty()) {
    run.train_templates = cfg.paths.templates.empty()
                              ? build_task_templates(run.train_records, cfg.alphabet, cfg.prosody)
                              : load_templates(cfg.paths.templates);
    run.eval_templates = build_task_templates(run.eval_records, cfg.alphabet, cfg.prosody);
  }

  run.train_cases = build_cases(run.train_records, run.train_templates, run.vocab);
  run.eval_cases = build_cases(run.eval_records, run.eval_templates, run.vocab);
  return run;
}

EvalMetrics evaluate_policy(const PolicyParams& params, std::span<const PromptCase> cases,
                            const SamplerConfig& sampler, const RewardConfig& reward_cfg,
                            const ProsodyConfig& prosody, uint64_t eval_seed,
                            int rollouts_per_case) {
  if (cases.empty()) throw ValidationError("evaluation needs at least one prompt");
  if (rollouts_per_case < 1) throw ConfigError("rollouts_per_case must be >= 1");

  EvalAccumulator acc;
  for (const PromptCase& pc : cases) {
    for (int rep = 0; rep < rollouts_per_case; ++rep) {
      Rng rng = Rng::stream(eval_seed, {rng_tag::kEval, static_cast<uint64_t>(pc.id),
                                        static_cast<uint64_t>(rep)});
      Trajectory traj = rollout(params, pc.target, sampler, rng);
      SynthesisResult synth = synthesize(traj.actions, params.arch.vocab);
      bool pause_valid = false;
      RewardBreakdown bd = eval_score(traj, synth, pc, reward_cfg, prosody, &pause_valid);
      acc.add(bd, pause_valid, mean_entropy(traj), traj.length());
    }
  }
  return acc.finish();
}

EvalMetrics evaluate_actions(std::span<const PromptCase> cases,
                             const std::vector<std::vector<int>>& actions, const Vocab& vocab,
                             const RewardConfig& reward_cfg, const ProsodyConfig& prosody) {
  if (cases.size() != actions.size())
    throw ValidationError("need exactly one action sequence per prompt");
  if (cases.empty()) throw ValidationError("evaluation needs at least one prompt");

  EvalAccumulator acc;
  for (size_t i = 0; i < cases.size(); ++i) {
    Trajectory traj;
    traj.prompt = cases[i].target;
    traj.actions = actions[i];
    traj.step_logprobs.assign(actions[i].size(), 0.0);
    traj.step_entropies.assign(actions[i].size(), 0.0);
    SynthesisResult synth = synthesize(traj.actions, vocab);
    bool pause_valid = false;
    RewardBreakdown bd = eval_score(traj, synth, cases[i], reward_cfg, prosody, &pause_valid);
    acc.add(bd, pause_valid, mean_entropy(traj), traj.length());
  }
  return acc.finish();
}

double calibrate_h_target(const PolicyParams& params, std::span<const PromptCase> cases,
                          const SamplerConfig& sampler, const RewardConfig& reward_cfg,
                          int rollouts_per_case, uint64_t seed) {
  if (cases.empty()) throw ValidationError("calibration needs at least one prompt");
  std::vector<Trajectory> all;
  std::vector<Trajectory> perfect;
  for (const PromptCase& pc : cases) {
    for (int rep = 0; rep < rollouts_per_case; ++rep) {
      Rng rng = Rng::stream(seed, {rng_tag::kCalibration, static_cast<uint64_t>(pc.id),
                                   static_cast<uint64_t>(rep)});
      Trajectory traj = rollout(params, pc.target, sampler, rng);
      SynthesisResult synth = synthesize(traj.actions, params.arch.vocab);
      const double r_intl = reward_intl(pc.target, synth.transcript);
      if (r_intl == 1.0) perfect.push_back(traj);
      all.push_back(std::move(traj));
    }
  }
  if (perfect.empty()) {
    std::cerr << "[ttsrl] warning: no calibration rollout reproduced its text exactly; "
                 "estimating the entropy target from all rollouts\n";
    return estimate_h_target(all, reward_cfg.h_target_percentile);
  }
  return estimate_h_target(perfect, reward_cfg.h_target_percentile);
}

TrainOutcome run_training(const RunConfig& cfg, const std::string& resume_from) {
  LoadedRun run = load_run(cfg);
  fs::create_directories(cfg.run.out_dir);

  TrainerState state;
  const bool resuming = !resume_from.empty();
  if (resuming) {
    Checkpoint ck = load_checkpoint(resume_from);
    if (!ck.has_trainer_state)
      throw ValidationError("checkpoint has no trainer state: " + resume_from);
    if (!(ck.params.arch == run.arch))
      throw ValidationError("checkpoint architecture does not match config");
    state.params = std::move(ck.params);
    state.ref_theta = std::move(ck.ref_theta);
    state.opt.m = std::move(ck.adam_m);
    state.opt.v = std::move(ck.adam_v);
    state.opt.t = ck.adam_t;
    state.step = ck.step;
    state.master_seed = ck.seed;
  } else {
    state = make_trainer_state(init_policy(run.arch, cfg.run.seed, cfg.policy.init_scale),
                               cfg.run.seed);
  }

  RewardConfig reward_cfg = cfg.reward;
  if (cfg.reward_extras.h_target_auto) {
    // Calibrate against the frozen reference policy so resumed runs
    // resolve the same target.
    PolicyParams ref;
    ref.arch = run.arch;
    ref.theta = state.ref_theta;
    reward_cfg.h_target = calibrate_h_target(ref, run.eval_cases, cfg.sampler, reward_cfg,
                                             cfg.reward_extras.calibration_rollouts,
                                             cfg.run.eval_seed);
  }

  save_config(cfg.run.out_dir + "/config.json", cfg);
  MetricsWriter mw(cfg.run.out_dir + "/metrics.jsonl", resuming);

  TrainOutcome outcome;
  outcome.metrics_path = mw.path();
  outcome.resolved_h_target = reward_cfg.h_target;

  int64_t last_eval_step = -1;
  EvalMetrics last_eval;
  auto do_eval = [&](uint64_t at_step) {
    last_eval = evaluate_policy(state.params, run.eval_cases, cfg.sampler, reward_cfg,
                                cfg.prosody, cfg.run.eval_seed, cfg.run.eval_rollouts);
    mw.write(eval_record(at_step, last_eval));
    last_eval_step = static_cast<int64_t>(at_step);
  };

  auto save_state = [&](const std::string& path) {
    Checkpoint ck;
    ck.params = state.params;
    ck.seed = state.master_seed;
    ck.has_trainer_state = true;
    ck.step = state.step;
    ck.adam_t = state.opt.t;
    ck.ref_theta = state.ref_theta;
    ck.adam_m = state.opt.m;
    ck.adam_v = state.opt.v;
    save_checkpoint(path, ck);
  };

  if (!resuming) do_eval(state.step);

  const uint64_t total = static_cast<uint64_t>(cfg.grpo.total_steps);
  const size_t n_train = run.train_cases.size();
  std::vector<PromptCase> batch;
  while (state.step < total) {
    batch.clear();
    const uint64_t s = state.step;
    for (int j = 0; j < cfg.grpo.batch_size; ++j) {
      batch.push_back(
          run.train_cases[(s * static_cast<uint64_t>(cfg.grpo.batch_size) + j) % n_train]);
    }
    TrainStepReport report =
        train_step(state, batch, cfg.grpo, cfg.sampler, reward_cfg, cfg.prosody);
    mw.write(step_record(report));

    if (cfg.run.eval_interval > 0 && state.step % cfg.run.eval_interval == 0 &&
        state.step < total) {
      do_eval(state.step);
    }
    if (cfg.run.checkpoint_interval > 0 && state.step % cfg.run.checkpoint_interval == 0) {
      save_state(cfg.run.out_dir + "/checkpoint_step" + std::to_string(state.step) + ".ckpt");
    }
  }

  if (last_eval_step != static_cast<int64_t>(state.step)) do_eval(state.step);
  outcome.final_checkpoint = cfg.run.out_dir + "/checkpoint_final.ckpt";
  save_state(outcome.final_checkpoint);
  outcome.final_eval = last_eval;
  outcome.final_params = state.params;
  outcome.steps = state.step;

  // Summary over the trailing 10% of step records (re-read from the stream
  // so resumed runs summarize whatever this file holds).
  {
    std::ifstream in(mw.path());
    std::vector<ordered_json> steps;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ordered_json rec = ordered_json::parse(line);
      if (rec.value("kind", "") == "step") steps.push_back(std::move(rec));
    }
    const size_t tail_n =
        std::min(steps.size(), std::max<size_t>(total > 0 ? total / 10 : 0, 1));
    ordered_json summary;
    summary["kind"] = "summary";
    summary["total_steps"] = total;
    summary["tail_steps"] = tail_n;
    const char* keys[] = {"mean_reward", "mean_r_intl", "mean_r_sim", "mean_r_len",
                          "mean_r_ent", "mean_r_pro"};
    if (steps.empty()) {
      summary["mean_reward"] = last_eval.mean_reward;
      summary["mean_r_intl"] = 1.0 - last_eval.cer;
      summary["mean_r_sim"] = last_eval.mean_sim;
      summary["mean_r_len"] = last_eval.len_in_tol;
      summary["mean_r_ent"] = last_eval.mean_r_ent;
      summary["mean_r_pro"] = last_eval.pause_match_valid ? last_eval.pause_match : 0.0;
    } else {
      for (const char* key : keys) {
        double sum = 0.0;
        for (size_t i = steps.size() - tail_n; i < steps.size(); ++i)
          sum += steps[i].at(key).get<double>();
        summary[key] = sum / static_cast<double>(tail_n);
      }
    }
    summary["final_eval"] = eval_record(state.step, last_eval);
    mw.write(summary);
  }
  return outcome;
}

namespace {

struct RungDef {
  const char* name;
  bool with_len;
  bool with_ent;
  bool with_pro;
};

constexpr RungDef kRungs[] = {
    {"intl_sim", false, false, false},
    {"plus_len", true, false, false},
    {"plus_ent", true, true, false},
    {"full", true, true, true},
};

ordered_json metrics_row(const EvalMetrics& m) {
  ordered_json j;
  j["cer"] = m.cer;
  j["mean_sim"] = m.mean_sim;
  j["len_in_tol"] = m.len_in_tol;
  j["pause_match"] = m.pause_match_valid ? ordered_json(m.pause_match) : ordered_json(nullptr);
  j["mean_entropy"] = m.mean_entropy;
  j["composite"] = m.mean_reward;
  return j;
}

}  // namespace

std::string run_ablation(const RunConfig& cfg, int n_seeds) {
  if (!task_has_templates(cfg.task.name))
    throw ConfigError("ablation needs a template-bearing task (pause_match or combined)");
  if (n_seeds < 1) throw ConfigError("need at least one seed");
  LoadedRun base = load_run(cfg);
  fs::create_directories(cfg.run.out_dir);

  const std::string path = cfg.run.out_dir + "/ablation.jsonl";
  MetricsWriter mw(path, false);
  {
    ordered_json header;
    header["kind"] = "header";
    header["report"] = "reward-ladder ablation";
    header["note"] =
        "desk-scale synthetic environment; absolute metrics are not comparable to "
        "full-scale speech systems";
    header["rungs"] = {kRungs[0].name, kRungs[1].name, kRungs[2].name, kRungs[3].name};
    header["seeds"] = n_seeds;
    header["steps_per_run"] = cfg.grpo.total_steps;
    mw.write(header);
  }

  for (int r = 0; r < 4; ++r) {
    EvalMetrics mean_acc;
    size_t pause_rows = 0;
    for (int s = 0; s < n_seeds; ++s) {
      RunConfig rc = cfg;
      rc.run.seed = cfg.run.seed + static_cast<uint64_t>(s);
      rc.run.out_dir = cfg.run.out_dir + "/ablate_rung" + std::to_string(r + 1) + "_seed" +
                       std::to_string(s);
      rc.run.checkpoint_interval = 0;
      rc.run.eval_interval = 0;
      rc.reward.alpha_len = kRungs[r].with_len ? cfg.reward.alpha_len : 0.0;
      rc.reward.alpha_ent = kRungs[r].with_ent ? cfg.reward.alpha_ent : 0.0;
      rc.reward.alpha_pro = kRungs[r].with_pro ? cfg.reward.alpha_pro : 0.0;

      TrainOutcome out = run_training(rc);

      // Composite under the full base coefficients, on the shared eval set.
      RewardConfig composite_cfg = cfg.reward;
      composite_cfg.h_target = out.resolved_h_target;
      EvalMetrics m = evaluate_policy(out.final_params, base.eval_cases, cfg.sampler,
                                      composite_cfg, cfg.prosody, cfg.run.eval_seed,
                                      cfg.run.eval_rollouts);

      ordered_json row;
      row["kind"] = "rung";
      row["rung"] = r + 1;
      row["name"] = kRungs[r].name;
      row["seed"] = rc.run.seed;
      row.update(metrics_row(m));
      mw.write(row);

      mean_acc.cer += m.cer;
      mean_acc.mean_sim += m.mean_sim;
      mean_acc.len_in_tol += m.len_in_tol;
      mean_acc.mean_entropy += m.mean_entropy;
      mean_acc.mean_reward += m.mean_reward;
      if (m.pause_match_valid) {
        mean_acc.pause_match += m.pause_match;
        ++pause_rows;
      }
    }
    const double inv = 1.0 / static_cast<double>(n_seeds);
    mean_acc.cer *= inv;
    mean_acc.mean_sim *= inv;
    mean_acc.len_in_tol *= inv;
    mean_acc.mean_entropy *= inv;
    mean_acc.mean_reward *= inv;
    mean_acc.pause_match_valid = pause_rows > 0;
    if (pause_rows > 0) mean_acc.pause_match /= static_cast<double>(pause_rows);

    ordered_json row;
    row["kind"] = "rung_mean";
    row["rung"] = r + 1;
    row["name"] = kRungs[r].name;
    row.update(metrics_row(mean_acc));
    mw.write(row);
  }
  return path;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "data_scale") return SweepAxis::kDataScale;
  if (name == "model_scale") return SweepAxis::kModelScale;
  throw ConfigError("unknown sweep axis: " + name);
}

std::string run_sweep(const RunConfig& cfg, SweepAxis axis) {
  LoadedRun base = load_run(cfg);
  fs::create_directories(cfg.run.out_dir);

  const std::string path = cfg.run.out_dir + "/sweep.jsonl";
  MetricsWriter mw(path, false);

  struct Cell {
    std::string label;
    RunConfig rc;
  };
  std::vector<Cell> cells;
  if (axis == SweepAxis::kDataScale) {
    for (int count : {100, 1000, 10000}) {
      RunConfig rc = cfg;
      rc.task.prompt_count = count;
      rc.run.out_dir = cfg.run.out_dir + "/sweep_data_" + std::to_string(count);
      cells.push_back({std::to_string(count), std::move(rc)});
    }
  } else {
    const struct {
      const char* label;
      int embed;
      int hidden;
    } sizes[] = {{"small", 4, 12}, {"medium", 8, 24}, {"large", 16, 48}};
    for (const auto& size : sizes) {
      RunConfig rc = cfg;
      rc.policy.embed_dim = size.embed;
      rc.policy.hidden_dim = size.hidden;
      rc.run.out_dir = cfg.run.out_dir + "/sweep_model_" + size.label;
      cells.push_back({size.label, std::move(rc)});
    }
  }

  {
    ordered_json header;
    header["kind"] = "header";
    header["report"] = axis == SweepAxis::kDataScale ? "data-scale sweep" : "model-scale sweep";
    header["note"] =
        "desk-scale synthetic environment; the grid replaces production-scale axes and "
        "absolute values are not comparable to full-scale speech systems";
    ordered_json labels = ordered_json::array();
    for (const Cell& c : cells) labels.push_back(c.label);
    header["cells"] = labels;
    header["steps_per_run"] = cfg.grpo.total_steps;
    mw.write(header);
  }

  std::vector<EvalMetrics> results;
  for (Cell& cell : cells) {
    cell.rc.run.checkpoint_interval = 0;
    cell.rc.run.eval_interval = 0;
    TrainOutcome out = run_training(cell.rc);

    RewardConfig eval_cfg = cfg.reward;
    eval_cfg.h_target = out.resolved_h_target;
    EvalMetrics m = evaluate_policy(out.final_params, base.eval_cases, cfg.sampler, eval_cfg,
                                    cfg.prosody, cfg.run.eval_seed, cfg.run.eval_rollouts);
    results.push_back(m);

    ordered_json row;
    row["kind"] = "cell";
    row["axis"] = axis == SweepAxis::kDataScale ? "data_scale" : "model_scale";
    row["label"] = cell.label;
    row["prompt_count"] = cell.rc.task.prompt_count;
    row["embed_dim"] = cell.rc.policy.embed_dim;
    row["hidden_dim"] = cell.rc.policy.hidden_dim;
    row.update(metrics_row(m));
    mw.write(row);
  }

  auto non_increasing = [&](auto get) {
    for (size_t i = 1; i < results.size(); ++i) {
      if (get(results[i]) > get(results[i - 1])) return false;
    }
    return true;
  };
  auto non_decreasing = [&](auto get) {
    for (size_t i = 1; i < results.size(); ++i) {
      if (get(results[i]) < get(results[i - 1])) return false;
    }
    return true;
  };
  ordered_json mono;
  mono["kind"] = "monotonicity";
  mono["cer_non_increasing"] = non_increasing([](const EvalMetrics& m) { return m.cer; });
  mono["sim_non_decreasing"] = non_decreasing([](const EvalMetrics& m) { return m.mean_sim; });
  mono["len_in_tol_non_decreasing"] =
      non_decreasing([](const EvalMetrics& m) { return m.len_in_tol; });
  mono["pause_match_non_decreasing"] =
      non_decreasing([](const EvalMetrics& m) { return m.pause_match; });
  mono["composite_non_decreasing"] =
      non_decreasing([](const EvalMetrics& m) { return m.mean_reward; });
  mw.write(mono);
  return path;
}

EvalMetrics run_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
  LoadedRun run = load_run(cfg);
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (!(ck.params.arch == run.arch))
    throw ValidationError("checkpoint architecture does not match config");

  RewardConfig reward_cfg = cfg.reward;
  if (cfg.reward_extras.h_target_auto) {
    PolicyParams ref;
    ref.arch = run.arch;
    ref.theta = ck.has_trainer_state ? ck.ref_theta : ck.params.theta;
    reward_cfg.h_target = calibrate_h_target(ref, run.eval_cases, cfg.sampler, reward_cfg,
                                             cfg.reward_extras.calibration_rollouts,
                                             cfg.run.eval_seed);
  }
  return evaluate_policy(ck.params, run.eval_cases, cfg.sampler, reward_cfg, cfg.prosody,
                         cfg.run.eval_seed, cfg.run.eval_rollouts);
}

}  // namespace ttsrl
