#include "ttsrl/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "ttsrl/errors.hpp"

namespace ttsrl {

using ordered_json = nlohmann::ordered_json;

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["schema_version"] = cfg.schema_version;
  j["run"] = {{"out_dir", cfg.run.out_dir},
              {"seed", cfg.run.seed},
              {"checkpoint_interval", cfg.run.checkpoint_interval},
              {"eval_interval", cfg.run.eval_interval},
              {"eval_prompt_count", cfg.run.eval_prompt_count},
              {"eval_rollouts", cfg.run.eval_rollouts},
              {"eval_seed", cfg.run.eval_seed}};
  j["policy"] = {{"window", cfg.policy.window},
                 {"embed_dim", cfg.policy.embed_dim},
                 {"hidden_dim", cfg.policy.hidden_dim},
                 {"init_scale", cfg.policy.init_scale}};
  j["alphabet"] = {{"n_symbols", cfg.alphabet.n_symbols},
                   {"comma", cfg.alphabet.comma},
                   {"period", cfg.alphabet.period}};
  j["sampler"] = {{"top_k", cfg.sampler.top_k},
                  {"top_p", cfg.sampler.top_p},
                  {"temperature", cfg.sampler.temperature},
                  {"repetition_penalty", cfg.sampler.repetition_penalty},
                  {"max_len", cfg.sampler.max_len},
                  {"seed", cfg.sampler.seed}};
  j["reward"] = {{"alpha_intl", cfg.reward.alpha_intl},
                 {"alpha_sim", cfg.reward.alpha_sim},
                 {"alpha_len", cfg.reward.alpha_len},
                 {"alpha_ent", cfg.reward.alpha_ent},
                 {"alpha_pro", cfg.reward.alpha_pro},
                 {"len_a", cfg.reward.len_a},
                 {"len_b", cfg.reward.len_b},
                 {"lambda_ent", cfg.reward.lambda_ent},
                 {"h_target", cfg.reward.h_target},
                 {"h_target_percentile", cfg.reward.h_target_percentile},
                 {"clamp_intl", cfg.reward.clamp_intl},
                 {"h_target_auto", cfg.reward_extras.h_target_auto},
                 {"calibration_rollouts", cfg.reward_extras.calibration_rollouts}};
  j["prosody"] = {{"thresholds", cfg.prosody.thresholds},
                  {"pw_max_level", cfg.prosody.pw_max_level}};
  j["grpo"] = {{"group_size", cfg.grpo.group_size},
               {"batch_size", cfg.grpo.batch_size},
               {"learning_rate", cfg.grpo.learning_rate},
               {"clip_epsilon", cfg.grpo.clip_epsilon},
               {"kl_coef", cfg.grpo.kl_coef},
               {"epochs_per_batch", cfg.grpo.epochs_per_batch},
               {"total_steps", cfg.grpo.total_steps},
               {"length_norm", cfg.grpo.length_norm},
               {"ref_refresh_interval", cfg.grpo.ref_refresh_interval}};
  j["task"] = {{"name", task_name(cfg.task.name)},
               {"prompt_count", cfg.task.prompt_count},
               {"len_min", cfg.task.len_min},
               {"len_max", cfg.task.len_max},
               {"seed", cfg.task.seed}};
  j["paths"] = {{"dataset", cfg.paths.dataset}, {"templates", cfg.paths.templates}};
  return j;
}

namespace {

// Reads j[key] into out when present; collects the key as seen.
template <typename T>
void get_field(const ordered_json& j, const char* key, T& out, std::set<std::string>& seen) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
    seen.insert(key);
  }
}

void check_unknown(const ordered_json& j, const std::set<std::string>& seen,
                   const std::string& section, std::vector<std::string>& errors) {
  for (const auto& [key, value] : j.items()) {
    if (!seen.count(key)) errors.push_back("unknown key " + section + "." + key);
  }
}

}  // namespace

RunConfig config_from_json(const nlohmann::ordered_json& j) {
  RunConfig cfg;
  std::vector<std::string> errors;
  std::set<std::string> top_seen;

  if (j.contains("schema_version")) {
    cfg.schema_version = j.at("schema_version").get<int>();
    top_seen.insert("schema_version");
    if (cfg.schema_version != kConfigSchemaVersion)
      throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
  }

  auto section = [&](const char* name) -> ordered_json {
    if (j.contains(name)) {
      top_seen.insert(name);
      return j.at(name);
    }
    return ordered_json::object();
  };

  {
    ordered_json s = section("run");
    std::set<std::string> seen;
    get_field(s, "out_dir", cfg.run.out_dir, seen);
    get_field(s, "seed", cfg.run.seed, seen);
    get_field(s, "checkpoint_interval", cfg.run.checkpoint_interval, seen);
    get_field(s, "eval_interval", cfg.run.eval_interval, seen);
    get_field(s, "eval_prompt_count", cfg.run.eval_prompt_count, seen);
    get_field(s, "eval_rollouts", cfg.run.eval_rollouts, seen);
    get_field(s, "eval_seed", cfg.run.eval_seed, seen);
    check_unknown(s, seen, "run", errors);
  }
  {
    ordered_json s = section("policy");
    std::set<std::string> seen;
    get_field(s, "window", cfg.policy.window, seen);
    get_field(s, "embed_dim", cfg.policy.embed_dim, seen);
    get_field(s, "hidden_dim", cfg.policy.hidden_dim, seen);
    get_field(s, "init_scale", cfg.policy.init_scale, seen);
    check_unknown(s, seen, "policy", errors);
  }
  {
    ordered_json s = section("alphabet");
    std::set<std::string> seen;
    get_field(s, "n_symbols", cfg.alphabet.n_symbols, seen);
    get_field(s, "comma", cfg.alphabet.comma, seen);
    get_field(s, "period", cfg.alphabet.period, seen);
    check_unknown(s, seen, "alphabet", errors);
  }
  {
    ordered_json s = section("sampler");
    std::set<std::string> seen;
    get_field(s, "top_k", cfg.sampler.top_k, seen);
    get_field(s, "top_p", cfg.sampler.top_p, seen);
    get_field(s, "temperature", cfg.sampler.temperature, seen);
    get_field(s, "repetition_penalty", cfg.sampler.repetition_penalty, seen);
    get_field(s, "max_len", cfg.sampler.max_len, seen);
    get_field(s, "seed", cfg.sampler.seed, seen);
    check_unknown(s, seen, "sampler", errors);
  }
  {
    ordered_json s = section("reward");
    std::set<std::string> seen;
    get_field(s, "alpha_intl", cfg.reward.alpha_intl, seen);
    get_field(s, "alpha_sim", cfg.reward.alpha_sim, seen);
    get_field(s, "alpha_len", cfg.reward.alpha_len, seen);
    get_field(s, "alpha_ent", cfg.reward.alpha_ent, seen);
    get_field(s, "alpha_pro", cfg.reward.alpha_pro, seen);
    get_field(s, "len_a", cfg.reward.len_a, seen);
    get_field(s, "len_b", cfg.reward.len_b, seen);
    get_field(s, "lambda_ent", cfg.reward.lambda_ent, seen);
    get_field(s, "h_target", cfg.reward.h_target, seen);
    get_field(s, "h_target_percentile", cfg.reward.h_target_percentile, seen);
    get_field(s, "clamp_intl", cfg.reward.clamp_intl, seen);
    get_field(s, "h_target_auto", cfg.reward_extras.h_target_auto, seen);
    get_field(s, "calibration_rollouts", cfg.reward_extras.calibration_rollouts, seen);
    check_unknown(s, seen, "reward", errors);
  }
  {
    ordered_json s = section("prosody");
    std::set<std::string> seen;
    get_field(s, "thresholds", cfg.prosody.thresholds, seen);
    get_field(s, "pw_max_level", cfg.prosody.pw_max_level, seen);
    check_unknown(s, seen, "prosody", errors);
  }
  {
    ordered_json s = section("grpo");
    std::set<std::string> seen;
    get_field(s, "group_size", cfg.grpo.group_size, seen);
    get_field(s, "batch_size", cfg.grpo.batch_size, seen);
    get_field(s, "learning_rate", cfg.grpo.learning_rate, seen);
    get_field(s, "clip_epsilon", cfg.grpo.clip_epsilon, seen);
    get_field(s, "kl_coef", cfg.grpo.kl_coef, seen);
    get_field(s, "epochs_per_batch", cfg.grpo.epochs_per_batch, seen);
    get_field(s, "total_steps", cfg.grpo.total_steps, seen);
    get_field(s, "length_norm", cfg.grpo.length_norm, seen);
    get_field(s, "ref_refresh_interval", cfg.grpo.ref_refresh_interval, seen);
    check_unknown(s, seen, "grpo", errors);
  }
  {
    ordered_json s = section("task");
    std::set<std::string> seen;
    std::string name = task_name(cfg.task.name);
    get_field(s, "name", name, seen);
    cfg.task.name = parse_task_name(name);
    get_field(s, "prompt_count", cfg.task.prompt_count, seen);
    get_field(s, "len_min", cfg.task.len_min, seen);
    get_field(s, "len_max", cfg.task.len_max, seen);
    get_field(s, "seed", cfg.task.seed, seen);
    check_unknown(s, seen, "task", errors);
  }
  {
    ordered_json s = section("paths");
    std::set<std::string> seen;
    get_field(s, "dataset", cfg.paths.dataset, seen);
    get_field(s, "templates", cfg.paths.templates, seen);
    check_unknown(s, seen, "paths", errors);
  }
  check_unknown(j, top_seen, "<top>", errors);

  if (!errors.empty()) {
    std::string msg = "config has " + std::to_string(errors.size()) + " problem(s):";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open config for writing: " + path);
  out << config_to_json(cfg).dump(2) << "\n";
}

void validate_config(const RunConfig& cfg) {
  std::vector<std::string> errors;
  auto try_check = [&errors](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
    }
  };

  try_check([&] { validate_sampler_config(cfg.sampler); });
  try_check([&] { validate_grpo_config(cfg.grpo); });
  try_check([&] { validate_task_spec(cfg.task, cfg.alphabet); });
  try_check([&] { make_vocab(cfg.alphabet); });
  try_check([&] {
    if (cfg.policy.window < 1 || cfg.policy.embed_dim < 1 || cfg.policy.hidden_dim < 1)
      throw ConfigError("policy dimensions must be positive");
  });
  try_check([&] {
    for (int i = 1; i < kNumPauseLevels; ++i) {
      if (!(cfg.prosody.thresholds[i] > cfg.prosody.thresholds[i - 1]))
        throw ConfigError("prosody.thresholds must be strictly ascending");
    }
    if (cfg.prosody.pw_max_level < 1 || cfg.prosody.pw_max_level >= kNumPauseLevels)
      throw ConfigError("prosody.pw_max_level must be in [1, 3]");
  });
  try_check([&] {
    const RewardConfig& r = cfg.reward;
    if (r.alpha_intl < 0 || r.alpha_sim < 0 || r.alpha_len < 0 || r.alpha_ent < 0 ||
        r.alpha_pro < 0)
      throw ConfigError("reward alphas must be non-negative");
    if (!(r.len_a > 0 && r.len_a < r.len_b)) throw ConfigError("need 0 < len_a < len_b");
    if (r.lambda_ent < 0) throw ConfigError("lambda_ent must be non-negative");
    if (r.h_target < 0) throw ConfigError("h_target must be non-negative");
    if (!(r.h_target_percentile > 0 && r.h_target_percentile <= 100))
      throw ConfigError("h_target_percentile must be in (0, 100]");
  });
  try_check([&] {
    if (cfg.run.eval_prompt_count < 1) throw ConfigError("eval_prompt_count must be >= 1");
    if (cfg.run.eval_rollouts < 1) throw ConfigError("eval_rollouts must be >= 1");
    if (cfg.run.checkpoint_interval < 0 || cfg.run.eval_interval < 0)
      throw ConfigError("intervals must be non-negative");
    if (cfg.run.eval_prompt_count >= cfg.task.prompt_count && cfg.paths.dataset.empty())
      throw ConfigError("eval_prompt_count must leave at least one training prompt");
  });
  try_check([&] {
    if (cfg.reward_extras.calibration_rollouts < 1)
      throw ConfigError("calibration_rollouts must be >= 1");
  });
  try_check([&] {
    if (cfg.reward.alpha_pro > 0 && !task_has_templates(cfg.task.name) &&
        cfg.paths.templates.empty())
      throw ConfigError("alpha_pro > 0 needs a template-bearing task or a templates path");
  });
  try_check([&] {
    if (!cfg.paths.dataset.empty() && !std::filesystem::exists(cfg.paths.dataset))
      throw ConfigError("dataset path does not exist: " + cfg.paths.dataset);
    if (!cfg.paths.templates.empty() && !std::filesystem::exists(cfg.paths.templates))
      throw ConfigError("templates path does not exist: " + cfg.paths.templates);
  });

  if (!errors.empty()) {
    std::string msg = "config has " + std::to_string(errors.size()) + " problem(s):";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

}  // namespace ttsrl
