#ifndef TTSRL_CONFIG_HPP_
#define TTSRL_CONFIG_HPP_

#include <string>

#include <json.hpp>

#include "ttsrl/core_types.hpp"
#include "ttsrl/grpo.hpp"
#include "ttsrl/policy.hpp"
#include "ttsrl/prosody.hpp"
#include "ttsrl/tasks.hpp"

namespace ttsrl {

constexpr int kConfigSchemaVersion = 1;

struct PolicyConfig {
  int window = 8;
  int embed_dim = 8;
  int hidden_dim = 24;
  double init_scale = 0.5;
  bool operator==(const PolicyConfig&) const = default;
};

struct RunSection {
  std::string out_dir = "out";
  uint64_t seed = 0;
  int checkpoint_interval = 0;  // steps between checkpoints; 0 = final only
  int eval_interval = 0;        // steps between held-out evals; 0 = start/end only
  int eval_prompt_count = 8;    // held-out tail of the dataset
  int eval_rollouts = 4;        // rollouts per held-out prompt
  uint64_t eval_seed = 1;
  bool operator==(const RunSection&) const = default;
};

struct RewardExtras {
  bool h_target_auto = false;    // calibrate h_target from the initial policy
  int calibration_rollouts = 4;  // rollouts per held-out prompt for calibration
  bool operator==(const RewardExtras&) const = default;
};

struct PathsSection {
  std::string dataset;    // empty: generate in memory from the task section
  std::string templates;  // empty: derive for template-bearing tasks
  bool operator==(const PathsSection&) const = default;
};

// One self-contained experiment description.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  RunSection run;
  PolicyConfig policy;
  Alphabet alphabet;
  SamplerConfig sampler;
  RewardConfig reward;
  RewardExtras reward_extras;
  ProsodyConfig prosody;
  GrpoConfig grpo;
  TaskSpec task;
  PathsSection paths;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::ordered_json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::ordered_json& j);

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

// Collects every semantic problem and throws one ConfigError listing all
// of them; returns normally when the config is valid.
void validate_config(const RunConfig& cfg);

}  // namespace ttsrl

#endif  // TTSRL_CONFIG_HPP_
