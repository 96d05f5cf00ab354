#ifndef TTSRL_ERRORS_HPP_
#define TTSRL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ttsrl {

// Bad or inconsistent configuration (architecture mismatch, invalid
// thresholds, malformed run config).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data (dataset records, template files, checkpoints).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Reward computation failed; `component` names the reward term that raised.
struct RewardError : std::runtime_error {
  RewardError(std::string component_name, const std::string& msg)
      : std::runtime_error("[" + component_name + "] " + msg),
        component(std::move(component_name)) {}
  std::string component;
};

struct SynthesisError : std::runtime_error {
  explicit SynthesisError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SamplingError : std::runtime_error {
  explicit SamplingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidGroupError : std::runtime_error {
  explicit InvalidGroupError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidTrajectoryError : std::runtime_error {
  explicit InvalidTrajectoryError(const std::string& msg) : std::runtime_error(msg) {}
};

// A training step could not be applied; trainer state is left unchanged.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ttsrl

#endif  // TTSRL_ERRORS_HPP_
