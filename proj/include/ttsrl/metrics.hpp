#ifndef TTSRL_METRICS_HPP_
#define TTSRL_METRICS_HPP_

#include <fstream>
#include <string>

#include <json.hpp>

#include "ttsrl/grpo.hpp"

namespace ttsrl {

// Aggregate evaluation of a policy over a prompt set.
struct EvalMetrics {
  double cer = 0.0;          // mean (1 - r_intl): the error-rate analogue
  double mean_sim = 0.0;
  double len_in_tol = 0.0;   // fraction of rollouts with r_len = 1
  double pause_match = 0.0;  // fraction with r_pro = 1, over template-bearing prompts
  bool pause_match_valid = false;
  double mean_entropy = 0.0;
  double mean_r_ent = 0.0;
  double mean_reward = 0.0;  // weighted total under the evaluation reward config
  double mean_length = 0.0;
};

// Metric stream records. Field order is fixed; one compact JSON object per
// line. "kind" is one of "step", "eval", "summary", "header", "rung",
// "rung_mean", "cell", "monotonicity".
nlohmann::ordered_json step_record(const TrainStepReport& report);
nlohmann::ordered_json eval_record(uint64_t step, const EvalMetrics& metrics);

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, bool append);
  void write(const nlohmann::ordered_json& record);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace ttsrl

#endif  // TTSRL_METRICS_HPP_
