#include "ttsrl/metrics.hpp"

#include "ttsrl/errors.hpp"

namespace ttsrl {

using ordered_json = nlohmann::ordered_json;

ordered_json step_record(const TrainStepReport& r) {
  ordered_json j;
  j["kind"] = "step";
  j["step"] = r.step;
  j["mean_reward"] = r.mean_reward;
  j["mean_r_intl"] = r.mean_r_intl;
  j["mean_r_sim"] = r.mean_r_sim;
  j["mean_r_len"] = r.mean_r_len;
  j["mean_r_ent"] = r.mean_r_ent;
  j["mean_r_pro"] = r.mean_r_pro;
  j["mean_abs_advantage"] = r.mean_abs_advantage;
  j["surrogate_loss"] = r.surrogate_loss;
  j["kl"] = r.kl;
  j["mean_entropy"] = r.mean_entropy;
  j["mean_length"] = r.mean_length;
  j["grad_norm"] = r.grad_norm;
  j["ratio_clamped"] = r.ratio_clamped;
  return j;
}

ordered_json eval_record(uint64_t step, const EvalMetrics& m) {
  ordered_json j;
  j["kind"] = "eval";
  j["step"] = step;
  j["cer"] = m.cer;
  j["mean_sim"] = m.mean_sim;
  j["len_in_tol"] = m.len_in_tol;
  if (m.pause_match_valid) {
    j["pause_match"] = m.pause_match;
  } else {
    j["pause_match"] = nullptr;
  }
  j["mean_entropy"] = m.mean_entropy;
  j["mean_r_ent"] = m.mean_r_ent;
  j["mean_reward"] = m.mean_reward;
  j["mean_length"] = m.mean_length;
  return j;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : path_(path), out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw ValidationError("cannot open metrics stream: " + path);
}

void MetricsWriter::write(const ordered_json& record) {
  out_ << record.dump() << "\n";
  out_.flush();
  if (!out_) throw ValidationError("metrics write failed: " + path_);
}

}  // namespace ttsrl
