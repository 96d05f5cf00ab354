#include "ttsrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ttsrl/errors.hpp"

namespace ttsrl {

void validate_grpo_config(const GrpoConfig& cfg) {
  if (cfg.group_size < 2) throw ConfigError("group_size must be >= 2");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0))
    throw ConfigError("clip_epsilon must be in (0, 1)");
  if (cfg.kl_coef < 0.0) throw ConfigError("kl_coef must be non-negative");
  if (cfg.epochs_per_batch < 1) throw ConfigError("epochs_per_batch must be >= 1");
  if (cfg.total_steps < 0) throw ConfigError("total_steps must be non-negative");
  if (cfg.ref_refresh_interval < 0) throw ConfigError("ref_refresh_interval must be >= 0");
}

RolloutGroup collect_group(const PolicyParams& params, const PromptCase& prompt_case,
                           int group_size, const SamplerConfig& sampler,
                           const RewardConfig& reward_cfg, const ProsodyConfig& prosody,
                           uint64_t rollout_seed) {
  if (group_size < 2) throw InvalidGroupError("group size must be >= 2");

  RolloutGroup group;
  group.prompt = prompt_case.target;
  group.members.reserve(group_size);
  group.breakdowns.reserve(group_size);
  group.rewards.reserve(group_size);
  for (int i = 0; i < group_size; ++i) {
    Rng rng = Rng::stream(rollout_seed, {rng_tag::kRollout, static_cast<uint64_t>(i)});
    Trajectory traj = rollout(params, prompt_case.target, sampler, rng);
    SynthesisResult synth = synthesize(traj.actions, params.arch.vocab);
    try {
      RewardBreakdown bd =
          score_trajectory(traj, synth, prompt_case.ref, prompt_case.templates, reward_cfg, prosody);
      group.rewards.push_back(bd.total);
      group.breakdowns.push_back(bd);
    } catch (const RewardError& e) {
      throw RewardError(e.component, "prompt " + std::to_string(prompt_case.id) + " member " +
                                         std::to_string(i) + ": " + e.what());
    }
    group.members.push_back(std::move(traj));
  }
  group.advantages = normalize_group_advantages(group.rewards);
  return group;
}

SurrogateResult surrogate_loss(const RolloutGroup& group, const PolicyParams& params_new,
                               const PolicyParams& params_old, const PolicyParams& params_ref,
                               const GrpoConfig& cfg) {
  if (params_new.theta.size() != params_old.theta.size() ||
      params_new.theta.size() != params_ref.theta.size())
    throw ConfigError("parameter vectors must have identical dimensions");
  if (group.size() < 2 || group.advantages.size() != group.size())
    throw InvalidGroupError("group is not scored/normalized");

  const double g_inv = 1.0 / static_cast<double>(group.size());
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;

  SurrogateResult out;
  out.grad.assign(params_new.theta.size(), 0.0);
  double kl_sum = 0.0;
  size_t token_count = 0;

  const bool new_is_old = params_new.theta == params_old.theta;
  const bool new_is_ref = params_new.theta == params_ref.theta;

  for (size_t i = 0; i < group.size(); ++i) {
    const Trajectory& traj = group.members[i];
    const double adv = group.advantages[i];
    const size_t t_len = traj.length();
    const double scale = g_inv * (cfg.length_norm ? 1.0 / static_cast<double>(t_len) : 1.0);

    const std::vector<double> lp_new = action_logprobs(params_new, traj);
    const std::vector<double> lp_old = new_is_old ? lp_new : action_logprobs(params_old, traj);
    const std::vector<double> lp_ref = new_is_ref ? lp_new : action_logprobs(params_ref, traj);

    std::vector<double> dloss_dlp(t_len, 0.0);
    for (size_t t = 0; t < t_len; ++t) {
      double ratio = std::exp(lp_new[t] - lp_old[t]);
      double dratio_dlp = ratio;
      if (ratio < kRatioMin || ratio > kRatioMax) {
        ratio = std::clamp(ratio, kRatioMin, kRatioMax);
        dratio_dlp = 0.0;  // clamped: constant in theta
        ++out.ratio_clamped;
      }

      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, lo, hi) * adv;
      const double pg_term = std::min(unclipped, clipped);
      // The unclipped branch is active (has nonzero derivative) when it
      // attains the min: ratio <= hi for positive advantages, ratio >= lo
      // for negative ones.
      double dpg_dlp = 0.0;
      if (adv > 0.0 && ratio <= hi) dpg_dlp = adv * dratio_dlp;
      if (adv < 0.0 && ratio >= lo) dpg_dlp = adv * dratio_dlp;

      double kl_term = 0.0;
      double dkl_dlp = 0.0;
      if (cfg.kl_coef != 0.0) {
        const double r = std::clamp(std::exp(lp_ref[t] - lp_new[t]), 1e-12, 1e12);
        kl_term = r - (lp_ref[t] - lp_new[t]) - 1.0;
        dkl_dlp = 1.0 - r;
        kl_sum += kl_term;
      } else {
        const double r = std::clamp(std::exp(lp_ref[t] - lp_new[t]), 1e-12, 1e12);
        kl_sum += r - (lp_ref[t] - lp_new[t]) - 1.0;  // reported even when unpenalized
      }

      out.loss -= scale * (pg_term - cfg.kl_coef * kl_term);
      dloss_dlp[t] = -scale * (dpg_dlp - cfg.kl_coef * dkl_dlp);
    }
    token_count += t_len;

    bool any_nonzero = false;
    for (double w : dloss_dlp) {
      if (w != 0.0) {
        any_nonzero = true;
        break;
      }
    }
    if (any_nonzero) {
      WeightedLogprobGrad wg = logprob_and_grad(params_new, traj, dloss_dlp);
      for (size_t p = 0; p < out.grad.size(); ++p) out.grad[p] += wg.grad[p];
    }
  }

  out.mean_kl = token_count > 0 ? kl_sum / static_cast<double>(token_count) : 0.0;
  return out;
}

TrainerState make_trainer_state(PolicyParams params, uint64_t master_seed) {
  validate_params(params);
  TrainerState state;
  state.ref_theta = params.theta;
  state.opt.m.assign(params.theta.size(), 0.0);
  state.opt.v.assign(params.theta.size(), 0.0);
  state.params = std::move(params);
  state.master_seed = master_seed;
  return state;
}

namespace {

void adam_update(std::vector<double>& theta, AdamState& opt, const std::vector<double>& grad,
                 double lr) {
  ++opt.t;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(opt.t));
  for (size_t i = 0; i < theta.size(); ++i) {
    opt.m[i] = kAdamBeta1 * opt.m[i] + (1.0 - kAdamBeta1) * grad[i];
    opt.v[i] = kAdamBeta2 * opt.v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    const double m_hat = opt.m[i] / bc1;
    const double v_hat = opt.v[i] / bc2;
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

}  // namespace

TrainStepReport train_step(TrainerState& state, std::span<const PromptCase> batch,
                           const GrpoConfig& grpo, const SamplerConfig& sampler,
                           const RewardConfig& reward_cfg, const ProsodyConfig& prosody) {
  validate_grpo_config(grpo);
  if (batch.empty()) throw ConfigError("train_step requires a non-empty batch");

  // Frozen snapshot for rollout collection and importance ratios.
  const PolicyParams params_old = state.params;
  PolicyParams params_ref;
  params_ref.arch = state.params.arch;
  params_ref.theta = state.ref_theta;

  std::vector<RolloutGroup> groups;
  groups.reserve(batch.size());
  for (size_t j = 0; j < batch.size(); ++j) {
    const uint64_t rollout_seed =
        Rng::mix(Rng::mix(state.master_seed, state.step), static_cast<uint64_t>(j));
    groups.push_back(collect_group(params_old, batch[j], grpo.group_size, sampler, reward_cfg,
                                   prosody, rollout_seed));
  }

  const double batch_inv = 1.0 / static_cast<double>(groups.size());
  TrainStepReport report;
  report.step = state.step;

  // Optimization epochs over the collected groups. Snapshot the full
  // mutable state so an aborted step leaves no trace.
  const std::vector<double> theta_backup = state.params.theta;
  const AdamState opt_backup = state.opt;

  for (int epoch = 0; epoch < grpo.epochs_per_batch; ++epoch) {
    double loss = 0.0;
    double kl = 0.0;
    uint64_t clamped = 0;
    std::vector<double> grad(state.params.theta.size(), 0.0);
    for (const RolloutGroup& group : groups) {
      SurrogateResult res = surrogate_loss(group, state.params, params_old, params_ref, grpo);
      loss += batch_inv * res.loss;
      kl += batch_inv * res.mean_kl;
      clamped += res.ratio_clamped;
      for (size_t p = 0; p < grad.size(); ++p) grad[p] += batch_inv * res.grad[p];
    }

    double norm_sq = 0.0;
    for (double g : grad) norm_sq += g * g;
    if (!std::isfinite(norm_sq) || !std::isfinite(loss)) {
      state.params.theta = theta_backup;
      state.opt = opt_backup;
      throw TrainingError("non-finite loss or gradient at step " + std::to_string(state.step));
    }

    adam_update(state.params.theta, state.opt, grad, grpo.learning_rate);

    report.surrogate_loss = loss;
    report.kl = kl;
    report.grad_norm = std::sqrt(norm_sq);
    report.ratio_clamped = clamped;
  }

  // Batch statistics over every scored rollout.
  size_t members = 0;
  for (const RolloutGroup& group : groups) {
    for (size_t i = 0; i < group.size(); ++i) {
      const RewardBreakdown& bd = group.breakdowns[i];
      report.mean_reward += bd.total;
      report.mean_r_intl += bd.r_intl;
      report.mean_r_sim += bd.r_sim;
      report.mean_r_len += bd.r_len;
      report.mean_r_ent += bd.r_ent;
      report.mean_r_pro += bd.r_pro;
      report.mean_abs_advantage += std::abs(group.advantages[i]);
      report.mean_entropy += mean_entropy(group.members[i]);
      report.mean_length += static_cast<double>(group.members[i].length());
      ++members;
    }
  }
  const double inv = 1.0 / static_cast<double>(members);
  report.mean_reward *= inv;
  report.mean_r_intl *= inv;
  report.mean_r_sim *= inv;
  report.mean_r_len *= inv;
  report.mean_r_ent *= inv;
  report.mean_r_pro *= inv;
  report.mean_abs_advantage *= inv;
  report.mean_entropy *= inv;
  report.mean_length *= inv;

  ++state.step;
  if (grpo.ref_refresh_interval > 0 && state.step % grpo.ref_refresh_interval == 0) {
    state.ref_theta = state.params.theta;
  }
  return report;
}

}  // namespace ttsrl
