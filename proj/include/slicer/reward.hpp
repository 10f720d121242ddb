#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "slicer/slice_env.hpp"

namespace slicer {

/// Coefficients of the two-branch shaped reward.
struct ShapedRewardCoeffs {
  double gamma_p = 20.0;
  double zeta_p = 30.0;
  double nu_p = -6.0;
  double gamma_n = 100.0;
  double zeta_n = -10.0;
  double nu_n = -8.0;
  double r_max = 100.0;
  double prb_norm = 10.0;

  void validate() const {
    if (!(r_max > 0.0)) throw std::invalid_argument("reward.r_max must be > 0");
    if (!(prb_norm > 0.0)) throw std::invalid_argument("reward.prb_norm must be > 0");
  }
  bool operator==(const ShapedRewardCoeffs&) const = default;
};

/// Per-packet rewards u1 = lambda*eps (deadline met) and u0 = -lambda*(1-eps).
struct RewardParams {
  double lambda = 10.0;
  double epsilon = 0.1;
  double prb_norm = 10.0;

  double u1() const { return lambda * epsilon; }
  double u0() const { return -lambda * (1.0 - epsilon); }

  void validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("reward.lambda must be > 0");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
    if (!(prb_norm > 0.0)) throw std::invalid_argument("reward.prb_norm must be > 0");
  }
};

/// Satisfaction margin: p_sat - (1 - eps).
inline double delta(double p_sat, double epsilon) { return p_sat - (1.0 - epsilon); }

/// Per-slot reward whose long-run mean is lambda*(Pr - (1-eps)) - E[N]/prb_norm.
/// Packets completing in the slot contribute u1 or u0, normalised by the
/// running estimate of arrivals per slot.
inline double lln_reward(const SlotMetrics& slot, const RewardParams& params) {
  if (!(slot.ewma_arrivals > 0.0))
    throw std::domain_error("lln_reward: ewma_arrivals must be > 0");
  const double sat = static_cast<double>(slot.satisfied);
  const double unsat = static_cast<double>(slot.completed - slot.satisfied);
  return (params.u1() * sat + params.u0() * unsat) / slot.ewma_arrivals -
         static_cast<double>(slot.n_prbs) / params.prb_norm;
}

/// Closed form of the expected LLN reward for a stationary operating point.
inline double lagrangian(double p_sat, double mean_prbs, const RewardParams& params) {
  return params.lambda * delta(p_sat, params.epsilon) - mean_prbs / params.prb_norm;
}

/// Shaped reward, clipped to [-r_max, 0]. With n = n_prbs / prb_norm:
///   d >= 0:  -d*gamma_p - exp(zeta_p*d + nu_p) * n^2
///   d <  0:   d*gamma_n + exp(zeta_n*d + nu_n) * n
inline double shaped_reward(double d, int n_prbs, const ShapedRewardCoeffs& c) {
  const double n = static_cast<double>(n_prbs) / c.prb_norm;
  double r;
  if (d >= 0.0) {
    r = -d * c.gamma_p - std::exp(c.zeta_p * d + c.nu_p) * n * n;
  } else {
    r = d * c.gamma_n + std::exp(c.zeta_n * d + c.nu_n) * n;
  }
  if (std::isnan(r)) return -c.r_max;
  return std::clamp(r, -c.r_max, 0.0);
}

inline double shaped_reward(const SlotMetrics& slot, double epsilon, const ShapedRewardCoeffs& c) {
  return shaped_reward(delta(slot.p_sat, epsilon), slot.n_prbs, c);
}

/// Coefficients of the mean-delay tracking reward used by the MD-DRL baseline.
struct MeanDelayRewardParams {
  double c_d = 10.0;
  double c_n = 1.0;
  double prb_norm = 10.0;

  bool operator==(const MeanDelayRewardParams&) const = default;
};

inline double mean_delay_reward(const SlotMetrics& slot, int d_target_ttis,
                                const MeanDelayRewardParams& p) {
  if (d_target_ttis < 1) throw std::invalid_argument("mean_delay_reward: d_target must be >= 1");
  const double cost = p.c_n * static_cast<double>(slot.n_prbs) / p.prb_norm;
  if (slot.completed == 0) return -p.c_d - cost;
  const double rel = (slot.mean_delay_ttis - d_target_ttis) / static_cast<double>(d_target_ttis);
  return -p.c_d * rel * rel - cost;
}

enum class RewardKind { shaped, lln, mean_delay };

inline std::string_view to_string(RewardKind k) {
  switch (k) {
    case RewardKind::shaped: return "shaped";
    case RewardKind::lln: return "lln";
    case RewardKind::mean_delay: return "mean_delay";
  }
  return "shaped";
}

inline RewardKind reward_kind_from_string(std::string_view s) {
  if (s == "shaped") return RewardKind::shaped;
  if (s == "lln") return RewardKind::lln;
  if (s == "mean_delay") return RewardKind::mean_delay;
  throw std::invalid_argument("unknown reward kind '" + std::string(s) + "'");
}

/// Everything needed to score a slot under any of the reward functions.
struct RewardConfig {
  RewardKind kind = RewardKind::shaped;
  ShapedRewardCoeffs shaped;
  double lambda = 10.0;
  bool lambda_auto = false;  // oracle picks lambda from its own sweep
  MeanDelayRewardParams mean_delay;

  void validate() const {
    shaped.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("reward.lambda must be > 0");
    if (!(mean_delay.prb_norm > 0.0)) throw std::invalid_argument("reward.md_prb_norm must be > 0");
  }
  bool operator==(const RewardConfig&) const = default;
};

/// Reward of `kind` for one slot of an environment with QoS `qos`.
inline double evaluate_reward(RewardKind kind, const RewardConfig& cfg, const QosSpec& qos,
                              const SlotMetrics& slot) {
  switch (kind) {
    case RewardKind::shaped: return shaped_reward(slot, qos.epsilon, cfg.shaped);
    case RewardKind::lln:
      return lln_reward(slot, RewardParams{cfg.lambda, qos.epsilon, cfg.shaped.prb_norm});
    case RewardKind::mean_delay: return mean_delay_reward(slot, qos.d_max_ttis, cfg.mean_delay);
  }
  return 0.0;
}

inline double evaluate_reward(const RewardConfig& cfg, const QosSpec& qos, const SlotMetrics& slot) {
  return evaluate_reward(cfg.kind, cfg, qos, slot);
}

}  // namespace slicer
