#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "slicer/nn.hpp"
#include "slicer/reward.hpp"
#include "slicer/slice_env.hpp"

namespace slicer {

struct SweepConfig {
  std::int64_t slots_per_point = 300;
  int window = 5;  // points per local slope fit in the monotonicity checks
  unsigned threads = 1;

  void validate() const {
    if (slots_per_point < 1) throw std::invalid_argument("sweep.slots_per_point must be >= 1");
    if (window < 2) throw std::invalid_argument("sweep.window must be >= 2");
  }
};

/// Stationary statistics of one constant grant. Every point of a sweep is
/// run from the same seed, so points share arrivals and fading.
struct SweepPoint {
  int n_prbs = 0;
  double p_sat = 0.0;  // satisfied / completed over the run
  double mean_slot_p_sat = 0.0;
  double mean_delay_ttis = 0.0;  // per packet
  // Mean per-slot constraint term (eps*sat - (1-eps)*unsat)/ewma, so that
  // the mean LLN reward is lambda * constraint_term - n/prb_norm.
  double constraint_term = 0.0;
  double mean_delay_reward = 0.0;
  double shaped_slot_mean = 0.0;
};

inline SweepPoint run_sweep_point(const EnvConfig& cfg, const RewardConfig& rc, int n,
                                  std::int64_t slots, std::uint64_t seed) {
  SliceEnv env(cfg, seed);
  const double eps = cfg.qos.epsilon;
  SweepPoint pt;
  pt.n_prbs = n;
  std::int64_t sat = 0, comp = 0;
  double dsum = 0.0;
  for (std::int64_t t = 0; t < slots; ++t) {
    const auto m = env.step(n).metrics;
    sat += m.satisfied;
    comp += m.completed;
    dsum += m.mean_delay_ttis * static_cast<double>(m.completed);
    pt.mean_slot_p_sat += m.p_sat;
    const double unsat = static_cast<double>(m.completed - m.satisfied);
    pt.constraint_term += (eps * static_cast<double>(m.satisfied) - (1.0 - eps) * unsat) / m.ewma_arrivals;
    pt.mean_delay_reward += mean_delay_reward(m, cfg.qos.d_max_ttis, rc.mean_delay);
    pt.shaped_slot_mean += shaped_reward(m, eps, rc.shaped);
  }
  const double s = static_cast<double>(slots);
  pt.mean_slot_p_sat /= s;
  pt.constraint_term /= s;
  pt.mean_delay_reward /= s;
  pt.shaped_slot_mean /= s;
  pt.p_sat = comp > 0 ? static_cast<double>(sat) / static_cast<double>(comp) : 0.0;
  pt.mean_delay_ttis = comp > 0 ? dsum / static_cast<double>(comp) : 0.0;
  return pt;
}

/// Constant-grant sweep over [prb_min, prb_max].
inline std::vector<SweepPoint> prb_sweep(const EnvConfig& cfg, const RewardConfig& rc,
                                         const SweepConfig& sc, std::uint64_t seed) {
  sc.validate();
  cfg.validate();
  const int lo = cfg.prb_min, hi = cfg.prb_max;
  std::vector<SweepPoint> pts(static_cast<std::size_t>(hi - lo + 1));
  const unsigned threads = std::max(1u, std::min<unsigned>(sc.threads, static_cast<unsigned>(pts.size())));
  auto work = [&](unsigned t) {
    for (std::size_t k = t; k < pts.size(); k += threads)
      pts[k] = run_sweep_point(cfg, rc, lo + static_cast<int>(k), sc.slots_per_point, seed);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return pts;
}

/// Stationary shaped reward at the point's aggregate satisfaction probability.
inline double stationary_shaped(const SweepPoint& p, double epsilon, const ShapedRewardCoeffs& c) {
  return shaped_reward(delta(p.p_sat, epsilon), p.n_prbs, c);
}

inline double stationary_lln(const SweepPoint& p, double lambda, double prb_norm) {
  return lambda * p.constraint_term - static_cast<double>(p.n_prbs) / prb_norm;
}

/// Least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

/// Average ranks (ties share the mean rank).
inline std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct RewardShapeReport {
  std::optional<int> knee_n;  // smallest n with p_sat >= 1 - eps
  int argmax_n = -1;  // shaped
  int lln_argmax_n = -1;
  bool monotone_below = false;
  bool monotone_above = false;
  double lambda = 0.0;  // lambda the LLN argmax was taken with
  double lambda_lo = 0.0;  // open interval of lambdas that put the LLN argmax at the knee
  double lambda_hi = 0.0;
  bool pass = false;
  std::string failure;  // first violated condition, empty on pass
};

namespace detail {

/// True when every window of consecutive points in [first, last] has a
/// least-squares slope with the sign of `dir`.
inline bool windows_monotone(const std::vector<double>& x, const std::vector<double>& y,
                             std::size_t first, std::size_t last, int window, int dir) {
  if (last < first) return true;
  const std::size_t len = last - first + 1;
  if (len < 2) return true;
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), len);
  for (std::size_t s = first; s + w <= last + 1; ++s) {
    const double slope = ls_slope(std::span(x).subspan(s, w), std::span(y).subspan(s, w));
    if (!(dir * slope > 0.0)) return false;
  }
  return true;
}

}  // namespace detail

/// Checks that the shaped reward escapes the unlearnable region and agrees
/// with the LLN reward: (a) rises below the knee, (b) falls above it,
/// (c) peaks at the knee, (d) the LLN reward peaks there too. With
/// `lambda_auto` the LLN weight is the midpoint of the admissible interval.
inline RewardShapeReport validate_reward_shape(const std::vector<SweepPoint>& pts,
                                               const EnvConfig& cfg, const RewardConfig& rc,
                                               int window = 5) {
  RewardShapeReport r;
  if (pts.empty()) {
    r.failure = "empty_sweep";
    return r;
  }
  const double eps = cfg.qos.epsilon;
  const double norm = rc.shaped.prb_norm;
  std::vector<double> x, shaped;
  for (const auto& p : pts) {
    x.push_back(p.n_prbs);
    shaped.push_back(stationary_shaped(p, eps, rc.shaped));
  }
  r.argmax_n = pts[argmax(shaped)].n_prbs;

  std::size_t k = pts.size();
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i].p_sat >= 1.0 - eps) {
      k = i;
      break;
    }
  if (k == pts.size()) {
    r.failure = "no_feasible_prb";
    return r;
  }
  r.knee_n = pts[k].n_prbs;

  // Admissible lambda: lambda*(K_k - K_i) > (n_k - n_i)/norm for every i != k.
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == k) continue;
    const double dk = pts[k].constraint_term - pts[i].constraint_term;
    const double dn = static_cast<double>(pts[k].n_prbs - pts[i].n_prbs) / norm;
    if (i < k) {
      if (dk <= 0.0) lo = std::numeric_limits<double>::infinity();
      else lo = std::max(lo, dn / dk);
    } else if (dk < 0.0) {
      hi = std::min(hi, dn / dk);
    }
  }
  r.lambda_lo = lo;
  r.lambda_hi = hi;
  if (rc.lambda_auto) {
    r.lambda = lo < hi ? (std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo + 1.0) : rc.lambda;
  } else {
    r.lambda = rc.lambda;
  }
  std::vector<double> lln;
  for (const auto& p : pts) lln.push_back(stationary_lln(p, r.lambda, norm));
  r.lln_argmax_n = pts[argmax(lln)].n_prbs;

  r.monotone_below = k == 0 || detail::windows_monotone(x, shaped, 0, k - 1, window, +1);
  r.monotone_above = detail::windows_monotone(x, shaped, k, pts.size() - 1, window, -1);
  // The maximum must be unique.
  const double best = shaped[k];
  bool unique = true;
  for (std::size_t i = 0; i < shaped.size(); ++i)
    if (i != k && shaped[i] >= best) unique = false;

  if (!r.monotone_below) r.failure = "monotone_below";
  else if (!r.monotone_above) r.failure = "monotone_above";
  else if (r.argmax_n != *r.knee_n || !unique) r.failure = "argmax_at_knee";
  else if (r.lln_argmax_n != *r.knee_n || !(r.lambda > lo && r.lambda < hi)) r.failure = "lln_argmax_agrees";
  r.pass = r.failure.empty();
  return r;
}

}  // namespace slicer
