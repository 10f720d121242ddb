#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "slicer/rng.hpp"

namespace slicer {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Time-varying downlink channel of one user.
///
/// The small-scale coefficient is a Rician process: a fixed line-of-sight
/// component plus a first-order Gauss-Markov scattered component. With
/// `k_factor == 0` it reduces to Rayleigh fading. Its mean power is one.
struct ChannelState {
  double doppler_hz = 0.0;
  double large_scale_db = 0.0;
  double k_factor = 0.0;  // linear LOS-to-scatter power ratio
  std::complex<double> scatter{1.0, 0.0};  // unit-power CN(0,1) process
  std::complex<double> small_scale{1.0, 0.0};
  double gain_linear = 1.0;

  bool operator==(const ChannelState&) const = default;
};

/// Correlation of the complex scattered component over a lag of `dt`
/// seconds (Gaussian approximation of J0(2*pi*f_d*dt)).
inline double fading_coefficient(double doppler_hz, double dt) {
  const double x = std::numbers::pi * doppler_hz * dt;
  return std::exp(-x * x);
}

/// Lag-`dt` autocorrelation of |h|^2 for the Rayleigh case.
inline double power_autocorrelation(double doppler_hz, double dt) {
  const double x = std::numbers::pi * doppler_hz * dt;
  return std::exp(-2.0 * x * x);
}

namespace detail {

inline void refresh_gain(ChannelState& s) {
  const double los = std::sqrt(s.k_factor / (s.k_factor + 1.0));
  const double nlos = std::sqrt(1.0 / (s.k_factor + 1.0));
  s.small_scale = std::complex<double>(los, 0.0) + nlos * s.scatter;
  s.gain_linear = db_to_linear(s.large_scale_db) * std::norm(s.small_scale);
}

inline std::complex<double> draw_cn01(Rng& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

}  // namespace detail

/// Channel drawn from the stationary distribution of the fading process.
inline ChannelState make_channel(double doppler_hz, double large_scale_db, double k_factor,
                                 Rng& rng) {
  if (!(doppler_hz >= 0.0)) throw std::invalid_argument("doppler_hz must be >= 0");
  if (!(k_factor >= 0.0)) throw std::invalid_argument("k_factor must be >= 0");
  ChannelState s;
  s.doppler_hz = doppler_hz;
  s.large_scale_db = large_scale_db;
  s.k_factor = k_factor;
  s.scatter = detail::draw_cn01(rng);
  detail::refresh_gain(s);
  return s;
}

/// One Gauss-Markov step of length `dt` seconds.
inline ChannelState advance_channel(const ChannelState& state, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance_channel: dt must be > 0");
  ChannelState next = state;
  if (state.doppler_hz == 0.0) return next;
  const double a = fading_coefficient(state.doppler_hz, dt);
  const double innovation = std::sqrt(std::max(0.0, 1.0 - a * a));
  next.scatter = a * state.scatter + innovation * detail::draw_cn01(rng);
  detail::refresh_gain(next);
  return next;
}

struct RadioConfig {
  double tx_power_watts = 1.0;
  double noise_watts = 1e-10;
  double prb_bandwidth_hz = 180000.0;
  double tti_seconds = 0.001;

  void validate() const {
    if (!(tx_power_watts > 0.0)) throw std::invalid_argument("radio.tx_power_watts must be > 0");
    if (!(noise_watts > 0.0)) throw std::invalid_argument("radio.noise_watts must be > 0");
    if (!(prb_bandwidth_hz > 0.0))
      throw std::invalid_argument("radio.prb_bandwidth_hz must be > 0");
    if (!(tti_seconds > 0.0)) throw std::invalid_argument("radio.tti_seconds must be > 0");
  }

  bool operator==(const RadioConfig&) const = default;
};

/// Linear downlink SNR P*g/N. Power is split uniformly across PRBs, so the
/// value does not depend on how many PRBs the user receives.
inline double snr(const RadioConfig& cfg, const ChannelState& state) {
  return cfg.tx_power_watts * state.gain_linear / cfg.noise_watts;
}

/// SNR (dB) -> spectral efficiency (bit/s/Hz) ladder.
struct CqiTable {
  std::vector<double> thresholds_db;
  std::vector<double> efficiencies;

  /// 15-level LTE CQI efficiencies with thresholds spaced 2.1 dB apart from -6.7 dB.
  static CqiTable standard() {
    CqiTable t;
    t.efficiencies = {0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
                      2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547};
    t.thresholds_db.reserve(t.efficiencies.size());
    for (std::size_t i = 0; i < t.efficiencies.size(); ++i)
      t.thresholds_db.push_back(-6.7 + 2.1 * static_cast<double>(i));
    return t;
  }

  void validate() const {
    if (thresholds_db.empty()) throw std::invalid_argument("cqi.thresholds_db must be non-empty");
    if (thresholds_db.size() != efficiencies.size())
      throw std::invalid_argument("cqi.thresholds_db and cqi.efficiencies differ in length");
    for (std::size_t i = 1; i < thresholds_db.size(); ++i) {
      if (!(thresholds_db[i] > thresholds_db[i - 1]))
        throw std::invalid_argument("cqi.thresholds_db must be strictly ascending");
      if (efficiencies[i] < efficiencies[i - 1])
        throw std::invalid_argument("cqi.efficiencies must be non-decreasing");
    }
    if (efficiencies.front() < 0.0) throw std::invalid_argument("cqi.efficiencies must be >= 0");
  }

  bool operator==(const CqiTable&) const = default;
};

/// Efficiency of the highest level whose threshold is <= snr (left-closed);
/// zero below the first threshold.
inline double map_snr_to_efficiency(const CqiTable& table, double snr_linear) {
  if (!(snr_linear > 0.0)) return 0.0;
  // dB round trips are not exact; a threshold given as linear must map to its own level.
  const double snr_db = linear_to_db(snr_linear) + 1e-9;
  auto it = std::upper_bound(table.thresholds_db.begin(), table.thresholds_db.end(), snr_db);
  if (it == table.thresholds_db.begin()) return 0.0;
  return table.efficiencies[static_cast<std::size_t>(it - table.thresholds_db.begin()) - 1];
}

/// Bits one PRB carries in one TTI: floor(W * T_b * efficiency).
inline std::int64_t prb_capacity(const RadioConfig& cfg, double efficiency) {
  if (efficiency <= 0.0) return 0;
  const double bits = cfg.prb_bandwidth_hz * cfg.tti_seconds * efficiency;
  // Absorb representation error such as 180000 * 0.001 * 2.0 = 359.99999...
  return static_cast<std::int64_t>(std::floor(bits + 1e-9));
}

}  // namespace slicer
