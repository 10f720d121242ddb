#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "slicer/rng.hpp"

namespace slicer {

enum class SizeClass { small, medium, large };

inline std::string_view to_string(SizeClass c) {
  switch (c) {
    case SizeClass::small: return "small";
    case SizeClass::medium: return "medium";
    case SizeClass::large: return "large";
  }
  return "medium";
}

inline SizeClass size_class_from_string(std::string_view s) {
  if (s == "small") return SizeClass::small;
  if (s == "medium") return SizeClass::medium;
  if (s == "large") return SizeClass::large;
  throw std::invalid_argument("unknown size_class '" + std::string(s) + "'");
}

/// Log-normal packet size parameters, in bits.
struct SizeParams {
  double mu_ln = 0.0;
  double sigma_ln = 0.5;

  double mean_bits() const { return std::exp(mu_ln + 0.5 * sigma_ln * sigma_ln); }
  bool operator==(const SizeParams&) const = default;
};

inline SizeParams default_size_params(SizeClass c) {
  switch (c) {
    case SizeClass::small: return {std::log(2000.0), 0.5};
    case SizeClass::medium: return {std::log(12000.0), 0.5};
    case SizeClass::large: return {std::log(60000.0), 0.5};
  }
  return {std::log(12000.0), 0.5};
}

struct UserTrafficProfile {
  double arrival_rate_per_slot = 0.0;  // Poisson mean per slicing slot
  SizeClass size_class = SizeClass::medium;
  SizeParams size = default_size_params(SizeClass::medium);

  void validate() const {
    if (!(arrival_rate_per_slot >= 0.0)) throw std::invalid_argument("rate must be >= 0");
    if (!(size.sigma_ln >= 0.0)) throw std::invalid_argument("size sigma_ln must be >= 0");
  }
  bool operator==(const UserTrafficProfile&) const = default;
};

struct LoadPattern {
  enum class Kind { constant, ramp_up_down };
  Kind kind = Kind::constant;
  double peak_multiplier = 1.0;
  int period_slots = 100;

  void validate() const {
    if (!(peak_multiplier >= 1.0))
      throw std::invalid_argument("load_pattern.peak_multiplier must be >= 1");
    if (period_slots < 2) throw std::invalid_argument("load_pattern.period_slots must be >= 2");
  }
  bool operator==(const LoadPattern&) const = default;
};

/// Triangular wave 1 -> peak -> 1 over `period_slots`; constant pattern is 1.
inline double pattern_multiplier(const LoadPattern& pattern, std::int64_t slot_index) {
  if (pattern.kind == LoadPattern::Kind::constant) return 1.0;
  const auto period = static_cast<std::int64_t>(pattern.period_slots);
  const double phase = static_cast<double>(slot_index % period) / static_cast<double>(period);
  const double tri = phase <= 0.5 ? 2.0 * phase : 2.0 * (1.0 - phase);
  return 1.0 + (pattern.peak_multiplier - 1.0) * tri;
}

struct Packet {
  std::uint64_t id = 0;
  std::int64_t arrival_tti = 0;
  std::int64_t deadline_tti = 0;  // last TTI at which completion still meets the bound
  std::int64_t size_bits = 0;
  std::int64_t remaining_bits = 0;
  int user_id = 0;
  std::optional<std::int64_t> delivered_tti;

  /// Delay in TTIs, counting both the arrival and the completion TTI.
  std::int64_t delay_ttis() const { return *delivered_tti - arrival_tti + 1; }
};

/// Poisson number of packets for one slot, uniformly placed over
/// [t_start, t_end), with log-normal sizes. Result is sorted by (arrival, id)
/// and ids are consumed from `next_id`.
inline std::vector<Packet> sample_arrivals(const UserTrafficProfile& profile,
                                           const LoadPattern& pattern, std::int64_t slot_index,
                                           std::int64_t t_start, std::int64_t t_end, Rng& rng,
                                           std::uint64_t& next_id, int user_id = 0) {
  if (!(t_start < t_end)) throw std::invalid_argument("sample_arrivals: empty TTI range");
  std::vector<Packet> out;
  const double mean = profile.arrival_rate_per_slot * pattern_multiplier(pattern, slot_index);
  if (mean <= 0.0) return out;
  const auto count = std::poisson_distribution<std::int64_t>(mean)(rng);
  out.reserve(static_cast<std::size_t>(count));
  std::uniform_int_distribution<std::int64_t> when(t_start, t_end - 1);
  std::lognormal_distribution<double> size(profile.size.mu_ln, profile.size.sigma_ln);
  for (std::int64_t i = 0; i < count; ++i) {
    Packet p;
    p.arrival_tti = when(rng);
    p.size_bits = std::max<std::int64_t>(1, std::llround(size(rng)));
    p.remaining_bits = p.size_bits;
    p.user_id = user_id;
    out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Packet& a, const Packet& b) { return a.arrival_tti < b.arrival_tti; });
  for (auto& p : out) p.id = next_id++;
  return out;
}

}  // namespace slicer
