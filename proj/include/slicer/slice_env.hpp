#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slicer/channel.hpp"
#include "slicer/rng.hpp"
#include "slicer/traffic.hpp"

namespace slicer {

struct QosSpec {
  int d_max_ttis = 5;
  double epsilon = 0.1;

  void validate() const {
    if (d_max_ttis < 1) throw std::invalid_argument("qos.d_max_ms must be at least one TTI");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("qos.epsilon must lie in (0, 1)");
  }
  bool operator==(const QosSpec&) const = default;
};

struct UserConfig {
  double doppler_hz = 20.0;
  double large_scale_db = -85.0;
  double k_factor = 0.0;
  UserTrafficProfile traffic;

  bool operator==(const UserConfig&) const = default;
};

struct EnvConfig {
  QosSpec qos;
  RadioConfig radio;
  CqiTable cqi = CqiTable::standard();
  std::vector<UserConfig> users;
  LoadPattern load;
  int slot_ttis = 200;  // H
  int prb_min = 0;
  int prb_max = 150;
  int initial_prbs = 75;
  int history = 4;  // h
  int drop_horizon_factor = 4;
  std::size_t overload_limit = 100000;
  double ewma_decay = 0.01;

  int drop_horizon_ttis() const { return drop_horizon_factor * qos.d_max_ttis; }

  void validate() const {
    qos.validate();
    radio.validate();
    cqi.validate();
    load.validate();
    for (const auto& u : users) {
      u.traffic.validate();
      if (!(u.doppler_hz >= 0.0)) throw std::invalid_argument("users.doppler_hz must be >= 0");
      if (!(u.k_factor >= 0.0)) throw std::invalid_argument("users.k_factor must be >= 0");
    }
    if (slot_ttis < 1) throw std::invalid_argument("env.slot_ttis must be >= 1");
    if (prb_min < 0 || prb_max < prb_min)
      throw std::invalid_argument("env.prb_min/env.prb_max must satisfy 0 <= min <= max");
    if (initial_prbs < prb_min || initial_prbs > prb_max)
      throw std::invalid_argument("env.initial_prbs must lie in [prb_min, prb_max]");
    if (history < 1) throw std::invalid_argument("env.h_history must be >= 1");
    if (drop_horizon_factor < 1) throw std::invalid_argument("env.drop_horizon_factor must be >= 1");
    if (!(ewma_decay > 0.0 && ewma_decay <= 1.0))
      throw std::invalid_argument("env.ewma_decay must lie in (0, 1]");
  }
  bool operator==(const EnvConfig&) const = default;
};

/// Statistics of one slicing slot. Delays are in TTIs.
struct SlotMetrics {
  std::int64_t slot_index = 0;
  int n_prbs = 0;
  std::int64_t arrivals = 0;
  std::int64_t completed = 0;  // includes dropped packets
  std::int64_t satisfied = 0;
  std::int64_t dropped = 0;
  double p_sat = 0.0;
  double mean_delay_ttis = 0.0;
  double std_delay_ttis = 0.0;
  double mean_snr_db = 0.0;
  double std_snr_db = 0.0;
  double mean_capacity_bits = 0.0;  // per PRB, averaged over users and TTIs
  double mean_demand_capacity_ratio = 0.0;
  int prbs_used_prev = 0;  // grant in force during this slot
  double prbs_consumed = 0.0;  // PRBs the scheduler actually used, per TTI
  double ewma_arrivals = 0.0;
  std::size_t queue_len = 0;
  bool overloaded = false;
};

inline constexpr int kFeaturesPerSlot = 7;

struct Observation {
  std::vector<double> features;
};

struct ObservationNorms {
  double d_max_ttis = 5.0;
  double prb_max = 150.0;
  double snr_db = 30.0;
  double snr_std_db = 10.0;
  double demand = 150.0;

  static ObservationNorms for_config(const EnvConfig& cfg) {
    ObservationNorms n;
    n.d_max_ttis = cfg.qos.d_max_ttis;
    n.prb_max = std::max(1, cfg.prb_max);
    n.demand = n.prb_max;
    return n;
  }
};

/// Features of the last `h` slots, most recent first; missing slots are zeros.
inline Observation make_observation(std::span<const SlotMetrics> history_recent_first, int h,
                                    const ObservationNorms& norms) {
  if (h < 1) throw std::invalid_argument("make_observation: h must be >= 1");
  Observation obs;
  obs.features.assign(static_cast<std::size_t>(h) * kFeaturesPerSlot, 0.0);
  const auto n = std::min<std::size_t>(history_recent_first.size(), static_cast<std::size_t>(h));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = history_recent_first[i];
    double* f = obs.features.data() + i * kFeaturesPerSlot;
    f[0] = m.p_sat;
    f[1] = m.mean_delay_ttis / norms.d_max_ttis;
    f[2] = m.std_delay_ttis / norms.d_max_ttis;
    f[3] = m.mean_snr_db / norms.snr_db;
    f[4] = m.std_snr_db / norms.snr_std_db;
    f[5] = m.mean_demand_capacity_ratio / norms.demand;
    f[6] = static_cast<double>(m.prbs_used_prev) / norms.prb_max;
  }
  return obs;
}

struct ScheduleResult {
  std::vector<std::pair<std::uint64_t, int>> allocations;  // packet id -> PRBs
  int prbs_used = 0;
};

inline bool edf_before(const Packet& a, const Packet& b) {
  if (a.deadline_tti != b.deadline_tti) return a.deadline_tti < b.deadline_tti;
  if (a.arrival_tti != b.arrival_tti) return a.arrival_tti < b.arrival_tti;
  return a.id < b.id;
}

/// Earliest-deadline-first allocation of `n_prbs` PRBs for one TTI.
/// Decrements `remaining_bits` of served packets in place; packets whose
/// user has zero capacity this TTI are skipped.
inline ScheduleResult schedule_tti(std::span<Packet> queue, int n_prbs,
                                   std::span<const std::int64_t> capacity_by_user) {
  if (n_prbs < 0) throw std::invalid_argument("schedule_tti: n_prbs must be >= 0");
  ScheduleResult result;
  std::vector<std::size_t> order;
  const bool sorted = std::is_sorted(queue.begin(), queue.end(), edf_before);
  if (!sorted) {
    order.resize(queue.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return edf_before(queue[a], queue[b]); });
  }
  int budget = n_prbs;
  for (std::size_t k = 0; k < queue.size() && budget > 0; ++k) {
    Packet& p = queue[sorted ? k : order[k]];
    if (p.remaining_bits <= 0) continue;
    const auto user = static_cast<std::size_t>(p.user_id);
    const std::int64_t cap = user < capacity_by_user.size() ? capacity_by_user[user] : 0;
    if (cap <= 0) continue;
    const std::int64_t need = (p.remaining_bits + cap - 1) / cap;
    const int give = static_cast<int>(std::min<std::int64_t>(need, budget));
    p.remaining_bits = std::max<std::int64_t>(0, p.remaining_bits - cap * give);
    budget -= give;
    result.allocations.emplace_back(p.id, give);
    result.prbs_used += give;
  }
  return result;
}

/// Called once per TTI after scheduling, before completed packets leave the
/// queue. `queue` shows the remaining bits after this TTI's service.
using TtiObserver = std::function<void(std::int64_t tti, std::span<const Packet> queue,
                                       const ScheduleResult& sched,
                                       std::span<const std::int64_t> capacity_by_user)>;

struct StepResult {
  Observation observation;
  SlotMetrics metrics;
};

/// One MVNO slice in one cell. A slot of H TTIs runs per call to step().
class SliceEnv {
 public:
  SliceEnv(EnvConfig cfg, std::uint64_t seed)
      : cfg_(validated(std::move(cfg))),
        norms_(ObservationNorms::for_config(cfg_)),
        channel_rng_(make_stream(seed, "channel")),
        traffic_rng_(make_stream(seed, "traffic")),
        current_prbs_(cfg_.initial_prbs) {
    channels_.reserve(cfg_.users.size());
    for (const auto& u : cfg_.users)
      channels_.push_back(make_channel(u.doppler_hz, u.large_scale_db, u.k_factor, channel_rng_));
    capacity_.assign(cfg_.users.size(), 0);
  }

  const EnvConfig& config() const { return cfg_; }
  int current_prbs() const { return current_prbs_; }
  std::int64_t slot_index() const { return slot_index_; }
  std::size_t queue_length() const { return queue_.size(); }
  const std::vector<Packet>& queue() const { return queue_; }
  const std::deque<SlotMetrics>& history() const { return history_; }
  std::size_t overload_events() const { return overload_events_; }

  Observation observation() const {
    std::vector<SlotMetrics> h(history_.begin(), history_.end());
    return make_observation(h, cfg_.history, norms_);
  }

  void set_tti_observer(TtiObserver obs) { observer_ = std::move(obs); }

  int clamp_prbs(int n) const { return std::clamp(n, cfg_.prb_min, cfg_.prb_max); }

  StepResult step(int n_prbs) {
    if (n_prbs < cfg_.prb_min || n_prbs > cfg_.prb_max)
      throw std::out_of_range("SliceEnv::step: n_prbs " + std::to_string(n_prbs) +
                              " outside [prb_min, prb_max]");
    current_prbs_ = n_prbs;
    const std::int64_t H = cfg_.slot_ttis;
    const std::int64_t t0 = slot_index_ * H;
    const int d_max = cfg_.qos.d_max_ttis;
    const int drop_after = cfg_.drop_horizon_ttis();

    // Arrivals for the whole slot, merged across users in (arrival, id) order.
    pending_.clear();
    for (std::size_t u = 0; u < cfg_.users.size(); ++u) {
      auto pk = sample_arrivals(cfg_.users[u].traffic, cfg_.load, slot_index_, t0, t0 + H,
                                traffic_rng_, next_packet_id_, static_cast<int>(u));
      for (auto& p : pk) p.deadline_tti = p.arrival_tti + d_max - 1;
      pending_.insert(pending_.end(), pk.begin(), pk.end());
    }
    std::sort(pending_.begin(), pending_.end(), [](const Packet& a, const Packet& b) {
      return a.arrival_tti != b.arrival_tti ? a.arrival_tti < b.arrival_tti : a.id < b.id;
    });

    SlotMetrics m;
    m.slot_index = slot_index_;
    m.n_prbs = n_prbs;
    m.prbs_used_prev = n_prbs;
    m.arrivals = static_cast<std::int64_t>(pending_.size());

    double delay_sum = 0.0, delay_sq = 0.0, size_sum = 0.0;
    double snr_sum = 0.0, snr_sq = 0.0, cap_sum = 0.0;
    std::int64_t consumed = 0;
    std::size_t next_pending = 0;
    const double tti = cfg_.radio.tti_seconds;

    auto complete = [&](const Packet& p, std::int64_t at) {
      const double d = static_cast<double>(at - p.arrival_tti + 1);
      ++m.completed;
      if (d <= d_max) ++m.satisfied;
      delay_sum += d;
      delay_sq += d * d;
      size_sum += static_cast<double>(p.size_bits);
    };

    for (std::int64_t k = 0; k < H; ++k) {
      const std::int64_t t = t0 + k;
      for (std::size_t u = 0; u < channels_.size(); ++u) {
        channels_[u] = advance_channel(channels_[u], tti, channel_rng_);
        const double s = snr(cfg_.radio, channels_[u]);
        capacity_[u] = prb_capacity(cfg_.radio, map_snr_to_efficiency(cfg_.cqi, s));
        const double s_db = s > 0.0 ? std::max(-30.0, linear_to_db(s)) : -30.0;
        snr_sum += s_db;
        snr_sq += s_db * s_db;
        cap_sum += static_cast<double>(capacity_[u]);
      }
      while (next_pending < pending_.size() && pending_[next_pending].arrival_tti == t) {
        insert_sorted(pending_[next_pending]);
        ++next_pending;
      }
      const auto sched = schedule_tti(queue_, n_prbs, capacity_);
      consumed += sched.prbs_used;
      if (observer_) observer_(t, queue_, sched, capacity_);

      std::size_t keep = 0;
      for (std::size_t i = 0; i < queue_.size(); ++i) {
        Packet& p = queue_[i];
        if (p.remaining_bits == 0) {
          p.delivered_tti = t;
          complete(p, t);
        } else if (t - p.arrival_tti + 1 >= drop_after) {
          ++m.dropped;
          complete(p, t);
        } else {
          if (keep != i) queue_[keep] = std::move(p);
          ++keep;
        }
      }
      queue_.resize(keep);
    }

    const double samples = static_cast<double>(H) * static_cast<double>(std::max<std::size_t>(1, channels_.size()));
    if (!channels_.empty()) {
      m.mean_snr_db = snr_sum / samples;
      m.std_snr_db = std::sqrt(std::max(0.0, snr_sq / samples - m.mean_snr_db * m.mean_snr_db));
      m.mean_capacity_bits = cap_sum / samples;
    }
    if (m.completed > 0) {
      const double c = static_cast<double>(m.completed);
      m.p_sat = static_cast<double>(m.satisfied) / c;
      m.mean_delay_ttis = delay_sum / c;
      m.std_delay_ttis =
          std::sqrt(std::max(0.0, delay_sq / c - m.mean_delay_ttis * m.mean_delay_ttis));
      m.mean_demand_capacity_ratio = (size_sum / c) / std::max(1.0, m.mean_capacity_bits);
    }
    m.prbs_consumed = static_cast<double>(consumed) / static_cast<double>(H);
    const double a = static_cast<double>(m.arrivals);
    ewma_ = ewma_initialised_ ? (1.0 - cfg_.ewma_decay) * ewma_ + cfg_.ewma_decay * a : a;
    ewma_initialised_ = true;
    m.ewma_arrivals = ewma_;
    m.queue_len = queue_.size();
    m.overloaded = queue_.size() > cfg_.overload_limit;
    if (m.overloaded) ++overload_events_;

    history_.push_front(m);
    while (history_.size() > static_cast<std::size_t>(cfg_.history)) history_.pop_back();
    ++slot_index_;
    return {observation(), m};
  }

 private:
  static EnvConfig validated(EnvConfig cfg) {
    cfg.validate();
    return cfg;
  }

  void insert_sorted(const Packet& p) {
    if (queue_.empty() || !edf_before(p, queue_.back())) {
      queue_.push_back(p);
    } else {
      queue_.insert(std::upper_bound(queue_.begin(), queue_.end(), p, edf_before), p);
    }
  }

  EnvConfig cfg_;
  ObservationNorms norms_;
  Rng channel_rng_;
  Rng traffic_rng_;
  std::vector<ChannelState> channels_;
  std::vector<std::int64_t> capacity_;
  std::vector<Packet> queue_;
  std::vector<Packet> pending_;
  TtiObserver observer_;
  std::deque<SlotMetrics> history_;
  std::uint64_t next_packet_id_ = 0;
  std::int64_t slot_index_ = 0;
  int current_prbs_ = 0;
  double ewma_ = 0.0;
  bool ewma_initialised_ = false;
  std::size_t overload_events_ = 0;
};

}  // namespace slicer
