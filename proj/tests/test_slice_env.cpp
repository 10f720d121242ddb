#include <algorithm>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "slicer/slice_env.hpp"
#include "slicer/sweep.hpp"

using namespace slicer;

namespace {

EnvConfig env1_like() {
  EnvConfig c;
  c.qos = {5, 0.1};
  auto user = [](double fd, double ls, double rate, SizeClass sc) {
    UserConfig u;
    u.doppler_hz = fd;
    u.large_scale_db = ls;
    u.k_factor = 10.0;
    u.traffic.arrival_rate_per_slot = rate;
    u.traffic.size_class = sc;
    u.traffic.size = default_size_params(sc);
    return u;
  };
  c.users = {user(20, -85, 30, SizeClass::large), user(30, -88, 30, SizeClass::large),
             user(20, -82, 400, SizeClass::small), user(40, -86, 400, SizeClass::small)};
  return c;
}

Packet packet(std::uint64_t id, std::int64_t bits, std::int64_t deadline, int user = 0) {
  Packet p;
  p.id = id;
  p.size_bits = p.remaining_bits = bits;
  p.deadline_tti = deadline;
  p.user_id = user;
  return p;
}

}  // namespace

TEST(Schedule, EmptyQueue) {
  std::vector<Packet> q;
  const std::vector<std::int64_t> cap{360};
  const auto r = schedule_tti(q, 10, cap);
  EXPECT_TRUE(r.allocations.empty());
  EXPECT_EQ(r.prbs_used, 0);
}

TEST(Schedule, CeilingDivision) {
  std::vector<Packet> q{packet(1, 700, 4)};
  const std::vector<std::int64_t> cap{360};
  const auto r = schedule_tti(q, 10, cap);
  ASSERT_EQ(r.allocations.size(), 1u);
  EXPECT_EQ(r.allocations[0].second, 2);
  EXPECT_EQ(q[0].remaining_bits, 0);
}

TEST(Schedule, EarliestDeadlineFirst) {
  std::vector<Packet> q{packet(1, 100, 5), packet(2, 100, 3)};
  const std::vector<std::int64_t> cap{360};
  const auto r = schedule_tti(q, 1, cap);
  ASSERT_EQ(r.allocations.size(), 1u);
  EXPECT_EQ(r.allocations[0].first, 2u);
  EXPECT_EQ(q[0].remaining_bits, 100);
  EXPECT_EQ(q[1].remaining_bits, 0);
}

TEST(Schedule, SkipsZeroCapacityUsers) {
  std::vector<Packet> q{packet(1, 100, 1, 0), packet(2, 100, 2, 1)};
  const std::vector<std::int64_t> cap{0, 360};
  const auto r = schedule_tti(q, 1, cap);
  ASSERT_EQ(r.allocations.size(), 1u);
  EXPECT_EQ(r.allocations[0].first, 2u);
}

TEST(Observation, ZeroHistory) {
  const auto o = make_observation({}, 4, ObservationNorms{});
  EXPECT_EQ(o.features, std::vector<double>(28, 0.0));
}

TEST(Observation, Arithmetic) {
  SlotMetrics m;
  m.p_sat = 0.9;
  m.mean_delay_ttis = 3.0;
  ObservationNorms n;
  n.d_max_ttis = 5.0;
  const std::vector<SlotMetrics> h{m};
  const auto o = make_observation(h, 1, n);
  ASSERT_EQ(o.features.size(), 7u);
  EXPECT_DOUBLE_EQ(o.features[0], 0.9);
  EXPECT_DOUBLE_EQ(o.features[1], 0.6);
}

TEST(Observation, OrderMatters) {
  SlotMetrics a, b;
  a.p_sat = 0.2;
  b.p_sat = 0.8;
  const std::vector<SlotMetrics> ab{a, b}, ba{b, a};
  EXPECT_NE(make_observation(ab, 2, {}).features, make_observation(ba, 2, {}).features);
}

TEST(SliceEnv, UncontendedService) {
  EnvConfig c;
  UserConfig u;
  u.large_scale_db = -70.0;
  u.k_factor = 100.0;
  u.traffic.arrival_rate_per_slot = 2.0;
  u.traffic.size = default_size_params(SizeClass::small);
  c.users = {u};
  SliceEnv env(c, 1);
  for (int s = 0; s < 20; ++s) {
    const auto m = env.step(c.prb_max).metrics;
    if (m.completed > 0) {
      EXPECT_EQ(m.p_sat, 1.0);
      EXPECT_EQ(m.mean_delay_ttis, 1.0);
    }
  }
}

TEST(SliceEnv, StarvationGrowsQueueUntilDropHorizon) {
  EnvConfig c;
  c.slot_ttis = 2;
  UserConfig u;
  u.traffic.arrival_rate_per_slot = 3.0;
  c.users = {u};
  SliceEnv env(c, 2);
  std::size_t prev = 0;
  const int horizon_slots = c.drop_horizon_ttis() / c.slot_ttis;
  for (int s = 0; s < 40; ++s) {
    const auto m = env.step(0).metrics;
    EXPECT_EQ(m.satisfied, 0);
    if (s + 1 < horizon_slots) {
      EXPECT_GE(env.queue_length(), prev);
      EXPECT_EQ(m.dropped, 0);
    }
    prev = env.queue_length();
  }
  EXPECT_GT(env.queue_length(), 0u);
}

TEST(SliceEnv, RejectsOutOfRangeGrant) {
  SliceEnv env(env1_like(), 1);
  EXPECT_THROW(env.step(151), std::out_of_range);
  EXPECT_THROW(env.step(-1), std::out_of_range);
}

// Conservation, delivery soundness, EDF order and work conservation checked
// on every TTI of a live run.
TEST(SliceEnv, PerTtiInvariants) {
  SliceEnv env(env1_like(), 9);
  std::map<std::uint64_t, std::int64_t> served;  // packet id -> capacity given
  int grant = 0;
  std::int64_t ttis = 0;
  env.set_tti_observer([&](std::int64_t, std::span<const Packet> q, const ScheduleResult& s,
                           std::span<const std::int64_t> cap) {
    ++ttis;
    int used = 0;
    std::map<std::uint64_t, int> given;
    for (const auto& [id, n] : s.allocations) {
      used += n;
      given[id] = n;
    }
    ASSERT_LE(used, grant);
    ASSERT_EQ(used, s.prbs_used);
    const Packet* last_served = nullptr;
    bool skipped_servable = false;
    for (const auto& p : q) {
      const auto it = given.find(p.id);
      if (it != given.end()) {
        served[p.id] += cap[static_cast<std::size_t>(p.user_id)] * it->second;
        if (last_served) ASSERT_TRUE(edf_before(*last_served, p));
        last_served = &p;
      } else if (p.remaining_bits > 0 && cap[static_cast<std::size_t>(p.user_id)] > 0) {
        // An unserved servable packet must rank after every served one, and
        // then the grant must be exhausted.
        skipped_servable = true;
      }
      ASSERT_EQ(p.remaining_bits == 0, served[p.id] >= p.size_bits) << p.id;
    }
    if (skipped_servable) ASSERT_EQ(used, grant);
  });
  const int grants[] = {0, 20, 60, 90, 150, 40, 110};
  for (int s = 0; s < 35; ++s) {
    grant = grants[s % 7];
    env.step(grant);
  }
  EXPECT_EQ(ttis, 35 * 200);
}

TEST(SliceEnv, EdfOrderAmongServed) {
  SliceEnv env(env1_like(), 4);
  env.set_tti_observer([&](std::int64_t, std::span<const Packet> q, const ScheduleResult& s,
                           std::span<const std::int64_t> cap) {
    std::map<std::uint64_t, bool> got;
    for (const auto& a : s.allocations) got[a.first] = true;
    for (const auto& a : q)
      if (got.count(a.id))
        for (const auto& b : q)
          if (!got.count(b.id) && b.remaining_bits > 0 && cap[static_cast<std::size_t>(b.user_id)] > 0)
            ASSERT_TRUE(edf_before(a, b));
  });
  for (int s = 0; s < 10; ++s) env.step(70);
}

TEST(SliceEnv, Determinism) {
  auto run = [](std::uint64_t seed) {
    SliceEnv env(env1_like(), seed);
    std::vector<double> trace;
    for (int s = 0; s < 30; ++s) {
      const auto m = env.step((s * 37) % 151).metrics;
      trace.insert(trace.end(), {static_cast<double>(m.arrivals), static_cast<double>(m.satisfied),
                                 m.mean_delay_ttis, m.std_delay_ttis, m.mean_snr_db, m.prbs_consumed,
                                 m.ewma_arrivals});
    }
    return trace;
  };
  EXPECT_EQ(run(5), run(5));
  EXPECT_NE(run(5), run(6));
}

TEST(SliceEnv, SatisfactionMonotoneInGrant) {
  SweepConfig sc;
  sc.slots_per_point = 50;  // 10^4 TTIs per point
  const auto pts = prb_sweep(env1_like(), RewardConfig{}, sc, 3);
  std::vector<double> n, p;
  for (const auto& x : pts) {
    n.push_back(x.n_prbs);
    p.push_back(x.p_sat);
  }
  EXPECT_EQ(pts.front().n_prbs, 0);
  EXPECT_EQ(pts.back().n_prbs, 150);
  EXPECT_GT(spearman(n, p), 0.99);
}

TEST(SliceEnv, HistoryAndObservationLength) {
  auto c = env1_like();
  c.history = 3;
  SliceEnv env(c, 1);
  EXPECT_EQ(env.observation().features.size(), 21u);
  for (int s = 0; s < 5; ++s) env.step(80);
  EXPECT_EQ(env.history().size(), 3u);
  EXPECT_EQ(env.history().front().slot_index, 4);
}

TEST(EnvConfig, Validation) {
  EnvConfig c;
  c.qos.epsilon = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.initial_prbs = 200;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
