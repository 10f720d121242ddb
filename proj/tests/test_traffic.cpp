#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "slicer/traffic.hpp"

using namespace slicer;

TEST(Traffic, ZeroRateIsEmpty) {
  UserTrafficProfile p;
  Rng rng(1);
  std::uint64_t id = 0;
  EXPECT_TRUE(sample_arrivals(p, LoadPattern{}, 0, 0, 200, rng, id).empty());
}

TEST(Traffic, PoissonMean) {
  UserTrafficProfile p;
  p.arrival_rate_per_slot = 20.0;
  Rng rng(2);
  std::uint64_t id = 0;
  const int n = 10'000;
  double sum = 0.0;
  for (int s = 0; s < n; ++s) sum += static_cast<double>(sample_arrivals(p, {}, s, s * 10, s * 10 + 10, rng, id).size());
  const double mean = sum / n;
  EXPECT_NEAR(mean, 20.0, 3.0 * std::sqrt(20.0) / std::sqrt(n));
}

TEST(Traffic, ArrivalsInsideSlotAndOrdered) {
  UserTrafficProfile p;
  p.arrival_rate_per_slot = 50.0;
  Rng rng(3);
  std::uint64_t id = 100;
  const auto pk = sample_arrivals(p, {}, 3, 600, 800, rng, id, 2);
  ASSERT_FALSE(pk.empty());
  for (std::size_t i = 0; i < pk.size(); ++i) {
    EXPECT_GE(pk[i].arrival_tti, 600);
    EXPECT_LT(pk[i].arrival_tti, 800);
    EXPECT_EQ(pk[i].user_id, 2);
    EXPECT_EQ(pk[i].remaining_bits, pk[i].size_bits);
    if (i) {
      EXPECT_LE(pk[i - 1].arrival_tti, pk[i].arrival_tti);
      EXPECT_EQ(pk[i].id, pk[i - 1].id + 1);
    }
  }
  EXPECT_EQ(id, 100 + pk.size());
}

TEST(Traffic, PatternMultiplier) {
  LoadPattern c;
  EXPECT_EQ(pattern_multiplier(c, 37), 1.0);
  LoadPattern r;
  r.kind = LoadPattern::Kind::ramp_up_down;
  r.peak_multiplier = 2.0;
  r.period_slots = 100;
  EXPECT_DOUBLE_EQ(pattern_multiplier(r, 0), 1.0);
  EXPECT_DOUBLE_EQ(pattern_multiplier(r, 25), 1.5);
  EXPECT_DOUBLE_EQ(pattern_multiplier(r, 50), 2.0);
  EXPECT_DOUBLE_EQ(pattern_multiplier(r, 75), 1.5);
  EXPECT_DOUBLE_EQ(pattern_multiplier(r, 150), 2.0);
}

TEST(Traffic, MeanSizePerClass) {
  for (auto c : {SizeClass::small, SizeClass::medium, SizeClass::large}) {
    UserTrafficProfile p;
    p.arrival_rate_per_slot = 1000.0;
    p.size_class = c;
    p.size = default_size_params(c);
    Rng rng(4);
    std::uint64_t id = 0;
    double sum = 0.0;
    std::size_t n = 0;
    while (n < 100'000) {
      for (const auto& k : sample_arrivals(p, {}, 0, 0, 200, rng, id)) {
        sum += static_cast<double>(k.size_bits);
        ++n;
      }
    }
    EXPECT_NEAR(sum / static_cast<double>(n) / p.size.mean_bits(), 1.0, 0.05) << to_string(c);
  }
}

TEST(Traffic, CountsIndependentAcrossSlots) {
  UserTrafficProfile p;
  p.arrival_rate_per_slot = 30.0;
  Rng rng(5);
  std::uint64_t id = 0;
  std::vector<double> x;
  for (int s = 0; s < 20'000; ++s) x.push_back(static_cast<double>(sample_arrivals(p, {}, s, 0, 200, rng, id).size()));
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i + 1 < x.size()) num += (x[i] - m) * (x[i + 1] - m);
  }
  EXPECT_LT(std::abs(num / den), 0.05);
}

TEST(Traffic, SizeClassNames) {
  EXPECT_EQ(size_class_from_string("large"), SizeClass::large);
  EXPECT_THROW(size_class_from_string("huge"), std::invalid_argument);
}
