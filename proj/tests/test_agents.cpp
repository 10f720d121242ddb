#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "slicer/agents.hpp"

using namespace slicer;

namespace {

EnvConfig quiet_env() {
  EnvConfig c;
  c.slot_ttis = 10;
  return c;  // no users, so no traffic
}

EnvConfig light_env() {
  EnvConfig c;
  c.slot_ttis = 20;
  UserConfig u;
  u.traffic.arrival_rate_per_slot = 5.0;
  c.users = {u};
  return c;
}

}  // namespace

TEST(ActionCodec, PowersOfTwo) {
  const auto c = ActionCodec::powers_of_two(5, 0, 150);
  EXPECT_EQ(c.deltas, (std::vector<int>{-16, -8, -4, -2, -1, 0, 1, 2, 4, 8, 16}));
  EXPECT_EQ(c.zero_index(), 5u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(apply_action(c, 10, 0), 0);
  EXPECT_EQ(apply_action(c, 145, 10), 150);
  EXPECT_EQ(apply_action(c, 60, 7), 62);
  EXPECT_THROW(apply_action(c, 60, 11), std::out_of_range);
}

TEST(ActionCodec, RejectsBadDeltas) {
  ActionCodec c;
  c.deltas = {-1, 1};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.deltas = {-2, 0, 1};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.deltas = {1, 0, -1};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Pg, DiscountedReturns) {
  const std::vector<double> r{1.0, 0.0, 2.0};
  EXPECT_EQ(discounted_returns(r, 0.5), (std::vector<double>{1.5, 1.0, 2.0}));
}

TEST(Pg, LogitGradientMatchesFiniteDifferences) {
  const std::vector<double> z{0.3, -1.2, 0.8, 0.0};
  const double adv = 1.7, c = 0.2;
  const std::size_t a = 2;
  auto loss = [&](const std::vector<double>& logits) {
    const auto p = softmax(logits);
    const auto lp = log_softmax(logits);
    double h = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) h -= p[k] * lp[k];
    return -(adv * lp[a] + c * h);
  };
  const auto g = pg_logit_gradient(z, a, adv, c);
  for (std::size_t k = 0; k < z.size(); ++k) {
    auto up = z, dn = z;
    up[k] += 1e-6;
    dn[k] -= 1e-6;
    EXPECT_NEAR(g[k], (loss(up) - loss(dn)) / 2e-6, 1e-7) << k;
  }
}

TEST(Pg, LearnsBanditTarget) {
  // Reward depends only on the grant, which the observation exposes.
  SliceEnv env(quiet_env(), 1);
  const RewardFn fn = [](const SlotMetrics& m) { return -std::abs(m.n_prbs - 40) / 10.0; };
  Rng rng = make_stream(1, "agent");
  const auto res = pg_train(env, fn, PgTrainerConfig{}, ActionCodec::powers_of_two(5, 0, 150), 3000, rng);
  const double n = res.log.trailing_mean(300, [](const TrainingLogRow& r) { return r.n_prbs; });
  EXPECT_NEAR(n, 40.0, 8.0);
}

TEST(Pg, Deterministic) {
  auto run = [] {
    SliceEnv env(light_env(), 4);
    Rng rng = make_stream(4, "agent");
    PgTrainerConfig cfg;
    cfg.hidden = {16};
    RewardConfig rc;
    return pg_train(env, make_reward_fn(RewardKind::shaped, rc, env.config().qos), cfg,
                    ActionCodec::powers_of_two(5, 0, 150), 200, rng);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.model.export_params(), b.model.export_params());
  ASSERT_EQ(a.log.rows.size(), 200u);
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    EXPECT_EQ(a.log.rows[i].n_prbs, b.log.rows[i].n_prbs);
    EXPECT_EQ(a.log.rows[i].reward, b.log.rows[i].reward);
  }
}

TEST(Pg, RejectsMismatchedInitialModel) {
  SliceEnv env(quiet_env(), 1);
  Rng rng = make_stream(1, "agent");
  const RewardFn fn = [](const SlotMetrics&) { return 0.0; };
  EXPECT_THROW(pg_train(env, fn, {}, ActionCodec::powers_of_two(2, 0, 150), 1, rng, Mlp({3, {}, 2})),
               std::invalid_argument);
}

TEST(Pg, NonFiniteRewardIsReported) {
  SliceEnv env(quiet_env(), 1);
  Rng rng = make_stream(1, "agent");
  const RewardFn fn = [](const SlotMetrics&) { return std::nan(""); };
  EXPECT_THROW(pg_train(env, fn, {}, ActionCodec::powers_of_two(2, 0, 150), 5, rng), std::runtime_error);
}

TEST(Dqn, EpsilonSchedule) {
  DqnTrainerConfig c;
  EXPECT_DOUBLE_EQ(dqn_epsilon(c, 0), c.eps_start);
  EXPECT_DOUBLE_EQ(dqn_epsilon(c, c.eps_decay_steps / 2), 0.5 * (c.eps_start + c.eps_end));
  EXPECT_DOUBLE_EQ(dqn_epsilon(c, c.eps_decay_steps), c.eps_end);
  EXPECT_DOUBLE_EQ(dqn_epsilon(c, 10 * c.eps_decay_steps), c.eps_end);
}

TEST(Dqn, NoUpdateDuringWarmUp) {
  DqnTrainerConfig c;
  c.batch = 4;
  Rng rng = make_stream(1, "dqn");
  Mlp q = Mlp::initialized({2, {4}, 3}, rng);
  const Mlp target = q;
  AdamState adam(q.params().size(), c.lr);
  ReplayBuffer rb(8);
  for (int i = 0; i < 3; ++i) rb.push({{0.1, 0.2}, 1, 1.0, {0.3, 0.4}});
  const auto before = q.export_params();
  EXPECT_FALSE(dqn_update(q, target, adam, rb, c, rng));
  EXPECT_EQ(q.export_params(), before);
  rb.push({{0.1, 0.2}, 1, 1.0, {0.3, 0.4}});
  EXPECT_TRUE(dqn_update(q, target, adam, rb, c, rng));
  EXPECT_NE(q.export_params(), before);
}

TEST(Dqn, ReplayOverwritesOldest) {
  ReplayBuffer rb(2);
  for (int i = 0; i < 3; ++i) rb.push({{}, static_cast<std::size_t>(i), 0.0, {}});
  EXPECT_EQ(rb.size(), 2u);
  EXPECT_EQ(rb[0].action, 2u);
  EXPECT_EQ(rb[1].action, 1u);
}

TEST(Dqn, TrainsAndLogs) {
  SliceEnv env(light_env(), 2);
  Rng rng = make_stream(2, "agent");
  DqnTrainerConfig cfg;
  cfg.hidden = {16};
  cfg.batch = 8;
  RewardConfig rc;
  const auto res = dqn_train(env, make_reward_fn(RewardKind::shaped, rc, env.config().qos), cfg,
                             ActionCodec::powers_of_two(3, 0, 150), 100, rng);
  EXPECT_EQ(res.log.rows.size(), 100u);
  EXPECT_EQ(res.model.arch().output_dim, 7u);
}

TEST(Heuristic, Boundary) {
  QosSpec q{5, 0.1};
  SlotMetrics m;
  m.p_sat = 0.9;  // exactly at the target counts as met
  EXPECT_EQ(heuristic_policy(m, q, 50, 3, 2, 0, 150), 48);
  m.p_sat = 0.89;
  EXPECT_EQ(heuristic_policy(m, q, 50, 3, 2, 0, 150), 53);
  EXPECT_EQ(heuristic_policy(m, q, 149, 3, 2, 0, 150), 150);
  m.p_sat = 1.0;
  EXPECT_EQ(heuristic_policy(m, q, 1, 3, 2, 0, 150), 0);
  EXPECT_THROW(heuristic_policy(m, q, 1, 0, 2, 0, 150), std::invalid_argument);
}

TEST(Calibration, ZeroTraffic) {
  const auto c = calibrate_fixed_policies(quiet_env(), 20, 1);
  EXPECT_EQ(c.fixed_av, 0);
  ASSERT_TRUE(c.fixed_max.has_value());
  EXPECT_EQ(*c.fixed_max, 0);
}

TEST(Calibration, FixedMaxMeetsEveryDeadline) {
  auto cfg = light_env();
  cfg.users[0].k_factor = 30.0;  // Rayleigh fades would make every grant miss sometimes
  const auto c = calibrate_fixed_policies(cfg, 200, 3);
  ASSERT_TRUE(c.fixed_max.has_value());
  EXPECT_GE(*c.fixed_max, c.fixed_av);
  SliceEnv env(cfg, 3);
  const auto r = evaluate_policy(fixed_controller(*c.fixed_max), env, 200,
                                 [](const SlotMetrics&) { return 0.0; });
  EXPECT_DOUBLE_EQ(r.p_sat, 1.0);
}

TEST(Evaluate, EmptyTrafficCountsAsSatisfied) {
  SliceEnv env(quiet_env(), 1);
  const auto r = evaluate_policy(fixed_controller(500), env, 10, [](const SlotMetrics&) { return 1.0; });
  EXPECT_DOUBLE_EQ(r.p_sat, 1.0);
  EXPECT_DOUBLE_EQ(r.mean_prbs, 150.0);
  EXPECT_DOUBLE_EQ(r.mean_reward, 1.0);
  EXPECT_EQ(r.slots, 10);
}

TEST(Controllers, SamplingNeedsStream) {
  EXPECT_THROW(model_controller(Mlp({7, {}, 3}), ActionCodec::powers_of_two(1, 0, 150), false),
               std::invalid_argument);
}
