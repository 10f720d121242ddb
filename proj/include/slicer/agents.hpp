#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slicer/nn.hpp"
#include "slicer/reward.hpp"
#include "slicer/rng.hpp"
#include "slicer/slice_env.hpp"

namespace slicer {

/// Differential action set: each action adds one of `deltas` to the current
/// PRB count, clamped to [prb_min, prb_max].
struct ActionCodec {
  std::vector<int> deltas;
  int prb_min = 0;
  int prb_max = 150;

  /// {0, +-1, +-2, ..., +-2^(J-1)}: 2J+1 actions.
  static ActionCodec powers_of_two(int j, int prb_min, int prb_max) {
    if (j < 0) throw std::invalid_argument("ActionCodec: J must be >= 0");
    ActionCodec c;
    c.prb_min = prb_min;
    c.prb_max = prb_max;
    for (int i = j - 1; i >= 0; --i) c.deltas.push_back(-(1 << i));
    c.deltas.push_back(0);
    for (int i = 0; i < j; ++i) c.deltas.push_back(1 << i);
    return c;
  }

  std::size_t size() const { return deltas.size(); }

  std::size_t zero_index() const {
    return static_cast<std::size_t>(std::find(deltas.begin(), deltas.end(), 0) - deltas.begin());
  }

  void validate() const {
    if (deltas.empty()) throw std::invalid_argument("agent.action_deltas must be non-empty");
    if (!std::is_sorted(deltas.begin(), deltas.end()) ||
        std::adjacent_find(deltas.begin(), deltas.end()) != deltas.end())
      throw std::invalid_argument("agent.action_deltas must be strictly ascending");
    if (zero_index() == deltas.size())
      throw std::invalid_argument("agent.action_deltas must contain 0");
    for (std::size_t i = 0; i < deltas.size(); ++i)
      if (deltas[i] != -deltas[deltas.size() - 1 - i])
        throw std::invalid_argument("agent.action_deltas must be symmetric around 0");
    if (prb_min < 0 || prb_max < prb_min)
      throw std::invalid_argument("ActionCodec: bad PRB bounds");
  }

  bool operator==(const ActionCodec&) const = default;
};

inline int apply_action(const ActionCodec& codec, int current_prbs, std::size_t action_index) {
  if (action_index >= codec.deltas.size())
    throw std::out_of_range("apply_action: action index " + std::to_string(action_index) +
                            " out of range");
  return std::clamp(current_prbs + codec.deltas[action_index], codec.prb_min, codec.prb_max);
}

using RewardFn = std::function<double(const SlotMetrics&)>;

/// Reward callback for `kind` bound to an environment's QoS.
inline RewardFn make_reward_fn(RewardKind kind, const RewardConfig& cfg, const QosSpec& qos) {
  return [kind, cfg, qos](const SlotMetrics& m) { return evaluate_reward(kind, cfg, qos, m); };
}

struct TrainingLogRow {
  std::int64_t slot = 0;
  int n_prbs = 0;
  std::int64_t arrivals = 0;
  std::int64_t completed = 0;
  std::int64_t satisfied = 0;
  double p_sat = 0.0;
  double mean_delay_ttis = 0.0;
  double std_delay_ttis = 0.0;
  double mean_snr_db = 0.0;
  double reward = 0.0;
};

struct TrainingLog {
  std::vector<TrainingLogRow> rows;

  void append(const SlotMetrics& m, double reward) {
    rows.push_back({m.slot_index, m.n_prbs, m.arrivals, m.completed, m.satisfied, m.p_sat,
                    m.mean_delay_ttis, m.std_delay_ttis, m.mean_snr_db, reward});
  }

  /// Mean of `field` over the last `window` rows.
  template <typename F>
  double trailing_mean(std::size_t window, F field) const {
    if (rows.empty()) return 0.0;
    const std::size_t n = std::min(window, rows.size());
    double s = 0.0;
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i) s += field(rows[i]);
    return s / static_cast<double>(n);
  }
};

struct TrainResult {
  PolicyModel model;
  TrainingLog log;
};

inline MlpArchitecture policy_architecture(const EnvConfig& env, const ActionCodec& codec,
                                           std::vector<std::size_t> hidden = {128, 64}) {
  MlpArchitecture a;
  a.input_dim = static_cast<std::size_t>(env.history) * kFeaturesPerSlot;
  a.hidden = std::move(hidden);
  a.output_dim = codec.size();
  return a;
}

namespace detail {

inline double checked_reward(const RewardFn& fn, const SlotMetrics& m) {
  const double r = fn(m);
  if (!std::isfinite(r))
    throw std::runtime_error("reward function returned a non-finite value at slot " +
                             std::to_string(m.slot_index));
  return r;
}

}  // namespace detail

/// REINFORCE settings. The continuing task is cut into segments of
/// `episode_len_slots`; each segment yields one or more Adam steps.
struct PgTrainerConfig {
  int episode_len_slots = 10;
  double discount = 0.5;
  double baseline_decay = 0.95;
  double entropy_coeff = 0.1;
  double lr = 3e-3;
  bool use_baseline = true;
  bool normalize_advantages = true;
  int minibatches = 1;  // Adam steps per segment
  std::vector<std::size_t> hidden{128, 64};

  void validate() const {
    if (episode_len_slots < 1) throw std::invalid_argument("agent.episode_len_slots must be >= 1");
    if (!(discount >= 0.0 && discount < 1.0))
      throw std::invalid_argument("agent.discount must lie in [0, 1)");
    if (!(baseline_decay >= 0.0 && baseline_decay < 1.0))
      throw std::invalid_argument("agent.baseline_decay must lie in [0, 1)");
    if (!(entropy_coeff >= 0.0)) throw std::invalid_argument("agent.entropy_coeff must be >= 0");
    if (!(lr > 0.0)) throw std::invalid_argument("agent.lr must be > 0");
    if (minibatches < 1) throw std::invalid_argument("agent.minibatches must be >= 1");
  }

  bool operator==(const PgTrainerConfig&) const = default;
};

/// Discounted returns of a finite reward sequence.
inline std::vector<double> discounted_returns(std::span<const double> rewards, double discount) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + discount * acc;
    g[i] = acc;
  }
  return g;
}

/// Policy-gradient loss gradient for one sample w.r.t. the logits:
/// d/dz of -(A * log pi(a) + c * H(pi)).
inline std::vector<double> pg_logit_gradient(std::span<const double> logits, std::size_t action,
                                             double advantage, double entropy_coeff) {
  const auto p = softmax(logits);
  const auto lp = log_softmax(logits);
  double h = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) h -= p[k] * lp[k];
  std::vector<double> g(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double onehot = k == action ? 1.0 : 0.0;
    g[k] = -advantage * (onehot - p[k]) + entropy_coeff * p[k] * (lp[k] + h);
  }
  return g;
}

/// REINFORCE with a moving-average baseline and entropy bonus. Actions are
/// sampled from the softmax policy; every slot is logged.
inline TrainResult pg_train(SliceEnv& env, const RewardFn& reward_fn, const PgTrainerConfig& cfg,
                            const ActionCodec& codec, std::int64_t steps, Rng& rng,
                            std::optional<PolicyModel> init = std::nullopt) {
  cfg.validate();
  codec.validate();
  const auto arch = policy_architecture(env.config(), codec, cfg.hidden);
  PolicyModel model = init ? std::move(*init) : PolicyModel::initialized(arch, rng);
  if (!(model.arch() == arch))
    throw std::invalid_argument("pg_train: initial model does not match the environment");
  AdamState adam(model.params().size(), cfg.lr);
  TrainResult out;
  out.log.rows.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, steps)));

  struct Sample {
    std::vector<double> obs;
    std::size_t action;
  };
  std::vector<Sample> batch;
  std::vector<double> rewards;
  double baseline = 0.0;
  bool baseline_ready = false;
  Observation obs = env.observation();
  int n = env.current_prbs();

  auto update = [&]() {
    if (batch.empty()) return;
    const auto g = discounted_returns(rewards, cfg.discount);
    // The baseline is a per-slot moving average of returns, so it follows the
    // slowly drifting operating point.
    std::vector<double> adv(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!cfg.use_baseline) {
        adv[i] = g[i];
        continue;
      }
      if (!baseline_ready) {
        baseline = g[i];
        baseline_ready = true;
      }
      adv[i] = g[i] - baseline;
      baseline = cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * g[i];
    }
    if (cfg.normalize_advantages && adv.size() > 1) {
      double m = 0.0, v = 0.0;
      for (double a : adv) m += a;
      m /= static_cast<double>(adv.size());
      for (double a : adv) v += (a - m) * (a - m);
      const double sd = std::sqrt(v / static_cast<double>(adv.size()));
      for (double& a : adv) a = (a - m) / (sd + 1e-8);
    }
    // Contiguous minibatches; the last one takes the remainder.
    const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatches), batch.size());
    const std::size_t per = batch.size() / nb;
    std::vector<double> grad(model.params().size());
    PolicyModel::Tape tape;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lo = b * per;
      const std::size_t hi = b + 1 == nb ? batch.size() : lo + per;
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto logits = model.forward(batch[i].obs, tape);
        auto up = pg_logit_gradient(logits, batch[i].action, adv[i], cfg.entropy_coeff);
        const double scale = 1.0 / static_cast<double>(hi - lo);
        for (double& u : up) u *= scale;
        model.accumulate_gradient(tape, up, grad);
      }
      adam_step(adam, model.params(), grad);
    }
    batch.clear();
    rewards.clear();
  };

  for (std::int64_t t = 0; t < steps; ++t) {
    const auto logits = model.forward(obs.features);
    const auto a = softmax_sample(logits, rng);
    n = apply_action(codec, n, a.index);
    auto res = env.step(n);
    const double r = detail::checked_reward(reward_fn, res.metrics);
    out.log.append(res.metrics, r);
    batch.push_back({std::move(obs.features), a.index});
    rewards.push_back(r);
    obs = std::move(res.observation);
    if (static_cast<int>(batch.size()) == cfg.episode_len_slots) update();
  }
  update();
  out.model = std::move(model);
  return out;
}

struct DqnTrainerConfig {
  double lr = 1e-4;
  double discount = 0.9;
  int batch = 64;
  int replay_capacity = 10000;
  double eps_start = 0.5;
  double eps_end = 0.05;
  int eps_decay_steps = 2000;
  int target_sync_interval = 100;
  int updates_per_step = 1;
  std::vector<std::size_t> hidden{128, 64};

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("agent.lr must be > 0");
    if (!(discount >= 0.0 && discount < 1.0))
      throw std::invalid_argument("agent.discount must lie in [0, 1)");
    if (batch < 1) throw std::invalid_argument("agent.batch must be >= 1");
    if (replay_capacity < batch)
      throw std::invalid_argument("agent.replay_capacity must be >= agent.batch");
    if (!(0.0 <= eps_end && eps_end <= eps_start && eps_start <= 1.0))
      throw std::invalid_argument("agent epsilon schedule needs 0 <= eps_end <= eps_start <= 1");
    if (eps_decay_steps < 1) throw std::invalid_argument("agent.eps_decay_steps must be >= 1");
    if (target_sync_interval < 1)
      throw std::invalid_argument("agent.target_sync_interval must be >= 1");
    if (updates_per_step < 1) throw std::invalid_argument("agent.updates_per_step must be >= 1");
  }

  bool operator==(const DqnTrainerConfig&) const = default;
};

/// Linear decay from eps_start at step 0 to eps_end at eps_decay_steps.
inline double dqn_epsilon(const DqnTrainerConfig& cfg, std::int64_t step) {
  if (step >= cfg.eps_decay_steps) return cfg.eps_end;
  const double f = static_cast<double>(step) / static_cast<double>(cfg.eps_decay_steps);
  return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * f;
}

struct Transition {
  std::vector<double> obs;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_obs;
};

/// Fixed-capacity uniform replay; overwrites the oldest entry when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    data_.reserve(capacity);
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const {
    std::uniform_int_distribution<std::size_t> u(0, data_.size() - 1);
    std::vector<std::size_t> idx(k);
    for (auto& i : idx) i = u(rng);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

/// One gradient step on a replay minibatch. Returns false during warm-up.
inline bool dqn_update(PolicyModel& q, const PolicyModel& target, AdamState& adam,
                       const ReplayBuffer& replay, const DqnTrainerConfig& cfg, Rng& rng) {
  if (replay.size() < static_cast<std::size_t>(cfg.batch)) return false;
  const auto idx = replay.sample_indices(static_cast<std::size_t>(cfg.batch), rng);
  std::vector<double> grad(q.params().size(), 0.0);
  std::vector<double> up(q.arch().output_dim);
  PolicyModel::Tape tape;
  for (auto i : idx) {
    const auto& tr = replay[i];
    const auto next = target.forward(tr.next_obs);
    const double y = tr.reward + cfg.discount * *std::max_element(next.begin(), next.end());
    const auto qv = q.forward(tr.obs, tape);
    std::fill(up.begin(), up.end(), 0.0);
    // Squared TD error, averaged over the batch.
    up[tr.action] = (qv[tr.action] - y) / static_cast<double>(cfg.batch);
    q.accumulate_gradient(tape, up, grad);
  }
  adam_step(adam, q.params(), grad);
  return true;
}

inline TrainResult dqn_train(SliceEnv& env, const RewardFn& reward_fn, const DqnTrainerConfig& cfg,
                             const ActionCodec& codec, std::int64_t steps, Rng& rng) {
  cfg.validate();
  codec.validate();
  const auto arch = policy_architecture(env.config(), codec, cfg.hidden);
  PolicyModel q = PolicyModel::initialized(arch, rng);
  PolicyModel target = q;
  AdamState adam(q.params().size(), cfg.lr);
  ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity));
  TrainResult out;
  Observation obs = env.observation();
  int n = env.current_prbs();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any(0, codec.size() - 1);
  for (std::int64_t t = 0; t < steps; ++t) {
    std::size_t action;
    if (coin(rng) < dqn_epsilon(cfg, t)) {
      action = any(rng);
    } else {
      const auto qv = q.forward(obs.features);
      action = argmax(qv);
    }
    n = apply_action(codec, n, action);
    auto res = env.step(n);
    const double r = detail::checked_reward(reward_fn, res.metrics);
    out.log.append(res.metrics, r);
    replay.push({obs.features, action, r, res.observation.features});
    obs = std::move(res.observation);
    for (int u = 0; u < cfg.updates_per_step; ++u) dqn_update(q, target, adam, replay, cfg, rng);
    if ((t + 1) % cfg.target_sync_interval == 0) target = q;
  }
  out.model = std::move(q);
  return out;
}

/// Raise the grant when the satisfaction constraint was missed, lower it otherwise.
inline int heuristic_policy(const SlotMetrics& slot, const QosSpec& qos, int current_prbs,
                            int step_up, int step_down, int prb_min, int prb_max) {
  if (step_up < 1 || step_down < 1)
    throw std::invalid_argument("heuristic_policy: steps must be >= 1");
  const int next = slot.p_sat < 1.0 - qos.epsilon ? current_prbs + step_up : current_prbs - step_down;
  return std::clamp(next, prb_min, prb_max);
}

/// A policy picks the next slot's PRB count from the environment state.
using Controller = std::function<int(const SliceEnv&)>;

inline Controller fixed_controller(int n_prbs) {
  return [n_prbs](const SliceEnv& env) { return env.clamp_prbs(n_prbs); };
}

inline Controller heuristic_controller(int step_up, int step_down) {
  return [step_up, step_down](const SliceEnv& env) {
    if (env.history().empty()) return env.current_prbs();
    const auto& c = env.config();
    return heuristic_policy(env.history().front(), c.qos, env.current_prbs(), step_up, step_down,
                            c.prb_min, c.prb_max);
  };
}

/// Network policy. Greedy takes the argmax; otherwise samples from the
/// softmax using `rng`, which must outlive the controller.
inline Controller model_controller(PolicyModel model, ActionCodec codec, bool greedy,
                                   Rng* rng = nullptr) {
  if (!greedy && rng == nullptr)
    throw std::invalid_argument("model_controller: sampling needs a random stream");
  return [model = std::move(model), codec = std::move(codec), greedy, rng](const SliceEnv& env) {
    const auto logits = model.forward(env.observation().features);
    const std::size_t a = greedy ? argmax(logits) : softmax_sample(logits, *rng).index;
    return apply_action(codec, env.current_prbs(), a);
  };
}

struct EvalReport {
  double mean_prbs = 0.0;
  double p_sat = 0.0;  // satisfied / completed over the whole run
  double mean_delay_ttis = 0.0;  // per packet
  double std_delay_ttis = 0.0;
  double mean_reward = 0.0;
  std::int64_t slots = 0;
};

/// Runs `controller` for `slots` slots and aggregates packet- and slot-level metrics.
inline EvalReport evaluate_policy(const Controller& controller, SliceEnv& env, std::int64_t slots,
                                  const RewardFn& reward_fn, TrainingLog* log = nullptr) {
  EvalReport r;
  std::int64_t sat = 0, comp = 0;
  double prbs = 0.0, reward = 0.0, dsum = 0.0, dsq = 0.0;
  for (std::int64_t t = 0; t < slots; ++t) {
    const int n = controller(env);
    const auto res = env.step(n);
    const auto& m = res.metrics;
    const double rw = detail::checked_reward(reward_fn, m);
    if (log) log->append(m, rw);
    prbs += n;
    reward += rw;
    sat += m.satisfied;
    comp += m.completed;
    // Recover per-packet sums from the slot's mean and spread.
    const double c = static_cast<double>(m.completed);
    dsum += m.mean_delay_ttis * c;
    dsq += (m.std_delay_ttis * m.std_delay_ttis + m.mean_delay_ttis * m.mean_delay_ttis) * c;
  }
  r.slots = slots;
  if (slots > 0) {
    r.mean_prbs = prbs / static_cast<double>(slots);
    r.mean_reward = reward / static_cast<double>(slots);
  }
  if (comp > 0) {
    const double c = static_cast<double>(comp);
    r.p_sat = static_cast<double>(sat) / c;
    r.mean_delay_ttis = dsum / c;
    r.std_delay_ttis = std::sqrt(std::max(0.0, dsq / c - r.mean_delay_ttis * r.mean_delay_ttis));
  } else {
    r.p_sat = 1.0;  // nothing was late
  }
  return r;
}

struct FixedPolicyCalibration {
  int fixed_av = 0;
  std::optional<int> fixed_max;  // empty when no PRB count reaches p_sat = 1
};

namespace detail {

/// Satisfied/completed over `slots` slots at a constant grant.
inline std::pair<std::int64_t, std::int64_t> sat_counts(const EnvConfig& cfg, std::uint64_t seed,
                                                        int n, std::int64_t slots) {
  SliceEnv env(cfg, seed);
  std::int64_t sat = 0, comp = 0;
  for (std::int64_t t = 0; t < slots; ++t) {
    const auto m = env.step(n).metrics;
    sat += m.satisfied;
    comp += m.completed;
  }
  return {sat, comp};
}

}  // namespace detail

/// Fixed-Av: mean PRBs the scheduler consumes when granted prb_max, rounded
/// up. Fixed-Max: smallest grant with every packet on time at the peak load
/// multiplier, found by binary search.
inline FixedPolicyCalibration calibrate_fixed_policies(const EnvConfig& cfg, std::int64_t horizon_slots,
                                                       std::uint64_t seed) {
  if (horizon_slots < 1) throw std::invalid_argument("calibrate_fixed_policies: empty horizon");
  FixedPolicyCalibration out;
  {
    SliceEnv env(cfg, seed);
    double consumed = 0.0;
    for (std::int64_t t = 0; t < horizon_slots; ++t) consumed += env.step(cfg.prb_max).metrics.prbs_consumed;
    out.fixed_av = std::clamp(
        static_cast<int>(std::ceil(consumed / static_cast<double>(horizon_slots) - 1e-9)),
        cfg.prb_min, cfg.prb_max);
  }
  EnvConfig peak = cfg;
  if (cfg.load.kind != LoadPattern::Kind::constant) {
    for (auto& u : peak.users) u.traffic.arrival_rate_per_slot *= cfg.load.peak_multiplier;
    peak.load = LoadPattern{};
  }
  auto all_on_time = [&](int n) {
    const auto [sat, comp] = detail::sat_counts(peak, seed, n, horizon_slots);
    return sat == comp;
  };
  if (!all_on_time(cfg.prb_max)) return out;
  int lo = cfg.prb_min, hi = cfg.prb_max;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (all_on_time(mid)) hi = mid; else lo = mid + 1;
  }
  out.fixed_max = std::max(lo, out.fixed_av);
  return out;
}

}  // namespace slicer
