#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "slicer/agents.hpp"
#include "slicer/nn.hpp"
#include "slicer/reward.hpp"
#include "slicer/rng.hpp"
#include "slicer/slice_env.hpp"

namespace slicer {

using Matrix = std::vector<std::vector<double>>;

/// Environment descriptor [D_max, eps, users, capacity per PRB, packets per slot].
struct EnvFeatureVector {
  double d_max = 0.0;
  double epsilon = 0.0;
  double k_tilde = 0.0;
  double c_tilde = 0.0;
  double t_tilde = 0.0;

  static constexpr std::size_t kSize = 5;
  std::array<double, kSize> values() const { return {d_max, epsilon, k_tilde, c_tilde, t_tilde}; }
};

/// Which exponent sign the distance kernels use. `printed` weights distant
/// agents more; kept for ablation only.
enum class KernelSign { similarity, printed };

inline std::string_view to_string(KernelSign s) {
  return s == KernelSign::similarity ? "similarity" : "printed";
}

inline KernelSign kernel_sign_from_string(std::string_view s) {
  if (s == "similarity") return KernelSign::similarity;
  if (s == "printed") return KernelSign::printed;
  throw std::invalid_argument("unknown kernel sign '" + std::string(s) + "'");
}

inline bool is_row_stochastic(const Matrix& a, double tol = 1e-9) {
  for (const auto& row : a) {
    double s = 0.0;
    for (double x : row) {
      if (!(x >= 0.0)) return false;
      s += x;
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

namespace detail {

/// Row-wise softmax of `logits` (max-subtracted).
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out;
  out.reserve(logits.size());
  for (const auto& row : logits) out.push_back(softmax(row));
  return out;
}

inline void normalize_rows(Matrix& m) {
  for (auto& row : m) {
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (s > 0.0) {
      for (double& x : row) x /= s;
    } else {
      for (double& x : row) x = 1.0 / static_cast<double>(row.size());
    }
  }
}

}  // namespace detail

inline Matrix alpha_fedavg(std::size_t n) {
  if (n < 1) throw std::invalid_argument("alpha_fedavg: n must be >= 1");
  return Matrix(n, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

/// Per-feature temperatures: the variance of each feature across agents,
/// with 1 substituted where a feature does not vary.
inline std::array<double, EnvFeatureVector::kSize> sigma_from_features(
    const std::vector<EnvFeatureVector>& features) {
  std::array<double, EnvFeatureVector::kSize> sigma{};
  sigma.fill(1.0);
  if (features.empty()) return sigma;
  const double n = static_cast<double>(features.size());
  for (std::size_t m = 0; m < EnvFeatureVector::kSize; ++m) {
    double mean = 0.0, sq = 0.0;
    for (const auto& f : features) mean += f.values()[m];
    mean /= n;
    for (const auto& f : features) sq += (f.values()[m] - mean) * (f.values()[m] - mean);
    const double var = sq / n;
    sigma[m] = var > 0.0 ? var : 1.0;
  }
  return sigma;
}

/// alpha_ij proportional to exp(-sum_m (f_i^m - f_j^m)^2 / sigma_m).
inline Matrix alpha_feature(const std::vector<EnvFeatureVector>& features,
                            const std::array<double, EnvFeatureVector::kSize>& sigma,
                            KernelSign sign = KernelSign::similarity) {
  if (features.empty()) throw std::invalid_argument("alpha_feature: no agents");
  for (double s : sigma)
    if (!(s > 0.0)) throw std::invalid_argument("alpha_feature: sigma must be > 0");
  const std::size_t n = features.size();
  const double dir = sign == KernelSign::similarity ? -1.0 : 1.0;
  Matrix logits(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto fi = features[i].values();
    for (std::size_t j = 0; j < n; ++j) {
      const auto fj = features[j].values();
      double d = 0.0;
      for (std::size_t m = 0; m < EnvFeatureVector::kSize; ++m)
        d += (fi[m] - fj[m]) * (fi[m] - fj[m]) / sigma[m];
      logits[i][j] = dir * d;
    }
  }
  return detail::softmax_rows(logits);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

namespace detail {

inline void check_same_arch(const std::vector<PolicyModel>& models) {
  if (models.empty()) throw std::invalid_argument("no models given");
  for (const auto& m : models)
    if (!(m.arch() == models.front().arch()))
      throw std::invalid_argument("models have different architectures");
}

inline double median_offdiag(const Matrix& d2) {
  std::vector<double> v;
  for (std::size_t i = 0; i < d2.size(); ++i)
    for (std::size_t j = i + 1; j < d2.size(); ++j) v.push_back(d2[i][j]);
  if (v.empty()) return 1.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

}  // namespace detail

/// Similarity of flattened weights: alpha_ij proportional to
/// exp(-||W_i - W_j||^2 / tau), tau defaulting to the median pairwise
/// squared distance. The printed variant normalises raw L2 distances.
inline Matrix alpha_model_weight(const std::vector<PolicyModel>& models,
                                 std::optional<double> tau = std::nullopt,
                                 KernelSign sign = KernelSign::similarity) {
  detail::check_same_arch(models);
  const std::size_t n = models.size();
  Matrix d2(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d2[i][j] = d2[j][i] = squared_distance(models[i].params(), models[j].params());
  if (sign == KernelSign::printed) {
    Matrix a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a[i][j] = std::sqrt(d2[i][j]);
    detail::normalize_rows(a);
    return a;
  }
  const double t = tau.value_or(detail::median_offdiag(d2));
  if (!(t > 0.0)) throw std::invalid_argument("alpha_model_weight: tau must be > 0");
  Matrix logits(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) logits[i][j] = -d2[i][j] / t;
  return detail::softmax_rows(logits);
}

/// r_hat[i][j]: mean reward of model j evaluated in environment i.
struct RewardTable {
  Matrix r_hat;
  int t_episodes = 10;
};

/// Row-wise softmax of beta * r_hat.
inline Matrix alpha_reward(const RewardTable& table, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("alpha_reward: beta must be >= 0");
  Matrix logits = table.r_hat;
  for (auto& row : logits)
    for (double& x : row) x *= beta;
  return detail::softmax_rows(logits);
}

/// Convex combination sum_j alpha_j W_j of flat parameter vectors.
inline PolicyModel blend_models(const std::vector<PolicyModel>& models,
                                std::span<const double> alpha_row) {
  detail::check_same_arch(models);
  if (alpha_row.size() != models.size())
    throw std::invalid_argument("blend_models: row length differs from model count");
  double s = 0.0;
  for (double a : alpha_row) {
    if (!(a >= 0.0)) throw std::invalid_argument("blend_models: negative coefficient");
    s += a;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("blend_models: row does not sum to 1");
  PolicyModel out(models.front().arch());
  auto p = out.params();
  for (std::size_t j = 0; j < models.size(); ++j) {
    if (alpha_row[j] == 0.0) continue;
    const auto w = models[j].params();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] += alpha_row[j] * w[k];
  }
  // An exact one-hot row reproduces the source bit for bit.
  for (std::size_t j = 0; j < models.size(); ++j)
    if (alpha_row[j] == 1.0) out.import_params(models[j].params());
  return out;
}

/// One environment of a multi-agent study together with its reward.
struct StudyEnv {
  EnvConfig env;
  RewardConfig reward;
};

namespace detail {

/// Runs fn(k) for k in [0, count) on up to `threads` workers.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < count; k += threads) fn(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Mean per-slot shaped reward of a greedy model over `episodes` fresh
/// episodes. Episode e of environment `env_index` uses the same seed for
/// every model, so models are compared on common random numbers.
inline double evaluate_model_reward(const PolicyModel& model, const StudyEnv& se,
                                    const ActionCodec& codec, int episodes,
                                    std::int64_t episode_slots, std::uint64_t seed,
                                    std::string_view label, std::size_t env_index) {
  const auto reward_fn = make_reward_fn(RewardKind::shaped, se.reward, se.env.qos);
  const auto ctl = model_controller(model, codec, true);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    SliceEnv env(se.env, stream_seed(seed, label, env_index * 1000003u + static_cast<std::uint64_t>(e)));
    total += evaluate_policy(ctl, env, episode_slots, reward_fn).mean_reward;
  }
  return total / static_cast<double>(std::max(1, episodes));
}

inline RewardTable build_reward_table(const std::vector<PolicyModel>& models,
                                      const std::vector<StudyEnv>& envs, const ActionCodec& codec,
                                      int t_episodes, std::int64_t episode_slots,
                                      std::uint64_t seed, unsigned threads = 1) {
  if (models.size() != envs.size())
    throw std::invalid_argument("build_reward_table: need one model per environment");
  if (t_episodes < 1) throw std::invalid_argument("build_reward_table: t_episodes must be >= 1");
  const std::size_t n = models.size();
  RewardTable t;
  t.t_episodes = t_episodes;
  t.r_hat.assign(n, std::vector<double>(n, 0.0));
  detail::parallel_for(n * n, threads, [&](std::size_t k) {
    const std::size_t i = k / n, j = k % n;
    t.r_hat[i][j] = evaluate_model_reward(models[j], envs[i], codec, t_episodes, episode_slots,
                                          seed, "reward-table", i);
  });
  return t;
}

enum class AggregationMethod { fedavg, feature, model_weight, reward };

inline std::string_view to_string(AggregationMethod m) {
  switch (m) {
    case AggregationMethod::fedavg: return "fedavg";
    case AggregationMethod::feature: return "feature";
    case AggregationMethod::model_weight: return "model_weight";
    case AggregationMethod::reward: return "reward";
  }
  return "fedavg";
}

inline AggregationMethod aggregation_method_from_string(std::string_view s) {
  if (s == "fedavg") return AggregationMethod::fedavg;
  if (s == "feature") return AggregationMethod::feature;
  if (s == "model_weight") return AggregationMethod::model_weight;
  if (s == "reward") return AggregationMethod::reward;
  throw std::invalid_argument("unknown aggregation method '" + std::string(s) + "'");
}

struct StudyConfig {
  std::vector<AggregationMethod> methods{AggregationMethod::fedavg, AggregationMethod::feature,
                                         AggregationMethod::model_weight, AggregationMethod::reward};
  std::int64_t train_slots = 3000;
  int t_episodes = 10;
  std::int64_t episode_slots = 100;
  int eval_episodes = 10;
  double beta = 3.0;
  std::optional<double> tau;
  KernelSign kernel_sign = KernelSign::similarity;
  std::int64_t probe_slots = 50;
  unsigned threads = 1;
  PgTrainerConfig trainer;
  ActionCodec codec = ActionCodec::powers_of_two(5, 0, 150);
};

struct MethodResult {
  AggregationMethod method = AggregationMethod::fedavg;
  Matrix alpha;
  std::vector<double> rewards;  // per environment
  double mean_reward = 0.0;
};

struct StudyReport {
  std::vector<EnvFeatureVector> features;
  RewardTable table;
  std::vector<double> local_rewards;
  double local_mean = 0.0;
  std::vector<MethodResult> methods;
  std::vector<PolicyModel> local_models;
};

/// Measures the study features of an environment over a short probe at prb_max.
inline EnvFeatureVector measure_features(const EnvConfig& cfg, std::int64_t probe_slots,
                                         std::uint64_t seed) {
  EnvFeatureVector f;
  f.d_max = cfg.qos.d_max_ttis;
  f.epsilon = cfg.qos.epsilon;
  f.k_tilde = static_cast<double>(cfg.users.size());
  SliceEnv env(cfg, seed);
  double cap = 0.0, arr = 0.0;
  for (std::int64_t t = 0; t < probe_slots; ++t) {
    const auto m = env.step(cfg.prb_max).metrics;
    cap += m.mean_capacity_bits;
    arr += static_cast<double>(m.arrivals);
  }
  const double n = static_cast<double>(std::max<std::int64_t>(1, probe_slots));
  f.c_tilde = cap / n;
  f.t_tilde = arr / n;
  return f;
}

/// Trains one local model per environment from a shared initialisation,
/// personalises them by each method and evaluates every result in its own
/// environment.
inline StudyReport personalization_study(const std::vector<StudyEnv>& envs, const StudyConfig& cfg,
                                         std::uint64_t seed) {
  if (envs.empty()) throw std::invalid_argument("personalization_study: no environments");
  const std::size_t n = envs.size();
  for (const auto& e : envs)
    if (e.env.history != envs.front().env.history)
      throw std::invalid_argument("personalization_study: environments differ in history length");
  StudyReport rep;
  Rng init_rng = make_stream(seed, "init");
  const auto init =
      PolicyModel::initialized(policy_architecture(envs.front().env, cfg.codec, cfg.trainer.hidden), init_rng);

  rep.local_models.resize(n);
  rep.features.resize(n);
  detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
    SliceEnv env(envs[i].env, stream_seed(seed, "train", i));
    Rng rng = make_stream(seed, "agent", i);
    auto res = pg_train(env, make_reward_fn(RewardKind::shaped, envs[i].reward, envs[i].env.qos),
                        cfg.trainer, cfg.codec, cfg.train_slots, rng, init);
    rep.local_models[i] = std::move(res.model);
    rep.features[i] = measure_features(envs[i].env, cfg.probe_slots, stream_seed(seed, "probe", i));
  });

  rep.table = build_reward_table(rep.local_models, envs, cfg.codec, cfg.t_episodes,
                                 cfg.episode_slots, seed, cfg.threads);

  auto eval_own = [&](const PolicyModel& m, std::size_t i) {
    return evaluate_model_reward(m, envs[i], cfg.codec, cfg.eval_episodes, cfg.episode_slots, seed,
                                 "eval", i);
  };
  rep.local_rewards.resize(n);
  detail::parallel_for(n, cfg.threads,
                       [&](std::size_t i) { rep.local_rewards[i] = eval_own(rep.local_models[i], i); });
  rep.local_mean = std::accumulate(rep.local_rewards.begin(), rep.local_rewards.end(), 0.0) /
                   static_cast<double>(n);

  for (auto method : cfg.methods) {
    MethodResult mr;
    mr.method = method;
    switch (method) {
      case AggregationMethod::fedavg: mr.alpha = alpha_fedavg(n); break;
      case AggregationMethod::feature:
        mr.alpha = alpha_feature(rep.features, sigma_from_features(rep.features), cfg.kernel_sign);
        break;
      case AggregationMethod::model_weight:
        mr.alpha = alpha_model_weight(rep.local_models, cfg.tau, cfg.kernel_sign);
        break;
      case AggregationMethod::reward: mr.alpha = alpha_reward(rep.table, cfg.beta); break;
    }
    mr.rewards.resize(n);
    detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
      mr.rewards[i] = eval_own(blend_models(rep.local_models, mr.alpha[i]), i);
    });
    mr.mean_reward = std::accumulate(mr.rewards.begin(), mr.rewards.end(), 0.0) / static_cast<double>(n);
    rep.methods.push_back(std::move(mr));
  }
  return rep;
}

}  // namespace slicer
