#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slicer/agents.hpp"
#include "slicer/checkpoint.hpp"
#include "slicer/config.hpp"
#include "slicer/personalization.hpp"
#include "slicer/sweep.hpp"

#ifndef SLICER_VERSION
#define SLICER_VERSION "0.1.0"
#endif

namespace slicer {

namespace fs = std::filesystem;

// Every CSV carries its schema version in the first column of every row.
inline constexpr const char* kTrainingSchema = "train-v1";
inline constexpr const char* kComparisonSchema = "compare-v1";
inline constexpr const char* kSweepSchema = "sweep-v1";
inline constexpr const char* kMatrixSchema = "matrix-v1";
inline constexpr const char* kManifestSchema = "manifest-v1";

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Write to a sibling temp file, then rename over the target.
inline void write_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text(tmp, text);
  fs::rename(tmp, path);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string matrix_csv(const Matrix& m) {
  std::string s = "schema_version,row";
  const std::size_t cols = m.empty() ? 0 : m.front().size();
  for (std::size_t j = 0; j < cols; ++j) s += ",c" + std::to_string(j);
  s += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    s += std::string(kMatrixSchema) + "," + std::to_string(i);
    for (double v : m[i]) s += "," + fmt(v);
    s += "\n";
  }
  return s;
}

}  // namespace detail

/// Tracks one run directory and writes its manifest when the run ends.
class RunRecorder {
 public:
  RunRecorder(fs::path dir, std::string command, const ScenarioConfig& cfg)
      : dir_(std::move(dir)), command_(std::move(command)), cfg_(cfg),
        start_(std::chrono::steady_clock::now()), started_at_(detail::utc_now()) {
    fs::create_directories(dir_);
    detail::write_text(dir_ / "config.json", serialize_config(cfg_));
  }

  const fs::path& dir() const { return dir_; }

  fs::path add(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    detail::write_text(p, text);
    files_.push_back(name);
    return p;
  }

  void note(const std::string& name) { files_.push_back(name); }

  void finish(const std::string& status, const std::string& error = {}) {
    nlohmann::json m;
    m["schema_version"] = kManifestSchema;
    m["command"] = command_;
    m["config_file"] = "config.json";
    m["config_hash"] = config_hash(cfg_);
    m["seed"] = cfg_.run.seed;
    m["code_version"] = SLICER_VERSION;
    m["metrics_files"] = files_;
    m["started_at"] = started_at_;
    m["finished_at"] = detail::utc_now();
    m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m["status"] = status;
    m["error"] = error.empty() ? nlohmann::json(nullptr) : nlohmann::json(error);
    detail::write_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
  }

  /// Runs `body`, recording a partial manifest if it throws.
  template <typename F>
  auto run(F body) {
    try {
      if constexpr (std::is_void_v<decltype(body(*this))>) {
        body(*this);
        finish("complete");
      } else {
        auto r = body(*this);
        finish("complete");
        return r;
      }
    } catch (const std::exception& e) {
      finish("partial", e.what());
      throw;
    }
  }

 private:
  fs::path dir_;
  std::string command_;
  ScenarioConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  std::string started_at_;
  std::vector<std::string> files_;
};

/// True when the manifest's config hash matches the stored config.
inline bool verify_manifest(const fs::path& dir) {
  const auto m = nlohmann::json::parse(detail::read_text(dir / "manifest.json"));
  const auto cfg = parse_config(detail::read_text(dir / m.at("config_file").get<std::string>()));
  return config_hash(cfg) == m.at("config_hash").get<std::string>();
}

inline std::string training_csv(const TrainingLog& log, const ScenarioConfig& cfg) {
  const double tti_ms = cfg.env.radio.tti_seconds * 1e3;
  std::string s =
      "schema_version,slot,n_prbs,arrivals,completed,satisfied,p_sat,mean_delay_ms,std_delay_ms,"
      "mean_snr_db,reward,epsilon,d_max_ms,seed\n";
  const std::string tail = "," + detail::fmt(cfg.env.qos.epsilon) + "," +
                           detail::fmt(cfg.env.qos.d_max_ttis * tti_ms) + "," +
                           std::to_string(cfg.run.seed) + "\n";
  for (const auto& r : log.rows) {
    s += std::string(kTrainingSchema) + "," + std::to_string(r.slot) + "," + std::to_string(r.n_prbs) + "," +
         std::to_string(r.arrivals) + "," + std::to_string(r.completed) + "," +
         std::to_string(r.satisfied) + "," + detail::fmt(r.p_sat) + "," +
         detail::fmt(r.mean_delay_ttis * tti_ms) + "," + detail::fmt(r.std_delay_ttis * tti_ms) + "," +
         detail::fmt(r.mean_snr_db) + "," + detail::fmt(r.reward) + tail;
  }
  return s;
}

/// Trains the configured agent on a fresh environment. Randomness: the
/// environment uses the run seed, the agent its "agent" sub-stream.
inline TrainResult train_agent(const ScenarioConfig& cfg, std::int64_t steps) {
  SliceEnv env(cfg.env, cfg.run.seed);
  Rng rng = make_stream(cfg.run.seed, "agent");
  const auto codec = cfg.agent.codec(cfg.env);
  const auto reward = make_reward_fn(cfg.reward.kind, cfg.reward, cfg.env.qos);
  if (cfg.agent.algorithm == Algorithm::dqn) return dqn_train(env, reward, cfg.agent.dqn, codec, steps, rng);
  return pg_train(env, reward, cfg.agent.pg, codec, steps, rng);
}

inline CheckpointMeta checkpoint_meta(const ScenarioConfig& cfg, std::string_view algorithm,
                                      std::int64_t steps) {
  ScenarioConfig rc;
  rc.reward = cfg.reward;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(rc)["reward"].dump())));
  return {cfg.run.seed, cfg.name, buf, std::string(algorithm), steps};
}

inline TrainResult run_training(const ScenarioConfig& cfg, const fs::path& out) {
  RunRecorder rec(out, "train", cfg);
  return rec.run([&](RunRecorder& r) {
    auto res = train_agent(cfg, cfg.run.steps);
    r.add("training.csv", training_csv(res.log, cfg));
    save_checkpoint(out / "model.json", res.model,
                    checkpoint_meta(cfg, to_string(cfg.agent.algorithm), cfg.run.steps));
    r.note("model.json");
    return res;
  });
}

struct ComparisonRow {
  std::string policy;
  EvalReport report;
};

struct ComparisonResult {
  FixedPolicyCalibration calibration;
  std::vector<ComparisonRow> rows;  // pda, md, heuristic, fixed_av, fixed_max

  const EvalReport& row(std::string_view name) const {
    for (const auto& r : rows)
      if (r.policy == name) return r.report;
    throw std::out_of_range("no comparison row '" + std::string(name) + "'");
  }
};

/// Trains PDA (shaped reward) and MD (mean-delay reward) on the scenario's
/// load pattern, calibrates the fixed policies, and evaluates all five on one
/// seeded evaluation environment. Rewards in the table are the shaped reward.
inline ComparisonResult compare_policies(const ScenarioConfig& cfg) {
  const std::uint64_t seed = cfg.run.seed;
  const auto codec = cfg.agent.codec(cfg.env);
  ComparisonResult out;
  out.calibration =
      calibrate_fixed_policies(cfg.env, cfg.compare.calibration_slots, stream_seed(seed, "calibration"));
  const auto shaped = make_reward_fn(RewardKind::shaped, cfg.reward, cfg.env.qos);
  const auto md_reward = make_reward_fn(RewardKind::mean_delay, cfg.reward, cfg.env.qos);

  std::vector<PolicyModel> models(2);
  detail::parallel_for(2, cfg.run.threads, [&](std::size_t i) {
    const char* tag = i == 0 ? "pda" : "md";
    SliceEnv env(cfg.env, stream_seed(seed, std::string("train-") + tag));
    Rng rng = make_stream(seed, std::string("agent-") + tag);
    models[i] = pg_train(env, i == 0 ? shaped : md_reward, cfg.agent.pg, codec, cfg.compare.train_steps, rng).model;
  });

  Rng ev_pda = make_stream(seed, "eval-pda"), ev_md = make_stream(seed, "eval-md");
  const int fixed_max = out.calibration.fixed_max.value_or(cfg.env.prb_max);
  const std::vector<std::pair<std::string, Controller>> policies = {
      {"pda", model_controller(models[0], codec, cfg.compare.greedy, &ev_pda)},
      {"md", model_controller(models[1], codec, cfg.compare.greedy, &ev_md)},
      {"heuristic", heuristic_controller(cfg.compare.heuristic_step_up, cfg.compare.heuristic_step_down)},
      {"fixed_av", fixed_controller(out.calibration.fixed_av)},
      {"fixed_max", fixed_controller(fixed_max)},
  };
  for (const auto& [name, ctl] : policies) {
    SliceEnv env(cfg.env, stream_seed(seed, "eval"));
    out.rows.push_back({name, evaluate_policy(ctl, env, cfg.compare.eval_slots, shaped)});
  }
  return out;
}

inline std::string comparison_csv(const ComparisonResult& c, const ScenarioConfig& cfg) {
  const double tti_ms = cfg.env.radio.tti_seconds * 1e3;
  std::string s = "schema_version,policy,mean_prbs,p_sat,mean_delay_ms,std_delay_ms,mean_reward\n";
  for (const auto& r : c.rows)
    s += std::string(kComparisonSchema) + "," + r.policy + "," + detail::fmt(r.report.mean_prbs) + "," +
         detail::fmt(r.report.p_sat) + "," + detail::fmt(r.report.mean_delay_ttis * tti_ms) + "," +
         detail::fmt(r.report.std_delay_ttis * tti_ms) + "," + detail::fmt(r.report.mean_reward) + "\n";
  return s;
}

inline ComparisonResult run_comparison(const ScenarioConfig& cfg, const fs::path& out) {
  RunRecorder rec(out, "compare", cfg);
  return rec.run([&](RunRecorder& r) {
    auto res = compare_policies(cfg);
    r.add("comparison.csv", comparison_csv(res, cfg));
    nlohmann::json j;
    j["fixed_av"] = res.calibration.fixed_av;
    j["fixed_max"] = res.calibration.fixed_max ? nlohmann::json(*res.calibration.fixed_max) : nlohmann::json(nullptr);
    j["fixed_max_used"] = res.calibration.fixed_max.value_or(cfg.env.prb_max);
    r.add("calibration.json", j.dump(2) + "\n");
    return res;
  });
}

struct SweepResult {
  std::vector<SweepPoint> points;
  RewardShapeReport report;
  double spearman_rho = 0.0;  // p_sat against n_prbs
};

inline SweepResult reward_sweep(const ScenarioConfig& cfg) {
  SweepConfig sc = cfg.sweep;
  sc.threads = cfg.run.threads;
  SweepResult r;
  r.points = prb_sweep(cfg.env, cfg.reward, sc, cfg.run.seed);
  r.report = validate_reward_shape(r.points, cfg.env, cfg.reward, sc.window);
  std::vector<double> n, p;
  for (const auto& pt : r.points) {
    n.push_back(pt.n_prbs);
    p.push_back(pt.p_sat);
  }
  r.spearman_rho = spearman(n, p);
  return r;
}

inline nlohmann::json shape_report_json(const SweepResult& r, const ScenarioConfig& cfg) {
  const auto& s = r.report;
  auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["scenario"] = cfg.name;
  j["epsilon"] = cfg.env.qos.epsilon;
  j["d_max_ms"] = cfg.env.qos.d_max_ttis * cfg.env.radio.tti_seconds * 1e3;
  j["slots_per_point"] = cfg.sweep.slots_per_point;
  j["knee_n"] = s.knee_n ? nlohmann::json(*s.knee_n) : nlohmann::json(nullptr);
  j["argmax_n"] = s.argmax_n;
  j["lln_argmax_n"] = s.lln_argmax_n;
  j["monotone_below"] = s.monotone_below;
  j["monotone_above"] = s.monotone_above;
  j["lambda"] = s.lambda;
  j["lambda_lo"] = finite(s.lambda_lo);
  j["lambda_hi"] = finite(s.lambda_hi);
  j["spearman_rho"] = r.spearman_rho;
  j["pass"] = s.pass;
  j["failure"] = s.failure.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.failure);
  return j;
}

inline std::string sweep_csv(const SweepResult& r, const ScenarioConfig& cfg) {
  const double tti_ms = cfg.env.radio.tti_seconds * 1e3;
  std::string s = "schema_version,n_prbs,p_sat,mean_delay_ms,lln_reward,shaped_reward\n";
  for (const auto& p : r.points)
    s += std::string(kSweepSchema) + "," + std::to_string(p.n_prbs) + "," + detail::fmt(p.p_sat) + "," +
         detail::fmt(p.mean_delay_ttis * tti_ms) + "," +
         detail::fmt(stationary_lln(p, r.report.lambda, cfg.reward.shaped.prb_norm)) + "," +
         detail::fmt(stationary_shaped(p, cfg.env.qos.epsilon, cfg.reward.shaped)) + "\n";
  return s;
}

inline SweepResult run_reward_sweep(const ScenarioConfig& cfg, const fs::path& out) {
  RunRecorder rec(out, "sweep", cfg);
  return rec.run([&](RunRecorder& r) {
    auto res = reward_sweep(cfg);
    r.add("sweep.csv", sweep_csv(res, cfg));
    r.add("reward_shape_report.json", shape_report_json(res, cfg).dump(2) + "\n");
    return res;
  });
}

inline std::vector<StudyEnv> study_envs(const std::vector<ScenarioConfig>& suite) {
  std::vector<StudyEnv> envs;
  for (const auto& c : suite) envs.push_back({c.env, c.reward});
  return envs;
}

inline nlohmann::json study_report_json(const StudyReport& rep, const StudyConfig& sc,
                                        const std::vector<ScenarioConfig>& suite, double shift) {
  nlohmann::json j;
  j["environments"] = json::array();
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& f = rep.features[i];
    j["environments"].push_back({{"name", suite[i].name},
                                 {"d_max", f.d_max},
                                 {"epsilon", f.epsilon},
                                 {"k_tilde", f.k_tilde},
                                 {"c_tilde", f.c_tilde},
                                 {"t_tilde", f.t_tilde},
                                 {"local_reward", rep.local_rewards[i]}});
  }
  j["beta"] = sc.beta;
  j["kernel_sign"] = to_string(sc.kernel_sign);
  j["local_mean"] = rep.local_mean;
  j["reward_shift"] = shift;
  j["methods"] = json::array();
  for (const auto& m : rep.methods)
    j["methods"].push_back({{"method", to_string(m.method)},
                            {"mean_reward", m.mean_reward},
                            {"rewards", m.rewards},
                            {"ratio_to_local_shifted", (m.mean_reward + shift) / (rep.local_mean + shift)}});
  return j;
}

inline StudyReport run_personalization(const ScenarioConfig& base, const std::vector<ScenarioConfig>& suite,
                                       const fs::path& out) {
  RunRecorder rec(out, "personalize", base);
  return rec.run([&](RunRecorder& r) {
    nlohmann::json sj = json::array();
    for (const auto& c : suite) sj.push_back(config_to_json(c));
    r.add("suite.json", sj.dump(2) + "\n");
    const auto sc = study_config(base);
    auto rep = personalization_study(study_envs(suite), sc, base.run.seed);
    r.add("personalization_report.json",
          study_report_json(rep, sc, suite, base.reward.shaped.r_max).dump(2) + "\n");
    r.add("r_hat.csv", detail::matrix_csv(rep.table.r_hat));
    for (const auto& m : rep.methods)
      r.add("alpha_" + std::string(to_string(m.method)) + ".csv", detail::matrix_csv(m.alpha));
    return rep;
  });
}

inline void write_suite(const std::vector<ScenarioConfig>& suite, const fs::path& out) {
  fs::create_directories(out);
  nlohmann::json index = json::array();
  for (const auto& c : suite) {
    const std::string file = c.name + ".json";
    detail::write_text(out / file, serialize_config(c));
    index.push_back({{"name", c.name}, {"file", file}, {"config_hash", config_hash(c)}});
  }
  detail::write_atomic(out / "suite_index.json", index.dump(2) + "\n");
}

}  // namespace slicer
