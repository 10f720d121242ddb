#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slicer/agents.hpp"
#include "slicer/personalization.hpp"
#include "slicer/reward.hpp"
#include "slicer/rng.hpp"
#include "slicer/slice_env.hpp"
#include "slicer/sweep.hpp"

namespace slicer {

using json = nlohmann::json;

/// Load or validation failure. `key()` is the dotted path of the offending key
/// when one is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class Algorithm { pg, dqn };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::pg ? "pg" : "dqn"; }

struct AgentConfig {
  Algorithm algorithm = Algorithm::pg;
  std::vector<int> action_deltas = ActionCodec::powers_of_two(5, 0, 0).deltas;
  PgTrainerConfig pg;
  DqnTrainerConfig dqn;

  ActionCodec codec(const EnvConfig& env) const { return {action_deltas, env.prb_min, env.prb_max}; }
  bool operator==(const AgentConfig&) const = default;
};

struct RunConfig {
  std::int64_t steps = 3000;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";
  unsigned threads = 1;
  bool operator==(const RunConfig&) const = default;
};

struct CompareConfig {
  std::int64_t train_steps = 10000;
  std::int64_t eval_slots = 1000;
  std::int64_t calibration_slots = 1000;
  int heuristic_step_up = 2;
  int heuristic_step_down = 2;
  bool greedy = true;
  bool operator==(const CompareConfig&) const = default;
};

struct StudyBlock {
  int suite_size = 10;
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
  bool operator==(const StudyBlock&) const = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  EnvConfig env;
  RewardConfig reward;
  AgentConfig agent;
  RunConfig run;
  SweepConfig sweep;
  CompareConfig compare;
  StudyBlock study;

  bool operator==(const ScenarioConfig& o) const {
    return name == o.name && env == o.env && reward == o.reward && agent == o.agent && run == o.run &&
           sweep.slots_per_point == o.sweep.slots_per_point && sweep.window == o.sweep.window &&
           compare == o.compare && study == o.study;
  }
};

enum class Profile { desk, paper };

inline Profile profile_from_string(std::string_view s) {
  if (s == "desk") return Profile::desk;
  if (s == "paper") return Profile::paper;
  throw std::invalid_argument("unknown profile '" + std::string(s) + "' (expected desk or paper)");
}

inline constexpr int kPaperSlotTtis = 1000;

/// The paper profile lengthens the slot to 1000 TTIs and scales per-slot
/// arrival rates so the per-TTI load is unchanged. Desk leaves the config as is.
inline void apply_profile(ScenarioConfig& cfg, Profile p) {
  if (p == Profile::desk || cfg.env.slot_ttis == kPaperSlotTtis) return;
  const double scale = static_cast<double>(kPaperSlotTtis) / cfg.env.slot_ttis;
  for (auto& u : cfg.env.users) u.traffic.arrival_rate_per_slot *= scale;
  cfg.env.slot_ttis = kPaperSlotTtis;
}

namespace detail {

/// Strict view of one JSON object: every key must be read, and errors carry
/// the dotted key path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* find(std::string_view key) {
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) return nullptr;
    seen_.insert(std::string(key));
    return &*it;
  }

  void read(std::string_view key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(key_path(key), "must be finite");
    }
  }

  template <typename Int>
    requires std::is_integral_v<Int>
  void read(std::string_view key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = static_cast<Int>(v->get<std::uint64_t>());
        } else if (v->get<std::int64_t>() < 0) {
          throw ConfigError(key_path(key), "must be >= 0");
        } else {
          out = static_cast<Int>(v->get<std::int64_t>());
        }
      } else {
        out = static_cast<Int>(v->get<std::int64_t>());
      }
    }
  }

  void read(std::string_view key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void read(std::string_view key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <typename T>
  void read(std::string_view key, std::vector<T>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(key_path(key), "expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const auto& e = (*v)[i];
        const bool ok = std::is_integral_v<T> ? e.is_number_integer() : e.is_number();
        if (!ok) throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(e.get<T>());
      }
    }
  }

  /// Reads a string and converts it, reporting conversion failures at the key.
  template <typename F>
  void read_enum(std::string_view key, F convert) {
    std::string s;
    if (j_.contains(std::string(key))) {
      read(key, s);
      try {
        convert(s);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key_path(key), e.what());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

/// Runs a sub-module validate(); its message already names the key.
template <typename F>
void validated_by(F f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto sp = msg.find(' ');
    throw ConfigError(sp == std::string::npos ? "" : msg.substr(0, sp), msg);
  }
}

inline void read_user(const json& j, const std::string& path, UserConfig& u) {
  ObjectReader r(j, path);
  r.read("doppler_hz", u.doppler_hz);
  r.read("large_scale_db", u.large_scale_db);
  r.read("k_factor", u.k_factor);
  r.read("rate", u.traffic.arrival_rate_per_slot);
  r.read_enum("size_class", [&](const std::string& s) {
    u.traffic.size_class = size_class_from_string(s);
    u.traffic.size = default_size_params(u.traffic.size_class);
  });
  r.read("size_mu_ln", u.traffic.size.mu_ln);
  r.read("size_sigma_ln", u.traffic.size.sigma_ln);
  r.finish();
  check(u.doppler_hz >= 0.0, path + ".doppler_hz", "must be >= 0");
  check(u.k_factor >= 0.0, path + ".k_factor", "must be >= 0");
  check(u.traffic.arrival_rate_per_slot >= 0.0, path + ".rate", "must be >= 0");
  check(u.traffic.size.sigma_ln >= 0.0, path + ".size_sigma_ln", "must be >= 0");
}

inline std::string_view to_string(LoadPattern::Kind k) {
  return k == LoadPattern::Kind::constant ? "constant" : "ramp_up_down";
}

inline LoadPattern::Kind load_kind_from_string(std::string_view s) {
  if (s == "constant") return LoadPattern::Kind::constant;
  if (s == "ramp_up_down") return LoadPattern::Kind::ramp_up_down;
  throw std::invalid_argument("unknown load pattern '" + std::string(s) + "'");
}

}  // namespace detail

/// Parses and validates a scenario. Missing keys keep their defaults.
inline ScenarioConfig config_from_json(const json& root) {
  using detail::ObjectReader;
  ScenarioConfig c;
  ObjectReader top(root, "");
  top.read("name", c.name);

  double d_max_ms = c.env.qos.d_max_ttis, tti_ms = c.env.radio.tti_seconds * 1e3;
  if (const json* j = top.find("qos")) {
    ObjectReader r(*j, "qos");
    r.read("d_max_ms", d_max_ms);
    r.read("epsilon", c.env.qos.epsilon);
    r.finish();
  }
  if (const json* j = top.find("env")) {
    ObjectReader r(*j, "env");
    r.read("tti_ms", tti_ms);
    r.read("slot_ttis", c.env.slot_ttis);
    r.read("prb_min", c.env.prb_min);
    r.read("prb_max", c.env.prb_max);
    r.read("initial_prbs", c.env.initial_prbs);
    r.read("h_history", c.env.history);
    r.read("drop_horizon_factor", c.env.drop_horizon_factor);
    r.read("overload_limit", c.env.overload_limit);
    r.read("ewma_decay", c.env.ewma_decay);
    r.finish();
  }
  detail::check(tti_ms > 0.0, "env.tti_ms", "must be > 0");
  c.env.radio.tti_seconds = tti_ms * 1e-3;
  const double ttis = d_max_ms / tti_ms;
  detail::check(ttis >= 1.0 - 1e-9 && std::abs(ttis - std::round(ttis)) < 1e-9, "qos.d_max_ms",
                "must be a positive whole number of TTIs");
  c.env.qos.d_max_ttis = static_cast<int>(std::lround(ttis));

  if (const json* j = top.find("radio")) {
    ObjectReader r(*j, "radio");
    r.read("tx_power_watts", c.env.radio.tx_power_watts);
    r.read("noise_watts", c.env.radio.noise_watts);
    r.read("prb_bandwidth_hz", c.env.radio.prb_bandwidth_hz);
    r.finish();
  }
  if (const json* j = top.find("cqi")) {
    ObjectReader r(*j, "cqi");
    r.read("thresholds_db", c.env.cqi.thresholds_db);
    r.read("efficiencies", c.env.cqi.efficiencies);
    r.finish();
  }
  if (const json* j = top.find("load_pattern")) {
    ObjectReader r(*j, "load_pattern");
    r.read_enum("kind", [&](const std::string& s) { c.env.load.kind = detail::load_kind_from_string(s); });
    r.read("peak_multiplier", c.env.load.peak_multiplier);
    r.read("period_slots", c.env.load.period_slots);
    r.finish();
  }
  if (const json* j = top.find("users")) {
    if (!j->is_array()) throw ConfigError("users", "expected an array");
    for (std::size_t i = 0; i < j->size(); ++i) {
      UserConfig u;
      detail::read_user((*j)[i], "users[" + std::to_string(i) + "]", u);
      c.env.users.push_back(u);
    }
  }
  if (const json* j = top.find("reward")) {
    ObjectReader r(*j, "reward");
    auto& s = c.reward.shaped;
    r.read_enum("kind", [&](const std::string& v) { c.reward.kind = reward_kind_from_string(v); });
    r.read("gamma_p", s.gamma_p);
    r.read("zeta_p", s.zeta_p);
    r.read("nu_p", s.nu_p);
    r.read("gamma_n", s.gamma_n);
    r.read("zeta_n", s.zeta_n);
    r.read("nu_n", s.nu_n);
    r.read("r_max", s.r_max);
    r.read("prb_norm", s.prb_norm);
    if (const json* l = r.find("lambda")) {
      if (l->is_string() && l->get<std::string>() == "auto") {
        c.reward.lambda_auto = true;
      } else if (l->is_number()) {
        c.reward.lambda = l->get<double>();
      } else {
        throw ConfigError("reward.lambda", "expected a number or \"auto\"");
      }
    }
    r.read("md_c_d", c.reward.mean_delay.c_d);
    r.read("md_c_n", c.reward.mean_delay.c_n);
    r.read("md_prb_norm", c.reward.mean_delay.prb_norm);
    r.finish();
  }
  if (const json* j = top.find("agent")) {
    ObjectReader r(*j, "agent");
    r.read_enum("algorithm", [&](const std::string& v) {
      if (v == "pg") c.agent.algorithm = Algorithm::pg;
      else if (v == "dqn") c.agent.algorithm = Algorithm::dqn;
      else throw std::invalid_argument("unknown algorithm '" + v + "' (expected pg or dqn)");
    });
    r.read("action_deltas", c.agent.action_deltas);
    if (const json* p = r.find("pg")) {
      ObjectReader q(*p, "agent.pg");
      auto& g = c.agent.pg;
      q.read("episode_len_slots", g.episode_len_slots);
      q.read("discount", g.discount);
      q.read("baseline_decay", g.baseline_decay);
      q.read("entropy_coeff", g.entropy_coeff);
      q.read("lr", g.lr);
      q.read("use_baseline", g.use_baseline);
      q.read("normalize_advantages", g.normalize_advantages);
      q.read("minibatches", g.minibatches);
      q.read("hidden", g.hidden);
      q.finish();
    }
    if (const json* p = r.find("dqn")) {
      ObjectReader q(*p, "agent.dqn");
      auto& d = c.agent.dqn;
      q.read("lr", d.lr);
      q.read("discount", d.discount);
      q.read("batch", d.batch);
      q.read("replay_capacity", d.replay_capacity);
      q.read("eps_start", d.eps_start);
      q.read("eps_end", d.eps_end);
      q.read("eps_decay_steps", d.eps_decay_steps);
      q.read("target_sync_interval", d.target_sync_interval);
      q.read("updates_per_step", d.updates_per_step);
      q.read("hidden", d.hidden);
      q.finish();
    }
    r.finish();
  }
  if (const json* j = top.find("run")) {
    ObjectReader r(*j, "run");
    r.read("steps", c.run.steps);
    r.read("seed", c.run.seed);
    r.read("out_dir", c.run.out_dir);
    r.read("threads", c.run.threads);
    r.finish();
  }
  if (const json* j = top.find("sweep")) {
    ObjectReader r(*j, "sweep");
    r.read("slots_per_point", c.sweep.slots_per_point);
    r.read("window", c.sweep.window);
    r.finish();
  }
  if (const json* j = top.find("compare")) {
    ObjectReader r(*j, "compare");
    r.read("train_steps", c.compare.train_steps);
    r.read("eval_slots", c.compare.eval_slots);
    r.read("calibration_slots", c.compare.calibration_slots);
    r.read("heuristic_step_up", c.compare.heuristic_step_up);
    r.read("heuristic_step_down", c.compare.heuristic_step_down);
    r.read("greedy", c.compare.greedy);
    r.finish();
  }
  if (const json* j = top.find("study")) {
    ObjectReader r(*j, "study");
    auto& s = c.study;
    r.read("suite_size", s.suite_size);
    if (const json* m = r.find("methods")) {
      if (!m->is_array()) throw ConfigError("study.methods", "expected an array");
      s.methods.clear();
      for (const auto& e : *m) {
        if (!e.is_string()) throw ConfigError("study.methods", "expected method names");
        try {
          s.methods.push_back(aggregation_method_from_string(e.get<std::string>()));
        } catch (const std::invalid_argument& ex) {
          throw ConfigError("study.methods", ex.what());
        }
      }
    }
    r.read("train_slots", s.train_slots);
    r.read("t_episodes", s.t_episodes);
    r.read("episode_slots", s.episode_slots);
    r.read("eval_episodes", s.eval_episodes);
    r.read("beta", s.beta);
    if (const json* t = r.find("tau")) {
      if (t->is_null()) s.tau.reset();
      else if (t->is_number()) s.tau = t->get<double>();
      else throw ConfigError("study.tau", "expected a number or null");
    }
    r.read_enum("kernel_sign", [&](const std::string& v) { s.kernel_sign = kernel_sign_from_string(v); });
    r.read("probe_slots", s.probe_slots);
    r.finish();
  }
  top.finish();

  // Range checks beyond the sub-module invariants.
  detail::check(c.run.steps >= 1, "run.steps", "must be >= 1");
  detail::check(c.run.threads >= 1, "run.threads", "must be >= 1");
  detail::check(c.compare.train_steps >= 1, "compare.train_steps", "must be >= 1");
  detail::check(c.compare.eval_slots >= 1, "compare.eval_slots", "must be >= 1");
  detail::check(c.compare.calibration_slots >= 1, "compare.calibration_slots", "must be >= 1");
  detail::check(c.compare.heuristic_step_up >= 1, "compare.heuristic_step_up", "must be >= 1");
  detail::check(c.compare.heuristic_step_down >= 1, "compare.heuristic_step_down", "must be >= 1");
  detail::check(c.study.suite_size >= 1, "study.suite_size", "must be >= 1");
  detail::check(!c.study.methods.empty(), "study.methods", "must be non-empty");
  detail::check(c.study.train_slots >= 1, "study.train_slots", "must be >= 1");
  detail::check(c.study.t_episodes >= 1, "study.t_episodes", "must be >= 1");
  detail::check(c.study.episode_slots >= 1, "study.episode_slots", "must be >= 1");
  detail::check(c.study.eval_episodes >= 1, "study.eval_episodes", "must be >= 1");
  detail::check(c.study.beta >= 0.0, "study.beta", "must be >= 0");
  detail::check(!c.study.tau || *c.study.tau > 0.0, "study.tau", "must be > 0");
  detail::check(c.study.probe_slots >= 1, "study.probe_slots", "must be >= 1");
  detail::validated_by([&] { c.env.validate(); });
  detail::validated_by([&] { c.reward.validate(); });
  detail::validated_by([&] { c.agent.codec(c.env).validate(); });
  detail::validated_by([&] { c.agent.pg.validate(); });
  detail::validated_by([&] { c.agent.dqn.validate(); });
  detail::validated_by([&] { c.sweep.validate(); });
  return c;
}

inline json config_to_json(const ScenarioConfig& c) {
  const double tti_ms = c.env.radio.tti_seconds * 1e3;
  json j;
  j["name"] = c.name;
  j["qos"] = {{"d_max_ms", c.env.qos.d_max_ttis * tti_ms}, {"epsilon", c.env.qos.epsilon}};
  j["env"] = {{"tti_ms", tti_ms},
              {"slot_ttis", c.env.slot_ttis},
              {"prb_min", c.env.prb_min},
              {"prb_max", c.env.prb_max},
              {"initial_prbs", c.env.initial_prbs},
              {"h_history", c.env.history},
              {"drop_horizon_factor", c.env.drop_horizon_factor},
              {"overload_limit", c.env.overload_limit},
              {"ewma_decay", c.env.ewma_decay}};
  j["radio"] = {{"tx_power_watts", c.env.radio.tx_power_watts},
                {"noise_watts", c.env.radio.noise_watts},
                {"prb_bandwidth_hz", c.env.radio.prb_bandwidth_hz}};
  j["cqi"] = {{"thresholds_db", c.env.cqi.thresholds_db}, {"efficiencies", c.env.cqi.efficiencies}};
  j["load_pattern"] = {{"kind", detail::to_string(c.env.load.kind)},
                       {"peak_multiplier", c.env.load.peak_multiplier},
                       {"period_slots", c.env.load.period_slots}};
  j["users"] = json::array();
  for (const auto& u : c.env.users)
    j["users"].push_back({{"doppler_hz", u.doppler_hz},
                          {"large_scale_db", u.large_scale_db},
                          {"k_factor", u.k_factor},
                          {"rate", u.traffic.arrival_rate_per_slot},
                          {"size_class", to_string(u.traffic.size_class)},
                          {"size_mu_ln", u.traffic.size.mu_ln},
                          {"size_sigma_ln", u.traffic.size.sigma_ln}});
  const auto& s = c.reward.shaped;
  j["reward"] = {{"kind", to_string(c.reward.kind)},
                 {"gamma_p", s.gamma_p},
                 {"zeta_p", s.zeta_p},
                 {"nu_p", s.nu_p},
                 {"gamma_n", s.gamma_n},
                 {"zeta_n", s.zeta_n},
                 {"nu_n", s.nu_n},
                 {"r_max", s.r_max},
                 {"prb_norm", s.prb_norm},
                 {"md_c_d", c.reward.mean_delay.c_d},
                 {"md_c_n", c.reward.mean_delay.c_n},
                 {"md_prb_norm", c.reward.mean_delay.prb_norm}};
  if (c.reward.lambda_auto) j["reward"]["lambda"] = "auto";
  else j["reward"]["lambda"] = c.reward.lambda;
  const auto& g = c.agent.pg;
  const auto& d = c.agent.dqn;
  j["agent"] = {{"algorithm", to_string(c.agent.algorithm)},
                {"action_deltas", c.agent.action_deltas},
                {"pg",
                 {{"episode_len_slots", g.episode_len_slots},
                  {"discount", g.discount},
                  {"baseline_decay", g.baseline_decay},
                  {"entropy_coeff", g.entropy_coeff},
                  {"lr", g.lr},
                  {"use_baseline", g.use_baseline},
                  {"normalize_advantages", g.normalize_advantages},
                  {"minibatches", g.minibatches},
                  {"hidden", g.hidden}}},
                {"dqn",
                 {{"lr", d.lr},
                  {"discount", d.discount},
                  {"batch", d.batch},
                  {"replay_capacity", d.replay_capacity},
                  {"eps_start", d.eps_start},
                  {"eps_end", d.eps_end},
                  {"eps_decay_steps", d.eps_decay_steps},
                  {"target_sync_interval", d.target_sync_interval},
                  {"updates_per_step", d.updates_per_step},
                  {"hidden", d.hidden}}}};
  j["run"] = {{"steps", c.run.steps}, {"seed", c.run.seed}, {"out_dir", c.run.out_dir}, {"threads", c.run.threads}};
  j["sweep"] = {{"slots_per_point", c.sweep.slots_per_point}, {"window", c.sweep.window}};
  j["compare"] = {{"train_steps", c.compare.train_steps},
                  {"eval_slots", c.compare.eval_slots},
                  {"calibration_slots", c.compare.calibration_slots},
                  {"heuristic_step_up", c.compare.heuristic_step_up},
                  {"heuristic_step_down", c.compare.heuristic_step_down},
                  {"greedy", c.compare.greedy}};
  json methods = json::array();
  for (auto m : c.study.methods) methods.push_back(to_string(m));
  j["study"] = {{"suite_size", c.study.suite_size},
                {"methods", methods},
                {"train_slots", c.study.train_slots},
                {"t_episodes", c.study.t_episodes},
                {"episode_slots", c.study.episode_slots},
                {"eval_episodes", c.study.eval_episodes},
                {"beta", c.study.beta},
                {"tau", c.study.tau ? json(*c.study.tau) : json(nullptr)},
                {"kernel_sign", to_string(c.study.kernel_sign)},
                {"probe_slots", c.study.probe_slots}};
  return j;
}

inline ScenarioConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const ScenarioConfig& c) { return config_to_json(c).dump(2) + "\n"; }

/// FNV-1a of the canonical (sorted-key, compact) JSON form, as 16 hex digits.
inline std::string config_hash(const ScenarioConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(c).dump())));
  return buf;
}

inline StudyConfig study_config(const ScenarioConfig& c) {
  StudyConfig s;
  s.methods = c.study.methods;
  s.train_slots = c.study.train_slots;
  s.t_episodes = c.study.t_episodes;
  s.episode_slots = c.study.episode_slots;
  s.eval_episodes = c.study.eval_episodes;
  s.beta = c.study.beta;
  s.tau = c.study.tau;
  s.kernel_sign = c.study.kernel_sign;
  s.probe_slots = c.study.probe_slots;
  s.threads = c.run.threads;
  s.trainer = c.agent.pg;
  s.codec = c.agent.codec(c.env);
  return s;
}

/// Heterogeneous scenarios drawn from `base`. The (D_max, epsilon) pair
/// cycles through all four combinations: two consecutive scenarios always
/// differ in D_max and any three cover both epsilons.
inline std::vector<ScenarioConfig> generate_env_suite(std::uint64_t master_seed, int n,
                                                      const ScenarioConfig& base = {}) {
  if (n < 1) throw std::invalid_argument("generate_env_suite: n must be >= 1");
  static constexpr int kDmax[2] = {5, 10};
  static constexpr double kEps[2] = {0.1, 0.3};
  static constexpr SizeClass kMixes[4][3] = {
      {SizeClass::small, SizeClass::small, SizeClass::small},
      {SizeClass::small, SizeClass::medium, SizeClass::small},
      {SizeClass::medium, SizeClass::large, SizeClass::small},
      {SizeClass::small, SizeClass::medium, SizeClass::large},
  };
  Rng rng = make_stream(master_seed, "suite");
  std::uniform_int_distribution<int> users_d(2, 6), mix_d(0, 3), offset_d(0, 3);
  std::uniform_real_distribution<double> fd(5.0, 50.0), snr_off(-4.0, 4.0), load(3.0e6, 6.0e6);
  const int combo0 = offset_d(rng);
  std::vector<ScenarioConfig> suite;
  for (int i = 0; i < n; ++i) {
    ScenarioConfig c = base;
    const int k = (i + combo0) % 4;
    c.name = "suite-" + std::to_string(i);
    c.env.qos.d_max_ttis = static_cast<int>(std::lround(kDmax[k % 2] / (c.env.radio.tti_seconds * 1e3)));
    c.env.qos.epsilon = kEps[(k / 2 + k) % 2];
    c.reward.shaped.zeta_p = 3.0 / c.env.qos.epsilon;
    c.env.load = LoadPattern{};
    const int users = users_d(rng);
    const int mix = mix_d(rng);
    // Offered bits per slot at the 200-TTI desk slot, split evenly over users.
    const double bits = load(rng) * c.env.slot_ttis / 200.0;
    c.env.users.clear();
    for (int u = 0; u < users; ++u) {
      UserConfig uc;
      uc.doppler_hz = fd(rng);
      uc.large_scale_db = -85.0 + snr_off(rng);
      uc.k_factor = 10.0;
      uc.traffic.size_class = kMixes[mix][u % 3];
      uc.traffic.size = default_size_params(uc.traffic.size_class);
      uc.traffic.arrival_rate_per_slot = bits / users / uc.traffic.size.mean_bits();
      c.env.users.push_back(uc);
    }
    suite.push_back(std::move(c));
  }
  return suite;
}

}  // namespace slicer
