// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slicer/harness.hpp"

using namespace slicer;

namespace {

std::string config_path(const char* name) { return std::string(SLICER_CONFIG_DIR) + "/" + name; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs <= budget_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s %-22s %s [%.1fs of %.0fs]%s\n", ok ? "PASS" : "FAIL", name, o.detail.c_str(), secs,
              budget_s, in_time ? "" : " over budget");
  std::fflush(stdout);
}

std::string f4(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4f", v);
  return b;
}

std::string e2(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2e", v);
  return b;
}

Outcome reward_shape(const char* file) {
  const auto cfg = load_config(config_path(file));
  const auto r = reward_sweep(cfg);
  const auto& s = r.report;
  std::string d = "knee=" + std::to_string(s.knee_n.value_or(-1)) + " shaped_argmax=" + std::to_string(s.argmax_n) +
                  " lln_argmax=" + std::to_string(s.lln_argmax_n) + " lambda=" + f4(s.lambda) + " in (" +
                  f4(s.lambda_lo) + "," + f4(s.lambda_hi) + ")";
  if (!s.pass) d += " failed " + s.failure;
  return {s.pass, d};
}

Outcome convergence() {
  const auto cfg = load_config(config_path("env1.json"));
  const auto a = train_agent(cfg, 3000);
  const auto b = train_agent(cfg, 3000);
  const double p = a.log.trailing_mean(500, [](const TrainingLogRow& r) { return r.p_sat; });
  const double d = a.log.trailing_mean(500, [](const TrainingLogRow& r) { return r.mean_delay_ttis; });
  const double tti_ms = cfg.env.radio.tti_seconds * 1e3;
  const double target = 1.0 - cfg.env.qos.epsilon;
  bool same = a.model.export_params() == b.model.export_params() && a.log.rows.size() == b.log.rows.size();
  for (std::size_t i = 0; same && i < a.log.rows.size(); ++i)
    same = a.log.rows[i].n_prbs == b.log.rows[i].n_prbs && a.log.rows[i].reward == b.log.rows[i].reward;
  const bool ok = std::abs(p - target) <= 0.05 && d < cfg.env.qos.d_max_ttis && same;
  return {ok, "trailing500 p_sat=" + f4(p) + " delay_ms=" + f4(d * tti_ms) +
                  " d_max_ms=" + f4(cfg.env.qos.d_max_ttis * tti_ms) + (same ? " reproducible" : " NOT reproducible")};
}

Outcome comparison() {
  const auto cfg = load_config(config_path("compare.json"));
  const auto r = compare_policies(cfg);
  const auto &pda = r.row("pda"), &md = r.row("md"), &heur = r.row("heuristic"), &fav = r.row("fixed_av"),
             &fmax = r.row("fixed_max");
  const bool c1 = fmax.p_sat == 1.0 && fmax.mean_prbs >= 1.5 * pda.mean_prbs;
  const bool c2 = pda.mean_delay_ttis <= 0.8 * md.mean_delay_ttis;
  const bool c3 = pda.p_sat > heur.p_sat && pda.p_sat > fav.p_sat;
  std::string d = "p_sat pda/md/heur/fav/max=" + f4(pda.p_sat) + "/" + f4(md.p_sat) + "/" + f4(heur.p_sat) + "/" +
                  f4(fav.p_sat) + "/" + f4(fmax.p_sat) + " prbs pda/max=" + f4(pda.mean_prbs) + "/" +
                  f4(fmax.mean_prbs) + " delay pda/md=" + f4(pda.mean_delay_ttis) + "/" + f4(md.mean_delay_ttis);
  if (!c1) d += " [fixed_max]";
  if (!c2) d += " [delay vs md]";
  if (!c3) d += " [p_sat vs heuristic/fixed_av]";
  return {c1 && c2 && c3, d};
}

Outcome gradient_check() {
  Rng rng = make_stream(11, "gradcheck");
  std::normal_distribution<double> g(0.0, 1.0);
  int archs = 0;
  double worst = 0.0;
  for (std::size_t in : {2u, 7u, 14u})
    for (const auto& hidden : std::vector<std::vector<std::size_t>>{{}, {5}, {12, 6}, {9, 7, 4}})
      for (std::size_t out : {1u, 3u}) {
        Mlp m = Mlp::initialized({in, hidden, out}, rng);
        for (auto& p : m.params()) p += 0.1 * g(rng);
        std::vector<double> x(in), c(out);
        for (auto& v : x) v = g(rng);
        for (auto& v : c) v = g(rng);
        auto loss = [&] {
          const auto y = m.forward(x);
          double s = 0.0;
          for (std::size_t k = 0; k < out; ++k) s += c[k] * y[k];
          return s;
        };
        const auto an = m.backward(x, c);
        double num2 = 0.0, den = 0.0;
        for (std::size_t i = 0; i < an.size(); ++i) {
          const double saved = m.params()[i];
          m.params()[i] = saved + 1e-6;
          const double up = loss();
          m.params()[i] = saved - 1e-6;
          const double dn = loss();
          m.params()[i] = saved;
          const double nu = (up - dn) / 2e-6;
          num2 += (an[i] - nu) * (an[i] - nu);
          den += an[i] * an[i] + nu * nu;
        }
        worst = std::max(worst, den > 0.0 ? std::sqrt(num2 / den) : 0.0);
        ++archs;
      }
  return {worst < 1e-4 && archs >= 20, std::to_string(archs) + " architectures, max rel error " + e2(worst)};
}

Outcome aggregation_algebra() {
  const std::size_t n = 6;
  std::vector<PolicyModel> models;
  std::vector<EnvFeatureVector> feats;
  Rng rng = make_stream(12, "algebra");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RewardTable t;
  t.r_hat.assign(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    models.push_back(PolicyModel::initialized({14, {32, 16}, 11}, rng));
    feats.push_back({5 + 5 * u(rng), 0.1 + 0.2 * u(rng), 2 + 4 * u(rng), 400 * u(rng), 60 * u(rng)});
    for (auto& x : t.r_hat[i]) x = -100 * u(rng);
  }
  bool rows = true;
  for (const auto& a : {alpha_fedavg(n), alpha_feature(feats, sigma_from_features(feats)),
                        alpha_model_weight(models), alpha_reward(t, 3.0)})
    rows = rows && is_row_stochastic(a, 1e-9);
  bool uniform = true;
  for (const auto& row : alpha_reward(t, 0.0))
    for (double x : row) uniform = uniform && std::abs(x - 1.0 / n) < 1e-12;
  bool greedy = true;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> row(n, 0.0);
    row[j] = 1.0;
    const auto b = blend_models(models, row);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> x(14);
      for (auto& v : x) v = u(rng);
      greedy = greedy && argmax(b.forward(x)) == argmax(models[j].forward(x));
    }
  }
  RewardTable ex;
  ex.r_hat = {{-1.69, -4.39, -3.45}};
  const auto a = alpha_reward(ex, 3.0)[0];
  const bool example = std::abs(a[0] - 0.9945) < 1e-3 && std::abs(a[1] - 0.0003) < 1e-3 && std::abs(a[2] - 0.0052) < 1e-3;
  return {rows && uniform && greedy && example,
          std::string("rows ") + (rows ? "ok" : "bad") + ", beta0 " + (uniform ? "uniform" : "bad") + ", one-hot " +
              (greedy ? "greedy-equal" : "bad") + ", example [" + f4(a[0]) + "," + f4(a[1]) + "," + f4(a[2]) + "]"};
}

Outcome personalization() {
  const auto base = load_config(config_path("suite.json"));
  const auto suite = generate_env_suite(base.run.seed, base.study.suite_size, base);
  const auto rep = personalization_study(study_envs(suite), study_config(base), base.run.seed);
  std::map<AggregationMethod, double> m;
  for (const auto& r : rep.methods) m[r.method] = r.mean_reward;
  const double shift = base.reward.shaped.r_max;
  const double rw = m.at(AggregationMethod::reward);
  const bool beats = rw >= m.at(AggregationMethod::fedavg) && rw >= m.at(AggregationMethod::feature) &&
                     rw >= m.at(AggregationMethod::model_weight);
  const double ratio = (rw + shift) / (rep.local_mean + shift);
  return {beats && ratio >= 0.9,
          std::to_string(suite.size()) + " envs; mean reward local/fedavg/feature/model_weight/reward=" +
              f4(rep.local_mean) + "/" + f4(m.at(AggregationMethod::fedavg)) + "/" +
              f4(m.at(AggregationMethod::feature)) + "/" + f4(m.at(AggregationMethod::model_weight)) + "/" + f4(rw) +
              " shifted ratio=" + f4(ratio)};
}

Outcome env_soundness() {
  const auto cfg = load_config(config_path("env1.json"));
  SliceEnv env(cfg.env, cfg.run.seed);
  int grant = 0;
  bool conserve = true, delivery = true, edf = true;
  std::map<std::uint64_t, std::int64_t> served;
  env.set_tti_observer([&](std::int64_t, std::span<const Packet> q, const ScheduleResult& s,
                           std::span<const std::int64_t> cap) {
    std::map<std::uint64_t, int> given;
    int used = 0;
    for (const auto& [id, k] : s.allocations) {
      used += k;
      given[id] = k;
    }
    conserve = conserve && used == s.prbs_used && used <= grant;
    const Packet* last = nullptr;
    bool skipped = false;
    for (const auto& p : q) {
      const auto it = given.find(p.id);
      const auto c = cap[static_cast<std::size_t>(p.user_id)];
      if (it != given.end()) {
        served[p.id] += c * it->second;
        if (last) edf = edf && edf_before(*last, p);
        if (skipped) edf = false;  // a servable packet ahead in EDF order was passed over
        last = &p;
      } else if (p.remaining_bits > 0 && c > 0) {
        skipped = true;
      }
      delivery = delivery && ((p.remaining_bits == 0) == (served[p.id] >= p.size_bits));
    }
    if (skipped) conserve = conserve && used == grant;
  });
  const int grants[] = {0, 30, 70, 95, 150, 50, 120};
  for (int s = 0; s < 140; ++s) {
    grant = grants[s % 7];
    env.step(grant);
  }
  SweepConfig sc = cfg.sweep;
  sc.slots_per_point = 50;
  const auto pts = prb_sweep(cfg.env, cfg.reward, sc, cfg.run.seed);
  std::vector<double> n, p;
  for (const auto& x : pts) {
    n.push_back(x.n_prbs);
    p.push_back(x.p_sat);
  }
  const double rho = spearman(n, p);
  auto trace = [&](std::uint64_t seed) {
    SliceEnv e(cfg.env, seed);
    std::vector<double> t;
    for (int s = 0; s < 50; ++s) {
      const auto m = e.step((s * 37) % 151).metrics;
      t.insert(t.end(), {static_cast<double>(m.satisfied), m.mean_delay_ttis, m.mean_snr_db, m.prbs_consumed});
    }
    return t;
  };
  const bool det = trace(9) == trace(9) && trace(9) != trace(10);
  const bool ok = conserve && delivery && edf && rho > 0.99 && det;
  return {ok, std::string("conservation ") + (conserve ? "ok" : "bad") + ", delivery " + (delivery ? "ok" : "bad") +
                  ", edf " + (edf ? "ok" : "bad") + ", spearman=" + f4(rho) + ", determinism " + (det ? "ok" : "bad")};
}

}  // namespace

int main() {
  criterion("reward_shape_env1", 300, [] { return reward_shape("env1.json"); });
  criterion("reward_shape_env2", 300, [] { return reward_shape("env2.json"); });
  criterion("convergence_env1", 120, convergence);
  criterion("policy_comparison", 300, comparison);
  criterion("gradient_check", 30, gradient_check);
  criterion("aggregation_algebra", 60, aggregation_algebra);
  criterion("personalization", 1800, personalization);
  criterion("env_soundness", 120, env_soundness);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
