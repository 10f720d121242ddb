#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "slicer/harness.hpp"

using namespace slicer;

namespace {

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile = "desk";
  unsigned threads = 0;
};

void add_common(CLI::App* sub, CommonOpts& o, bool config_required) {
  auto* c = sub->add_option("--config", o.config, "scenario JSON file");
  if (config_required) c->required();
  c->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "run seed (overrides run.seed)");
  sub->add_option("--out", o.out, "output directory (overrides run.out_dir)");
  sub->add_option("--profile", o.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  sub->add_option("--threads", o.threads, "worker threads (overrides run.threads)");
}

ScenarioConfig resolve(const CommonOpts& o) {
  ScenarioConfig c = o.config.empty() ? ScenarioConfig{} : load_config(o.config);
  apply_profile(c, profile_from_string(o.profile));
  if (o.seed) c.run.seed = *o.seed;
  if (!o.out.empty()) c.run.out_dir = o.out;
  if (o.threads > 0) c.run.threads = o.threads;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slicer: delay-aware RAN slicing simulator and training harness"};
  app.require_subcommand(1);

  CommonOpts train_o, sweep_o, cmp_o, pers_o, suite_o, val_o;
  auto* train = app.add_subcommand("train", "train one agent and write its log, model and manifest");
  add_common(train, train_o, true);
  std::optional<std::int64_t> steps;
  train->add_option("--steps", steps, "training slots (overrides run.steps)");

  auto* sweep = app.add_subcommand("sweep", "constant-grant PRB sweep and reward-shape report");
  add_common(sweep, sweep_o, true);

  auto* cmp = app.add_subcommand("compare", "train and evaluate the five policies");
  add_common(cmp, cmp_o, true);

  auto* pers = app.add_subcommand("personalize", "personalization study over a generated suite");
  add_common(pers, pers_o, true);
  std::optional<int> pers_n;
  pers->add_option("--n", pers_n, "suite size (overrides study.suite_size)");

  auto* gen = app.add_subcommand("gen-suite", "write a generated environment suite");
  add_common(gen, suite_o, false);
  std::optional<int> gen_n;
  gen->add_option("--n", gen_n, "suite size (overrides study.suite_size)");

  auto* val = app.add_subcommand("validate-config", "load and validate a scenario file");
  add_common(val, val_o, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      auto c = resolve(train_o);
      if (steps) c.run.steps = *steps;
      const auto res = run_training(c, c.run.out_dir);
      const double p = res.log.trailing_mean(500, [](const TrainingLogRow& r) { return r.p_sat; });
      std::printf("trained %lld slots; trailing-500 p_sat %.4f; wrote %s\n",
                  static_cast<long long>(c.run.steps), p, c.run.out_dir.c_str());
    } else if (*sweep) {
      const auto c = resolve(sweep_o);
      const auto r = run_reward_sweep(c, c.run.out_dir);
      std::printf("knee %d, shaped argmax %d, lln argmax %d (lambda %.4g); %s\n",
                  r.report.knee_n.value_or(-1), r.report.argmax_n, r.report.lln_argmax_n, r.report.lambda,
                  r.report.pass ? "pass" : ("fail: " + r.report.failure).c_str());
      return r.report.pass ? 0 : 2;
    } else if (*cmp) {
      const auto c = resolve(cmp_o);
      const auto r = run_comparison(c, c.run.out_dir);
      std::cout << comparison_csv(r, c);
    } else if (*pers) {
      auto c = resolve(pers_o);
      if (pers_n) c.study.suite_size = *pers_n;
      const auto suite = generate_env_suite(c.run.seed, c.study.suite_size, c);
      const auto rep = run_personalization(c, suite, c.run.out_dir);
      std::printf("local mean %.4f\n", rep.local_mean);
      for (const auto& m : rep.methods)
        std::printf("%-13s %.4f\n", std::string(to_string(m.method)).c_str(), m.mean_reward);
    } else if (*gen) {
      auto c = resolve(suite_o);
      if (gen_n) c.study.suite_size = *gen_n;
      const auto suite = generate_env_suite(c.run.seed, c.study.suite_size, c);
      write_suite(suite, c.run.out_dir);
      std::printf("wrote %zu scenarios to %s\n", suite.size(), c.run.out_dir.c_str());
    } else if (*val) {
      const auto c = resolve(val_o);
      std::printf("%s: ok (hash %s)\n", val_o.config.c_str(), config_hash(c).c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
