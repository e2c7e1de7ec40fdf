// expfilter: train per-environment policies, evaluate methods on held-out environments,
// run the full training-effort sweep, or print the effective configuration.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "expfilter/bench.hpp"
#include "expfilter/io.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "results";
  std::vector<std::size_t> efforts;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> draws;
  std::optional<std::size_t> scenarios;
  std::string store;
  bool serial = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--seed", a.seed, "Master seed");
  cmd->add_option("--config", a.config, "JSON config file (missing keys keep defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
  cmd->add_option("--efforts", a.efforts, "Training efforts (number of training environments)")
      ->delimiter(',');
  cmd->add_option("--trials", a.trials, "Evaluation trials per held-out environment");
  cmd->add_option("--draws", a.draws, "Random training subsets per effort");
  cmd->add_option("--scenarios", a.scenarios, "Training scenarios per environment");
  cmd->add_option("--store", a.store,
                  "Policy store directory to load instead of training (default: train)");
  cmd->add_flag("--serial", a.serial, "Run jobs on one thread");
}

ef::ToolkitConfig effective_config(const CommonArgs& a) {
  ef::ToolkitConfig cfg = a.config.empty() ? ef::ToolkitConfig{} : ef::load_config(a.config);
  if (a.seed) cfg.plan.master_seed = *a.seed;
  if (!a.efforts.empty()) cfg.plan.training_efforts = a.efforts;
  if (a.trials) cfg.plan.eval_trials_per_env = *a.trials;
  if (a.draws) cfg.plan.subset_draws = *a.draws;
  if (a.scenarios) cfg.plan.scenarios_per_env = *a.scenarios;
  cfg.validate();
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw ef::Error("cannot write " + p.string());
  return os;
}

ef::PolicyStore obtain_store(const CommonArgs& a, const ef::Workbench& wb, bool write_logs) {
  if (!a.store.empty()) {
    std::cerr << "loading policy store from " << a.store << '\n';
    return ef::load_store(a.store, wb);
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<ef::ScenarioLog>> logs;
  auto store = ef::train_all(wb, write_logs ? &logs : nullptr);
  std::cerr << "trained " << store.envs.size() << " environments in " << seconds_since(t0)
            << " s\n";
  const fs::path out(a.out);
  ef::save_store(out / "store", store, wb);
  if (write_logs) {
    fs::create_directories(out / "logs");
    for (std::size_t i = 0; i < logs.size(); ++i) {
      auto os = open_out(out / "logs" / (store.envs[i].env.tag() + ".csv"));
      ef::write_scenario_logs(os, logs[i]);
    }
  }
  return store;
}

void write_results(const fs::path& out, const std::vector<ef::TrialRecord>& records) {
  const auto agg = ef::normalize_and_aggregate(records);
  {
    auto os = open_out(out / "raw.csv");
    ef::write_raw_csv(os, records);
  }
  {
    auto os = open_out(out / "aggregate.csv");
    ef::write_aggregate_csv(os, agg.by_effort);
  }
  {
    auto os = open_out(out / "aggregate_by_draw.csv");
    ef::write_aggregate_csv(os, agg.by_draw);
  }
  auto os = open_out(out / "summary.md");
  os << "# Results\n\n";
  ef::write_markdown_summary(os, agg);
  ef::write_markdown_summary(std::cout, agg);
}

int cmd_train(const CommonArgs& a) {
  const ef::Workbench wb(effective_config(a));
  fs::create_directories(a.out);
  const auto store = obtain_store(a, wb, true);
  auto os = open_out(fs::path(a.out) / "training.csv");
  os << "env_id,scenarios,triplets,belief_resets\n";
  for (const auto& e : store.envs) {
    os << e.env.tag() << ',' << e.scenarios << ',' << e.triplets << ',' << e.belief_resets << '\n';
  }
  std::cout << "policy store written to " << (fs::path(a.out) / "store").string() << '\n';
  return 0;
}

int cmd_evaluate(const CommonArgs& a, const std::string& method_name, std::size_t effort,
                 std::size_t draw, const std::vector<std::string>& test_tags) {
  const ef::Workbench wb(effective_config(a));
  const auto& plan = wb.config().plan;
  fs::create_directories(a.out);
  const auto store = obtain_store(a, wb, false);
  const ef::Method method = ef::parse_method(method_name);

  std::vector<ef::EnvironmentState> subset;
  if (method != ef::Method::explicit_training) subset = ef::draw_training_subset(plan, effort, draw);
  std::vector<ef::EnvironmentState> tests;
  for (const auto& t : test_tags) tests.push_back(ef::EnvironmentState::from_tag(t));
  if (tests.empty()) {
    for (const auto& e : plan.all_envs) {
      if (std::find(subset.begin(), subset.end(), e) == subset.end()) tests.push_back(e);
    }
  }

  std::vector<ef::TrialRecord> records;
  for (const auto& env : tests) {
    const auto metrics = ef::evaluate_method(method, env, subset, store, wb);
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      records.push_back({method, method == ef::Method::explicit_training ? 0 : effort, draw, env, k,
                         ef::eval_seed(plan.master_seed, env.index(), k), metrics[k]});
    }
  }
  write_results(a.out, records);
  return 0;
}

int cmd_sweep(const CommonArgs& a, const std::vector<std::string>& method_names) {
  const ef::Workbench wb(effective_config(a));
  fs::create_directories(a.out);
  const auto t0 = std::chrono::steady_clock::now();
  const auto store = obtain_store(a, wb, false);
  ef::SweepOptions opts;
  opts.efforts = wb.config().plan.training_efforts;
  opts.parallel = !a.serial;
  if (!method_names.empty()) {
    opts.methods.clear();
    for (const auto& m : method_names) opts.methods.push_back(ef::parse_method(m));
  }
  const auto records = ef::run_sweep(store, wb, opts);
  write_results(a.out, records);
  {
    auto os = open_out(fs::path(a.out) / "config.json");
    os << ef::config_to_json(wb.config()).dump(2) << '\n';
  }
  std::cerr << "sweep finished in " << seconds_since(t0) << " s (" << records.size()
            << " trials)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experience-filter toolkit for POMDP policies at a T-intersection"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, sweep_args, show_args;

  auto* train = app.add_subcommand("train", "Collect scenarios and learn one policy per environment");
  add_common(train, train_args);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one method for one training subset");
  add_common(evaluate, eval_args);
  std::string method = "experience_filter";
  std::size_t effort = 9;
  std::size_t draw = 0;
  std::vector<std::string> test_envs;
  evaluate->add_option("--method", method,
                       "experience_filter | entire_dataset | nearest_neighbor | explicit_training")
      ->capture_default_str();
  evaluate->add_option("--effort", effort, "Training subset size")->capture_default_str();
  evaluate->add_option("--draw", draw, "Subset draw index")->capture_default_str();
  evaluate->add_option("--test-env", test_envs,
                       "Held-out environment tag such as yes-med-aggressive (default: all)");

  auto* sweep = app.add_subcommand("sweep", "Run every method over every effort and draw");
  add_common(sweep, sweep_args);
  std::vector<std::string> methods;
  sweep->add_option("--methods", methods, "Subset of methods")->delimiter(',');

  auto* show = app.add_subcommand("show-config", "Print the effective configuration as JSON");
  add_common(show, show_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_args);
    if (*evaluate) return cmd_evaluate(eval_args, method, effort, draw, test_envs);
    if (*sweep) return cmd_sweep(sweep_args, methods);
    if (*show) {
      std::cout << ef::config_to_json(effective_config(show_args)).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
