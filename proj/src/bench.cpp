#include "expfilter/bench.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

namespace ef {

namespace {

bool contains(std::span<const EnvironmentState> envs, const EnvironmentState& e) {
  return std::find(envs.begin(), envs.end(), e) != envs.end();
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::array<double, kNumMetrics> metric_values(const RunMetrics& m) {
  return {m.collision_risk, m.discomfort, m.time_taken};
}

}  // namespace

void ExperimentPlan::validate() const {
  if (all_envs.empty()) throw Error("plan has no environments");
  for (std::size_t e : training_efforts) {
    if (e == 0 || e + 1 > all_envs.size()) {
      throw Error("training effort " + std::to_string(e) + " must leave an environment out");
    }
  }
  for (std::size_t i = 0; i < all_envs.size(); ++i) {
    for (std::size_t j = i + 1; j < all_envs.size(); ++j) {
      if (all_envs[i] == all_envs[j]) throw Error("plan lists an environment twice");
    }
  }
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::experience_filter: return "experience_filter";
    case Method::entire_dataset: return "entire_dataset";
    case Method::nearest_neighbor: return "nearest_neighbor";
    case Method::explicit_training: return "explicit_training";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw FormatError("unknown method '" + std::string(s) + "'");
}

std::uint64_t train_seed(std::uint64_t master, std::size_t env_index, std::size_t scenario) {
  return derive_seed(master, {kTrainStream, env_index, scenario});
}

std::uint64_t eval_seed(std::uint64_t master, std::size_t env_index, std::size_t trial) {
  return derive_seed(master, {kEvalStream, env_index, trial});
}

Workbench::Workbench(ToolkitConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      prior_(DirichletPrior::uniform(kNumStates, kNumActions, cfg_.prior_alpha)),
      bootstrap_model_(make_tdomain_model(prior_.mean_transition(), cfg_.noise, cfg_.reward,
                                          cfg_.discount)),
      bootstrap_q_(solve_qmdp(bootstrap_model_, cfg_.solver)) {}

PomdpModel Workbench::model_for(const DirichletPolicyParams& params) const {
  return make_tdomain_model(mean_transition(params), cfg_.noise, cfg_.reward, cfg_.discount);
}

ScenarioConfig Workbench::scenario(const EnvironmentState& env, std::uint64_t seed) const {
  return ScenarioConfig::for_environment(env, seed, cfg_.simulator);
}

const TrainedEnvironment& PolicyStore::at(const EnvironmentState& env) const {
  for (const auto& e : envs) {
    if (e.env == env) return e;
  }
  throw Error("environment " + env.tag() + " is not in the policy store");
}

PolicyStore train_all(const Workbench& wb, std::vector<std::vector<ScenarioLog>>* logs) {
  const auto& cfg = wb.config();
  const auto& plan = cfg.plan;
  const std::size_t n_env = plan.all_envs.size();
  std::vector<std::optional<TrainedEnvironment>> trained(n_env);
  std::vector<std::vector<ScenarioLog>> all_logs(n_env);
  std::exception_ptr failure;

  RunOptions opts;
  opts.explore = cfg.train_explore;
  opts.explore_hold = cfg.train_explore_hold;

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_env); ++i) {
    try {
      const auto idx = static_cast<std::size_t>(i);
      const EnvironmentState env = plan.all_envs[idx];
      std::vector<ScenarioLog> env_logs;
      env_logs.reserve(plan.scenarios_per_env);
      for (std::size_t k = 0; k < plan.scenarios_per_env; ++k) {
        auto outcome = run_scenario(wb.scenario(env, train_seed(plan.master_seed, env.index(), k)),
                                    wb.bootstrap_q(), wb.bootstrap_model(), opts);
        outcome.log.scenario_id = k;
        env_logs.push_back(std::move(outcome.log));
      }
      IngestStats stats;
      TransitionCounts counts(kNumStates, kNumActions);
      for (const auto& log : env_logs) {
        counts = ingest_scenario(log, wb.prior(), wb.bootstrap_model(), std::move(counts), &stats);
      }
      auto params = posterior(wb.prior(), counts);
      params.set_source_env(env);
      trained[idx] = TrainedEnvironment{env,          std::move(counts),   std::move(params),
                                        env_logs.size(), stats.triplets, stats.belief_resets};
      all_logs[idx] = std::move(env_logs);
    } catch (...) {
#pragma omp critical(ef_train_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  PolicyStore store;
  for (auto& t : trained) store.envs.push_back(std::move(*t));
  if (logs != nullptr) *logs = std::move(all_logs);
  return store;
}

void save_store(const std::filesystem::path& dir, const PolicyStore& store, const Workbench& wb) {
  std::filesystem::create_directories(dir);
  ExperienceLibrary lib;
  for (const auto& e : store.envs) lib.add(e.env, e.params);
  save_library(dir, lib, wb.config().kernel);

  // Extend the library manifest with training provenance.
  Json manifest;
  {
    std::ifstream is(dir / "manifest.json");
    manifest = Json::parse(is);
  }
  for (std::size_t i = 0; i < store.envs.size(); ++i) {
    manifest["entries"][i]["scenarios"] = store.envs[i].scenarios;
    manifest["entries"][i]["triplets"] = store.envs[i].triplets;
    manifest["entries"][i]["belief_resets"] = store.envs[i].belief_resets;
  }
  manifest["master_seed"] = wb.config().plan.master_seed;
  manifest["prior_alpha"] = wb.config().prior_alpha;
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
}

PolicyStore load_store(const std::filesystem::path& dir, const Workbench& wb) {
  const auto loaded = load_library(dir);
  std::ifstream is(dir / "manifest.json");
  const Json manifest = Json::parse(is);
  const auto alpha = wb.prior().alpha();

  PolicyStore store;
  for (std::size_t i = 0; i < loaded.library.size(); ++i) {
    const auto& entry = loaded.library[i];
    // Counts are recovered exactly: alpha + m is exact in double for integer m < 2^53.
    TransitionCounts counts(kNumStates, kNumActions);
    const auto p = entry.params.data();
    if (p.size() != alpha.size()) throw ShapeMismatch("stored params do not match the T-domain");
    for (std::size_t s = 0; s < kNumStates; ++s) {
      for (std::size_t a = 0; a < kNumActions; ++a) {
        for (std::size_t sn = 0; sn < kNumStates; ++sn) {
          const std::size_t j = (s * kNumActions + a) * kNumStates + sn;
          const double m = p[j] - alpha[j];
          if (m < 0.0 || m != std::floor(m)) {
            throw FormatError("stored params are not prior + integer counts");
          }
          for (auto c = static_cast<std::uint64_t>(m); c > 0; --c) counts.increment(s, a, sn);
        }
      }
    }
    TrainedEnvironment t{entry.env, std::move(counts), entry.params, 0, 0, 0};
    const auto& me = manifest.at("entries").at(i);
    t.scenarios = me.value("scenarios", std::size_t{0});
    t.triplets = me.value("triplets", std::size_t{0});
    t.belief_resets = me.value("belief_resets", std::size_t{0});
    store.envs.push_back(std::move(t));
  }
  return store;
}

DirichletPolicyParams method_params(Method method, const EnvironmentState& test_env,
                                    std::span<const EnvironmentState> training_subset,
                                    const PolicyStore& store, const Workbench& wb) {
  if (method == Method::explicit_training) return store.at(test_env).params;
  if (contains(training_subset, test_env)) {
    throw InvalidSubset("test environment " + test_env.tag() + " is in the training subset");
  }
  if (training_subset.empty()) throw EmptyInput("training subset is empty");

  if (method == Method::entire_dataset) {
    std::vector<std::pair<DirichletPrior, TransitionCounts>> sets;
    for (const auto& e : training_subset) sets.emplace_back(wb.prior(), store.at(e).counts);
    return pooled_policy(sets);
  }
  ExperienceLibrary lib;
  for (const auto& e : training_subset) lib.add(e, store.at(e).params);
  if (method == Method::nearest_neighbor) return nearest_neighbor_policy(test_env, lib);
  return filter_policy(test_env, lib, wb.config().kernel);
}

namespace {

std::vector<RunMetrics> run_trials(const QMatrix& q, const PomdpModel& model,
                                   const EnvironmentState& test_env, const Workbench& wb) {
  const auto& plan = wb.config().plan;
  std::vector<RunMetrics> out;
  out.reserve(plan.eval_trials_per_env);
  for (std::size_t k = 0; k < plan.eval_trials_per_env; ++k) {
    const auto cfg = wb.scenario(test_env, eval_seed(plan.master_seed, test_env.index(), k));
    out.push_back(run_scenario(cfg, q, model).metrics);
  }
  return out;
}

}  // namespace

std::vector<RunMetrics> evaluate_method(Method method, const EnvironmentState& test_env,
                                        std::span<const EnvironmentState> training_subset,
                                        const PolicyStore& store, const Workbench& wb) {
  const auto params = method_params(method, test_env, training_subset, store, wb);
  const auto model = wb.model_for(params);
  const auto q = solve_qmdp(model, wb.config().solver);
  return run_trials(q, model, test_env, wb);
}

std::vector<EnvironmentState> draw_training_subset(const ExperimentPlan& plan, std::size_t effort,
                                                   std::size_t draw) {
  if (effort == 0 || effort >= plan.all_envs.size()) {
    throw InvalidSubset("effort " + std::to_string(effort) + " leaves no test environment");
  }
  Rng rng(derive_seed(plan.master_seed, {kSubsetStream, effort, draw}));
  std::vector<std::size_t> order(plan.all_envs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates with our own uniform draws keeps the subset portable.
  for (std::size_t i = 0; i < effort; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) *
                                                       static_cast<double>(order.size() - i));
    std::swap(order[i], order[std::min(j, order.size() - 1)]);
  }
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(effort));
  std::vector<EnvironmentState> subset;
  for (std::size_t i = 0; i < effort; ++i) subset.push_back(plan.all_envs[order[i]]);
  return subset;
}

AggregateResult normalize_and_aggregate(std::span<const TrialRecord> records) {
  if (records.empty()) throw EmptyResults("no trial records to aggregate");
  AggregateResult out;
  for (const auto& r : records) {
    const auto v = metric_values(r.metrics);
    for (std::size_t k = 0; k < kNumMetrics; ++k) out.max[k] = std::max(out.max[k], v[k]);
  }

  std::vector<std::size_t> efforts;
  for (const auto& r : records) {
    if (r.method != Method::explicit_training) efforts.push_back(r.effort);
  }
  std::sort(efforts.begin(), efforts.end());
  efforts.erase(std::unique(efforts.begin(), efforts.end()), efforts.end());
  if (efforts.empty()) efforts.push_back(0);

  using Key = std::tuple<int, std::size_t, std::size_t>;  // method, effort, draw
  std::map<Key, std::vector<std::array<double, kNumMetrics>>> by_draw;
  std::map<std::pair<int, std::size_t>, std::vector<std::array<double, kNumMetrics>>> by_effort;
  for (const auto& r : records) {
    auto v = metric_values(r.metrics);
    for (std::size_t k = 0; k < kNumMetrics; ++k) v[k] = out.max[k] > 0.0 ? v[k] / out.max[k] : 0.0;
    const int m = static_cast<int>(r.method);
    if (r.method == Method::explicit_training) {
      for (std::size_t e : efforts) {
        by_draw[{m, e, r.draw}].push_back(v);
        by_effort[{m, e}].push_back(v);
      }
    } else {
      by_draw[{m, r.effort, r.draw}].push_back(v);
      by_effort[{m, r.effort}].push_back(v);
    }
  }

  auto summarise = [](const std::vector<std::array<double, kNumMetrics>>& xs, ResultRow& row) {
    row.trials = xs.size();
    const auto n = static_cast<double>(xs.size());
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
      double sum = 0.0;
      for (const auto& x : xs) sum += x[k];
      const double mean = sum / n;
      double ss = 0.0;
      for (const auto& x : xs) ss += (x[k] - mean) * (x[k] - mean);
      row.mean[k] = mean;
      row.std_error[k] = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    }
  };

  for (const auto& [key, xs] : by_draw) {
    ResultRow row;
    row.method = static_cast<Method>(std::get<0>(key));
    row.effort = std::get<1>(key);
    row.draw = std::get<2>(key);
    summarise(xs, row);
    out.by_draw.push_back(row);
  }
  for (const auto& [key, xs] : by_effort) {
    ResultRow row;
    row.method = static_cast<Method>(key.first);
    row.effort = key.second;
    summarise(xs, row);
    out.by_effort.push_back(row);
  }
  return out;
}

std::vector<TrialRecord> run_sweep(const PolicyStore& store, const Workbench& wb,
                                   const SweepOptions& opts) {
  const auto& plan = wb.config().plan;
  struct Job {
    Method method;
    std::size_t effort;
    std::size_t draw;
    EnvironmentState test_env;
    std::vector<EnvironmentState> subset;
  };
  std::vector<Job> jobs;
  const bool want_explicit = std::find(opts.methods.begin(), opts.methods.end(),
                                       Method::explicit_training) != opts.methods.end();
  for (std::size_t effort : opts.efforts) {
    for (std::size_t d = 0; d < plan.subset_draws; ++d) {
      const auto subset = draw_training_subset(plan, effort, d);
      for (const auto& env : plan.all_envs) {
        if (contains(subset, env)) continue;
        for (Method m : opts.methods) {
          if (m == Method::explicit_training) continue;
          jobs.push_back({m, effort, d, env, subset});
        }
      }
    }
  }
  if (want_explicit) {
    for (const auto& env : plan.all_envs) {
      jobs.push_back({Method::explicit_training, 0, 0, env, {}});
    }
  }

  std::vector<std::vector<RunMetrics>> results(jobs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (opts.parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i) {
    try {
      const auto& job = jobs[static_cast<std::size_t>(i)];
      results[static_cast<std::size_t>(i)] =
          evaluate_method(job.method, job.test_env, job.subset, store, wb);
    } catch (...) {
#pragma omp critical(ef_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<TrialRecord> records;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    for (std::size_t k = 0; k < results[i].size(); ++k) {
      records.push_back({job.method, job.effort, job.draw, job.test_env, k,
                         eval_seed(plan.master_seed, job.test_env.index(), k), results[i][k]});
    }
  }
  return records;
}

void write_raw_csv(std::ostream& os, std::span<const TrialRecord> records) {
  os << "method,effort,draw,env_id,trial,seed,collision_risk,discomfort,time_taken,collided,"
        "timeout\n";
  for (const auto& r : records) {
    os << to_string(r.method) << ',' << r.effort << ',' << r.draw << ',' << r.test_env.tag() << ','
       << r.trial << ',' << r.seed << ',' << fmt(r.metrics.collision_risk) << ','
       << fmt(r.metrics.discomfort) << ',' << fmt(r.metrics.time_taken) << ','
       << int{r.metrics.collided} << ',' << int{r.metrics.timeout} << '\n';
  }
}

std::vector<TrialRecord> read_raw_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("raw CSV is empty");
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw FormatError("raw CSV line has " + std::to_string(f.size()) + " fields");
    TrialRecord r;
    r.method = parse_method(f[0]);
    r.effort = std::stoul(f[1]);
    r.draw = std::stoul(f[2]);
    r.test_env = EnvironmentState::from_tag(f[3]);
    r.trial = std::stoul(f[4]);
    r.seed = std::stoull(f[5]);
    r.metrics.collision_risk = std::stod(f[6]);
    r.metrics.discomfort = std::stod(f[7]);
    r.metrics.time_taken = std::stod(f[8]);
    r.metrics.collided = f[9] == "1";
    r.metrics.timeout = f[10] == "1";
    out.push_back(r);
  }
  return out;
}

void write_aggregate_csv(std::ostream& os, std::span<const ResultRow> rows) {
  os << "method,effort,draw,trials,collision_risk_mean,collision_risk_se,discomfort_mean,"
        "discomfort_se,time_taken_mean,time_taken_se\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << r.effort << ',' << (r.draw ? std::to_string(*r.draw) : "all")
       << ',' << r.trials;
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
      os << ',' << fmt(r.mean[k]) << ',' << fmt(r.std_error[k]);
    }
    os << '\n';
  }
}

void write_markdown_summary(std::ostream& os, const AggregateResult& result) {
  os << "| Method | Training effort | Trials | Collision risk | Discomfort | Time taken |\n";
  os << "|---|---:|---:|---:|---:|---:|\n";
  os << std::fixed << std::setprecision(4);
  for (Method m : kAllMethods) {
    for (const auto& r : result.by_effort) {
      if (r.method != m) continue;
      os << "| " << to_string(m) << " | " << r.effort << " | " << r.trials;
      for (std::size_t k = 0; k < kNumMetrics; ++k) {
        os << " | " << r.mean[k] << " ± " << r.std_error[k];
      }
      os << " |\n";
    }
  }
  os << "\nValues are normalised by the largest value over all trials; ± is the standard "
        "error of the mean. Lower is better for every metric.\n";
  os.unsetf(std::ios::fixed);
}

const ResultRow* find_row(const AggregateResult& result, Method method, std::size_t effort) {
  for (const auto& r : result.by_effort) {
    if (r.method == method && r.effort == effort) return &r;
  }
  return nullptr;
}

}  // namespace ef
