#pragma once

// Experiment pipeline: train one policy per environment, evaluate the experience filter
// and the baselines on held-out environments, normalise and aggregate.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "expfilter/filter.hpp"
#include "expfilter/io.hpp"
#include "expfilter/learner.hpp"
#include "expfilter/plan.hpp"
#include "expfilter/pomdp.hpp"
#include "expfilter/simulator.hpp"

namespace ef {

enum class Method { experience_filter, entire_dataset, nearest_neighbor, explicit_training };

inline constexpr std::array<Method, 4> kAllMethods{
    Method::experience_filter, Method::entire_dataset, Method::nearest_neighbor,
    Method::explicit_training};

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

// Seed streams. A job's scenario seed is derive_seed(master_seed, {stream, ...ids}).
inline constexpr std::uint64_t kTrainStream = 1;   // {env index, scenario}
inline constexpr std::uint64_t kEvalStream = 2;    // {env index, trial}
inline constexpr std::uint64_t kSubsetStream = 3;  // {effort, draw}

std::uint64_t train_seed(std::uint64_t master, std::size_t env_index, std::size_t scenario);
/// Independent of method, effort and draw, so every method faces the same traffic.
std::uint64_t eval_seed(std::uint64_t master, std::size_t env_index, std::size_t trial);

/// Z, R and the bootstrap (prior-mean) policy shared by every run.
class Workbench {
 public:
  explicit Workbench(ToolkitConfig cfg);

  const ToolkitConfig& config() const { return cfg_; }
  const DirichletPrior& prior() const { return prior_; }
  /// Prior-mean transitions with the known Z and R; also the tracking model for learning.
  const PomdpModel& bootstrap_model() const { return bootstrap_model_; }
  const QMatrix& bootstrap_q() const { return bootstrap_q_; }

  PomdpModel model_for(const DirichletPolicyParams& params) const;
  ScenarioConfig scenario(const EnvironmentState& env, std::uint64_t seed) const;

 private:
  ToolkitConfig cfg_;
  DirichletPrior prior_;
  PomdpModel bootstrap_model_;
  QMatrix bootstrap_q_;
};

struct TrainedEnvironment {
  EnvironmentState env;
  TransitionCounts counts;
  DirichletPolicyParams params;
  std::size_t scenarios = 0;
  std::size_t triplets = 0;
  std::size_t belief_resets = 0;
};

struct PolicyStore {
  std::vector<TrainedEnvironment> envs;  // plan.all_envs order

  const TrainedEnvironment& at(const EnvironmentState& env) const;
};

/// Collects scenarios_per_env scenarios per environment under the bootstrap policy and
/// learns each environment's params. Environments are processed in parallel.
/// If `logs` is given it receives every environment's scenario logs.
PolicyStore train_all(const Workbench& wb,
                      std::vector<std::vector<ScenarioLog>>* logs = nullptr);

/// Store directory: <tag>.efp per environment plus manifest.json.
void save_store(const std::filesystem::path& dir, const PolicyStore& store, const Workbench& wb);
PolicyStore load_store(const std::filesystem::path& dir, const Workbench& wb);

/// Params each method deploys on `test_env` given the training subset.
DirichletPolicyParams method_params(Method method, const EnvironmentState& test_env,
                                    std::span<const EnvironmentState> training_subset,
                                    const PolicyStore& store, const Workbench& wb);

/// Solves the method's policy and runs eval_trials_per_env scenarios on test_env.
/// Throws InvalidSubset if test_env is in the subset (except for explicit training).
std::vector<RunMetrics> evaluate_method(Method method, const EnvironmentState& test_env,
                                        std::span<const EnvironmentState> training_subset,
                                        const PolicyStore& store, const Workbench& wb);

/// Random subsets of plan.all_envs, drawn without replacement from the master seed.
std::vector<EnvironmentState> draw_training_subset(const ExperimentPlan& plan, std::size_t effort,
                                                   std::size_t draw);

struct TrialRecord {
  Method method = Method::experience_filter;
  std::size_t effort = 0;  // 0 for explicit training
  std::size_t draw = 0;
  EnvironmentState test_env;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  RunMetrics metrics;
};

inline constexpr std::size_t kNumMetrics = 3;  // collision_risk, discomfort, time_taken

struct ResultRow {
  Method method = Method::experience_filter;
  std::size_t effort = 0;
  std::optional<std::size_t> draw;  // empty for rows pooled over draws
  std::size_t trials = 0;
  std::array<double, kNumMetrics> mean{};
  std::array<double, kNumMetrics> std_error{};
};

struct AggregateResult {
  std::array<double, kNumMetrics> max{};  // normalisers
  std::vector<ResultRow> by_draw;         // (method, effort, draw)
  std::vector<ResultRow> by_effort;       // (method, effort), draws pooled
};

/// Divides every metric by its maximum over all trials of all methods, then averages.
/// Explicit-training trials are replicated into every effort present in the records.
AggregateResult normalize_and_aggregate(std::span<const TrialRecord> records);

struct SweepOptions {
  std::vector<std::size_t> efforts;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  bool parallel = true;
};

/// Every (method, effort, draw, held-out env) job, trials in a fixed order.
std::vector<TrialRecord> run_sweep(const PolicyStore& store, const Workbench& wb,
                                   const SweepOptions& opts);

void write_raw_csv(std::ostream& os, std::span<const TrialRecord> records);
std::vector<TrialRecord> read_raw_csv(std::istream& is);
void write_aggregate_csv(std::ostream& os, std::span<const ResultRow> rows);
void write_markdown_summary(std::ostream& os, const AggregateResult& result);

/// Row lookup in AggregateResult::by_effort.
const ResultRow* find_row(const AggregateResult& result, Method method, std::size_t effort);

}  // namespace ef
