#pragma once

// File formats.
//
// Scenario logs (text, UTF-8): a header row then one triplet per line,
//   scenario_id,channel_id,t,o_t,a_t,o_t+1
// where t is the absolute tick of o_t. Lines of one channel are consecutive and ordered
// by t.
//
// Policy params (binary, little-endian):
//   char[8]  magic "EFPARAMS"
//   u32      version (1)
//   u32      n_states, u32 n_actions
//   u8       has_env, u8 visibility, u8 density, u8 behavior
//   f64[n_states * n_actions * n_states]  alpha + m in [s][a][s'] order
//
// Experience library: a directory holding one params file per entry and manifest.json
//   {"kernel": {"sigma": .., "lengthscale": ..},
//    "entries": [{"file": "..", "visibility": "yes", "density": "low", "behavior": "normal"}]}

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "expfilter/filter.hpp"
#include "expfilter/learner.hpp"
#include "expfilter/plan.hpp"
#include "expfilter/pomdp.hpp"
#include "expfilter/simulator.hpp"
#include "expfilter/tdomain.hpp"

namespace ef {

using Json = nlohmann::json;

// PomdpModel as nested row-major arrays with keys n_states, n_actions, n_observations,
// transition, observation, reward, discount.
Json model_to_json(const PomdpModel& model);
PomdpModel model_from_json(const Json& j);

void write_scenario_logs(std::ostream& os, std::span<const ScenarioLog> logs);
std::vector<ScenarioLog> read_scenario_logs(std::istream& is);

void write_params(std::ostream& os, const DirichletPolicyParams& params);
DirichletPolicyParams read_params(std::istream& is);
void save_params(const std::filesystem::path& path, const DirichletPolicyParams& params);
DirichletPolicyParams load_params(const std::filesystem::path& path);

struct LoadedLibrary {
  ExperienceLibrary library;
  KernelConfig kernel;
};

/// Writes every entry as <tag>.efp next to manifest.json.
void save_library(const std::filesystem::path& dir, const ExperienceLibrary& lib,
                  const KernelConfig& kernel);
LoadedLibrary load_library(const std::filesystem::path& dir);

/// Every tunable with its default: noise, reward, discount, simulator, kernel, solver,
/// experiment plan. Keys missing from a config file keep their defaults.
struct ToolkitConfig {
  NoiseConfig noise;
  RewardSpec reward;
  double discount = kDefaultDiscount;
  SimulatorSettings simulator;
  KernelConfig kernel;
  SolverOptions solver;
  double prior_alpha = 1.0;
  double train_explore = 0.3;
  double train_explore_hold = 4.0;
  ExperimentPlan plan;

  void validate() const;
};

Json config_to_json(const ToolkitConfig& cfg);
ToolkitConfig config_from_json(const Json& j);
ToolkitConfig load_config(const std::filesystem::path& path);

}  // namespace ef
