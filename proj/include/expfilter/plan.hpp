#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "expfilter/environment.hpp"

namespace ef {

struct ExperimentPlan {
  std::vector<EnvironmentState> all_envs = EnvironmentState::all();
  std::vector<std::size_t> training_efforts{3, 6, 9, 12, 15};
  std::size_t scenarios_per_env = 101;
  std::size_t eval_trials_per_env = 50;
  std::size_t subset_draws = 5;
  std::uint64_t master_seed = 20221;

  /// Every effort must leave at least one environment out.
  void validate() const;
};

}  // namespace ef
