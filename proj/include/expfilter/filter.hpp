#pragma once

// Zero-shot policy transfer: kernel-weighted blending of Dirichlet policy parameters,
// plus the nearest-neighbour and pooled-dataset baselines.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "expfilter/environment.hpp"
#include "expfilter/learner.hpp"

namespace ef {

/// Gaussian experience kernel sigma^2 exp(-|dx|^2 / (2 l^2)); the normaliser is applied
/// over the library, not stored.
struct KernelConfig {
  double sigma = 1.0;
  double lengthscale = 0.5;

  void validate() const;
};

struct LibraryEntry {
  EnvironmentState env;
  DirichletPolicyParams params;
};

/// Policies of visited environments. Entries share one params shape and carry
/// distinct environment states.
class ExperienceLibrary {
 public:
  ExperienceLibrary() = default;
  explicit ExperienceLibrary(std::vector<LibraryEntry> entries);

  void add(EnvironmentState env, DirichletPolicyParams params);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const LibraryEntry& operator[](std::size_t i) const { return entries_[i]; }
  std::span<const LibraryEntry> entries() const { return entries_; }

 private:
  std::vector<LibraryEntry> entries_;
};

double squared_distance(const EnvironmentState& x, const EnvironmentState& y);

/// Unnormalised kernel value.
double kernel_raw(const EnvironmentState& x_n, const EnvironmentState& x_k,
                  const KernelConfig& cfg);

/// Kernel values against every library entry, divided by their sum.
std::vector<double> kernel_weights(const EnvironmentState& x, const ExperienceLibrary& lib,
                                   const KernelConfig& cfg);

/// Elementwise convex combination of params with the given weights.
DirichletPolicyParams blend_params(std::span<const double> weights, const ExperienceLibrary& lib);

/// Experience filter: sum_i w_i(x) par_i.
DirichletPolicyParams filter_policy(const EnvironmentState& x, const ExperienceLibrary& lib,
                                    const KernelConfig& cfg);

/// Params of the entry closest in embedding space (lowest index on ties).
DirichletPolicyParams nearest_neighbor_policy(const EnvironmentState& x,
                                              const ExperienceLibrary& lib);

/// alpha + sum of every environment's counts, under the first entry's prior.
/// All priors must be identical.
DirichletPolicyParams pooled_policy(
    std::span<const std::pair<DirichletPrior, TransitionCounts>> count_sets);

namespace serial {

DirichletPolicyParams blend_params(std::span<const double> weights, const ExperienceLibrary& lib);

}  // namespace serial

}  // namespace ef
