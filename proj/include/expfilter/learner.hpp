#pragma once

// Dirichlet transition learning from logged observation triplets.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "expfilter/environment.hpp"
#include "expfilter/pomdp.hpp"

namespace ef {

/// Dirichlet pseudo-counts alpha[s][a][s'].
class DirichletPrior {
 public:
  DirichletPrior(std::size_t n_states, std::size_t n_actions, std::vector<double> alpha);

  /// Every entry equal to `value` (Laplace smoothing for value = 1).
  static DirichletPrior uniform(std::size_t n_states, std::size_t n_actions, double value = 1.0);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::span<const double> alpha() const { return alpha_; }

  /// Row-normalised prior, laid out as a PomdpModel transition array [a][s][s'].
  std::vector<double> mean_transition() const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> alpha_;
};

/// Likelihood pseudo-counts m[s][a][s'].
class TransitionCounts {
 public:
  TransitionCounts(std::size_t n_states, std::size_t n_actions);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  std::uint64_t operator()(std::size_t s, std::size_t a, std::size_t s_next) const {
    return m_[(s * n_actions_ + a) * n_states_ + s_next];
  }
  void increment(std::size_t s, std::size_t a, std::size_t s_next);
  std::span<const std::uint64_t> data() const { return m_; }
  std::uint64_t total() const { return total_; }

  /// Elementwise sum, the merge for thread-local count arrays.
  TransitionCounts& operator+=(const TransitionCounts& other);

  bool operator==(const TransitionCounts&) const = default;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<std::uint64_t> m_;
  std::uint64_t total_ = 0;
};

struct Triplet {
  std::uint32_t obs = 0;       // o_t
  std::uint32_t action = 0;    // a_t
  std::uint32_t obs_next = 0;  // o_{t+1}

  bool operator==(const Triplet&) const = default;
};

/// Time-ordered triplets from the POMDP instance tracking one rival.
struct RivalChannel {
  std::uint32_t id = 0;
  std::uint32_t start_tick = 0;
  std::vector<Triplet> triplets;

  bool operator==(const RivalChannel&) const = default;
};

struct ScenarioLog {
  std::uint64_t scenario_id = 0;
  std::uint32_t duration = 0;  // ticks
  std::vector<RivalChannel> channels;

  std::size_t triplet_count() const;
  /// Throws FormatError if consecutive triplets in a channel do not chain.
  void check_contiguity() const;

  bool operator==(const ScenarioLog&) const = default;
};

/// par(pi*): posterior pseudo-counts alpha + m, laid out [s][a][s'].
class DirichletPolicyParams {
 public:
  DirichletPolicyParams(std::size_t n_states, std::size_t n_actions, std::vector<double> params,
                        std::optional<EnvironmentState> source_env = std::nullopt);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t size() const { return params_.size(); }
  std::span<const double> data() const { return params_; }
  double operator()(std::size_t s, std::size_t a, std::size_t s_next) const {
    return params_[(s * n_actions_ + a) * n_states_ + s_next];
  }

  const std::optional<EnvironmentState>& source_env() const { return source_env_; }
  void set_source_env(std::optional<EnvironmentState> env) { source_env_ = env; }

  bool same_shape(const DirichletPolicyParams& other) const {
    return n_states_ == other.n_states_ && n_actions_ == other.n_actions_;
  }

  bool operator==(const DirichletPolicyParams&) const = default;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> params_;
  std::optional<EnvironmentState> source_env_;
};

struct IngestStats {
  std::size_t triplets = 0;
  std::size_t belief_resets = 0;  // zero-likelihood observations
};

/// Runs a Bayes filter over every channel with `tracking_model`, replaces each belief by
/// its most likely state and tallies (s~_t, a_t, s~_{t+1}) into `counts`.
///
/// Per channel the belief starts uniform. The first triplet's o_t is folded in with a
/// full filter step using a_t; afterwards each step consumes (a_t, o_{t+1}).
TransitionCounts ingest_scenario(const ScenarioLog& log, const DirichletPrior& prior,
                                 const PomdpModel& tracking_model, TransitionCounts counts,
                                 IngestStats* stats = nullptr);

/// alpha + m.
DirichletPolicyParams posterior(const DirichletPrior& prior, const TransitionCounts& counts);

/// Posterior mean, row-normalised, as a PomdpModel transition array [a][s][s'].
std::vector<double> mean_transition(const DirichletPolicyParams& params);

/// Sum of counts over the dataset (no prior).
TransitionCounts count_transitions(std::span<const ScenarioLog> dataset,
                                   const DirichletPrior& prior, const PomdpModel& tracking_model,
                                   IngestStats* stats = nullptr);

DirichletPolicyParams learn_policy_params(std::span<const ScenarioLog> dataset,
                                          const DirichletPrior& prior,
                                          const PomdpModel& tracking_model,
                                          IngestStats* stats = nullptr);

}  // namespace ef
