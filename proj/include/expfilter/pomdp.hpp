#pragma once

// Tabular POMDP model, discrete Bayes filter and the QMDP offline solver.

#include <cstddef>
#include <span>
#include <vector>

#include "expfilter/errors.hpp"

namespace ef {

inline constexpr double kStochasticTolerance = 1e-9;

/// Dense tabular POMDP <S, A, O, T, Z, R, gamma>.
///
/// Storage is row-major:
///   transition  [a][s][s']
///   observation [a][s'][o]
///   reward      [s][a]
/// The model is validated on construction and immutable afterwards.
class PomdpModel {
 public:
  PomdpModel(std::size_t n_states, std::size_t n_actions, std::size_t n_observations,
             std::vector<double> transition, std::vector<double> observation,
             std::vector<double> reward, double discount);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_observations() const { return n_observations_; }
  double discount() const { return discount_; }

  double transition(std::size_t a, std::size_t s, std::size_t s_next) const {
    return transition_[(a * n_states_ + s) * n_states_ + s_next];
  }
  double observation(std::size_t a, std::size_t s_next, std::size_t o) const {
    return observation_[(a * n_states_ + s_next) * n_observations_ + o];
  }
  double reward(std::size_t s, std::size_t a) const { return reward_[s * n_actions_ + a]; }

  std::span<const double> transition_row(std::size_t a, std::size_t s) const {
    return {transition_.data() + (a * n_states_ + s) * n_states_, n_states_};
  }

  std::span<const double> transition_data() const { return transition_; }
  std::span<const double> observation_data() const { return observation_; }
  std::span<const double> reward_data() const { return reward_; }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t n_observations_;
  std::vector<double> transition_;
  std::vector<double> observation_;
  std::vector<double> reward_;
  double discount_;
};

/// Probability distribution over states.
class Belief {
 public:
  explicit Belief(std::vector<double> probs);

  static Belief uniform(std::size_t n_states);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t s) const { return probs_[s]; }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Q(s, a) table produced by the QMDP solver.
struct QMatrix {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> q;  // [s][a]
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;  // sup-norm of the last Bellman update

  double operator()(std::size_t s, std::size_t a) const { return q[s * n_actions + a]; }
};

struct SolverOptions {
  double tol = 1e-6;
  std::size_t max_iter = 10000;
};

/// b'(s') ∝ Z(o|s',a) Σ_s T(s'|s,a) b(s). Throws ZeroLikelihood when the normaliser is 0.
Belief belief_update(const Belief& b, std::size_t a, std::size_t o, const PomdpModel& model);

struct FilterStep {
  Belief belief;
  bool reset = false;  // true when the observation was impossible and the belief was reset
};

/// Same as belief_update, but an impossible observation resets to the uniform belief
/// instead of throwing. The caller is responsible for logging `reset`.
FilterStep belief_update_or_reset(const Belief& b, std::size_t a, std::size_t o,
                                  const PomdpModel& model);

/// Conditions a prior on a first observation without a transition step.
FilterStep belief_condition(const Belief& prior, std::size_t a, std::size_t o,
                            const PomdpModel& model);

/// Value iteration on the underlying MDP, starting from Q = 0. Rows are backed up in
/// parallel. If the residual never drops to tol, the last iterate is returned with
/// converged = false.
QMatrix solve_qmdp(const PomdpModel& model, SolverOptions opts = {});

/// argmax_a Σ_s b(s) Q(s,a), lowest action index wins ties.
std::size_t best_action(const QMatrix& q, const Belief& b);

/// argmax_s b(s), lowest state index wins ties.
std::size_t most_likely_state(const Belief& b);

namespace serial {

// Single-threaded reference kernels. Kept for testing the parallel paths.
QMatrix solve_qmdp(const PomdpModel& model, SolverOptions opts = {});
Belief belief_update(const Belief& b, std::size_t a, std::size_t o, const PomdpModel& model);

}  // namespace serial

}  // namespace ef
