#include "expfilter/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ef {

namespace {

// Below this many multiply-adds per sweep the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 16;

void check_rows(const std::vector<double>& data, std::size_t n_rows, std::size_t row_len,
                const char* what) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    double sum = 0.0;
    for (std::size_t j = 0; j < row_len; ++j) {
      const double p = data[r * row_len + j];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw InvalidModel(std::string(what) + " has a negative or non-finite entry in row " +
                           std::to_string(r));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      throw InvalidModel(std::string(what) + " row " + std::to_string(r) + " sums to " +
                         std::to_string(sum));
    }
  }
}

void check_action(const PomdpModel& model, std::size_t a, std::size_t o) {
  if (a >= model.n_actions()) throw IndexOutOfRange("action index " + std::to_string(a));
  if (o >= model.n_observations()) {
    throw IndexOutOfRange("observation index " + std::to_string(o));
  }
}

// Multiplies the predicted distribution by the observation likelihood and normalises.
// Returns false when every numerator term is zero.
bool correct(std::vector<double>& dist, std::size_t a, std::size_t o, const PomdpModel& model) {
  double total = 0.0;
  for (std::size_t s = 0; s < dist.size(); ++s) {
    dist[s] *= model.observation(a, s, o);
    total += dist[s];
  }
  if (!(total > 0.0)) return false;
  for (double& p : dist) p /= total;
  return true;
}

std::vector<double> predict_serial(const Belief& b, std::size_t a, const PomdpModel& model) {
  const std::size_t n = model.n_states();
  std::vector<double> pred(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double w = b[s];
    if (w == 0.0) continue;
    const auto row = model.transition_row(a, s);
    for (std::size_t sn = 0; sn < n; ++sn) pred[sn] += w * row[sn];
  }
  return pred;
}

std::vector<double> predict(const Belief& b, std::size_t a, const PomdpModel& model) {
  const std::size_t n = model.n_states();
  if (n * n < kParallelWork) return predict_serial(b, a, model);

  // Column-wise accumulation in ascending s keeps the result bitwise equal to the
  // row-wise serial kernel.
  std::vector<double> pred(n, 0.0);
  const auto probs = b.probs();
  const auto t = model.transition_data();
  const std::size_t base = a * n * n;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t sn = 0; sn < static_cast<std::ptrdiff_t>(n); ++sn) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (probs[s] == 0.0) continue;
      acc += probs[s] * t[base + s * n + static_cast<std::size_t>(sn)];
    }
    pred[static_cast<std::size_t>(sn)] = acc;
  }
  return pred;
}

void check_belief_shape(const Belief& b, const PomdpModel& model) {
  if (b.size() != model.n_states()) {
    throw ShapeMismatch("belief has " + std::to_string(b.size()) + " entries, model has " +
                        std::to_string(model.n_states()) + " states");
  }
}

// One synchronous Bellman sweep over all (a, s) rows.
template <bool Parallel>
QMatrix value_iteration(const PomdpModel& model, SolverOptions opts) {
  if (!(opts.tol > 0.0)) throw Error("solver tolerance must be positive");
  const std::size_t ns = model.n_states();
  const std::size_t na = model.n_actions();
  const double gamma = model.discount();

  QMatrix out;
  out.n_states = ns;
  out.n_actions = na;
  out.q.assign(ns * na, 0.0);
  std::vector<double> next(ns * na, 0.0);
  std::vector<double> value(ns, 0.0);

  const auto t = model.transition_data();
  const auto r = model.reward_data();
  const bool go_parallel = Parallel && ns * ns * na >= kParallelWork;

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    for (std::size_t s = 0; s < ns; ++s) {
      double best = out.q[s * na];
      for (std::size_t a = 1; a < na; ++a) best = std::max(best, out.q[s * na + a]);
      value[s] = best;
    }

    const auto rows = static_cast<std::ptrdiff_t>(ns * na);
    double residual = 0.0;
#pragma omp parallel for schedule(static) reduction(max : residual) if (go_parallel)
    for (std::ptrdiff_t idx = 0; idx < rows; ++idx) {
      const std::size_t s = static_cast<std::size_t>(idx) / na;
      const std::size_t a = static_cast<std::size_t>(idx) % na;
      const double* row = t.data() + (a * ns + s) * ns;
      double expect = 0.0;
      for (std::size_t sn = 0; sn < ns; ++sn) expect += row[sn] * value[sn];
      const double updated = r[s * na + a] + gamma * expect;
      next[static_cast<std::size_t>(idx)] = updated;
      residual = std::max(residual, std::abs(updated - out.q[static_cast<std::size_t>(idx)]));
    }

    out.q.swap(next);
    out.iterations = it + 1;
    out.residual = residual;
    if (residual <= opts.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace

PomdpModel::PomdpModel(std::size_t n_states, std::size_t n_actions, std::size_t n_observations,
                       std::vector<double> transition, std::vector<double> observation,
                       std::vector<double> reward, double discount)
    : n_states_(n_states),
      n_actions_(n_actions),
      n_observations_(n_observations),
      transition_(std::move(transition)),
      observation_(std::move(observation)),
      reward_(std::move(reward)),
      discount_(discount) {
  if (n_states_ == 0 || n_actions_ == 0 || n_observations_ == 0) {
    throw InvalidModel("model dimensions must be positive");
  }
  if (transition_.size() != n_actions_ * n_states_ * n_states_) {
    throw ShapeMismatch("transition array has wrong size");
  }
  if (observation_.size() != n_actions_ * n_states_ * n_observations_) {
    throw ShapeMismatch("observation array has wrong size");
  }
  if (reward_.size() != n_states_ * n_actions_) throw ShapeMismatch("reward array has wrong size");
  if (!(discount_ >= 0.0 && discount_ <= 1.0)) throw InvalidModel("discount must lie in [0, 1]");
  for (double v : reward_) {
    if (!std::isfinite(v)) throw InvalidModel("reward has a non-finite entry");
  }
  check_rows(transition_, n_actions_ * n_states_, n_states_, "transition");
  check_rows(observation_, n_actions_ * n_states_, n_observations_, "observation");
}

Belief::Belief(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error("belief must have at least one state");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error("belief has a negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance) {
    throw Error("belief sums to " + std::to_string(sum));
  }
}

Belief Belief::uniform(std::size_t n_states) {
  return Belief(std::vector<double>(n_states, 1.0 / static_cast<double>(n_states)));
}

Belief belief_update(const Belief& b, std::size_t a, std::size_t o, const PomdpModel& model) {
  check_belief_shape(b, model);
  check_action(model, a, o);
  auto dist = predict(b, a, model);
  if (!correct(dist, a, o, model)) {
    throw ZeroLikelihood("observation " + std::to_string(o) + " has zero likelihood after action " +
                         std::to_string(a));
  }
  return Belief(std::move(dist));
}

FilterStep belief_update_or_reset(const Belief& b, std::size_t a, std::size_t o,
                                  const PomdpModel& model) {
  try {
    return {belief_update(b, a, o, model), false};
  } catch (const ZeroLikelihood&) {
    return {Belief::uniform(model.n_states()), true};
  }
}

FilterStep belief_condition(const Belief& prior, std::size_t a, std::size_t o,
                            const PomdpModel& model) {
  check_belief_shape(prior, model);
  check_action(model, a, o);
  std::vector<double> dist(prior.probs().begin(), prior.probs().end());
  if (!correct(dist, a, o, model)) return {Belief::uniform(model.n_states()), true};
  return {Belief(std::move(dist)), false};
}

QMatrix solve_qmdp(const PomdpModel& model, SolverOptions opts) {
  return value_iteration<true>(model, opts);
}

std::size_t best_action(const QMatrix& q, const Belief& b) {
  if (b.size() != q.n_states) throw ShapeMismatch("belief and Q matrix disagree on state count");
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t a = 0; a < q.n_actions; ++a) {
    double v = 0.0;
    for (std::size_t s = 0; s < q.n_states; ++s) {
      if (b[s] != 0.0) v += b[s] * q(s, a);
    }
    if (a == 0 || v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

std::size_t most_likely_state(const Belief& b) {
  const auto p = b.probs();
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace serial {

QMatrix solve_qmdp(const PomdpModel& model, SolverOptions opts) {
  return value_iteration<false>(model, opts);
}

Belief belief_update(const Belief& b, std::size_t a, std::size_t o, const PomdpModel& model) {
  check_belief_shape(b, model);
  check_action(model, a, o);
  auto dist = predict_serial(b, a, model);
  if (!correct(dist, a, o, model)) {
    throw ZeroLikelihood("observation " + std::to_string(o) + " has zero likelihood");
  }
  return Belief(std::move(dist));
}

}  // namespace serial

}  // namespace ef
