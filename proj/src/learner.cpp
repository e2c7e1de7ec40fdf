#include "expfilter/learner.hpp"

#include <exception>
#include <string>

namespace ef {

DirichletPrior::DirichletPrior(std::size_t n_states, std::size_t n_actions,
                               std::vector<double> alpha)
    : n_states_(n_states), n_actions_(n_actions), alpha_(std::move(alpha)) {
  if (alpha_.size() != n_states_ * n_actions_ * n_states_) {
    throw ShapeMismatch("prior has wrong size");
  }
  for (std::size_t row = 0; row < n_states_ * n_actions_; ++row) {
    bool positive = false;
    for (std::size_t j = 0; j < n_states_; ++j) {
      const double v = alpha_[row * n_states_ + j];
      if (!(v >= 0.0)) throw Error("prior pseudo-counts must be non-negative");
      positive = positive || v > 0.0;
    }
    if (!positive) throw DegenerateRow("prior row " + std::to_string(row) + " has zero mass");
  }
}

DirichletPrior DirichletPrior::uniform(std::size_t n_states, std::size_t n_actions, double value) {
  return DirichletPrior(n_states, n_actions,
                        std::vector<double>(n_states * n_actions * n_states, value));
}

std::vector<double> DirichletPrior::mean_transition() const {
  return ef::mean_transition(DirichletPolicyParams(n_states_, n_actions_, alpha_));
}

TransitionCounts::TransitionCounts(std::size_t n_states, std::size_t n_actions)
    : n_states_(n_states), n_actions_(n_actions), m_(n_states * n_actions * n_states, 0) {}

void TransitionCounts::increment(std::size_t s, std::size_t a, std::size_t s_next) {
  if (s >= n_states_ || a >= n_actions_ || s_next >= n_states_) {
    throw IndexOutOfRange("count index out of range");
  }
  ++m_[(s * n_actions_ + a) * n_states_ + s_next];
  ++total_;
}

TransitionCounts& TransitionCounts::operator+=(const TransitionCounts& other) {
  if (other.n_states_ != n_states_ || other.n_actions_ != n_actions_) {
    throw ShapeMismatch("count arrays differ in shape");
  }
  for (std::size_t i = 0; i < m_.size(); ++i) m_[i] += other.m_[i];
  total_ += other.total_;
  return *this;
}

std::size_t ScenarioLog::triplet_count() const {
  std::size_t n = 0;
  for (const auto& ch : channels) n += ch.triplets.size();
  return n;
}

void ScenarioLog::check_contiguity() const {
  for (const auto& ch : channels) {
    for (std::size_t t = 1; t < ch.triplets.size(); ++t) {
      if (ch.triplets[t].obs != ch.triplets[t - 1].obs_next) {
        throw FormatError("scenario " + std::to_string(scenario_id) + " channel " +
                          std::to_string(ch.id) + " breaks contiguity at step " +
                          std::to_string(t));
      }
    }
  }
}

DirichletPolicyParams::DirichletPolicyParams(std::size_t n_states, std::size_t n_actions,
                                             std::vector<double> params,
                                             std::optional<EnvironmentState> source_env)
    : n_states_(n_states),
      n_actions_(n_actions),
      params_(std::move(params)),
      source_env_(source_env) {
  if (params_.size() != n_states_ * n_actions_ * n_states_) {
    throw ShapeMismatch("policy params have " + std::to_string(params_.size()) +
                        " entries, expected " +
                        std::to_string(n_states_ * n_actions_ * n_states_));
  }
  for (double v : params_) {
    if (!(v >= 0.0)) throw Error("policy params must be non-negative");
  }
}

TransitionCounts ingest_scenario(const ScenarioLog& log, const DirichletPrior& prior,
                                 const PomdpModel& tracking_model, TransitionCounts counts,
                                 IngestStats* stats) {
  const std::size_t ns = tracking_model.n_states();
  if (prior.n_states() != ns || prior.n_actions() != tracking_model.n_actions() ||
      counts.n_states() != ns || counts.n_actions() != tracking_model.n_actions()) {
    throw ShapeMismatch("prior, counts and tracking model disagree on shape");
  }
  // Validate the whole log first so a malformed log leaves the counts untouched.
  for (const auto& ch : log.channels) {
    for (const auto& tr : ch.triplets) {
      if (tr.action >= tracking_model.n_actions() || tr.obs >= tracking_model.n_observations() ||
          tr.obs_next >= tracking_model.n_observations()) {
        throw IndexOutOfRange("scenario " + std::to_string(log.scenario_id) + " channel " +
                              std::to_string(ch.id) + " has an out-of-range index");
      }
    }
  }

  std::size_t resets = 0;
  for (const auto& ch : log.channels) {
    if (ch.triplets.empty()) continue;
    const auto& first = ch.triplets.front();
    auto step = belief_update_or_reset(Belief::uniform(ns), first.action, first.obs,
                                       tracking_model);
    resets += step.reset;
    Belief current = std::move(step.belief);
    for (const auto& tr : ch.triplets) {
      const std::size_t s_now = most_likely_state(current);
      step = belief_update_or_reset(current, tr.action, tr.obs_next, tracking_model);
      resets += step.reset;
      current = std::move(step.belief);
      counts.increment(s_now, tr.action, most_likely_state(current));
    }
  }
  if (stats != nullptr) {
    stats->triplets += log.triplet_count();
    stats->belief_resets += resets;
  }
  return counts;
}

DirichletPolicyParams posterior(const DirichletPrior& prior, const TransitionCounts& counts) {
  if (prior.n_states() != counts.n_states() || prior.n_actions() != counts.n_actions()) {
    throw ShapeMismatch("prior and counts differ in shape");
  }
  const auto alpha = prior.alpha();
  const auto m = counts.data();
  std::vector<double> out(alpha.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha[i] + static_cast<double>(m[i]);
  return DirichletPolicyParams(prior.n_states(), prior.n_actions(), std::move(out));
}

std::vector<double> mean_transition(const DirichletPolicyParams& params) {
  const std::size_t ns = params.n_states();
  const std::size_t na = params.n_actions();
  const auto p = params.data();
  std::vector<double> t(na * ns * ns);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const double* row = p.data() + (s * na + a) * ns;
      double sum = 0.0;
      for (std::size_t j = 0; j < ns; ++j) sum += row[j];
      if (!(sum > 0.0)) {
        throw DegenerateRow("params row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                            ") has zero mass");
      }
      double* dst = t.data() + (a * ns + s) * ns;
      for (std::size_t j = 0; j < ns; ++j) dst[j] = row[j] / sum;
    }
  }
  return t;
}

TransitionCounts count_transitions(std::span<const ScenarioLog> dataset,
                                   const DirichletPrior& prior, const PomdpModel& tracking_model,
                                   IngestStats* stats) {
  // Thread-local tallies merged by addition; the merge is order independent.
  TransitionCounts total(prior.n_states(), prior.n_actions());
  IngestStats merged;
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(dataset.size());
#pragma omp parallel if (n > 1)
  {
    TransitionCounts local(prior.n_states(), prior.n_actions());
    IngestStats local_stats;
    std::exception_ptr local_failure;
#pragma omp for schedule(dynamic) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (local_failure) continue;
      try {
        local = ingest_scenario(dataset[static_cast<std::size_t>(i)], prior, tracking_model,
                                std::move(local), &local_stats);
      } catch (...) {
        local_failure = std::current_exception();
      }
    }
#pragma omp critical(ef_merge_counts)
    {
      if (local_failure && !failure) failure = local_failure;
      total += local;
      merged.triplets += local_stats.triplets;
      merged.belief_resets += local_stats.belief_resets;
    }
  }
  if (failure) std::rethrow_exception(failure);
  if (stats != nullptr) {
    stats->triplets += merged.triplets;
    stats->belief_resets += merged.belief_resets;
  }
  return total;
}

DirichletPolicyParams learn_policy_params(std::span<const ScenarioLog> dataset,
                                          const DirichletPrior& prior,
                                          const PomdpModel& tracking_model, IngestStats* stats) {
  return posterior(prior, count_transitions(dataset, prior, tracking_model, stats));
}

}  // namespace ef
