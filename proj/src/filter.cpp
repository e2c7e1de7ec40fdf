#include "expfilter/filter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ef {

namespace {

constexpr std::size_t kParallelBlend = 1u << 14;

void check_library(const ExperienceLibrary& lib) {
  if (lib.empty()) throw EmptyLibrary("experience library is empty");
}

template <bool Parallel>
DirichletPolicyParams blend(std::span<const double> weights, const ExperienceLibrary& lib) {
  check_library(lib);
  if (weights.size() != lib.size()) throw ShapeMismatch("one weight per library entry required");
  const auto& first = lib[0].params;
  const std::size_t n = first.size();
  std::vector<const double*> sources;
  sources.reserve(lib.size());
  for (const auto& e : lib.entries()) sources.push_back(e.params.data().data());

  std::vector<double> out(n, 0.0);
  if constexpr (Parallel) {
    // Per element the entries are accumulated in library order, matching the serial kernel.
#pragma omp parallel for schedule(static) if (n * lib.size() >= kParallelBlend)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < sources.size(); ++i) {
        acc += weights[i] * sources[i][j];
      }
      out[static_cast<std::size_t>(j)] = acc;
    }
  } else {
    for (std::size_t i = 0; i < sources.size(); ++i) {
      for (std::size_t j = 0; j < n; ++j) out[j] += weights[i] * sources[i][j];
    }
  }
  return DirichletPolicyParams(first.n_states(), first.n_actions(), std::move(out));
}

}  // namespace

void KernelConfig::validate() const {
  if (!(sigma > 0.0) || !(lengthscale > 0.0)) {
    throw Error("kernel sigma and lengthscale must be positive");
  }
}

ExperienceLibrary::ExperienceLibrary(std::vector<LibraryEntry> entries) {
  for (auto& e : entries) add(e.env, std::move(e.params));
}

void ExperienceLibrary::add(EnvironmentState env, DirichletPolicyParams params) {
  if (!entries_.empty() && !entries_.front().params.same_shape(params)) {
    throw ShapeMismatch("library entries must share one params shape");
  }
  for (const auto& e : entries_) {
    if (e.env == env) throw Error("environment " + env.tag() + " is already in the library");
  }
  entries_.push_back({env, std::move(params)});
}

double squared_distance(const EnvironmentState& x, const EnvironmentState& y) {
  const auto a = x.embedding();
  const auto b = y.embedding();
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

double kernel_raw(const EnvironmentState& x_n, const EnvironmentState& x_k,
                  const KernelConfig& cfg) {
  cfg.validate();
  const double l2 = cfg.lengthscale * cfg.lengthscale;
  return cfg.sigma * cfg.sigma * std::exp(-squared_distance(x_n, x_k) / (2.0 * l2));
}

std::vector<double> kernel_weights(const EnvironmentState& x, const ExperienceLibrary& lib,
                                   const KernelConfig& cfg) {
  check_library(lib);
  cfg.validate();
  // sigma^2 is common to every term and cancels in the normalisation. Shifting by the
  // smallest distance keeps the largest term at exp(0) = 1, so short lengthscales cannot
  // underflow the whole vector.
  std::vector<double> d2(lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) d2[i] = squared_distance(x, lib[i].env);
  const double d_min = *std::min_element(d2.begin(), d2.end());
  const double denom = 2.0 * cfg.lengthscale * cfg.lengthscale;

  std::vector<double> w(lib.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(-(d2[i] - d_min) / denom);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

DirichletPolicyParams blend_params(std::span<const double> weights, const ExperienceLibrary& lib) {
  return blend<true>(weights, lib);
}

DirichletPolicyParams filter_policy(const EnvironmentState& x, const ExperienceLibrary& lib,
                                    const KernelConfig& cfg) {
  auto out = blend_params(kernel_weights(x, lib, cfg), lib);
  out.set_source_env(x);
  return out;
}

DirichletPolicyParams nearest_neighbor_policy(const EnvironmentState& x,
                                              const ExperienceLibrary& lib) {
  check_library(lib);
  std::size_t best = 0;
  double best_d = squared_distance(x, lib[0].env);
  for (std::size_t i = 1; i < lib.size(); ++i) {
    const double d = squared_distance(x, lib[i].env);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return lib[best].params;
}

DirichletPolicyParams pooled_policy(
    std::span<const std::pair<DirichletPrior, TransitionCounts>> count_sets) {
  if (count_sets.empty()) throw EmptyInput("pooled policy needs at least one count set");
  const DirichletPrior& prior = count_sets.front().first;
  TransitionCounts total(prior.n_states(), prior.n_actions());
  for (const auto& [p, counts] : count_sets) {
    if (p.n_states() != prior.n_states() || p.n_actions() != prior.n_actions() ||
        !std::equal(p.alpha().begin(), p.alpha().end(), prior.alpha().begin())) {
      throw ShapeMismatch("pooled count sets must share one prior");
    }
    total += counts;
  }
  return posterior(prior, total);
}

namespace serial {

DirichletPolicyParams blend_params(std::span<const double> weights, const ExperienceLibrary& lib) {
  return blend<false>(weights, lib);
}

}  // namespace serial

}  // namespace ef
