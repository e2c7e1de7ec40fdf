#pragma once

// Independent reference computations for the tests. Nothing here calls into the
// library's solver or filter code.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "expfilter/learner.hpp"
#include "expfilter/pomdp.hpp"

namespace oracle {

using Rng = std::mt19937_64;

inline std::vector<double> random_rows(Rng& rng, std::size_t rows, std::size_t cols,
                                       double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double v = u(rng) < zero_prob ? 0.0 : u(rng) + 1e-3;
      out[r * cols + c] = v;
      sum += v;
    }
    if (sum == 0.0) {
      out[r * cols] = 1.0;
      sum = 1.0;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= sum;
  }
  return out;
}

inline ef::PomdpModel random_model(Rng& rng, std::size_t ns, std::size_t na, std::size_t no,
                                   double gamma, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> r(ns * na);
  for (auto& v : r) v = u(rng);
  return ef::PomdpModel(ns, na, no, random_rows(rng, na * ns, ns, zero_prob),
                        random_rows(rng, na * ns, no, zero_prob), std::move(r), gamma);
}

inline std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  return random_rows(rng, 1, n);
}

// Gaussian elimination with partial pivoting; A is n x n row-major.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
    x[i] = s / a[i * n + i];
  }
  return x;
}

// Q* of the underlying MDP by exact policy evaluation and greedy improvement.
inline std::vector<double> policy_iteration_q(const ef::PomdpModel& m) {
  const std::size_t ns = m.n_states(), na = m.n_actions();
  const double g = m.discount();
  std::vector<std::size_t> pi(ns, 0);
  std::vector<double> q(ns * na);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<double> a(ns * ns, 0.0), rhs(ns);
    for (std::size_t s = 0; s < ns; ++s) {
      a[s * ns + s] = 1.0;
      for (std::size_t sn = 0; sn < ns; ++sn) a[s * ns + sn] -= g * m.transition(pi[s], s, sn);
      rhs[s] = m.reward(s, pi[s]);
    }
    const auto v = solve_linear(a, rhs);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t ac = 0; ac < na; ++ac) {
        double e = 0.0;
        for (std::size_t sn = 0; sn < ns; ++sn) e += m.transition(ac, s, sn) * v[sn];
        q[s * na + ac] = m.reward(s, ac) + g * e;
      }
    }
    bool stable = true;
    for (std::size_t s = 0; s < ns; ++s) {
      std::size_t best = pi[s];
      for (std::size_t ac = 0; ac < na; ++ac) {
        if (q[s * na + ac] > q[s * na + best] + 1e-12) best = ac;
      }
      if (best != pi[s]) {
        pi[s] = best;
        stable = false;
      }
    }
    if (stable) break;
  }
  return q;
}

// b'(s') = Z(o|s',a) sum_s T(s'|s,a) b(s) / sum over s' of the same, written as an
// explicit double loop over (s, s').
inline std::vector<double> bayes_update(const std::vector<double>& b, std::size_t a, std::size_t o,
                                        const ef::PomdpModel& m) {
  const std::size_t n = m.n_states();
  std::vector<double> num(n, 0.0);
  double den = 0.0;
  for (std::size_t sn = 0; sn < n; ++sn) {
    for (std::size_t s = 0; s < n; ++s) {
      const double joint = b[s] * m.transition(a, s, sn) * m.observation(a, sn, o);
      num[sn] += joint;
      den += joint;
    }
  }
  for (auto& v : num) v /= den;
  return num;
}

// Known 6-state, 1-action ring: stay 0.6, advance one 0.3, advance two 0.1. T is [s][s'].
inline std::vector<double> banded_chain(std::size_t n = 6) {
  std::vector<double> t(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    t[s * n + s] = 0.6;
    t[s * n + (s + 1) % n] = 0.3;
    t[s * n + (s + 2) % n] = 0.1;
  }
  return t;
}

// Tracking model with identity Z, so the tracked state is the observed state.
inline ef::PomdpModel identity_tracking_model(std::size_t n) {
  std::vector<double> z(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) z[s * n + s] = 1.0;
  return ef::PomdpModel(n, 1, n, std::vector<double>(n * n, 1.0 / static_cast<double>(n)), z,
                        std::vector<double>(n, 0.0), 0.9);
}

// `total` triplets sampled from a 1-action chain, split into episodes of 50 steps.
inline std::vector<ef::ScenarioLog> sample_chain_logs(const std::vector<double>& t, std::size_t n,
                                                      std::size_t total, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ef::ScenarioLog> logs;
  std::size_t made = 0;
  for (std::uint64_t k = 0; made < total; ++k) {
    ef::ScenarioLog log;
    log.scenario_id = k;
    ef::RivalChannel ch{0, 0, {}};
    auto s = static_cast<std::uint32_t>(k % n);
    for (int i = 0; i < 50 && made < total; ++i, ++made) {
      const double x = u(rng);
      double acc = 0.0;
      std::uint32_t next = static_cast<std::uint32_t>(n - 1);
      for (std::uint32_t j = 0; j < n; ++j) {
        acc += t[s * n + j];
        if (x < acc) {
          next = j;
          break;
        }
      }
      ch.triplets.push_back({s, 0, next});
      s = next;
    }
    log.channels.push_back(ch);
    logs.push_back(log);
  }
  return logs;
}

}  // namespace oracle
