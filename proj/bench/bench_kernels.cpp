// Serial reference kernels against their OpenMP counterparts at T-domain scale.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>

#include "expfilter/filter.hpp"
#include "expfilter/tdomain.hpp"

using namespace ef;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

std::vector<double> random_transition(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(kNumActions * kNumStates * kNumStates);
  for (std::size_t row = 0; row < kNumActions * kNumStates; ++row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < kNumStates; ++j) sum += t[row * kNumStates + j] = u(rng);
    for (std::size_t j = 0; j < kNumStates; ++j) t[row * kNumStates + j] /= sum;
  }
  return t;
}

void report(const char* name, double serial_ms, double parallel_ms, bool same) {
  std::printf("%-16s %10.3f %10.3f %8.2fx  %s\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, same ? "identical" : "DIFFERENT");
}

}  // namespace

int main() {
  std::mt19937_64 rng(7);
  const auto model = make_tdomain_model(random_transition(rng), {}, {});
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-16s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  QMatrix qs, qp;
  const double qmdp_s = best_of(3, [&] { qs = serial::solve_qmdp(model); });
  const double qmdp_p = best_of(3, [&] { qp = solve_qmdp(model); });
  report("qmdp", qmdp_s, qmdp_p, qs.q == qp.q);

  std::uniform_real_distribution<double> u(1.0, 100.0);
  ExperienceLibrary lib;
  for (std::size_t i = 0; i + 1 < kNumEnvironments; ++i) {
    std::vector<double> p(kNumStates * kNumActions * kNumStates);
    for (auto& v : p) v = u(rng);
    lib.add(EnvironmentState::from_index(i), DirichletPolicyParams(kNumStates, kNumActions, p));
  }
  const auto w = kernel_weights(EnvironmentState::from_index(17), lib, {});
  std::optional<DirichletPolicyParams> bs, bp;
  const double blend_s = best_of(20, [&] { bs = serial::blend_params(w, lib); });
  const double blend_p = best_of(20, [&] { bp = blend_params(w, lib); });
  report("blend", blend_s, blend_p, *bs == *bp);

  const Belief b0 = Belief::uniform(kNumStates);
  std::optional<Belief> us, up;
  const double upd_s = best_of(200, [&] { us = serial::belief_update(b0, 1, 57, model); });
  const double upd_p = best_of(200, [&] { up = belief_update(b0, 1, 57, model); });
  bool same = true;
  for (std::size_t s = 0; s < kNumStates; ++s) same = same && (*us)[s] == (*up)[s];
  report("belief_update", upd_s, upd_p, same);
  return 0;
}
