#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "expfilter/learner.hpp"
#include "expfilter/tdomain.hpp"
#include "oracles.hpp"

using namespace ef;

namespace {

std::size_t argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Replays the ingestion rule with the brute-force Bayes update.
std::vector<std::uint64_t> ingest_oracle(const std::vector<ScenarioLog>& logs,
                                         const PomdpModel& m) {
  const std::size_t ns = m.n_states(), na = m.n_actions();
  std::vector<std::uint64_t> counts(ns * na * ns, 0);
  const std::vector<double> uniform(ns, 1.0 / static_cast<double>(ns));
  for (const auto& log : logs) {
    for (const auto& ch : log.channels) {
      if (ch.triplets.empty()) continue;
      auto b = oracle::bayes_update(uniform, ch.triplets[0].action, ch.triplets[0].obs, m);
      for (const auto& tr : ch.triplets) {
        const std::size_t s = argmax_lowest(b);
        b = oracle::bayes_update(b, tr.action, tr.obs_next, m);
        ++counts[(s * na + tr.action) * ns + argmax_lowest(b)];
      }
    }
  }
  return counts;
}

std::vector<ScenarioLog> random_logs(oracle::Rng& rng, const PomdpModel& m, std::size_t n_logs,
                                     std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> act(0, m.n_actions() - 1);
  std::uniform_int_distribution<std::size_t> obs(0, m.n_observations() - 1);
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::vector<ScenarioLog> logs;
  for (std::size_t k = 0; k < n_logs; ++k) {
    ScenarioLog log;
    log.scenario_id = k;
    for (std::uint32_t c = 0; c < 3; ++c) {
      RivalChannel ch{c, c, {}};
      auto o = static_cast<std::uint32_t>(obs(rng));
      const std::size_t n = len(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const auto o2 = static_cast<std::uint32_t>(obs(rng));
        ch.triplets.push_back({o, static_cast<std::uint32_t>(act(rng)), o2});
        o = o2;
      }
      log.channels.push_back(ch);
    }
    log.duration = static_cast<std::uint32_t>(max_len + 3);
    logs.push_back(log);
  }
  return logs;
}

std::vector<std::uint64_t> as_vector(const TransitionCounts& c) {
  return {c.data().begin(), c.data().end()};
}

}  // namespace

TEST_CASE("prior validation and mean") {
  CHECK_THROWS_AS(DirichletPrior(2, 1, {1, 1, 1}), ShapeMismatch);
  CHECK_THROWS_AS(DirichletPrior(2, 1, {1, -1, 1, 1}), Error);
  CHECK_THROWS_AS(DirichletPrior(2, 1, {0, 0, 1, 1}), DegenerateRow);
  // [s][a][s'] in, [a][s][s'] out.
  const DirichletPrior p(2, 2, {1, 3, 2, 2, 4, 0, 1, 1});
  const auto t = p.mean_transition();
  CHECK(t[(0 * 2 + 0) * 2 + 1] == doctest::Approx(0.75));
  CHECK(t[(1 * 2 + 0) * 2 + 0] == doctest::Approx(0.5));
  CHECK(t[(0 * 2 + 1) * 2 + 0] == doctest::Approx(1.0));
  CHECK(t[(1 * 2 + 1) * 2 + 1] == doctest::Approx(0.5));
}

TEST_CASE("posterior is alpha plus counts") {
  const auto uni = DirichletPrior::uniform(3, 2);
  const auto p0 = posterior(uni, TransitionCounts(3, 2));
  for (double v : p0.data()) CHECK(v == 1.0);

  TransitionCounts c(2, 1);
  c.increment(0, 0, 0);
  c.increment(0, 0, 0);
  const auto p = posterior(DirichletPrior::uniform(2, 1), c);
  CHECK(p(0, 0, 0) == 3.0);
  CHECK(p(0, 0, 1) == 1.0);

  oracle::Rng rng(1);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  std::vector<double> alpha(4 * 2 * 4);
  for (auto& v : alpha) v = u(rng);
  TransitionCounts m(4, 2);
  for (int k = 0; k < 200; ++k) m.increment(pick(rng), pick(rng) % 2, pick(rng));
  const auto post = posterior(DirichletPrior(4, 2, alpha), m);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    CHECK(post.data()[i] == alpha[i] + static_cast<double>(m.data()[i]));
  }
  CHECK(m.total() == 200);
  CHECK_THROWS_AS(posterior(DirichletPrior::uniform(3, 2), m), ShapeMismatch);
}

TEST_CASE("mean_transition normalises rows") {
  const DirichletPolicyParams p(2, 1, {1, 3, 0, 5});
  const auto t = mean_transition(p);
  CHECK(t[0] == 0.25);
  CHECK(t[1] == 0.75);
  CHECK(t[2] == 0.0);
  CHECK(t[3] == 1.0);
  CHECK_THROWS_AS(mean_transition(DirichletPolicyParams(2, 1, {0, 0, 1, 1})), DegenerateRow);
  CHECK_THROWS_AS(DirichletPolicyParams(2, 1, {1, 1, 1}), ShapeMismatch);
  CHECK_THROWS_AS(DirichletPolicyParams(2, 1, {1, -1, 1, 1}), Error);
}

TEST_CASE("T-domain params have 110592 entries") {
  const auto p = posterior(DirichletPrior::uniform(kNumStates, kNumActions),
                           TransitionCounts(kNumStates, kNumActions));
  CHECK(p.size() == 110592);
}

TEST_CASE("count array bookkeeping") {
  TransitionCounts a(2, 2), b(2, 2);
  a.increment(0, 1, 1);
  b.increment(0, 1, 1);
  b.increment(1, 0, 0);
  a += b;
  CHECK(a(0, 1, 1) == 2);
  CHECK(a(1, 0, 0) == 1);
  CHECK(a.total() == 3);
  CHECK_THROWS_AS(a.increment(2, 0, 0), IndexOutOfRange);
  TransitionCounts c(3, 2);
  CHECK_THROWS_AS(a += c, ShapeMismatch);
}

TEST_CASE("log contiguity") {
  ScenarioLog log;
  log.channels.push_back({0, 0, {{1, 0, 2}, {2, 1, 3}}});
  CHECK_NOTHROW(log.check_contiguity());
  CHECK(log.triplet_count() == 2);
  log.channels[0].triplets.push_back({4, 0, 1});
  CHECK_THROWS_AS(log.check_contiguity(), FormatError);
}

TEST_CASE("ingestion matches a brute-force filter replay") {
  oracle::Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_model(rng, 5, 3, 5, 0.9);
    const auto prior = DirichletPrior::uniform(5, 3);
    const auto logs = random_logs(rng, m, 6, 12);
    IngestStats stats;
    TransitionCounts counts(5, 3);
    for (const auto& log : logs) counts = ingest_scenario(log, prior, m, std::move(counts), &stats);
    CHECK(as_vector(counts) == ingest_oracle(logs, m));

    std::size_t n = 0;
    for (const auto& log : logs) n += log.triplet_count();
    CHECK(stats.triplets == n);
    CHECK(counts.total() == n);
    CHECK(stats.belief_resets == 0);
  }
}

TEST_CASE("ingestion properties") {
  oracle::Rng rng(78);
  const auto m = oracle::random_model(rng, 4, 2, 4, 0.9);
  const auto prior = DirichletPrior::uniform(4, 2);
  auto logs = random_logs(rng, m, 8, 10);

  SUBCASE("empty dataset leaves the prior") {
    const auto p = learn_policy_params({}, prior, m);
    CHECK(std::equal(p.data().begin(), p.data().end(), prior.alpha().begin()));
  }
  SUBCASE("order independence and parallel merge") {
    const auto forward = count_transitions(logs, prior, m);
    std::reverse(logs.begin(), logs.end());
    CHECK(count_transitions(logs, prior, m) == forward);
    TransitionCounts seq(4, 2);
    for (const auto& log : logs) seq = ingest_scenario(log, prior, m, std::move(seq));
    CHECK(seq == forward);
  }
  SUBCASE("count conservation") {
    TransitionCounts c(4, 2);
    std::uint64_t before = 0;
    for (const auto& log : logs) {
      c = ingest_scenario(log, prior, m, std::move(c));
      before += log.triplet_count();
      CHECK(c.total() == before);
    }
  }
  SUBCASE("learn_policy_params folds counts into the posterior") {
    const auto p = learn_policy_params(logs, prior, m);
    CHECK(p == posterior(prior, count_transitions(logs, prior, m)));
  }
  SUBCASE("malformed logs leave counts untouched") {
    ScenarioLog bad;
    bad.channels.push_back({0, 0, {{0, 0, 1}, {1, 5, 2}}});
    TransitionCounts c(4, 2);
    c.increment(0, 0, 0);
    const auto snapshot = c;
    CHECK_THROWS_AS(c = ingest_scenario(bad, prior, m, c), IndexOutOfRange);
    CHECK(c == snapshot);
  }
}

TEST_CASE("impossible observations reset the tracker and are reported") {
  // Identity Z: jumping between observations the deterministic T forbids is impossible.
  const PomdpModel m(2, 1, 2, {1, 0, 0, 1}, {1, 0, 0, 1}, {0, 0}, 0.9);
  ScenarioLog log;
  log.channels.push_back({0, 0, {{0, 0, 1}, {1, 0, 1}}});
  IngestStats stats;
  const auto c = ingest_scenario(log, DirichletPrior::uniform(2, 1), m, TransitionCounts(2, 1),
                                 &stats);
  CHECK(stats.belief_resets == 1);
  CHECK(c(0, 0, 0) == 1);  // reset belief is uniform, most likely state 0
  CHECK(c(0, 0, 1) == 1);
}

TEST_CASE("learning is equivariant under state relabelling") {
  oracle::Rng rng(79);
  const std::size_t n = 5;
  const auto m = oracle::random_model(rng, n, 2, n, 0.9);
  const auto logs = random_logs(rng, m, 6, 10);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  // Relabel states and observations with the same permutation.
  std::vector<double> t(2 * n * n), z(2 * n * n), r(n * 2);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t s = 0; s < n; ++s) {
      r[perm[s] * 2 + a] = m.reward(s, a);
      for (std::size_t j = 0; j < n; ++j) {
        t[(a * n + perm[s]) * n + perm[j]] = m.transition(a, s, j);
        z[(a * n + perm[s]) * n + perm[j]] = m.observation(a, s, j);
      }
    }
  }
  const PomdpModel pm(n, 2, n, t, z, r, 0.9);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<double> alpha(n * 2 * n), palpha(n * 2 * n);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t j = 0; j < n; ++j) {
        alpha[(s * 2 + a) * n + j] = u(rng);
        palpha[(perm[s] * 2 + a) * n + perm[j]] = alpha[(s * 2 + a) * n + j];
      }
  auto plogs = logs;
  for (auto& log : plogs)
    for (auto& ch : log.channels)
      for (auto& tr : ch.triplets) {
        tr.obs = static_cast<std::uint32_t>(perm[tr.obs]);
        tr.obs_next = static_cast<std::uint32_t>(perm[tr.obs_next]);
      }
  const auto p = learn_policy_params(logs, DirichletPrior(n, 2, alpha), m);
  const auto pp = learn_policy_params(plogs, DirichletPrior(n, 2, palpha), pm);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t j = 0; j < n; ++j) CHECK(pp(perm[s], a, perm[j]) == p(s, a, j));
}

TEST_CASE("learned transitions converge on a 6-state chain") {
  const std::size_t n = 6;
  const auto t = oracle::banded_chain(n);
  oracle::Rng rng(600);
  const auto logs = oracle::sample_chain_logs(t, n, 10000, rng);
  const auto learned = mean_transition(learn_policy_params(
      logs, DirichletPrior::uniform(n, 1), oracle::identity_tracking_model(n)));
  for (std::size_t s = 0; s < n; ++s) {
    double l1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) l1 += std::abs(learned[s * n + j] - t[s * n + j]);
    CHECK(l1 <= 0.05);
  }
}
