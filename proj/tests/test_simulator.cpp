#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "expfilter/simulator.hpp"

using namespace ef;

namespace {

ScenarioConfig empty_road(std::uint64_t seed) {
  auto cfg = ScenarioConfig::for_environment({}, seed);
  cfg.arrival_rate = 0.0;
  return cfg;
}

PomdpModel noiseless_model() {
  return make_tdomain_model(uniform_transition(), {1.0, 1.0, 1.0}, {});
}

QMatrix zero_q() {
  QMatrix q;
  q.n_states = kNumStates;
  q.n_actions = kNumActions;
  q.q.assign(kNumStates * kNumActions, 0.0);
  return q;
}

// Go unless the rival is close and blocking; stop otherwise.
QMatrix gap_acceptance_q() {
  auto q = zero_q();
  for (std::size_t s = 0; s < kNumStates; ++s) {
    const auto f = decode_state(s);
    const bool threat = f.blk_rival == Blocking::yes &&
                        (f.pos_rival == Position::at || f.pos_rival == Position::inside);
    q.q[s * kNumActions + (threat ? 0 : 2)] = 1.0;
  }
  return q;
}

}  // namespace

TEST_CASE("speed integration matches constant-acceleration kinematics") {
  // Reaches the target mid-step: accelerate for 0.2 s, then cruise.
  auto r = integrate_speed(7.5, 8.0, 2.5, 4.0, 0.25);
  CHECK(r[1] == 8.0);
  CHECK(r[0] == doctest::Approx(7.5 * 0.2 + 0.5 * 2.5 * 0.04 + 8.0 * 0.05));
  // Full step of braking.
  r = integrate_speed(8.0, 0.0, 2.5, 4.0, 0.25);
  CHECK(r[1] == doctest::Approx(7.0));
  CHECK(r[0] == doctest::Approx(8.0 * 0.25 - 0.5 * 4.0 * 0.0625));
  // At target.
  r = integrate_speed(3.0, 3.0, 2.5, 4.0, 0.25);
  CHECK(r[0] == 0.75);
  CHECK(r[1] == 3.0);
}

TEST_CASE("a free rival follows the closed-form trajectory") {
  auto cfg = empty_road(1);
  cfg.geometry.crossing_half = 5000.0;
  WorldState w;
  w.ego_progress = cfg.geometry.stop_position;
  RivalVehicle r;
  r.progress = -1000.0;
  r.speed = 0.0;
  r.behavior = Behavior::normal;  // cruises at 7 m/s
  w.rivals.push_back(r);
  for (int i = 0; i < 100; ++i) w = step_world(w, EgoAction::stop, cfg);
  REQUIRE(w.rivals.size() == 1);
  // 2 m/s^2 for 3.5 s, then 7 m/s for 21.5 s.
  CHECK(w.rivals[0].progress == doctest::Approx(-1000.0 + 0.5 * 2.0 * 3.5 * 3.5 + 7.0 * 21.5));
  CHECK(w.rivals[0].speed == 7.0);
  CHECK(w.clock == doctest::Approx(25.0));
  CHECK(w.ego_progress == cfg.geometry.stop_position);
}

TEST_CASE("observation sampling follows Z") {
  const auto model = make_tdomain_model(uniform_transition(), {}, {});
  const ObservationSampler sampler(model);
  Rng rng(99);
  const int n = 100000;
  for (std::size_t s : {0ul, 57ul, 100ul, 191ul}) {
    std::map<std::size_t, int> hist;
    for (int i = 0; i < n; ++i) ++hist[sampler.sample(s, 1, rng)];
    double tv = 0.0;
    for (std::size_t o = 0; o < kNumObservations; ++o) {
      const double emp = hist.count(o) ? hist[o] / static_cast<double>(n) : 0.0;
      tv += std::abs(emp - model.observation(1, s, o));
    }
    CHECK(0.5 * tv < 0.01);
  }
}

TEST_CASE("abstraction of a hand-built world") {
  auto cfg = empty_road(2);
  cfg.occluded = true;
  WorldState w;
  w.ego_progress = -3.0;
  RivalVehicle far{0, -30.0, 7.0, Behavior::aggressive, Route::crossing, false};
  auto f = abstract_state(w, far, cfg);
  CHECK(f == FactoredState{Position::at, Sightline::no, Position::before, Blocking::yes,
                           Behavior::aggressive});
  RivalVehicle near{1, 2.0, 7.0, Behavior::cautious, Route::turning_in, false};
  w.ego_progress = 1.0;
  f = abstract_state(w, near, cfg);
  CHECK(f == FactoredState{Position::inside, Sightline::yes, Position::inside, Blocking::no,
                           Behavior::cautious});
  RivalVehicle past{2, 10.0, 7.0, Behavior::normal, Route::crossing, false};
  w.ego_progress = 9.0;
  f = abstract_state(w, past, cfg);
  CHECK(f == FactoredState{Position::after, Sightline::yes, Position::after, Blocking::no,
                           Behavior::normal});

  // Noiseless Z returns the abstract state itself.
  const ObservationSampler sampler(noiseless_model());
  Rng rng(3);
  CHECK(abstract_observe(w, past, cfg, sampler, rng) == encode_state(f));
}

TEST_CASE("MODIA executes the safest recommendation") {
  const std::vector<EgoAction> mix{EgoAction::go, EgoAction::edge, EgoAction::go};
  CHECK(modia_select(mix) == EgoAction::edge);
  const std::vector<EgoAction> with_stop{EgoAction::go, EgoAction::stop};
  CHECK(modia_select(with_stop) == EgoAction::stop);
  CHECK(modia_select({}) == EgoAction::go);
}

TEST_CASE("crossing an empty road") {
  const auto model = noiseless_model();
  const auto out = run_scenario(empty_road(5), zero_q(), model, {0.0, 4.0, true});
  // From rest at -4 m, 12 m to clear the box at 2.5 m/s^2: t* = sqrt(24 / 2.5) = 3.10 s,
  // first sampled at 3.25 s.
  CHECK(out.metrics.time_taken == doctest::Approx(3.25));
  CHECK(out.metrics.discomfort == doctest::Approx(8.0));
  CHECK(out.metrics.collision_risk == doctest::Approx(1.0 / 50.0));
  CHECK_FALSE(out.metrics.collided);
  CHECK_FALSE(out.metrics.timeout);
  CHECK(out.log.channels.empty());
  CHECK(out.trajectory.samples.back().ego_progress >= 8.0 + 15.0);
}

TEST_CASE("a fixed action overrides MODIA") {
  const auto model = noiseless_model();
  RunOptions stop;
  stop.fixed_action = EgoAction::stop;
  stop.keep_trajectory = true;
  auto cfg = empty_road(5);
  cfg.max_ticks = 40;
  const auto held = run_scenario(cfg, zero_q(), model, stop);
  CHECK(held.metrics.timeout);
  CHECK(held.trajectory.samples.back().ego_progress == cfg.geometry.stop_position);
  RunOptions go;
  go.fixed_action = EgoAction::go;
  const auto free = run_scenario(empty_road(5), zero_q(), model, go);
  CHECK(free.metrics.time_taken == doctest::Approx(3.25));
}

TEST_CASE("an ego that always stops times out without collisions") {
  auto cfg = ScenarioConfig::for_environment(
      {Visibility::yes, Density::high, Behavior::cautious}, 6);
  cfg.arrival_rate = 2.0;
  cfg.max_ticks = 200;
  const auto out = run_scenario(cfg, zero_q(), noiseless_model(), {0.0, 4.0, true});
  CHECK(out.metrics.timeout);
  CHECK(out.metrics.time_taken == doctest::Approx(200 * 0.25));
  CHECK_FALSE(out.metrics.collided);
  for (const auto& s : out.trajectory.samples) CHECK(s.ego_progress == cfg.geometry.stop_position);
  CHECK(out.log.duration == 200);
}

TEST_CASE("scenarios are deterministic and logs chain") {
  const auto model = make_tdomain_model(uniform_transition(), {}, {});
  const auto cfg = ScenarioConfig::for_environment(
      {Visibility::no, Density::med, Behavior::normal}, 42);
  const auto a = run_scenario(cfg, gap_acceptance_q(), model, {0.3, 4.0, false});
  const auto b = run_scenario(cfg, gap_acceptance_q(), model, {0.3, 4.0, false});
  CHECK(a.log == b.log);
  CHECK(a.metrics.time_taken == b.metrics.time_taken);
  CHECK(a.metrics.discomfort == b.metrics.discomfort);
  CHECK(a.metrics.collision_risk == b.metrics.collision_risk);
  CHECK_NOTHROW(a.log.check_contiguity());
  CHECK(a.log.triplet_count() > 0);
  for (const auto& ch : a.log.channels) {
    for (const auto& t : ch.triplets) {
      CHECK(t.obs < kNumObservations);
      CHECK(t.action < kNumActions);
    }
  }
  CHECK_THROWS_AS(run_scenario(cfg, QMatrix{}, model), ShapeMismatch);
}

TEST_CASE("metric scoring") {
  Trajectory t;
  t.dt = 0.5;
  t.box_exit = 8.0;
  const double inf = std::numeric_limits<double>::infinity();
  t.samples = {{0.0, 0.0, 0.0, inf, false},
               {0.5, 1.0, 2.0, 10.0, false},
               {1.0, 9.0, 1.0, 4.0, false},
               {1.5, 12.0, 3.0, 30.0, false}};
  auto m = score_metrics(t);
  CHECK(m.discomfort == doctest::Approx(2.0 + 1.0 + 2.0));
  CHECK(m.time_taken == 1.0);
  CHECK(m.collision_risk == doctest::Approx(0.25));
  CHECK_FALSE(m.collided);

  t.samples[1].min_distance = 0.5;  // below the collision distance: clipped
  CHECK(score_metrics(t).collision_risk == doctest::Approx(0.5));
  t.samples[2].collision = true;
  m = score_metrics(t);
  CHECK(m.collided);
  CHECK(m.collision_risk == doctest::Approx(0.5));

  for (auto& s : t.samples) s.ego_progress = 0.0;  // never left the box
  CHECK(score_metrics(t).time_taken == 1.5);
  CHECK_THROWS_AS(score_metrics(Trajectory{}), EmptyInput);
}

TEST_CASE("denser traffic never speeds up a gap-accepting ego on average") {
  const auto model = noiseless_model();
  const auto q = gap_acceptance_q();
  double sparse = 0.0, dense = 0.0;
  const int n = 100;
  for (int seed = 0; seed < n; ++seed) {
    auto cfg = ScenarioConfig::for_environment({}, static_cast<std::uint64_t>(seed));
    cfg.arrival_rate = 0.05;
    sparse += run_scenario(cfg, q, model).metrics.time_taken;
    cfg.arrival_rate = 0.5;
    dense += run_scenario(cfg, q, model).metrics.time_taken;
  }
  CHECK(sparse / n <= dense / n);
}

TEST_CASE("configuration validation") {
  SimulatorSettings s;
  CHECK_NOTHROW(s.validate());
  s.dt = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.geometry.stop_position = -10.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.traffic.behavior_mix[0] = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.kinematics.rival_speed[1] = -1.0;
  CHECK_THROWS_AS(s.validate(), Error);

  const auto cfg = ScenarioConfig::for_environment(
      {Visibility::no, Density::high, Behavior::aggressive}, 1);
  CHECK(cfg.arrival_rate == 0.30);
  CHECK(cfg.occluded);
  CHECK(cfg.behavior_mix == std::array<double, 3>{0.05, 0.25, 0.70});
}
