#include "expfilter/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ef {

namespace {

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

bool ego_in_box(double progress, const Geometry& g) { return progress > 0.0 && progress <= g.box; }

double ego_target_speed(EgoAction a, const Kinematics& k) {
  switch (a) {
    case EgoAction::stop: return 0.0;
    case EgoAction::edge: return k.v_edge;
    case EgoAction::go: return k.v_go;
  }
  return 0.0;
}

Position rival_position(double p, const Geometry& g) {
  if (p < -(g.conflict_half + g.rival_at_zone)) return Position::before;
  if (p < -g.conflict_half) return Position::at;
  if (p <= g.conflict_half) return Position::inside;
  return Position::after;
}

Position ego_position(double x, const Geometry& g) {
  if (x < -g.ego_at_zone) return Position::before;
  if (x <= 0.0) return Position::at;
  if (x <= g.box) return Position::inside;
  return Position::after;
}

double ego_rival_distance(double ego_progress, const RivalVehicle& r, const Geometry& g) {
  return std::hypot(r.progress, ego_progress - 0.5 * g.box - g.lane_offset);
}

// Target speed for a rival given the leader ahead of it in the lane and the ego.
double rival_target(const RivalVehicle& r, const RivalVehicle* leader, double ego_progress,
                    const ScenarioConfig& cfg) {
  const auto& k = cfg.kinematics;
  const auto& g = cfg.geometry;
  double target = k.rival_speed[static_cast<std::size_t>(r.behavior)];

  if (leader != nullptr) {
    const double gap = leader->progress - r.progress;
    const double desired = k.min_gap + k.time_headway * r.speed;
    if (gap < desired) {
      const double scale = std::clamp((gap - k.min_gap) / (desired - k.min_gap + 1e-12), 0.0, 1.0);
      target = std::min(target, leader->speed * scale);
    }
  }

  if (r.yields && r.route == Route::crossing && ego_in_box(ego_progress, g)) {
    const double yield_line = -g.conflict_half - 1.0;
    const double to_line = yield_line - r.progress;
    const double stopping = r.speed * r.speed / (2.0 * k.rival_brake);
    // Only rivals that can still stop before the line yield; the rest commit.
    if (to_line > 0.0 && to_line >= stopping && to_line <= stopping + r.speed * cfg.dt + 3.0) {
      target = 0.0;
    }
  }
  return target;
}

void spawn_arrivals(WorldState& w, const ScenarioConfig& cfg) {
  const auto& k = cfg.kinematics;
  const auto& g = cfg.geometry;
  const unsigned arrivals = sample_poisson(cfg.arrival_rate * cfg.dt, w.traffic_rng);
  for (unsigned i = 0; i < arrivals; ++i) {
    // Fixed number of draws per arrival keeps the stream aligned across configurations.
    const std::size_t b = sample_categorical(cfg.behavior_mix, w.traffic_rng);
    const bool turning = uniform01(w.traffic_rng) < cfg.traffic.p_turning;
    const double u_yield = uniform01(w.traffic_rng);

    RivalVehicle r;
    r.behavior = static_cast<Behavior>(b);
    r.route = turning ? Route::turning_in : Route::crossing;
    r.yields = u_yield < cfg.traffic.p_yield[b];
    r.progress = -g.crossing_half;
    r.speed = k.rival_speed[b];
    if (!w.rivals.empty()) {
      const RivalVehicle& last = w.rivals.back();
      const double gap = last.progress - r.progress;
      if (gap < k.min_gap) continue;  // lane entrance blocked, arrival is lost
      r.speed = std::min(r.speed, last.speed + std::max(0.0, gap - k.min_gap) / k.time_headway);
    }
    r.channel_id = w.next_channel++;
    w.rivals.push_back(r);
  }
}

}  // namespace

void Geometry::validate() const {
  if (!positive(approach) || !positive(box) || !positive(exit) || !positive(crossing_half) ||
      !positive(occlusion_range) || !positive(ego_at_zone) || !positive(conflict_half) ||
      !positive(rival_at_zone)) {
    throw Error("geometry lengths must be positive");
  }
  if (!(stop_position < 0.0 && stop_position >= -ego_at_zone)) {
    throw Error("stop position must lie in the ego 'at' zone");
  }
}

void Kinematics::validate() const {
  if (!positive(v_edge) || !positive(v_go) || !positive(a_brake) || !positive(a_accel) ||
      !positive(rival_accel) || !positive(rival_brake) || !positive(min_gap) ||
      !positive(time_headway)) {
    throw Error("kinematic parameters must be positive");
  }
  for (double v : rival_speed) {
    if (!positive(v)) throw Error("rival speeds must be positive");
  }
}

void TrafficModel::validate() const {
  for (double r : arrival_rate) {
    if (!(r >= 0.0)) throw Error("arrival rates must be non-negative");
  }
  for (const auto& row : behavior_mix) {
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw Error("behaviour mix must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("behaviour mix rows must sum to 1");
  }
  if (!(p_turning >= 0.0 && p_turning <= 1.0)) throw Error("p_turning must lie in [0, 1]");
  for (double p : p_yield) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("p_yield must lie in [0, 1]");
  }
  if (!(warmup >= 0.0)) throw Error("warm-up must be non-negative");
}

void SimulatorSettings::validate() const {
  geometry.validate();
  kinematics.validate();
  traffic.validate();
  if (!positive(dt)) throw Error("dt must be positive");
  if (max_ticks == 0) throw Error("max_ticks must be positive");
}

ScenarioConfig ScenarioConfig::for_environment(const EnvironmentState& env, std::uint64_t seed,
                                               const SimulatorSettings& settings) {
  settings.validate();
  ScenarioConfig cfg;
  cfg.env = env;
  cfg.seed = seed;
  cfg.dt = settings.dt;
  cfg.max_ticks = settings.max_ticks;
  cfg.arrival_rate = settings.traffic.arrival_rate[static_cast<std::size_t>(env.density)];
  cfg.behavior_mix = settings.traffic.behavior_mix[static_cast<std::size_t>(env.behavior)];
  cfg.occluded = env.visibility == Visibility::no;
  cfg.geometry = settings.geometry;
  cfg.kinematics = settings.kinematics;
  cfg.traffic = settings.traffic;
  cfg.metrics = settings.metrics;
  return cfg;
}

void ScenarioConfig::validate() const {
  geometry.validate();
  kinematics.validate();
  traffic.validate();
  if (!positive(dt)) throw Error("dt must be positive");
  if (!(arrival_rate >= 0.0)) throw Error("arrival rate must be non-negative");
}

std::array<double, 2> integrate_speed(double v, double target, double accel, double brake,
                                      double dt) {
  double rate = 0.0;
  if (v < target) rate = accel;
  if (v > target) rate = -brake;
  if (rate == 0.0) return {v * dt, v};
  const double t_reach = (target - v) / rate;
  if (t_reach >= dt) return {v * dt + 0.5 * rate * dt * dt, v + rate * dt};
  return {v * t_reach + 0.5 * rate * t_reach * t_reach + target * (dt - t_reach), target};
}

WorldState initial_world(const ScenarioConfig& cfg) {
  cfg.validate();
  WorldState w;
  w.ego_progress = cfg.geometry.stop_position;
  w.traffic_rng.seed(derive_seed(cfg.seed, {0x7261ull}));
  const auto warm_ticks = static_cast<std::uint64_t>(std::llround(cfg.traffic.warmup / cfg.dt));
  for (std::uint64_t i = 0; i < warm_ticks; ++i) w = step_world(w, EgoAction::stop, cfg);
  w.clock = 0.0;
  w.tick = 0;
  return w;
}

WorldState step_world(const WorldState& w, EgoAction ego_action, const ScenarioConfig& cfg) {
  const auto& k = cfg.kinematics;
  const auto& g = cfg.geometry;
  WorldState next = w;

  const auto [ego_dx, ego_v] =
      integrate_speed(w.ego_speed, ego_target_speed(ego_action, k), k.a_accel, k.a_brake, cfg.dt);
  next.ego_progress = w.ego_progress + ego_dx;
  next.ego_speed = ego_v;

  // Synchronous update: every rival reacts to the previous tick's state.
  next.rivals.clear();
  for (std::size_t i = 0; i < w.rivals.size(); ++i) {
    const RivalVehicle& r = w.rivals[i];
    const RivalVehicle* leader = i > 0 ? &w.rivals[i - 1] : nullptr;
    const double target = rival_target(r, leader, w.ego_progress, cfg);
    const auto [dx, v] = integrate_speed(r.speed, target, k.rival_accel, k.rival_brake, cfg.dt);
    RivalVehicle moved = r;
    moved.progress = r.progress + dx;
    moved.speed = v;
    const bool gone = moved.route == Route::turning_in ? moved.progress >= -g.conflict_half
                                                       : moved.progress > g.crossing_half;
    if (!gone) next.rivals.push_back(moved);
  }

  spawn_arrivals(next, cfg);
  next.tick = w.tick + 1;
  next.clock = static_cast<double>(next.tick) * cfg.dt;
  return next;
}

bool rival_blocking(const RivalVehicle& r, const Geometry& g) {
  return r.route == Route::crossing && r.progress <= g.conflict_half;
}

FactoredState abstract_state(const WorldState& w, const RivalVehicle& rival,
                             const ScenarioConfig& cfg) {
  const auto& g = cfg.geometry;
  FactoredState f;
  f.pos_ego = ego_position(w.ego_progress, g);
  const bool hidden = cfg.occluded && w.ego_progress <= g.occlusion_clear &&
                      std::abs(rival.progress) > g.occlusion_range;
  f.sgt_ego = hidden ? Sightline::no : Sightline::yes;
  f.pos_rival = rival_position(rival.progress, g);
  f.blk_rival = rival_blocking(rival, g) ? Blocking::yes : Blocking::no;
  f.aggr_rival = rival.behavior;
  return f;
}

ObservationSampler::ObservationSampler(const PomdpModel& model)
    : n_states_(model.n_states()), n_obs_(model.n_observations()) {
  cdf_.resize(model.n_actions() * n_states_ * n_obs_);
  for (std::size_t a = 0; a < model.n_actions(); ++a) {
    for (std::size_t s = 0; s < n_states_; ++s) {
      double acc = 0.0;
      double* row = cdf_.data() + (a * n_states_ + s) * n_obs_;
      for (std::size_t o = 0; o < n_obs_; ++o) {
        acc += model.observation(a, s, o);
        row[o] = acc;
      }
    }
  }
}

std::size_t ObservationSampler::sample(std::size_t state, std::size_t action, Rng& rng) const {
  const double* row = cdf_.data() + (action * n_states_ + state) * n_obs_;
  const double u = uniform01(rng) * row[n_obs_ - 1];
  const auto* hit = std::upper_bound(row, row + n_obs_, u);
  std::size_t o = static_cast<std::size_t>(hit - row);
  if (o >= n_obs_) {
    // u rounded up to the total: fall back to the last observation with mass.
    o = n_obs_ - 1;
    while (o > 0 && row[o] == row[o - 1]) --o;
  }
  return o;
}

std::size_t abstract_observe(const WorldState& w, const RivalVehicle& rival,
                             const ScenarioConfig& cfg, const ObservationSampler& z, Rng& rng) {
  // Z is action independent in the T-domain; the stop row is used.
  return z.sample(encode_state(abstract_state(w, rival, cfg)), 0, rng);
}

EgoAction modia_select(std::span<const EgoAction> per_rival_actions) {
  EgoAction safest = EgoAction::go;
  for (EgoAction a : per_rival_actions) safest = std::min(safest, a);
  return safest;
}

RunMetrics score_metrics(const Trajectory& trajectory, const MetricConfig& cfg) {
  const auto& s = trajectory.samples;
  if (s.empty()) throw EmptyInput("trajectory has no samples");
  RunMetrics m;
  m.timeout = trajectory.timeout;

  // Rectangle rule: |a_k| * dt with a_k = dv_k / dt.
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double accel = (s[i].ego_speed - s[i - 1].ego_speed) / trajectory.dt;
    m.discomfort += std::abs(accel) * trajectory.dt;
  }

  double min_d = std::numeric_limits<double>::infinity();
  for (const auto& sample : s) {
    min_d = std::min(min_d, sample.min_distance);
    m.collided = m.collided || sample.collision;
  }
  const double clipped = std::clamp(min_d, cfg.collision_distance, cfg.distance_cap);
  m.collision_risk = m.collided ? 1.0 / cfg.collision_distance : 1.0 / clipped;

  m.time_taken = s.back().clock;
  for (const auto& sample : s) {
    if (sample.ego_progress > trajectory.box_exit) {
      m.time_taken = sample.clock;
      break;
    }
  }
  return m;
}

namespace {

struct Tracker {
  std::uint32_t channel_id;
  Belief belief;
  std::uint32_t last_obs;
  std::size_t channel;  // index into the log
};

TrajectorySample sample_world(const WorldState& w, const ScenarioConfig& cfg) {
  const auto& g = cfg.geometry;
  TrajectorySample s;
  s.clock = w.clock;
  s.ego_progress = w.ego_progress;
  s.ego_speed = w.ego_speed;
  s.min_distance = std::numeric_limits<double>::infinity();
  for (const auto& r : w.rivals) {
    const double d = ego_rival_distance(w.ego_progress, r, g);
    s.min_distance = std::min(s.min_distance, d);
    if (ego_in_box(w.ego_progress, g) && std::abs(r.progress) <= g.conflict_half &&
        rival_blocking(r, g) && d < cfg.metrics.collision_distance) {
      s.collision = true;
    }
  }
  return s;
}

}  // namespace

ScenarioOutcome run_scenario(const ScenarioConfig& cfg, const QMatrix& q, const PomdpModel& model,
                             const RunOptions& opts) {
  if (q.n_states != model.n_states() || q.n_actions != model.n_actions()) {
    throw ShapeMismatch("Q matrix does not match the model");
  }
  if (model.n_states() != kNumStates || model.n_actions() != kNumActions) {
    throw ShapeMismatch("run_scenario needs a T-domain model");
  }
  const ObservationSampler sampler(model);
  Rng obs_rng(derive_seed(cfg.seed, {0x6f6273ull}));
  Rng policy_rng(derive_seed(cfg.seed, {0x706f6cull}));

  ScenarioOutcome out;
  out.log.scenario_id = cfg.seed;
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.box_exit = cfg.geometry.box;

  WorldState w = initial_world(cfg);
  const Belief uniform = Belief::uniform(model.n_states());
  std::vector<Tracker> trackers;

  auto open_tracker = [&](const RivalVehicle& r, EgoAction a) {
    const auto o = static_cast<std::uint32_t>(abstract_observe(w, r, cfg, sampler, obs_rng));
    auto step = belief_condition(uniform, static_cast<std::size_t>(a), o, model);
    out.belief_resets += step.reset;
    out.log.channels.push_back({r.channel_id, static_cast<std::uint32_t>(w.tick), {}});
    return Tracker{r.channel_id, std::move(step.belief), o, out.log.channels.size() - 1};
  };

  for (const auto& r : w.rivals) trackers.push_back(open_tracker(r, EgoAction::stop));
  traj.samples.push_back(sample_world(w, cfg));

  const double finish = cfg.geometry.box + cfg.geometry.exit;
  EgoAction held = EgoAction::stop;
  int hold_left = 0;
  bool finished = false;

  for (std::uint32_t t = 0; t < cfg.max_ticks; ++t) {
    std::vector<EgoAction> recommended;
    recommended.reserve(trackers.size());
    for (const auto& tr : trackers) {
      recommended.push_back(static_cast<EgoAction>(best_action(q, tr.belief)));
    }
    EgoAction action = modia_select(recommended);

    if (opts.fixed_action) {
      action = *opts.fixed_action;
    } else if (w.ego_progress > cfg.geometry.box) {
      // Crossing complete: MODIA hands over and the ego drives on through the exit segment.
      action = EgoAction::go;
    } else if (opts.explore > 0.0) {
      if (hold_left > 0) {
        action = held;
        --hold_left;
      } else if (uniform01(policy_rng) < opts.explore) {
        held = static_cast<EgoAction>(policy_rng() % kNumActions);
        // Geometric holding time with the configured mean.
        const double p_end = 1.0 / std::max(1.0, opts.explore_hold);
        hold_left = 0;
        while (uniform01(policy_rng) >= p_end && hold_left < 64) ++hold_left;
        action = held;
      }
    }

    w = step_world(w, action, cfg);

    std::vector<Tracker> next;
    next.reserve(w.rivals.size());
    for (const auto& r : w.rivals) {
      auto it = std::find_if(trackers.begin(), trackers.end(),
                             [&](const Tracker& tr) { return tr.channel_id == r.channel_id; });
      if (it == trackers.end()) {
        next.push_back(open_tracker(r, action));
        continue;
      }
      const auto o = static_cast<std::uint32_t>(abstract_observe(w, r, cfg, sampler, obs_rng));
      auto step = belief_update_or_reset(it->belief, static_cast<std::size_t>(action), o, model);
      out.belief_resets += step.reset;
      out.log.channels[it->channel].triplets.push_back(
          {it->last_obs, static_cast<std::uint32_t>(action), o});
      next.push_back({it->channel_id, std::move(step.belief), o, it->channel});
    }
    trackers = std::move(next);
    traj.samples.push_back(sample_world(w, cfg));

    if (w.ego_progress >= finish) {
      finished = true;
      break;
    }
  }

  traj.timeout = !finished;
  out.log.duration = static_cast<std::uint32_t>(w.tick);
  std::erase_if(out.log.channels, [](const RivalChannel& ch) { return ch.triplets.empty(); });
  out.metrics = score_metrics(traj, cfg.metrics);
  if (opts.keep_trajectory) out.trajectory = std::move(traj);
  return out;
}

}  // namespace ef
