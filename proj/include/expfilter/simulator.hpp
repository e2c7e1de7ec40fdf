#pragma once

// Deterministic kinematic T-intersection world. The ego waits at a stop sign on the
// stem of the T and crosses the main road; rivals travel along the main road. One
// POMDP instance per rival tracks it, and the safest recommended action is executed.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "expfilter/environment.hpp"
#include "expfilter/learner.hpp"
#include "expfilter/pomdp.hpp"
#include "expfilter/rng.hpp"
#include "expfilter/tdomain.hpp"

namespace ef {

/// Lengths in metres. Ego progress is measured along the stem with the intersection box
/// at (0, box]; rival progress along the main road with the conflict point at 0.
struct Geometry {
  double approach = 20.0;
  double box = 8.0;
  double exit = 15.0;
  double crossing_half = 60.0;     // rivals spawn at -crossing_half and leave at +crossing_half
  double occlusion_range = 12.0;   // occluded corners hide rivals farther than this ...
  double occlusion_clear = -2.0;   // ... until the ego has crept past this progress
  double stop_position = -4.0;     // where the ego waits at the stop sign
  double ego_at_zone = 5.0;        // ego is "at" for progress in [-ego_at_zone, 0]
  double conflict_half = 4.0;      // rival is "inside" for |progress| <= conflict_half
  double rival_at_zone = 15.0;     // rival is "at" within this distance of the conflict zone
  double lane_offset = 0.0;        // lateral offset of the rival lane from the conflict point

  void validate() const;
};

struct Kinematics {
  double v_edge = 1.5;
  double v_go = 8.0;
  double a_brake = 4.0;
  double a_accel = 2.5;
  std::array<double, 3> rival_speed{4.0, 7.0, 11.0};  // cautious, normal, aggressive
  double rival_accel = 2.0;
  double rival_brake = 4.0;
  double min_gap = 6.0;       // bumper gap kept behind a leading rival
  double time_headway = 1.0;  // seconds of extra gap per m/s

  void validate() const;
};

struct TrafficModel {
  std::array<double, 3> arrival_rate{0.05, 0.15, 0.30};  // rivals/s for low, med, high density
  // Rows: environment behaviour; columns: P(cautious, normal, aggressive) for a spawned rival.
  std::array<std::array<double, 3>, 3> behavior_mix{{{0.70, 0.25, 0.05},
                                                     {0.20, 0.60, 0.20},
                                                     {0.05, 0.25, 0.70}}};
  double p_turning = 0.25;                        // share of rivals turning into the stem
  std::array<double, 3> p_yield{0.9, 0.5, 0.1};  // by rival behaviour
  double warmup = 15.0;                           // seconds of traffic before the ego starts

  void validate() const;
};

struct MetricConfig {
  double collision_distance = 2.0;  // closer than this with both inside the box collides
  double distance_cap = 50.0;       // minimum distance is clipped here before inverting
};

struct SimulatorSettings {
  Geometry geometry;
  Kinematics kinematics;
  TrafficModel traffic;
  MetricConfig metrics;
  double dt = 0.25;
  std::uint32_t max_ticks = 400;

  void validate() const;
};

struct ScenarioConfig {
  EnvironmentState env;
  std::uint64_t seed = 0;
  double dt = 0.25;
  std::uint32_t max_ticks = 400;
  double arrival_rate = 0.0;
  std::array<double, 3> behavior_mix{1.0, 0.0, 0.0};
  bool occluded = false;
  Geometry geometry;
  Kinematics kinematics;
  TrafficModel traffic;
  MetricConfig metrics;

  /// Derives arrival rate (from density), behaviour mix (from behaviour) and occlusion
  /// (from visibility) for one environment.
  static ScenarioConfig for_environment(const EnvironmentState& env, std::uint64_t seed,
                                        const SimulatorSettings& settings = {});
  void validate() const;
};

enum class Route { crossing, turning_in };

struct RivalVehicle {
  std::uint32_t channel_id = 0;
  double progress = 0.0;
  double speed = 0.0;
  Behavior behavior = Behavior::normal;
  Route route = Route::crossing;
  bool yields = false;  // brakes for an ego that occupies the box
};

struct WorldState {
  double ego_progress = 0.0;
  double ego_speed = 0.0;
  double clock = 0.0;
  std::uint64_t tick = 0;
  std::vector<RivalVehicle> rivals;  // ordered by spawn time, so leaders come first
  std::uint32_t next_channel = 0;
  Rng traffic_rng;
};

/// Advances speed towards a target with constant acceleration (or braking) and integrates
/// position exactly over dt. Returns {distance travelled, final speed}.
std::array<double, 2> integrate_speed(double v, double target, double accel, double brake,
                                      double dt);

/// Ego at rest at the stop position; traffic pre-simulated for the warm-up period.
WorldState initial_world(const ScenarioConfig& cfg);

/// One tick: ego kinematics for the action, rival car-following and yielding,
/// despawning, then Poisson arrivals.
WorldState step_world(const WorldState& w, EgoAction ego_action, const ScenarioConfig& cfg);

bool rival_blocking(const RivalVehicle& r, const Geometry& g);

/// Ground-truth abstract state of the (ego, rival) pair.
FactoredState abstract_state(const WorldState& w, const RivalVehicle& rival,
                             const ScenarioConfig& cfg);

/// Precomputed cumulative rows of Z for sampling observations.
class ObservationSampler {
 public:
  explicit ObservationSampler(const PomdpModel& model);
  std::size_t sample(std::size_t state, std::size_t action, Rng& rng) const;

 private:
  std::size_t n_states_;
  std::size_t n_obs_;
  std::vector<double> cdf_;
};

/// Abstracts the world to a FactoredState and samples an observation index from Z.
std::size_t abstract_observe(const WorldState& w, const RivalVehicle& rival,
                             const ScenarioConfig& cfg, const ObservationSampler& z,
                             Rng& rng);

/// The safest action (stop < edge < go); go when no rival is tracked.
EgoAction modia_select(std::span<const EgoAction> per_rival_actions);

struct TrajectorySample {
  double clock = 0.0;
  double ego_progress = 0.0;
  double ego_speed = 0.0;
  double min_distance = 0.0;  // to the nearest rival this tick; +inf without rivals
  bool collision = false;
};

struct Trajectory {
  double dt = 0.25;
  double box_exit = 8.0;  // ego progress that completes the crossing
  bool timeout = false;
  std::vector<TrajectorySample> samples;  // tick 0 first
};

struct RunMetrics {
  double collision_risk = 0.0;  // 1 / clipped minimum distance; normalised later
  double discomfort = 0.0;      // integral of |acceleration|, m/s
  double time_taken = 0.0;      // s from the stop line to leaving the box
  bool collided = false;
  bool timeout = false;
};

RunMetrics score_metrics(const Trajectory& trajectory, const MetricConfig& cfg = {});

struct RunOptions {
  /// Probability per tick of starting an exploratory action (data collection only).
  double explore = 0.0;
  /// Mean number of ticks an exploratory action is held.
  double explore_hold = 4.0;
  bool keep_trajectory = false;
  /// Executes this action every tick instead of the MODIA choice (fixed reference policies).
  std::optional<EgoAction> fixed_action;
};

struct ScenarioOutcome {
  ScenarioLog log;
  RunMetrics metrics;
  Trajectory trajectory;  // empty unless RunOptions::keep_trajectory
  std::size_t belief_resets = 0;
};

/// Runs the MODIA loop until the ego clears the exit segment or max_ticks elapse.
ScenarioOutcome run_scenario(const ScenarioConfig& cfg, const QMatrix& q, const PomdpModel& model,
                             const RunOptions& opts = {});

}  // namespace ef
