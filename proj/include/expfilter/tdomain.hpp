#pragma once

// The single-rival T-intersection POMDP: factored state codec, observation noise
// model and reward model.

#include <compare>
#include <cstddef>
#include <string_view>
#include <vector>

#include "expfilter/environment.hpp"
#include "expfilter/pomdp.hpp"

namespace ef {

enum class Position { before, at, inside, after };
enum class Sightline { yes, no };
enum class Blocking { yes, no };

/// Ego actions in safety order: stop < edge < go.
enum class EgoAction { stop = 0, edge = 1, go = 2 };

inline constexpr std::size_t kNumStates = 192;  // 4 * 2 * 4 * 2 * 3
inline constexpr std::size_t kNumActions = 3;
inline constexpr std::size_t kNumObservations = kNumStates;

struct FactoredState {
  Position pos_ego = Position::before;
  Sightline sgt_ego = Sightline::yes;
  Position pos_rival = Position::before;
  Blocking blk_rival = Blocking::yes;
  Behavior aggr_rival = Behavior::cautious;

  auto operator<=>(const FactoredState&) const = default;
};

/// Mixed-radix index, most significant digit first:
/// ((((pos_ego * 2 + sgt_ego) * 4 + pos_rival) * 2 + blk_rival) * 3 + aggr_rival).
/// The layout is part of the log and params file formats; do not reorder.
std::size_t encode_state(const FactoredState& f);
FactoredState decode_state(std::size_t index);

struct NoiseConfig {
  double p_correct_pos = 0.9;
  double p_correct_aggr = 0.6;
  double occlusion_penalty = 0.6;  // multiplies p_correct_pos when sgt_ego = no

  void validate() const;
};

struct RewardSpec {
  double r_collision = -1000.0;
  double r_goal = 100.0;
  double r_step = -1.0;
  double r_edge = -2.0;

  void validate() const;
};

/// Z[a][s'][o]. Action independent; pos_ego, sgt_ego and blk_rival are observed exactly,
/// pos_rival and aggr_rival keep their true value with the configured probability and
/// spread the rest uniformly over the alternatives.
std::vector<double> build_observation_model(const NoiseConfig& cfg);

/// R[s][a]: collision when both vehicles are inside and the rival blocks, goal once the
/// ego is after the intersection, step cost (plus edge penalty) otherwise.
std::vector<double> build_reward_model(const RewardSpec& spec);

/// Uniform T[a][s][s'], the mean of the all-ones Dirichlet prior.
std::vector<double> uniform_transition();

inline constexpr double kDefaultDiscount = 0.95;

PomdpModel make_tdomain_model(std::vector<double> transition, const NoiseConfig& noise,
                              const RewardSpec& reward, double discount = kDefaultDiscount);

/// True if the state is a collision state under the reward rule.
bool is_collision_state(const FactoredState& f);

std::string_view to_string(Position p);
std::string_view to_string(EgoAction a);

}  // namespace ef
