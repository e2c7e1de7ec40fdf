#include "expfilter/tdomain.hpp"

#include <string>

namespace ef {

namespace {

constexpr std::size_t kPos = 4;
constexpr std::size_t kBin = 2;
constexpr std::size_t kAggr = 3;

template <typename E>
std::size_t digit(E e) {
  return static_cast<std::size_t>(e);
}

bool in_unit(double p) { return p > 0.0 && p <= 1.0; }

}  // namespace

std::size_t encode_state(const FactoredState& f) {
  const std::size_t pe = digit(f.pos_ego), sg = digit(f.sgt_ego), pr = digit(f.pos_rival),
                    bl = digit(f.blk_rival), ag = digit(f.aggr_rival);
  if (pe >= kPos || sg >= kBin || pr >= kPos || bl >= kBin || ag >= kAggr) {
    throw IndexOutOfRange("factored state component out of range");
  }
  return (((pe * kBin + sg) * kPos + pr) * kBin + bl) * kAggr + ag;
}

FactoredState decode_state(std::size_t index) {
  if (index >= kNumStates) throw IndexOutOfRange("state index " + std::to_string(index));
  FactoredState f;
  f.aggr_rival = static_cast<Behavior>(index % kAggr);
  index /= kAggr;
  f.blk_rival = static_cast<Blocking>(index % kBin);
  index /= kBin;
  f.pos_rival = static_cast<Position>(index % kPos);
  index /= kPos;
  f.sgt_ego = static_cast<Sightline>(index % kBin);
  index /= kBin;
  f.pos_ego = static_cast<Position>(index);
  return f;
}

void NoiseConfig::validate() const {
  if (!in_unit(p_correct_pos) || !in_unit(p_correct_aggr) || !in_unit(occlusion_penalty)) {
    throw Error("noise probabilities must lie in (0, 1]");
  }
}

void RewardSpec::validate() const {
  if (!(r_collision < r_step && r_step < 0.0 && 0.0 < r_goal)) {
    throw Error("reward spec must satisfy r_collision < r_step < 0 < r_goal");
  }
  if (!(r_edge <= 0.0)) throw Error("edge penalty must be non-positive");
}

std::vector<double> build_observation_model(const NoiseConfig& cfg) {
  cfg.validate();
  std::vector<double> z(kNumActions * kNumStates * kNumObservations, 0.0);
  for (std::size_t sn = 0; sn < kNumStates; ++sn) {
    const FactoredState truth = decode_state(sn);
    const double p_pos = cfg.p_correct_pos *
                         (truth.sgt_ego == Sightline::no ? cfg.occlusion_penalty : 1.0);
    const double p_aggr = cfg.p_correct_aggr;
    for (std::size_t o = 0; o < kNumObservations; ++o) {
      const FactoredState obs = decode_state(o);
      if (obs.pos_ego != truth.pos_ego || obs.sgt_ego != truth.sgt_ego ||
          obs.blk_rival != truth.blk_rival) {
        continue;
      }
      const double fp = obs.pos_rival == truth.pos_rival ? p_pos : (1.0 - p_pos) / (kPos - 1);
      const double fa =
          obs.aggr_rival == truth.aggr_rival ? p_aggr : (1.0 - p_aggr) / (kAggr - 1);
      for (std::size_t a = 0; a < kNumActions; ++a) {
        z[(a * kNumStates + sn) * kNumObservations + o] = fp * fa;
      }
    }
  }
  return z;
}

bool is_collision_state(const FactoredState& f) {
  return f.pos_ego == Position::inside && f.pos_rival == Position::inside &&
         f.blk_rival == Blocking::yes;
}

std::vector<double> build_reward_model(const RewardSpec& spec) {
  spec.validate();
  std::vector<double> r(kNumStates * kNumActions, 0.0);
  for (std::size_t s = 0; s < kNumStates; ++s) {
    const FactoredState f = decode_state(s);
    for (std::size_t a = 0; a < kNumActions; ++a) {
      double v;
      if (is_collision_state(f)) {
        v = spec.r_collision;
      } else if (f.pos_ego == Position::after) {
        v = spec.r_goal;
      } else {
        v = spec.r_step + (a == digit(EgoAction::edge) ? spec.r_edge : 0.0);
      }
      r[s * kNumActions + a] = v;
    }
  }
  return r;
}

std::vector<double> uniform_transition() {
  return std::vector<double>(kNumActions * kNumStates * kNumStates,
                             1.0 / static_cast<double>(kNumStates));
}

PomdpModel make_tdomain_model(std::vector<double> transition, const NoiseConfig& noise,
                              const RewardSpec& reward, double discount) {
  return PomdpModel(kNumStates, kNumActions, kNumObservations, std::move(transition),
                    build_observation_model(noise), build_reward_model(reward), discount);
}

std::string_view to_string(Position p) {
  switch (p) {
    case Position::before: return "before";
    case Position::at: return "at";
    case Position::inside: return "inside";
    case Position::after: return "after";
  }
  return "?";
}

std::string_view to_string(EgoAction a) {
  switch (a) {
    case EgoAction::stop: return "stop";
    case EgoAction::edge: return "edge";
    case EgoAction::go: return "go";
  }
  return "?";
}

}  // namespace ef
