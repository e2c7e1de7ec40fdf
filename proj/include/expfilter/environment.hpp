#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ef {

enum class Visibility { yes, no };
enum class Density { low, med, high };
/// Shared by the environment descriptor (psi_3) and the rival's latent aggressiveness.
enum class Behavior { cautious, normal, aggressive };

inline constexpr std::size_t kNumEnvironments = 18;

/// Intersection type (psi_1, psi_2, psi_3).
struct EnvironmentState {
  Visibility visibility = Visibility::yes;
  Density density = Density::low;
  Behavior behavior = Behavior::cautious;

  /// Ordinal embedding, every axis scaled to [0, 1]:
  /// visibility {no: 0, yes: 1}, density {low: 0, med: .5, high: 1},
  /// behavior {cautious: 0, normal: .5, aggressive: 1}.
  std::array<double, 3> embedding() const;

  /// Index in [0, 18): visibility * 9 + density * 3 + behavior, in declaration order.
  std::size_t index() const;
  static EnvironmentState from_index(std::size_t index);
  static std::vector<EnvironmentState> all();

  /// Compact tag such as "yes-med-aggressive".
  std::string tag() const;
  static EnvironmentState from_tag(std::string_view tag);

  auto operator<=>(const EnvironmentState&) const = default;
};

std::string_view to_string(Visibility v);
std::string_view to_string(Density d);
std::string_view to_string(Behavior b);
Visibility parse_visibility(std::string_view s);
Density parse_density(std::string_view s);
Behavior parse_behavior(std::string_view s);

}  // namespace ef
