#include "expfilter/environment.hpp"

#include "expfilter/errors.hpp"

namespace ef {

std::array<double, 3> EnvironmentState::embedding() const {
  return {visibility == Visibility::yes ? 1.0 : 0.0, 0.5 * static_cast<double>(density),
          0.5 * static_cast<double>(behavior)};
}

std::size_t EnvironmentState::index() const {
  return static_cast<std::size_t>(visibility) * 9 + static_cast<std::size_t>(density) * 3 +
         static_cast<std::size_t>(behavior);
}

EnvironmentState EnvironmentState::from_index(std::size_t index) {
  if (index >= kNumEnvironments) {
    throw IndexOutOfRange("environment index " + std::to_string(index));
  }
  return {static_cast<Visibility>(index / 9), static_cast<Density>((index / 3) % 3),
          static_cast<Behavior>(index % 3)};
}

std::vector<EnvironmentState> EnvironmentState::all() {
  std::vector<EnvironmentState> out;
  out.reserve(kNumEnvironments);
  for (std::size_t i = 0; i < kNumEnvironments; ++i) out.push_back(from_index(i));
  return out;
}

std::string EnvironmentState::tag() const {
  std::string out(to_string(visibility));
  out += '-';
  out += to_string(density);
  out += '-';
  out += to_string(behavior);
  return out;
}

EnvironmentState EnvironmentState::from_tag(std::string_view tag) {
  const auto first = tag.find('-');
  const auto second = first == std::string_view::npos ? first : tag.find('-', first + 1);
  if (second == std::string_view::npos) {
    throw FormatError("malformed environment tag '" + std::string(tag) + "'");
  }
  return {parse_visibility(tag.substr(0, first)),
          parse_density(tag.substr(first + 1, second - first - 1)),
          parse_behavior(tag.substr(second + 1))};
}

std::string_view to_string(Visibility v) { return v == Visibility::yes ? "yes" : "no"; }

std::string_view to_string(Density d) {
  switch (d) {
    case Density::low: return "low";
    case Density::med: return "med";
    case Density::high: return "high";
  }
  return "?";
}

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::cautious: return "cautious";
    case Behavior::normal: return "normal";
    case Behavior::aggressive: return "aggressive";
  }
  return "?";
}

Visibility parse_visibility(std::string_view s) {
  if (s == "yes") return Visibility::yes;
  if (s == "no") return Visibility::no;
  throw FormatError("unknown visibility '" + std::string(s) + "'");
}

Density parse_density(std::string_view s) {
  if (s == "low") return Density::low;
  if (s == "med") return Density::med;
  if (s == "high") return Density::high;
  throw FormatError("unknown density '" + std::string(s) + "'");
}

Behavior parse_behavior(std::string_view s) {
  if (s == "cautious") return Behavior::cautious;
  if (s == "normal") return Behavior::normal;
  if (s == "aggressive") return Behavior::aggressive;
  throw FormatError("unknown behavior '" + std::string(s) + "'");
}

}  // namespace ef
