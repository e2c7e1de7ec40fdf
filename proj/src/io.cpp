#include "expfilter/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ef {

namespace {

static_assert(std::endian::native == std::endian::little, "params format assumes little-endian");

constexpr std::array<char, 8> kMagic{'E', 'F', 'P', 'A', 'R', 'A', 'M', 'S'};
constexpr std::uint32_t kParamsVersion = 1;
constexpr const char* kLogHeader = "scenario_id,channel_id,t,o_t,a_t,o_t+1";

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated params stream");
  return v;
}

template <typename T>
void read_if(const Json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

std::vector<double> flatten3(const Json& j, std::size_t d0, std::size_t d1, std::size_t d2,
                             const char* what) {
  std::vector<double> out;
  out.reserve(d0 * d1 * d2);
  if (!j.is_array() || j.size() != d0) throw FormatError(std::string(what) + " has wrong shape");
  for (const auto& a : j) {
    if (!a.is_array() || a.size() != d1) throw FormatError(std::string(what) + " has wrong shape");
    for (const auto& b : a) {
      if (!b.is_array() || b.size() != d2) {
        throw FormatError(std::string(what) + " has wrong shape");
      }
      for (const auto& v : b) out.push_back(v.get<double>());
    }
  }
  return out;
}

Json nest3(std::span<const double> data, std::size_t d0, std::size_t d1, std::size_t d2) {
  Json out = Json::array();
  for (std::size_t i = 0; i < d0; ++i) {
    Json mid = Json::array();
    for (std::size_t j = 0; j < d1; ++j) {
      const auto* row = data.data() + (i * d1 + j) * d2;
      mid.push_back(std::vector<double>(row, row + d2));
    }
    out.push_back(std::move(mid));
  }
  return out;
}

}  // namespace

Json model_to_json(const PomdpModel& model) {
  const std::size_t ns = model.n_states(), na = model.n_actions(), no = model.n_observations();
  Json j;
  j["n_states"] = ns;
  j["n_actions"] = na;
  j["n_observations"] = no;
  j["transition"] = nest3(model.transition_data(), na, ns, ns);
  j["observation"] = nest3(model.observation_data(), na, ns, no);
  Json reward = Json::array();
  for (std::size_t s = 0; s < ns; ++s) {
    const auto* row = model.reward_data().data() + s * na;
    reward.push_back(std::vector<double>(row, row + na));
  }
  j["reward"] = std::move(reward);
  j["discount"] = model.discount();
  return j;
}

PomdpModel model_from_json(const Json& j) {
  try {
    const auto ns = j.at("n_states").get<std::size_t>();
    const auto na = j.at("n_actions").get<std::size_t>();
    const auto no = j.at("n_observations").get<std::size_t>();
    auto t = flatten3(j.at("transition"), na, ns, ns, "transition");
    auto z = flatten3(j.at("observation"), na, ns, no, "observation");
    std::vector<double> r;
    const auto& jr = j.at("reward");
    if (!jr.is_array() || jr.size() != ns) throw FormatError("reward has wrong shape");
    for (const auto& row : jr) {
      if (!row.is_array() || row.size() != na) throw FormatError("reward has wrong shape");
      for (const auto& v : row) r.push_back(v.get<double>());
    }
    return PomdpModel(ns, na, no, std::move(t), std::move(z), std::move(r),
                      j.at("discount").get<double>());
  } catch (const Json::exception& e) {
    throw FormatError(std::string("invalid model JSON: ") + e.what());
  }
}

void write_scenario_logs(std::ostream& os, std::span<const ScenarioLog> logs) {
  os << kLogHeader << '\n';
  for (const auto& log : logs) {
    for (const auto& ch : log.channels) {
      std::uint64_t t = ch.start_tick;
      for (const auto& tr : ch.triplets) {
        os << log.scenario_id << ',' << ch.id << ',' << t++ << ',' << tr.obs << ',' << tr.action
           << ',' << tr.obs_next << '\n';
      }
    }
  }
}

std::vector<ScenarioLog> read_scenario_logs(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("scenario log is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLogHeader) throw FormatError("unexpected scenario log header '" + line + "'");

  std::vector<ScenarioLog> logs;
  std::uint64_t last_t = 0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::uint64_t, 6> f{};
    std::istringstream ss(line);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!(ss >> f[i])) throw FormatError("bad field on log line " + std::to_string(line_no));
      if (i + 1 < f.size()) {
        char comma = 0;
        if (!(ss >> comma) || comma != ',') {
          throw FormatError("expected ',' on log line " + std::to_string(line_no));
        }
      }
    }
    const auto [scenario, channel, t, o, a, o_next] = f;
    if (logs.empty() || logs.back().scenario_id != scenario) {
      logs.push_back({scenario, 0, {}});
    }
    auto& log = logs.back();
    if (log.channels.empty() || log.channels.back().id != channel) {
      log.channels.push_back({static_cast<std::uint32_t>(channel),
                              static_cast<std::uint32_t>(t), {}});
    } else if (t != last_t + 1) {
      throw FormatError("non-consecutive tick on log line " + std::to_string(line_no));
    }
    log.channels.back().triplets.push_back({static_cast<std::uint32_t>(o),
                                            static_cast<std::uint32_t>(a),
                                            static_cast<std::uint32_t>(o_next)});
    log.duration = std::max(log.duration, static_cast<std::uint32_t>(t + 1));
    last_t = t;
  }
  for (const auto& log : logs) log.check_contiguity();
  return logs;
}

void write_params(std::ostream& os, const DirichletPolicyParams& params) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kParamsVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.n_states()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.n_actions()));
  const auto& env = params.source_env();
  put<std::uint8_t>(os, env.has_value());
  put<std::uint8_t>(os, env ? static_cast<std::uint8_t>(env->visibility) : 0);
  put<std::uint8_t>(os, env ? static_cast<std::uint8_t>(env->density) : 0);
  put<std::uint8_t>(os, env ? static_cast<std::uint8_t>(env->behavior) : 0);
  const auto data = params.data();
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!os) throw FormatError("failed to write params");
}

DirichletPolicyParams read_params(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw FormatError("not a params file");
  if (get<std::uint32_t>(is) != kParamsVersion) throw FormatError("unsupported params version");
  const auto ns = get<std::uint32_t>(is);
  const auto na = get<std::uint32_t>(is);
  const auto has_env = get<std::uint8_t>(is);
  const auto vis = get<std::uint8_t>(is);
  const auto den = get<std::uint8_t>(is);
  const auto beh = get<std::uint8_t>(is);
  std::optional<EnvironmentState> env;
  if (has_env != 0) {
    if (vis > 1 || den > 2 || beh > 2) throw FormatError("bad environment tag in params");
    env = EnvironmentState{static_cast<Visibility>(vis), static_cast<Density>(den),
                           static_cast<Behavior>(beh)};
  }
  std::vector<double> data(static_cast<std::size_t>(ns) * na * ns);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!is) throw FormatError("truncated params payload");
  return DirichletPolicyParams(ns, na, std::move(data), env);
}

void save_params(const std::filesystem::path& path, const DirichletPolicyParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_params(os, params);
}

DirichletPolicyParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_params(is);
}

void save_library(const std::filesystem::path& dir, const ExperienceLibrary& lib,
                  const KernelConfig& kernel) {
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["kernel"] = {{"sigma", kernel.sigma}, {"lengthscale", kernel.lengthscale}};
  manifest["entries"] = Json::array();
  for (const auto& e : lib.entries()) {
    const std::string file = e.env.tag() + ".efp";
    save_params(dir / file, e.params);
    manifest["entries"].push_back({{"file", file},
                                   {"visibility", to_string(e.env.visibility)},
                                   {"density", to_string(e.env.density)},
                                   {"behavior", to_string(e.env.behavior)}});
  }
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
}

LoadedLibrary load_library(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw FormatError("no manifest.json in " + dir.string());
  try {
    const Json manifest = Json::parse(is);
    LoadedLibrary out;
    read_if(manifest.at("kernel"), "sigma", out.kernel.sigma);
    read_if(manifest.at("kernel"), "lengthscale", out.kernel.lengthscale);
    out.kernel.validate();
    for (const auto& e : manifest.at("entries")) {
      const EnvironmentState env{parse_visibility(e.at("visibility").get<std::string>()),
                                 parse_density(e.at("density").get<std::string>()),
                                 parse_behavior(e.at("behavior").get<std::string>())};
      out.library.add(env, load_params(dir / e.at("file").get<std::string>()));
    }
    return out;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("invalid manifest: ") + e.what());
  }
}

void ToolkitConfig::validate() const {
  noise.validate();
  reward.validate();
  simulator.validate();
  kernel.validate();
  plan.validate();
  if (!(discount >= 0.0 && discount < 1.0)) throw Error("discount must lie in [0, 1)");
  if (!(solver.tol > 0.0) || solver.max_iter == 0) throw Error("invalid solver options");
  if (!(prior_alpha > 0.0)) throw Error("prior_alpha must be positive");
  if (!(train_explore >= 0.0 && train_explore <= 1.0)) throw Error("train_explore must be in [0,1]");
  if (!(train_explore_hold >= 1.0)) throw Error("train_explore_hold must be at least 1");
}

Json config_to_json(const ToolkitConfig& c) {
  const auto& g = c.simulator.geometry;
  const auto& k = c.simulator.kinematics;
  const auto& tr = c.simulator.traffic;
  Json j;
  j["noise"] = {{"p_correct_pos", c.noise.p_correct_pos},
                {"p_correct_aggr", c.noise.p_correct_aggr},
                {"occlusion_penalty", c.noise.occlusion_penalty}};
  j["reward"] = {{"r_collision", c.reward.r_collision},
                 {"r_goal", c.reward.r_goal},
                 {"r_step", c.reward.r_step},
                 {"r_edge", c.reward.r_edge}};
  j["discount"] = c.discount;
  j["solver"] = {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}};
  j["kernel"] = {{"sigma", c.kernel.sigma}, {"lengthscale", c.kernel.lengthscale}};
  j["learning"] = {{"prior_alpha", c.prior_alpha},
                   {"train_explore", c.train_explore},
                   {"train_explore_hold", c.train_explore_hold}};
  j["simulator"] = {
      {"dt", c.simulator.dt},
      {"max_ticks", c.simulator.max_ticks},
      {"geometry",
       {{"approach", g.approach},
        {"box", g.box},
        {"exit", g.exit},
        {"crossing_half", g.crossing_half},
        {"occlusion_range", g.occlusion_range},
        {"occlusion_clear", g.occlusion_clear},
        {"stop_position", g.stop_position},
        {"ego_at_zone", g.ego_at_zone},
        {"conflict_half", g.conflict_half},
        {"rival_at_zone", g.rival_at_zone},
        {"lane_offset", g.lane_offset}}},
      {"kinematics",
       {{"v_edge", k.v_edge},
        {"v_go", k.v_go},
        {"a_brake", k.a_brake},
        {"a_accel", k.a_accel},
        {"rival_speed", k.rival_speed},
        {"rival_accel", k.rival_accel},
        {"rival_brake", k.rival_brake},
        {"min_gap", k.min_gap},
        {"time_headway", k.time_headway}}},
      {"traffic",
       {{"arrival_rate", tr.arrival_rate},
        {"behavior_mix", tr.behavior_mix},
        {"p_turning", tr.p_turning},
        {"p_yield", tr.p_yield},
        {"warmup", tr.warmup}}},
      {"metrics",
       {{"collision_distance", c.simulator.metrics.collision_distance},
        {"distance_cap", c.simulator.metrics.distance_cap}}}};
  std::vector<std::string> envs;
  for (const auto& e : c.plan.all_envs) envs.push_back(e.tag());
  j["plan"] = {{"environments", envs},
               {"training_efforts", c.plan.training_efforts},
               {"scenarios_per_env", c.plan.scenarios_per_env},
               {"eval_trials_per_env", c.plan.eval_trials_per_env},
               {"subset_draws", c.plan.subset_draws},
               {"master_seed", c.plan.master_seed}};
  return j;
}

ToolkitConfig config_from_json(const Json& j) {
  ToolkitConfig c;
  try {
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      read_if(n, "p_correct_pos", c.noise.p_correct_pos);
      read_if(n, "p_correct_aggr", c.noise.p_correct_aggr);
      read_if(n, "occlusion_penalty", c.noise.occlusion_penalty);
    }
    if (j.contains("reward")) {
      const auto& r = j.at("reward");
      read_if(r, "r_collision", c.reward.r_collision);
      read_if(r, "r_goal", c.reward.r_goal);
      read_if(r, "r_step", c.reward.r_step);
      read_if(r, "r_edge", c.reward.r_edge);
    }
    read_if(j, "discount", c.discount);
    if (j.contains("solver")) {
      read_if(j.at("solver"), "tol", c.solver.tol);
      read_if(j.at("solver"), "max_iter", c.solver.max_iter);
    }
    if (j.contains("kernel")) {
      read_if(j.at("kernel"), "sigma", c.kernel.sigma);
      read_if(j.at("kernel"), "lengthscale", c.kernel.lengthscale);
    }
    if (j.contains("learning")) {
      const auto& l = j.at("learning");
      read_if(l, "prior_alpha", c.prior_alpha);
      read_if(l, "train_explore", c.train_explore);
      read_if(l, "train_explore_hold", c.train_explore_hold);
    }
    if (j.contains("simulator")) {
      const auto& s = j.at("simulator");
      read_if(s, "dt", c.simulator.dt);
      read_if(s, "max_ticks", c.simulator.max_ticks);
      if (s.contains("geometry")) {
        const auto& g = s.at("geometry");
        auto& d = c.simulator.geometry;
        read_if(g, "approach", d.approach);
        read_if(g, "box", d.box);
        read_if(g, "exit", d.exit);
        read_if(g, "crossing_half", d.crossing_half);
        read_if(g, "occlusion_range", d.occlusion_range);
        read_if(g, "occlusion_clear", d.occlusion_clear);
        read_if(g, "stop_position", d.stop_position);
        read_if(g, "ego_at_zone", d.ego_at_zone);
        read_if(g, "conflict_half", d.conflict_half);
        read_if(g, "rival_at_zone", d.rival_at_zone);
        read_if(g, "lane_offset", d.lane_offset);
      }
      if (s.contains("kinematics")) {
        const auto& k = s.at("kinematics");
        auto& d = c.simulator.kinematics;
        read_if(k, "v_edge", d.v_edge);
        read_if(k, "v_go", d.v_go);
        read_if(k, "a_brake", d.a_brake);
        read_if(k, "a_accel", d.a_accel);
        read_if(k, "rival_speed", d.rival_speed);
        read_if(k, "rival_accel", d.rival_accel);
        read_if(k, "rival_brake", d.rival_brake);
        read_if(k, "min_gap", d.min_gap);
        read_if(k, "time_headway", d.time_headway);
      }
      if (s.contains("traffic")) {
        const auto& t = s.at("traffic");
        auto& d = c.simulator.traffic;
        read_if(t, "arrival_rate", d.arrival_rate);
        read_if(t, "behavior_mix", d.behavior_mix);
        read_if(t, "p_turning", d.p_turning);
        read_if(t, "p_yield", d.p_yield);
        read_if(t, "warmup", d.warmup);
      }
      if (s.contains("metrics")) {
        read_if(s.at("metrics"), "collision_distance", c.simulator.metrics.collision_distance);
        read_if(s.at("metrics"), "distance_cap", c.simulator.metrics.distance_cap);
      }
    }
    if (j.contains("plan")) {
      const auto& p = j.at("plan");
      if (p.contains("environments")) {
        c.plan.all_envs.clear();
        for (const auto& tag : p.at("environments")) {
          c.plan.all_envs.push_back(EnvironmentState::from_tag(tag.get<std::string>()));
        }
      }
      read_if(p, "training_efforts", c.plan.training_efforts);
      read_if(p, "scenarios_per_env", c.plan.scenarios_per_env);
      read_if(p, "eval_trials_per_env", c.plan.eval_trials_per_env);
      read_if(p, "subset_draws", c.plan.subset_draws);
      read_if(p, "master_seed", c.plan.master_seed);
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config " + path.string());
  try {
    return config_from_json(Json::parse(is));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace ef
