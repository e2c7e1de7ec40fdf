#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "expfilter/io.hpp"
#include "oracles.hpp"

using namespace ef;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("expfilter_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("model JSON round trip") {
  oracle::Rng rng(5);
  const auto m = oracle::random_model(rng, 3, 2, 4, 0.8);
  const auto back = model_from_json(model_to_json(m));
  CHECK(back.n_states() == 3);
  CHECK(back.n_observations() == 4);
  CHECK(std::equal(back.transition_data().begin(), back.transition_data().end(),
                   m.transition_data().begin()));
  CHECK(std::equal(back.observation_data().begin(), back.observation_data().end(),
                   m.observation_data().begin()));
  CHECK(std::equal(back.reward_data().begin(), back.reward_data().end(),
                   m.reward_data().begin()));
  CHECK(back.discount() == 0.8);

  auto j = model_to_json(m);
  j["transition"][0].erase(0);
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  CHECK_THROWS_AS(model_from_json(Json::object()), FormatError);
}

TEST_CASE("scenario log round trip") {
  std::vector<ScenarioLog> logs(2);
  logs[0].scenario_id = 7;
  logs[0].channels.push_back({0, 3, {{1, 0, 2}, {2, 2, 5}}});
  logs[0].channels.push_back({4, 10, {{9, 1, 9}}});
  logs[1].scenario_id = 8;
  logs[1].channels.push_back({1, 0, {{0, 0, 0}}});
  std::stringstream ss;
  write_scenario_logs(ss, logs);
  const auto back = read_scenario_logs(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].channels == logs[0].channels);
  CHECK(back[1].channels == logs[1].channels);
  CHECK(back[0].duration == 11);

  std::stringstream bad_header("a,b,c\n");
  CHECK_THROWS_AS(read_scenario_logs(bad_header), FormatError);
  std::stringstream empty;
  CHECK_THROWS_AS(read_scenario_logs(empty), FormatError);
  std::stringstream gap;
  write_scenario_logs(gap, {});
  gap.seekg(0);
  std::string header;
  std::getline(gap, header);
  std::stringstream broken(header + "\n1,0,0,1,0,2\n1,0,2,2,0,3\n");
  CHECK_THROWS_AS(read_scenario_logs(broken), FormatError);
  std::stringstream unchained(header + "\n1,0,0,1,0,2\n1,0,1,3,0,3\n");
  CHECK_THROWS_AS(read_scenario_logs(unchained), FormatError);
  std::stringstream garbage(header + "\n1,x,0,1,0,2\n");
  CHECK_THROWS_AS(read_scenario_logs(garbage), FormatError);
}

TEST_CASE("params binary round trip") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.5, 100.0);
  std::vector<double> v(5 * 2 * 5);
  for (auto& x : v) x = u(rng);
  const DirichletPolicyParams p(5, 2, v, EnvironmentState::from_index(13));
  std::stringstream ss;
  write_params(ss, p);
  CHECK(ss.str().size() == 8 + 4 * 3 + 4 + 8 * v.size());
  CHECK(read_params(ss) == p);

  const DirichletPolicyParams anon(5, 2, v);
  std::stringstream s2;
  write_params(s2, anon);
  CHECK_FALSE(read_params(s2).source_env().has_value());

  std::stringstream bad_magic("NOTPARAMS-------------------");
  CHECK_THROWS_AS(read_params(bad_magic), FormatError);
  std::stringstream truncated(ss.str().substr(0, 40));
  CHECK_THROWS_AS(read_params(truncated), FormatError);

  const auto dir = scratch_dir("params");
  save_params(dir / "p.efp", p);
  CHECK(load_params(dir / "p.efp") == p);
  CHECK_THROWS_AS(load_params(dir / "missing.efp"), FormatError);
}

TEST_CASE("library directory round trip") {
  ExperienceLibrary lib;
  for (std::size_t i : {0ul, 5ul, 17ul}) {
    lib.add(EnvironmentState::from_index(i),
            DirichletPolicyParams(2, 1, {1.0 + static_cast<double>(i), 2, 3, 4}));
  }
  const auto dir = scratch_dir("library");
  save_library(dir, lib, {1.5, 0.25});
  const auto back = load_library(dir);
  REQUIRE(back.library.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.library[i].env == lib[i].env);
    CHECK(std::equal(back.library[i].params.data().begin(), back.library[i].params.data().end(),
                     lib[i].params.data().begin()));
  }
  CHECK(back.kernel.sigma == 1.5);
  CHECK(back.kernel.lengthscale == 0.25);
  CHECK_THROWS_AS(load_library(scratch_dir("nothing")), FormatError);
}

TEST_CASE("config JSON") {
  ToolkitConfig c;
  c.kernel.lengthscale = 0.8;
  c.simulator.traffic.arrival_rate = {0.1, 0.2, 0.4};
  c.plan.training_efforts = {2, 4};
  c.plan.all_envs = {EnvironmentState::from_index(0), EnvironmentState::from_index(1),
                     EnvironmentState::from_index(2), EnvironmentState::from_index(3),
                     EnvironmentState::from_index(4)};
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.plan.all_envs == c.plan.all_envs);

  // Missing keys keep their defaults.
  const auto partial = config_from_json(Json::parse(R"({"kernel": {"sigma": 3.0}})"));
  CHECK(partial.kernel.sigma == 3.0);
  CHECK(partial.kernel.lengthscale == KernelConfig{}.lengthscale);
  CHECK(partial.plan.scenarios_per_env == 101);
  CHECK(partial.noise.p_correct_pos == 0.9);

  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"discount": "high"})")), FormatError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"discount": 1.0})")), Error);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"plan": {"training_efforts": [18]}})")),
                  Error);

  const auto dir = scratch_dir("config");
  {
    std::ofstream os(dir / "bad.json");
    os << "{ not json";
  }
  CHECK_THROWS_AS(load_config(dir / "bad.json"), FormatError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), FormatError);
}
