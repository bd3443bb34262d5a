#include "smores/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "smores/layout.hpp"

namespace smores {

nlohmann::json sim_config_to_json(const SimConfig& c) {
  return {{"dock_gap", c.dock_gap},
          {"dock_lateral", c.dock_lateral},
          {"dock_angle", c.dock_angle},
          {"contact_tolerance", c.contact_tolerance},
          {"max_dock_attempts", c.max_dock_attempts},
          {"adjust_timeout", c.adjust_timeout},
          {"phase_timeout", c.phase_timeout},
          {"wave_timeout", c.wave_timeout},
          {"lift_duration", c.lift_duration},
          {"place_duration", c.place_duration},
          {"undock_duration", c.undock_duration},
          {"grid_cell", c.grid_cell},
          {"grid_padding", c.grid_padding},
          {"clearance", c.clearance},
          {"carried_clearance", c.carried_clearance}};
}

void apply_sim_config(const nlohmann::json& j, SimConfig& c) {
  const nlohmann::json known = sim_config_to_json(SimConfig{});
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw std::invalid_argument("sim: unknown key '" + key + "'");
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("dock_gap", c.dock_gap);
  read("dock_lateral", c.dock_lateral);
  read("dock_angle", c.dock_angle);
  read("contact_tolerance", c.contact_tolerance);
  read("max_dock_attempts", c.max_dock_attempts);
  read("adjust_timeout", c.adjust_timeout);
  read("phase_timeout", c.phase_timeout);
  read("wave_timeout", c.wave_timeout);
  read("lift_duration", c.lift_duration);
  read("place_duration", c.place_duration);
  read("undock_duration", c.undock_duration);
  read("grid_cell", c.grid_cell);
  read("grid_padding", c.grid_padding);
  read("clearance", c.clearance);
  read("carried_clearance", c.carried_clearance);
}

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> problems;
  if (s.modules.size() != s.target.size())
    problems.push_back("modules: " + std::to_string(s.modules.size()) + " modules but target has " +
                       std::to_string(s.target.size()) + " vertices");

  for (const auto& [id, p] : s.helpers.pose)
    if (s.modules.pose.count(id)) problems.push_back("helpers: id " + std::to_string(id) + " is also an assembly module");

  std::vector<std::pair<std::string, Pose2d>> all;
  for (const auto& [id, p] : s.modules.pose) all.emplace_back("modules[id=" + std::to_string(id) + "]", p);
  for (const auto& [id, p] : s.helpers.pose) all.emplace_back("helpers[id=" + std::to_string(id) + "]", p);
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      const double d = distance(all[a].second, all[b].second);
      if (d <= kModuleWidth) {
        std::ostringstream msg;
        msg << all[a].first << " / " << all[b].first << ": spacing " << d << " m is not greater than module width "
            << kModuleWidth << " m";
        problems.push_back(msg.str());
      }
    }

  const UnfoldReport unfold = check_unfoldable(s.target);
  for (const std::string& v : unfold.violations) problems.push_back("target: " + v);
  return problems;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json target;
  to_json(target, s.target);
  return {{"name", s.name},
          {"modules", module_set_to_json(s.modules)},
          {"helpers", module_set_to_json(s.helpers)},
          {"target", target},
          {"config", {{"motion", motion_config_to_json(s.motion)}, {"sim", sim_config_to_json(s.sim)}}},
          {"seed", s.seed}};
}

void apply_config_overrides(const nlohmann::json& j, Scenario& s) {
  for (const auto& [key, value] : j.items())
    if (key != "motion" && key != "sim") throw std::invalid_argument("config: unknown section '" + key + "'");
  if (j.contains("motion")) apply_motion_config(j.at("motion"), s.motion);
  if (j.contains("sim")) apply_sim_config(j.at("sim"), s.sim);
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  std::vector<std::string> problems;
  auto section = [&](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(std::string(field) + ": " + e.what());
    }
  };
  section("name", [&] { s.name = j.value("name", std::string()); });
  section("modules", [&] { s.modules = module_set_from_json(j.at("modules")); });
  section("helpers", [&] {
    if (j.contains("helpers")) s.helpers = module_set_from_json(j.at("helpers"));
  });
  section("target", [&] { from_json(j.at("target"), s.target); });
  section("config", [&] {
    if (j.contains("config")) apply_config_overrides(j.at("config"), s);
  });
  section("seed", [&] { s.seed = j.value("seed", 0u); });

  if (problems.empty()) problems = validate_scenario(s);
  if (!problems.empty()) {
    std::string msg = "invalid scenario:";
    for (const std::string& p : problems) msg += "\n  " + p;
    throw ScenarioError(msg);
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError("parse error in " + path.string() + ": " + e.what());
  }
  Scenario s = scenario_from_json(j);
  if (s.name.empty()) s.name = path.stem().string();
  return s;
}

}  // namespace smores
