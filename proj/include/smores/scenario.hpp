#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "smores/assignment.hpp"
#include "smores/motion.hpp"
#include "smores/topology.hpp"

namespace smores {

/// Parameters of the simulated world (SI units).
struct SimConfig {
  double dock_gap = 4e-3;        ///< m, normal acceptance
  double dock_lateral = 7e-3;    ///< m, in-plane acceptance parallel to the face
  double dock_angle = 0.1;       ///< rad
  double contact_tolerance = 1e-3;  ///< m, overlap below this is contact, not collision
  int max_dock_attempts = 3;
  double adjust_timeout = 40.0;  ///< s per alignment attempt
  double phase_timeout = 120.0;  ///< s for one navigation step or approach
  double wave_timeout = 600.0;   ///< s
  double lift_duration = 3.0;
  double place_duration = 3.0;
  double undock_duration = 1.0;
  double grid_cell = 0.1;
  int grid_padding = 2;
  double clearance = 0.115;         ///< m, blocked radius around obstacles for a single module
  double carried_clearance = 0.19;  ///< m, same for a helper carrying a module
};

nlohmann::json sim_config_to_json(const SimConfig& c);
void apply_sim_config(const nlohmann::json& j, SimConfig& c);

/// Everything needed for one end-to-end run.
struct Scenario {
  std::string name;
  ModuleSet modules;  ///< initial world poses of the modules to assemble
  ModuleSet helpers;  ///< initial world poses of helper modules
  ConfigGraph target;
  MotionConfig motion;
  SimConfig sim;
  /// Only used when generating randomized instances; the pipeline is deterministic.
  unsigned seed = 0;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field-path-qualified problems; empty when the scenario is usable.
std::vector<std::string> validate_scenario(const Scenario& s);

nlohmann::json scenario_to_json(const Scenario& s);
/// Throws ScenarioError listing every violation.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
void apply_config_overrides(const nlohmann::json& j, Scenario& s);

}  // namespace smores
