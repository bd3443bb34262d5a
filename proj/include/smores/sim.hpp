#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smores/assignment.hpp"
#include "smores/geometry.hpp"
#include "smores/layout.hpp"
#include "smores/motion.hpp"
#include "smores/scenario.hpp"
#include "smores/scheduler.hpp"
#include "smores/topology.hpp"

namespace smores {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A docked face pair.
struct Attachment {
  ModuleId a = 0;
  Face fa = Face::kTop;
  ModuleId b = 0;
  Face fb = Face::kTop;

  bool involves(ModuleId m) const { return a == m || b == m; }
  bool operator==(const Attachment&) const = default;
};

using ModulePair = std::pair<ModuleId, ModuleId>;
inline ModulePair ordered_pair(ModuleId a, ModuleId b) { return a < b ? ModulePair{a, b} : ModulePair{b, a}; }

struct WorldState {
  std::map<ModuleId, Pose2d> pose;  ///< world frame
  std::vector<Attachment> attachments;
  /// carried module -> helper lifting it
  std::map<ModuleId, ModuleId> carried_by;
  /// Modules that never move (the physical root); commands to anything rigidly
  /// connected to them are rejected.
  std::set<ModuleId> anchored;
  double clock = 0.0;

  /// Modules moving rigidly with `m` (attachments and lifts), ascending.
  std::vector<ModuleId> component(ModuleId m) const;
  bool face_in_use(ModuleId m, Face f) const;
  bool attached(ModuleId a, ModuleId b) const;
  void detach(ModuleId a, ModuleId b);
  /// Current attachments as a configuration graph over `modules`.
  ConfigGraph attachment_graph(const std::vector<ModuleId>& modules) const;
};

using Commands = std::map<ModuleId, VelocityCommand>;

/// Advances every commanded module by one Euler step and carries its rigid
/// component along. Throws SimError for a command to an anchored component or
/// two commands to the same component.
WorldState step_world(const WorldState& world, const Commands& commands, double dt);

/// Face-pair geometry of a dock action: signed gap along the target face
/// normal, in-plane offset along the face and angle between the faces.
struct DockGeometry {
  double gap = 0.0;
  double lateral = 0.0;
  double angle = 0.0;
};

DockGeometry dock_geometry(const WorldState& world, const AssemblyAction& action);

struct DockOutcome {
  bool docked = false;
  DockGeometry geometry;
};

/// Docks when the mover's face lies inside the area of acceptance (closed
/// bounds). On success the mover's component snaps to the exact mating pose.
DockOutcome try_dock(WorldState& world, const AssemblyAction& action, const SimConfig& cfg);

/// Penetration depth of two oriented squares (separating-axis test); <= 0
/// when they do not overlap.
double square_penetration(const Pose2d& a, const Pose2d& b, double side = kModuleWidth);

/// Pairs of modules from different rigid components whose squares overlap by
/// more than `tolerance`, skipping `exempt` pairs.
std::vector<ModulePair> detect_collisions(const WorldState& world, const std::set<ModulePair>& exempt = {},
                                          double tolerance = 1e-3);

struct SimEvent {
  double t = 0.0;
  std::string event;
  nlohmann::json detail;
};

struct TrajectorySample {
  double t = 0.0;
  ModuleId id = 0;
  Pose2d pose;
};

struct WaveTiming {
  std::size_t index = 0;
  double start = 0.0;
  double end = 0.0;
  std::size_t actions = 0;
};

struct RunMetrics {
  double makespan = 0.0;
  std::map<ModuleId, double> distance;
  double total_distance = 0.0;
  std::size_t collisions = 0;
  std::size_t dock_attempts = 0;
  std::vector<WaveTiming> waves;
};

struct RunResult {
  bool success = false;
  std::string failure;
  ModuleId root = 0;
  UnfoldedLayout layout;
  Mapping mapping;
  Schedule schedule;
  WorldState initial;
  WorldState final_world;
  std::vector<TrajectorySample> trajectory;
  std::vector<SimEvent> events;
  RunMetrics metrics;
};

/// Root selection, assignment, wave planning and closed-loop execution of every
/// wave behind a barrier. Never throws for execution problems: those end the
/// run with success = false and a failure message.
RunResult run_scenario(const Scenario& scenario);

/// Target-frame check: every attachment maps onto a target edge with the same
/// faces, every target edge is present, and every module sits at its snapped
/// layout pose within `tolerance`.
bool matches_target(const WorldState& world, const ConfigGraph& target, const UnfoldedLayout& layout,
                    const Mapping& mapping, ModuleId root, double tolerance = 1e-9, std::string* why = nullptr);

std::string trajectory_csv(const RunResult& r);
std::string events_jsonl(const RunResult& r);
nlohmann::json metrics_to_json(const RunResult& r);
/// Module paths, start squares (dashed) and the final footprint.
std::string run_to_svg(const RunResult& r);
/// Writes schedule.json, trajectory.csv, events.jsonl, metrics.json and
/// paths.svg; throws std::runtime_error when the directory is unwritable.
void emit_outputs(const RunResult& r, const std::filesystem::path& dir);

}  // namespace smores
