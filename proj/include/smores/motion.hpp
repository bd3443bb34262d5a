#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "smores/geometry.hpp"
#include "smores/scheduler.hpp"

namespace smores {

/// Gains, limits and tolerances of the docking control stack (SI units).
struct MotionConfig {
  double v_max = 0.1;        ///< m/s
  double omega_max = 1.0;    ///< rad/s
  double v_dock = 0.03;      ///< m/s, approach speed
  Eigen::Matrix2d gain = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  double singular_band = 0.02;     ///< rad, |theta'| below which the law is singular
  double singular_nudge = 0.2;     ///< rad/s injected inside the singular band
  double align_lateral = 1e-3;     ///< m, alignment tolerance on the controlled offset
  double align_heading = 0.01;     ///< rad
  double abort_lateral = 7e-3;     ///< m, approach gives up beyond this drift
  double heading_gain = 1.0;       ///< approach heading hold
  double standoff = 0.1;           ///< m, distance before the goal where navigation ends
  double capture_radius = 0.02;    ///< m, waypoint capture while following a path
  double final_capture_radius = 2e-3;  ///< m, capture on the standoff point
  double lookahead = 0.05;         ///< m
  double steer_gain = 2.0;         ///< heading gain while following a path
  double turn_in_place = 0.5;      ///< rad, heading error above which the module stops to turn
  double control_rate = 40.0;      ///< Hz

  double dt() const { return 1.0 / control_rate; }
};

nlohmann::json motion_config_to_json(const MotionConfig& c);
/// Overrides only the keys present in `j`.
void apply_motion_config(const nlohmann::json& j, MotionConfig& c);

struct VelocityCommand {
  double v = 0.0;      ///< m/s along body +x
  double omega = 0.0;  ///< rad/s
};

/// Mover pose expressed in the frame of its goal pose.
struct GoalFramePose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  static GoalFramePose from(const Pose2d& pose, const Pose2d& goal);
};

enum class FaceClass {
  kLateral,       ///< TOP/BOTTOM docking: drive (y', theta') to zero
  kLongitudinal,  ///< LEFT/RIGHT docking: drive (x', theta') to zero
};

FaceClass face_class(Face mover_face);

/// Explicit Euler step of the unicycle model, heading wrapped.
Pose2d diff_drive_step(const Pose2d& pose, const VelocityCommand& cmd, double dt);

VelocityCommand saturate(const VelocityCommand& cmd, const MotionConfig& cfg);

struct PoseAdjustOutput {
  VelocityCommand cmd;
  bool singular = false;  ///< coupling term inside the singular band
  bool aligned = false;   ///< both controlled coordinates inside tolerance
};

/// Connector alignment law. Lateral case:
///   [v, w] = inv([[sin th', 0], [0, 1]]) K [-y', -th']
/// Longitudinal case uses (x', cos th') in place of (y', sin th').
/// Near the singularity a fixed rotational nudge restores controllability.
/// Limits are applied by scaling (v, w) together.
PoseAdjustOutput pose_adjust_command(const GoalFramePose& gp, FaceClass cls, const MotionConfig& cfg);

struct ApproachOutput {
  VelocityCommand cmd;
  bool abort = false;
};

/// Straight-line approach at v_dock with heading hold. `direction` is +1 when
/// the docking face leads (TOP), -1 when the module backs in (BOTTOM).
ApproachOutput approach_command(const GoalFramePose& gp, int direction, const MotionConfig& cfg);

using Cell = GridMap::Cell;

/// Cell sequence indexed by timestep; repeated cells are waits.
struct GridPath {
  std::vector<Cell> cells;

  int arrival() const { return static_cast<int>(cells.size()) - 1; }
  Cell at(int t) const { return t < static_cast<int>(cells.size()) ? cells[static_cast<std::size_t>(t)] : cells.back(); }
};

class PlanningError : public std::runtime_error {
 public:
  PlanningError(const std::string& what, std::size_t agent) : std::runtime_error(what), agent_(agent) {}
  std::size_t agent() const { return agent_; }

 private:
  std::size_t agent_;
};

struct PlanStats {
  std::size_t replans = 0;
  std::size_t expansions = 0;
};

/// Prioritized space-time A* on the 4-connected grid. Agents are planned in
/// `priorities` order (indices into starts/goals); each treats the cells of
/// earlier agents as occupied one step before, during and after their visit,
/// and other agents' start cells as occupied for the first two steps. A
/// blocked agent is promoted to the front and planning restarts.
/// With `separation` > 0 the reservations from step 2 on (and the parked
/// goals) also cover every cell within that Manhattan distance, which keeps
/// turning modules out of each other's swept disks.
std::vector<GridPath> plan_paths(const GridMap& grid, const std::vector<Cell>& starts,
                                 const std::vector<Cell>& goals, std::vector<std::size_t> priorities,
                                 PlanStats* stats = nullptr, int separation = 0);

struct PathConflict {
  std::size_t a = 0, b = 0;
  int t = 0;
  bool swap = false;
};

/// Exhaustive vertex and swap check over the joint horizon.
std::vector<PathConflict> find_conflicts(const std::vector<GridPath>& paths);

struct FollowOutput {
  VelocityCommand cmd;
  bool complete = false;
};

/// Waypoint pursuit: steer toward the next waypoint not yet inside the capture
/// radius, turning in place when the heading error is large and slowing down
/// over the last lookahead. `next` tracks progress along `waypoints` between
/// calls. Complete when inside `capture` of the final waypoint.
FollowOutput follow_path_command(const Pose2d& pose, const std::vector<Vector2d>& waypoints,
                                 std::size_t& next, const MotionConfig& cfg, double capture);

}  // namespace smores
