#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smores/assignment.hpp"
#include "smores/geometry.hpp"
#include "smores/layout.hpp"
#include "smores/topology.hpp"

namespace smores {

enum class ActionKind { kDock, kUndock };

/// Connect (or disconnect) mover's `mover_face` with target's `target_face`.
struct AssemblyAction {
  ActionKind kind = ActionKind::kDock;
  ModuleId mover = 0;
  Face mover_face = Face::kTop;
  ModuleId target = 0;
  Face target_face = Face::kTop;
  /// Helper module assigned by insert_helper_actions.
  std::optional<ModuleId> helper;

  /// Side faces cannot be driven into a mating face; a helper must push.
  bool helper_required() const { return kind == ActionKind::kDock && is_side_face(mover_face); }
  bool operator==(const AssemblyAction&) const = default;
};

using Wave = std::vector<AssemblyAction>;

struct Schedule {
  std::vector<Wave> waves;

  std::size_t action_count() const;
};

/// One step of a helper-mediated docking, in execution order.
struct HelperStep {
  enum class Kind { kDock, kLift, kDeliver, kPlace, kPush, kUndock, kRetreat };
  Kind kind;
  /// kDock/kUndock: helper TOP with the mover's opposite side face.
  /// kPush: the original action.
  AssemblyAction action;
};

std::string_view to_string(HelperStep::Kind k);

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Root-to-leaf depth waves; the depth-1 wave is split with split_root_wave and
/// empty sub-waves are dropped. Actions inside a wave are sorted by mover id.
Schedule plan_assembly(const ConfigGraph& graph, const Mapping& f);

/// Actions docking to the root's LEFT/RIGHT first, then TOP/BOTTOM. Actions
/// with another target stay in the first group.
std::pair<Wave, Wave> split_root_wave(const Wave& wave, ModuleId root);

/// Assigns helpers to side-face actions. Helper actions inside a wave are
/// queued after the direct ones; with `poses` the queue follows a
/// nearest-mover chain starting at the first helper, otherwise mover id order.
/// Helpers are handed out round-robin along the queue.
Schedule insert_helper_actions(const Schedule& schedule, const std::vector<ModuleId>& helpers,
                               const ModuleSet* poses = nullptr);

/// Expansion of a helper-assigned action into its execution steps.
std::vector<HelperStep> helper_sequence(const AssemblyAction& action);

/// Undock wave first, then depth-ordered dock waves over `goal`, where only
/// listed docks are scheduled and existing connections are left alone.
/// `goal_to_init` maps goal vertices to module ids of the initial graph; the
/// actions use initial ids.
Schedule parallelize_reconfiguration(const ConfigGraph& initial, const ConfigGraph& goal,
                                     const Mapping& goal_to_init,
                                     const std::vector<AssemblyAction>& actions);

/// Square routing grid in the root frame, origin at the root center.
class GridMap {
 public:
  struct Cell {
    int i = 0;
    int j = 0;
    bool operator==(const Cell&) const = default;
    auto operator<=>(const Cell&) const = default;
  };

  GridMap() = default;
  GridMap(double cell_size, int min_i, int max_i, int min_j, int max_j);

  /// Smallest grid covering `points` (root frame) padded by `padding` cells.
  static GridMap covering(const std::vector<Vector2d>& points, double cell_size, int padding);

  double cell_size() const { return cell_; }
  int min_i() const { return min_i_; }
  int max_i() const { return max_i_; }
  int min_j() const { return min_j_; }
  int max_j() const { return max_j_; }
  int width() const { return max_i_ - min_i_ + 1; }
  int height() const { return max_j_ - min_j_ + 1; }

  bool in_bounds(Cell c) const;
  bool blocked(Cell c) const;
  void set_blocked(Cell c, bool value = true);
  void clear();
  Cell cell_of(const Vector2d& p) const;
  Vector2d center(Cell c) const;
  /// Blocks every cell whose center lies within `radius` of `p`.
  void block_disk(const Vector2d& p, double radius);

 private:
  std::size_t index(Cell c) const;

  double cell_ = 0.1;
  int min_i_ = 0, max_i_ = -1, min_j_ = 0, max_j_ = -1;
  std::vector<char> blocked_;
};

nlohmann::json action_to_json(const AssemblyAction& a);
AssemblyAction action_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const Schedule& s);
Schedule schedule_from_json(const nlohmann::json& j);

}  // namespace smores
