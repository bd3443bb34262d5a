#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smores/geometry.hpp"
#include "smores/topology.hpp"

namespace smores {

/// Pose of every target vertex relative to the target root after unfolding.
struct UnfoldedLayout {
  ModuleId root = 0;
  std::map<ModuleId, Pose2d> pose;
  double side = kModuleWidth;
};

class OverlapError : public std::runtime_error {
 public:
  OverlapError(const std::string& what, std::vector<std::pair<ModuleId, ModuleId>> pairs)
      : std::runtime_error(what), pairs_(std::move(pairs)) {}
  const std::vector<std::pair<ModuleId, ModuleId>>& pairs() const { return pairs_; }

 private:
  std::vector<std::pair<ModuleId, ModuleId>> pairs_;
};

/// Outward unit normal of a face in the module body frame
/// (TOP = +x, BOTTOM = -x, LEFT = +y, RIGHT = -y).
Vector2d face_normal(Face f);
/// Heading of face_normal(f).
double face_angle(Face f);

/// Child pose in the parent frame for a connection seen from the parent
/// (`conn.face` on the parent, `conn.face2con` on the child).
Pose2d relative_pose(const Connection& conn, double side = kModuleWidth);

/// Places the graph on the plane, root at the origin, in BFS order from
/// find_root. Throws OverlapError when two centers come closer than
/// side - 1e-6.
UnfoldedLayout unfold(const ConfigGraph& graph, double side = kModuleWidth);

struct UnfoldReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::vector<std::pair<ModuleId, ModuleId>> overlapping;
};

UnfoldReport check_unfoldable(const ConfigGraph& graph, double side = kModuleWidth);

nlohmann::json layout_to_json(const UnfoldedLayout& layout);
UnfoldedLayout layout_from_json(const nlohmann::json& j);
/// Squares for each module with id labels and a mark on the TOP face.
std::string layout_to_svg(const UnfoldedLayout& layout);

}  // namespace smores
