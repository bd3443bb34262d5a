#pragma once

#include <map>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>
#include <json.hpp>

#include "smores/geometry.hpp"
#include "smores/layout.hpp"
#include "smores/topology.hpp"

namespace smores {

/// World-frame poses of the physical modules.
struct ModuleSet {
  std::map<ModuleId, Pose2d> pose;

  std::size_t size() const { return pose.size(); }
};

/// Bijection from target vertex to physical module, with its travel cost.
struct Mapping {
  std::map<ModuleId, ModuleId> target_to_module;
  double cost = 0.0;

  ModuleId operator()(ModuleId target_vertex) const { return target_to_module.at(target_vertex); }
  /// Target vertex assigned to physical module `m`.
  ModuleId inverse(ModuleId m) const;
};

class AssignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Module closest to the centroid of all centers; ties go to the smaller id.
ModuleId select_root_module(const ModuleSet& modules);

/// Re-expresses all poses in the frame of `root`.
ModuleSet to_root_frame(const ModuleSet& modules, ModuleId root);

/// Distance matrix between physical modules (rows, ascending id, root
/// excluded) and target vertices (columns, ascending id, root excluded).
Eigen::MatrixXd assignment_costs(const UnfoldedLayout& layout, const ModuleSet& modules_in_root,
                                 std::pair<ModuleId, ModuleId> root_pair);

/// Total travel distance of a mapping, summed over target vertices in
/// ascending id order so equal mappings always produce identical sums.
double mapping_cost(const UnfoldedLayout& layout, const ModuleSet& modules_in_root,
                    const std::map<ModuleId, ModuleId>& target_to_module);

/// Minimum-cost square assignment (Kuhn-Munkres with potentials). Returns the
/// column chosen for each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Optimal mapping with the roots pinned together. `modules_in_root` must be
/// expressed in the frame of the physical root. Among optimal mappings the
/// lexicographically smallest (target vertex -> module id) one is returned.
Mapping assign(const UnfoldedLayout& layout, const ModuleSet& modules_in_root,
               std::pair<ModuleId, ModuleId> root_pair);

/// Exhaustive reference for assign; n <= 9.
Mapping brute_force_assign(const UnfoldedLayout& layout, const ModuleSet& modules_in_root,
                           std::pair<ModuleId, ModuleId> root_pair);

nlohmann::json mapping_to_json(const Mapping& m);
Mapping mapping_from_json(const nlohmann::json& j);
nlohmann::json module_set_to_json(const ModuleSet& s);
ModuleSet module_set_from_json(const nlohmann::json& j);

}  // namespace smores
