#include "smores/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace smores {

namespace {

// Relative slack used when deciding whether a pinned sub-problem still reaches
// the global optimum.
constexpr double kTieTolerance = 1e-9;

void check_sizes(const UnfoldedLayout& layout, const ModuleSet& modules,
                 std::pair<ModuleId, ModuleId> root_pair) {
  if (layout.pose.size() != modules.size())
    throw AssignmentError("size mismatch: " + std::to_string(layout.pose.size()) + " target vertices, " +
                          std::to_string(modules.size()) + " modules");
  if (!layout.pose.count(root_pair.first))
    throw AssignmentError("target root " + std::to_string(root_pair.first) + " not in layout");
  if (!modules.pose.count(root_pair.second))
    throw AssignmentError("module root " + std::to_string(root_pair.second) + " not in module set");
}

std::vector<ModuleId> keys_except(const auto& m, ModuleId skip) {
  std::vector<ModuleId> out;
  for (const auto& [k, v] : m)
    if (k != skip) out.push_back(k);
  return out;
}

double optimal_value(const Eigen::MatrixXd& cost) {
  if (cost.rows() == 0) return 0.0;
  const std::vector<int> cols = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index r = 0; r < cost.rows(); ++r) total += cost(r, cols[static_cast<std::size_t>(r)]);
  return total;
}

Eigen::MatrixXd without(const Eigen::MatrixXd& m, Eigen::Index row, Eigen::Index col) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd out(n - 1, n - 1);
  for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
    if (r == row) continue;
    for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
      if (c == col) continue;
      out(rr, cc++) = m(r, c);
    }
    ++rr;
  }
  return out;
}

}  // namespace

ModuleId Mapping::inverse(ModuleId m) const {
  for (const auto& [v, mod] : target_to_module)
    if (mod == m) return v;
  throw AssignmentError("module " + std::to_string(m) + " is not mapped");
}

ModuleId select_root_module(const ModuleSet& modules) {
  if (modules.pose.empty()) throw AssignmentError("empty module set");
  Vector2d centroid = Vector2d::Zero();
  for (const auto& [id, p] : modules.pose) centroid += p.translation();
  centroid /= static_cast<double>(modules.size());

  ModuleId best = modules.pose.begin()->first;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& [id, p] : modules.pose) {
    const double d = (p.translation() - centroid).norm();
    if (d < best_dist) {  // strict: ascending iteration keeps the smaller id on ties
      best = id;
      best_dist = d;
    }
  }
  return best;
}

ModuleSet to_root_frame(const ModuleSet& modules, ModuleId root) {
  auto it = modules.pose.find(root);
  if (it == modules.pose.end()) throw AssignmentError("unknown root module " + std::to_string(root));
  const Pose2d inv = it->second.inverse();
  ModuleSet out;
  for (const auto& [id, p] : modules.pose) out.pose[id] = inv * p;
  out.pose[root] = Pose2d::identity();
  return out;
}

Eigen::MatrixXd assignment_costs(const UnfoldedLayout& layout, const ModuleSet& modules,
                                 std::pair<ModuleId, ModuleId> root_pair) {
  check_sizes(layout, modules, root_pair);
  const auto mods = keys_except(modules.pose, root_pair.second);
  const auto verts = keys_except(layout.pose, root_pair.first);
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(mods.size()), static_cast<Eigen::Index>(verts.size()));
  for (std::size_t r = 0; r < mods.size(); ++r)
    for (std::size_t c = 0; c < verts.size(); ++c)
      cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          (modules.pose.at(mods[r]).translation() - layout.pose.at(verts[c]).translation()).norm();
  return cost;
}

double mapping_cost(const UnfoldedLayout& layout, const ModuleSet& modules,
                    const std::map<ModuleId, ModuleId>& target_to_module) {
  double total = 0.0;
  for (const auto& [v, m] : target_to_module)
    total += (modules.pose.at(m).translation() - layout.pose.at(v).translation()).norm();
  return total;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  // Shortest augmenting path formulation with row/column potentials, O(n^3).
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw AssignmentError("cost matrix must be square");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);  // match[col] = row, 1-based

  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const int r = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = cost(r - 1, c - 1) - u[r] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int c = 1; c <= n; ++c) row_to_col[static_cast<std::size_t>(match[c] - 1)] = c - 1;
  return row_to_col;
}

Mapping assign(const UnfoldedLayout& layout, const ModuleSet& modules,
               std::pair<ModuleId, ModuleId> root_pair) {
  Eigen::MatrixXd cost = assignment_costs(layout, modules, root_pair);
  std::vector<ModuleId> mods = keys_except(modules.pose, root_pair.second);
  const std::vector<ModuleId> verts = keys_except(layout.pose, root_pair.first);

  Mapping out;
  out.target_to_module[root_pair.first] = root_pair.second;

  // Fix vertices in ascending order to the smallest module id that keeps the
  // remaining problem optimal; this selects the lexicographically smallest
  // optimum without enumerating ties.
  double remaining = optimal_value(cost);
  for (std::size_t c = 0; c < verts.size(); ++c) {
    const Eigen::Index col = 0;  // the current vertex is always the first remaining column
    bool fixed = false;
    for (std::size_t r = 0; r < mods.size() && !fixed; ++r) {
      const Eigen::Index row = static_cast<Eigen::Index>(r);
      const Eigen::MatrixXd rest = without(cost, row, col);
      const double candidate = cost(row, col) + optimal_value(rest);
      if (candidate <= remaining + kTieTolerance * std::max(1.0, remaining)) {
        out.target_to_module[verts[c]] = mods[r];
        remaining = candidate - cost(row, col);
        cost = rest;
        mods.erase(mods.begin() + static_cast<std::ptrdiff_t>(r));
        fixed = true;
      }
    }
    if (!fixed) throw AssignmentError("assignment tie resolution failed");
  }
  out.cost = mapping_cost(layout, modules, out.target_to_module);
  return out;
}

Mapping brute_force_assign(const UnfoldedLayout& layout, const ModuleSet& modules,
                           std::pair<ModuleId, ModuleId> root_pair) {
  check_sizes(layout, modules, root_pair);
  if (modules.size() > 9) throw AssignmentError("brute force limited to 9 modules");
  std::vector<ModuleId> mods = keys_except(modules.pose, root_pair.second);
  const std::vector<ModuleId> verts = keys_except(layout.pose, root_pair.first);

  Mapping best;
  best.cost = std::numeric_limits<double>::infinity();
  // next_permutation walks mods in lexicographic order, so the first optimum
  // seen is the lexicographically smallest one.
  do {
    std::map<ModuleId, ModuleId> candidate{{root_pair.first, root_pair.second}};
    for (std::size_t i = 0; i < verts.size(); ++i) candidate[verts[i]] = mods[i];
    const double c = mapping_cost(layout, modules, candidate);
    if (c < best.cost - kTieTolerance * std::max(1.0, c)) {
      best.cost = c;
      best.target_to_module = std::move(candidate);
    }
  } while (std::next_permutation(mods.begin(), mods.end()));
  return best;
}

nlohmann::json mapping_to_json(const Mapping& m) {
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [v, mod] : m.target_to_module) t[std::to_string(v)] = mod;
  return {{"target_to_module", t}, {"cost_m", m.cost}};
}

Mapping mapping_from_json(const nlohmann::json& j) {
  Mapping m;
  for (const auto& [k, v] : j.at("target_to_module").items()) m.target_to_module[std::stoi(k)] = v.get<ModuleId>();
  if (j.contains("cost_m")) m.cost = j["cost_m"].get<double>();
  return m;
}

nlohmann::json module_set_to_json(const ModuleSet& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, p] : s.pose) arr.push_back({{"id", id}, {"x", p.x()}, {"y", p.y()}, {"theta", p.theta()}});
  return arr;
}

ModuleSet module_set_from_json(const nlohmann::json& j) {
  ModuleSet s;
  for (const auto& m : j) {
    const ModuleId id = m.at("id").get<ModuleId>();
    if (s.pose.count(id)) throw AssignmentError("duplicate module id " + std::to_string(id));
    s.pose[id] = Pose2d(m.at("x").get<double>(), m.at("y").get<double>(), m.at("theta").get<double>());
  }
  return s;
}

}  // namespace smores
