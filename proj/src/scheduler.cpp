#include "smores/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace smores {

namespace {

bool by_mover(const AssemblyAction& a, const AssemblyAction& b) {
  return a.mover != b.mover ? a.mover < b.mover : a.target < b.target;
}

// Finds the edge between a and b; returns a's view.
std::optional<Connection> connection_between(const ConfigGraph& g, ModuleId a, ModuleId b) {
  for (const Edge& e : g.edges()) {
    if (e.a == a && e.b == b) return e.from_a;
    if (e.b == a && e.a == b) return e.from_b;
  }
  return std::nullopt;
}

}  // namespace

std::size_t Schedule::action_count() const {
  std::size_t n = 0;
  for (const Wave& w : waves) n += w.size();
  return n;
}

std::string_view to_string(HelperStep::Kind k) {
  switch (k) {
    case HelperStep::Kind::kDock: return "helper_dock";
    case HelperStep::Kind::kLift: return "lift";
    case HelperStep::Kind::kDeliver: return "deliver";
    case HelperStep::Kind::kPlace: return "place";
    case HelperStep::Kind::kPush: return "push";
    case HelperStep::Kind::kUndock: return "helper_undock";
    case HelperStep::Kind::kRetreat: return "retreat";
  }
  return "?";
}

Schedule plan_assembly(const ConfigGraph& graph, const Mapping& f) {
  const ValidationReport report = validate_topology(graph);
  if (!report.ok) throw ScheduleError("invalid topology: " + report.violations.front());

  std::set<ModuleId> images;
  for (ModuleId v : graph.modules()) {
    auto it = f.target_to_module.find(v);
    if (it == f.target_to_module.end()) throw ScheduleError("mapping misses vertex " + std::to_string(v));
    if (!images.insert(it->second).second)
      throw ScheduleError("mapping is not injective at module " + std::to_string(it->second));
  }
  if (f.target_to_module.size() != graph.size()) throw ScheduleError("mapping has extra vertices");

  const ModuleId root = find_root(graph);
  const RootedInfo info = rooted_info(graph, root);
  const int depth = info.tree_depth();

  Schedule schedule;
  for (int d = 1; d <= depth; ++d) {
    Wave wave;
    for (const auto& [v, dv] : info.depth) {
      if (dv != d) continue;
      const ModuleId parent = *info.parent.at(v);
      const Connection c = *connection_between(graph, v, parent);
      wave.push_back({ActionKind::kDock, f(v), c.face, f(parent), c.face2con, std::nullopt});
    }
    std::sort(wave.begin(), wave.end(), by_mover);
    if (d == 1) {
      auto [lr, tb] = split_root_wave(wave, f(root));
      if (!lr.empty()) schedule.waves.push_back(std::move(lr));
      if (!tb.empty()) schedule.waves.push_back(std::move(tb));
    } else {
      schedule.waves.push_back(std::move(wave));
    }
  }
  return schedule;
}

std::pair<Wave, Wave> split_root_wave(const Wave& wave, ModuleId root) {
  Wave lr, tb;
  for (const AssemblyAction& a : wave) {
    if (a.target == root && !is_side_face(a.target_face))
      tb.push_back(a);
    else
      lr.push_back(a);
  }
  return {lr, tb};
}

Schedule insert_helper_actions(const Schedule& schedule, const std::vector<ModuleId>& helpers,
                               const ModuleSet* poses) {
  Schedule out;
  for (const Wave& wave : schedule.waves) {
    Wave direct, assisted;
    for (const AssemblyAction& a : wave) (a.helper_required() ? assisted : direct).push_back(a);
    if (!assisted.empty() && helpers.empty())
      throw ScheduleError("action (" + std::to_string(assisted.front().mover) + ", " +
                          face_letter(assisted.front().mover_face) + ", " +
                          std::to_string(assisted.front().target) + ", " +
                          face_letter(assisted.front().target_face) + ") needs a helper but none is declared");

    if (poses && !assisted.empty() && poses->pose.count(helpers.front())) {
      // Nearest-mover chain from the first helper's position.
      Vector2d at = poses->pose.at(helpers.front()).translation();
      Wave ordered;
      while (!assisted.empty()) {
        auto best = assisted.begin();
        double best_d = std::numeric_limits<double>::infinity();
        for (auto it = assisted.begin(); it != assisted.end(); ++it) {
          const double d = (poses->pose.at(it->mover).translation() - at).norm();
          if (d < best_d) {
            best_d = d;
            best = it;
          }
        }
        at = poses->pose.at(best->mover).translation();
        ordered.push_back(*best);
        assisted.erase(best);
      }
      assisted = std::move(ordered);
    }

    Wave combined = direct;
    for (std::size_t k = 0; k < assisted.size(); ++k) {
      AssemblyAction a = assisted[k];
      a.helper = helpers[k % helpers.size()];
      combined.push_back(a);
    }
    out.waves.push_back(std::move(combined));
  }
  return out;
}

std::vector<HelperStep> helper_sequence(const AssemblyAction& action) {
  if (!action.helper) throw ScheduleError("action has no helper assigned");
  const ModuleId h = *action.helper;
  const AssemblyAction grip{ActionKind::kDock, h, Face::kTop, action.mover, opposite(action.mover_face), std::nullopt};
  AssemblyAction release = grip;
  release.kind = ActionKind::kUndock;
  return {
      {HelperStep::Kind::kDock, grip},     {HelperStep::Kind::kLift, grip},
      {HelperStep::Kind::kDeliver, grip},  {HelperStep::Kind::kPlace, grip},
      {HelperStep::Kind::kPush, action},   {HelperStep::Kind::kUndock, release},
      {HelperStep::Kind::kRetreat, release},
  };
}

Schedule parallelize_reconfiguration(const ConfigGraph& initial, const ConfigGraph& goal,
                                     const Mapping& goal_to_init,
                                     const std::vector<AssemblyAction>& actions) {
  Schedule out;
  if (actions.empty()) return out;

  std::map<ModuleId, ModuleId> init_to_goal;
  for (const auto& [g, i] : goal_to_init.target_to_module) init_to_goal[i] = g;
  auto goal_of = [&](ModuleId m) {
    auto it = init_to_goal.find(m);
    if (it == init_to_goal.end()) throw ScheduleError("module " + std::to_string(m) + " is not mapped");
    return it->second;
  };

  const ModuleId goal_root = find_root(goal);
  const RootedInfo info = rooted_info(goal, goal_root);

  Wave undocks;
  std::set<std::pair<ModuleId, ModuleId>> removed, created;  // goal-vertex (child, parent)
  std::map<int, Wave> by_depth;
  for (const AssemblyAction& a : actions) {
    if (a.kind == ActionKind::kUndock) {
      auto c = connection_between(initial, a.mover, a.target);
      if (!c || c->face != a.mover_face || c->face2con != a.target_face)
        throw ScheduleError("undock of a connection absent from the initial configuration: " +
                            std::to_string(a.mover) + "-" + std::to_string(a.target));
      undocks.push_back(a);
      continue;
    }
    const ModuleId gv = goal_of(a.mover);
    const ModuleId gt = goal_of(a.target);
    auto c = connection_between(goal, gv, gt);
    if (!c || c->face != a.mover_face || c->face2con != a.target_face)
      throw ScheduleError("dock (" + std::to_string(a.mover) + "," + std::to_string(a.target) +
                          ") does not create a goal connection");
    if (info.parent.at(gv) != gt)
      throw ScheduleError("dock target " + std::to_string(a.target) + " is not the goal parent of " +
                          std::to_string(a.mover));
    created.insert({gv, gt});
    by_depth[info.depth.at(gv)].push_back(a);
  }

  // Every goal edge on the way from a dock target to the root must either
  // survive from the initial graph or be created by a listed dock.
  std::set<std::pair<ModuleId, ModuleId>> undocked_init;
  for (const AssemblyAction& a : undocks) {
    undocked_init.insert({a.mover, a.target});
    undocked_init.insert({a.target, a.mover});
  }
  auto edge_available = [&](ModuleId child, ModuleId parent) {
    if (created.count({child, parent})) return true;
    const ModuleId ci = goal_to_init(child), pi = goal_to_init(parent);
    if (undocked_init.count({ci, pi})) return false;
    auto init_c = connection_between(initial, ci, pi);
    auto goal_c = connection_between(goal, child, parent);
    return init_c && goal_c && init_c->face == goal_c->face && init_c->face2con == goal_c->face2con;
  };
  for (const auto& [d, wave] : by_depth) {
    for (const AssemblyAction& a : wave) {
      for (ModuleId v = goal_of(a.target); info.parent.at(v); v = *info.parent.at(v)) {
        if (!edge_available(v, *info.parent.at(v)))
          throw ScheduleError("dock target " + std::to_string(a.target) + " is never attached to the root");
      }
    }
  }

  out.waves.push_back(undocks);
  for (auto& [d, wave] : by_depth) {
    std::sort(wave.begin(), wave.end(), by_mover);
    out.waves.push_back(wave);
  }
  return out;
}

GridMap::GridMap(double cell_size, int min_i, int max_i, int min_j, int max_j)
    : cell_(cell_size), min_i_(min_i), max_i_(max_i), min_j_(min_j), max_j_(max_j) {
  blocked_.assign(static_cast<std::size_t>(width() * height()), 0);
}

GridMap GridMap::covering(const std::vector<Vector2d>& points, double cell_size, int padding) {
  int min_i = 0, max_i = 0, min_j = 0, max_j = 0;
  for (const Vector2d& p : points) {
    const int i = static_cast<int>(std::lround(p.x() / cell_size));
    const int j = static_cast<int>(std::lround(p.y() / cell_size));
    min_i = std::min(min_i, i);
    max_i = std::max(max_i, i);
    min_j = std::min(min_j, j);
    max_j = std::max(max_j, j);
  }
  return GridMap(cell_size, min_i - padding, max_i + padding, min_j - padding, max_j + padding);
}

bool GridMap::in_bounds(Cell c) const {
  return c.i >= min_i_ && c.i <= max_i_ && c.j >= min_j_ && c.j <= max_j_;
}

std::size_t GridMap::index(Cell c) const {
  return static_cast<std::size_t>((c.j - min_j_) * width() + (c.i - min_i_));
}

bool GridMap::blocked(Cell c) const { return !in_bounds(c) || blocked_[index(c)] != 0; }

void GridMap::set_blocked(Cell c, bool value) {
  if (in_bounds(c)) blocked_[index(c)] = value ? 1 : 0;
}

void GridMap::clear() { std::fill(blocked_.begin(), blocked_.end(), 0); }

GridMap::Cell GridMap::cell_of(const Vector2d& p) const {
  return {static_cast<int>(std::lround(p.x() / cell_)), static_cast<int>(std::lround(p.y() / cell_))};
}

Vector2d GridMap::center(Cell c) const { return {c.i * cell_, c.j * cell_}; }

void GridMap::block_disk(const Vector2d& p, double radius) {
  const Cell c = cell_of(p);
  const int reach = static_cast<int>(std::ceil(radius / cell_)) + 1;
  for (int di = -reach; di <= reach; ++di)
    for (int dj = -reach; dj <= reach; ++dj) {
      const Cell n{c.i + di, c.j + dj};
      if ((center(n) - p).norm() < radius) set_blocked(n, true);
    }
}

nlohmann::json action_to_json(const AssemblyAction& a) {
  return {{"kind", a.kind == ActionKind::kDock ? "dock" : "undock"},
          {"mover", a.mover},
          {"mover_face", to_string(a.mover_face)},
          {"target", a.target},
          {"target_face", to_string(a.target_face)},
          {"helper", a.helper ? nlohmann::json(*a.helper) : nlohmann::json()}};
}

AssemblyAction action_from_json(const nlohmann::json& j) {
  AssemblyAction a;
  a.kind = j.value("kind", std::string("dock")) == "undock" ? ActionKind::kUndock : ActionKind::kDock;
  a.mover = j.at("mover").get<ModuleId>();
  a.mover_face = parse_face(j.at("mover_face").get<std::string>());
  a.target = j.at("target").get<ModuleId>();
  a.target_face = parse_face(j.at("target_face").get<std::string>());
  if (j.contains("helper") && !j["helper"].is_null()) a.helper = j["helper"].get<ModuleId>();
  if (a.mover == a.target) throw ScheduleError("action mover equals target");
  return a;
}

nlohmann::json schedule_to_json(const Schedule& s) {
  nlohmann::json waves = nlohmann::json::array();
  for (const Wave& w : s.waves) {
    nlohmann::json wave = nlohmann::json::array();
    for (const AssemblyAction& a : w) wave.push_back(action_to_json(a));
    waves.push_back(std::move(wave));
  }
  return {{"waves", waves}};
}

Schedule schedule_from_json(const nlohmann::json& j) {
  Schedule s;
  for (const auto& wave : j.at("waves")) {
    Wave w;
    for (const auto& a : wave) w.push_back(action_from_json(a));
    s.waves.push_back(std::move(w));
  }
  return s;
}

}  // namespace smores
