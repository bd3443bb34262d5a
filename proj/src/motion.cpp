#include "smores/motion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace smores {

namespace {

double sign_or_one(double x) { return x < 0.0 ? -1.0 : 1.0; }

double clamp_abs(double x, double limit) { return std::clamp(x, -limit, limit); }

}  // namespace

nlohmann::json motion_config_to_json(const MotionConfig& c) {
  return {{"v_max", c.v_max},
          {"omega_max", c.omega_max},
          {"v_dock", c.v_dock},
          {"gain", {{c.gain(0, 0), c.gain(0, 1)}, {c.gain(1, 0), c.gain(1, 1)}}},
          {"singular_band", c.singular_band},
          {"singular_nudge", c.singular_nudge},
          {"align_lateral", c.align_lateral},
          {"align_heading", c.align_heading},
          {"abort_lateral", c.abort_lateral},
          {"heading_gain", c.heading_gain},
          {"standoff", c.standoff},
          {"capture_radius", c.capture_radius},
          {"final_capture_radius", c.final_capture_radius},
          {"lookahead", c.lookahead},
          {"steer_gain", c.steer_gain},
          {"turn_in_place", c.turn_in_place},
          {"control_rate", c.control_rate}};
}

void apply_motion_config(const nlohmann::json& j, MotionConfig& c) {
  const nlohmann::json known = motion_config_to_json(MotionConfig{});
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw std::invalid_argument("motion: unknown key '" + key + "'");
  auto read = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  read("v_max", c.v_max);
  read("omega_max", c.omega_max);
  read("v_dock", c.v_dock);
  read("singular_band", c.singular_band);
  read("singular_nudge", c.singular_nudge);
  read("align_lateral", c.align_lateral);
  read("align_heading", c.align_heading);
  read("abort_lateral", c.abort_lateral);
  read("heading_gain", c.heading_gain);
  read("standoff", c.standoff);
  read("capture_radius", c.capture_radius);
  read("final_capture_radius", c.final_capture_radius);
  read("lookahead", c.lookahead);
  read("steer_gain", c.steer_gain);
  read("turn_in_place", c.turn_in_place);
  read("control_rate", c.control_rate);
  if (j.contains("gain")) {
    // Either a full 2x2 matrix or its diagonal.
    const auto& g = j.at("gain");
    if (g.size() == 2 && g.at(0).is_number()) {
      c.gain = Eigen::Vector2d(g.at(0).get<double>(), g.at(1).get<double>()).asDiagonal();
    } else {
      for (int r = 0; r < 2; ++r)
        for (int col = 0; col < 2; ++col) c.gain(r, col) = g.at(r).at(col).get<double>();
    }
    const Eigen::Matrix2d sym = 0.5 * (c.gain + c.gain.transpose());
    if (sym.determinant() <= 0.0 || sym(0, 0) <= 0.0)
      throw std::invalid_argument("motion.gain must be positive definite");
  }
  if (c.control_rate <= 0.0) throw std::invalid_argument("motion.control_rate must be positive");
}

GoalFramePose GoalFramePose::from(const Pose2d& pose, const Pose2d& goal) {
  const Pose2d rel = goal.between(pose);
  return {rel.x(), rel.y(), rel.theta()};
}

FaceClass face_class(Face mover_face) {
  return is_side_face(mover_face) ? FaceClass::kLongitudinal : FaceClass::kLateral;
}

Pose2d diff_drive_step(const Pose2d& pose, const VelocityCommand& cmd, double dt) {
  return Pose2d(pose.x() + cmd.v * std::cos(pose.theta()) * dt, pose.y() + cmd.v * std::sin(pose.theta()) * dt,
                pose.theta() + cmd.omega * dt);
}

VelocityCommand saturate(const VelocityCommand& cmd, const MotionConfig& cfg) {
  return {clamp_abs(cmd.v, cfg.v_max), clamp_abs(cmd.omega, cfg.omega_max)};
}

PoseAdjustOutput pose_adjust_command(const GoalFramePose& gp, FaceClass cls, const MotionConfig& cfg) {
  PoseAdjustOutput out;
  const bool lateral = cls == FaceClass::kLateral;
  const double offset = lateral ? gp.y : gp.x;
  const double coupling = lateral ? std::sin(gp.theta) : std::cos(gp.theta);

  out.aligned = std::abs(offset) < cfg.align_lateral && std::abs(gp.theta) < cfg.align_heading;
  if (out.aligned) return out;

  const Eigen::Vector2d u = cfg.gain * Eigen::Vector2d(-offset, -gp.theta);
  out.cmd.omega = u(1);

  // Inside the band the coupling is held at the band edge so v stays finite.
  const double band = std::sin(cfg.singular_band);
  out.singular = std::abs(coupling) < band;
  out.cmd.v = u(0) / (out.singular ? sign_or_one(coupling) * band : coupling);
  if (out.singular && lateral && std::abs(gp.theta) < cfg.singular_band && std::abs(offset) >= cfg.align_lateral) {
    // theta' is converging onto the singular point; rotate out of it.
    out.cmd.omega = cfg.singular_nudge * sign_or_one(gp.theta);
    out.cmd = saturate(out.cmd, cfg);
    return out;
  }
  // Scale both channels together: the closed-loop path keeps its shape and
  // only slows down, so the Lyapunov decrease survives saturation.
  const double scale = std::min({1.0, cfg.v_max / std::max(std::abs(out.cmd.v), 1e-300),
                                 cfg.omega_max / std::max(std::abs(out.cmd.omega), 1e-300)});
  out.cmd.v *= scale;
  out.cmd.omega *= scale;
  return out;
}

ApproachOutput approach_command(const GoalFramePose& gp, int direction, const MotionConfig& cfg) {
  ApproachOutput out;
  if (std::abs(gp.y) > cfg.abort_lateral) {
    out.abort = true;
    return out;
  }
  out.cmd = saturate({direction * cfg.v_dock, -cfg.heading_gain * gp.theta}, cfg);
  return out;
}

namespace {

std::uint64_t cell_key(Cell c) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.i)) << 32) | static_cast<std::uint32_t>(c.j);
}

// Exact (cell, t) key; grid coordinates fit in 16 bits.
std::uint64_t state_key(Cell c, int t) {
  return (static_cast<std::uint64_t>(static_cast<std::uint16_t>(c.i)) << 48) |
         (static_cast<std::uint64_t>(static_cast<std::uint16_t>(c.j)) << 32) | static_cast<std::uint32_t>(t);
}

// Space-time occupancy of already planned agents.
struct Reservations {
  std::unordered_set<std::uint64_t> timed;
  std::unordered_map<std::uint64_t, int> last_timed;
  std::unordered_map<std::uint64_t, int> parked_from;

  void reserve(Cell c, int t) {
    if (t < 0) return;
    timed.insert(state_key(c, t));
    auto [it, fresh] = last_timed.emplace(cell_key(c), t);
    if (!fresh) it->second = std::max(it->second, t);
  }
  void park(Cell c, int from) {
    auto [it, fresh] = parked_from.emplace(cell_key(c), from);
    if (!fresh) it->second = std::min(it->second, from);
  }
  bool occupied(Cell c, int t) const {
    auto p = parked_from.find(cell_key(c));
    if (p != parked_from.end() && t >= p->second) return true;
    return timed.count(state_key(c, t)) != 0;
  }
  bool free_forever_from(Cell c, int t) const {
    if (parked_from.count(cell_key(c))) return false;
    auto it = last_timed.find(cell_key(c));
    return it == last_timed.end() || it->second < t;
  }
};

int manhattan(Cell a, Cell b) { return std::abs(a.i - b.i) + std::abs(a.j - b.j); }

std::optional<GridPath> space_time_astar(const GridMap& grid, Cell start, Cell goal,
                                         const Reservations& res, int horizon, std::size_t* expansions) {
  struct Node {
    Cell cell;
    int t;
    int f;
    int parent;
  };
  std::vector<Node> nodes;
  auto cmp = [&](int a, int b) {
    const Node& na = nodes[static_cast<std::size_t>(a)];
    const Node& nb = nodes[static_cast<std::size_t>(b)];
    if (na.f != nb.f) return na.f > nb.f;
    if (na.t != nb.t) return na.t < nb.t;  // deeper first among equal f
    return a > b;
  };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> open(cmp);
  std::unordered_set<std::uint64_t> seen;
  auto visited = [&](Cell c, int t) { return !seen.insert(state_key(c, t)).second; };

  if (res.occupied(start, 0)) return std::nullopt;
  nodes.push_back({start, 0, manhattan(start, goal), -1});
  visited(start, 0);
  open.push(0);

  static constexpr int kDi[5] = {0, 1, -1, 0, 0};
  static constexpr int kDj[5] = {0, 0, 0, 1, -1};
  while (!open.empty()) {
    const int idx = open.top();
    open.pop();
    const Node node = nodes[static_cast<std::size_t>(idx)];
    if (expansions) ++*expansions;
    if (node.cell == goal && res.free_forever_from(goal, node.t)) {
      GridPath path;
      for (int k = idx; k >= 0; k = nodes[static_cast<std::size_t>(k)].parent)
        path.cells.push_back(nodes[static_cast<std::size_t>(k)].cell);
      std::reverse(path.cells.begin(), path.cells.end());
      return path;
    }
    if (node.t >= horizon) continue;
    for (int m = 0; m < 5; ++m) {
      const Cell next{node.cell.i + kDi[m], node.cell.j + kDj[m]};
      const int t = node.t + 1;
      if (grid.blocked(next) || res.occupied(next, t)) continue;
      if (visited(next, t)) continue;
      nodes.push_back({next, t, t + manhattan(next, goal), idx});
      open.push(static_cast<int>(nodes.size()) - 1);
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<GridPath> plan_paths(const GridMap& grid, const std::vector<Cell>& starts,
                                 const std::vector<Cell>& goals, std::vector<std::size_t> priorities,
                                 PlanStats* stats, int separation) {
  const std::size_t n = starts.size();
  if (goals.size() != n || priorities.size() != n)
    throw std::invalid_argument("plan_paths: starts, goals and priorities differ in size");
  for (std::size_t a = 0; a < n; ++a) {
    if (grid.blocked(starts[a])) throw PlanningError("start cell of agent " + std::to_string(a) + " is blocked", a);
    if (grid.blocked(goals[a])) throw PlanningError("goal cell of agent " + std::to_string(a) + " is blocked", a);
  }

  // Cells within `separation` (Manhattan) of a visited cell.
  auto ball = [separation](Cell c) {
    std::vector<Cell> out;
    for (int di = -separation; di <= separation; ++di)
      for (int dj = -separation + std::abs(di); dj <= separation - std::abs(di); ++dj) out.push_back({c.i + di, c.j + dj});
    return out;
  };
  const int horizon = grid.width() * grid.height() + 4 * static_cast<int>(n) + 16;
  const std::size_t max_attempts = std::max<std::size_t>(4, n * n);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<GridPath> paths(n);
    Reservations res;
    std::optional<std::size_t> failed;
    for (std::size_t rank = 0; rank < n && !failed; ++rank) {
      const std::size_t agent = priorities[rank];
      Reservations mine = res;
      // Unplanned agents still sit on their start cells for the first steps.
      for (std::size_t later = rank + 1; later < n; ++later) {
        const Cell s = starts[priorities[later]];
        mine.reserve(s, 0);
        mine.reserve(s, 1);
      }
      auto path = space_time_astar(grid, starts[agent], goals[agent], mine, horizon,
                                   stats ? &stats->expansions : nullptr);
      if (!path) {
        failed = agent;
        break;
      }
      for (int t = 0; t <= path->arrival(); ++t) {
        const Cell c = path->at(t);
        for (int dt = -1; dt <= 1; ++dt) {
          if (t + dt < 2) {
            res.reserve(c, t + dt);
          } else {
            for (const Cell& n : ball(c)) res.reserve(n, t + dt);
          }
        }
      }
      for (const Cell& n : ball(path->cells.back())) res.park(n, std::max(2, path->arrival() - 1));
      res.park(path->cells.back(), std::max(0, path->arrival() - 1));
      paths[agent] = std::move(*path);
    }
    if (!failed) return paths;
    if (stats) ++stats->replans;
    if (priorities.front() == *failed)
      throw PlanningError("no path for agent " + std::to_string(*failed), *failed);
    priorities.erase(std::find(priorities.begin(), priorities.end(), *failed));
    priorities.insert(priorities.begin(), *failed);
  }
  throw PlanningError("prioritized planning did not converge", priorities.front());
}

std::vector<PathConflict> find_conflicts(const std::vector<GridPath>& paths) {
  std::vector<PathConflict> out;
  int horizon = 0;
  for (const GridPath& p : paths) horizon = std::max(horizon, p.arrival());
  for (std::size_t a = 0; a < paths.size(); ++a)
    for (std::size_t b = a + 1; b < paths.size(); ++b)
      for (int t = 0; t <= horizon; ++t) {
        if (paths[a].at(t) == paths[b].at(t)) out.push_back({a, b, t, false});
        if (t < horizon && paths[a].at(t) == paths[b].at(t + 1) && paths[a].at(t + 1) == paths[b].at(t) &&
            paths[a].at(t) != paths[a].at(t + 1))
          out.push_back({a, b, t, true});
      }
  return out;
}

FollowOutput follow_path_command(const Pose2d& pose, const std::vector<Vector2d>& waypoints, std::size_t& next,
                                 const MotionConfig& cfg, double capture) {
  FollowOutput out;
  if (waypoints.empty()) throw std::invalid_argument("follow_path_command: empty path");
  const std::size_t last = waypoints.size() - 1;
  next = std::min(next, last);
  while (next < last && (waypoints[next] - pose.translation()).norm() < cfg.capture_radius) ++next;

  const double remaining = (waypoints[last] - pose.translation()).norm();
  if (next == last && remaining < capture) {
    out.complete = true;
    return out;
  }

  const Vector2d d = waypoints[next] - pose.translation();
  const double error = angle_diff(std::atan2(d.y(), d.x()), pose.theta());
  out.cmd.omega = cfg.steer_gain * error;
  if (std::abs(error) <= cfg.turn_in_place) {
    // Slow down over the last lookahead so the final capture is not overshot.
    const double speed = cfg.v_max * std::min(1.0, remaining / cfg.lookahead);
    out.cmd.v = speed * std::cos(error);
  }
  out.cmd = saturate(out.cmd, cfg);
  return out;
}

}  // namespace smores
