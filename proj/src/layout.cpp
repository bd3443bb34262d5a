#include "smores/layout.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numbers>

namespace smores {

namespace {
constexpr double kOverlapTolerance = 1e-6;
}

Vector2d face_normal(Face f) {
  switch (f) {
    case Face::kTop: return {1.0, 0.0};
    case Face::kBottom: return {-1.0, 0.0};
    case Face::kLeft: return {0.0, 1.0};
    case Face::kRight: return {0.0, -1.0};
  }
  return Vector2d::Zero();
}

double face_angle(Face f) {
  constexpr double pi = std::numbers::pi;
  switch (f) {
    case Face::kTop: return 0.0;
    case Face::kBottom: return pi;
    case Face::kLeft: return pi / 2;
    case Face::kRight: return -pi / 2;
  }
  return 0.0;
}

Pose2d relative_pose(const Connection& conn, double side) {
  if (conn.orientation && *conn.orientation == 1)
    throw TopologyError("BOTTOM-BOTTOM orientation 1 has no planar unfolding");
  // The child's mating face normal must point back along the parent's face normal.
  const double heading = face_angle(conn.face) + std::numbers::pi - face_angle(conn.face2con);
  return Pose2d(side * face_normal(conn.face), heading);
}

UnfoldedLayout unfold(const ConfigGraph& graph, double side) {
  const ValidationReport report = validate_topology(graph);
  if (!report.ok) throw TopologyError("invalid topology: " + report.violations.front());

  UnfoldedLayout layout;
  layout.side = side;
  layout.root = find_root(graph);
  layout.pose[layout.root] = Pose2d::identity();

  std::deque<ModuleId> queue{layout.root};
  while (!queue.empty()) {
    const ModuleId parent = queue.front();
    queue.pop_front();
    const Pose2d& parent_pose = layout.pose.at(parent);
    for (std::size_t ei : graph.incident(parent)) {
      const Edge& e = graph.edges()[ei];
      const ModuleId child = e.other(parent);
      if (layout.pose.count(child)) continue;
      layout.pose[child] = parent_pose * relative_pose(e.view_from(parent), side);
      queue.push_back(child);
    }
  }

  std::vector<std::pair<ModuleId, ModuleId>> overlaps;
  for (auto a = layout.pose.begin(); a != layout.pose.end(); ++a)
    for (auto b = std::next(a); b != layout.pose.end(); ++b)
      if (distance(a->second, b->second) < side - kOverlapTolerance) overlaps.emplace_back(a->first, b->first);
  if (!overlaps.empty()) {
    throw OverlapError("modules " + std::to_string(overlaps.front().first) + " and " +
                           std::to_string(overlaps.front().second) + " share a location",
                       overlaps);
  }
  return layout;
}

UnfoldReport check_unfoldable(const ConfigGraph& graph, double side) {
  UnfoldReport r;
  const ValidationReport v = validate_topology(graph);
  if (!v.ok) {
    r.ok = false;
    r.violations = v.violations;
    return r;
  }
  try {
    unfold(graph, side);
  } catch (const OverlapError& e) {
    r.ok = false;
    r.violations.emplace_back(e.what());
    r.overlapping = e.pairs();
  }
  return r;
}

nlohmann::json layout_to_json(const UnfoldedLayout& layout) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, p] : layout.pose)
    j[std::to_string(id)] = {{"x", p.x()}, {"y", p.y()}, {"theta", p.theta()}};
  return j;
}

UnfoldedLayout layout_from_json(const nlohmann::json& j) {
  UnfoldedLayout layout;
  for (const auto& [key, v] : j.items()) {
    const ModuleId id = std::stoi(key);
    layout.pose[id] = Pose2d(v.at("x").get<double>(), v.at("y").get<double>(), v.at("theta").get<double>());
    if (v.at("x").get<double>() == 0.0 && v.at("y").get<double>() == 0.0) layout.root = id;
  }
  return layout;
}

std::string layout_to_svg(const UnfoldedLayout& layout) {
  const double scale = 1000.0;  // px per meter
  const double half = layout.side / 2;
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (const auto& [id, p] : layout.pose) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  const double margin = layout.side;
  const double width = (max_x - min_x + 2 * margin) * scale;
  const double height = (max_y - min_y + 2 * margin) * scale;
  auto px = [&](double x) { return (x - min_x + margin) * scale; };
  auto py = [&](double y) { return (max_y - y + margin) * scale; };

  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", width,
                height);
  out += buf;
  for (const auto& [id, p] : layout.pose) {
    std::string points;
    for (const auto& c : {Vector2d(half, half), Vector2d(-half, half), Vector2d(-half, -half),
                          Vector2d(half, -half)}) {
      const Vector2d w = p.transform(c);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(w.x()), py(w.y()));
      points += buf;
    }
    const char* fill = id == layout.root ? "#f4a261" : "#a8dadc";
    std::snprintf(buf, sizeof buf, "  <polygon points=\"%s\" fill=\"%s\" stroke=\"#1d3557\"/>\n",
                  points.c_str(), fill);
    out += buf;
    const Vector2d top = p.transform(Vector2d(half * 0.8, 0.0));
    std::snprintf(buf, sizeof buf, "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#e63946\"/>\n",
                  px(top.x()), py(top.y()));
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "  <text x=\"%.2f\" y=\"%.2f\" font-size=\"20\" text-anchor=\"middle\">%d</text>\n",
                  px(p.x()), py(p.y()) + 7, id);
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace smores
