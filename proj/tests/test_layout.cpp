#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "smores/layout.hpp"
#include "support/oracles.hpp"

using namespace smores;

namespace {

constexpr double w = kModuleWidth;
constexpr double pi = std::numbers::pi;

void check_pose(const Pose2d& got, double x, double y, double theta, double tol = 1e-12) {
  CHECK(std::abs(got.x() - x) <= tol);
  CHECK(std::abs(got.y() - y) <= tol);
  CHECK(std::abs(angle_diff(got.theta(), theta)) <= tol);
}

ConfigGraph task1_target() {
  ConfigGraph g;
  for (int v = 0; v < 7; ++v) g.add_module(v);
  g.connect(3, Face::kBottom, 0, Face::kLeft);
  g.connect(1, Face::kBottom, 0, Face::kRight);
  g.connect(2, Face::kBottom, 0, Face::kTop);
  g.connect(4, Face::kTop, 0, Face::kBottom);
  g.connect(5, Face::kTop, 4, Face::kBottom);
  g.connect(6, Face::kTop, 5, Face::kBottom);
  return g;
}

}  // namespace

TEST_CASE("Pose2 composition and inverse") {
  const Pose2d parent(0, 0, pi / 2);
  check_pose(parent * Pose2d(w, 0, pi), 0, w, -pi / 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 100; ++k) {
    const Pose2d a(u(rng), u(rng), u(rng));
    check_pose(a * a.inverse(), 0, 0, 0, 1e-12);
    CHECK(a.theta() > -pi);
    CHECK(a.theta() <= pi);
  }
  CHECK(wrap_angle(pi) == pi);
  CHECK(wrap_angle(-pi) == pi);
}

TEST_CASE("relative pose table") {
  // (parent face, child face) -> child pose in parent frame, worked out by hand.
  struct Row {
    Face p, c;
    double x, y, theta;
  };
  const Row table[] = {
      {Face::kTop, Face::kTop, w, 0, pi},          {Face::kTop, Face::kBottom, w, 0, 0},
      {Face::kTop, Face::kLeft, w, 0, pi / 2},     {Face::kTop, Face::kRight, w, 0, -pi / 2},
      {Face::kBottom, Face::kBottom, -w, 0, pi},   {Face::kBottom, Face::kLeft, -w, 0, -pi / 2},
      {Face::kBottom, Face::kRight, -w, 0, pi / 2}, {Face::kLeft, Face::kLeft, 0, w, pi},
      {Face::kLeft, Face::kRight, 0, w, 0},        {Face::kRight, Face::kRight, 0, -w, pi},
  };
  for (const Row& r : table) {
    CAPTURE(to_string(r.p));
    CAPTURE(to_string(r.c));
    std::optional<int> o;
    if (r.p == Face::kBottom && r.c == Face::kBottom) o = 0;
    check_pose(relative_pose({r.p, r.c, o}), r.x, r.y, r.theta);
  }
}

TEST_CASE("relative pose puts the mating faces flush and antiparallel") {
  for (Face p : kAllFaces)
    for (Face c : kAllFaces) {
      std::optional<int> o;
      if (p == Face::kBottom && c == Face::kBottom) o = 0;
      const Pose2d child = relative_pose({p, c, o});
      const Vector2d parent_center = 0.5 * w * face_normal(p);
      const Vector2d child_center = child.transform(0.5 * w * face_normal(c));
      CHECK((parent_center - child_center).norm() < 1e-12);
      CHECK((child.rotation() * face_normal(c) + face_normal(p)).norm() < 1e-12);
      // Reversing the view gives the inverse transform.
      const Pose2d back = relative_pose({c, p, o});
      const Pose2d id = child * back;
      CHECK(id.translation().norm() < 1e-12);
      CHECK(std::abs(id.theta()) < 1e-12);
    }
  CHECK_THROWS_AS(relative_pose({Face::kBottom, Face::kBottom, 1}), TopologyError);
}

TEST_CASE("task 1 target layout") {
  const UnfoldedLayout l = unfold(task1_target());
  CHECK(l.root == 0);
  check_pose(l.pose.at(0), 0, 0, 0);
  check_pose(l.pose.at(2), w, 0, 0);
  check_pose(l.pose.at(3), 0, w, pi / 2);
  check_pose(l.pose.at(1), 0, -w, -pi / 2);
  check_pose(l.pose.at(4), -w, 0, 0);
  check_pose(l.pose.at(5), -2 * w, 0, 0);
  check_pose(l.pose.at(6), -3 * w, 0, 0);
  CHECK(check_unfoldable(task1_target()).ok);
}

TEST_CASE("straight chains stay collinear at spacing w") {
  ConfigGraph g;
  for (int v = 0; v < 9; ++v) g.add_module(v);
  for (int v = 1; v < 9; ++v) g.connect(v, Face::kBottom, v - 1, Face::kTop);
  const UnfoldedLayout l = unfold(g);
  for (int v = 0; v < 9; ++v) {
    CHECK(std::abs(l.pose.at(v).y()) < 1e-12);
    CHECK(std::abs(l.pose.at(v).x() - (v - l.root) * w) < 1e-12);
  }
}

TEST_CASE("a U whose ends meet cannot be unfolded") {
  ConfigGraph g;
  for (int v = 0; v < 7; ++v) g.add_module(v);
  g.connect(1, Face::kBottom, 0, Face::kTop);   // +x
  g.connect(2, Face::kBottom, 1, Face::kTop);   // +x
  g.connect(3, Face::kRight, 2, Face::kLeft);   // +y
  g.connect(4, Face::kTop, 3, Face::kBottom);   // -x
  g.connect(5, Face::kTop, 4, Face::kBottom);   // -x
  g.connect(6, Face::kLeft, 5, Face::kRight);   // -y, lands on 0
  CHECK(validate_topology(g).ok);
  const UnfoldReport r = check_unfoldable(g);
  CHECK_FALSE(r.ok);
  REQUIRE(r.overlapping.size() == 1);
  CHECK(r.overlapping.front() == std::pair<ModuleId, ModuleId>{0, 6});
  CHECK_THROWS_AS(unfold(g), OverlapError);
}

TEST_CASE("every edge of random unfoldable layouts has length w") {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const ConfigGraph g = oracle::random_tree(rng, 12);
    if (!check_unfoldable(g).ok) continue;
    ++checked;
    const UnfoldedLayout l = unfold(g);
    for (const Edge& e : g.edges()) CHECK(std::abs(distance(l.pose.at(e.a), l.pose.at(e.b)) - w) < 1e-12);
    for (auto a = l.pose.begin(); a != l.pose.end(); ++a)
      for (auto b = std::next(a); b != l.pose.end(); ++b) CHECK(distance(a->second, b->second) >= w - 1e-6);
  }
  CHECK(checked > 50);
}

TEST_CASE("layout JSON and SVG") {
  const UnfoldedLayout l = unfold(task1_target());
  const UnfoldedLayout back = layout_from_json(layout_to_json(l));
  CHECK(back.root == l.root);
  for (const auto& [id, p] : l.pose) check_pose(back.pose.at(id), p.x(), p.y(), p.theta());
  const std::string svg = layout_to_svg(l);
  CHECK(svg.find("<svg") != std::string::npos);
  std::size_t squares = 0;
  for (std::size_t at = svg.find("<polygon"); at != std::string::npos; at = svg.find("<polygon", at + 1)) ++squares;
  CHECK(squares == 7);
}
