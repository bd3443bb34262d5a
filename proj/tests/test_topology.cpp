#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "smores/topology.hpp"
#include "support/oracles.hpp"

using namespace smores;

namespace {

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

ConfigGraph chain(int n) {
  ConfigGraph g;
  for (int v = 0; v < n; ++v) g.add_module(v);
  for (int v = 1; v < n; ++v) g.connect(v, Face::kTop, v - 1, Face::kBottom);
  return g;
}

bool has_violation(const ValidationReport& r, const std::string& needle) {
  for (const auto& v : r.violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("face names parse and invert") {
  CHECK(parse_face("LEFT") == Face::kLeft);
  CHECK(parse_face("B") == Face::kBottom);
  CHECK_THROWS_AS(parse_face("UP"), TopologyError);
  for (Face f : kAllFaces) {
    CHECK(opposite(opposite(f)) == f);
    CHECK(parse_face(to_string(f)) == f);
  }
  CHECK(opposite(Face::kLeft) == Face::kRight);
  CHECK(opposite(Face::kTop) == Face::kBottom);
}

TEST_CASE("connection views stay consistent") {
  ConfigGraph g;
  g.add_module(0);
  g.add_module(1);
  g.connect(1, Face::kTop, 0, Face::kLeft);
  const Edge& e = g.edges().front();
  CHECK(e.view_from(1).face == Face::kTop);
  CHECK(e.view_from(1).face2con == Face::kLeft);
  CHECK(e.view_from(0) == e.view_from(1).reversed());
  CHECK(g.neighbor_at(0, Face::kLeft) == 1);
  CHECK_FALSE(g.neighbor_at(0, Face::kTop).has_value());

  Edge bad = e;
  bad.from_b.face = Face::kRight;
  ConfigGraph h;
  h.add_module(0);
  h.add_module(1);
  CHECK_THROWS_AS(h.add_edge(bad), TopologyError);
}

TEST_CASE("orientation only on BOTTOM-BOTTOM") {
  ConfigGraph g;
  g.add_module(0);
  g.add_module(1);
  g.add_module(2);
  CHECK_THROWS_AS(g.connect(0, Face::kTop, 1, Face::kTop, 0), TopologyError);
  g.connect(0, Face::kBottom, 1, Face::kBottom);
  CHECK(g.edges().front().from_a.orientation == 0);
  g.connect(1, Face::kTop, 2, Face::kBottom);
  CHECK(validate_topology(g).ok);
}

TEST_CASE("validation examples") {
  SUBCASE("task 1 target") { CHECK(validate_topology(task1_target()).ok); }
  SUBCASE("empty") { CHECK(has_violation(validate_topology(ConfigGraph{}), "empty")); }
  SUBCASE("cycle") {
    ConfigGraph g = chain(3);
    g.connect(0, Face::kTop, 2, Face::kBottom);
    CHECK(has_violation(validate_topology(g), "not a tree"));
  }
  SUBCASE("connector reuse") {
    ConfigGraph g;
    for (int v = 0; v < 3; ++v) g.add_module(v);
    g.connect(1, Face::kTop, 0, Face::kLeft);
    g.connect(2, Face::kTop, 0, Face::kLeft);
    CHECK(has_violation(validate_topology(g), "connector reused"));
  }
  SUBCASE("excluded orientation") {
    ConfigGraph g;
    g.add_module(0);
    g.add_module(1);
    g.connect(0, Face::kBottom, 1, Face::kBottom, 1);
    CHECK(has_violation(validate_topology(g), "excluded orientation"));
  }
  SUBCASE("disconnected") {
    ConfigGraph g = chain(3);
    g.add_module(7);
    CHECK_FALSE(validate_topology(g).ok);
  }
}

TEST_CASE("root of the task targets") {
  CHECK(find_root(task1_target()) == 0);
  ConfigGraph single;
  single.add_module(4);
  CHECK(find_root(single) == 4);
}

TEST_CASE("even chain has two adjacent centers; the smaller id wins") {
  const ConfigGraph g = chain(4);
  CHECK(center_candidates(g) == std::vector<ModuleId>{1, 2});
  CHECK(find_root(g) == 1);
  CHECK(tie_break_roots(g) == 1);
  CHECK(find_root(chain(5)) == 2);
}

TEST_CASE("CN table is independent of the pass seed") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const ConfigGraph g = oracle::random_tree(rng, 15);
    const ModuleId root = find_root(g);
    const RootedInfo a = rooted_info(g, root);
    for (ModuleId seed : g.modules()) CHECK(rooted_info_seeded(g, root, seed).cn == a.cn);
    // Every edge splits the tree: the counts through both ends add to n.
    for (const Edge& e : g.edges())
      CHECK(a.cn_at(e.a, e.from_a.face) + a.cn_at(e.b, e.from_b.face) == static_cast<int>(g.size()));
  }
}

TEST_CASE("rooted depths and heights on the task 1 target") {
  const RootedInfo info = rooted_info(task1_target(), 0);
  CHECK(info.depth.at(6) == 3);
  CHECK(info.height.at(0) == 3);
  CHECK(info.tree_depth() == 3);
  CHECK(info.parent.at(5) == 4);
  CHECK_FALSE(info.parent.at(0).has_value());
  CHECK(info.cn_at(0, Face::kBottom) == 3);
  CHECK(info.cn_at(4, Face::kTop) == 4);
}

TEST_CASE("root search agrees with the flood-fill oracle on all small labeled trees") {
  std::size_t trees = 0;
  for (int n = 1; n <= 6; ++n)
    oracle::for_each_pruefer(n, [&](const std::vector<int>& seq) {
      const auto edges = n == 1 ? std::vector<std::pair<int, int>>{} : oracle::pruefer_tree(seq, n);
      const auto g = oracle::graph_from_edges(edges, n);
      if (!g) return;
      ++trees;
      const auto expected = oracle::brute_force_centers(oracle::adjacency(edges, n));
      CHECK(center_candidates(*g) == std::vector<ModuleId>(expected.begin(), expected.end()));
      CHECK(find_root(*g) == expected.front());
    });
  CHECK(trees > 1000);
}

TEST_CASE("root search work grows linearly") {
  auto steps = [](int n) {
    RootSearchStats s;
    find_root(chain(n), &s);
    return static_cast<double>(s.steps);
  };
  const double a = steps(2000), b = steps(4000);
  CHECK(b / a == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("JSON round trip") {
  const ConfigGraph g = task1_target();
  nlohmann::json j;
  to_json(j, g);
  ConfigGraph back;
  from_json(j, back);
  CHECK(back == g);
}
