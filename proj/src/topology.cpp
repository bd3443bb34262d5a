#include "smores/topology.hpp"

#include <algorithm>
#include <cstdint>
#include <set>

namespace smores {

namespace {

int index_of(Face f) { return static_cast<int>(f); }

bool is_bottom_pair(Face a, Face b) { return a == Face::kBottom && b == Face::kBottom; }

// Vertex-indexed adjacency; index i corresponds to modules()[i].
struct Adjacency {
  std::vector<std::vector<std::size_t>> edges_of;
  std::vector<std::size_t> end_a, end_b;  // endpoint indices per edge
};

std::size_t index_in(const ConfigGraph& g, ModuleId v) {
  auto it = std::lower_bound(g.modules().begin(), g.modules().end(), v);
  return static_cast<std::size_t>(it - g.modules().begin());
}

Adjacency build_adjacency(const ConfigGraph& g) {
  Adjacency adj;
  adj.edges_of.resize(g.size());
  adj.end_a.reserve(g.edges().size());
  adj.end_b.reserve(g.edges().size());
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    const std::size_t a = index_in(g, g.edges()[i].a);
    const std::size_t b = index_in(g, g.edges()[i].b);
    adj.end_a.push_back(a);
    adj.end_b.push_back(b);
    adj.edges_of[a].push_back(i);
    adj.edges_of[b].push_back(i);
  }
  return adj;
}

inline constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// BFS tree from vertex index `seed`: visiting order plus parent edge per vertex.
struct BfsTree {
  std::vector<std::size_t> order;
  std::vector<std::size_t> parent_edge;  // kNone for the seed and unreached vertices
  std::vector<char> reached;
};

BfsTree bfs_tree(const Adjacency& adj, std::size_t seed) {
  const std::size_t n = adj.edges_of.size();
  BfsTree t;
  t.parent_edge.assign(n, kNone);
  t.reached.assign(n, 0);
  t.order.reserve(n);
  t.order.push_back(seed);
  t.reached[seed] = 1;
  for (std::size_t head = 0; head < t.order.size(); ++head) {
    const std::size_t v = t.order[head];
    for (std::size_t ei : adj.edges_of[v]) {
      const std::size_t u = adj.end_a[ei] == v ? adj.end_b[ei] : adj.end_a[ei];
      if (t.reached[u]) continue;
      t.reached[u] = 1;
      t.parent_edge[u] = ei;
      t.order.push_back(u);
    }
  }
  return t;
}

void require_valid(const ConfigGraph& g) {
  ValidationReport r = validate_topology(g);
  if (!r.ok) throw TopologyError("invalid topology: " + r.violations.front());
}

// CN table (vertex-indexed) computed bottom-up over heights of the tree rooted
// at vertex index `seed`.
std::vector<std::array<int, 4>> compute_cn(const ConfigGraph& g, const Adjacency& adj,
                                           std::size_t seed, RootSearchStats* stats) {
  const std::size_t n = g.size();
  const BfsTree tree = bfs_tree(adj, seed);
  auto parent_of = [&](std::size_t v) {
    const std::size_t ei = tree.parent_edge[v];
    return adj.end_a[ei] == v ? adj.end_b[ei] : adj.end_a[ei];
  };

  std::vector<int> height(n, 0);
  for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
    if (tree.parent_edge[*it] == kNone) continue;
    const std::size_t p = parent_of(*it);
    height[p] = std::max(height[p], height[*it] + 1);
  }
  const int tree_height = height[seed];
  // Counting sort by height so each level is processed after all lower ones.
  std::vector<std::size_t> level_start(static_cast<std::size_t>(tree_height) + 2, 0);
  for (std::size_t v = 0; v < n; ++v) ++level_start[static_cast<std::size_t>(height[v]) + 1];
  for (std::size_t h = 1; h < level_start.size(); ++h) level_start[h] += level_start[h - 1];
  std::vector<std::size_t> by_height(n);
  {
    std::vector<std::size_t> fill(level_start.begin(), level_start.end() - 1);
    for (std::size_t v : tree.order) by_height[fill[static_cast<std::size_t>(height[v])]++] = v;
  }

  std::vector<std::array<int, 4>> cn(n, {0, 0, 0, 0});
  const int count = static_cast<int>(n);
  for (int h = 1; h <= tree_height; ++h) {
    for (std::size_t k = level_start[static_cast<std::size_t>(h)]; k < level_start[static_cast<std::size_t>(h) + 1]; ++k) {
      const std::size_t v = by_height[k];
      const ModuleId vid = g.modules()[v];
      for (std::size_t ei : adj.edges_of[v]) {
        if (ei == tree.parent_edge[v]) continue;
        const Edge& e = g.edges()[ei];
        const std::size_t child = adj.end_a[ei] == v ? adj.end_b[ei] : adj.end_a[ei];
        const Face c = e.view_from(vid).face;
        const Face mating = e.view_from(vid).face2con;
        int below = 0;
        for (Face f : kAllFaces) {
          if (f != mating) below += cn[child][index_of(f)];
          if (stats) ++stats->steps;
        }
        cn[v][index_of(c)] = below + 1;
        cn[child][index_of(mating)] = count - 1 - below;
      }
    }
  }
  return cn;
}

}  // namespace

std::string_view to_string(Face f) {
  switch (f) {
    case Face::kLeft: return "LEFT";
    case Face::kRight: return "RIGHT";
    case Face::kTop: return "TOP";
    case Face::kBottom: return "BOTTOM";
  }
  return "?";
}

char face_letter(Face f) { return to_string(f).front(); }

Face parse_face(std::string_view s) {
  if (s == "LEFT" || s == "L") return Face::kLeft;
  if (s == "RIGHT" || s == "R") return Face::kRight;
  if (s == "TOP" || s == "T") return Face::kTop;
  if (s == "BOTTOM" || s == "B") return Face::kBottom;
  throw TopologyError("unknown face '" + std::string(s) + "'");
}

Face opposite(Face f) {
  switch (f) {
    case Face::kLeft: return Face::kRight;
    case Face::kRight: return Face::kLeft;
    case Face::kTop: return Face::kBottom;
    case Face::kBottom: return Face::kTop;
  }
  return f;
}

void ConfigGraph::add_module(ModuleId id) {
  auto it = std::lower_bound(modules_.begin(), modules_.end(), id);
  if (it != modules_.end() && *it == id) throw TopologyError("duplicate module " + std::to_string(id));
  modules_.insert(it, id);
}

bool ConfigGraph::contains(ModuleId id) const {
  return std::binary_search(modules_.begin(), modules_.end(), id);
}

void ConfigGraph::connect(ModuleId a, Face face_a, ModuleId b, Face face_b,
                          std::optional<int> orientation) {
  if (is_bottom_pair(face_a, face_b)) {
    if (!orientation) orientation = 0;
  } else if (orientation) {
    throw TopologyError("orientation given for a non BOTTOM-BOTTOM connection");
  }
  add_edge(Edge{a, b, Connection{face_a, face_b, orientation}, Connection{face_b, face_a, orientation}});
}

void ConfigGraph::add_edge(const Edge& e) {
  if (!contains(e.a) || !contains(e.b))
    throw TopologyError("edge references unknown module " + std::to_string(e.a) + "-" +
                        std::to_string(e.b));
  if (e.from_a.face != e.from_b.face2con || e.from_a.face2con != e.from_b.face ||
      e.from_a.orientation != e.from_b.orientation)
    throw TopologyError("inconsistent connection views on edge " + std::to_string(e.a) + "-" +
                        std::to_string(e.b));
  const bool bb = is_bottom_pair(e.from_a.face, e.from_a.face2con);
  if (bb != e.from_a.orientation.has_value())
    throw TopologyError("orientation must be present exactly for BOTTOM-BOTTOM connections");
  if (e.from_a.orientation && *e.from_a.orientation != 0 && *e.from_a.orientation != 1)
    throw TopologyError("orientation must be 0 or 1");
  edges_.push_back(e);
}

std::vector<std::size_t> ConfigGraph::incident(ModuleId v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (edges_[i].a == v || edges_[i].b == v) out.push_back(i);
  return out;
}

std::optional<ModuleId> ConfigGraph::neighbor_at(ModuleId v, Face f) const {
  for (const Edge& e : edges_) {
    if (e.a == v && e.from_a.face == f) return e.b;
    if (e.b == v && e.from_b.face == f) return e.a;
  }
  return std::nullopt;
}

ValidationReport validate_topology(const ConfigGraph& g) {
  ValidationReport r;
  auto fail = [&](std::string msg) {
    r.ok = false;
    r.violations.push_back(std::move(msg));
  };

  const std::size_t n = g.size();
  if (n == 0) fail("empty configuration");

  // One bit per (module, face); the graph keeps its modules sorted.
  std::vector<std::uint8_t> used(n, 0);
  auto claim = [&](ModuleId m, Face f) {
    std::uint8_t& bits = used[index_in(g, m)];
    const std::uint8_t bit = static_cast<std::uint8_t>(1u << static_cast<int>(f));
    if (bits & bit) fail("connector reused: module " + std::to_string(m) + " " + std::string(to_string(f)));
    bits |= bit;
  };
  for (const Edge& e : g.edges()) {
    if (e.a == e.b) fail("self loop on module " + std::to_string(e.a));
    claim(e.a, e.from_a.face);
    claim(e.b, e.from_b.face);
    if (e.from_a.orientation && *e.from_a.orientation == 1)
      fail("excluded orientation: BOTTOM-BOTTOM orientation 1 on edge " + std::to_string(e.a) + "-" +
           std::to_string(e.b));
  }

  if (n > 0) {
    if (g.edges().size() != n - 1)
      fail("not a tree: " + std::to_string(g.edges().size()) + " edges for " + std::to_string(n) +
           " modules");
    const BfsTree t = bfs_tree(build_adjacency(g), 0);
    if (t.order.size() != n) fail("not connected");
  }
  return r;
}

int RootedInfo::tree_depth() const {
  int d = 0;
  for (const auto& [v, dv] : depth) d = std::max(d, dv);
  return d;
}

std::vector<ModuleId> center_candidates(const ConfigGraph& g, RootSearchStats* stats) {
  require_valid(g);
  const auto cn = compute_cn(g, build_adjacency(g), 0, stats);
  const int n = static_cast<int>(g.size());
  std::vector<ModuleId> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = cn[i];
    if (std::all_of(c.begin(), c.end(), [n](int k) { return 2 * k <= n; }))
      out.push_back(g.modules()[i]);
  }
  return out;
}

ModuleId find_root(const ConfigGraph& g, RootSearchStats* stats) {
  const auto centers = center_candidates(g, stats);
  if (centers.empty()) throw TopologyError("no vertex satisfies the center condition");
  return centers.front();
}

ModuleId tie_break_roots(const ConfigGraph& g) {
  const auto centers = center_candidates(g);
  return *std::min_element(centers.begin(), centers.end());
}

RootedInfo rooted_info(const ConfigGraph& g, ModuleId root) {
  if (!g.contains(root)) throw TopologyError("unknown root module " + std::to_string(root));
  require_valid(g);
  const Adjacency adj = build_adjacency(g);
  const BfsTree t = bfs_tree(adj, index_in(g, root));

  RootedInfo info;
  info.root = root;
  for (std::size_t v : t.order) {
    const ModuleId id = g.modules()[v];
    info.height[id] = 0;
    if (t.parent_edge[v] != kNone) {
      const ModuleId p = g.edges()[t.parent_edge[v]].other(id);
      info.parent[id] = p;
      info.depth[id] = info.depth.at(p) + 1;
    } else {
      info.parent[id] = std::nullopt;
      info.depth[id] = 0;
    }
  }
  for (auto it = t.order.rbegin(); it != t.order.rend(); ++it) {
    const ModuleId id = g.modules()[*it];
    if (auto p = info.parent.at(id)) info.height[*p] = std::max(info.height[*p], info.height[id] + 1);
  }
  const auto cn = compute_cn(g, adj, index_in(g, root), nullptr);
  for (std::size_t i = 0; i < g.size(); ++i) info.cn[g.modules()[i]] = cn[i];
  return info;
}

RootedInfo rooted_info_seeded(const ConfigGraph& g, ModuleId root, ModuleId seed) {
  RootedInfo info = rooted_info(g, root);
  if (!g.contains(seed)) throw TopologyError("unknown seed module " + std::to_string(seed));
  const auto cn = compute_cn(g, build_adjacency(g), index_in(g, seed), nullptr);
  for (std::size_t i = 0; i < g.size(); ++i) info.cn[g.modules()[i]] = cn[i];
  return info;
}

void to_json(nlohmann::json& j, const ConfigGraph& g) {
  j = nlohmann::json::object();
  j["modules"] = g.modules();
  auto conns = nlohmann::json::array();
  for (const Edge& e : g.edges()) {
    nlohmann::json c;
    c["a"] = e.a;
    c["fa"] = to_string(e.from_a.face);
    c["b"] = e.b;
    c["fb"] = to_string(e.from_b.face);
    c["orientation"] = e.from_a.orientation ? nlohmann::json(*e.from_a.orientation) : nlohmann::json();
    conns.push_back(std::move(c));
  }
  j["connections"] = std::move(conns);
}

void from_json(const nlohmann::json& j, ConfigGraph& g) {
  g = ConfigGraph();
  for (const auto& m : j.at("modules")) g.add_module(m.get<ModuleId>());
  for (const auto& c : j.at("connections")) {
    std::optional<int> orientation;
    if (c.contains("orientation") && !c["orientation"].is_null()) orientation = c["orientation"].get<int>();
    g.connect(c.at("a").get<ModuleId>(), parse_face(c.at("fa").get<std::string>()),
              c.at("b").get<ModuleId>(), parse_face(c.at("fb").get<std::string>()), orientation);
  }
}

}  // namespace smores
