#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace smores {

using ModuleId = int;

enum class Face : std::uint8_t { kLeft = 0, kRight = 1, kTop = 2, kBottom = 3 };

inline constexpr std::array<Face, 4> kAllFaces = {Face::kLeft, Face::kRight, Face::kTop,
                                                  Face::kBottom};

std::string_view to_string(Face f);
/// Short single-letter label (L, R, T, B).
char face_letter(Face f);
/// Accepts "LEFT"/"RIGHT"/"TOP"/"BOTTOM" and the single letters.
Face parse_face(std::string_view s);
/// LEFT <-> RIGHT, TOP <-> BOTTOM.
Face opposite(Face f);
inline bool is_side_face(Face f) { return f == Face::kLeft || f == Face::kRight; }

/// One module's view of a connection: its own face and the face it mates with.
struct Connection {
  Face face = Face::kTop;
  Face face2con = Face::kTop;
  /// Only meaningful for BOTTOM-BOTTOM connections.
  std::optional<int> orientation;

  Connection reversed() const { return {face2con, face, orientation}; }
  bool operator==(const Connection&) const = default;
};

struct Edge {
  ModuleId a = 0;
  ModuleId b = 0;
  Connection from_a;  ///< a's view: face on a, face2con on b
  Connection from_b;  ///< b's view

  ModuleId other(ModuleId v) const { return v == a ? b : a; }
  const Connection& view_from(ModuleId v) const { return v == a ? from_a : from_b; }
  bool operator==(const Edge&) const = default;
};

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected configuration graph with typed connections. Construction checks
/// local consistency only; global properties (tree shape, connector reuse) are
/// reported by validate_topology.
class ConfigGraph {
 public:
  ConfigGraph() = default;

  void add_module(ModuleId id);
  /// Connects a's `face_a` to b's `face_b`. Orientation applies to
  /// BOTTOM-BOTTOM only (default 0) and is rejected otherwise.
  void connect(ModuleId a, Face face_a, ModuleId b, Face face_b,
               std::optional<int> orientation = std::nullopt);
  /// Adds an edge from both stored views; throws if they disagree.
  void add_edge(const Edge& e);

  const std::vector<ModuleId>& modules() const { return modules_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return modules_.size(); }
  bool contains(ModuleId id) const;

  /// Indices into edges() incident to `v`.
  std::vector<std::size_t> incident(ModuleId v) const;
  /// Neighbor attached at face `f` of `v`, if any.
  std::optional<ModuleId> neighbor_at(ModuleId v, Face f) const;

  bool operator==(const ConfigGraph&) const = default;

 private:
  std::vector<ModuleId> modules_;  // kept sorted
  std::vector<Edge> edges_;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

ValidationReport validate_topology(const ConfigGraph& graph);

/// Per-vertex data for a tree rooted at `root`.
struct RootedInfo {
  ModuleId root = 0;
  std::map<ModuleId, int> depth;
  std::map<ModuleId, int> height;
  std::map<ModuleId, std::optional<ModuleId>> parent;
  /// Number of modules reachable from v through face c (CN^v(c)).
  std::map<ModuleId, std::array<int, 4>> cn;

  int cn_at(ModuleId v, Face f) const { return cn.at(v)[static_cast<int>(f)]; }
  int tree_depth() const;
};

/// Counts inner-loop work done by the root search, for complexity checks.
struct RootSearchStats {
  std::size_t steps = 0;
};

/// Graph center satisfying CN^tau(c) <= |V|/2 for every face, computed by a
/// bottom-up pass over heights. When two adjacent centers exist the smaller id
/// wins. Throws TopologyError on an invalid graph.
ModuleId find_root(const ConfigGraph& graph, RootSearchStats* stats = nullptr);

/// Same result as find_root; exposes the tie rule explicitly.
ModuleId tie_break_roots(const ConfigGraph& graph);

/// All vertices satisfying the center condition, ascending.
std::vector<ModuleId> center_candidates(const ConfigGraph& graph,
                                        RootSearchStats* stats = nullptr);

/// Depths, heights and CN table for `root`; CN is root independent.
RootedInfo rooted_info(const ConfigGraph& graph, ModuleId root);
/// rooted_info with the CN pass seeded at `seed` instead of `root`.
RootedInfo rooted_info_seeded(const ConfigGraph& graph, ModuleId root, ModuleId seed);

void to_json(nlohmann::json& j, const ConfigGraph& g);
void from_json(const nlohmann::json& j, ConfigGraph& g);

}  // namespace smores
