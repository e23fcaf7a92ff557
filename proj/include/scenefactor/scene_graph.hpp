// Heterogeneous plane/room/wall graph and the kNN proximity graph over planes.
#pragma once

#include "scenefactor/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace scenefactor {

using NodeId = int;

enum class NodeKind { plane, room, wall };
enum class EdgeKind { proximity, same_room, same_wall, membership };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::plane: return "plane";
    case NodeKind::room: return "room";
    case NodeKind::wall: return "wall";
  }
  return "?";
}

inline const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::proximity: return "proximity";
    case EdgeKind::same_room: return "same_room";
    case EdgeKind::same_wall: return "same_wall";
    case EdgeKind::membership: return "membership";
  }
  return "?";
}

inline NodeKind node_kind_from_string(const std::string& s) {
  if (s == "plane") return NodeKind::plane;
  if (s == "room") return NodeKind::room;
  if (s == "wall") return NodeKind::wall;
  throw std::invalid_argument("unknown node kind: " + s);
}

inline EdgeKind edge_kind_from_string(const std::string& s) {
  if (s == "proximity") return EdgeKind::proximity;
  if (s == "same_room") return EdgeKind::same_room;
  if (s == "same_wall") return EdgeKind::same_wall;
  if (s == "membership") return EdgeKind::membership;
  throw std::invalid_argument("unknown edge kind: " + s);
}

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pairwise cues between two planes. Everything except centroid_offset_along_normal is
/// symmetric; that field is stored for the lower-id -> higher-id orientation.
struct EdgeAttr {
  double centroid_dist = 0.0;
  double min_endpoint_dist = 0.0;
  double normal_dot = 0.0;
  double relative_angle = 0.0;
  /// Signed distance from the src centroid to the dst infinite line.
  double centroid_offset_along_normal = 0.0;

  bool operator==(const EdgeAttr&) const = default;
};

/// Only coordinate differences enter, so the result is exactly translation invariant
/// whenever the translated centroids are exact.
inline EdgeAttr compute_edge_attr(const Plane2D& src, const Plane2D& dst) {
  EdgeAttr a;
  const Vec2 delta = src.centroid - dst.centroid;
  a.centroid_dist = delta.norm();
  const Vec2 hs = 0.5 * src.length * src.tangent();
  const Vec2 hd = 0.5 * dst.length * dst.tangent();
  double best = std::numeric_limits<double>::infinity();
  for (double ss : {-1.0, 1.0}) {
    for (double sd : {-1.0, 1.0}) {
      best = std::min(best, (delta + ss * hs - sd * hd).norm());
    }
  }
  a.min_endpoint_dist = best;
  a.normal_dot = std::clamp(src.normal.dot(dst.normal), -1.0, 1.0);
  a.relative_angle = std::acos(a.normal_dot);
  a.centroid_offset_along_normal = dst.normal.dot(delta);
  return a;
}

struct SceneNode {
  NodeKind kind = NodeKind::plane;
  std::optional<Plane2D> plane;
  std::optional<Origin2D> origin;
};

struct SceneEdge {
  NodeId src = 0;
  NodeId dst = 0;
  EdgeKind kind = EdgeKind::proximity;
  std::optional<EdgeAttr> attr;
  std::optional<double> score;
};

/// Typed attributed graph. Mutators enforce the node/edge typing rules; plane-plane edges
/// are stored with src < dst, membership edges as concept -> plane.
class SceneGraph {
 public:
  NodeId add_plane(NodeId id, const Plane2D& plane) {
    insert_node(id, SceneNode{NodeKind::plane, plane, std::nullopt});
    return id;
  }

  NodeId add_concept(NodeId id, NodeKind kind, const Origin2D& origin) {
    if (kind == NodeKind::plane) throw GraphError("add_concept: plane is not a concept kind");
    insert_node(id, SceneNode{kind, std::nullopt, origin});
    return id;
  }

  void set_origin(NodeId id, const Origin2D& origin) {
    auto& n = node_mut(id);
    if (n.kind == NodeKind::plane) throw GraphError("set_origin: plane nodes carry no origin");
    n.origin = origin;
  }

  void set_plane(NodeId id, const Plane2D& plane) {
    auto& n = node_mut(id);
    if (n.kind != NodeKind::plane) throw GraphError("set_plane: not a plane node");
    n.plane = plane;
  }

  /// Returns the index of the stored edge.
  std::size_t add_edge(NodeId a, NodeId b, EdgeKind kind, std::optional<EdgeAttr> attr = std::nullopt,
                       std::optional<double> score = std::nullopt) {
    const SceneNode& na = node(a);
    const SceneNode& nb = node(b);
    SceneEdge e;
    e.kind = kind;
    e.attr = attr;
    e.score = score;
    if (kind == EdgeKind::membership) {
      const bool a_concept = na.kind != NodeKind::plane;
      const bool b_concept = nb.kind != NodeKind::plane;
      if (a_concept == b_concept) throw GraphError("membership edge must join one concept and one plane");
      e.src = a_concept ? a : b;
      e.dst = a_concept ? b : a;
    } else {
      if (na.kind != NodeKind::plane || nb.kind != NodeKind::plane) {
        throw GraphError(std::string(to_string(kind)) + " edge must join two planes");
      }
      if (a == b) throw GraphError("self-loop edge");
      e.src = std::min(a, b);
      e.dst = std::max(a, b);
    }
    const auto key = std::make_tuple(static_cast<int>(kind), e.src, e.dst);
    if (!edge_keys_.insert(key).second) throw GraphError("duplicate edge");
    edges_.push_back(e);
    return edges_.size() - 1;
  }

  bool has_node(NodeId id) const { return nodes_.count(id) != 0; }
  bool has_edge(NodeId a, NodeId b, EdgeKind kind) const {
    if (kind != EdgeKind::membership && a > b) std::swap(a, b);
    return edge_keys_.count(std::make_tuple(static_cast<int>(kind), a, b)) != 0;
  }

  const SceneNode& node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw GraphError("unknown node id " + std::to_string(id));
    return it->second;
  }

  const std::map<NodeId, SceneNode>& nodes() const { return nodes_; }
  const std::vector<SceneEdge>& edges() const { return edges_; }
  std::vector<SceneEdge>& edges_mut() { return edges_; }

  std::vector<NodeId> plane_ids() const { return ids_of(NodeKind::plane); }
  std::vector<NodeId> ids_of(NodeKind kind) const {
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes_) {
      if (n.kind == kind) out.push_back(id);
    }
    return out;
  }

  std::vector<NodeId> members_of(NodeId concept_id) const {
    std::vector<NodeId> out;
    for (const auto& e : edges_) {
      if (e.kind == EdgeKind::membership && e.src == concept_id) out.push_back(e.dst);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t num_edges(EdgeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(edges_.begin(), edges_.end(), [kind](const SceneEdge& e) { return e.kind == kind; }));
  }

  NodeId next_free_id() const { return nodes_.empty() ? 0 : nodes_.rbegin()->first + 1; }

 private:
  void insert_node(NodeId id, SceneNode n) {
    if (!nodes_.emplace(id, std::move(n)).second) throw GraphError("duplicate node id " + std::to_string(id));
  }
  SceneNode& node_mut(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw GraphError("unknown node id " + std::to_string(id));
    return it->second;
  }

  std::map<NodeId, SceneNode> nodes_;
  std::vector<SceneEdge> edges_;
  std::set<std::tuple<int, NodeId, NodeId>> edge_keys_;
};

/// Connects every plane to its k nearest neighbours by centroid distance (ties: lower id),
/// k clamped to n-1, and symmetrizes the result. Plane node ids are the list indices.
inline SceneGraph build_proximity_graph(const std::vector<Plane2D>& planes, int k) {
  if (k < 1) throw GraphError("build_proximity_graph: k must be >= 1");
  if (planes.size() < 2) throw GraphError("build_proximity_graph: insufficient planes (need >= 2)");
  const int n = static_cast<int>(planes.size());
  const int kk = std::min(k, n - 1);
  SceneGraph g;
  for (int i = 0; i < n; ++i) g.add_plane(i, planes[static_cast<std::size_t>(i)]);

  std::set<std::pair<int, int>> pairs;
  std::vector<std::pair<double, int>> cand;
  cand.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cand.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back((planes[static_cast<std::size_t>(i)].centroid - planes[static_cast<std::size_t>(j)].centroid)
                            .squaredNorm(),
                        j);
    }
    std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());
    for (int t = 0; t < kk; ++t) {
      const int j = cand[static_cast<std::size_t>(t)].second;
      pairs.emplace(std::min(i, j), std::max(i, j));
    }
  }
  for (const auto& [a, b] : pairs) {
    g.add_edge(a, b, EdgeKind::proximity,
               compute_edge_attr(planes[static_cast<std::size_t>(a)], planes[static_cast<std::size_t>(b)]));
  }
  return g;
}

struct NodeFeature {
  Vec2 normal{1.0, 0.0};
  /// Line offset expressed in the local frame: n·q + offset_residual = 0 for local points q.
  double offset_residual = 0.0;
  Vec2 centroid_local{0.0, 0.0};
  double length = 0.0;

  bool operator==(const NodeFeature&) const = default;
};

/// Grid the local frame origin is snapped to (2^-20 m). Snapping makes the frame shift by
/// exactly t under any translation t representable on the grid.
inline constexpr double kFrameQuantum = 1.0 / 1048576.0;

inline Vec2 local_frame_origin(const std::vector<Vec2>& centroids) {
  if (centroids.empty()) return Vec2::Zero();
  if (centroids.size() == 1) return centroids.front();
  // Fixed summation order (lexicographic) so the result does not depend on list order.
  std::vector<Vec2> sorted = centroids;
  std::sort(sorted.begin(), sorted.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  Vec2 sum = Vec2::Zero();
  for (const auto& c : sorted) sum += c;
  const Vec2 mean = sum / static_cast<double>(sorted.size());
  return {std::round(mean.x() / kFrameQuantum) * kFrameQuantum, std::round(mean.y() / kFrameQuantum) * kFrameQuantum};
}

inline NodeFeature local_feature(const Plane2D& p, const Vec2& frame) {
  NodeFeature f;
  f.normal = p.normal;
  f.centroid_local = p.centroid - frame;
  f.offset_residual = -p.normal.dot(f.centroid_local);
  f.length = p.length;
  return f;
}

/// Features of every plane node relative to the (snapped) mean centroid of all planes.
inline std::map<NodeId, NodeFeature> localize_features(const SceneGraph& graph) {
  const auto ids = graph.plane_ids();
  if (ids.empty()) throw GraphError("localize_features: graph has no plane nodes");
  std::vector<Vec2> cs;
  cs.reserve(ids.size());
  for (NodeId id : ids) cs.push_back(graph.node(id).plane->centroid);
  const Vec2 frame = local_frame_origin(cs);
  std::map<NodeId, NodeFeature> out;
  for (NodeId id : ids) out.emplace(id, local_feature(*graph.node(id).plane, frame));
  return out;
}

}  // namespace scenefactor
