// Procedural building layouts: ground-truth scene graphs plus noisy plane observations.
#pragma once

#include "scenefactor/geometry.hpp"
#include "scenefactor/scene_graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenefactor {

template <typename T>
struct Interval {
  T lo{};
  T hi{};
  bool valid() const { return lo <= hi; }
  bool operator==(const Interval&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Layout and noise knobs. Defaults are the synthetic dataset values the models are trained with.
struct GeneratorConfig {
  Interval<int> voxels_xy_range{25, 70};
  Interval<int> voxels_per_room_range{10, 60};
  Interval<double> max_building_size_m{60.0, 100.0};
  Interval<double> voxel_size_m{0.1, 0.2};
  int n_buildings = 2000;
  Interval<double> wall_thickness_m{0.05, 0.15};
  double plane_dropout = 0.10;
  double l_shape_prob = 0.40;
  int knn_k = 10;
  Interval<double> noise_global_rot_deg{0.0, 360.0};
  Interval<double> noise_plane_rot_deg{0.0, 5.0};
  Interval<double> noise_room_trans_m{0.0, 0.1};
  Interval<double> noise_room_rot_deg{0.0, 3.0};
  std::uint64_t seed = 0;
  /// Probability that a region able to hold two rooms along some axis is split further.
  double room_split_prob = 0.75;
  /// Shortest plane segment kept after wall-thickness trimming.
  double min_plane_length_m = 0.2;

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must be a probability");
    };
    if (!voxels_xy_range.valid() || !voxels_per_room_range.valid() || !max_building_size_m.valid() ||
        !voxel_size_m.valid() || !wall_thickness_m.valid() || !noise_global_rot_deg.valid() ||
        !noise_plane_rot_deg.valid() || !noise_room_trans_m.valid() || !noise_room_rot_deg.valid()) {
      throw ConfigError("generator config: every interval needs lo <= hi");
    }
    if (voxels_per_room_range.lo < 1 || voxels_xy_range.lo < 1) throw ConfigError("voxel counts must be positive");
    if (voxel_size_m.lo <= 0.0 || max_building_size_m.lo <= 0.0) throw ConfigError("sizes must be positive");
    if (wall_thickness_m.lo < 0.0 || noise_room_trans_m.lo < 0.0 || noise_plane_rot_deg.lo < 0.0 ||
        noise_room_rot_deg.lo < 0.0) {
      throw ConfigError("thickness and noise magnitudes must be non-negative");
    }
    prob(plane_dropout, "plane_dropout");
    prob(l_shape_prob, "l_shape_prob");
    prob(room_split_prob, "room_split_prob");
    if (knn_k < 1) throw ConfigError("knn_k must be >= 1");
    if (n_buildings < 0) throw ConfigError("n_buildings must be >= 0");
  }
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for building `index` of a dataset seeded with `seed`.
inline std::uint64_t building_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL + 1));
}

inline double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) {
    rng.discard(1);
    return lo;
  }
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
inline double uniform(Rng& rng, const Interval<double>& iv) { return uniform(rng, iv.lo, iv.hi); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline bool bernoulli(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

/// Magnitude from `iv`, sign chosen uniformly.
inline double signed_uniform(Rng& rng, const Interval<double>& iv) {
  const double mag = uniform(rng, iv);
  return bernoulli(rng, 0.5) ? mag : -mag;
}

struct ObservedPlane {
  NodeId id = 0;
  NodeId gt_id = 0;
  Plane2D plane;
};

struct RoomTransform {
  NodeId room = 0;
  Vec2 translation{0.0, 0.0};
  double rotation_rad = 0.0;
};

struct NoiseMeta {
  double global_rotation_rad = 0.0;
  std::vector<RoomTransform> room_transforms;
  std::map<NodeId, double> plane_rotation_rad;
  std::size_t dropped_planes = 0;
  double voxel_size_m = 0.0;
  int voxels_x = 0;
  int voxels_y = 0;
  double wall_thickness_m = 0.0;
};

/// One synthetic building. Ground-truth plane nodes carry the noise-free-per-plane geometry;
/// `observed` holds what a robot would see.
struct BuildingSample {
  std::string id;
  std::uint64_t rng_seed = 0;
  SceneGraph ground_truth;
  std::vector<ObservedPlane> observed;
  /// Physical room each ground-truth plane bounds (kept even if the room concept is dropped).
  std::map<NodeId, NodeId> plane_room;
  std::map<NodeId, std::vector<Vec2>> room_polygons;
  std::map<NodeId, double> wall_thickness;
  NoiseMeta noise_meta;

  /// Ground-truth concept ids of a kind.
  std::vector<NodeId> concepts(NodeKind kind) const { return ground_truth.ids_of(kind); }
  std::vector<Plane2D> observed_planes() const {
    std::vector<Plane2D> out;
    out.reserve(observed.size());
    for (const auto& o : observed) out.push_back(o.plane);
    return out;
  }
};

namespace detail {

struct IRect {
  int x0, y0, x1, y1;
};

/// A side of `len` voxels can be tiled by rooms of [lo, hi] voxels.
inline bool side_feasible(int len, int lo, int hi) {
  for (int m = 1; m * lo <= len; ++m) {
    if (len <= m * hi) return true;
  }
  return false;
}

inline void guillotine(const IRect& r, const GeneratorConfig& cfg, Rng& rng, std::vector<IRect>& out) {
  const int lo = cfg.voxels_per_room_range.lo;
  const int hi = cfg.voxels_per_room_range.hi;
  const int w = r.x1 - r.x0;
  const int h = r.y1 - r.y0;
  auto cuts = [&](int len) {
    std::vector<int> c;
    for (int p = lo; p <= len - lo; ++p) {
      if (side_feasible(p, lo, hi) && side_feasible(len - p, lo, hi)) c.push_back(p);
    }
    return c;
  };
  const auto cx = cuts(w);
  const auto cy = cuts(h);
  int axis = -1;
  if (w > hi && !cx.empty()) {
    axis = 0;
  } else if (h > hi && !cy.empty()) {
    axis = 1;
  } else if ((!cx.empty() || !cy.empty()) && bernoulli(rng, cfg.room_split_prob)) {
    if (cx.empty()) {
      axis = 1;
    } else if (cy.empty()) {
      axis = 0;
    } else {
      axis = bernoulli(rng, static_cast<double>(w) / (w + h)) ? 0 : 1;
    }
  }
  if (axis < 0) {
    out.push_back(r);
    return;
  }
  const auto& c = axis == 0 ? cx : cy;
  const int p = c[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(c.size()) - 1))];
  if (axis == 0) {
    guillotine({r.x0, r.y0, r.x0 + p, r.y1}, cfg, rng, out);
    guillotine({r.x0 + p, r.y0, r.x1, r.y1}, cfg, rng, out);
  } else {
    guillotine({r.x0, r.y0, r.x1, r.y0 + p}, cfg, rng, out);
    guillotine({r.x0, r.y0 + p, r.x1, r.y1}, cfg, rng, out);
  }
}

using IPoint = std::array<int, 2>;

/// Counter-clockwise integer polygon of a rectangle, optionally with one corner quadrant removed.
inline std::vector<IPoint> room_outline(const IRect& r, int removed_corner, int qw, int qh) {
  const int x0 = r.x0, y0 = r.y0, x1 = r.x1, y1 = r.y1;
  switch (removed_corner) {
    case 0:  // bottom-left
      return {{x0 + qw, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0 + qh}, {x0 + qw, y0 + qh}};
    case 1:  // bottom-right
      return {{x0, y0}, {x1 - qw, y0}, {x1 - qw, y0 + qh}, {x1, y0 + qh}, {x1, y1}, {x0, y1}};
    case 2:  // top-right
      return {{x0, y0}, {x1, y0}, {x1, y1 - qh}, {x1 - qw, y1 - qh}, {x1 - qw, y1}, {x0, y1}};
    case 3:  // top-left
      return {{x0, y0}, {x1, y0}, {x1, y1}, {x0 + qw, y1}, {x0 + qw, y1 - qh}, {x0, y1 - qh}};
    default:
      return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  }
}

/// Inward offset of a counter-clockwise rectilinear polygon.
inline std::vector<Vec2> shrink_outline(const std::vector<IPoint>& poly, double scale, double inset) {
  const std::size_t n = poly.size();
  std::vector<Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const IPoint& prev = poly[(i + n - 1) % n];
    const IPoint& cur = poly[i];
    const IPoint& next = poly[(i + 1) % n];
    // Inward normal of a CCW edge is its direction rotated by +90 degrees.
    auto inward = [](const IPoint& a, const IPoint& b) {
      const Vec2 d(static_cast<double>(b[0] - a[0]), static_cast<double>(b[1] - a[1]));
      return Vec2(-d.y(), d.x()).normalized();
    };
    const Vec2 n_in = inward(prev, cur);
    const Vec2 n_out = inward(cur, next);
    const Vec2 c(cur[0] * scale, cur[1] * scale);
    // Edges are axis-aligned and perpendicular, so the offsets add component-wise.
    out[i] = c + inset * (n_in + n_out);
  }
  return out;
}

}  // namespace detail

/// Area centroid of each room polygon, midpoint of the two plane centroids of each wall.
inline std::map<NodeId, Origin2D> ground_truth_origins(const BuildingSample& sample) {
  std::map<NodeId, Origin2D> out;
  const auto& g = sample.ground_truth;
  for (NodeId r : g.ids_of(NodeKind::room)) {
    out[r] = Origin2D{polygon_centroid(sample.room_polygons.at(r))};
  }
  for (NodeId w : g.ids_of(NodeKind::wall)) {
    const auto m = g.members_of(w);
    if (m.size() != 2) throw GraphError("wall without exactly two planes");
    out[w] = Origin2D{0.5 * (g.node(m[0]).plane->centroid + g.node(m[1]).plane->centroid)};
  }
  return out;
}

/// Noise-free layout with every plane observed.
inline BuildingSample generate_layout(const GeneratorConfig& cfg, Rng& rng) {
  cfg.validate();
  const int rlo = cfg.voxels_per_room_range.lo;
  const int rhi = cfg.voxels_per_room_range.hi;

  BuildingSample s;
  const double voxel = uniform(rng, cfg.voxel_size_m);
  const double max_size = uniform(rng, cfg.max_building_size_m);
  const int cap = static_cast<int>(std::floor(max_size / voxel + 1e-9));
  const int side_hi = std::min(cfg.voxels_xy_range.hi, cap);
  const int side_lo = std::max(cfg.voxels_xy_range.lo, rlo);
  std::vector<int> feasible;
  for (int n = side_lo; n <= side_hi; ++n) {
    if (detail::side_feasible(n, rlo, rhi)) feasible.push_back(n);
  }
  if (feasible.empty()) {
    throw ConfigError("config infeasible: voxels_per_room_range cannot tile any side in voxels_xy_range");
  }
  auto draw_side = [&] {
    return feasible[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(feasible.size()) - 1))];
  };
  const int nx = draw_side();
  const int ny = draw_side();
  const double thickness = uniform(rng, cfg.wall_thickness_m);
  s.noise_meta.voxel_size_m = voxel;
  s.noise_meta.voxels_x = nx;
  s.noise_meta.voxels_y = ny;
  s.noise_meta.wall_thickness_m = thickness;

  std::vector<detail::IRect> rects;
  detail::guillotine({0, 0, nx, ny}, cfg, rng, rects);

  std::vector<std::vector<detail::IPoint>> outlines;
  for (const auto& r : rects) {
    int corner = -1, qw = 0, qh = 0;
    if (bernoulli(rng, cfg.l_shape_prob)) {
      corner = uniform_int(rng, 0, 3);
      const int w = r.x1 - r.x0, h = r.y1 - r.y0;
      qw = std::max(1, w / 2);
      qh = std::max(1, h / 2);
    }
    outlines.push_back(detail::room_outline(r, corner, qw, qh));
  }

  // Split every outline edge where the room across it changes; facing pieces become walls.
  struct Overlap {
    int u0, u1;
  };
  struct PieceKey {
    int horizontal, line, u0, u1;
    auto operator<=>(const PieceKey&) const = default;
  };
  const double half_t = 0.5 * thickness;
  const NodeId n_rooms = static_cast<NodeId>(outlines.size());
  std::vector<std::pair<NodeId, Plane2D>> planes;  // (physical room, plane)
  std::map<PieceKey, std::vector<NodeId>> shared_pieces;

  for (std::size_t i = 0; i < outlines.size(); ++i) {
    const auto& poly = outlines[i];
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const auto a = poly[k];
      const auto b = poly[(k + 1) % poly.size()];
      const bool horizontal = a[1] == b[1];
      const int line = horizontal ? a[1] : a[0];
      const int ua = horizontal ? a[0] : a[1];
      const int ub = horizontal ? b[0] : b[1];
      const int dir = ub > ua ? 1 : -1;
      const int lo = std::min(ua, ub), hi = std::max(ua, ub);

      std::vector<Overlap> overlaps;
      for (std::size_t j = 0; j < outlines.size(); ++j) {
        if (j == i) continue;
        const auto& other = outlines[j];
        for (std::size_t l = 0; l < other.size(); ++l) {
          const auto c = other[l];
          const auto d = other[(l + 1) % other.size()];
          if ((c[1] == d[1]) != horizontal) continue;
          if ((horizontal ? c[1] : c[0]) != line) continue;
          const int uc = horizontal ? c[0] : c[1];
          const int ud = horizontal ? d[0] : d[1];
          if ((ud > uc ? 1 : -1) == dir) continue;  // facing edges run in opposite directions
          const int o0 = std::max(lo, std::min(uc, ud));
          const int o1 = std::min(hi, std::max(uc, ud));
          if (o1 > o0) overlaps.push_back({o0, o1});
        }
      }
      std::set<int> cuts{lo, hi};
      for (const auto& o : overlaps) {
        cuts.insert(o.u0);
        cuts.insert(o.u1);
      }
      std::vector<int> cv(cuts.begin(), cuts.end());
      if (dir < 0) std::reverse(cv.begin(), cv.end());
      for (std::size_t q = 0; q + 1 < cv.size(); ++q) {
        const int p0 = std::min(cv[q], cv[q + 1]);
        const int p1 = std::max(cv[q], cv[q + 1]);
        const bool shared = std::any_of(overlaps.begin(), overlaps.end(),
                                        [&](const Overlap& o) { return o.u0 <= p0 && p1 <= o.u1; });
        const double len = (p1 - p0) * voxel - thickness;
        if (len < cfg.min_plane_length_m) continue;
        const double lm = line * voxel;
        Vec2 e0 = horizontal ? Vec2(p0 * voxel + half_t, lm) : Vec2(lm, p0 * voxel + half_t);
        Vec2 e1 = horizontal ? Vec2(p1 * voxel - half_t, lm) : Vec2(lm, p1 * voxel - half_t);
        const Vec2 along = (e1 - e0).normalized() * static_cast<double>(dir);
        const Vec2 inward(-along.y(), along.x());
        e0 += half_t * inward;
        e1 += half_t * inward;
        if (dir < 0) std::swap(e0, e1);
        const Vec2 mid = 0.5 * (e0 + e1);
        const NodeId pid = static_cast<NodeId>(planes.size());
        planes.emplace_back(static_cast<NodeId>(i), plane_from_segment(e0, e1, mid + inward));
        if (shared) shared_pieces[PieceKey{horizontal ? 1 : 0, line, p0, p1}].push_back(pid);
      }
    }
  }

  const NodeId n_planes = static_cast<NodeId>(planes.size());
  auto& g = s.ground_truth;
  for (NodeId p = 0; p < n_planes; ++p) {
    g.add_plane(p, planes[static_cast<std::size_t>(p)].second);
    s.plane_room[p] = n_planes + planes[static_cast<std::size_t>(p)].first;
  }
  for (NodeId r = 0; r < n_rooms; ++r) {
    const NodeId rid = n_planes + r;
    std::vector<NodeId> members;
    for (NodeId p = 0; p < n_planes; ++p) {
      if (planes[static_cast<std::size_t>(p)].first == r) members.push_back(p);
    }
    auto poly = detail::shrink_outline(outlines[static_cast<std::size_t>(r)], voxel, half_t);
    s.room_polygons[rid] = poly;
    if (members.size() < 2) continue;
    g.add_concept(rid, NodeKind::room, Origin2D{polygon_centroid(poly)});
    for (NodeId p : members) g.add_edge(rid, p, EdgeKind::membership);
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) g.add_edge(members[a], members[b], EdgeKind::same_room);
    }
  }
  NodeId next = n_planes + n_rooms;
  for (const auto& [key, ids] : shared_pieces) {
    if (ids.size() != 2) continue;
    const NodeId wid = next++;
    const Vec2 mid = 0.5 * (g.node(ids[0]).plane->centroid + g.node(ids[1]).plane->centroid);
    g.add_concept(wid, NodeKind::wall, Origin2D{mid});
    g.add_edge(wid, ids[0], EdgeKind::membership);
    g.add_edge(wid, ids[1], EdgeKind::membership);
    g.add_edge(ids[0], ids[1], EdgeKind::same_wall);
    s.wall_thickness[wid] = thickness;
  }

  for (NodeId p = 0; p < n_planes; ++p) s.observed.push_back({p, p, *g.node(p).plane});
  return s;
}

/// Removes each observed plane with probability cfg.plane_dropout and prunes the ground truth:
/// dropped planes disappear, concepts left with fewer than two planes are removed.
inline BuildingSample apply_dropout(const BuildingSample& sample, const GeneratorConfig& cfg, Rng& rng) {
  BuildingSample out = sample;
  std::set<NodeId> kept_gt;
  out.observed.clear();
  for (const auto& o : sample.observed) {
    if (bernoulli(rng, cfg.plane_dropout)) {
      ++out.noise_meta.dropped_planes;
      continue;
    }
    out.observed.push_back(o);
    kept_gt.insert(o.gt_id);
  }
  if (out.observed.size() == sample.observed.size()) return out;

  const SceneGraph& g = sample.ground_truth;
  SceneGraph ng;
  for (const auto& [id, n] : g.nodes()) {
    if (n.kind == NodeKind::plane && kept_gt.count(id)) ng.add_plane(id, *n.plane);
  }
  for (const auto& [id, n] : g.nodes()) {
    if (n.kind == NodeKind::plane) continue;
    std::vector<NodeId> members;
    for (NodeId m : g.members_of(id)) {
      if (kept_gt.count(m)) members.push_back(m);
    }
    if (members.size() < 2) continue;
    ng.add_concept(id, n.kind, *n.origin);
    for (NodeId m : members) ng.add_edge(id, m, EdgeKind::membership);
  }
  for (const auto& e : g.edges()) {
    if (e.kind == EdgeKind::membership) continue;
    if (ng.has_node(e.src) && ng.has_node(e.dst)) ng.add_edge(e.src, e.dst, e.kind, e.attr, e.score);
  }
  out.ground_truth = std::move(ng);
  for (auto it = out.wall_thickness.begin(); it != out.wall_thickness.end();) {
    it = out.ground_truth.has_node(it->first) ? std::next(it) : out.wall_thickness.erase(it);
  }
  for (auto it = out.plane_room.begin(); it != out.plane_room.end();) {
    it = out.ground_truth.has_node(it->first) ? std::next(it) : out.plane_room.erase(it);
  }
  return out;
}

/// Room-rigid perturbation, per-plane rotation about the plane centroid, then a global rotation
/// about the world origin. Ground truth follows the rigid parts only.
inline BuildingSample apply_noise(const BuildingSample& sample, const GeneratorConfig& cfg, Rng& rng) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  BuildingSample out = sample;
  SceneGraph& g = out.ground_truth;

  auto move_plane = [](const Plane2D& p, const Vec2& pivot, double angle, const Vec2& t) {
    Plane2D q = rotate_plane(p, pivot, angle);
    return (t.x() == 0.0 && t.y() == 0.0) ? q : translate_plane(q, t);
  };
  auto move_point = [](const Vec2& x, const Vec2& pivot, double angle, const Vec2& t) -> Vec2 {
    return angle == 0.0 ? Vec2(x + t) : Vec2(pivot + rotate(x - pivot, angle) + t);
  };

  // (1) rooms, rigidly about their own origin.
  std::map<NodeId, RoomTransform> room_tf;
  for (const auto& [rid, poly] : sample.room_polygons) {
    RoomTransform tf;
    tf.room = rid;
    const double mag = uniform(rng, cfg.noise_room_trans_m);
    const double dir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    tf.translation = mag == 0.0 ? Vec2(0.0, 0.0) : Vec2(mag * std::cos(dir), mag * std::sin(dir));
    tf.rotation_rad = signed_uniform(rng, cfg.noise_room_rot_deg) * kDeg;
    room_tf[rid] = tf;
    out.noise_meta.room_transforms.push_back(tf);
  }
  std::map<NodeId, Vec2> pivots;
  for (const auto& [rid, poly] : sample.room_polygons) pivots[rid] = polygon_centroid(poly);

  for (auto& [rid, poly] : out.room_polygons) {
    const auto& tf = room_tf[rid];
    for (auto& v : poly) v = move_point(v, pivots[rid], tf.rotation_rad, tf.translation);
    if (g.has_node(rid)) {
      g.set_origin(rid, Origin2D{move_point(g.node(rid).origin->xy, pivots[rid], tf.rotation_rad, tf.translation)});
    }
  }
  for (NodeId p : g.plane_ids()) {
    const NodeId rid = sample.plane_room.at(p);
    const auto& tf = room_tf[rid];
    g.set_plane(p, move_plane(*g.node(p).plane, pivots[rid], tf.rotation_rad, tf.translation));
  }
  for (auto& o : out.observed) {
    const NodeId rid = sample.plane_room.at(o.gt_id);
    const auto& tf = room_tf[rid];
    o.plane = move_plane(o.plane, pivots[rid], tf.rotation_rad, tf.translation);
  }

  // (2) individual planes about their centroids; observations only.
  for (auto& o : out.observed) {
    const double a = signed_uniform(rng, cfg.noise_plane_rot_deg) * kDeg;
    out.noise_meta.plane_rotation_rad[o.id] = a;
    o.plane = rotate_plane(o.plane, o.plane.centroid, a);
  }

  // (3) whole building about the world origin.
  const double ga = uniform(rng, cfg.noise_global_rot_deg) * kDeg;
  out.noise_meta.global_rotation_rad = ga;
  const Vec2 zero(0.0, 0.0);
  for (auto& [rid, poly] : out.room_polygons) {
    for (auto& v : poly) v = move_point(v, zero, ga, zero);
  }
  for (auto& o : out.observed) o.plane = rotate_plane(o.plane, zero, ga);
  for (NodeId p : g.plane_ids()) g.set_plane(p, rotate_plane(*g.node(p).plane, zero, ga));
  for (NodeId r : g.ids_of(NodeKind::room)) g.set_origin(r, Origin2D{move_point(g.node(r).origin->xy, zero, ga, zero)});

  // Wall origins stay the midpoint of their (now moved) planes.
  for (NodeId w : g.ids_of(NodeKind::wall)) {
    const auto m = g.members_of(w);
    const Vec2 mid = 0.5 * (g.node(m[0]).plane->centroid + g.node(m[1]).plane->centroid);
    g.set_origin(w, Origin2D{mid});
  }
  return out;
}

/// layout -> dropout -> noise, all drawn from one stream seeded with `seed`.
inline BuildingSample generate_building(const GeneratorConfig& cfg, std::uint64_t seed, std::string id = {}) {
  Rng rng(seed);
  BuildingSample s = generate_layout(cfg, rng);
  s = apply_dropout(s, cfg, rng);
  s = apply_noise(s, cfg, rng);
  s.rng_seed = seed;
  s.id = id.empty() ? "b" + std::to_string(seed) : std::move(id);
  return s;
}

/// Building i uses the stream building_seed(cfg.seed, first_index + i).
inline std::vector<BuildingSample> generate_dataset(const GeneratorConfig& cfg, int count, std::uint64_t first_index = 0) {
  std::vector<BuildingSample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t idx = first_index + static_cast<std::uint64_t>(i);
    out.push_back(generate_building(cfg, building_seed(cfg.seed, idx), "building_" + std::to_string(idx)));
  }
  return out;
}

}  // namespace scenefactor
