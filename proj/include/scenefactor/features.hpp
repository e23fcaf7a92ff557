// Network input layouts shared by the edge classifier and the origin regressors.
#pragma once

#include "scenefactor/geometry.hpp"
#include "scenefactor/nn/tape.hpp"
#include "scenefactor/scene_graph.hpp"

#include <algorithm>
#include <array>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenefactor {

inline constexpr const char* kNodeLayout = "normal_x,normal_y,offset_residual,centroid_local_x,centroid_local_y,length";
inline constexpr const char* kEdgeLayout =
    "centroid_dist,min_endpoint_dist,normal_dot,relative_angle,offset_along_normal_min,offset_along_normal_max";
inline constexpr int kNodeDim = 6;
inline constexpr int kEdgeDim = 6;

class FeatureLayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Describes what a model expects; checked against the featurizer before inference.
struct FeatureConfig {
  std::string node_layout = kNodeLayout;
  std::string edge_layout = kEdgeLayout;
  int node_dim = kNodeDim;
  int edge_dim = kEdgeDim;
  /// Multiplies every metric feature (and divides regressed offsets).
  double meters_scale = 0.25;

  bool operator==(const FeatureConfig&) const = default;

  void check_compatible(bool uses_edges) const {
    if (node_layout != kNodeLayout || node_dim != kNodeDim) {
      throw FeatureLayoutError("feature layout mismatch: model expects node layout '" + node_layout + "'");
    }
    if (uses_edges && (edge_layout != kEdgeLayout || edge_dim != kEdgeDim)) {
      throw FeatureLayoutError("feature layout mismatch: model expects edge layout '" + edge_layout + "'");
    }
    if (!(meters_scale > 0.0)) throw FeatureLayoutError("feature config: meters_scale must be positive");
  }
};

using FeatureRow = std::array<double, kNodeDim>;

inline FeatureRow node_row(const NodeFeature& f, double s) {
  return {f.normal.x(), f.normal.y(), s * f.offset_residual, s * f.centroid_local.x(), s * f.centroid_local.y(),
          s * f.length};
}

/// Row permutation that sorts feature rows lexicographically (ties keep input order).
inline std::vector<int> canonical_order(const std::vector<FeatureRow>& rows) {
  std::vector<int> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rows[static_cast<std::size_t>(a)] < rows[static_cast<std::size_t>(b)]; });
  return order;
}

/// Endpoint-symmetric pair features. The pair is put in canonical geometric order first so
/// the floating-point evaluation does not depend on node labels.
inline std::array<double, kEdgeDim> edge_row(const Plane2D& a, const FeatureRow& ka, const Plane2D& b,
                                             const FeatureRow& kb, double s) {
  const bool swap = kb < ka;
  const Plane2D& p = swap ? b : a;
  const Plane2D& q = swap ? a : b;
  const EdgeAttr pq = compute_edge_attr(p, q);
  const double o_qp = p.normal.dot(q.centroid - p.centroid);
  const double o_pq = pq.centroid_offset_along_normal;
  return {s * pq.centroid_dist,        s * pq.min_endpoint_dist,   pq.normal_dot,
          pq.relative_angle / std::numbers::pi, s * std::min(o_pq, o_qp), s * std::max(o_pq, o_qp)};
}

inline nn::Matrix rows_to_matrix(const std::vector<FeatureRow>& rows) {
  nn::Matrix m(static_cast<Eigen::Index>(rows.size()), kNodeDim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < kNodeDim; ++c) m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace scenefactor
