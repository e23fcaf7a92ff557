#include "scenefactor/scene_graph.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace scenefactor;

namespace {

Plane2D seg(Vec2 a, Vec2 b, Vec2 in) { return plane_from_segment(a, b, in); }

std::vector<Plane2D> box_planes() {
  const Vec2 c(2, 1.5);
  return {seg({0, 0}, {4, 0}, c), seg({4, 0}, {4, 3}, c), seg({4, 3}, {0, 3}, c), seg({0, 3}, {0, 0}, c)};
}

}  // namespace

TEST(SceneGraph, EdgeTypingRules) {
  SceneGraph g;
  g.add_plane(0, box_planes()[0]);
  g.add_plane(1, box_planes()[1]);
  g.add_concept(10, NodeKind::room, Origin2D{{2, 1.5}});
  g.add_concept(11, NodeKind::wall, Origin2D{{0, 0}});

  EXPECT_THROW(g.add_edge(0, 10, EdgeKind::same_room), GraphError);
  EXPECT_THROW(g.add_edge(10, 11, EdgeKind::membership), GraphError);
  EXPECT_THROW(g.add_edge(0, 1, EdgeKind::membership), GraphError);
  EXPECT_THROW(g.add_edge(0, 0, EdgeKind::proximity), GraphError);
  EXPECT_THROW(g.add_edge(0, 99, EdgeKind::proximity), GraphError);
  EXPECT_THROW(g.add_concept(12, NodeKind::plane, Origin2D{}), GraphError);
  EXPECT_THROW(g.add_plane(0, box_planes()[2]), GraphError);

  // Plane-plane edges are stored low -> high, memberships concept -> plane.
  g.add_edge(1, 0, EdgeKind::same_room);
  EXPECT_EQ(g.edges().back().src, 0);
  EXPECT_EQ(g.edges().back().dst, 1);
  g.add_edge(1, 10, EdgeKind::membership);
  EXPECT_EQ(g.edges().back().src, 10);
  EXPECT_EQ(g.edges().back().dst, 1);
  EXPECT_THROW(g.add_edge(0, 1, EdgeKind::same_room), GraphError);
  EXPECT_NO_THROW(g.add_edge(0, 1, EdgeKind::proximity));
  EXPECT_TRUE(g.has_edge(1, 0, EdgeKind::same_room));
  EXPECT_EQ(g.members_of(10), std::vector<NodeId>{1});
  EXPECT_EQ(g.num_edges(EdgeKind::same_room), 1u);
  EXPECT_EQ(g.next_free_id(), 12);
}

TEST(SceneGraph, OriginAndPlaneSettersCheckKinds) {
  SceneGraph g;
  g.add_plane(0, box_planes()[0]);
  g.add_concept(1, NodeKind::room, Origin2D{});
  EXPECT_THROW(g.set_origin(0, Origin2D{}), GraphError);
  EXPECT_THROW(g.set_plane(1, box_planes()[0]), GraphError);
  g.set_origin(1, Origin2D{{3, 4}});
  EXPECT_EQ(g.node(1).origin->xy, Vec2(3, 4));
}

TEST(ProximityGraph, FourPlaneBoxIsComplete) {
  const auto g = build_proximity_graph(box_planes(), 10);
  EXPECT_EQ(g.num_edges(EdgeKind::proximity), 6u);
  for (const auto& e : g.edges()) {
    ASSERT_TRUE(e.attr.has_value());
    EXPECT_LT(e.src, e.dst);
  }
}

TEST(ProximityGraph, KOneIsSymmetrized) {
  // Three collinear points 0 - 1 ---- 2: 2's nearest is 1, so edge (1,2) exists although 1 picks 0.
  std::vector<Plane2D> ps;
  for (double x : {0.0, 1.0, 5.0}) ps.push_back(seg({x, 0}, {x + 0.5, 0}, {x, 1}));
  const auto g = build_proximity_graph(ps, 1);
  EXPECT_TRUE(g.has_edge(0, 1, EdgeKind::proximity));
  EXPECT_TRUE(g.has_edge(1, 2, EdgeKind::proximity));
  EXPECT_FALSE(g.has_edge(0, 2, EdgeKind::proximity));
}

TEST(ProximityGraph, Errors) {
  EXPECT_THROW(build_proximity_graph({box_planes()[0]}, 3), GraphError);
  EXPECT_THROW(build_proximity_graph(box_planes(), 0), GraphError);
}

TEST(ProximityGraph, EveryNodeHasAtLeastKNeighbours) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<Plane2D> ps;
  for (int i = 0; i < 40; ++i) {
    const Vec2 a(u(rng), u(rng));
    ps.push_back(seg(a, a + Vec2(1, 0.3), a + Vec2(0, 1)));
  }
  const auto g = build_proximity_graph(ps, 10);
  std::vector<int> deg(ps.size(), 0);
  for (const auto& e : g.edges()) {
    ++deg[static_cast<std::size_t>(e.src)];
    ++deg[static_cast<std::size_t>(e.dst)];
  }
  for (int d : deg) EXPECT_GE(d, 10);
}

TEST(EdgeAttr, BoxCornerCues) {
  const auto b = box_planes();
  const EdgeAttr a = compute_edge_attr(b[0], b[1]);
  EXPECT_NEAR(a.centroid_dist, std::hypot(2.0, 1.5), 1e-12);
  EXPECT_NEAR(a.min_endpoint_dist, 0.0, 1e-12);
  EXPECT_NEAR(a.normal_dot, 0.0, 1e-12);
  EXPECT_NEAR(a.relative_angle, std::acos(0.0), 1e-12);
  // Facing planes: antiparallel normals, separation along the normal is the box height.
  const EdgeAttr f = compute_edge_attr(b[0], b[2]);
  EXPECT_NEAR(f.normal_dot, -1.0, 1e-12);
  EXPECT_NEAR(std::abs(f.centroid_offset_along_normal), 3.0, 1e-12);
}

TEST(LocalFrame, SinglePlaneFrameIsItsCentroid) {
  const auto p = box_planes()[1];
  EXPECT_EQ(local_frame_origin({p.centroid}), p.centroid);
  const NodeFeature f = local_feature(p, p.centroid);
  EXPECT_EQ(f.centroid_local, Vec2(0, 0));
  EXPECT_EQ(f.offset_residual, 0.0);
}

TEST(LocalFrame, OrderIndependentAndSnapped) {
  std::vector<Vec2> cs{{0.1, 0.7}, {3.3, -2.2}, {1.0 / 3.0, 5.0}};
  const Vec2 a = local_frame_origin(cs);
  std::swap(cs[0], cs[2]);
  EXPECT_EQ(local_frame_origin(cs), a);
  EXPECT_EQ(a.x() / kFrameQuantum, std::round(a.x() / kFrameQuantum));
}

TEST(LocalFrame, FeaturesBitwiseInvariantUnderGridTranslation) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20, 20);
  auto q = [](double x) { return std::round(x * 1024.0) / 1024.0; };
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Plane2D> ps;
    for (int i = 0; i < 8; ++i) {
      const Vec2 a(q(u(rng)), q(u(rng)));
      ps.push_back(seg(a, a + Vec2(q(u(rng) * 0.1 + 2.5), q(u(rng) * 0.1)), a + Vec2(-0.3, 1)));
    }
    const Vec2 t(q(u(rng)) * 4, q(u(rng)) * 4);
    std::vector<Plane2D> moved;
    for (const auto& p : ps) moved.push_back(translate_plane(p, t));
    const auto f0 = localize_features(build_proximity_graph(ps, 4));
    const auto f1 = localize_features(build_proximity_graph(moved, 4));
    EXPECT_EQ(f0, f1);
  }
}
