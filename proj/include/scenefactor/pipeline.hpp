// Observed planes to a semantic scene graph and its factor problem.
#pragma once

#include "scenefactor/clustering.hpp"
#include "scenefactor/edge_classifier.hpp"
#include "scenefactor/factor_graph.hpp"
#include "scenefactor/io.hpp"
#include "scenefactor/origin_regressor.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace scenefactor {

struct PipelineModels {
  const GGnnModel* edges = nullptr;
  const FGnnModel* room = nullptr;
  const FGnnModel* wall = nullptr;
};

struct PipelineConfig {
  int knn_k = 10;
  ClusterConfig cluster;
  int threads = 1;
};

struct StageTimings {
  double proximity_s = 0.0;
  double classify_s = 0.0;
  double cluster_s = 0.0;
  double origins_s = 0.0;
  double total_s = 0.0;
};

struct PipelineResult {
  /// Planes keep their input index as id; rooms follow, then walls.
  SceneGraph graph;
  std::vector<ClassifiedEdge> edges;
  std::vector<ClassProbs> edge_probs;
  std::vector<ConceptCluster> rooms;
  std::vector<ConceptCluster> walls;
  std::vector<NodeId> room_ids;
  std::vector<NodeId> wall_ids;
  FactorProblem problem;
  StageTimings timings;
};

inline PipelineResult run_pipeline(const std::vector<Plane2D>& planes, const PipelineModels& models,
                                   const PipelineConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
  if (!models.edges || !models.room || !models.wall) throw std::invalid_argument("run_pipeline: models not loaded");

  PipelineResult res;
  res.problem.room_model = models.room;
  res.problem.wall_model = models.wall;
  const auto t0 = clock::now();
  if (planes.empty()) return res;

  // Proximity graph and classification.
  SceneGraph prox;
  if (planes.size() >= 2) {
    prox = build_proximity_graph(planes, cfg.knn_k);
  } else {
    prox.add_plane(0, planes.front());
  }
  const auto t1 = clock::now();
  const auto preds = classify_edges(*models.edges, prox);
  for (const auto& [idx, pred] : preds) {
    const auto& e = prox.edges()[idx];
    res.edges.push_back({e.src, e.dst, pred.label, pred.probs[static_cast<std::size_t>(pred.label)]});
    res.edge_probs.push_back(pred.probs);
  }
  const auto t2 = clock::now();
  res.rooms = cluster_rooms(res.edges, cfg.cluster);
  res.walls = cluster_walls(res.edges);
  const auto t3 = clock::now();

  // Origins.
  auto members_of = [&](const ConceptCluster& c) {
    std::vector<Plane2D> ps;
    for (NodeId m : c.members) ps.push_back(planes[static_cast<std::size_t>(m)]);
    return ps;
  };
  std::vector<std::vector<Plane2D>> room_planes, wall_planes;
  for (const auto& c : res.rooms) room_planes.push_back(members_of(c));
  for (const auto& c : res.walls) wall_planes.push_back(members_of(c));
  const auto room_origins = infer_origins(*models.room, room_planes, cfg.threads);
  const auto wall_origins = infer_origins(*models.wall, wall_planes, cfg.threads);
  const auto t4 = clock::now();

  // Scene graph and factor problem.
  auto& g = res.graph;
  auto& p = res.problem;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    g.add_plane(id, planes[i]);
    Variable v;
    v.kind = VariableKind::plane;
    v.plane = plane_state(planes[i]);
    p.variables[id] = v;
    p.factors.push_back(make_prior_factor({id, v.plane.param, Eigen::Matrix2d::Identity()}));
  }
  for (const auto& e : prox.edges()) g.add_edge(e.src, e.dst, EdgeKind::proximity, e.attr);
  for (const auto& e : res.edges) {
    if (e.label == EdgeClass::same_room) g.add_edge(e.a, e.b, EdgeKind::same_room, std::nullopt, e.prob);
    if (e.label == EdgeClass::same_wall) g.add_edge(e.a, e.b, EdgeKind::same_wall, std::nullopt, e.prob);
  }
  NodeId next = static_cast<NodeId>(planes.size());
  auto add_concepts = [&](const std::vector<ConceptCluster>& cs, const std::vector<Origin2D>& origins, NodeKind kind,
                          std::vector<NodeId>& ids) {
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const NodeId id = next++;
      ids.push_back(id);
      g.add_concept(id, kind, origins[i]);
      for (NodeId m : cs[i].members) g.add_edge(id, m, EdgeKind::membership);
      Variable v;
      v.kind = VariableKind::origin;
      v.origin = origins[i].xy;
      p.variables[id] = v;
      Factor f;
      f.kind = kind == NodeKind::room ? FactorKind::room_plane : FactorKind::wall_plane;
      f.concept_var = id;
      f.plane_vars.assign(cs[i].members.begin(), cs[i].members.end());
      p.factors.push_back(std::move(f));
    }
  };
  add_concepts(res.rooms, room_origins, NodeKind::room, res.room_ids);
  add_concepts(res.walls, wall_origins, NodeKind::wall, res.wall_ids);
  const auto t5 = clock::now();

  res.timings = {secs(t0, t1), secs(t1, t2), secs(t2, t3), secs(t3, t4), secs(t0, t5)};
  return res;
}

/// Pipeline output in the scene schema extended with classified edges and priors; contains no
/// timings so identical inputs give identical bytes.
inline json pipeline_json(const PipelineResult& r, const std::string& id) {
  json j = problem_to_json(r.problem, id);
  j["edges"] = classified_edges_json(r.edges, r.edge_probs);
  for (std::size_t i = 0; i < r.rooms.size(); ++i) {
    j["rooms"][i]["support"] = round9(r.rooms[i].support);
    j["rooms"][i]["acyclic"] = r.rooms[i].acyclic;
  }
  for (std::size_t i = 0; i < r.walls.size(); ++i) j["walls"][i]["support"] = round9(r.walls[i].support);
  return j;
}

inline json timings_json(const StageTimings& t) {
  return {{"proximity_s", t.proximity_s}, {"classify_s", t.classify_s}, {"cluster_s", t.cluster_s},
          {"origins_s", t.origins_s},     {"total_s", t.total_s}};
}

}  // namespace scenefactor
