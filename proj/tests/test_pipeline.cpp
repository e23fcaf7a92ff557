#include "scenefactor/pipeline.hpp"
#include "scenefactor/render.hpp"
#include "scenefactor/synth.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

using namespace scenefactor;

namespace {

struct Trained {
  GGnnModel edges;
  FGnnModel room;
  FGnnModel wall;
  PipelineModels models() const { return {&edges, &room, &wall}; }
};

// Small models trained once for the whole file.
const Trained& trained() {
  static const Trained t = [] {
    GeneratorConfig gc;
    gc.seed = 21;
    gc.noise_global_rot_deg = {0, 0};
    gc.noise_plane_rot_deg = {0, 1};
    gc.noise_room_trans_m = {0, 0.02};
    gc.noise_room_rot_deg = {0, 0.5};
    const auto data = generate_dataset(gc, 40);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.hidden = 32;
    cfg.seed = 21;
    cfg.patience = 0;
    Trained out{train_edge_classifier(data, cfg).model,
                train_origin_regressor(origin_training_set(data, NodeKind::room), NodeKind::room, cfg).model,
                train_origin_regressor(origin_training_set(data, NodeKind::wall), NodeKind::wall, cfg).model};
    return out;
  }();
  return t;
}

// Untrained models: enough for shape and determinism checks. Their random same_room edges make
// cycle enumeration slow, so timing uses the trained set.
const Trained& untrained() {
  static const Trained t = [] {
    std::mt19937_64 rng(5);
    return Trained{GGnnModel::init(64, FeatureConfig{}, rng), FGnnModel::init(NodeKind::room, 64, FeatureConfig{}, rng),
                   FGnnModel::init(NodeKind::wall, 64, FeatureConfig{}, rng)};
  }();
  return t;
}

std::vector<Plane2D> rectangle_room(double w, double h) {
  const Vec2 c(w / 2, h / 2);
  return {plane_from_segment({0, 0}, {w, 0}, c), plane_from_segment({w, 0}, {w, h}, c),
          plane_from_segment({w, h}, {0, h}, c), plane_from_segment({0, h}, {0, 0}, c)};
}

std::size_t count(const std::string& s, const std::string& what) {
  std::size_t n = 0;
  for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
  return n;
}

SceneGraph golden_scene() {
  SceneGraph g;
  const auto room = rectangle_room(4.0, 3.0);
  for (std::size_t i = 0; i < room.size(); ++i) g.add_plane(static_cast<NodeId>(i), room[i]);
  g.add_plane(4, plane_from_segment({4.1, 0}, {4.1, 3}, {5, 1.5}));
  g.add_plane(5, plane_from_segment({6.5, -1}, {6.5, 2.25}, {5, 1}));
  g.add_concept(10, NodeKind::room, Origin2D{{2.0, 1.5}});
  for (NodeId m = 0; m < 4; ++m) g.add_edge(10, m, EdgeKind::membership);
  g.add_concept(11, NodeKind::wall, Origin2D{{4.05, 1.5}});
  g.add_edge(11, 1, EdgeKind::membership);
  g.add_edge(11, 4, EdgeKind::membership);
  g.add_edge(0, 2, EdgeKind::same_room, std::nullopt, 0.9);
  g.add_edge(1, 3, EdgeKind::same_room, std::nullopt, 0.8);
  g.add_edge(1, 4, EdgeKind::same_wall, std::nullopt, 0.95);
  return g;
}

}  // namespace

TEST(Render, EmptySceneIsValidSvg) {
  const std::string svg = render_svg(SceneGraph{});
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_EQ(count(svg, "<svg "), 1u);
  EXPECT_EQ(svg.substr(svg.size() - 7), "</svg>\n");
  EXPECT_EQ(count(svg, "<line"), 0u);
  EXPECT_EQ(count(svg, "<circle"), 0u);
}

TEST(Render, OnePlaneIsOneLine) {
  SceneGraph g;
  g.add_plane(0, plane_from_segment({0, 0}, {2, 0}, {1, 1}));
  const std::string svg = render_svg(g);
  EXPECT_EQ(count(svg, "<line"), 1u);
  // 2 m at 20 px/m plus a 20 px margin on each side.
  EXPECT_NE(svg.find("x1=\"20.000\" y1=\"20.000\" x2=\"60.000\" y2=\"20.000\""), std::string::npos) << svg;
}

TEST(Render, MatchesGoldenFile) {
  const std::string svg = render_svg(golden_scene());
  const std::string path = std::string(SCENEFACTOR_TEST_DATA) + "/golden_scene.svg";
  if (std::getenv("SCENEFACTOR_UPDATE_GOLDEN")) std::ofstream(path, std::ios::binary) << svg;
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << "missing " << path;
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(svg, ss.str());
}

TEST(Render, ByteDeterministic) {
  EXPECT_EQ(render_svg(golden_scene()), render_svg(golden_scene()));
  RenderLayers all;
  all.proximity_edges = all.memberships = true;
  const std::string svg = render_svg(golden_scene(), all);
  EXPECT_EQ(count(svg, "class=\"membership\""), 6u);
  EXPECT_EQ(count(svg, "class=\"same_room\""), 2u);
  EXPECT_EQ(count(svg, "class=\"same_wall\""), 1u);
  EXPECT_EQ(count(svg, "<circle"), 2u);
}

TEST(Pipeline, MissingModelsRejected) {
  EXPECT_THROW(run_pipeline(rectangle_room(3, 3), PipelineModels{}), std::invalid_argument);
}

TEST(Pipeline, EmptyInputGivesEmptyOutput) {
  const auto r = run_pipeline({}, untrained().models());
  EXPECT_TRUE(r.edges.empty());
  EXPECT_TRUE(r.rooms.empty());
  EXPECT_TRUE(r.walls.empty());
  EXPECT_TRUE(r.problem.variables.empty());
  const json j = pipeline_json(r, "empty");
  EXPECT_TRUE(j.at("planes").empty());
  EXPECT_TRUE(j.at("edges").empty());
}

TEST(Pipeline, SinglePlaneHasNoConcepts) {
  const auto r = run_pipeline({plane_from_segment({0, 0}, {2, 0}, {1, 1})}, untrained().models());
  EXPECT_TRUE(r.edges.empty());
  EXPECT_EQ(r.problem.variables.size(), 1u);
  EXPECT_EQ(r.problem.factors.size(), 1u);
}

TEST(Pipeline, FiftyPlaneBuildingUnderOneSecond) {
  std::vector<Plane2D> planes;
  for (std::uint64_t seed = 0; planes.size() < 50; ++seed) {
    const auto s = generate_building(GeneratorConfig{}, seed);
    if (s.observed.size() >= 50) planes = s.observed_planes();
  }
  planes.resize(50);
  run_pipeline(planes, trained().models());  // warm-up
  std::vector<double> times;
  for (int i = 0; i < 5; ++i) times.push_back(run_pipeline(planes, trained().models()).timings.total_s);
  std::sort(times.begin(), times.end());
  EXPECT_LT(times[2], 1.0);
}

TEST(Pipeline, Deterministic) {
  const auto s = generate_building(GeneratorConfig{}, 3);
  for (const Trained* m : {&untrained(), &trained()}) {
    const auto a = pipeline_json(run_pipeline(s.observed_planes(), m->models()), "x").dump();
    const auto b = pipeline_json(run_pipeline(s.observed_planes(), m->models()), "x").dump();
    EXPECT_EQ(a, b);
    PipelineConfig threaded;
    threaded.threads = 2;
    EXPECT_EQ(pipeline_json(run_pipeline(s.observed_planes(), m->models(), threaded), "x").dump(), a);
  }
}

TEST(Pipeline, ProblemIsWellFormed) {
  const auto s = generate_building(GeneratorConfig{}, 4);
  const auto r = run_pipeline(s.observed_planes(), trained().models());
  EXPECT_NO_THROW(r.problem.validate());
  EXPECT_EQ(r.room_ids.size(), r.rooms.size());
  EXPECT_EQ(r.wall_ids.size(), r.walls.size());
  for (std::size_t i = 0; i < r.walls.size(); ++i) EXPECT_EQ(r.walls[i].members.size(), 2u);
  // Every plane belongs to at most one room.
  std::map<NodeId, int> seen;
  for (const auto& c : r.rooms) {
    for (NodeId m : c.members) EXPECT_EQ(++seen[m], 1);
  }
}

TEST(Pipeline, NoiselessSingleRoomFound) {
  const auto planes = rectangle_room(4.0, 3.0);
  const auto r = run_pipeline(planes, trained().models());
  ASSERT_EQ(r.rooms.size(), 1u);
  EXPECT_EQ(r.rooms[0].members, (std::set<NodeId>{0, 1, 2, 3}));
  EXPECT_TRUE(r.walls.empty());
  const Vec2 o = r.problem.variables.at(r.room_ids[0]).origin;
  EXPECT_LT((o - Vec2(2.0, 1.5)).norm(), 0.5) << o.transpose();
}
