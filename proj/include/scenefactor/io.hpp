// JSON-lines scenes, checkpoints and factor problems.
#pragma once

#include "scenefactor/clustering.hpp"
#include "scenefactor/edge_classifier.hpp"
#include "scenefactor/factor_graph.hpp"
#include "scenefactor/metrics.hpp"
#include "scenefactor/origin_regressor.hpp"
#include "scenefactor/synth.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenefactor {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scene files carry 9 significant digits.
inline double round9(double x) {
  if (!std::isfinite(x) || x == 0.0) return x == 0.0 ? 0.0 : x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

inline json vec_json(const Vec2& v) { return json::array({round9(v.x()), round9(v.y())}); }

inline Vec2 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 2) throw IoError("expected a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json plane_json(const Plane2D& p) {
  return {{"normal", vec_json(p.normal)},
          {"offset", round9(p.offset)},
          {"centroid", vec_json(p.centroid)},
          {"length", round9(p.length)}};
}

inline Plane2D json_plane(const json& j) {
  Plane2D p;
  p.normal = json_vec(j.at("normal"));
  p.offset = j.at("offset").get<double>();
  p.centroid = json_vec(j.at("centroid"));
  p.length = j.at("length").get<double>();
  return p;
}

inline json polygon_json(const std::vector<Vec2>& poly) {
  json a = json::array();
  for (const auto& v : poly) a.push_back(vec_json(v));
  return a;
}

inline std::vector<Vec2> json_polygon(const json& j) {
  std::vector<Vec2> out;
  for (const auto& v : j) out.push_back(json_vec(v));
  return out;
}

// ---- building samples ---------------------------------------------------------------------

inline json sample_to_json(const BuildingSample& s) {
  const auto& g = s.ground_truth;
  json planes = json::array();
  for (std::size_t i = 0; i < s.observed.size(); ++i) {
    json p = plane_json(s.observed[i].plane);
    p["id"] = s.observed[i].id;
    p["gt_id"] = s.observed[i].gt_id;
    planes.push_back(std::move(p));
  }
  json gt_planes = json::array();
  for (NodeId id : g.plane_ids()) {
    json p = plane_json(*g.node(id).plane);
    p["id"] = id;
    if (auto it = s.plane_room.find(id); it != s.plane_room.end()) p["room"] = it->second;
    gt_planes.push_back(std::move(p));
  }
  json rooms = json::array(), unlabeled = json::array(), walls = json::array(), edges = json::array();
  for (NodeId r : g.ids_of(NodeKind::room)) {
    json jr = {{"id", r}, {"planes", g.members_of(r)}, {"origin", vec_json(g.node(r).origin->xy)}};
    if (auto it = s.room_polygons.find(r); it != s.room_polygons.end()) jr["polygon"] = polygon_json(it->second);
    rooms.push_back(std::move(jr));
  }
  for (const auto& [r, poly] : s.room_polygons) {
    if (!g.has_node(r)) unlabeled.push_back({{"id", r}, {"polygon", polygon_json(poly)}});
  }
  for (NodeId w : g.ids_of(NodeKind::wall)) {
    json jw = {{"id", w}, {"planes", g.members_of(w)}, {"origin", vec_json(g.node(w).origin->xy)}};
    if (auto it = s.wall_thickness.find(w); it != s.wall_thickness.end()) jw["thickness"] = round9(it->second);
    walls.push_back(std::move(jw));
  }
  for (const auto& e : g.edges()) {
    if (e.kind == EdgeKind::same_room || e.kind == EdgeKind::same_wall) {
      edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", to_string(e.kind)}});
    }
  }
  json rt = json::array();
  for (const auto& t : s.noise_meta.room_transforms) {
    rt.push_back({{"room", t.room}, {"translation", vec_json(t.translation)}, {"rotation_rad", round9(t.rotation_rad)}});
  }
  json pr = json::array();
  for (const auto& [id, a] : s.noise_meta.plane_rotation_rad) pr.push_back({id, round9(a)});
  json noise = {{"global_rotation_rad", round9(s.noise_meta.global_rotation_rad)},
                {"room_transforms", rt},
                {"plane_rotation_rad", pr},
                {"dropped_planes", s.noise_meta.dropped_planes},
                {"voxel_size_m", round9(s.noise_meta.voxel_size_m)},
                {"voxels_x", s.noise_meta.voxels_x},
                {"voxels_y", s.noise_meta.voxels_y},
                {"wall_thickness_m", round9(s.noise_meta.wall_thickness_m)}};
  return {{"id", s.id},         {"rng_seed", s.rng_seed}, {"planes", planes},        {"gt_planes", gt_planes},
          {"rooms", rooms},     {"unlabeled_rooms", unlabeled}, {"walls", walls},   {"edges", edges},
          {"noise_meta", noise}};
}

/// Only "planes" is required; ground truth is read when present.
inline BuildingSample sample_from_json(const json& j) {
  BuildingSample s;
  try {
    s.id = j.value("id", std::string{});
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    for (const auto& p : j.at("planes")) {
      ObservedPlane o;
      o.id = p.at("id").get<NodeId>();
      o.gt_id = p.value("gt_id", o.id);
      o.plane = json_plane(p);
      s.observed.push_back(o);
    }
    auto& g = s.ground_truth;
    for (const auto& p : j.value("gt_planes", json::array())) {
      const NodeId id = p.at("id").get<NodeId>();
      g.add_plane(id, json_plane(p));
      if (p.contains("room")) s.plane_room[id] = p.at("room").get<NodeId>();
    }
    for (const auto& r : j.value("rooms", json::array())) {
      const NodeId id = r.at("id").get<NodeId>();
      g.add_concept(id, NodeKind::room, Origin2D{json_vec(r.at("origin"))});
      for (NodeId m : r.at("planes").get<std::vector<NodeId>>()) g.add_edge(id, m, EdgeKind::membership);
      if (r.contains("polygon")) s.room_polygons[id] = json_polygon(r.at("polygon"));
    }
    for (const auto& r : j.value("unlabeled_rooms", json::array())) {
      s.room_polygons[r.at("id").get<NodeId>()] = json_polygon(r.at("polygon"));
    }
    for (const auto& w : j.value("walls", json::array())) {
      const NodeId id = w.at("id").get<NodeId>();
      g.add_concept(id, NodeKind::wall, Origin2D{json_vec(w.at("origin"))});
      for (NodeId m : w.at("planes").get<std::vector<NodeId>>()) g.add_edge(id, m, EdgeKind::membership);
      if (w.contains("thickness")) s.wall_thickness[id] = w.at("thickness").get<double>();
    }
    for (const auto& e : j.value("edges", json::array())) {
      g.add_edge(e.at("src").get<NodeId>(), e.at("dst").get<NodeId>(),
                 edge_kind_from_string(e.at("kind").get<std::string>()));
    }
    if (j.contains("noise_meta")) {
      const auto& n = j.at("noise_meta");
      auto& m = s.noise_meta;
      m.global_rotation_rad = n.value("global_rotation_rad", 0.0);
      for (const auto& t : n.value("room_transforms", json::array())) {
        m.room_transforms.push_back(
            {t.at("room").get<NodeId>(), json_vec(t.at("translation")), t.at("rotation_rad").get<double>()});
      }
      for (const auto& p : n.value("plane_rotation_rad", json::array())) {
        m.plane_rotation_rad[p.at(0).get<NodeId>()] = p.at(1).get<double>();
      }
      m.dropped_planes = n.value("dropped_planes", std::size_t{0});
      m.voxel_size_m = n.value("voxel_size_m", 0.0);
      m.voxels_x = n.value("voxels_x", 0);
      m.voxels_y = n.value("voxels_y", 0);
      m.wall_thickness_m = n.value("wall_thickness_m", 0.0);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed scene record: ") + e.what());
  } catch (const GraphError& e) {
    throw IoError(std::string("inconsistent scene record: ") + e.what());
  }
  return s;
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<json> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw IoError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline std::vector<BuildingSample> read_samples(const std::string& path) {
  std::vector<BuildingSample> out;
  for (const auto& j : read_jsonl(path)) out.push_back(sample_from_json(j));
  return out;
}

inline void write_samples(const std::string& path, const std::vector<BuildingSample>& samples) {
  std::vector<json> recs;
  recs.reserve(samples.size());
  for (const auto& s : samples) recs.push_back(sample_to_json(s));
  write_jsonl(path, recs);
}

/// Just the observed planes of any scene record, in file order.
inline std::vector<Plane2D> observed_planes_from_json(const json& j) {
  std::vector<Plane2D> out;
  try {
    for (const auto& p : j.at("planes")) out.push_back(json_plane(p));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed scene record: ") + e.what());
  }
  return out;
}

/// Scene graph of a pipeline output record (planes indexed by position, classified edges,
/// rooms and walls with origins).
inline SceneGraph scene_graph_from_output(const json& j) {
  SceneGraph g;
  try {
    for (const auto& p : j.at("planes")) g.add_plane(p.at("id").get<NodeId>(), json_plane(p));
    for (const auto& e : j.value("edges", json::array())) {
      const auto cls = edge_class_from_string(e.at("class").get<std::string>());
      if (cls == EdgeClass::none) continue;
      g.add_edge(e.at("src").get<NodeId>(), e.at("dst").get<NodeId>(),
                 cls == EdgeClass::same_room ? EdgeKind::same_room : EdgeKind::same_wall);
    }
    for (const auto& [key, kind] : {std::pair{"rooms", NodeKind::room}, std::pair{"walls", NodeKind::wall}}) {
      for (const auto& c : j.value(key, json::array())) {
        const NodeId id = c.at("id").get<NodeId>();
        g.add_concept(id, kind, Origin2D{json_vec(c.at("origin"))});
        for (NodeId m : c.at("planes").get<std::vector<NodeId>>()) g.add_edge(id, m, EdgeKind::membership);
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed scene record: ") + e.what());
  } catch (const GraphError& e) {
    throw IoError(std::string("inconsistent scene record: ") + e.what());
  }
  return g;
}

// ---- generator config ---------------------------------------------------------------------

/// Overrides the fields present in `j`; intervals are [lo, hi] arrays.
inline GeneratorConfig generator_config_from_json(const json& j, GeneratorConfig cfg = {}) {
  try {
    auto ival = [&](const char* key, auto& iv) {
      if (!j.contains(key)) return;
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != 2) throw ConfigError(std::string(key) + " must be [lo, hi]");
      a.at(0).get_to(iv.lo);
      a.at(1).get_to(iv.hi);
    };
    ival("voxels_xy_range", cfg.voxels_xy_range);
    ival("voxels_per_room_range", cfg.voxels_per_room_range);
    ival("max_building_size_m", cfg.max_building_size_m);
    ival("voxel_size_m", cfg.voxel_size_m);
    ival("wall_thickness_m", cfg.wall_thickness_m);
    ival("noise_global_rot_deg", cfg.noise_global_rot_deg);
    ival("noise_plane_rot_deg", cfg.noise_plane_rot_deg);
    ival("noise_room_trans_m", cfg.noise_room_trans_m);
    ival("noise_room_rot_deg", cfg.noise_room_rot_deg);
    cfg.n_buildings = j.value("n_buildings", cfg.n_buildings);
    cfg.plane_dropout = j.value("plane_dropout", cfg.plane_dropout);
    cfg.l_shape_prob = j.value("l_shape_prob", cfg.l_shape_prob);
    cfg.knn_k = j.value("knn_k", cfg.knn_k);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.room_split_prob = j.value("room_split_prob", cfg.room_split_prob);
    cfg.min_plane_length_m = j.value("min_plane_length_m", cfg.min_plane_length_m);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---- checkpoints --------------------------------------------------------------------------

inline constexpr const char* kCheckpointFormat = "scenefactor-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline json matrix_json(const nn::Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

inline nn::Matrix json_matrix(const json& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto& data = j.at("data");
  if (shape.size() != 2 || static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1]) {
    throw CheckpointError("tensor shape does not match its data");
  }
  nn::Matrix m(shape[0], shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

inline json mlp_json(const nn::Mlp& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    layers.push_back(
        {{"weights", matrix_json(l.weights)}, {"bias", matrix_json(l.bias)}, {"activation", nn::to_string(l.activation)}});
  }
  return layers;
}

inline nn::Mlp json_mlp(const json& j) {
  nn::Mlp m;
  for (const auto& l : j) {
    nn::DenseLayerParams p;
    p.weights = json_matrix(l.at("weights"));
    p.bias = json_matrix(l.at("bias"));
    p.activation = nn::activation_from_string(l.at("activation").get<std::string>());
    if (p.bias.rows() != 1 || p.bias.cols() != p.weights.rows()) throw CheckpointError("bias shape mismatch");
    if (!m.layers.empty() && m.layers.back().out_dim() != p.in_dim()) throw CheckpointError("layer shapes do not chain");
    m.layers.push_back(std::move(p));
  }
  if (m.layers.empty()) throw CheckpointError("empty layer stack");
  return m;
}

inline json mp_json(const nn::MessagePassingLayerParams& p) {
  json j = {{"message", mlp_json(p.message)}, {"node_update", mlp_json(p.node_update)}};
  if (p.edge_update) j["edge_update"] = mlp_json(*p.edge_update);
  return j;
}

inline nn::MessagePassingLayerParams json_mp(const json& j) {
  nn::MessagePassingLayerParams p;
  p.message = json_mlp(j.at("message"));
  p.node_update = json_mlp(j.at("node_update"));
  if (j.contains("edge_update")) p.edge_update = json_mlp(j.at("edge_update"));
  return p;
}

inline json feature_config_json(const FeatureConfig& f) {
  return {{"node_layout", f.node_layout},
          {"edge_layout", f.edge_layout},
          {"node_dim", f.node_dim},
          {"edge_dim", f.edge_dim},
          {"meters_scale", f.meters_scale}};
}

inline FeatureConfig json_feature_config(const json& j) {
  FeatureConfig f;
  f.node_layout = j.at("node_layout").get<std::string>();
  f.edge_layout = j.at("edge_layout").get<std::string>();
  f.node_dim = j.at("node_dim").get<int>();
  f.edge_dim = j.at("edge_dim").get<int>();
  f.meters_scale = j.at("meters_scale").get<double>();
  return f;
}

inline json checkpoint_header(const char* model) {
  return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"model", model}};
}

inline void check_header(const json& j, const char* model) {
  if (j.value("format", std::string{}) != kCheckpointFormat) throw CheckpointError("not a scenefactor checkpoint");
  if (j.value("version", -1) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + j.value("version", json(nullptr)).dump());
  }
  if (j.value("model", std::string{}) != model) {
    throw CheckpointError("checkpoint holds a '" + j.value("model", std::string{}) + "' model, expected '" + model + "'");
  }
}

inline json ggnn_to_json(const GGnnModel& m, const json& hyperparameters = json::object()) {
  json j = checkpoint_header("edge_classifier");
  j["hyperparameters"] = hyperparameters;
  j["hidden"] = m.hidden;
  j["feature_config"] = feature_config_json(m.feature_config);
  j["tensors"] = {{"hop1", mp_json(m.hop1)}, {"hop2", mp_json(m.hop2)}, {"decoder", mlp_json(m.decoder)}};
  return j;
}

inline GGnnModel ggnn_from_json(const json& j) {
  check_header(j, "edge_classifier");
  try {
    GGnnModel m;
    m.hidden = j.at("hidden").get<int>();
    m.feature_config = json_feature_config(j.at("feature_config"));
    const auto& t = j.at("tensors");
    m.hop1 = json_mp(t.at("hop1"));
    m.hop2 = json_mp(t.at("hop2"));
    m.decoder = json_mlp(t.at("decoder"));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const nn::ShapeError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline json fgnn_to_json(const FGnnModel& m, const json& hyperparameters = json::object()) {
  json j = checkpoint_header("origin_regressor");
  j["kind"] = to_string(m.kind);
  j["hyperparameters"] = hyperparameters;
  j["hidden"] = m.hidden;
  j["feature_config"] = feature_config_json(m.feature_config);
  j["tensors"] = {{"encoder", mp_json(m.encoder)}, {"decoder", mlp_json(m.decoder)}};
  return j;
}

inline FGnnModel fgnn_from_json(const json& j) {
  check_header(j, "origin_regressor");
  try {
    FGnnModel m;
    m.kind = node_kind_from_string(j.at("kind").get<std::string>());
    if (m.kind == NodeKind::plane) throw CheckpointError("origin regressor kind must be room or wall");
    m.hidden = j.at("hidden").get<int>();
    m.feature_config = json_feature_config(j.at("feature_config"));
    m.encoder = json_mp(j.at("tensors").at("encoder"));
    m.decoder = json_mlp(j.at("tensors").at("decoder"));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const nn::ShapeError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump() << '\n';
}

inline GGnnModel load_edge_classifier(const std::string& path) { return ggnn_from_json(read_json(path)); }
inline FGnnModel load_origin_regressor(const std::string& path) { return fgnn_from_json(read_json(path)); }

// ---- classification, clusters ---------------------------------------------------------------

inline json classified_edges_json(const std::vector<ClassifiedEdge>& edges, const std::vector<ClassProbs>& probs) {
  json a = json::array();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    json p = json::array();
    for (double x : probs[i]) p.push_back(round9(x));
    a.push_back({{"src", edges[i].a}, {"dst", edges[i].b}, {"class", to_string(edges[i].label)}, {"probs", p}});
  }
  return a;
}

inline std::vector<ClassifiedEdge> json_classified_edges(const json& a) {
  std::vector<ClassifiedEdge> out;
  for (const auto& e : a) {
    ClassifiedEdge c;
    c.a = e.at("src").get<NodeId>();
    c.b = e.at("dst").get<NodeId>();
    c.label = edge_class_from_string(e.at("class").get<std::string>());
    const auto probs = e.at("probs").get<std::vector<double>>();
    if (probs.size() != kNumEdgeClasses) throw IoError("classified edge needs 3 probabilities");
    c.prob = probs[static_cast<std::size_t>(c.label)];
    out.push_back(c);
  }
  return out;
}

inline json cluster_json(const ConceptCluster& c) {
  json j = {{"planes", std::vector<NodeId>(c.members.begin(), c.members.end())}, {"support", round9(c.support)}};
  if (c.kind == NodeKind::room) j["acyclic"] = c.acyclic;
  return j;
}

inline ConceptCluster json_cluster(const json& j, NodeKind kind) {
  ConceptCluster c;
  c.kind = kind;
  const auto m = j.at("planes").get<std::vector<NodeId>>();
  c.members.insert(m.begin(), m.end());
  c.support = j.value("support", 0.0);
  c.acyclic = j.value("acyclic", false);
  return c;
}

// ---- factor problems ------------------------------------------------------------------------

inline json info_json(const Eigen::Matrix2d& m) { return {m(0, 0), m(0, 1), m(1, 0), m(1, 1)}; }
inline Eigen::Matrix2d json_info(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw IoError("information matrix needs 4 entries");
  Eigen::Matrix2d m;
  m << v[0], v[1], v[2], v[3];
  return m;
}

/// Dataset-style record: planes (with theta/offset), rooms/walls with origins, priors[].
/// Concept factors are implied by the rooms and walls.
inline json problem_to_json(const FactorProblem& p, const std::string& id = {}) {
  json planes = json::array(), rooms = json::array(), walls = json::array(), priors = json::array();
  for (const auto& [vid, v] : p.variables) {
    if (v.kind != VariableKind::plane) continue;
    json jp = plane_json(param_to_plane(v.plane.param, v.plane.centroid, v.plane.length));
    jp["id"] = vid;
    jp["theta"] = round9(v.plane.param.theta);
    jp["offset"] = round9(v.plane.param.offset);
    jp["centroid"] = vec_json(v.plane.centroid);
    if (v.fixed) jp["fixed"] = true;
    planes.push_back(std::move(jp));
  }
  for (const auto& f : p.factors) {
    if (f.kind == FactorKind::plane_prior) {
      priors.push_back({{"plane", f.plane_vars.front()},
                        {"theta", round9(f.measured.theta)},
                        {"offset", round9(f.measured.offset)},
                        {"information", info_json(f.information)}});
      continue;
    }
    const Variable& o = p.variables.at(f.concept_var);
    json jc = {{"id", f.concept_var},
               {"planes", f.plane_vars},
               {"origin", vec_json(o.origin)},
               {"information", info_json(f.information)}};
    if (o.fixed) jc["fixed"] = true;
    (f.kind == FactorKind::room_plane ? rooms : walls).push_back(std::move(jc));
  }
  return {{"id", id}, {"planes", planes}, {"rooms", rooms}, {"walls", walls}, {"priors", priors}};
}

/// Plane parameters come from "theta"/"offset" when present, otherwise from the normal.
inline FactorProblem problem_from_json(const json& j, const FGnnModel* room_model, const FGnnModel* wall_model,
                                       const Eigen::Matrix2d& room_info = Eigen::Matrix2d::Identity(),
                                       const Eigen::Matrix2d& wall_info = Eigen::Matrix2d::Identity()) {
  FactorProblem p;
  p.room_model = room_model;
  p.wall_model = wall_model;
  try {
    for (const auto& jp : j.at("planes")) {
      Variable v;
      v.kind = VariableKind::plane;
      const Plane2D plane = json_plane(jp);
      v.plane = plane_state(plane);
      if (jp.contains("theta")) v.plane.param.theta = jp.at("theta").get<double>();
      v.fixed = jp.value("fixed", false);
      if (!p.variables.emplace(jp.at("id").get<VarId>(), v).second) throw ProblemError("duplicate variable id");
    }
    auto concepts = [&](const char* key, FactorKind kind, const Eigen::Matrix2d& info) {
      for (const auto& jc : j.value(key, json::array())) {
        Variable v;
        v.kind = VariableKind::origin;
        v.origin = json_vec(jc.at("origin"));
        v.fixed = jc.value("fixed", false);
        const VarId id = jc.at("id").get<VarId>();
        if (!p.variables.emplace(id, v).second) throw ProblemError("duplicate variable id " + std::to_string(id));
        Factor f;
        f.kind = kind;
        f.concept_var = id;
        f.plane_vars = jc.at("planes").get<std::vector<VarId>>();
        f.information = jc.contains("information") ? json_info(jc.at("information")) : info;
        p.factors.push_back(std::move(f));
      }
    };
    concepts("rooms", FactorKind::room_plane, room_info);
    concepts("walls", FactorKind::wall_plane, wall_info);
    for (const auto& jq : j.value("priors", json::array())) {
      PlanePrior pr;
      pr.plane_var = jq.at("plane").get<VarId>();
      pr.measured = {jq.at("theta").get<double>(), jq.at("offset").get<double>()};
      if (jq.contains("information")) pr.information = json_info(jq.at("information"));
      p.factors.push_back(make_prior_factor(pr));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed problem record: ") + e.what());
  }
  return p;
}

inline json lm_report_json(const LmReport& r) {
  json costs = json::array(), acc = json::array();
  for (double c : r.costs) costs.push_back(c);
  for (bool a : r.accepted) acc.push_back(a);
  return {{"iterations", r.iterations},       {"initial_cost", r.initial_cost}, {"final_cost", r.final_cost},
          {"gradient_norm", r.gradient_norm}, {"converged", r.converged},       {"termination", r.termination},
          {"costs", costs},                   {"accepted", acc}};
}

// ---- metrics ----------------------------------------------------------------------------------

/// Flat key/value view of the evaluation results.
struct MetricsReport {
  std::optional<EdgeMetrics> edges;
  std::optional<OriginMetrics> rooms;
  std::optional<OriginMetrics> walls;
  std::optional<double> generation_seconds;
  std::optional<double> factor_eval_us;
  std::string dataset;
  std::uint64_t seed = 0;
};

inline json metrics_json(const MetricsReport& m) {
  json j = json::object();
  j["dataset"] = m.dataset;
  j["seed"] = m.seed;
  auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  if (m.edges) {
    const auto& e = *m.edges;
    for (int c = 0; c < kNumEdgeClasses; ++c) {
      const std::string n = to_string(static_cast<EdgeClass>(c));
      j["precision_" + n] = num(e.precision[static_cast<std::size_t>(c)]);
      j["recall_" + n] = num(e.recall[static_cast<std::size_t>(c)]);
      j["auc_" + n] = num(e.auc[static_cast<std::size_t>(c)]);
    }
    j["macro_precision"] = num(e.macro_precision);
    j["macro_recall"] = num(e.macro_recall);
    j["macro_auc"] = num(e.macro_auc);
    j["n_edges"] = e.n_edges;
  }
  if (m.rooms) {
    j["room_rmse_m"] = m.rooms->rmse_m;
    j["room_mse_m2"] = m.rooms->mse_m2;
    j["room_matched"] = m.rooms->matched;
  }
  if (m.walls) {
    j["wall_rmse_m"] = m.walls->rmse_m;
    j["wall_mse_m2"] = m.walls->mse_m2;
    j["wall_matched"] = m.walls->matched;
  }
  if (m.generation_seconds) j["generation_seconds"] = *m.generation_seconds;
  if (m.factor_eval_us) j["factor_eval_us"] = *m.factor_eval_us;
  return j;
}

}  // namespace scenefactor
