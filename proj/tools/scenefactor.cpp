// scenefactor command-line driver.
#include "scenefactor.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace scenefactor;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  int threads = 1;
  bool verbose = false;
};

json load_config(const Globals& g) { return g.config.empty() ? json::object() : read_json(g.config); }

void log(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << '\n';
}

TrainConfig train_config(const Globals& g, const json& section) {
  TrainConfig tc;
  tc.epochs = section.value("epochs", tc.epochs);
  tc.lr = section.value("lr", tc.lr);
  tc.batch = section.value("batch", tc.batch);
  tc.patience = section.value("patience", tc.patience);
  tc.val_fraction = section.value("val_fraction", tc.val_fraction);
  tc.hidden = section.value("hidden", tc.hidden);
  tc.knn_k = section.value("knn_k", tc.knn_k);
  tc.features.meters_scale = section.value("meters_scale", tc.features.meters_scale);
  tc.seed = g.seed;
  tc.threads = g.threads;
  return tc;
}

json hyperparameters(const TrainConfig& tc) {
  return {{"epochs", tc.epochs}, {"lr", tc.lr},           {"batch", tc.batch},     {"seed", tc.seed},
          {"patience", tc.patience}, {"val_fraction", tc.val_fraction}, {"hidden", tc.hidden}, {"knn_k", tc.knn_k}};
}

json report_json(const TrainingReport& r) {
  return {{"train_loss", r.train_loss}, {"val_loss", r.val_loss},   {"initial_train_loss", r.initial_train_loss},
          {"best_epoch", r.best_epoch}, {"best_val_loss", r.best_val_loss}, {"n_train", r.n_train},
          {"n_val", r.n_val},           {"class_weights", r.class_weights}};
}

Eigen::Matrix2d parse_info(const std::vector<double>& v) {
  if (v.empty()) return Eigen::Matrix2d::Identity();
  if (v.size() != 4) throw std::invalid_argument("information matrix needs 4 values");
  Eigen::Matrix2d m;
  m << v[0], v[1], v[2], v[3];
  return m;
}

RenderLayers parse_layers(const std::string& spec) {
  if (spec.empty()) return {};
  RenderLayers l{false, false, false, false, false, false};
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "planes") l.planes = true;
    else if (item == "proximity") l.proximity_edges = true;
    else if (item == "same_room") l.same_room_edges = true;
    else if (item == "same_wall") l.same_wall_edges = true;
    else if (item == "origins") l.origins = true;
    else if (item == "membership") l.memberships = true;
    else throw std::invalid_argument("unknown render layer: " + item);
  }
  return l;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned room and wall factors for plane-based scene graphs"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--config", g.config, "JSON config file (sections: generator, train_edges, train_origins)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "Progress on stderr");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic building dataset");
  std::string gen_out;
  int gen_count = -1;
  std::uint64_t gen_first = 0;
  gen->add_option("--out", gen_out, "Output JSON-lines file")->required();
  gen->add_option("--count", gen_count, "Number of buildings (default: n_buildings)");
  gen->add_option("--first-index", gen_first, "Index of the first building in the seeded stream");

  // train-edges
  auto* te = app.add_subcommand("train-edges", "Train the edge classifier");
  std::string te_data, te_out, te_report;
  std::optional<int> te_epochs, te_batch;
  std::optional<double> te_lr;
  te->add_option("--data", te_data, "Training dataset (JSON lines)")->required();
  te->add_option("--out", te_out, "Checkpoint path")->required();
  te->add_option("--epochs", te_epochs);
  te->add_option("--lr", te_lr);
  te->add_option("--batch", te_batch);
  te->add_option("--report", te_report, "Write the training report as JSON");

  // train-origins
  auto* to = app.add_subcommand("train-origins", "Train a room or wall origin regressor");
  std::string to_kind, to_data, to_out, to_report;
  std::optional<int> to_epochs, to_batch;
  std::optional<double> to_lr;
  to->add_option("--kind", to_kind, "room or wall")->required()->check(CLI::IsMember({"room", "wall"}));
  to->add_option("--data", to_data)->required();
  to->add_option("--out", to_out)->required();
  to->add_option("--epochs", to_epochs);
  to->add_option("--lr", to_lr);
  to->add_option("--batch", to_batch);
  to->add_option("--report", to_report);

  // classify
  auto* cl = app.add_subcommand("classify", "Classify proximity edges of each scene");
  std::string cl_model, cl_scene, cl_out;
  int cl_k = 10;
  cl->add_option("--model", cl_model)->required();
  cl->add_option("--scene", cl_scene)->required();
  cl->add_option("--out", cl_out)->required();
  cl->add_option("--knn", cl_k, "Proximity graph neighbours");

  // cluster
  auto* cu = app.add_subcommand("cluster", "Group classified edges into rooms and walls");
  std::string cu_scene, cu_classified, cu_out;
  cu->add_option("--scene", cu_scene)->required();
  cu->add_option("--classified", cu_classified)->required();
  cu->add_option("--out", cu_out)->required();

  // infer-origins
  auto* io = app.add_subcommand("infer-origins", "Infer origins of the clusters matching the model kind");
  std::string io_model, io_clusters, io_out;
  io->add_option("--model", io_model)->required();
  io->add_option("--clusters", io_clusters)->required();
  io->add_option("--out", io_out)->required();

  // optimize
  auto* op = app.add_subcommand("optimize", "Solve factor problems");
  std::string op_problem, op_room, op_wall, op_out;
  LmConfig lm;
  std::vector<double> room_info, wall_info;
  op->add_option("--problem", op_problem)->required();
  op->add_option("--room-model", op_room)->required();
  op->add_option("--wall-model", op_wall)->required();
  op->add_option("--out", op_out)->required();
  op->add_option("--lambda0", lm.lambda0);
  op->add_option("--max-iters", lm.max_iters);
  op->add_option("--tol", lm.tol);
  op->add_option("--room-information", room_info, "Default room factor information (4 values, row-major)");
  op->add_option("--wall-information", wall_info, "Default wall factor information (4 values, row-major)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate models on a labelled dataset");
  std::string ev_data, ev_edges, ev_room, ev_wall, ev_out;
  int ev_k = 10;
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--edge-model", ev_edges);
  ev->add_option("--room-model", ev_room);
  ev->add_option("--wall-model", ev_wall);
  ev->add_option("--out", ev_out, "Metrics file (flat JSON)")->required();
  ev->add_option("--knn", ev_k);

  // render
  auto* rd = app.add_subcommand("render", "Render one scene as SVG");
  std::string rd_scene, rd_out, rd_layers;
  std::size_t rd_index = 0;
  rd->add_option("--scene", rd_scene, "Dataset or pipeline output file")->required();
  rd->add_option("--out", rd_out)->required();
  rd->add_option("--index", rd_index, "Record to render");
  rd->add_option("--layers", rd_layers, "Comma list of planes,proximity,same_room,same_wall,origins,membership");

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "Planes to scene graph and factor problem");
  std::string pl_scene, pl_edges, pl_room, pl_wall, pl_out, pl_timings;
  int pl_k = 10;
  pl->add_option("--scene", pl_scene)->required();
  pl->add_option("--edge-model", pl_edges)->required();
  pl->add_option("--room-model", pl_room)->required();
  pl->add_option("--wall-model", pl_wall)->required();
  pl->add_option("--out", pl_out)->required();
  pl->add_option("--timings", pl_timings, "Write per-stage timings as JSON lines");
  pl->add_option("--knn", pl_k);

  CLI11_PARSE(app, argc, argv);

  try {
    const json config = load_config(g);

    if (*gen) {
      GeneratorConfig cfg = generator_config_from_json(config.value("generator", json::object()));
      if (g.seed_set) cfg.seed = g.seed;
      const int count = gen_count >= 0 ? gen_count : cfg.n_buildings;
      write_samples(gen_out, generate_dataset(cfg, count, gen_first));
      log(g, "wrote " + std::to_string(count) + " buildings to " + gen_out);
    } else if (*te) {
      TrainConfig tc = train_config(g, config.value("train_edges", json::object()));
      if (te_epochs) tc.epochs = *te_epochs;
      if (te_lr) tc.lr = *te_lr;
      if (te_batch) tc.batch = *te_batch;
      if (g.verbose) {
        tc.on_epoch = [](int e, double tl, double vl) {
          std::fprintf(stderr, "epoch %d train %.5f val %.5f\n", e, tl, vl);
        };
      }
      const auto res = train_edge_classifier(read_samples(te_data), tc);
      save_checkpoint(te_out, ggnn_to_json(res.model, hyperparameters(tc)));
      if (!te_report.empty()) write_json(te_report, report_json(res.report));
    } else if (*to) {
      const NodeKind kind = node_kind_from_string(to_kind);
      TrainConfig tc = train_config(g, config.value("train_origins", json::object()).value(to_kind, json::object()));
      if (to_epochs) tc.epochs = *to_epochs;
      if (to_lr) tc.lr = *to_lr;
      if (to_batch) tc.batch = *to_batch;
      if (g.verbose) {
        tc.on_epoch = [](int e, double tl, double vl) {
          std::fprintf(stderr, "epoch %d train %.6f m2 val %.6f m2\n", e, tl, vl);
        };
      }
      const auto data = origin_training_set(read_samples(to_data), kind);
      const auto res = train_origin_regressor(data, kind, tc);
      save_checkpoint(to_out, fgnn_to_json(res.model, hyperparameters(tc)));
      if (!to_report.empty()) write_json(to_report, report_json(res.report));
    } else if (*cl) {
      const GGnnModel model = load_edge_classifier(cl_model);
      std::vector<json> out;
      for (const auto& rec : read_jsonl(cl_scene)) {
        const auto planes = observed_planes_from_json(rec);
        std::vector<ClassifiedEdge> edges;
        std::vector<ClassProbs> probs;
        if (planes.size() >= 2) {
          const SceneGraph prox = build_proximity_graph(planes, cl_k);
          for (const auto& [idx, p] : classify_edges(model, prox)) {
            const auto& e = prox.edges()[idx];
            edges.push_back({e.src, e.dst, p.label, p.probs[static_cast<std::size_t>(p.label)]});
            probs.push_back(p.probs);
          }
        }
        out.push_back({{"id", rec.value("id", std::string{})}, {"edges", classified_edges_json(edges, probs)}});
      }
      write_jsonl(cl_out, out);
    } else if (*cu) {
      const auto scenes = read_jsonl(cu_scene);
      const auto classified = read_jsonl(cu_classified);
      if (scenes.size() != classified.size()) throw IoError("scene and classified files have different lengths");
      std::vector<json> out;
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto edges = json_classified_edges(classified[i].at("edges"));
        json rooms = json::array(), walls = json::array(), planes = json::array();
        for (const auto& c : cluster_rooms(edges)) rooms.push_back(cluster_json(c));
        for (const auto& c : cluster_walls(edges)) walls.push_back(cluster_json(c));
        const auto ps = observed_planes_from_json(scenes[i]);
        for (std::size_t k = 0; k < ps.size(); ++k) {
          json jp = plane_json(ps[k]);
          jp["id"] = k;
          planes.push_back(std::move(jp));
        }
        out.push_back({{"id", scenes[i].value("id", std::string{})}, {"planes", planes}, {"rooms", rooms}, {"walls", walls}});
      }
      write_jsonl(cu_out, out);
    } else if (*io) {
      const FGnnModel model = load_origin_regressor(io_model);
      const char* key = model.kind == NodeKind::room ? "rooms" : "walls";
      std::vector<json> out;
      for (json rec : read_jsonl(io_clusters)) {
        const auto planes = observed_planes_from_json(rec);
        for (auto& c : rec[key]) {
          std::vector<Plane2D> ps;
          for (NodeId m : c.at("planes").get<std::vector<NodeId>>()) ps.push_back(planes.at(static_cast<std::size_t>(m)));
          c["origin"] = vec_json(infer_origin(model, ps).xy);
        }
        out.push_back(std::move(rec));
      }
      write_jsonl(io_out, out);
    } else if (*op) {
      const FGnnModel room = load_origin_regressor(op_room);
      const FGnnModel wall = load_origin_regressor(op_wall);
      lm.threads = g.threads;
      std::vector<json> out;
      for (const auto& rec : read_jsonl(op_problem)) {
        const FactorProblem p = problem_from_json(rec, &room, &wall, parse_info(room_info), parse_info(wall_info));
        const LmResult r = optimize(p, lm);
        json j = problem_to_json(r.solution, rec.value("id", std::string{}));
        j["report"] = lm_report_json(r.report);
        out.push_back(std::move(j));
        log(g, rec.value("id", std::string{}) + ": cost " + std::to_string(r.report.initial_cost) + " -> " +
                   std::to_string(r.report.final_cost));
      }
      write_jsonl(op_out, out);
    } else if (*ev) {
      const auto samples = read_samples(ev_data);
      MetricsReport rep;
      rep.dataset = ev_data;
      rep.seed = g.seed;
      std::optional<GGnnModel> edges;
      std::optional<FGnnModel> room, wall;
      if (!ev_edges.empty()) edges = load_edge_classifier(ev_edges);
      if (!ev_room.empty()) room = load_origin_regressor(ev_room);
      if (!ev_wall.empty()) wall = load_origin_regressor(ev_wall);
      if (edges) {
        std::vector<LabeledEdgeGraph> data;
        for (const auto& s : samples) data.push_back(make_labeled_edge_graph(s, ev_k, edges->feature_config));
        rep.edges = evaluate_edge_classifier(*edges, data);
      }
      if (room) rep.rooms = evaluate_origin_regressor(*room, origin_training_set(samples, NodeKind::room));
      if (wall) rep.walls = evaluate_origin_regressor(*wall, origin_training_set(samples, NodeKind::wall));
      if (edges && room && wall) {
        std::vector<double> times;
        PipelineConfig pc;
        pc.knn_k = ev_k;
        for (const auto& s : samples) {
          times.push_back(run_pipeline(s.observed_planes(), {&*edges, &*room, &*wall}, pc).timings.total_s);
        }
        rep.generation_seconds = median(times);
      }
      if (room) {
        std::vector<double> us;
        for (const auto& ex : origin_training_set(samples, NodeKind::room)) {
          std::vector<PlaneState> st;
          for (const auto& p : ex.planes) st.push_back(plane_state(p));
          const auto t0 = std::chrono::steady_clock::now();
          const auto jac = origin_with_jacobian(*room, st);
          const auto t1 = std::chrono::steady_clock::now();
          if (!jac.origin.allFinite()) throw std::runtime_error("non-finite origin");
          us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        }
        if (!us.empty()) rep.factor_eval_us = median(us);
      }
      write_json(ev_out, metrics_json(rep));
      if (g.verbose) std::cerr << metrics_json(rep).dump(2) << '\n';
    } else if (*rd) {
      const auto recs = read_jsonl(rd_scene);
      if (rd_index >= recs.size()) throw IoError("record index out of range");
      const json& rec = recs[rd_index];
      const SceneGraph scene =
          rec.contains("gt_planes") ? sample_from_json(rec).ground_truth : scene_graph_from_output(rec);
      std::ofstream f(rd_out, std::ios::binary);
      if (!f) throw IoError("cannot write " + rd_out);
      f << render_svg(scene, parse_layers(rd_layers));
    } else if (*pl) {
      const GGnnModel edges = load_edge_classifier(pl_edges);
      const FGnnModel room = load_origin_regressor(pl_room);
      const FGnnModel wall = load_origin_regressor(pl_wall);
      PipelineConfig pc;
      pc.knn_k = pl_k;
      pc.threads = g.threads;
      std::vector<json> out, timings;
      for (const auto& rec : read_jsonl(pl_scene)) {
        const std::string id = rec.value("id", std::string{});
        const auto res = run_pipeline(observed_planes_from_json(rec), {&edges, &room, &wall}, pc);
        out.push_back(pipeline_json(res, id));
        json t = timings_json(res.timings);
        t["id"] = id;
        timings.push_back(std::move(t));
        log(g, id + ": " + std::to_string(res.rooms.size()) + " rooms, " + std::to_string(res.walls.size()) +
                   " walls in " + std::to_string(res.timings.total_s) + " s");
      }
      write_jsonl(pl_out, out);
      if (!pl_timings.empty()) write_jsonl(pl_timings, timings);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
