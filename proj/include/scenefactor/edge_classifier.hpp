// Edge classifier: two message-passing hops over the proximity graph, then a dense decoder
// scoring every edge as none / same_room / same_wall.
#pragma once

#include "scenefactor/features.hpp"
#include "scenefactor/metrics.hpp"
#include "scenefactor/nn/adam.hpp"
#include "scenefactor/nn/layers.hpp"
#include "scenefactor/parallel.hpp"
#include "scenefactor/scene_graph.hpp"
#include "scenefactor/synth.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace scenefactor {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GGnnModel {
  FeatureConfig feature_config;
  int hidden = 64;
  nn::MessagePassingLayerParams hop1;
  nn::MessagePassingLayerParams hop2;
  nn::Mlp decoder;

  static GGnnModel init(int hidden, const FeatureConfig& fc, std::mt19937_64& rng) {
    using nn::Activation;
    GGnnModel m;
    m.feature_config = fc;
    m.hidden = hidden;
    const Eigen::Index h = hidden, nd = fc.node_dim, ed = fc.edge_dim;
    m.hop1.message = nn::make_mlp({2 * nd + ed, h, h}, Activation::relu, Activation::relu, rng);
    m.hop1.node_update = nn::make_mlp({nd + h, h}, Activation::relu, Activation::relu, rng);
    m.hop1.edge_update = nn::make_mlp({ed + 2 * h, h}, Activation::relu, Activation::relu, rng);
    m.hop2.message = nn::make_mlp({3 * h, h, h}, Activation::relu, Activation::relu, rng);
    m.hop2.node_update = nn::make_mlp({2 * h, h}, Activation::relu, Activation::relu, rng);
    m.hop2.edge_update = nn::make_mlp({3 * h, h}, Activation::relu, Activation::relu, rng);
    m.decoder = nn::make_mlp({h, h, h, kNumEdgeClasses}, Activation::relu, Activation::softmax_at_loss, rng);
    return m;
  }

  std::vector<nn::Matrix*> parameters() {
    std::vector<nn::Matrix*> out;
    hop1.collect(out);
    hop2.collect(out);
    decoder.collect(out);
    return out;
  }
  std::vector<const nn::Matrix*> parameters() const {
    std::vector<const nn::Matrix*> out;
    hop1.collect(out);
    hop2.collect(out);
    decoder.collect(out);
    return out;
  }

  void validate() const {
    if (decoder.out_dim() != kNumEdgeClasses) throw nn::ShapeError("edge classifier decoder must emit 3 logits");
    if (!hop2.edge_update || decoder.in_dim() != hop2.edge_update->out_dim()) {
      throw nn::ShapeError("edge classifier decoder input must match the final edge embedding");
    }
  }
};

/// Network-ready view of a proximity graph. Node i is graph.plane_ids()[i]; edge e is the
/// e-th proximity edge of the graph.
struct EdgeGraphInput {
  nn::Matrix node_feats;
  nn::Matrix edge_feats;
  nn::MessageGraph graph;
  std::vector<std::size_t> edge_index;  // index into SceneGraph::edges()
  std::vector<std::pair<NodeId, NodeId>> edge_nodes;
};

inline EdgeGraphInput prepare_edge_input(const SceneGraph& g, const FeatureConfig& fc) {
  EdgeGraphInput in;
  const auto ids = g.plane_ids();
  std::map<NodeId, int> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<int>(i);
  std::vector<FeatureRow> rows;
  if (!ids.empty()) {
    const auto feats = localize_features(g);
    for (NodeId id : ids) rows.push_back(node_row(feats.at(id), fc.meters_scale));
  }
  const auto order = canonical_order(rows);
  std::vector<int> rank(rows.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);

  std::vector<std::pair<int, int>> edges;
  std::vector<std::array<double, kEdgeDim>> erows;
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const auto& edge = g.edges()[e];
    if (edge.kind != EdgeKind::proximity) continue;
    const int a = index.at(edge.src), b = index.at(edge.dst);
    edges.emplace_back(a, b);
    erows.push_back(edge_row(*g.node(edge.src).plane, rows[static_cast<std::size_t>(a)], *g.node(edge.dst).plane,
                             rows[static_cast<std::size_t>(b)], fc.meters_scale));
    in.edge_index.push_back(e);
    in.edge_nodes.emplace_back(edge.src, edge.dst);
  }
  in.node_feats = rows_to_matrix(rows);
  in.edge_feats.resize(static_cast<Eigen::Index>(erows.size()), kEdgeDim);
  for (std::size_t e = 0; e < erows.size(); ++e) {
    for (int c = 0; c < kEdgeDim; ++c) in.edge_feats(static_cast<Eigen::Index>(e), c) = erows[e][static_cast<std::size_t>(c)];
  }
  in.graph = nn::make_undirected_message_graph(static_cast<int>(ids.size()), edges, rank);
  return in;
}

/// Disjoint union of several graphs, used to batch buildings into one forward pass.
inline EdgeGraphInput union_inputs(const std::vector<const EdgeGraphInput*>& parts) {
  EdgeGraphInput out;
  Eigen::Index nodes = 0, edges = 0;
  for (const auto* p : parts) {
    nodes += p->node_feats.rows();
    edges += p->edge_feats.rows();
  }
  out.node_feats.resize(nodes, kNodeDim);
  out.edge_feats.resize(edges, kEdgeDim);
  int node_off = 0, edge_off = 0;
  for (const auto* p : parts) {
    out.node_feats.middleRows(node_off, p->node_feats.rows()) = p->node_feats;
    out.edge_feats.middleRows(edge_off, p->edge_feats.rows()) = p->edge_feats;
    for (std::size_t m = 0; m < p->graph.msg_src.size(); ++m) {
      out.graph.msg_src.push_back(p->graph.msg_src[m] + node_off);
      out.graph.msg_dst.push_back(p->graph.msg_dst[m] + node_off);
      out.graph.msg_edge.push_back(p->graph.msg_edge[m] + edge_off);
    }
    for (std::size_t e = 0; e < p->graph.edge_a.size(); ++e) {
      out.graph.edge_a.push_back(p->graph.edge_a[e] + node_off);
      out.graph.edge_b.push_back(p->graph.edge_b[e] + node_off);
    }
    node_off += static_cast<int>(p->node_feats.rows());
    edge_off += static_cast<int>(p->edge_feats.rows());
  }
  out.graph.num_nodes = node_off;
  return out;
}

/// E × 3 logits.
inline nn::Var ggnn_logits(nn::Tape& tape, const GGnnModel& model, const EdgeGraphInput& in) {
  nn::Var nodes = tape.constant(in.node_feats);
  nn::Var edges = tape.constant(in.edge_feats);
  auto h1 = nn::message_passing_forward(tape, model.hop1, in.graph, nodes, edges);
  auto h2 = nn::message_passing_forward(tape, model.hop2, in.graph, h1.nodes, h1.edges);
  return nn::mlp_forward(tape, model.decoder, *h2.edges);
}

struct EdgePrediction {
  EdgeClass label = EdgeClass::none;
  ClassProbs probs{};
};

/// Argmax; ties go to the lowest class index, i.e. toward none.
inline EdgeClass argmax_class(const ClassProbs& p) {
  int best = 0;
  for (int c = 1; c < kNumEdgeClasses; ++c) {
    if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)]) best = c;
  }
  return static_cast<EdgeClass>(best);
}

inline std::vector<EdgePrediction> predictions_from_logits(const nn::Matrix& logits) {
  const nn::Matrix probs = nn::Tape::softmax_rows(logits);
  std::vector<EdgePrediction> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    auto& p = out[static_cast<std::size_t>(r)];
    for (int c = 0; c < kNumEdgeClasses; ++c) p.probs[static_cast<std::size_t>(c)] = probs(r, c);
    p.label = argmax_class(p.probs);
  }
  return out;
}

/// Keyed by index into graph.edges(); only proximity edges are classified.
inline std::map<std::size_t, EdgePrediction> classify_edges(const GGnnModel& model, const SceneGraph& graph) {
  model.feature_config.check_compatible(true);
  const EdgeGraphInput in = prepare_edge_input(graph, model.feature_config);
  std::map<std::size_t, EdgePrediction> out;
  if (in.edge_index.empty()) return out;
  nn::Tape tape;
  const auto preds = predictions_from_logits(tape.value(ggnn_logits(tape, model, in)));
  for (std::size_t e = 0; e < preds.size(); ++e) out[in.edge_index[e]] = preds[e];
  return out;
}

/// Ground-truth class of each proximity edge of a graph built on sample.observed (node id =
/// index in sample.observed). same_wall wins over same_room.
inline std::vector<int> edge_labels(const BuildingSample& sample, const EdgeGraphInput& in) {
  const auto& gt = sample.ground_truth;
  std::map<NodeId, NodeId> room_of, wall_of;
  for (NodeId r : gt.ids_of(NodeKind::room)) {
    for (NodeId p : gt.members_of(r)) room_of[p] = r;
  }
  for (NodeId w : gt.ids_of(NodeKind::wall)) {
    for (NodeId p : gt.members_of(w)) wall_of[p] = w;
  }
  auto same = [](const std::map<NodeId, NodeId>& m, NodeId a, NodeId b) {
    auto ia = m.find(a), ib = m.find(b);
    return ia != m.end() && ib != m.end() && ia->second == ib->second;
  };
  std::vector<int> labels;
  labels.reserve(in.edge_nodes.size());
  for (const auto& [a, b] : in.edge_nodes) {
    const NodeId ga = sample.observed.at(static_cast<std::size_t>(a)).gt_id;
    const NodeId gb = sample.observed.at(static_cast<std::size_t>(b)).gt_id;
    if (same(wall_of, ga, gb)) {
      labels.push_back(static_cast<int>(EdgeClass::same_wall));
    } else if (same(room_of, ga, gb)) {
      labels.push_back(static_cast<int>(EdgeClass::same_room));
    } else {
      labels.push_back(static_cast<int>(EdgeClass::none));
    }
  }
  return labels;
}

struct LabeledEdgeGraph {
  EdgeGraphInput input;
  std::vector<int> labels;
};

inline LabeledEdgeGraph make_labeled_edge_graph(const BuildingSample& s, int k, const FeatureConfig& fc) {
  LabeledEdgeGraph out;
  const auto planes = s.observed_planes();
  if (planes.size() < 2) return out;
  out.input = prepare_edge_input(build_proximity_graph(planes, k), fc);
  out.labels = edge_labels(s, out.input);
  return out;
}

struct TrainConfig {
  int epochs = 60;
  double lr = 1e-3;
  int batch = 16;
  std::uint64_t seed = 0;
  /// Epochs without validation improvement before stopping; 0 disables early stopping.
  int patience = 15;
  double val_fraction = 0.1;
  int threads = 1;
  int hidden = 64;
  int knn_k = 10;
  FeatureConfig features;
  /// Called after every epoch with (epoch, train_loss, val_loss).
  std::function<void(int, double, double)> on_epoch;
};

struct TrainingReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double initial_train_loss = 0.0;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  /// Classifier only: inverse-frequency class weights (mean 1) used in the loss.
  std::vector<double> class_weights;
};

/// Train/validation split of n items: a seeded shuffle, validation takes the tail. A single
/// item serves as both.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                                  std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  if (n <= 1) return {idx, idx};
  std::size_t n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n)));
  n_val = std::min(std::max<std::size_t>(n_val, val_fraction > 0.0 ? 1 : 0), n - 1);
  std::vector<std::size_t> train(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> val(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  if (val.empty()) val = train;
  return {train, val};
}

namespace detail {

/// Weighted cross-entropy over a set of graphs; optionally accumulates parameter gradients.
/// Chunks run on private tapes and are summed in chunk order.
inline double ggnn_batch_loss(const GGnnModel& model, const std::vector<const LabeledEdgeGraph*>& batch,
                              const std::vector<double>& weights, int threads, std::vector<nn::Matrix>* grads) {
  double wsum = 0.0;
  for (const auto* g : batch) {
    for (int y : g->labels) wsum += weights[static_cast<std::size_t>(y)];
  }
  if (wsum <= 0.0) return 0.0;
  const int n_chunks = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
  std::vector<double> losses(static_cast<std::size_t>(n_chunks), 0.0);
  std::vector<std::vector<nn::Matrix>> chunk_grads(static_cast<std::size_t>(n_chunks));
  const auto params = model.parameters();
  parallel_chunks(n_chunks, threads, [&](int c) {
    std::vector<const EdgeGraphInput*> parts;
    std::vector<int> labels;
    for (std::size_t i = static_cast<std::size_t>(c); i < batch.size(); i += static_cast<std::size_t>(n_chunks)) {
      if (batch[i]->labels.empty()) continue;
      parts.push_back(&batch[i]->input);
      labels.insert(labels.end(), batch[i]->labels.begin(), batch[i]->labels.end());
    }
    if (parts.empty()) return;
    const EdgeGraphInput in = union_inputs(parts);
    nn::Tape tape;
    nn::Var loss = tape.weighted_cross_entropy(ggnn_logits(tape, model, in), labels, weights, wsum);
    losses[static_cast<std::size_t>(c)] = tape.value(loss)(0, 0);
    if (grads) {
      tape.backward(loss);
      tape.accumulate_param_grads(params, chunk_grads[static_cast<std::size_t>(c)]);
    }
  });
  double total = 0.0;
  for (int c = 0; c < n_chunks; ++c) {
    total += losses[static_cast<std::size_t>(c)];
    if (!grads) continue;
    auto& cg = chunk_grads[static_cast<std::size_t>(c)];
    if (cg.empty()) continue;
    if (grads->empty()) {
      *grads = cg;
    } else {
      for (std::size_t k = 0; k < cg.size(); ++k) (*grads)[k] += cg[k];
    }
  }
  return total;
}

inline double ggnn_dataset_loss(const GGnnModel& model, const std::vector<LabeledEdgeGraph>& data,
                                const std::vector<std::size_t>& idx, const std::vector<double>& weights, int batch,
                                int threads) {
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(batch)) {
    std::vector<const LabeledEdgeGraph*> b;
    double w = 0.0;
    for (std::size_t i = s; i < std::min(idx.size(), s + static_cast<std::size_t>(batch)); ++i) {
      b.push_back(&data[idx[i]]);
      for (int y : data[idx[i]].labels) w += weights[static_cast<std::size_t>(y)];
    }
    num += ggnn_batch_loss(model, b, weights, threads, nullptr) * w;
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

/// Inverse class frequency, rescaled so the weights of present classes average to 1.
inline std::vector<double> inverse_frequency_weights(const std::vector<LabeledEdgeGraph>& data,
                                                     const std::vector<std::size_t>& idx) {
  std::vector<double> count(kNumEdgeClasses, 0.0);
  double total = 0.0;
  for (std::size_t i : idx) {
    for (int y : data[i].labels) {
      count[static_cast<std::size_t>(y)] += 1.0;
      total += 1.0;
    }
  }
  std::vector<double> w(kNumEdgeClasses, 0.0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumEdgeClasses; ++c) {
    if (count[static_cast<std::size_t>(c)] > 0.0) {
      w[static_cast<std::size_t>(c)] = total / count[static_cast<std::size_t>(c)];
      sum += w[static_cast<std::size_t>(c)];
      ++present;
    }
  }
  for (auto& x : w) x = present > 0 ? x * present / sum : 1.0;
  return w;
}

struct EdgeClassifierResult {
  GGnnModel model;
  TrainingReport report;
};

inline EdgeClassifierResult train_edge_classifier(const std::vector<LabeledEdgeGraph>& data, const TrainConfig& cfg) {
  std::size_t usable = 0;
  for (const auto& d : data) usable += d.labels.empty() ? 0 : 1;
  if (usable == 0) throw DatasetError("train_edge_classifier: empty dataset");
  std::mt19937_64 rng(cfg.seed);
  EdgeClassifierResult res;
  res.model = GGnnModel::init(cfg.hidden, cfg.features, rng);
  auto [train, val] = split_indices(data.size(), cfg.val_fraction, rng);
  res.report.n_train = train.size();
  res.report.n_val = val.size();
  const auto weights = inverse_frequency_weights(data, train);
  res.report.class_weights = weights;
  const int batch = std::max(1, cfg.batch);

  nn::AdamState adam;
  adam.lr = cfg.lr;
  auto params = res.model.parameters();
  res.report.initial_train_loss = detail::ggnn_dataset_loss(res.model, data, train, weights, batch, cfg.threads);
  GGnnModel best = res.model;
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < train.size(); s += static_cast<std::size_t>(batch)) {
      std::vector<const LabeledEdgeGraph*> b;
      double w = 0.0;
      for (std::size_t i = s; i < std::min(train.size(), s + static_cast<std::size_t>(batch)); ++i) {
        b.push_back(&data[train[i]]);
        for (int y : data[train[i]].labels) w += weights[static_cast<std::size_t>(y)];
      }
      std::vector<nn::Matrix> grads;
      const double loss = detail::ggnn_batch_loss(res.model, b, weights, cfg.threads, &grads);
      if (grads.empty()) continue;
      nn::adam_step(adam, params, grads);
      num += loss * w;
      den += w;
    }
    const double tl = den > 0.0 ? num / den : 0.0;
    const double vl = detail::ggnn_dataset_loss(res.model, data, val, weights, batch, cfg.threads);
    res.report.train_loss.push_back(tl);
    res.report.val_loss.push_back(vl);
    if (cfg.on_epoch) cfg.on_epoch(epoch, tl, vl);
    if (vl < res.report.best_val_loss) {
      res.report.best_val_loss = vl;
      res.report.best_epoch = epoch;
      best = res.model;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  res.model = best;
  return res;
}

inline EdgeClassifierResult train_edge_classifier(const std::vector<BuildingSample>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw DatasetError("train_edge_classifier: empty dataset");
  std::vector<LabeledEdgeGraph> data;
  data.reserve(dataset.size());
  for (const auto& s : dataset) data.push_back(make_labeled_edge_graph(s, cfg.knn_k, cfg.features));
  return train_edge_classifier(data, cfg);
}

/// Pooled predictions and labels over a set of buildings.
inline EdgeMetrics evaluate_edge_classifier(const GGnnModel& model, const std::vector<LabeledEdgeGraph>& data) {
  std::vector<int> pred, truth;
  std::vector<ClassProbs> probs;
  for (const auto& d : data) {
    if (d.labels.empty()) continue;
    nn::Tape tape;
    const auto p = predictions_from_logits(tape.value(ggnn_logits(tape, model, d.input)));
    for (std::size_t e = 0; e < p.size(); ++e) {
      pred.push_back(static_cast<int>(p[e].label));
      probs.push_back(p[e].probs);
      truth.push_back(d.labels[e]);
    }
  }
  return evaluate_edges(pred, probs, truth);
}

}  // namespace scenefactor
