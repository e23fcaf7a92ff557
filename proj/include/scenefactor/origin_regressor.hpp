// Origin regressors: one message-passing hop from the member planes into a virtual concept
// node, then a dense decoder to a local (x, y).
#pragma once

#include "scenefactor/edge_classifier.hpp"
#include "scenefactor/features.hpp"
#include "scenefactor/nn/adam.hpp"
#include "scenefactor/nn/layers.hpp"
#include "scenefactor/parallel.hpp"
#include "scenefactor/synth.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenefactor {

class ArityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FGnnModel {
  NodeKind kind = NodeKind::room;
  FeatureConfig feature_config;
  int hidden = 64;
  nn::MessagePassingLayerParams encoder;
  nn::Mlp decoder;

  static FGnnModel init(NodeKind kind, int hidden, const FeatureConfig& fc, std::mt19937_64& rng) {
    if (kind == NodeKind::plane) throw std::invalid_argument("origin regressor kind must be room or wall");
    using nn::Activation;
    FGnnModel m;
    m.kind = kind;
    m.feature_config = fc;
    m.hidden = hidden;
    const Eigen::Index h = hidden, nd = fc.node_dim;
    m.encoder.message = nn::make_mlp({2 * nd, h, h}, Activation::relu, Activation::relu, rng);
    m.encoder.node_update = nn::make_mlp({nd + h, h}, Activation::relu, Activation::relu, rng);
    m.decoder = nn::make_mlp({h, h, h, 2}, Activation::relu, Activation::identity, rng);
    return m;
  }

  std::vector<nn::Matrix*> parameters() {
    std::vector<nn::Matrix*> out;
    encoder.collect(out);
    decoder.collect(out);
    return out;
  }
  std::vector<const nn::Matrix*> parameters() const {
    std::vector<const nn::Matrix*> out;
    encoder.collect(out);
    decoder.collect(out);
    return out;
  }

  void validate() const {
    if (decoder.out_dim() != 2) throw nn::ShapeError("origin regressor decoder must emit 2 outputs");
    if (decoder.in_dim() != encoder.node_update.out_dim()) {
      throw nn::ShapeError("origin regressor decoder input must match the concept embedding");
    }
  }
};

inline void check_arity(NodeKind kind, std::size_t n_planes) {
  if (kind == NodeKind::wall && n_planes != 2) {
    throw ArityError("wall origin needs exactly 2 planes, got " + std::to_string(n_planes));
  }
  if (n_planes < 2) throw ArityError("room origin needs at least 2 planes, got " + std::to_string(n_planes));
}

/// Star-graph forward pass for K concepts at once. Row i of `planes` belongs to concept
/// seg[i]; the concept node itself has zero features. Rows must be in canonical order within
/// each concept. Returns K × 2 scaled local offsets.
inline nn::Var fgnn_forward(nn::Tape& tape, const FGnnModel& model, nn::Var planes, const std::vector<int>& seg,
                            int n_concepts) {
  const Eigen::Index n = tape.value(planes).rows();
  const Eigen::Index nd = tape.value(planes).cols();
  if (nd != model.feature_config.node_dim) throw nn::ShapeError("origin regressor: feature width mismatch");
  nn::Var concept_dst = tape.constant(nn::Matrix::Zero(n, nd));
  nn::Var msgs = nn::mlp_forward(tape, model.encoder.message, tape.concat_cols({planes, concept_dst}));
  nn::Var agg = tape.segment_mean(msgs, seg, n_concepts);
  nn::Var concept_feats = tape.constant(nn::Matrix::Zero(n_concepts, nd));
  nn::Var h = nn::mlp_forward(tape, model.encoder.node_update, tape.concat_cols({concept_feats, agg}));
  return nn::mlp_forward(tape, model.decoder, h);
}

/// Feature rows of one concept's planes in canonical order, plus the frame they are relative to.
struct ConceptInput {
  std::vector<FeatureRow> rows;
  std::vector<int> order;  // rows[r] describes input plane order[r]
  Vec2 frame{0.0, 0.0};
};

inline ConceptInput concept_input(const std::vector<Plane2D>& planes, double s) {
  ConceptInput in;
  std::vector<Vec2> cs;
  cs.reserve(planes.size());
  for (const auto& p : planes) cs.push_back(p.centroid);
  in.frame = local_frame_origin(cs);
  std::vector<FeatureRow> raw;
  raw.reserve(planes.size());
  for (const auto& p : planes) raw.push_back(node_row(local_feature(p, in.frame), s));
  in.order = canonical_order(raw);
  for (int i : in.order) in.rows.push_back(raw[static_cast<std::size_t>(i)]);
  return in;
}

inline Origin2D infer_origin(const FGnnModel& model, const std::vector<Plane2D>& planes) {
  check_arity(model.kind, planes.size());
  model.feature_config.check_compatible(false);
  const double s = model.feature_config.meters_scale;
  const ConceptInput in = concept_input(planes, s);
  nn::Tape tape;
  const nn::Matrix& y = tape.value(fgnn_forward(tape, model, tape.constant(rows_to_matrix(in.rows)),
                                                std::vector<int>(in.rows.size(), 0), 1));
  return Origin2D{in.frame + Vec2(y(0, 0), y(0, 1)) / s};
}

/// Infers every concept independently; concurrent across concepts.
inline std::vector<Origin2D> infer_origins(const FGnnModel& model, const std::vector<std::vector<Plane2D>>& concepts,
                                           int threads = 1) {
  std::vector<Origin2D> out(concepts.size());
  parallel_chunks(static_cast<int>(concepts.size()), threads,
                  [&](int i) { out[static_cast<std::size_t>(i)] = infer_origin(model, concepts[static_cast<std::size_t>(i)]); });
  return out;
}

/// A plane as an optimization variable: (theta, offset) move, centroid and length stay put.
struct PlaneState {
  PlaneParam param;
  Vec2 centroid{0.0, 0.0};
  double length = 1.0;
};

inline PlaneState plane_state(const Plane2D& p) { return {plane_to_param(p), p.centroid, p.length}; }

/// Origin as a function of plane parameters, with ∂origin/∂(theta, offset) per plane
/// (2 × 2 blocks, column order theta, offset) and ∂origin/∂centroid with the frame held fixed.
struct OriginJacobian {
  Vec2 origin{0.0, 0.0};
  std::vector<Eigen::Matrix2d> d_param;
  std::vector<Eigen::Matrix2d> d_centroid;
};

namespace detail {

/// Feature rows of plane states: the offset residual is d + n·frame so it varies with both
/// parameters while the centroid stays fixed.
inline std::vector<FeatureRow> state_rows(const std::vector<PlaneState>& planes, const Vec2& frame, double s) {
  std::vector<FeatureRow> rows;
  rows.reserve(planes.size());
  for (const auto& p : planes) {
    const Vec2 n(std::cos(p.param.theta), std::sin(p.param.theta));
    const Vec2 cl = p.centroid - frame;
    rows.push_back({n.x(), n.y(), s * (p.param.offset + n.dot(frame)), s * cl.x(), s * cl.y(), s * p.length});
  }
  return rows;
}

inline Vec2 state_frame(const std::vector<PlaneState>& planes) {
  std::vector<Vec2> cs;
  cs.reserve(planes.size());
  for (const auto& p : planes) cs.push_back(p.centroid);
  return local_frame_origin(cs);
}

}  // namespace detail

inline Vec2 origin_from_states(const FGnnModel& model, const std::vector<PlaneState>& planes) {
  check_arity(model.kind, planes.size());
  const double s = model.feature_config.meters_scale;
  const Vec2 frame = detail::state_frame(planes);
  const auto raw = detail::state_rows(planes, frame, s);
  std::vector<FeatureRow> rows;
  for (int i : canonical_order(raw)) rows.push_back(raw[static_cast<std::size_t>(i)]);
  nn::Tape tape;
  const nn::Matrix& y =
      tape.value(fgnn_forward(tape, model, tape.constant(rows_to_matrix(rows)), std::vector<int>(rows.size(), 0), 1));
  return frame + Vec2(y(0, 0), y(0, 1)) / s;
}

/// Same value as origin_from_states plus its Jacobian by reverse accumulation: one backward
/// pass per output coordinate gives ∂y/∂features, then the chain rule through the featurizer.
inline OriginJacobian origin_with_jacobian(const FGnnModel& model, const std::vector<PlaneState>& planes) {
  check_arity(model.kind, planes.size());
  const double s = model.feature_config.meters_scale;
  const Vec2 frame = detail::state_frame(planes);
  const auto raw = detail::state_rows(planes, frame, s);
  const auto order = canonical_order(raw);
  std::vector<FeatureRow> rows;
  for (int i : order) rows.push_back(raw[static_cast<std::size_t>(i)]);

  nn::Tape tape;
  nn::Var x = tape.input(rows_to_matrix(rows));
  nn::Var y = fgnn_forward(tape, model, x, std::vector<int>(rows.size(), 0), 1);
  OriginJacobian out;
  out.origin = frame + Vec2(tape.value(y)(0, 0), tape.value(y)(0, 1)) / s;
  out.d_param.assign(planes.size(), Eigen::Matrix2d::Zero());
  out.d_centroid.assign(planes.size(), Eigen::Matrix2d::Zero());
  for (int k = 0; k < 2; ++k) {
    nn::Matrix seed = nn::Matrix::Zero(1, 2);
    seed(0, k) = 1.0;
    tape.backward(y, seed);
    const nn::Matrix& g = tape.grad(x);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto i = static_cast<std::size_t>(order[r]);
      const auto ri = static_cast<Eigen::Index>(r);
      const double th = planes[i].param.theta;
      const double sn = std::sin(th), cs = std::cos(th);
      const double dtheta = g(ri, 0) * -sn + g(ri, 1) * cs + g(ri, 2) * s * (-sn * frame.x() + cs * frame.y());
      out.d_param[i](k, 0) = dtheta / s;
      out.d_param[i](k, 1) = g(ri, 2);
      out.d_centroid[i](k, 0) = g(ri, 3);
      out.d_centroid[i](k, 1) = g(ri, 4);
    }
  }
  return out;
}

struct OriginExample {
  std::vector<Plane2D> planes;
  Vec2 target{0.0, 0.0};
};

/// One example per ground-truth concept of `kind` with at least two observed members: inputs
/// are the noisy observed planes, the target is the ground-truth origin.
inline std::vector<OriginExample> origin_training_set(const std::vector<BuildingSample>& samples, NodeKind kind) {
  std::vector<OriginExample> out;
  for (const auto& s : samples) {
    std::map<NodeId, const Plane2D*> observed_of;
    for (const auto& o : s.observed) observed_of[o.gt_id] = &o.plane;
    for (NodeId c : s.ground_truth.ids_of(kind)) {
      OriginExample ex;
      for (NodeId m : s.ground_truth.members_of(c)) {
        auto it = observed_of.find(m);
        if (it != observed_of.end()) ex.planes.push_back(*it->second);
      }
      if (ex.planes.size() < 2 || (kind == NodeKind::wall && ex.planes.size() != 2)) continue;
      ex.target = s.ground_truth.node(c).origin->xy;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

/// Mean squared error (m²) of predicting the plane-centroid frame for every example.
inline double centroid_baseline_mse(const std::vector<OriginExample>& data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& ex : data) sum += (concept_input(ex.planes, 1.0).frame - ex.target).squaredNorm();
  return sum / static_cast<double>(data.size());
}

struct OriginRegressorResult {
  FGnnModel model;
  TrainingReport report;  // losses are mean squared origin error in m²
};

namespace detail {

struct PreparedOrigin {
  std::vector<FeatureRow> rows;
  Vec2 target_local{0.0, 0.0};  // scaled
};

inline double fgnn_batch_loss(const FGnnModel& model, const std::vector<const PreparedOrigin*>& batch, int threads,
                              std::vector<nn::Matrix>* grads) {
  if (batch.empty()) return 0.0;
  const double s = model.feature_config.meters_scale;
  const int n_chunks = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
  std::vector<double> losses(static_cast<std::size_t>(n_chunks), 0.0);
  std::vector<std::vector<nn::Matrix>> chunk_grads(static_cast<std::size_t>(n_chunks));
  const auto params = model.parameters();
  // Σ‖Δ‖² over the batch / K, in m² after dividing by s².
  const double norm = static_cast<double>(batch.size()) * s * s;
  parallel_chunks(n_chunks, threads, [&](int c) {
    std::vector<FeatureRow> rows;
    std::vector<int> seg;
    std::vector<Vec2> targets;
    for (std::size_t i = static_cast<std::size_t>(c); i < batch.size(); i += static_cast<std::size_t>(n_chunks)) {
      for (const auto& r : batch[i]->rows) {
        rows.push_back(r);
        seg.push_back(static_cast<int>(targets.size()));
      }
      targets.push_back(batch[i]->target_local);
    }
    nn::Matrix t(static_cast<Eigen::Index>(targets.size()), 2);
    for (std::size_t k = 0; k < targets.size(); ++k) t.row(static_cast<Eigen::Index>(k)) = targets[k].transpose();
    nn::Tape tape;
    nn::Var y = fgnn_forward(tape, model, tape.constant(rows_to_matrix(rows)), seg, static_cast<int>(targets.size()));
    nn::Var loss = tape.mse(y, t, norm);
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
    if (grads->empty()) {
      *grads = cg;
    } else {
      for (std::size_t k = 0; k < cg.size(); ++k) (*grads)[k] += cg[k];
    }
  }
  return total;
}

inline double fgnn_dataset_loss(const FGnnModel& model, const std::vector<PreparedOrigin>& data,
                                const std::vector<std::size_t>& idx, int batch, int threads) {
  double num = 0.0;
  for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(batch)) {
    std::vector<const PreparedOrigin*> b;
    for (std::size_t i = s; i < std::min(idx.size(), s + static_cast<std::size_t>(batch)); ++i) b.push_back(&data[idx[i]]);
    num += fgnn_batch_loss(model, b, threads, nullptr) * static_cast<double>(b.size());
  }
  return idx.empty() ? 0.0 : num / static_cast<double>(idx.size());
}

}  // namespace detail

inline OriginRegressorResult train_origin_regressor(const std::vector<OriginExample>& data, NodeKind kind,
                                                    const TrainConfig& cfg) {
  if (data.empty()) throw DatasetError("train_origin_regressor: empty dataset");
  const double s = cfg.features.meters_scale;
  std::vector<detail::PreparedOrigin> prepared;
  prepared.reserve(data.size());
  for (const auto& ex : data) {
    check_arity(kind, ex.planes.size());
    const ConceptInput in = concept_input(ex.planes, s);
    prepared.push_back({in.rows, s * (ex.target - in.frame)});
  }
  std::mt19937_64 rng(cfg.seed);
  OriginRegressorResult res;
  res.model = FGnnModel::init(kind, cfg.hidden, cfg.features, rng);
  auto [train, val] = split_indices(data.size(), cfg.val_fraction, rng);
  res.report.n_train = train.size();
  res.report.n_val = val.size();
  const int batch = std::max(1, cfg.batch);

  nn::AdamState adam;
  adam.lr = cfg.lr;
  auto params = res.model.parameters();
  res.report.initial_train_loss = detail::fgnn_dataset_loss(res.model, prepared, train, batch, cfg.threads);
  FGnnModel best = res.model;
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double num = 0.0;
    for (std::size_t st = 0; st < train.size(); st += static_cast<std::size_t>(batch)) {
      std::vector<const detail::PreparedOrigin*> b;
      for (std::size_t i = st; i < std::min(train.size(), st + static_cast<std::size_t>(batch)); ++i) {
        b.push_back(&prepared[train[i]]);
      }
      std::vector<nn::Matrix> grads;
      num += detail::fgnn_batch_loss(res.model, b, cfg.threads, &grads) * static_cast<double>(b.size());
      nn::adam_step(adam, params, grads);
    }
    const double tl = num / static_cast<double>(train.size());
    const double vl = detail::fgnn_dataset_loss(res.model, prepared, val, batch, cfg.threads);
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

/// rmse / mse of infer_origin against the targets.
inline OriginMetrics evaluate_origin_regressor(const FGnnModel& model, const std::vector<OriginExample>& data) {
  std::vector<Vec2> pred, truth;
  for (const auto& ex : data) {
    pred.push_back(infer_origin(model, ex.planes).xy);
    truth.push_back(ex.target);
  }
  return origin_errors(pred, truth);
}

}  // namespace scenefactor
