// Dense stacks and the edge-aware message-passing layer shared by both GNNs.
#pragma once

#include "scenefactor/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace scenefactor::nn {

enum class Activation { relu, identity, softmax_at_loss };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::softmax_at_loss: return "softmax_at_loss";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  if (s == "softmax_at_loss") return Activation::softmax_at_loss;
  throw std::invalid_argument("unknown activation: " + s);
}

struct DenseLayerParams {
  Matrix weights;  // out × in
  Matrix bias;     // 1 × out
  Activation activation = Activation::identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

/// Glorot-uniform weights, zero bias.
inline DenseLayerParams make_dense(Eigen::Index in, Eigen::Index out, Activation act, std::mt19937_64& rng) {
  DenseLayerParams p;
  p.activation = act;
  p.weights.resize(out, in);
  p.bias = Matrix::Zero(1, out);
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-a, a);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) p.weights(r, c) = u(rng);
  }
  return p;
}

inline Vector dense_forward(const DenseLayerParams& p, const Vector& x) {
  if (x.size() != p.in_dim()) throw ShapeError("dense_forward: expected input of size " + std::to_string(p.in_dim()));
  Vector y = p.weights * x + p.bias.row(0).transpose();
  if (p.activation == Activation::relu) y = y.cwiseMax(0.0);
  return y;
}

inline Var dense_forward(Tape& tape, const DenseLayerParams& p, Var x) {
  Var y = tape.linear(x, tape.param(p.weights), tape.param(p.bias));
  return p.activation == Activation::relu ? tape.relu(y) : y;
}

struct Mlp {
  std::vector<DenseLayerParams> layers;

  Eigen::Index in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  void collect(std::vector<Matrix*>& out) {
    for (auto& l : layers) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
  }
  void collect(std::vector<const Matrix*>& out) const {
    for (const auto& l : layers) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
  }
};

/// dims = {in, h1, ..., out}; hidden layers use `hidden`, the last one `last`.
inline Mlp make_mlp(const std::vector<Eigen::Index>& dims, Activation hidden, Activation last, std::mt19937_64& rng) {
  if (dims.size() < 2) throw ShapeError("make_mlp: need at least input and output sizes");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(make_dense(dims[i], dims[i + 1], i + 2 == dims.size() ? last : hidden, rng));
  }
  return m;
}

inline Var mlp_forward(Tape& tape, const Mlp& m, Var x) {
  for (const auto& l : m.layers) x = dense_forward(tape, l, x);
  return x;
}

inline Vector mlp_forward(const Mlp& m, Vector x) {
  for (const auto& l : m.layers) x = dense_forward(l, x);
  return x;
}

/// Directed message list plus the undirected edges that carry features. Messages must be
/// ordered by destination, then by the canonical rank of the source, so every node sums its
/// incoming messages in a fixed order.
struct MessageGraph {
  int num_nodes = 0;
  std::vector<int> msg_src;
  std::vector<int> msg_dst;
  /// Undirected edge index of each message; empty when the graph has no edge features.
  std::vector<int> msg_edge;
  std::vector<int> edge_a;
  std::vector<int> edge_b;

  int num_edges() const { return static_cast<int>(edge_a.size()); }
};

/// Builds both message directions for each undirected edge, sorted per the MessageGraph contract.
inline MessageGraph make_undirected_message_graph(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                                                  const std::vector<int>& node_rank) {
  MessageGraph g;
  g.num_nodes = num_nodes;
  struct Msg {
    int src, dst, edge;
  };
  std::vector<Msg> msgs;
  msgs.reserve(edges.size() * 2);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    g.edge_a.push_back(edges[e].first);
    g.edge_b.push_back(edges[e].second);
    msgs.push_back({edges[e].first, edges[e].second, static_cast<int>(e)});
    msgs.push_back({edges[e].second, edges[e].first, static_cast<int>(e)});
  }
  std::sort(msgs.begin(), msgs.end(), [&](const Msg& a, const Msg& b) {
    if (a.dst != b.dst) return a.dst < b.dst;
    return node_rank[static_cast<std::size_t>(a.src)] < node_rank[static_cast<std::size_t>(b.src)];
  });
  for (const auto& m : msgs) {
    g.msg_src.push_back(m.src);
    g.msg_dst.push_back(m.dst);
    g.msg_edge.push_back(m.edge);
  }
  return g;
}

struct MessagePassingLayerParams {
  Mlp message;      // [h_src ⊕ h_dst ⊕ e] → m
  Mlp node_update;  // [h ⊕ mean m] → h'
  std::optional<Mlp> edge_update;  // [e ⊕ h'_a ⊕ h'_b], averaged over both endpoint orders

  void collect(std::vector<Matrix*>& out) {
    message.collect(out);
    node_update.collect(out);
    if (edge_update) edge_update->collect(out);
  }
  void collect(std::vector<const Matrix*>& out) const {
    message.collect(out);
    node_update.collect(out);
    if (edge_update) edge_update->collect(out);
  }
};

struct MessagePassingOutput {
  Var nodes;
  std::optional<Var> edges;
};

/// One hop: per-message MLP, mean aggregation into each destination, node update, then an
/// endpoint-symmetric edge update.
inline MessagePassingOutput message_passing_forward(Tape& tape, const MessagePassingLayerParams& p,
                                                    const MessageGraph& g, Var node_feats,
                                                    std::optional<Var> edge_feats) {
  if (tape.value(node_feats).rows() != g.num_nodes) throw ShapeError("message_passing: missing node features");
  const bool has_edges = edge_feats.has_value();
  if (has_edges && tape.value(*edge_feats).rows() != g.num_edges()) {
    throw ShapeError("message_passing: missing edge features");
  }
  if (!has_edges && p.edge_update) throw ShapeError("message_passing: edge update needs edge features");

  Var agg;
  if (g.msg_src.empty()) {
    agg = tape.constant(Matrix::Zero(g.num_nodes, p.message.out_dim()));
  } else {
    Var hs = tape.gather_rows(node_feats, g.msg_src);
    Var hd = tape.gather_rows(node_feats, g.msg_dst);
    Var m_in = has_edges ? tape.concat_cols({hs, hd, tape.gather_rows(*edge_feats, g.msg_edge)})
                         : tape.concat_cols({hs, hd});
    Var msgs = mlp_forward(tape, p.message, m_in);
    agg = tape.segment_mean(msgs, g.msg_dst, g.num_nodes);
  }
  MessagePassingOutput out;
  out.nodes = mlp_forward(tape, p.node_update, tape.concat_cols({node_feats, agg}));

  if (p.edge_update && g.num_edges() == 0) {
    out.edges = tape.constant(Matrix(0, p.edge_update->out_dim()));
  } else if (p.edge_update) {
    const int ne = g.num_edges();
    std::vector<int> e2(static_cast<std::size_t>(2 * ne)), first(e2.size()), second(e2.size());
    for (int e = 0; e < ne; ++e) {
      const auto i = static_cast<std::size_t>(e), j = static_cast<std::size_t>(e + ne);
      e2[i] = e2[j] = e;
      first[i] = second[j] = g.edge_a[i];
      second[i] = first[j] = g.edge_b[i];
    }
    Var in = tape.concat_cols(
        {tape.gather_rows(*edge_feats, e2), tape.gather_rows(out.nodes, first), tape.gather_rows(out.nodes, second)});
    out.edges = tape.segment_mean(mlp_forward(tape, *p.edge_update, in), e2, ne);
  } else if (has_edges) {
    out.edges = edge_feats;
  }
  return out;
}

/// Weights of a list of layers must be finite for a model to be usable.
inline bool all_finite(const std::vector<const Matrix*>& ps) {
  for (const Matrix* m : ps) {
    if (!m->allFinite()) return false;
  }
  return true;
}

}  // namespace scenefactor::nn
