// Reverse-mode differentiation over row-major matrices, limited to the ops the GNNs use.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace scenefactor::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Var {
  int id = -1;
};

/// Records values in creation order, which is a topological order; backward() walks it once
/// in reverse. Rows are samples, columns are features.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix v) { return push(std::move(v), false, {}); }
  /// Leaf whose gradient is kept, e.g. input features when Jacobians are needed.
  Var input(Matrix v) { return push(std::move(v), true, {}); }
  /// Leaf bound to a parameter tensor; gradients are collected by address.
  Var param(const Matrix& p) {
    Var v = push(p, true, {});
    nodes_[static_cast<std::size_t>(v.id)].param = &p;
    return v;
  }

  const Matrix& value(Var v) const { return at(v).value; }
  const Matrix& grad(Var v) const { return at(v).grad; }

  /// x Wᵀ + b with W (out × in) and b (1 × out).
  Var linear(Var x, Var w, Var b) {
    const Matrix& X = value(x);
    const Matrix& W = value(w);
    const Matrix& B = value(b);
    if (X.cols() != W.cols() || B.rows() != 1 || B.cols() != W.rows()) {
      throw ShapeError("linear: shape mismatch (x " + shape(X) + ", W " + shape(W) + ", b " + shape(B) + ")");
    }
    // Row by row, so each output row is bitwise independent of its position in the batch.
    Matrix y(X.rows(), W.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) y.row(r).noalias() = X.row(r) * W.transpose();
    y.rowwise() += B.row(0);
    return push(std::move(y), any_grad({x, w, b}), [this, x, w, b](const Matrix& g) {
      if (needs(x)) acc(x, g * value(w));
      if (needs(w)) acc(w, g.transpose() * value(x));
      if (needs(b)) acc(b, g.colwise().sum());
    });
  }

  Var relu(Var x) {
    Matrix y = value(x).cwiseMax(0.0);
    return push(std::move(y), needs(x), [this, x](const Matrix& g) {
      acc(x, (value(x).array() > 0.0).select(g, 0.0));
    });
  }

  Var add(Var a, Var b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) throw ShapeError("add: shape mismatch");
    return push(value(a) + value(b), any_grad({a, b}), [this, a, b](const Matrix& g) {
      if (needs(a)) acc(a, g);
      if (needs(b)) acc(b, g);
    });
  }

  Var scale(Var a, double s) {
    return push(value(a) * s, needs(a), [this, a, s](const Matrix& g) { acc(a, g * s); });
  }

  Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (Var p : parts) {
      if (value(p).rows() != rows) throw ShapeError("concat_cols: row count mismatch");
      cols += value(p).cols();
    }
    Matrix y(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
      y.middleCols(c, value(p).cols()) = value(p);
      c += value(p).cols();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    bool ng = false;
    for (Var p : ps) ng = ng || needs(p);
    return push(std::move(y), ng, [this, ps](const Matrix& g) {
      Eigen::Index c0 = 0;
      for (Var p : ps) {
        const Eigen::Index n = value(p).cols();
        if (needs(p)) acc(p, g.middleCols(c0, n));
        c0 += n;
      }
    });
  }
  Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }

  /// y[i] = x[idx[i]].
  Var gather_rows(Var x, std::vector<int> idx) {
    const Matrix& X = value(x);
    Matrix y(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= X.rows()) throw ShapeError("gather_rows: index out of range");
      y.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
    }
    return push(std::move(y), needs(x), [this, x, idx = std::move(idx)](const Matrix& g) {
      Matrix gx = Matrix::Zero(value(x).rows(), value(x).cols());
      for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
      acc(x, gx);
    });
  }

  /// y[s] = mean of x rows with seg == s, summed in row order; empty segments give zero rows.
  Var segment_mean(Var x, std::vector<int> seg, int n_segments) {
    const Matrix& X = value(x);
    if (static_cast<Eigen::Index>(seg.size()) != X.rows()) throw ShapeError("segment_mean: segment ids must match rows");
    Matrix y = Matrix::Zero(n_segments, X.cols());
    std::vector<double> count(static_cast<std::size_t>(n_segments), 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      if (seg[i] < 0 || seg[i] >= n_segments) throw ShapeError("segment_mean: segment out of range");
      y.row(seg[i]) += X.row(static_cast<Eigen::Index>(i));
      count[static_cast<std::size_t>(seg[i])] += 1.0;
    }
    for (int s = 0; s < n_segments; ++s) {
      if (count[static_cast<std::size_t>(s)] > 0.0) y.row(s) /= count[static_cast<std::size_t>(s)];
    }
    return push(std::move(y), needs(x), [this, x, seg = std::move(seg), count = std::move(count)](const Matrix& g) {
      Matrix gx(value(x).rows(), value(x).cols());
      for (std::size_t i = 0; i < seg.size(); ++i) {
        gx.row(static_cast<Eigen::Index>(i)) = g.row(seg[i]) / count[static_cast<std::size_t>(seg[i])];
      }
      acc(x, gx);
    });
  }

  /// Σᵢ w[yᵢ]·(−log softmax(logitsᵢ)[yᵢ]) / normalizer; normalizer defaults to Σᵢ w[yᵢ].
  Var weighted_cross_entropy(Var logits, std::vector<int> labels, std::vector<double> class_weights,
                             double normalizer = 0.0) {
    const Matrix& L = value(logits);
    if (static_cast<Eigen::Index>(labels.size()) != L.rows()) throw ShapeError("cross_entropy: one label per row");
    if (static_cast<Eigen::Index>(class_weights.size()) != L.cols()) throw ShapeError("cross_entropy: one weight per class");
    Matrix probs = softmax_rows(L);
    double total = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int y = labels[i];
      if (y < 0 || y >= L.cols()) throw ShapeError("cross_entropy: label out of range");
      const double w = class_weights[static_cast<std::size_t>(y)];
      total += w * -log_softmax_at(L, static_cast<Eigen::Index>(i), y);
      wsum += w;
    }
    const double norm = normalizer > 0.0 ? normalizer : wsum;
    Matrix out(1, 1);
    out(0, 0) = norm > 0.0 ? total / norm : 0.0;
    return push(std::move(out), needs(logits),
                [this, logits, labels = std::move(labels), cw = std::move(class_weights), probs = std::move(probs),
                 norm](const Matrix& g) {
                  if (norm <= 0.0) return;
                  Matrix gl = probs;
                  for (std::size_t i = 0; i < labels.size(); ++i) {
                    const auto r = static_cast<Eigen::Index>(i);
                    gl(r, labels[i]) -= 1.0;
                    gl.row(r) *= cw[static_cast<std::size_t>(labels[i])];
                  }
                  acc(logits, gl * (g(0, 0) / norm));
                });
  }

  /// Σ (pred − target)² / normalizer; normalizer defaults to the element count.
  Var mse(Var pred, Matrix target, double normalizer = 0.0) {
    const Matrix& P = value(pred);
    if (P.rows() != target.rows() || P.cols() != target.cols()) throw ShapeError("mse: shape mismatch");
    const double norm = normalizer > 0.0 ? normalizer : static_cast<double>(P.size());
    Matrix diff = P - target;
    Matrix out(1, 1);
    out(0, 0) = diff.squaredNorm() / norm;
    return push(std::move(out), needs(pred), [this, pred, diff = std::move(diff), norm](const Matrix& g) {
      acc(pred, diff * (2.0 * g(0, 0) / norm));
    });
  }

  /// ½‖x‖² over all entries.
  Var half_squared_norm(Var x) {
    Matrix out(1, 1);
    out(0, 0) = 0.5 * value(x).squaredNorm();
    return push(std::move(out), needs(x), [this, x](const Matrix& g) { acc(x, value(x) * g(0, 0)); });
  }

  /// Seeds d(out) with ones (scalar outputs) and propagates to every leaf that needs a gradient.
  void backward(Var out) { backward(out, Matrix::Ones(value(out).rows(), value(out).cols())); }

  void backward(Var out, const Matrix& seed) {
    if (seed.rows() != value(out).rows() || seed.cols() != value(out).cols()) throw ShapeError("backward: seed shape");
    zero_grad();
    acc(out, seed);
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && n.needs_grad && n.grad.size() > 0) n.back(n.grad);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) n.grad.resize(0, 0);
  }

  /// Adds the gradient of every parameter leaf into grads[k], where params[k] is its tensor.
  void accumulate_param_grads(std::span<const Matrix* const> params, std::vector<Matrix>& grads) const {
    std::unordered_map<const Matrix*, std::size_t> slot;
    for (std::size_t k = 0; k < params.size(); ++k) slot.emplace(params[k], k);
    if (grads.size() != params.size()) {
      grads.resize(params.size());
      for (std::size_t k = 0; k < params.size(); ++k) grads[k] = Matrix::Zero(params[k]->rows(), params[k]->cols());
    }
    for (const auto& n : nodes_) {
      if (!n.param || n.grad.size() == 0) continue;
      auto it = slot.find(n.param);
      if (it == slot.end()) continue;
      grads[it->second] += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

  static Matrix softmax_rows(const Matrix& L) {
    Matrix p(L.rows(), L.cols());
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
      const double m = L.row(r).maxCoeff();
      double z = 0.0;
      for (Eigen::Index c = 0; c < L.cols(); ++c) z += std::exp(L(r, c) - m);
      for (Eigen::Index c = 0; c < L.cols(); ++c) p(r, c) = std::exp(L(r, c) - m) / z;
    }
    return p;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    const Matrix* param = nullptr;
    std::function<void(const Matrix&)> back;
  };

  static double log_softmax_at(const Matrix& L, Eigen::Index r, int c) {
    const double m = L.row(r).maxCoeff();
    double z = 0.0;
    for (Eigen::Index k = 0; k < L.cols(); ++k) z += std::exp(L(r, k) - m);
    return L(r, c) - m - std::log(z);
  }

  static std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

  Var push(Matrix v, bool needs_grad, std::function<void(const Matrix&)> back) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Node& at(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw std::out_of_range("tape: invalid var");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  bool needs(Var v) const { return at(v).needs_grad; }
  bool any_grad(std::initializer_list<Var> vs) const {
    for (Var v : vs) {
      if (needs(v)) return true;
    }
    return false;
  }

  template <typename Expr>
  void acc(Var v, const Expr& g) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  std::vector<Node> nodes_;
};

/// Plain-value losses, same definitions as the tape ops.
inline double cross_entropy(const Vector& logits, int label, const Vector& class_weights) {
  if (label < 0 || label >= logits.size()) throw ShapeError("cross_entropy: label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return class_weights(label) * (lse - logits(label));
}

inline double mse(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) throw ShapeError("mse: size mismatch");
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

}  // namespace scenefactor::nn
