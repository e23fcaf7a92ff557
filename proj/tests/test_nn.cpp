#include "scenefactor/nn/adam.hpp"
#include "scenefactor/nn/layers.hpp"
#include "scenefactor/nn/tape.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

using namespace scenefactor::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Builds the loss on a fresh tape; must read parameters through tape.param / tape.input.
using LossFn = std::function<Var(Tape&)>;

double eval_loss(const LossFn& f) {
  Tape t;
  return t.value(f(t))(0, 0);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5}); }

// Worst relative error between tape gradients of `params` and central differences with h = 1e-5.
// Coordinates where the one-sided slopes disagree straddle a relu kink and are skipped.
struct KinkCount {
  std::size_t total = 0, kinks = 0;
};

double max_grad_error(const LossFn& f, const std::vector<Matrix*>& params, KinkCount& kc) {
  Tape t;
  const Var out = f(t);
  const double f0 = t.value(out)(0, 0);
  t.backward(out);
  std::vector<const Matrix*> cp(params.begin(), params.end());
  std::vector<Matrix> grads;
  t.accumulate_param_grads(cp, grads);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k]->size(); ++i) {
      double& x = params[k]->data()[i];
      const double x0 = x;
      x = x0 + h;
      const double fp = eval_loss(f);
      x = x0 - h;
      const double fm = eval_loss(f);
      x = x0;
      ++kc.total;
      const double up = (fp - f0) / h, down = (f0 - fm) / h;
      if (std::abs(up - down) > 1e-3 * std::max(1.0, std::abs(up))) {
        ++kc.kinks;
        continue;
      }
      worst = std::max(worst, rel_err(grads[k].data()[i], (fp - fm) / (2 * h)));
    }
  }
  return worst;
}

MessageGraph random_graph(int n, std::mt19937_64& rng) {
  std::vector<std::pair<int, int>> edges;
  std::bernoulli_distribution keep(0.5);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (keep(rng)) edges.emplace_back(a, b);
    }
  }
  std::vector<int> rank(static_cast<std::size_t>(n));
  std::iota(rank.begin(), rank.end(), 0);
  return make_undirected_message_graph(n, edges, rank);
}

MessagePassingLayerParams random_mp(Eigen::Index nd, Eigen::Index ed, Eigen::Index h, std::mt19937_64& rng) {
  MessagePassingLayerParams p;
  p.message = make_mlp({2 * nd + ed, h, h}, Activation::relu, Activation::relu, rng);
  p.node_update = make_mlp({nd + h, h}, Activation::relu, Activation::relu, rng);
  p.edge_update = make_mlp({ed + 2 * h, h}, Activation::relu, Activation::relu, rng);
  // Nonzero biases keep pre-activations off the relu kink.
  std::vector<Matrix*> ps;
  p.collect(ps);
  for (std::size_t k = 1; k < ps.size(); k += 2) *ps[k] = random_matrix(1, ps[k]->cols(), rng, 0.1);
  return p;
}

}  // namespace

TEST(Dense, IdentityAndRelu) {
  DenseLayerParams p;
  p.weights = Matrix::Identity(2, 2);
  p.bias = Matrix::Zero(1, 2);
  EXPECT_EQ(dense_forward(p, Vector::Constant(2, 3.5)), Vector::Constant(2, 3.5));
  p.activation = Activation::relu;
  const Vector y = dense_forward(p, Vector{{-1.0, 2.0}});
  EXPECT_EQ(y, (Vector{{0.0, 2.0}}));
  EXPECT_THROW(dense_forward(p, Vector::Zero(3)), ShapeError);
}

TEST(Dense, MatchesNaiveLoop) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    DenseLayerParams p;
    p.weights = random_matrix(5, 7, rng);
    p.bias = random_matrix(1, 5, rng);
    const Matrix x = random_matrix(1, 7, rng);
    const Vector y = dense_forward(p, Vector(x.row(0).transpose()));
    for (int r = 0; r < 5; ++r) {
      double s = p.bias(0, r);
      for (int c = 0; c < 7; ++c) s += p.weights(r, c) * x(0, c);
      EXPECT_NEAR(y(r), s, 1e-12);
    }
    // Tape path agrees with the plain one.
    Tape t;
    Var v = dense_forward(t, p, t.constant(x));
    for (int r = 0; r < 5; ++r) EXPECT_NEAR(t.value(v)(0, r), y(r), 1e-12);
  }
}

TEST(Tape, HalfSquaredNormGradientIsInput) {
  std::mt19937_64 rng(2);
  Tape t;
  const Matrix x = random_matrix(3, 4, rng);
  Var v = t.input(x);
  t.backward(t.half_squared_norm(v));
  EXPECT_EQ(t.grad(v), x);
}

TEST(Tape, CrossEntropyAtCertainTrueClassHasZeroGradient) {
  Tape t;
  Matrix l(1, 3);
  l << 0.0, 800.0, 0.0;
  Var v = t.input(l);
  Var loss = t.weighted_cross_entropy(v, {1}, {1.0, 1.0, 1.0});
  EXPECT_EQ(t.value(loss)(0, 0), 0.0);
  t.backward(loss);
  EXPECT_EQ(t.grad(v), Matrix::Zero(1, 3));
}

TEST(Losses, PlainValues) {
  EXPECT_NEAR(cross_entropy(Vector::Zero(3), 2, Vector::Ones(3)), std::log(3.0), 1e-15);
  EXPECT_EQ(mse(Vector{{1.0, 2.0}}, Vector{{1.0, 2.0}}), 0.0);
  EXPECT_DOUBLE_EQ(mse(Vector{{0.0, 0.0}}, Vector{{3.0, 4.0}}), 12.5);
  EXPECT_THROW(cross_entropy(Vector::Zero(3), 3, Vector::Ones(3)), ShapeError);

  Tape t;
  Var ce = t.weighted_cross_entropy(t.constant(Matrix::Zero(4, 3)), {0, 1, 2, 0}, {1.0, 1.0, 1.0});
  EXPECT_NEAR(t.value(ce)(0, 0), std::log(3.0), 1e-15);
  Matrix target(1, 2);
  target << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(t.value(t.mse(t.constant(Matrix::Zero(1, 2)), target))(0, 0), 12.5);
}

TEST(Tape, WeightedCrossEntropyMatchesPlainDefinition) {
  std::mt19937_64 rng(3);
  const Matrix l = random_matrix(5, 3, rng);
  const std::vector<int> y{0, 2, 1, 1, 0};
  const std::vector<double> w{0.5, 2.0, 1.5};
  Tape t;
  const double got = t.value(t.weighted_cross_entropy(t.constant(l), y, w))(0, 0);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 5; ++i) {
    num += cross_entropy(l.row(i).transpose(), y[static_cast<std::size_t>(i)], Vector::Map(w.data(), 3));
    den += w[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
  }
  EXPECT_NEAR(got, num / den, 1e-14);
}

TEST(GradientCheck, DenseStacks) {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  KinkCount kc;
  for (int trial = 0; trial < 100; ++trial) {
    const Activation last = trial % 2 ? Activation::relu : Activation::identity;
    Mlp m = make_mlp({4, 6, 3}, Activation::relu, last, rng);
    for (auto& l : m.layers) l.bias = random_matrix(1, l.out_dim(), rng, 0.1);
    Matrix x = random_matrix(5, 4, rng);
    std::vector<Matrix*> ps;
    m.collect(ps);
    ps.push_back(&x);
    const Matrix target = random_matrix(5, 3, rng);
    LossFn f = [&](Tape& t) { return t.mse(mlp_forward(t, m, t.param(x)), target); };
    worst = std::max(worst, max_grad_error(f, ps, kc));
  }
  EXPECT_LT(worst, 1e-4);
  EXPECT_LE(kc.kinks * 100, kc.total);
}

TEST(GradientCheck, MessagePassingWithCrossEntropy) {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  KinkCount kc;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + trial % 3;
    const MessageGraph g = random_graph(n, rng);
    MessagePassingLayerParams mp = random_mp(2, 2, 4, rng);
    Mlp dec = make_mlp({4, 3}, Activation::relu, Activation::identity, rng);
    dec.layers[0].bias = random_matrix(1, 3, rng, 0.1);
    Matrix nf = random_matrix(n, 2, rng);
    Matrix ef = random_matrix(g.num_edges(), 2, rng);
    std::vector<Matrix*> ps;
    mp.collect(ps);
    dec.collect(ps);
    ps.push_back(&nf);
    ps.push_back(&ef);
    std::vector<int> labels;
    for (int e = 0; e < g.num_edges(); ++e) labels.push_back(e % 3);
    LossFn f = [&](Tape& t) {
      auto out = message_passing_forward(t, mp, g, t.param(nf), t.param(ef));
      // Node head keeps the loss defined on edgeless graphs.
      Var node_logits = mlp_forward(t, dec, out.nodes);
      Var l = t.weighted_cross_entropy(node_logits, std::vector<int>(static_cast<std::size_t>(n), 1), {1.0, 2.0, 0.5});
      if (g.num_edges() == 0) return l;
      Var el = mlp_forward(t, dec, *out.edges);
      return t.add(l, t.weighted_cross_entropy(el, labels, {0.3, 1.0, 2.0}));
    };
    worst = std::max(worst, max_grad_error(f, ps, kc));
  }
  EXPECT_LT(worst, 1e-4);
  EXPECT_LE(kc.kinks * 100, kc.total);
}

TEST(GradientCheck, GatherSegmentMeanConcatScale) {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  KinkCount kc;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = random_matrix(4, 3, rng);
    Matrix b = random_matrix(6, 2, rng);
    std::vector<int> idx{3, 0, 0, 2, 1, 3};
    std::vector<int> seg{0, 2, 0, 2, 2, 1};
    std::vector<Matrix*> ps{&a, &b};
    LossFn f = [&](Tape& t) {
      Var g = t.gather_rows(t.param(a), idx);
      Var c = t.concat_cols({g, t.scale(t.param(b), -1.7)});
      Var s = t.segment_mean(c, seg, 4);
      return t.half_squared_norm(t.add(s, s));
    };
    worst = std::max(worst, max_grad_error(f, ps, kc));
  }
  EXPECT_LT(worst, 1e-4);
  EXPECT_LE(kc.kinks * 100, kc.total);
}

TEST(Tape, InputGradientsAvailableOnRequest) {
  Tape t;
  Matrix x(1, 2);
  x << 1.0, -2.0;
  Var in = t.input(x);
  Var c = t.constant(x);
  t.backward(t.half_squared_norm(t.add(in, c)));
  EXPECT_EQ(t.grad(in), 2.0 * x);
  EXPECT_EQ(t.grad(c).size(), 0);
}

TEST(Tape, ShapeErrors) {
  Tape t;
  EXPECT_THROW(t.linear(t.constant(Matrix::Zero(1, 3)), t.constant(Matrix::Zero(2, 2)), t.constant(Matrix::Zero(1, 2))),
               ShapeError);
  EXPECT_THROW(t.add(t.constant(Matrix::Zero(1, 3)), t.constant(Matrix::Zero(1, 2))), ShapeError);
  EXPECT_THROW(t.gather_rows(t.constant(Matrix::Zero(2, 2)), {2}), ShapeError);
  EXPECT_THROW(t.segment_mean(t.constant(Matrix::Zero(2, 2)), {0}, 1), ShapeError);
  EXPECT_THROW(t.weighted_cross_entropy(t.constant(Matrix::Zero(1, 3)), {3}, {1, 1, 1}), ShapeError);
}

TEST(MessagePassing, NoEdgesGivesNodeUpdateOfZeroAggregate) {
  std::mt19937_64 rng(7);
  MessagePassingLayerParams mp = random_mp(3, 2, 4, rng);
  const MessageGraph g = make_undirected_message_graph(3, {}, {0, 1, 2});
  const Matrix nf = random_matrix(3, 3, rng);
  Tape t;
  auto out = message_passing_forward(t, mp, g, t.constant(nf), t.constant(Matrix(0, 2)));
  for (int i = 0; i < 3; ++i) {
    Vector in(7);
    in << nf.row(i).transpose(), Vector::Zero(4);
    EXPECT_EQ(Vector(t.value(out.nodes).row(i).transpose()), mlp_forward(mp.node_update, in));
  }
  EXPECT_EQ(t.value(*out.edges).rows(), 0);
}

TEST(MessagePassing, MissingFeaturesRejected) {
  std::mt19937_64 rng(8);
  MessagePassingLayerParams mp = random_mp(3, 2, 4, rng);
  const MessageGraph g = make_undirected_message_graph(3, {{0, 1}}, {0, 1, 2});
  Tape t;
  EXPECT_THROW(message_passing_forward(t, mp, g, t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(1, 2))),
               ShapeError);
  EXPECT_THROW(message_passing_forward(t, mp, g, t.constant(Matrix::Zero(3, 3)), t.constant(Matrix::Zero(0, 2))),
               ShapeError);
  EXPECT_THROW(message_passing_forward(t, mp, g, t.constant(Matrix::Zero(3, 3)), std::nullopt), ShapeError);
}

TEST(MessagePassing, StarWithIdenticalLeaves) {
  std::mt19937_64 rng(9);
  MessagePassingLayerParams mp = random_mp(2, 1, 5, rng);
  const MessageGraph g = make_undirected_message_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, {0, 1, 2, 3, 4});
  Matrix nf(5, 2);
  nf << 1.0, -1.0, 0.3, 0.4, 0.3, 0.4, 0.3, 0.4, 0.3, 0.4;
  Tape t;
  auto out = message_passing_forward(t, mp, g, t.constant(nf), t.constant(Matrix::Constant(4, 1, 0.5)));
  const Matrix& h = t.value(out.nodes);
  for (int i = 2; i < 5; ++i) EXPECT_EQ(h.row(i), h.row(1));
  const Matrix& e = t.value(*out.edges);
  for (int i = 1; i < 4; ++i) EXPECT_EQ(e.row(i), e.row(0));
}

TEST(MessagePassing, RelabelingPermutesOutputsBitwise) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6;
    MessagePassingLayerParams mp = random_mp(3, 2, 4, rng);
    std::vector<std::pair<int, int>> edges;
    std::bernoulli_distribution keep(0.5);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (keep(rng)) edges.emplace_back(a, b);
      }
    }
    const Matrix nf = random_matrix(n, 3, rng);
    const Matrix ef = random_matrix(static_cast<Eigen::Index>(edges.size()), 2, rng);
    // Canonical rank: node's original label, carried along by the permutation.
    std::vector<int> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    Tape t0;
    auto o0 = message_passing_forward(t0, mp, make_undirected_message_graph(n, edges, rank), t0.constant(nf),
                                      t0.constant(ef));

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);  // old -> new
    Matrix pnf(n, 3);
    std::vector<int> prank(n);
    for (int i = 0; i < n; ++i) {
      pnf.row(perm[i]) = nf.row(i);
      prank[static_cast<std::size_t>(perm[i])] = rank[static_cast<std::size_t>(i)];
    }
    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::pair<int, int>> pedges;
    Matrix pef(ef.rows(), 2);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto [a, b] = edges[order[k]];
      pedges.emplace_back(perm[b], perm[a]);
      pef.row(static_cast<Eigen::Index>(k)) = ef.row(static_cast<Eigen::Index>(order[k]));
    }
    Tape t1;
    auto o1 = message_passing_forward(t1, mp, make_undirected_message_graph(n, pedges, prank), t1.constant(pnf),
                                      t1.constant(pef));
    for (int i = 0; i < n; ++i) EXPECT_EQ(t1.value(o1.nodes).row(perm[i]), t0.value(o0.nodes).row(i));
    for (std::size_t k = 0; k < order.size(); ++k) {
      EXPECT_EQ(t1.value(*o1.edges).row(static_cast<Eigen::Index>(k)),
                t0.value(*o0.edges).row(static_cast<Eigen::Index>(order[k])));
    }
  }
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsSteps) {
  std::mt19937_64 rng(11);
  Matrix p = random_matrix(2, 3, rng);
  const Matrix p0 = p;
  AdamState s;
  for (int i = 1; i <= 5; ++i) {
    adam_step(s, {&p}, {Matrix::Zero(2, 3)});
    EXPECT_EQ(s.step, i);
  }
  EXPECT_EQ(p, p0);
}

TEST(Adam, ConstantGradientStepApproachesLr) {
  Matrix p = Matrix::Zero(1, 3);
  Matrix g(1, 3);
  g << 0.5, -3.0, 1e-3;
  AdamState s;
  s.lr = 0.01;
  Matrix prev = p;
  for (int i = 0; i < 2000; ++i) {
    prev = p;
    adam_step(s, {&p}, {g});
  }
  const Matrix step = p - prev;
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(step(0, c), -s.lr * (g(0, c) > 0 ? 1.0 : -1.0), 1e-4 * s.lr);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  // With bias correction the first update is lr * g / (|g| + eps).
  Matrix p = Matrix::Zero(1, 2);
  Matrix g(1, 2);
  g << 2.0, -0.25;
  AdamState s;
  s.lr = 0.1;
  adam_step(s, {&p}, {g});
  EXPECT_NEAR(p(0, 0), -0.1, 1e-8);
  EXPECT_NEAR(p(0, 1), 0.1, 1e-7);
  EXPECT_THROW(adam_step(s, {&p}, {}), ShapeError);
}
