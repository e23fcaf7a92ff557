// Plane / origin factor graph with learned room and wall factors, solved by Levenberg-Marquardt.
#pragma once

#include "scenefactor/origin_regressor.hpp"
#include "scenefactor/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenefactor {

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProblemError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using VarId = int;

enum class VariableKind { plane, origin };

struct Variable {
  VariableKind kind = VariableKind::origin;
  PlaneState plane;               // kind == plane
  Vec2 origin{0.0, 0.0};          // kind == origin
  /// Fixed variables keep their value and get no columns in the Jacobian.
  bool fixed = false;
};

enum class FactorKind { room_plane, wall_plane, plane_prior };

inline const char* to_string(FactorKind k) {
  switch (k) {
    case FactorKind::room_plane: return "room_plane";
    case FactorKind::wall_plane: return "wall_plane";
    case FactorKind::plane_prior: return "plane_prior";
  }
  return "?";
}

inline FactorKind factor_kind_from_string(const std::string& s) {
  if (s == "room_plane") return FactorKind::room_plane;
  if (s == "wall_plane") return FactorKind::wall_plane;
  if (s == "plane_prior") return FactorKind::plane_prior;
  throw std::invalid_argument("unknown factor kind: " + s);
}

struct Factor {
  FactorKind kind = FactorKind::room_plane;
  VarId concept_var = -1;              // origin variable; unused by priors
  std::vector<VarId> plane_vars;       // one entry for priors
  Eigen::Matrix2d information = Eigen::Matrix2d::Identity();
  PlaneParam measured;                 // priors only
};

struct PlanePrior {
  VarId plane_var = -1;
  PlaneParam measured;
  Eigen::Matrix2d information = Eigen::Matrix2d::Identity();
};

inline Factor make_prior_factor(const PlanePrior& p) {
  Factor f;
  f.kind = FactorKind::plane_prior;
  f.plane_vars = {p.plane_var};
  f.information = p.information;
  f.measured = p.measured;
  return f;
}

struct FactorProblem {
  std::map<VarId, Variable> variables;
  std::vector<Factor> factors;
  const FGnnModel* room_model = nullptr;
  const FGnnModel* wall_model = nullptr;

  void validate() const {
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const Factor& f = factors[i];
      const std::string where = "factor " + std::to_string(i) + " (" + to_string(f.kind) + "): ";
      const Eigen::Matrix2d& L = f.information;
      if (!L.allFinite() || std::abs(L(0, 1) - L(1, 0)) > 1e-12 * (1.0 + L.cwiseAbs().maxCoeff()) ||
          Eigen::LLT<Eigen::Matrix2d>(L).info() != Eigen::Success) {
        throw ProblemError(where + "information matrix must be symmetric positive-definite");
      }
      for (VarId v : f.plane_vars) {
        auto it = variables.find(v);
        if (it == variables.end() || it->second.kind != VariableKind::plane) {
          throw ProblemError(where + "variable " + std::to_string(v) + " is not a plane");
        }
      }
      if (f.kind == FactorKind::plane_prior) {
        if (f.plane_vars.size() != 1) throw ProblemError(where + "prior binds exactly one plane");
        continue;
      }
      auto it = variables.find(f.concept_var);
      if (it == variables.end() || it->second.kind != VariableKind::origin) {
        throw ProblemError(where + "variable " + std::to_string(f.concept_var) + " is not an origin");
      }
      const FGnnModel* m = f.kind == FactorKind::room_plane ? room_model : wall_model;
      const NodeKind want = f.kind == FactorKind::room_plane ? NodeKind::room : NodeKind::wall;
      if (!m) throw ProblemError(where + "no model loaded");
      if (m->kind != want) throw ProblemError(where + "model kind does not match the factor");
      check_arity(want, f.plane_vars.size());
    }
  }
};

/// Residual of one factor and its Jacobian blocks with respect to each bound variable.
struct FactorLinearization {
  Eigen::Vector2d residual = Eigen::Vector2d::Zero();
  std::vector<std::pair<VarId, Eigen::Matrix2d>> blocks;
};

/// r = origin − f(planes).
inline Eigen::Vector2d concept_residual(const FGnnModel& model, const Vec2& origin,
                                        const std::vector<PlaneState>& planes) {
  return origin - origin_from_states(model, planes);
}

inline Eigen::Vector2d residual_room(const FGnnModel& room_model, const Origin2D& origin,
                                     const std::vector<PlaneState>& planes) {
  if (room_model.kind != NodeKind::room) throw ArityError("residual_room needs the room model");
  return concept_residual(room_model, origin.xy, planes);
}

inline Eigen::Vector2d residual_wall(const FGnnModel& wall_model, const Origin2D& origin,
                                     const std::vector<PlaneState>& planes) {
  if (wall_model.kind != NodeKind::wall) throw ArityError("residual_wall needs the wall model");
  check_arity(NodeKind::wall, planes.size());
  return concept_residual(wall_model, origin.xy, planes);
}

inline Eigen::Vector2d prior_residual(const PlaneParam& current, const PlaneParam& measured) {
  return {wrap_angle(current.theta - measured.theta), current.offset - measured.offset};
}

inline FactorLinearization linearize_factor(const FactorProblem& p, const Factor& f, bool with_jacobian = true) {
  FactorLinearization out;
  if (f.kind == FactorKind::plane_prior) {
    const VarId v = f.plane_vars.front();
    out.residual = prior_residual(p.variables.at(v).plane.param, f.measured);
    if (with_jacobian) out.blocks.emplace_back(v, Eigen::Matrix2d::Identity());
    return out;
  }
  const FGnnModel& model = f.kind == FactorKind::room_plane ? *p.room_model : *p.wall_model;
  std::vector<PlaneState> planes;
  planes.reserve(f.plane_vars.size());
  for (VarId v : f.plane_vars) planes.push_back(p.variables.at(v).plane);
  const Vec2& origin = p.variables.at(f.concept_var).origin;
  if (!with_jacobian) {
    out.residual = concept_residual(model, origin, planes);
    return out;
  }
  const OriginJacobian j = origin_with_jacobian(model, planes);
  out.residual = origin - j.origin;
  out.blocks.emplace_back(f.concept_var, Eigen::Matrix2d::Identity());
  for (std::size_t i = 0; i < planes.size(); ++i) out.blocks.emplace_back(f.plane_vars[i], -j.d_param[i]);
  return out;
}

/// Column offset of every free variable, in id order.
inline std::map<VarId, int> column_layout(const FactorProblem& p) {
  std::map<VarId, int> col;
  int next = 0;
  for (const auto& [id, v] : p.variables) {
    if (v.fixed) continue;
    col[id] = next;
    next += 2;
  }
  return col;
}

struct Linearization {
  Eigen::VectorXd residual;           // 2 rows per factor, factor order
  Eigen::SparseMatrix<double> jacobian;  // columns per column_layout
  std::map<VarId, int> columns;
};

inline std::vector<FactorLinearization> linearize_all(const FactorProblem& p, bool with_jacobian, int threads) {
  std::vector<FactorLinearization> lins(p.factors.size());
  parallel_chunks(static_cast<int>(p.factors.size()), threads, [&](int i) {
    lins[static_cast<std::size_t>(i)] = linearize_factor(p, p.factors[static_cast<std::size_t>(i)], with_jacobian);
  });
  return lins;
}

inline Linearization linearize(const FactorProblem& p, int threads = 1) {
  p.validate();
  Linearization out;
  out.columns = column_layout(p);
  const auto lins = linearize_all(p, true, threads);
  const auto rows = static_cast<Eigen::Index>(2 * lins.size());
  out.residual.resize(rows);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < lins.size(); ++i) {
    const auto r0 = static_cast<Eigen::Index>(2 * i);
    out.residual.segment<2>(r0) = lins[i].residual;
    for (const auto& [v, block] : lins[i].blocks) {
      auto it = out.columns.find(v);
      if (it == out.columns.end()) continue;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) trip.emplace_back(r0 + a, it->second + b, block(a, b));
      }
    }
  }
  out.jacobian.resize(rows, static_cast<Eigen::Index>(2 * out.columns.size()));
  out.jacobian.setFromTriplets(trip.begin(), trip.end());
  return out;
}

inline double total_cost(const FactorProblem& p, int threads = 1) {
  const auto lins = linearize_all(p, false, threads);
  double c = 0.0;
  for (std::size_t i = 0; i < lins.size(); ++i) c += lins[i].residual.dot(p.factors[i].information * lins[i].residual);
  return c;
}

struct LmConfig {
  int max_iters = 100;
  double lambda0 = 1e-4;
  double tol = 1e-6;
  /// Stop once the cost itself is this small.
  double abs_cost_tol = 1e-24;
  double lambda_max = 1e12;
  int threads = 1;
};

struct LmReport {
  /// costs[0] is the initial cost; costs[k] the cost after iteration k (unchanged on rejection).
  std::vector<double> costs;
  std::vector<bool> accepted;
  std::vector<double> lambdas;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::string termination;
};

struct LmResult {
  FactorProblem solution;
  LmReport report;
};

/// Every free plane needs a prior; every free origin needs a factor.
inline void check_gauge(const FactorProblem& p) {
  std::map<VarId, bool> anchored;
  for (const auto& f : p.factors) {
    if (f.kind == FactorKind::plane_prior) {
      anchored[f.plane_vars.front()] = true;
    } else {
      anchored[f.concept_var] = true;
    }
  }
  for (const auto& [id, v] : p.variables) {
    if (v.fixed || anchored.count(id)) continue;
    throw SingularSystemError(std::string("singular system: free ") +
                              (v.kind == VariableKind::plane ? "plane" : "origin") + " variable " + std::to_string(id) +
                              (v.kind == VariableKind::plane ? " has no prior" : " has no factor"));
  }
}

namespace detail {

inline void apply_step(FactorProblem& p, const std::map<VarId, int>& cols, const Eigen::VectorXd& dx) {
  for (const auto& [id, c] : cols) {
    Variable& v = p.variables.at(id);
    if (v.kind == VariableKind::plane) {
      v.plane.param.theta = wrap_angle(v.plane.param.theta + dx(c));
      v.plane.param.offset += dx(c + 1);
    } else {
      v.origin += dx.segment<2>(c);
    }
  }
}

}  // namespace detail

inline LmResult optimize(const FactorProblem& problem, const LmConfig& cfg = {}) {
  if (problem.factors.empty()) throw ProblemError("optimize: problem has no factors");
  problem.validate();
  check_gauge(problem);

  LmResult res{problem, {}};
  FactorProblem& p = res.solution;
  LmReport& rep = res.report;
  const auto cols = column_layout(p);
  const auto n = static_cast<Eigen::Index>(2 * cols.size());
  double lambda = cfg.lambda0;
  double cost = total_cost(p, cfg.threads);
  rep.initial_cost = cost;
  rep.costs.push_back(cost);

  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd g(n);
  auto build = [&]() {
    H.setZero();
    g.setZero();
    const auto lins = linearize_all(p, true, cfg.threads);
    for (std::size_t i = 0; i < lins.size(); ++i) {
      const Eigen::Matrix2d& L = p.factors[i].information;
      const Eigen::Vector2d Lr = L * lins[i].residual;
      for (const auto& [va, Ja] : lins[i].blocks) {
        auto ia = cols.find(va);
        if (ia == cols.end()) continue;
        g.segment<2>(ia->second) += Ja.transpose() * Lr;
        for (const auto& [vb, Jb] : lins[i].blocks) {
          auto ib = cols.find(vb);
          if (ib == cols.end()) continue;
          H.block<2, 2>(ia->second, ib->second) += Ja.transpose() * L * Jb;
        }
      }
    }
  };

  if (n == 0) {
    rep.final_cost = cost;
    rep.converged = true;
    rep.termination = "no free variables";
    return res;
  }
  build();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(H(i, i) > 0.0)) throw SingularSystemError("singular system: a free variable is unconstrained");
  }
  rep.termination = "max_iters";
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (cost <= cfg.abs_cost_tol) {
      rep.converged = true;
      rep.termination = "cost below absolute tolerance";
      break;
    }
    Eigen::MatrixXd A = H;
    A.diagonal() += lambda * H.diagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw SingularSystemError("singular system: damped normal equations failed");
    const Eigen::VectorXd dx = ldlt.solve(-g);
    if (!dx.allFinite()) throw SingularSystemError("singular system: non-finite step");

    FactorProblem trial = p;
    detail::apply_step(trial, cols, dx);
    const double new_cost = total_cost(trial, cfg.threads);
    ++rep.iterations;
    rep.lambdas.push_back(lambda);
    if (std::isfinite(new_cost) && new_cost < cost) {
      const double rel = (cost - new_cost) / cost;
      p = std::move(trial);
      cost = new_cost;
      rep.accepted.push_back(true);
      rep.costs.push_back(cost);
      lambda = std::max(lambda / 10.0, 1e-12);
      build();
      if (rel < cfg.tol) {
        rep.converged = true;
        rep.termination = "relative cost change below tol";
        break;
      }
    } else {
      rep.accepted.push_back(false);
      rep.costs.push_back(cost);
      lambda *= 10.0;
      if (lambda > cfg.lambda_max) {
        rep.converged = true;
        rep.termination = "damping limit reached";
        break;
      }
    }
  }
  rep.final_cost = cost;
  rep.gradient_norm = g.norm();
  return res;
}

}  // namespace scenefactor
