// Oracles and fixtures shared by the unit tests and the acceptance binary.
#pragma once

#include "scenefactor/clustering.hpp"
#include "scenefactor/factor_graph.hpp"
#include "scenefactor/synth.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace testsupport {

using namespace scenefactor;

// ---- clustering ---------------------------------------------------------------------------

struct OracleCycle {
  std::set<NodeId> nodes;
  double mean_prob;
};

// Every edge subset that is connected with all degrees 2.
inline std::vector<OracleCycle> brute_force_cycles(const std::vector<ClassifiedEdge>& edges, int max_len) {
  std::vector<OracleCycle> out;
  const std::size_t m = edges.size();
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    const int len = std::popcount(mask);
    if (len < 3 || len > max_len) continue;
    std::map<NodeId, int> deg;
    std::map<NodeId, NodeId> parent;
    std::function<NodeId(NodeId)> find = [&](NodeId x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    double psum = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      if (!(mask >> e & 1u)) continue;
      ++deg[edges[e].a];
      ++deg[edges[e].b];
      psum += edges[e].prob;
      for (NodeId x : {edges[e].a, edges[e].b}) {
        if (!parent.count(x)) parent[x] = x;
      }
      parent[find(edges[e].a)] = find(edges[e].b);
    }
    bool ok = std::all_of(deg.begin(), deg.end(), [](const auto& kv) { return kv.second == 2; });
    std::set<NodeId> roots;
    for (const auto& [x, d] : deg) roots.insert(find(x));
    if (!ok || roots.size() != 1) continue;
    OracleCycle c;
    for (const auto& [x, d] : deg) c.nodes.insert(x);
    c.mean_prob = psum / len;
    out.push_back(c);
  }
  return out;
}

// Larger is better: longer, more probable, then lexicographically smaller node set.
inline bool key_less(const OracleCycle& a, const OracleCycle& b) {
  if (a.nodes.size() != b.nodes.size()) return a.nodes.size() < b.nodes.size();
  if (a.mean_prob != b.mean_prob) return a.mean_prob < b.mean_prob;
  return std::vector<NodeId>(a.nodes.begin(), a.nodes.end()) > std::vector<NodeId>(b.nodes.begin(), b.nodes.end());
}

// Best maximal disjoint packing, comparing packings by their best-first key sequences.
// Returns false when the winner is tied with another packing under (length, probability).
inline bool exhaustive_packing(const std::vector<OracleCycle>& cycles, std::set<std::set<NodeId>>& best_sets) {
  std::vector<std::vector<std::size_t>> packings;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t, std::set<NodeId>&)> rec = [&](std::size_t from, std::set<NodeId>& used) {
    bool extended = false;
    for (std::size_t i = from; i < cycles.size(); ++i) {
      if (std::any_of(cycles[i].nodes.begin(), cycles[i].nodes.end(), [&](NodeId n) { return used.count(n) > 0; })) {
        continue;
      }
      extended = true;
      cur.push_back(i);
      std::set<NodeId> next = used;
      next.insert(cycles[i].nodes.begin(), cycles[i].nodes.end());
      rec(i + 1, next);
      cur.pop_back();
    }
    if (!extended) {
      // Maximal only if no earlier-index cycle fits either.
      for (std::size_t i = 0; i < cycles.size(); ++i) {
        if (std::find(cur.begin(), cur.end(), i) != cur.end()) continue;
        if (std::none_of(cycles[i].nodes.begin(), cycles[i].nodes.end(), [&](NodeId n) { return used.count(n) > 0; })) {
          return;
        }
      }
      packings.push_back(cur);
    }
  };
  std::set<NodeId> none;
  rec(0, none);

  auto sorted_keys = [&](std::vector<std::size_t> p) {
    std::sort(p.begin(), p.end(), [&](std::size_t a, std::size_t b) { return key_less(cycles[b], cycles[a]); });
    return p;
  };
  // Lexicographic comparison of best-first sequences; `coarse` ignores the node-set tiebreak.
  auto cmp = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, bool coarse) {
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      const auto& x = cycles[a[i]];
      const auto& y = cycles[b[i]];
      if (coarse) {
        if (x.nodes.size() != y.nodes.size()) return x.nodes.size() < y.nodes.size() ? -1 : 1;
        if (x.mean_prob != y.mean_prob) return x.mean_prob < y.mean_prob ? -1 : 1;
        continue;
      }
      if (key_less(x, y)) return -1;
      if (key_less(y, x)) return 1;
    }
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    return 0;
  };
  std::vector<std::size_t> best;
  for (const auto& p : packings) {
    auto s = sorted_keys(p);
    if (best.empty() || cmp(s, best, false) > 0) best = s;
  }
  int ties = 0;
  for (const auto& p : packings) ties += cmp(sorted_keys(p), best, true) == 0;
  best_sets.clear();
  for (std::size_t i : best) best_sets.insert(cycles[i].nodes);
  return ties == 1;
}

// Brute-force wall matching: over all matchings of the same_wall edges, the one whose
// probabilities sorted in descending order are lexicographically largest. Returns false if
// another matching has the same sorted probabilities.
inline bool brute_force_wall_matching(const std::vector<ClassifiedEdge>& edges, std::set<std::set<NodeId>>& best_sets) {
  std::vector<ClassifiedEdge> w;
  for (const auto& e : edges) {
    if (e.label == EdgeClass::same_wall) w.push_back(e);
  }
  std::vector<double> best_key;
  std::vector<std::size_t> best, cur;
  int ties = 0;
  bool have = false;
  std::set<NodeId> used;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == w.size()) {
      std::vector<double> key;
      for (std::size_t k : cur) key.push_back(w[k].prob);
      std::sort(key.rbegin(), key.rend());
      if (!have || key > best_key) {
        best_key = key, best = cur, ties = 1, have = true;
      } else if (key == best_key) {
        ++ties;
      }
      return;
    }
    rec(i + 1);
    if (!used.count(w[i].a) && !used.count(w[i].b)) {
      used.insert(w[i].a);
      used.insert(w[i].b);
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
      used.erase(w[i].a);
      used.erase(w[i].b);
    }
  };
  rec(0);
  best_sets.clear();
  for (std::size_t k : best) best_sets.insert({w[k].a, w[k].b});
  return ties == 1;
}

inline std::vector<ClassifiedEdge> random_classified_graph(std::mt19937_64& rng, int n, int max_edges, EdgeClass cls) {
  std::vector<std::pair<NodeId, NodeId>> all;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) all.emplace_back(a, b);
  }
  std::shuffle(all.begin(), all.end(), rng);
  std::uniform_int_distribution<int> count(n - 1, max_edges);
  std::uniform_real_distribution<double> p(0.5, 1.0);
  all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(count(rng))));
  std::vector<ClassifiedEdge> out;
  for (auto [a, b] : all) out.push_back({a, b, cls, p(rng)});
  return out;
}

inline std::set<std::set<NodeId>> member_sets(const std::vector<ConceptCluster>& cs) {
  std::set<std::set<NodeId>> out;
  for (const auto& c : cs) out.insert(c.members);
  return out;
}

// ---- factor problems ------------------------------------------------------------------------

// Planes 0..n-1 with priors at their observed values, one origin per ground-truth concept with
// at least two observed members (ids from 1000), initialised at the ground-truth origin.
inline FactorProblem building_problem(const BuildingSample& s, const FGnnModel& room, const FGnnModel& wall) {
  FactorProblem p;
  p.room_model = &room;
  p.wall_model = &wall;
  std::map<NodeId, VarId> var_of;
  for (std::size_t i = 0; i < s.observed.size(); ++i) {
    Variable v;
    v.kind = VariableKind::plane;
    v.plane = plane_state(s.observed[i].plane);
    p.variables[static_cast<VarId>(i)] = v;
    var_of[s.observed[i].gt_id] = static_cast<VarId>(i);
    p.factors.push_back(make_prior_factor({static_cast<VarId>(i), v.plane.param, Eigen::Matrix2d::Identity()}));
  }
  VarId next = 1000;
  for (NodeKind kind : {NodeKind::room, NodeKind::wall}) {
    for (NodeId c : s.ground_truth.ids_of(kind)) {
      Factor f;
      f.kind = kind == NodeKind::room ? FactorKind::room_plane : FactorKind::wall_plane;
      for (NodeId mbr : s.ground_truth.members_of(c)) {
        if (var_of.count(mbr)) f.plane_vars.push_back(var_of[mbr]);
      }
      if (f.plane_vars.size() < 2 || (kind == NodeKind::wall && f.plane_vars.size() != 2)) continue;
      Variable o;
      o.kind = VariableKind::origin;
      o.origin = s.ground_truth.node(c).origin->xy;
      p.variables[next] = o;
      f.concept_var = next++;
      p.factors.push_back(f);
    }
  }
  return p;
}

inline std::vector<PlaneState> states_of(const FactorProblem& p, const Factor& f) {
  std::vector<PlaneState> out;
  for (VarId v : f.plane_vars) out.push_back(p.variables.at(v).plane);
  return out;
}

// Worst relative error of linearize_factor's Jacobian blocks against central differences on
// (theta, offset) or (x, y), h = 1e-5. Relu-kink coordinates are counted and skipped.
struct FdStats {
  double worst = 0.0;
  std::size_t total = 0, kinks = 0;
};

inline void check_factor_jacobian(const FactorProblem& p, const Factor& f, FdStats& st) {
  const double h = 1e-5;
  const auto lin = linearize_factor(p, f);
  for (const auto& [v, block] : lin.blocks) {
    for (int c = 0; c < 2; ++c) {
      auto eval = [&](double d) {
        FactorProblem q = p;
        Variable& var = q.variables.at(v);
        if (var.kind == VariableKind::origin) {
          var.origin(c) += d;
        } else if (c == 0) {
          var.plane.param.theta += d;
        } else {
          var.plane.param.offset += d;
        }
        return Eigen::Vector2d(linearize_factor(q, f, false).residual);
      };
      const Eigen::Vector2d r0 = eval(0.0), rp = eval(h), rm = eval(-h);
      for (int k = 0; k < 2; ++k) {
        ++st.total;
        const double up = (rp(k) - r0(k)) / h, down = (r0(k) - rm(k)) / h;
        if (std::abs(up - down) > 1e-3 * std::max(1.0, std::abs(up))) {
          ++st.kinks;
          continue;
        }
        const double fd = (rp(k) - rm(k)) / (2 * h);
        st.worst = std::max(st.worst, std::abs(block(k, c) - fd) / std::max({std::abs(block(k, c)), std::abs(fd), 1e-5}));
      }
    }
  }
}

}  // namespace testsupport
