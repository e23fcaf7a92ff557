// Classified edges to room and wall instances.
#pragma once

#include "scenefactor/metrics.hpp"
#include "scenefactor/scene_graph.hpp"

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace scenefactor {

/// An edge after classification; `prob` is the probability of `label`.
struct ClassifiedEdge {
  NodeId a = 0;
  NodeId b = 0;
  EdgeClass label = EdgeClass::none;
  double prob = 0.0;
};

struct ConceptCluster {
  NodeKind kind = NodeKind::room;
  std::set<NodeId> members;
  /// Mean probability of the same-kind edges inside the cluster.
  double support = 0.0;
  /// Room formed from a leftover component rather than a cycle.
  bool acyclic = false;

  bool operator==(const ConceptCluster&) const = default;
};

struct ClusterConfig {
  int max_cycle_length = 10;
  /// Stop enumerating after this many cycles; dense graphs otherwise explode combinatorially.
  std::size_t max_cycles = 200000;
};

/// A simple cycle: its node set and the mean probability of its edges.
struct Cycle {
  std::vector<NodeId> nodes;  // sorted
  double mean_prob = 0.0;
};

/// Adjacency restricted to edges of one class, with per-edge probability.
struct ClassSubgraph {
  std::map<NodeId, std::vector<NodeId>> adj;  // sorted neighbor lists
  std::map<std::pair<NodeId, NodeId>, double> prob;

  double edge_prob(NodeId a, NodeId b) const { return prob.at({std::min(a, b), std::max(a, b)}); }
};

inline ClassSubgraph class_subgraph(const std::vector<ClassifiedEdge>& edges, EdgeClass cls) {
  ClassSubgraph g;
  for (const auto& e : edges) {
    if (e.label != cls || e.a == e.b) continue;
    const auto key = std::make_pair(std::min(e.a, e.b), std::max(e.a, e.b));
    if (!g.prob.emplace(key, e.prob).second) continue;
    g.adj[e.a].push_back(e.b);
    g.adj[e.b].push_back(e.a);
  }
  for (auto& [n, nb] : g.adj) std::sort(nb.begin(), nb.end());
  return g;
}

/// Simple cycles of length 3..max_len. Each cycle is found once: it starts at its smallest
/// node and its second node is smaller than its last.
inline std::vector<Cycle> enumerate_cycles(const ClassSubgraph& g, int max_len, std::size_t max_cycles) {
  std::vector<Cycle> out;
  std::vector<NodeId> path;
  std::set<NodeId> on_path;
  double prob_sum = 0.0;
  std::function<void(NodeId)> dfs = [&](NodeId u) {
    if (out.size() >= max_cycles) return;
    const NodeId start = path.front();
    for (NodeId v : g.adj.at(u)) {
      if (v == start && path.size() >= 3 && path[1] < path.back()) {
        Cycle c;
        c.nodes = path;
        std::sort(c.nodes.begin(), c.nodes.end());
        c.mean_prob = (prob_sum + g.edge_prob(u, v)) / static_cast<double>(path.size());
        out.push_back(std::move(c));
        if (out.size() >= max_cycles) return;
        continue;
      }
      if (v <= start || on_path.count(v) || static_cast<int>(path.size()) >= max_len) continue;
      const double p = g.edge_prob(u, v);
      path.push_back(v);
      on_path.insert(v);
      prob_sum += p;
      dfs(v);
      prob_sum -= p;
      on_path.erase(v);
      path.pop_back();
    }
  };
  for (const auto& [s, nb] : g.adj) {
    path = {s};
    on_path = {s};
    prob_sum = 0.0;
    dfs(s);
  }
  return out;
}

/// Greedy selection order: longer first, then higher mean probability, then the
/// lexicographically smaller node set.
inline bool cycle_precedes(const Cycle& a, const Cycle& b) {
  if (a.nodes.size() != b.nodes.size()) return a.nodes.size() > b.nodes.size();
  if (a.mean_prob != b.mean_prob) return a.mean_prob > b.mean_prob;
  return a.nodes < b.nodes;
}

inline double internal_support(const ClassSubgraph& g, const std::set<NodeId>& members) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [key, p] : g.prob) {
    if (members.count(key.first) && members.count(key.second)) {
      sum += p;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

inline std::vector<ConceptCluster> cluster_rooms(const std::vector<ClassifiedEdge>& edges, const ClusterConfig& cfg = {}) {
  const ClassSubgraph g = class_subgraph(edges, EdgeClass::same_room);
  auto cycles = enumerate_cycles(g, cfg.max_cycle_length, cfg.max_cycles);
  std::sort(cycles.begin(), cycles.end(), cycle_precedes);

  std::vector<ConceptCluster> out;
  std::set<NodeId> used;
  for (const auto& c : cycles) {
    if (std::any_of(c.nodes.begin(), c.nodes.end(), [&](NodeId n) { return used.count(n) > 0; })) continue;
    ConceptCluster cl;
    cl.kind = NodeKind::room;
    cl.members.insert(c.nodes.begin(), c.nodes.end());
    cl.support = internal_support(g, cl.members);
    used.insert(c.nodes.begin(), c.nodes.end());
    out.push_back(std::move(cl));
  }

  // Leftover components among unassigned nodes.
  std::set<NodeId> seen;
  for (const auto& [s, nb] : g.adj) {
    if (used.count(s) || seen.count(s)) continue;
    std::set<NodeId> comp;
    std::vector<NodeId> stack{s};
    seen.insert(s);
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      comp.insert(u);
      for (NodeId v : g.adj.at(u)) {
        if (used.count(v) || seen.count(v)) continue;
        seen.insert(v);
        stack.push_back(v);
      }
    }
    if (comp.size() < 2 || static_cast<int>(comp.size()) > cfg.max_cycle_length) continue;
    ConceptCluster cl;
    cl.kind = NodeKind::room;
    cl.members = std::move(comp);
    cl.support = internal_support(g, cl.members);
    cl.acyclic = true;
    out.push_back(std::move(cl));
  }
  return out;
}

/// Greedy matching by descending probability; ties by (smaller id, larger id).
inline std::vector<ConceptCluster> cluster_walls(const std::vector<ClassifiedEdge>& edges) {
  const ClassSubgraph g = class_subgraph(edges, EdgeClass::same_wall);
  std::vector<std::pair<std::pair<NodeId, NodeId>, double>> sorted(g.prob.begin(), g.prob.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  std::vector<ConceptCluster> out;
  std::set<NodeId> used;
  for (const auto& [key, p] : sorted) {
    if (used.count(key.first) || used.count(key.second)) continue;
    used.insert(key.first);
    used.insert(key.second);
    out.push_back({NodeKind::wall, {key.first, key.second}, p, false});
  }
  return out;
}

/// Clusters converted back to edges: every member pair gets the cluster's kind and support.
inline std::vector<ClassifiedEdge> clusters_to_edges(const std::vector<ConceptCluster>& clusters) {
  std::vector<ClassifiedEdge> out;
  for (const auto& c : clusters) {
    const EdgeClass cls = c.kind == NodeKind::wall ? EdgeClass::same_wall : EdgeClass::same_room;
    for (auto i = c.members.begin(); i != c.members.end(); ++i) {
      for (auto j = std::next(i); j != c.members.end(); ++j) out.push_back({*i, *j, cls, c.support});
    }
  }
  return out;
}

}  // namespace scenefactor
