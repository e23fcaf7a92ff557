// Edge-classification and origin-regression metrics.
#pragma once

#include "scenefactor/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scenefactor {

/// Edge classes in logit order.
enum class EdgeClass : int { none = 0, same_room = 1, same_wall = 2 };
inline constexpr int kNumEdgeClasses = 3;
using ClassProbs = std::array<double, kNumEdgeClasses>;

inline const char* to_string(EdgeClass c) {
  switch (c) {
    case EdgeClass::none: return "none";
    case EdgeClass::same_room: return "same_room";
    case EdgeClass::same_wall: return "same_wall";
  }
  return "?";
}

inline EdgeClass edge_class_from_string(const std::string& s) {
  if (s == "none") return EdgeClass::none;
  if (s == "same_room") return EdgeClass::same_room;
  if (s == "same_wall") return EdgeClass::same_wall;
  throw std::invalid_argument("unknown edge class: " + s);
}

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EdgeMetrics {
  std::array<double, kNumEdgeClasses> precision{};
  std::array<double, kNumEdgeClasses> recall{};
  /// NaN when the class has no positives or no negatives.
  std::array<double, kNumEdgeClasses> auc{};
  /// Macro over the positive classes (same_room, same_wall).
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  /// One-vs-rest, macro over the classes where it is defined.
  double macro_auc = 0.0;
  std::array<std::array<std::int64_t, kNumEdgeClasses>, kNumEdgeClasses> confusion{};  // [truth][pred]
  std::size_t n_edges = 0;
};

/// ROC AUC of `scores` for the binary labels, trapezoidal over the empirical curve (tied
/// scores form one diagonal step). NaN if either class is empty.
inline double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw MetricsError("roc_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0.0, n_neg = 0.0;
  for (bool p : positive) (p ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nan("");
  double tp = 0.0, fp = 0.0, area = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    double dtp = 0.0, dfp = 0.0;
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (positive[order[i]] ? dtp : dfp) += 1.0;
      ++i;
    }
    // Trapezoid between (fp, tp) and (fp + dfp, tp + dtp), normalized at the end.
    area += dfp * (tp + 0.5 * dtp);
    tp += dtp;
    fp += dfp;
  }
  return area / (n_pos * n_neg);
}

inline EdgeMetrics evaluate_edges(const std::vector<int>& predicted, const std::vector<ClassProbs>& probs,
                                  const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || probs.size() != truth.size()) {
    throw MetricsError("evaluate_edges: predictions and ground truth are not aligned");
  }
  EdgeMetrics m;
  m.n_edges = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kNumEdgeClasses || predicted[i] < 0 || predicted[i] >= kNumEdgeClasses) {
      throw MetricsError("evaluate_edges: class index out of range");
    }
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  for (std::size_t c = 0; c < kNumEdgeClasses; ++c) {
    std::int64_t tp = m.confusion[c][c], pred_c = 0, true_c = 0;
    for (std::size_t k = 0; k < kNumEdgeClasses; ++k) {
      pred_c += m.confusion[k][c];
      true_c += m.confusion[c][k];
    }
    // A class that is neither present nor predicted is perfectly handled.
    m.precision[c] = pred_c > 0 ? static_cast<double>(tp) / static_cast<double>(pred_c) : (true_c == 0 ? 1.0 : 0.0);
    m.recall[c] = true_c > 0 ? static_cast<double>(tp) / static_cast<double>(true_c) : (pred_c == 0 ? 1.0 : 0.0);

    std::vector<double> scores(truth.size());
    std::vector<bool> pos(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      scores[i] = probs[i][c];
      pos[i] = truth[i] == static_cast<int>(c);
    }
    m.auc[c] = roc_auc(scores, pos);
  }
  m.macro_precision = 0.5 * (m.precision[1] + m.precision[2]);
  m.macro_recall = 0.5 * (m.recall[1] + m.recall[2]);
  double sum = 0.0;
  int n = 0;
  for (double a : m.auc) {
    if (!std::isnan(a)) {
      sum += a;
      ++n;
    }
  }
  m.macro_auc = n > 0 ? sum / n : std::nan("");
  return m;
}

/// Aligns two keyed edge sets before evaluating; keys must match exactly.
template <typename Key>
EdgeMetrics evaluate_edges(const std::map<Key, std::pair<int, ClassProbs>>& predictions,
                           const std::map<Key, int>& ground_truth) {
  if (predictions.size() != ground_truth.size()) throw MetricsError("evaluate_edges: misaligned edge sets");
  std::vector<int> pred, truth;
  std::vector<ClassProbs> probs;
  for (const auto& [key, p] : predictions) {
    auto it = ground_truth.find(key);
    if (it == ground_truth.end()) throw MetricsError("evaluate_edges: misaligned edge sets");
    pred.push_back(p.first);
    probs.push_back(p.second);
    truth.push_back(it->second);
  }
  return evaluate_edges(pred, probs, truth);
}

struct OriginMetrics {
  double rmse_m = 0.0;
  double mse_m2 = 0.0;
  std::size_t matched = 0;
};

inline OriginMetrics origin_errors(const std::vector<Vec2>& predicted, const std::vector<Vec2>& truth) {
  if (predicted.size() != truth.size()) throw MetricsError("origin_errors: size mismatch");
  if (predicted.empty()) throw MetricsError("evaluate_origins: no matched concepts");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += (predicted[i] - truth[i]).squaredNorm();
  OriginMetrics m;
  m.matched = predicted.size();
  m.mse_m2 = sum / static_cast<double>(predicted.size());
  m.rmse_m = std::sqrt(m.mse_m2);
  return m;
}

/// A concept with its member planes expressed in a shared plane-id space.
struct ConceptInstance {
  std::set<int> members;
  Vec2 origin{0.0, 0.0};
};

/// One-to-one matching: candidates need |P∩G| ≥ ½|G| and ≥ ½|P|; accepted greedily by
/// descending Jaccard index (ties: lower predicted index, then lower truth index).
inline std::vector<std::pair<std::size_t, std::size_t>> match_concepts(const std::vector<ConceptInstance>& predicted,
                                                                       const std::vector<ConceptInstance>& truth) {
  struct Cand {
    double jaccard;
    std::size_t p, g;
  };
  std::vector<Cand> cands;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    for (std::size_t g = 0; g < truth.size(); ++g) {
      std::size_t inter = 0;
      for (int m : predicted[p].members) inter += truth[g].members.count(m);
      const double np = static_cast<double>(predicted[p].members.size());
      const double ng = static_cast<double>(truth[g].members.size());
      if (inter == 0 || 2.0 * static_cast<double>(inter) < np || 2.0 * static_cast<double>(inter) < ng) continue;
      cands.push_back({static_cast<double>(inter) / (np + ng - static_cast<double>(inter)), p, g});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.jaccard != b.jaccard) return a.jaccard > b.jaccard;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<bool> used_p(predicted.size()), used_g(truth.size());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : cands) {
    if (used_p[c.p] || used_g[c.g]) continue;
    used_p[c.p] = used_g[c.g] = true;
    out.emplace_back(c.p, c.g);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline OriginMetrics evaluate_origins(const std::vector<ConceptInstance>& predicted,
                                      const std::vector<ConceptInstance>& truth) {
  const auto matches = match_concepts(predicted, truth);
  if (matches.empty()) throw MetricsError("evaluate_origins: no matched concepts");
  std::vector<Vec2> p, g;
  for (const auto& [pi, gi] : matches) {
    p.push_back(predicted[pi].origin);
    g.push_back(truth[gi].origin);
  }
  return origin_errors(p, g);
}

}  // namespace scenefactor
