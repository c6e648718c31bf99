#pragma once

// Independent brute-force reference implementations.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "gamenet/data.hpp"

namespace oracle {

inline std::size_t intersection_size(const gamenet::CodeSet& a, const gamenet::CodeSet& b) {
  std::size_t n = 0;
  for (int x : a)
    for (int y : b) n += x == y;
  return n;
}

inline double jaccard(const std::vector<gamenet::CodeSet>& truth, const std::vector<gamenet::CodeSet>& pred) {
  double total = 0.0;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    std::set<int> u(truth[v].begin(), truth[v].end());
    u.insert(pred[v].begin(), pred[v].end());
    total +=
        u.empty() ? 1.0 : static_cast<double>(intersection_size(truth[v], pred[v])) / static_cast<double>(u.size());
  }
  return total / static_cast<double>(truth.size());
}

/// Conventional precision |Y n Yhat|/|Yhat| and recall |Y n Yhat|/|Y|.
inline double f1(const std::vector<gamenet::CodeSet>& truth, const std::vector<gamenet::CodeSet>& pred) {
  double total = 0.0;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    const double hit = static_cast<double>(intersection_size(truth[v], pred[v]));
    const double p = pred[v].empty() ? 0.0 : hit / static_cast<double>(pred[v].size());
    const double r = truth[v].empty() ? 0.0 : hit / static_cast<double>(truth[v].size());
    total += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return total / static_cast<double>(truth.size());
}

inline double ddi_rate(const std::vector<gamenet::CodeSet>& pred, const Eigen::MatrixXd& a) {
  double hits = 0.0, pairs = 0.0;
  for (const auto& s : pred) {
    for (int x : s)
      for (int y : s) {
        if (x >= y) continue;
        pairs += 1.0;
        hits += a(x, y) > 0 ? 1.0 : 0.0;
      }
  }
  return pairs > 0.0 ? hits / pairs : 0.0;
}

/// Step-wise AP: one threshold per distinct score, precision and recall
/// recounted from scratch at every threshold.
inline double average_precision(const std::vector<double>& scores, const std::vector<bool>& labels) {
  std::vector<double> thresholds(scores);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  if (positives == 0.0) return 0.0;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double selected = 0.0, hits = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        selected += 1.0;
        hits += labels[i] ? 1.0 : 0.0;
      }
    }
    const double recall = hits / positives;
    ap += (recall - prev_recall) * (hits / selected);
    prev_recall = recall;
  }
  return ap;
}

/// D^{-1/2} (A + I) D^{-1/2} evaluated entry by entry.
inline Eigen::MatrixXd triple_product(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) degree[static_cast<std::size_t>(i)] += a(i, j) + (i == j ? 1.0 : 0.0);
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) d(i, i) = 1.0 / std::sqrt(degree[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd ai = a;
  for (Eigen::Index i = 0; i < n; ++i) ai(i, i) += 1.0;
  Eigen::MatrixXd left = Eigen::MatrixXd::Zero(n, n), out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) left(i, j) += d(i, k) * ai(k, j);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) out(i, j) += left(i, k) * d(k, j);
  return out;
}

}  // namespace oracle
