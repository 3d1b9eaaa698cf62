#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace resset {

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counted half. Rank-sum formulation, O(N log N).
/// Requires at least one positive and one negative label.
double auc(std::span<const double> scores, std::span<const int> labels);

/// |top-k of predicted intersect truth| / k. predicted must hold at least
/// k ids; truth must be nonempty.
double precision_at_k(std::span<const int32_t> predicted, std::span<const int32_t> truth, int k);

/// Metrics for one cross-validation fold. Readmission fills auc;
/// disease/treatment fill p_at (keyed by k).
struct FoldMetrics {
  std::optional<double> auc;
  std::map<int, double> p_at;
};

struct EvalReport {
  std::string task;
  std::vector<FoldMetrics> folds;

  /// Unweighted per-metric mean over folds.
  FoldMetrics mean() const;

  /// {"task": ..., "folds": [...], "mean": {...}} with sorted keys; equal
  /// reports serialize to identical bytes.
  std::string to_json() const;
};

}  // namespace resset
