#include "resset/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace resset {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  const size_t n = scores.size();
  size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("auc: labels must be 0/1");
    positives += static_cast<size_t>(y);
  }
  if (positives == 0 || positives == n) {
    throw std::invalid_argument("auc: needs both classes");
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Average ranks within tied score groups give each tie exactly half credit.
  double pos_rank_sum = 0.0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double neg = static_cast<double>(n - positives);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * neg);
}

double precision_at_k(std::span<const int32_t> predicted, std::span<const int32_t> truth, int k) {
  if (truth.empty()) throw std::invalid_argument("precision_at_k: empty truth set");
  if (k < 1 || static_cast<size_t>(k) > predicted.size()) {
    throw std::invalid_argument("precision_at_k: k out of range");
  }
  std::unordered_set<int32_t> want(truth.begin(), truth.end());
  int hits = 0;
  for (int i = 0; i < k; ++i) hits += want.count(predicted[static_cast<size_t>(i)]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

FoldMetrics EvalReport::mean() const {
  if (folds.empty()) throw std::invalid_argument("EvalReport: no folds");
  FoldMetrics m;
  const FoldMetrics& first = folds.front();
  for (const FoldMetrics& f : folds) {
    if (f.auc.has_value() != first.auc.has_value()) {
      throw std::logic_error("EvalReport: folds disagree on metrics");
    }
    for (const auto& [k, _] : first.p_at) {
      if (!f.p_at.count(k)) throw std::logic_error("EvalReport: folds disagree on metrics");
    }
  }
  const double n = static_cast<double>(folds.size());
  if (first.auc) {
    double s = 0.0;
    for (const FoldMetrics& f : folds) s += *f.auc;
    m.auc = s / n;
  }
  for (const auto& [k, _] : first.p_at) {
    double s = 0.0;
    for (const FoldMetrics& f : folds) s += f.p_at.at(k);
    m.p_at[k] = s / n;
  }
  return m;
}

namespace {

nlohmann::json fold_json(const FoldMetrics& f) {
  nlohmann::json j = nlohmann::json::object();
  if (f.auc) j["auc"] = *f.auc;
  if (!f.p_at.empty()) {
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [k, v] : f.p_at) p[std::to_string(k)] = v;
    j["p_at"] = std::move(p);
  }
  return j;
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  nlohmann::json fold_arr = nlohmann::json::array();
  for (const FoldMetrics& f : folds) fold_arr.push_back(fold_json(f));
  j["folds"] = std::move(fold_arr);
  j["mean"] = fold_json(mean());
  return j.dump(2) + "\n";
}

}  // namespace resset
