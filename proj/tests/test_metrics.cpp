#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "resset/metrics.hpp"
#include "resset/rng.hpp"

using namespace resset;

namespace {

// O(P*N) pair-counting oracle, ties worth half.
double auc_brute(const std::vector<double>& scores, const std::vector<int>& labels) {
  double won = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) won += 1.0;
      else if (scores[i] == scores[j]) won += 0.5;
    }
  }
  return won / static_cast<double>(pairs);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("auc worked example: three of four pairs ranked correctly") {
  std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
  std::vector<int> labels = {0, 0, 1, 1};
  CHECK(auc(scores, labels) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("auc degenerate rankings") {
  std::vector<double> tied = {0.3, 0.3, 0.3, 0.3};
  std::vector<int> labels = {0, 1, 0, 1};
  CHECK(auc(tied, labels) == 0.5);

  std::vector<double> perfect = {0.9, 0.8, 0.2, 0.1};
  std::vector<int> hi_first = {1, 1, 0, 0};
  CHECK(auc(perfect, hi_first) == 1.0);
  std::vector<int> lo_first = {0, 0, 1, 1};
  CHECK(auc(perfect, lo_first) == 0.0);
}

TEST_CASE("auc matches the pair-counting oracle on 500 tied instances") {
  Rng rng(404);
  for (int trial = 0; trial < 500; ++trial) {
    size_t n = static_cast<size_t>(rng.uniform_int(2, 40));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (size_t i = 0; i < n; ++i) {
      scores[i] = 0.125 * rng.uniform_int(0, 8);  // a coarse grid forces ties
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0) labels[0] = 0;
    if (!has1) labels[n - 1] = 1;
    CHECK(auc(scores, labels) == doctest::Approx(auc_brute(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
  std::vector<double> scores = {0.1, 0.7, 0.7, 0.2, 0.9, 0.4};
  std::vector<int> labels = {0, 1, 0, 0, 1, 1};
  double base = auc(scores, labels);
  std::vector<double> affine(scores.size()), expd(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    affine[i] = 3.0 * scores[i] - 2.0;
    expd[i] = std::exp(scores[i]);
  }
  CHECK(auc(affine, labels) == base);
  CHECK(auc(expd, labels) == base);
}

TEST_CASE("auc input validation") {
  std::vector<double> s = {0.1, 0.2};
  std::vector<int> short_labels = {1};
  CHECK_THROWS_AS(auc(s, short_labels), std::invalid_argument);
  std::vector<int> bad = {1, 2};
  CHECK_THROWS_AS(auc(s, bad), std::invalid_argument);
  std::vector<int> ones = {1, 1};
  CHECK_THROWS_AS(auc(s, ones), std::invalid_argument);
  std::vector<int> zeros = {0, 0};
  CHECK_THROWS_AS(auc(s, zeros), std::invalid_argument);
}

TEST_CASE("precision_at_k counts hits in the first k slots") {
  std::vector<int32_t> predicted = {3, 1, 2};
  std::vector<int32_t> truth = {1, 5};
  CHECK(precision_at_k(predicted, truth, 1) == 0.0);
  CHECK(precision_at_k(predicted, truth, 2) == 0.5);
  CHECK(precision_at_k(predicted, truth, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(precision_at_k(predicted, truth, 0), std::invalid_argument);
  CHECK_THROWS_AS(precision_at_k(predicted, truth, 4), std::invalid_argument);
  std::vector<int32_t> empty;
  CHECK_THROWS_AS(precision_at_k(predicted, empty, 1), std::invalid_argument);
}

TEST_CASE("precision_at_k times k is always an integer hit count") {
  Rng rng(808);
  for (int trial = 0; trial < 500; ++trial) {
    int n = rng.uniform_int(1, 12);
    std::vector<int32_t> predicted;
    for (int i = 0; i < n; ++i) predicted.push_back(rng.uniform_int(0, 30));
    std::vector<int32_t> truth;
    int m = rng.uniform_int(1, 6);
    for (int i = 0; i < m; ++i) truth.push_back(rng.uniform_int(0, 30));
    int k = rng.uniform_int(1, n);
    double p = precision_at_k(predicted, truth, k);
    double hits = p * k;
    CHECK(hits == doctest::Approx(std::round(hits)).epsilon(1e-12));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("report mean averages each metric over folds") {
  EvalReport r;
  r.task = "disease";
  r.folds.push_back({std::nullopt, {{1, 0.5}, {2, 0.25}}});
  r.folds.push_back({std::nullopt, {{1, 0.7}, {2, 0.35}}});
  FoldMetrics m = r.mean();
  CHECK_FALSE(m.auc.has_value());
  CHECK(m.p_at.at(1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(m.p_at.at(2) == doctest::Approx(0.3).epsilon(1e-15));

  EvalReport mixed;
  mixed.task = "readmission";
  mixed.folds.push_back({0.8, {}});
  mixed.folds.push_back({std::nullopt, {}});
  CHECK_THROWS_AS(mixed.mean(), std::logic_error);
  EvalReport none;
  CHECK_THROWS_AS(none.mean(), std::invalid_argument);
}

TEST_CASE("equal reports serialize to identical bytes") {
  auto make = [] {
    EvalReport r;
    r.task = "readmission";
    r.folds.push_back({0.8125, {}});
    r.folds.push_back({0.75, {}});
    return r.to_json();
  };
  std::string a = make();
  CHECK(a == make());
  CHECK(a.find("\"task\"") != std::string::npos);
  CHECK(a.find("\"mean\"") != std::string::npos);
  CHECK(a.back() == '\n');
}

}  // TEST_SUITE
