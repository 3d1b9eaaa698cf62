#include "resset/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace resset {

Tensor bow_features(std::span<const Visit> visits, Index n_disease, Index n_treatment) {
  Mat f = Mat::Zero(n_disease + n_treatment, 1);
  for (const Visit& v : visits) {
    for (int32_t id : v.dx) {
      if (id < 0 || id >= n_disease) throw std::out_of_range("bow_features: disease id");
      f(id, 0) += 1.0;
    }
    for (int32_t id : v.tx) {
      if (id < 0 || id >= n_treatment) throw std::out_of_range("bow_features: treatment id");
      f(n_disease + id, 0) += 1.0;
    }
  }
  return Tensor(std::move(f));
}

namespace {

std::vector<std::vector<int>> per_visit_rows(std::span<const Visit> visits,
                                             const EmbeddingTable& emb) {
  std::vector<std::vector<int>> rows(visits.size());
  for (size_t i = 0; i < visits.size(); ++i) {
    for (int32_t id : visits[i].dx) rows[i].push_back(static_cast<int>(emb.disease_row(id)));
    for (int32_t id : visits[i].tx) rows[i].push_back(static_cast<int>(emb.treatment_row(id)));
  }
  return rows;
}

std::vector<int> flatten_capped(const std::vector<std::vector<int>>& per_visit, int max_tokens) {
  std::vector<int> all;
  for (const auto& v : per_visit) all.insert(all.end(), v.begin(), v.end());
  if (static_cast<int>(all.size()) > max_tokens) {
    all.erase(all.begin(), all.end() - max_tokens);
  }
  return all;
}

}  // namespace

std::vector<int> flat_tokens(std::span<const Visit> visits, const EmbeddingTable& emb,
                             int max_tokens) {
  // Bags are stored ascending and treatments sit after diseases in the
  // table, so per-visit insertion order is already ascending row id.
  return flatten_capped(per_visit_rows(visits, emb), max_tokens);
}

std::vector<int> flat_tokens_shuffled(std::span<const Visit> visits, const EmbeddingTable& emb,
                                      int max_tokens, Rng& rng) {
  auto rows = per_visit_rows(visits, emb);
  for (auto& v : rows) rng.shuffle(v);
  return flatten_capped(rows, max_tokens);
}

namespace {

double softplus(double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Row-wise softmax of Z in place.
void softmax_rows(Mat& z) {
  for (Index i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
}

struct Objective {
  // loss at (W, b) and gradients into gw, gb
  virtual double eval(const Mat& w, const Mat& b, Mat* gw, Mat* gb) const = 0;
  virtual ~Objective() = default;
};

/// Shared descent loop: gradient steps with Armijo backtracking, stopping at
/// grad_tol or the iteration cap. The objective is convex, so any descent
/// direction with a sufficient-decrease check converges.
void descend(const Objective& obj, Mat& w, Mat& b, const LogRegOptions& opt) {
  double step = 1.0;
  Mat gw(w.rows(), w.cols()), gb(b.rows(), b.cols());
  double loss = obj.eval(w, b, &gw, &gb);
  for (int it = 0; it < opt.max_iters; ++it) {
    double gnorm2 = gw.squaredNorm() + gb.squaredNorm();
    if (std::sqrt(gnorm2) < opt.grad_tol) return;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      Mat w2 = w - step * gw;
      Mat b2 = b - step * gb;
      double trial = obj.eval(w2, b2, nullptr, nullptr);
      if (trial <= loss - 1e-4 * step * gnorm2) {
        w = std::move(w2);
        b = std::move(b2);
        loss = obj.eval(w, b, &gw, &gb);
        step *= 1.5;  // cheap recovery after a cautious stretch
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      throw std::runtime_error("train_logreg: line search stalled (gradient norm " +
                               std::to_string(std::sqrt(gnorm2)) + ")");
    }
  }
}

struct BinaryObjective final : Objective {
  const Mat& x;  // events x features
  std::span<const int> y;
  double l2;

  BinaryObjective(const Mat& x_, std::span<const int> y_, double l2_) : x(x_), y(y_), l2(l2_) {}

  double eval(const Mat& w, const Mat& b, Mat* gw, Mat* gb) const override {
    const Index n = x.rows();
    Mat z = x * w.transpose();
    z.array() += b(0, 0);
    double loss = 0.0;
    Mat residual(n, 1);
    for (Index i = 0; i < n; ++i) {
      loss += softplus(z(i, 0)) - static_cast<double>(y[static_cast<size_t>(i)]) * z(i, 0);
      residual(i, 0) = sigmoid(z(i, 0)) - static_cast<double>(y[static_cast<size_t>(i)]);
    }
    loss = loss / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
    if (gw) {
      *gw = (residual.transpose() * x) / static_cast<double>(n) + l2 * w;
      (*gb)(0, 0) = residual.mean();
    }
    return loss;
  }
};

struct MultilabelObjective final : Objective {
  const Mat& x;
  const std::vector<std::vector<int32_t>>& targets;
  double l2;

  MultilabelObjective(const Mat& x_, const std::vector<std::vector<int32_t>>& t_, double l2_)
      : x(x_), targets(t_), l2(l2_) {}

  double eval(const Mat& w, const Mat& b, Mat* gw, Mat* gb) const override {
    const Index n = x.rows();
    Mat z = x * w.transpose();
    z.rowwise() += b.transpose().row(0);
    Mat q = z;
    softmax_rows(q);
    double loss = 0.0;
    // dL_i/dz = |T_i| q - multi-hot(T_i) for the masked softmax loss.
    Mat gz = Mat::Zero(n, w.rows());
    for (Index i = 0; i < n; ++i) {
      const auto& t = targets[static_cast<size_t>(i)];
      for (int32_t j : t) loss -= std::log(q(i, j));
      gz.row(i) = static_cast<double>(t.size()) * q.row(i);
      for (int32_t j : t) gz(i, j) -= 1.0;
    }
    loss = loss / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
    if (gw) {
      *gw = (gz.transpose() * x) / static_cast<double>(n) + l2 * w;
      *gb = gz.colwise().mean().transpose();
    }
    return loss;
  }
};

}  // namespace

LogRegModel train_logreg_binary(const Mat& features, std::span<const int> labels,
                                const LogRegOptions& opt) {
  if (features.rows() == 0) throw std::invalid_argument("train_logreg: no events");
  if (static_cast<size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("train_logreg: label count mismatch");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("train_logreg: labels must be 0/1");
  }
  Mat w = Mat::Zero(1, features.cols());
  Mat b = Mat::Zero(1, 1);
  descend(BinaryObjective(features, labels, opt.l2), w, b, opt);
  return LogRegModel{Tensor(std::move(w)), Tensor(std::move(b))};
}

LogRegModel train_logreg_multilabel(const Mat& features,
                                    const std::vector<std::vector<int32_t>>& targets,
                                    Index target_vocab, const LogRegOptions& opt) {
  if (features.rows() == 0) throw std::invalid_argument("train_logreg: no events");
  if (static_cast<size_t>(features.rows()) != targets.size()) {
    throw std::invalid_argument("train_logreg: target count mismatch");
  }
  for (const auto& t : targets) {
    if (t.empty()) throw std::invalid_argument("train_logreg: empty target set");
    for (int32_t j : t) {
      if (j < 0 || j >= target_vocab) throw std::out_of_range("train_logreg: target id");
    }
  }
  Mat w = Mat::Zero(target_vocab, features.cols());
  Mat b = Mat::Zero(target_vocab, 1);
  descend(MultilabelObjective(features, targets, opt.l2), w, b, opt);
  return LogRegModel{Tensor(std::move(w)), Tensor(std::move(b))};
}

double logreg_binary_loss(const Mat& features, std::span<const int> labels, const Mat& w,
                          double b, double l2) {
  Mat bm = Mat::Constant(1, 1, b);
  return BinaryObjective(features, labels, l2).eval(w, bm, nullptr, nullptr);
}

double logreg_multilabel_loss(const Mat& features, const std::vector<std::vector<int32_t>>& targets,
                              const Mat& W, const Mat& b, double l2) {
  return MultilabelObjective(features, targets, l2).eval(W, b, nullptr, nullptr);
}

}  // namespace resset
