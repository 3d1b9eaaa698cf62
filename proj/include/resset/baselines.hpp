#pragma once

#include <span>
#include <vector>

#include "resset/codespace.hpp"
#include "resset/data.hpp"
#include "resset/rng.hpp"
#include "resset/tensor.hpp"

namespace resset {

/// Order-blind count features: entry i counts the visits containing disease
/// code i; entry n_disease + j counts treatment code j. Callers pass the
/// visit window they want counted (already truncated / withheld).
Tensor bow_features(std::span<const Visit> visits, Index n_disease, Index n_treatment);

/// Visit-ordered stream of embedding-table row ids, one per code token,
/// within-visit order ascending row id (the deterministic evaluation order).
/// Keeps only the max_tokens most recent tokens.
std::vector<int> flat_tokens(std::span<const Visit> visits, const EmbeddingTable& emb,
                             int max_tokens);

/// Same stream but each visit's tokens are shuffled (training order).
std::vector<int> flat_tokens_shuffled(std::span<const Visit> visits, const EmbeddingTable& emb,
                                      int max_tokens, Rng& rng);

struct LogRegOptions {
  double l2 = 1e-3;       // on weights only; the intercept stays free
  int max_iters = 2000;
  double grad_tol = 1e-6;  // stop when the full gradient norm drops below
};

/// weights: out x features (out = 1 for the binary task); bias: out.
struct LogRegModel {
  Tensor weights;
  Tensor bias;
};

/// Full-batch gradient descent with backtracking line search on the convex
/// objective mean logistic loss + (l2/2)||w||^2. Deterministic; starts at
/// zero. Throws if the line search cannot find a descent step.
LogRegModel train_logreg_binary(const Mat& features, std::span<const int> labels,
                                const LogRegOptions& opt);

/// Multilabel variant: one softmax layer, loss -sum_{j in target} log q_j
/// averaged over events (the masked loss the neural heads use).
LogRegModel train_logreg_multilabel(const Mat& features,
                                    const std::vector<std::vector<int32_t>>& targets,
                                    Index target_vocab, const LogRegOptions& opt);

/// Objective values, exposed for convexity and convergence tests.
double logreg_binary_loss(const Mat& features, std::span<const int> labels, const Mat& w,
                          double b, double l2);
double logreg_multilabel_loss(const Mat& features, const std::vector<std::vector<int32_t>>& targets,
                              const Mat& W, const Mat& b, double l2);

}  // namespace resset
