#pragma once

#include <span>
#include <string>
#include <vector>

#include "resset/data.hpp"
#include "resset/graph.hpp"
#include "resset/rng.hpp"

namespace resset {

/// How the state sequence h_1..h_T collapses to the prediction vector.
enum class PoolingMode { mean, last, exp_smooth };

PoolingMode parse_pooling(const std::string& name);
std::string to_string(PoolingMode mode);

/// mean: arithmetic mean. last: h_T. exp_smooth: pooled_1 = h_1, then
/// pooled_t = alpha * pooled_{t-1} + (1 - alpha) * h_t; small alpha weights
/// recent states most. alpha is used by exp_smooth only and must lie in [0,1].
Value pool(std::span<const Value> states, PoolingMode mode, double alpha);

/// Affine classifier stack on the pooled state: layer_count - 1 relu layers
/// keeping the hidden width, then one affine map to the output width
/// (1 for readmission, target vocab size for multilabel).
struct HeadParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  size_t layer_count() const { return weights.size(); }
  Index out_dim() const { return weights.back().rows(); }
};

/// Weights uniform [-0.08, 0.08], biases zero.
HeadParams init_head(Index hidden_dim, Index out_dim, int layers, uint64_t seed);

struct HeadLeaves {
  std::vector<Value> weights;
  std::vector<Value> biases;
};

HeadLeaves register_head(Tape& tape, const HeadParams& params, bool requires_grad);

/// Final-layer preactivations for the pooled state.
Value head_logits(Value pooled, const HeadLeaves& head);

/// Readmission probability sigmoid(w . pooled + b), a 1-vector in (0,1).
Value readmission_forward(Value pooled, const HeadLeaves& head);

/// -log sigmoid(logit) for label 1, -log sigmoid(-logit) for label 0.
/// Algebraically -[y log p + (1-y) log(1-p)], but evaluated through the
/// matching half so neither branch can hit log of a rounded-to-zero tail.
Value readmission_loss(Value logit, int label);

/// Softmax scores over the target vocabulary (max-subtracted, stable).
Value multilabel_forward(Value pooled, const HeadLeaves& head);

/// -sum over target ids of log q_j. The data term touches occurred labels
/// only; gradients still reach every logit through the softmax.
Value masked_softmax_loss(Value q, std::span<const int32_t> target);

/// Per-label binary cross-entropy summed over the whole vocabulary,
/// the rejected alternative to masked_softmax_loss. Takes logits, not
/// probabilities, for the same log-tail reason as readmission_loss.
Value sigmoid_bce_loss(Value logits, std::span<const int32_t> target);

/// Ids of the k largest scores, ties broken by ascending id.
std::vector<int32_t> topk(const Tensor& scores, int k);

/// Treatment-recommendation event at visit_index (0-based): inputs are
/// visits 0..visit_index with the final visit's treatments withheld;
/// the target is that withheld bag.
struct TreatmentEvent {
  Trajectory inputs;
  std::vector<int32_t> target;
};

TreatmentEvent treatment_task_inputs(const Trajectory& t, size_t visit_index);

}  // namespace resset
