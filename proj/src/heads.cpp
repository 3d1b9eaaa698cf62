#include "resset/heads.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace resset {

PoolingMode parse_pooling(const std::string& name) {
  if (name == "mean") return PoolingMode::mean;
  if (name == "last") return PoolingMode::last;
  if (name == "exp_smooth") return PoolingMode::exp_smooth;
  throw std::invalid_argument("unknown pooling mode: " + name);
}

std::string to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::mean: return "mean";
    case PoolingMode::last: return "last";
    case PoolingMode::exp_smooth: return "exp_smooth";
  }
  throw std::logic_error("unreachable");
}

Value pool(std::span<const Value> states, PoolingMode mode, double alpha) {
  if (states.empty()) throw std::invalid_argument("pool: no states");
  switch (mode) {
    case PoolingMode::mean:
      return scale(add_chain(states), 1.0 / static_cast<double>(states.size()));
    case PoolingMode::last:
      return states.back();
    case PoolingMode::exp_smooth: {
      if (alpha < 0.0 || alpha > 1.0) {
        throw std::invalid_argument("pool: exp_smooth alpha must lie in [0, 1]");
      }
      Value pooled = states[0];
      for (size_t t = 1; t < states.size(); ++t) {
        pooled = add(scale(pooled, alpha), scale(states[t], 1.0 - alpha));
      }
      return pooled;
    }
  }
  throw std::logic_error("unreachable");
}

HeadParams init_head(Index hidden_dim, Index out_dim, int layers, uint64_t seed) {
  if (hidden_dim <= 0 || out_dim <= 0) {
    throw std::invalid_argument("init_head: dimensions must be positive");
  }
  if (layers < 1) throw std::invalid_argument("init_head: layers must be >= 1");
  Rng rng(Rng::mix(seed, 0x4EAD));
  auto weight = [&](Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-0.08, 0.08);
    return Tensor(std::move(m));
  };
  HeadParams p;
  for (int i = 0; i < layers - 1; ++i) {
    p.weights.push_back(weight(hidden_dim, hidden_dim));
    p.biases.push_back(Tensor::zeros(hidden_dim));
  }
  p.weights.push_back(weight(out_dim, hidden_dim));
  p.biases.push_back(Tensor::zeros(out_dim));
  return p;
}

HeadLeaves register_head(Tape& tape, const HeadParams& params, bool requires_grad) {
  HeadLeaves leaves;
  for (const Tensor& w : params.weights) leaves.weights.push_back(tape.leaf(w, requires_grad));
  for (const Tensor& b : params.biases) leaves.biases.push_back(tape.leaf(b, requires_grad));
  return leaves;
}

Value head_logits(Value pooled, const HeadLeaves& head) {
  if (head.weights.empty() || head.weights.size() != head.biases.size()) {
    throw std::invalid_argument("head_logits: malformed head");
  }
  Value x = pooled;
  for (size_t i = 0; i + 1 < head.weights.size(); ++i) {
    x = relu(matvec(head.weights[i], x) + head.biases[i]);
  }
  return matvec(head.weights.back(), x) + head.biases.back();
}

Value readmission_forward(Value pooled, const HeadLeaves& head) {
  Value z = head_logits(pooled, head);
  if (z.rows() != 1) throw std::invalid_argument("readmission_forward: head is not 1-dim");
  return sigmoid(z);
}

Value readmission_loss(Value logit, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("readmission_loss: label not 0/1");
  Value z = label == 1 ? logit : scale(logit, -1.0);
  return scale(sum(log(sigmoid(z))), -1.0);
}

Value multilabel_forward(Value pooled, const HeadLeaves& head) {
  return softmax(head_logits(pooled, head));
}

Value masked_softmax_loss(Value q, std::span<const int32_t> target) {
  if (target.empty()) throw std::invalid_argument("masked_softmax_loss: empty target set");
  std::vector<int32_t> ids(target.begin(), target.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return scale(sum(log(gather(q, std::move(ids)))), -1.0);
}

Value sigmoid_bce_loss(Value logits, std::span<const int32_t> target) {
  if (target.empty()) throw std::invalid_argument("sigmoid_bce_loss: empty target set");
  const auto vocab = static_cast<int32_t>(logits.rows());
  std::vector<char> is_target(static_cast<size_t>(vocab), 0);
  for (int32_t id : target) {
    if (id < 0 || id >= vocab) throw std::out_of_range("sigmoid_bce_loss: target out of vocab");
    is_target[static_cast<size_t>(id)] = 1;
  }
  std::vector<int32_t> pos, neg;
  for (int32_t j = 0; j < vocab; ++j) (is_target[static_cast<size_t>(j)] ? pos : neg).push_back(j);
  // -log sigmoid(z_j) over occurred labels, -log sigmoid(-z_j) over the rest.
  Value loss = scale(sum(log(sigmoid(gather(logits, std::move(pos))))), -1.0);
  if (!neg.empty()) {
    loss = loss + scale(sum(log(sigmoid(scale(gather(logits, std::move(neg)), -1.0)))), -1.0);
  }
  return loss;
}

std::vector<int32_t> topk(const Tensor& scores, int k) {
  if (!scores.is_vector()) throw std::invalid_argument("topk: scores must be a vector");
  const auto n = static_cast<int>(scores.rows());
  if (k < 1 || k > n) throw std::invalid_argument("topk: k out of range");
  std::vector<int32_t> ids(static_cast<size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](int32_t a, int32_t b) {
    double sa = scores(a), sb = scores(b);
    return sa != sb ? sa > sb : a < b;
  });
  ids.resize(static_cast<size_t>(k));
  return ids;
}

TreatmentEvent treatment_task_inputs(const Trajectory& t, size_t visit_index) {
  if (visit_index >= t.visits.size()) {
    throw std::out_of_range("treatment_task_inputs: visit index past end");
  }
  TreatmentEvent ev;
  ev.inputs.id = t.id;
  ev.inputs.readmit = t.readmit;
  ev.inputs.visits.assign(t.visits.begin(),
                          t.visits.begin() + static_cast<ptrdiff_t>(visit_index) + 1);
  ev.target = ev.inputs.visits.back().tx;
  ev.inputs.visits.back().tx.clear();
  return ev;
}

}  // namespace resset
