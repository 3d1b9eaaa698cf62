#include "resset/recurrent.hpp"

#include <stdexcept>

namespace resset {

LstmParams init_lstm(Index input_dim, Index hidden_dim, uint64_t seed) {
  if (input_dim <= 0 || hidden_dim <= 0) {
    throw std::invalid_argument("init_lstm: dimensions must be positive");
  }
  Rng rng(Rng::mix(seed, 0x757D));
  auto weight = [&] {
    Mat m(hidden_dim, input_dim + hidden_dim);
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-0.08, 0.08);
    return Tensor(std::move(m));
  };
  LstmParams p;
  p.w_forget = weight();
  p.w_input = weight();
  p.w_output = weight();
  p.w_cell = weight();
  // Forget bias starts at one so early training keeps memory by default.
  p.b_forget = Tensor(Mat::Constant(hidden_dim, 1, 1.0));
  p.b_input = Tensor::zeros(hidden_dim);
  p.b_output = Tensor::zeros(hidden_dim);
  p.b_cell = Tensor::zeros(hidden_dim);
  return p;
}

LstmLeaves register_lstm(Tape& tape, const LstmParams& params, bool requires_grad) {
  auto put = [&](const Tensor& t) { return tape.leaf(t, requires_grad); };
  return LstmLeaves{put(params.w_forget), put(params.w_input),  put(params.w_output),
                    put(params.w_cell),   put(params.b_forget), put(params.b_input),
                    put(params.b_output), put(params.b_cell)};
}

LstmState lstm_zero_state(Tape& tape, Index hidden_dim) {
  return LstmState{tape.zeros(hidden_dim), tape.zeros(hidden_dim)};
}

LstmState lstm_step(const LstmLeaves& params, Value v_t, const LstmState& prev) {
  Value joint = concat(v_t, prev.state);
  Value forget_gate = sigmoid(matvec(params.w_forget, joint) + params.b_forget);
  Value input_gate = sigmoid(matvec(params.w_input, joint) + params.b_input);
  Value output_gate = sigmoid(matvec(params.w_output, joint) + params.b_output);
  Value candidate = tanh(matvec(params.w_cell, joint) + params.b_cell);
  Value cell = forget_gate * prev.cell + input_gate * candidate;
  Value state = output_gate * tanh(cell);
  return LstmState{cell, state};
}

std::vector<Value> unroll(const LstmLeaves& params, std::span<const Value> inputs,
                          bool relu_input, double dropout_p, Rng* rng, bool training) {
  if (inputs.empty()) throw std::invalid_argument("unroll: no inputs");
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw std::invalid_argument("unroll: dropout must lie in [0, 1)");
  }
  if (training && dropout_p > 0.0 && rng == nullptr) {
    throw std::invalid_argument("unroll: training dropout needs an rng");
  }
  Tape& tape = *inputs[0].tape;
  LstmState s = lstm_zero_state(tape, params.b_forget.rows());
  std::vector<Value> states;
  states.reserve(inputs.size());
  for (Value v : inputs) {
    if (relu_input) v = relu(v);
    if (training && dropout_p > 0.0) {
      // Inverted dropout: surviving entries scaled by 1/keep now, so the
      // evaluation path uses the weights untouched.
      double keep = 1.0 - dropout_p;
      Mat mask(v.rows(), 1);
      for (Index i = 0; i < mask.rows(); ++i) {
        mask(i, 0) = rng->uniform() < keep ? 1.0 / keep : 0.0;
      }
      v = v * tape.constant(Tensor(std::move(mask)));
    }
    s = lstm_step(params, v, s);
    states.push_back(s.state);
  }
  return states;
}

Value state_norm_penalty(std::span<const Value> states, double beta) {
  if (states.empty()) throw std::invalid_argument("state_norm_penalty: no states");
  Tape& tape = *states[0].tape;
  if (beta == 0.0 || states.size() < 2) return tape.zeros(1);
  std::vector<Value> gaps;
  gaps.reserve(states.size() - 1);
  for (size_t t = 1; t < states.size(); ++t) {
    Value step = sub(l2norm(states[t]), l2norm(states[t - 1]));
    gaps.push_back(step * step);
  }
  return scale(add_chain(gaps), beta / static_cast<double>(states.size()));
}

}  // namespace resset
