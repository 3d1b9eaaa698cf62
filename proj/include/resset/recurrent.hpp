#pragma once

#include <span>

#include "resset/graph.hpp"
#include "resset/rng.hpp"

namespace resset {

/// Gate and candidate-memory parameters. Each weight acts on the
/// concatenation [input; previous state], so shapes are hidden x (input + hidden).
struct LstmParams {
  Tensor w_forget, w_input, w_output, w_cell;
  Tensor b_forget, b_input, b_output, b_cell;

  Index hidden_dim() const { return w_forget.rows(); }
  Index input_dim() const { return w_forget.cols() - w_forget.rows(); }
};

/// Weights uniform [-0.08, 0.08]; forget-gate bias 1, other biases 0.
LstmParams init_lstm(Index input_dim, Index hidden_dim, uint64_t seed);

/// On-tape handles to one forward pass's copy of the parameters.
struct LstmLeaves {
  Value w_forget, w_input, w_output, w_cell;
  Value b_forget, b_input, b_output, b_cell;
};

LstmLeaves register_lstm(Tape& tape, const LstmParams& params, bool requires_grad);

struct LstmState {
  Value cell;   // internal memory c_t
  Value state;  // illness state h_t
};

/// All-zero initial state.
LstmState lstm_zero_state(Tape& tape, Index hidden_dim);

/// One update: gates are sigmoids of affine maps of [v_t; h_{t-1}],
/// candidate memory is the tanh counterpart, then
///   c_t = forget * c_{t-1} + input * candidate
///   h_t = output * tanh(c_t)
LstmState lstm_step(const LstmLeaves& params, Value v_t, const LstmState& prev);

/// Runs the cell over the inputs from the zero state and returns h_1..h_T.
/// Each input is passed through relu (when relu_input) and, in training,
/// inverted dropout with keep probability 1 - dropout_p, so evaluation needs
/// no rescaling. Evaluation ignores the rng entirely.
std::vector<Value> unroll(const LstmLeaves& params, std::span<const Value> inputs,
                          bool relu_input, double dropout_p, Rng* rng, bool training);

/// (beta / T) * sum over t >= 2 of (||h_t|| - ||h_{t-1}||)^2.
/// Zero when beta == 0 or there is a single state.
Value state_norm_penalty(std::span<const Value> states, double beta);

}  // namespace resset
