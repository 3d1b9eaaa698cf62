#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "resset/tensor.hpp"

namespace resset {

enum class Op : uint8_t {
  kLeaf,
  kMatVec,
  kAdd,
  kSub,
  kMul,
  kRelu,
  kTanh,
  kSigmoid,
  kSquareShift,  // x -> (1 + x)^2
  kSum,
  kL2Norm,
  kConcat,
  kScale,      // x -> c * x, c a compile-time-known constant
  kScalarDiv,  // (x, s) -> x / s with s a scalar node
  kRow,        // matrix -> one row, as a column vector
  kSoftmax,
  kLog,
  kGather,  // vector -> selected entries
};

/// One value in the dynamic computation graph: the forward result, the
/// gradient accumulated by backward(), and what produced it.
struct Node {
  Tensor value;
  Mat grad;  // same shape as value, zero until backward reaches it
  Op op = Op::kLeaf;
  bool requires_grad = false;
  bool touched = false;  // received a gradient contribution during backward
  int32_t parent_a = -1;
  int32_t parent_b = -1;
  double aux = 0.0;               // scale constant or row index
  std::vector<int32_t> aux_ids;   // gather indices
};

class Tape;

/// Cheap handle to a node on a tape. Free functions below combine handles
/// into expressions: y = matvec(W, x); z = relu(y + b);
struct Value {
  Tape* tape = nullptr;
  int32_t idx = -1;

  const Tensor& tensor() const;
  const Mat& grad() const;
  Index rows() const { return tensor().rows(); }
  Index cols() const { return tensor().cols(); }
  double scalar() const { return tensor().as_scalar(); }
};

/// Records nodes in creation order, which is a topological order of the
/// graph. Rebuilt per forward pass; confined to one thread.
class Tape {
 public:
  /// With grad_enabled=false the tape keeps values only (evaluation mode):
  /// no gradient buffers, and backward() is refused.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Tensor v, bool requires_grad = false);
  Value leaf(const Mat& v, bool requires_grad = false) { return leaf(Tensor(v), requires_grad); }
  Value constant(Tensor v) { return leaf(std::move(v), false); }
  Value zeros(Index rows, Index cols = 1) { return constant(Tensor::zeros(rows, cols)); }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation
  /// order, accumulating gradients into every reachable requires_grad node.
  /// One shot per tape: a second call is an error.
  void backward(Value loss);

  size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }
  const Node& node(int32_t idx) const { return nodes_[static_cast<size_t>(idx)]; }
  const Tensor& value(int32_t idx) const { return nodes_[static_cast<size_t>(idx)].value; }
  const Mat& grad(int32_t idx) const;

  /// Smallest |preactivation| seen at any relu input and smallest ||x|| at
  /// any l2norm input during this tape's lifetime. Finite-difference checks
  /// use these to skip probes that straddle a derivative kink.
  double relu_margin() const { return relu_margin_; }
  double norm_margin() const { return norm_margin_; }

  Value emit(Op op, Tensor value, int32_t pa, int32_t pb, double aux = 0.0,
             std::vector<int32_t> ids = {});

 private:
  void propagate(int32_t idx);
  Mat& grad_buf(int32_t idx);

  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
  double relu_margin_ = std::numeric_limits<double>::infinity();
  double norm_margin_ = std::numeric_limits<double>::infinity();

  friend Value relu(Value);
  friend Value l2norm(Value);
};

// Arithmetic over same-shaped nodes.
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }

/// W (m x n) times x (n-vector) -> m-vector.
Value matvec(Value W, Value x);

// Elementwise activations.
Value relu(Value x);
Value tanh(Value x);
Value sigmoid(Value x);
/// (1 + x)^2, the fixed interaction nonlinearity.
Value square_shift(Value x);
/// Natural log; entries must be strictly positive.
Value log(Value x);

// Reductions to a 1x1 node. Both require a nonempty input.
Value sum(Value x);
Value l2norm(Value x);

/// Stack two column vectors; gradient splits back to the parents.
Value concat(Value a, Value b);

/// Multiply by a constant.
Value scale(Value x, double c);
inline Value operator*(double c, Value x) { return scale(x, c); }

/// Divide a vector elementwise by a scalar node.
Value scalar_div(Value x, Value s);

/// Row i of a matrix node as a column vector. This is the embedding-lookup
/// primitive: gradients flow back into row i only.
Value row(Value X, Index i);

/// Numerically stable softmax (max subtracted before exponentiation).
Value softmax(Value x);

/// Entries x[ids[j]] as a vector; backward scatters into the same slots.
Value gather(Value x, std::vector<int32_t> ids);

/// Left-to-right sum of a node list. Order is the caller's: canonical-order
/// summation is what makes set encodings bit-exactly permutation invariant.
Value add_chain(std::span<const Value> xs);

struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // coordinates probing within kink_margin of a relu/norm kink
  Index worst_param = -1;
  Index worst_coord = -1;
};

/// Builds a scalar loss from parameter leaves on a fresh tape.
using LossBuilder = std::function<Value(Tape&, const std::vector<Value>&)>;

/// Compares analytic gradients against central finite differences over every
/// parameter coordinate. Relative error uses |a - b| / max(|a|, |b|, 1e-6);
/// probes whose forward pass comes within kink_margin of a relu or l2norm
/// kink are skipped (counted in the report).
GradCheckReport grad_check(const LossBuilder& build, const std::vector<Tensor>& params,
                           double step = 1e-5, double kink_margin = 1e-3);

}  // namespace resset
