#include "resset/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace resset {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

const Tensor& Value::tensor() const { return tape->value(idx); }
const Mat& Value::grad() const { return tape->grad(idx); }

Value Tape::leaf(Tensor v, bool requires_grad) {
  Node n;
  n.value = std::move(v);
  n.op = Op::kLeaf;
  n.requires_grad = grad_enabled_ && requires_grad;
  if (n.requires_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int32_t>(nodes_.size() - 1)};
}

Value Tape::emit(Op op, Tensor value, int32_t pa, int32_t pb, double aux,
                 std::vector<int32_t> ids) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.aux = aux;
  n.aux_ids = std::move(ids);
  if (grad_enabled_) {
    n.parent_a = pa;
    n.parent_b = pb;
    n.requires_grad = (pa >= 0 && nodes_[static_cast<size_t>(pa)].requires_grad) ||
                      (pb >= 0 && nodes_[static_cast<size_t>(pb)].requires_grad);
    if (n.requires_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int32_t>(nodes_.size() - 1)};
}

const Mat& Tape::grad(int32_t idx) const {
  const Node& n = nodes_[static_cast<size_t>(idx)];
  if (n.grad.size() == 0 && n.value.size() != 0)
    throw std::logic_error("Tape::grad: node carries no gradient buffer");
  return n.grad;
}

Mat& Tape::grad_buf(int32_t idx) { return nodes_[static_cast<size_t>(idx)].grad; }

void Tape::backward(Value loss) {
  if (!grad_enabled_) throw std::logic_error("backward: tape was built grad-disabled");
  if (nodes_.empty()) throw std::logic_error("backward: empty tape");
  if (backward_done_) throw std::logic_error("backward: tape already consumed");
  if (loss.tape != this) throw std::invalid_argument("backward: loss lives on another tape");
  Node& top = nodes_[static_cast<size_t>(loss.idx)];
  if (!top.value.is_scalar()) throw std::invalid_argument("backward: loss is not scalar");
  backward_done_ = true;

  if (top.grad.size() == 0) top.grad = Mat::Zero(1, 1);
  top.grad(0, 0) = 1.0;
  top.touched = true;

  for (int32_t i = loss.idx; i >= 0; --i) {
    if (nodes_[static_cast<size_t>(i)].touched) propagate(i);
  }
}

void Tape::propagate(int32_t idx) {
  Node& n = nodes_[static_cast<size_t>(idx)];
  const Mat& g = n.grad;

  auto into = [&](int32_t parent) -> Mat* {
    if (parent < 0) return nullptr;
    Node& p = nodes_[static_cast<size_t>(parent)];
    if (!p.requires_grad) return nullptr;
    p.touched = true;
    return &p.grad;
  };

  Mat* ga = into(n.parent_a);
  Mat* gb = into(n.parent_b);
  if (!ga && !gb) return;
  const Mat* va = n.parent_a >= 0 ? &nodes_[static_cast<size_t>(n.parent_a)].value.mat() : nullptr;
  const Mat* vb = n.parent_b >= 0 ? &nodes_[static_cast<size_t>(n.parent_b)].value.mat() : nullptr;

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatVec:
      // y = W x:  dW += g x^T,  dx += W^T g
      if (ga) ga->noalias() += g * vb->transpose();
      if (gb) gb->noalias() += va->transpose() * g;
      break;
    case Op::kAdd:
      if (ga) *ga += g;
      if (gb) *gb += g;
      break;
    case Op::kSub:
      if (ga) *ga += g;
      if (gb) *gb -= g;
      break;
    case Op::kMul:
      if (ga) ga->array() += g.array() * vb->array();
      if (gb) gb->array() += g.array() * va->array();
      break;
    case Op::kRelu:
      if (ga) ga->array() += g.array() * (va->array() > 0.0).cast<double>();
      break;
    case Op::kTanh:
      if (ga) ga->array() += g.array() * (1.0 - n.value.mat().array().square());
      break;
    case Op::kSigmoid:
      if (ga) ga->array() += g.array() * n.value.mat().array() * (1.0 - n.value.mat().array());
      break;
    case Op::kSquareShift:
      if (ga) ga->array() += g.array() * 2.0 * (1.0 + va->array());
      break;
    case Op::kLog:
      if (ga) ga->array() += g.array() / va->array();
      break;
    case Op::kSum:
      if (ga) ga->array() += g(0, 0);
      break;
    case Op::kL2Norm: {
      // d||x|| = x / ||x||; the subgradient at the origin is zero.
      if (ga) {
        double r = n.value.as_scalar();
        if (r > 0.0) ga->noalias() += (g(0, 0) / r) * (*va);
      }
      break;
    }
    case Op::kConcat:
      if (ga) *ga += g.topRows(va->rows());
      if (gb) *gb += g.bottomRows(vb->rows());
      break;
    case Op::kScale:
      if (ga) *ga += n.aux * g;
      break;
    case Op::kScalarDiv: {
      // f = x / s:  dx += g / s,  ds += -<g, f> / s
      double s = vb->operator()(0, 0);
      if (ga) ga->noalias() += g / s;
      if (gb) (*gb)(0, 0) -= (g.array() * n.value.mat().array()).sum() / s;
      break;
    }
    case Op::kRow:
      if (ga) ga->row(static_cast<Index>(n.aux)) += g.transpose();
      break;
    case Op::kSoftmax: {
      // dx_i = q_i * (g_i - <g, q>)
      if (ga) {
        const auto& q = n.value.mat().array();
        double dot = (g.array() * q).sum();
        ga->array() += q * (g.array() - dot);
      }
      break;
    }
    case Op::kGather:
      if (ga) {
        for (size_t j = 0; j < n.aux_ids.size(); ++j)
          (*ga)(n.aux_ids[j], 0) += g(static_cast<Index>(j), 0);
      }
      break;
  }
}

namespace {

Tape* common_tape(Value a, Value b) {
  require(a.tape != nullptr && a.tape == b.tape, "operands must share one tape");
  return a.tape;
}

void require_same_shape(Value a, Value b, const char* op) {
  if (!a.tensor().same_shape(b.tensor()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Value add(Value a, Value b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a, b, "add");
  return t->emit(Op::kAdd, Tensor(a.tensor().mat() + b.tensor().mat()), a.idx, b.idx);
}

Value sub(Value a, Value b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a, b, "sub");
  return t->emit(Op::kSub, Tensor(a.tensor().mat() - b.tensor().mat()), a.idx, b.idx);
}

Value mul(Value a, Value b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a, b, "mul");
  return t->emit(Op::kMul, Tensor(a.tensor().mat().cwiseProduct(b.tensor().mat())), a.idx, b.idx);
}

Value matvec(Value W, Value x) {
  Tape* t = common_tape(W, x);
  require(x.tensor().is_vector(), "matvec: x must be a vector");
  require(W.tensor().cols() == x.tensor().rows(), "matvec: inner dimensions disagree");
  return t->emit(Op::kMatVec, Tensor(W.tensor().mat() * x.tensor().mat()), W.idx, x.idx);
}

Value relu(Value x) {
  Tape* t = x.tape;
  const auto& v = x.tensor().mat();
  if (v.size() > 0) t->relu_margin_ = std::min(t->relu_margin_, v.array().abs().minCoeff());
  return t->emit(Op::kRelu, Tensor(v.cwiseMax(0.0)), x.idx, -1);
}

Value tanh(Value x) {
  return x.tape->emit(Op::kTanh, Tensor(x.tensor().mat().array().tanh().matrix()), x.idx, -1);
}

Value sigmoid(Value x) {
  const auto& v = x.tensor().mat().array();
  // 1/(1+exp(-x)) overflows for very negative x; route through tanh instead.
  Mat out = (0.5 * (v * 0.5).tanh() + 0.5).matrix();
  return x.tape->emit(Op::kSigmoid, Tensor(std::move(out)), x.idx, -1);
}

Value square_shift(Value x) {
  Mat out = (1.0 + x.tensor().mat().array()).square().matrix();
  return x.tape->emit(Op::kSquareShift, Tensor(std::move(out)), x.idx, -1);
}

Value log(Value x) {
  require((x.tensor().mat().array() > 0.0).all(), "log: nonpositive entry");
  return x.tape->emit(Op::kLog, Tensor(x.tensor().mat().array().log().matrix()), x.idx, -1);
}

Value sum(Value x) {
  require(x.tensor().size() > 0, "sum: empty tensor");
  return x.tape->emit(Op::kSum, Tensor::scalar(x.tensor().mat().sum()), x.idx, -1);
}

Value l2norm(Value x) {
  require(x.tensor().size() > 0, "l2norm: empty tensor");
  Tape* t = x.tape;
  double r = x.tensor().mat().norm();
  t->norm_margin_ = std::min(t->norm_margin_, r);
  return t->emit(Op::kL2Norm, Tensor::scalar(r), x.idx, -1);
}

Value concat(Value a, Value b) {
  Tape* t = common_tape(a, b);
  require(a.tensor().is_vector() && b.tensor().is_vector(), "concat: vectors only");
  Mat out(a.rows() + b.rows(), 1);
  out.topRows(a.rows()) = a.tensor().mat();
  out.bottomRows(b.rows()) = b.tensor().mat();
  return t->emit(Op::kConcat, Tensor(std::move(out)), a.idx, b.idx);
}

Value scale(Value x, double c) {
  return x.tape->emit(Op::kScale, Tensor(c * x.tensor().mat()), x.idx, -1, c);
}

Value scalar_div(Value x, Value s) {
  Tape* t = common_tape(x, s);
  require(s.tensor().is_scalar(), "scalar_div: divisor must be scalar");
  double d = s.tensor().as_scalar();
  require(d != 0.0, "scalar_div: division by zero");
  return t->emit(Op::kScalarDiv, Tensor(x.tensor().mat() / d), x.idx, s.idx);
}

Value row(Value X, Index i) {
  require(i >= 0 && i < X.tensor().rows(), "row: index out of range");
  return X.tape->emit(Op::kRow, Tensor(X.tensor().mat().row(i).transpose()), X.idx, -1,
                      static_cast<double>(i));
}

Value softmax(Value x) {
  require(x.tensor().is_vector() && x.tensor().size() > 0, "softmax: nonempty vector required");
  const auto& v = x.tensor().mat().array();
  Eigen::ArrayXd e = (v - v.maxCoeff()).exp();
  Mat out = (e / e.sum()).matrix();
  return x.tape->emit(Op::kSoftmax, Tensor(std::move(out)), x.idx, -1);
}

Value gather(Value x, std::vector<int32_t> ids) {
  require(x.tensor().is_vector(), "gather: vector required");
  Mat out(static_cast<Index>(ids.size()), 1);
  for (size_t j = 0; j < ids.size(); ++j) {
    require(ids[j] >= 0 && ids[j] < x.tensor().rows(), "gather: index out of range");
    out(static_cast<Index>(j), 0) = x.tensor()(ids[j], 0);
  }
  return x.tape->emit(Op::kGather, Tensor(std::move(out)), x.idx, -1, 0.0, std::move(ids));
}

Value add_chain(std::span<const Value> xs) {
  require(!xs.empty(), "add_chain: empty list");
  Value acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

GradCheckReport grad_check(const LossBuilder& build, const std::vector<Tensor>& params,
                           double step, double kink_margin) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");

  // Analytic pass.
  std::vector<Mat> analytic;
  {
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(params.size());
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
    Value loss = build(tape, leaves);
    tape.backward(loss);
    for (const Value& v : leaves) analytic.push_back(v.grad());
  }

  auto eval_at = [&](const std::vector<Tensor>& p, double* margin) {
    Tape tape(false);
    std::vector<Value> leaves;
    leaves.reserve(p.size());
    for (const Tensor& t : p) leaves.push_back(tape.leaf(t, false));
    double v = build(tape, leaves).scalar();
    *margin = std::min(tape.relu_margin(), tape.norm_margin());
    return v;
  };

  GradCheckReport report;
  std::vector<Tensor> probe = params;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const Mat& base = params[pi].mat();
    for (Index k = 0; k < base.size(); ++k) {
      Mat bumped = base;
      double margin_plus = 0.0, margin_minus = 0.0;
      bumped.reshaped()(k) = base.reshaped()(k) + step;
      probe[pi] = Tensor(bumped);
      double f_plus = eval_at(probe, &margin_plus);
      bumped.reshaped()(k) = base.reshaped()(k) - step;
      probe[pi] = Tensor(bumped);
      double f_minus = eval_at(probe, &margin_minus);
      probe[pi] = params[pi];

      if (std::min(margin_plus, margin_minus) < kink_margin) {
        ++report.skipped;
        continue;
      }
      double numeric = (f_plus - f_minus) / (2.0 * step);
      double a = analytic[pi].reshaped()(k);
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = static_cast<Index>(pi);
        report.worst_coord = k;
      }
    }
  }
  return report;
}

}  // namespace resset
