#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "resset/graph.hpp"
#include "resset/rng.hpp"

using namespace resset;

namespace {

Mat colvec(std::initializer_list<double> xs) {
  Mat m(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

bool bit_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("leaf holds its value and starts with zero grad") {
  Tape tape;
  Value x = tape.leaf(colvec({1.0, -2.0}), true);
  CHECK(x.tensor()(0, 0) == 1.0);
  CHECK(x.tensor()(1, 0) == -2.0);
  CHECK(x.grad().isZero());
}

TEST_CASE("sum of matvec: gradients are column sums and the outer product") {
  Mat W(2, 2);
  W << 1.0, 2.0, 3.0, 4.0;
  Tape tape;
  Value Wv = tape.leaf(W, true);
  Value xv = tape.leaf(colvec({1.0, 1.0}), true);
  Value loss = sum(matvec(Wv, xv));
  CHECK(loss.scalar() == 10.0);
  tape.backward(loss);

  CHECK(xv.grad()(0, 0) == 4.0);
  CHECK(xv.grad()(1, 0) == 6.0);
  CHECK(Wv.grad().isOnes());
}

TEST_CASE("l2norm value and gradient at [3,4]") {
  Tape tape;
  Value x = tape.leaf(colvec({3.0, 4.0}), true);
  Value n = l2norm(x);
  CHECK(n.scalar() == doctest::Approx(5.0).epsilon(1e-15));
  tape.backward(n);
  CHECK(x.grad()(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(x.grad()(1, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("squared norm gradient is 2x") {
  Tape tape;
  Value x = tape.leaf(colvec({3.0, 4.0}), true);
  Value n = l2norm(x);
  Value loss = n * n;
  CHECK(loss.scalar() == doctest::Approx(25.0).epsilon(1e-15));
  tape.backward(loss);
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(x.grad()(1, 0) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("a value used twice accumulates both contributions") {
  Tape tape;
  Value x = tape.leaf(colvec({1.5}), true);
  Value loss = sum(x + x);
  tape.backward(loss);
  CHECK(x.grad()(0, 0) == 2.0);
}

TEST_CASE("elementwise mul swaps operands in backward") {
  Tape tape;
  Value a = tape.leaf(colvec({2.0, 3.0}), true);
  Value b = tape.leaf(colvec({5.0, 7.0}), true);
  tape.backward(sum(a * b));
  CHECK(a.grad()(0, 0) == 5.0);
  CHECK(a.grad()(1, 0) == 7.0);
  CHECK(b.grad()(0, 0) == 2.0);
  CHECK(b.grad()(1, 0) == 3.0);
}

TEST_CASE("sub sends a negated gradient to the right operand") {
  Tape tape;
  Value a = tape.leaf(colvec({1.0}), true);
  Value b = tape.leaf(colvec({4.0}), true);
  tape.backward(sum(a - b));
  CHECK(a.grad()(0, 0) == 1.0);
  CHECK(b.grad()(0, 0) == -1.0);
}

TEST_CASE("activations at fixed points") {
  Tape tape;
  Value x = tape.leaf(colvec({0.0, 1.0, -1.0}), true);
  CHECK(sigmoid(x).tensor()(0, 0) == 0.5);
  CHECK(resset::tanh(x).tensor()(0, 0) == 0.0);
  Value r = relu(x);
  CHECK(r.tensor()(0, 0) == 0.0);
  CHECK(r.tensor()(1, 0) == 1.0);
  CHECK(r.tensor()(2, 0) == 0.0);
}

TEST_CASE("square_shift computes (1 + x)^2 with gradient 2(1 + x)") {
  Tape tape;
  Value x = tape.leaf(colvec({0.0, 1.0, -1.0}), true);
  Value y = square_shift(x);
  CHECK(y.tensor()(0, 0) == 1.0);
  CHECK(y.tensor()(1, 0) == 4.0);
  CHECK(y.tensor()(2, 0) == 0.0);
  tape.backward(sum(y));
  CHECK(x.grad()(0, 0) == 2.0);
  CHECK(x.grad()(1, 0) == 4.0);
  CHECK(x.grad()(2, 0) == 0.0);
}

TEST_CASE("log values and reciprocal gradient") {
  Tape tape;
  Value x = tape.leaf(colvec({1.0, std::exp(1.0), 4.0}), true);
  Value y = resset::log(x);
  CHECK(y.tensor()(0, 0) == 0.0);
  CHECK(y.tensor()(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  tape.backward(sum(y));
  CHECK(x.grad()(2, 0) == 0.25);

  Tape bad;
  Value z = bad.leaf(colvec({0.0}), true);
  CHECK_THROWS_AS(resset::log(z), std::invalid_argument);
}

TEST_CASE("softmax is stable at huge inputs and sums to one") {
  Tape tape;
  Value x = tape.leaf(colvec({1000.0, 1000.0}), false);
  Value q = softmax(x);
  CHECK(q.tensor()(0, 0) == 0.5);
  CHECK(q.tensor()(1, 0) == 0.5);

  Value y = tape.leaf(colvec({1.0, 2.0, 3.0}), false);
  Tensor qs = softmax(y).tensor();
  CHECK(qs.mat().sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(qs(2, 0) > qs(1, 0));
  CHECK(qs(1, 0) > qs(0, 0));
}

TEST_CASE("gather scatters gradients into the selected slots") {
  Tape tape;
  Value x = tape.leaf(colvec({1.0, 2.0, 3.0}), true);
  Value g = gather(x, {2, 0, 2});
  CHECK(g.tensor()(0, 0) == 3.0);
  CHECK(g.tensor()(1, 0) == 1.0);
  CHECK(g.tensor()(2, 0) == 3.0);
  tape.backward(sum(g));
  CHECK(x.grad()(0, 0) == 1.0);
  CHECK(x.grad()(1, 0) == 0.0);
  CHECK(x.grad()(2, 0) == 2.0);
}

TEST_CASE("row gradient reaches only that row") {
  Mat X(3, 2);
  X << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Tape tape;
  Value Xv = tape.leaf(X, true);
  Value r = row(Xv, 1);
  CHECK(r.rows() == 2);
  CHECK(r.tensor()(0, 0) == 3.0);
  CHECK(r.tensor()(1, 0) == 4.0);
  tape.backward(sum(r));
  Mat expect = Mat::Zero(3, 2);
  expect.row(1).setOnes();
  CHECK(bit_equal(Xv.grad(), expect));
}

TEST_CASE("concat splits its gradient back to the parents") {
  Tape tape;
  Value a = tape.leaf(colvec({1.0, 2.0}), true);
  Value b = tape.leaf(colvec({3.0, 4.0, 5.0}), true);
  Value c = concat(a, b);
  CHECK(c.rows() == 5);
  CHECK(c.tensor()(2, 0) == 3.0);
  tape.backward(sum(scale(c, 3.0)));
  CHECK(a.grad().isConstant(3.0));
  CHECK(b.grad().isConstant(3.0));
}

TEST_CASE("scalar_div differentiates through both the vector and the divisor") {
  Tape tape;
  Value x = tape.leaf(colvec({2.0, 4.0}), true);
  Value s = tape.leaf(colvec({2.0}), true);
  Value y = scalar_div(x, s);
  CHECK(y.tensor()(0, 0) == 1.0);
  CHECK(y.tensor()(1, 0) == 2.0);
  tape.backward(sum(y));
  CHECK(x.grad()(0, 0) == 0.5);
  CHECK(x.grad()(1, 0) == 0.5);
  CHECK(s.grad()(0, 0) == doctest::Approx(-1.5).epsilon(1e-15));
}

TEST_CASE("add_chain is exactly the left fold") {
  Tape tape;
  Rng rng(99);
  std::vector<Value> xs;
  for (int i = 0; i < 7; ++i) {
    Mat m(4, 1);
    for (Index r = 0; r < 4; ++r) m(r, 0) = rng.uniform() - 0.5;
    xs.push_back(tape.leaf(m, false));
  }
  Value chained = add_chain(xs);
  Value folded = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) folded = folded + xs[i];
  CHECK(bit_equal(chained.tensor().mat(), folded.tensor().mat()));
}

TEST_CASE("kink margins record the closest relu and norm approach") {
  Tape tape;
  Value x = tape.leaf(colvec({1e-4, 2.0}), false);
  relu(x);
  CHECK(tape.relu_margin() == doctest::Approx(1e-4).epsilon(1e-12));
  Value tiny = tape.leaf(colvec({3e-5, 4e-5}), false);
  l2norm(tiny);
  CHECK(tape.norm_margin() == doctest::Approx(5e-5).epsilon(1e-12));
}

TEST_CASE("backward misuse is refused") {
  SUBCASE("second backward") {
    Tape tape;
    Value x = tape.leaf(colvec({1.0}), true);
    Value loss = sum(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
  }
  SUBCASE("non-scalar loss") {
    Tape tape;
    Value x = tape.leaf(colvec({1.0, 2.0}), true);
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
  }
  SUBCASE("grad-disabled tape") {
    Tape tape(false);
    Value x = tape.leaf(colvec({1.0}), true);
    Value loss = sum(x);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
  }
  SUBCASE("loss from another tape") {
    Tape a;
    Value own = a.leaf(colvec({1.0}), true);  // a non-empty victim tape
    (void)own;
    Tape b;
    Value x = b.leaf(colvec({1.0}), true);
    Value loss = sum(x);
    CHECK_THROWS_AS(a.backward(loss), std::invalid_argument);
  }
  SUBCASE("empty tape") {
    Tape a;
    Tape b;
    Value loss = sum(b.leaf(colvec({1.0}), true));
    CHECK_THROWS_AS(a.backward(loss), std::logic_error);
  }
}

TEST_CASE("shape mismatch in add is an error") {
  Tape tape;
  Value a = tape.leaf(colvec({1.0}), false);
  Value b = tape.leaf(colvec({1.0, 2.0}), false);
  CHECK_THROWS_AS(a + b, std::invalid_argument);
}

TEST_CASE("non-finite tensor entries are rejected at construction") {
  Mat m(1, 1);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(Tensor{m}, "Tensor: non-finite entry", std::invalid_argument);
}

TEST_CASE("grad_check: linear losses match finite differences to rounding") {
  Mat W(2, 2);
  W << 1.0, 2.0, 3.0, 4.0;
  std::vector<Tensor> params = {Tensor(W), Tensor(colvec({1.0, 1.0}))};
  auto build = [](Tape&, const std::vector<Value>& p) { return sum(matvec(p[0], p[1])); };
  GradCheckReport rep = grad_check(build, params);
  CHECK(rep.checked == 6);
  CHECK(rep.skipped == 0);
  CHECK(rep.max_rel_error < 1e-9);
}

TEST_CASE("grad_check: composite nonlinear losses agree away from kinks") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    Mat W(3, 4), b(3, 1), x(4, 1);
    for (Index i = 0; i < W.size(); ++i) W(i / 4, i % 4) = 2.0 * rng.uniform() - 1.0;
    for (Index i = 0; i < 3; ++i) b(i, 0) = 2.0 * rng.uniform() - 1.0;
    for (Index i = 0; i < 4; ++i) x(i, 0) = 2.0 * rng.uniform() - 1.0;
    std::vector<Tensor> params = {Tensor(W), Tensor(b), Tensor(x)};
    auto build = [](Tape&, const std::vector<Value>& p) {
      Value h = relu(matvec(p[0], p[2]) + p[1]);
      Value q = softmax(sigmoid(h) + resset::tanh(h));
      Value n = l2norm(square_shift(q));
      return n * n + sum(mul(q, q));
    };
    GradCheckReport rep = grad_check(build, params);
    CHECK(rep.max_rel_error < 1e-6);
    CHECK(rep.checked + rep.skipped == 19);
  }
}

TEST_CASE("identical graphs produce bit-identical gradients") {
  auto run = [] {
    Tape tape;
    Value W = tape.leaf(Mat(Mat::Constant(2, 3, 0.25)), true);
    Value x = tape.leaf(colvec({0.1, -0.2, 0.3}), true);
    Value loss = sum(relu(matvec(W, x)));
    tape.backward(loss);
    return std::pair<Mat, Mat>(W.grad(), x.grad());
  };
  auto [wa, xa] = run();
  auto [wb, xb] = run();
  CHECK(bit_equal(wa, wb));
  CHECK(bit_equal(xa, xb));
}

}  // TEST_SUITE
