#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <stdexcept>

namespace resset {

/// Dense row-major storage for everything real-valued in the model.
/// Vectors are matrices with a single column.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// A finite-checked value. Construction rejects NaN/Inf so bad numbers
/// surface where they are produced, not three modules later.
/// Immutable after construction; safe to share across threads.
class Tensor {
 public:
  Tensor() : m_(0, 1) {}

  explicit Tensor(Mat m) : m_(std::move(m)) {
    if (!m_.allFinite()) throw std::invalid_argument("Tensor: non-finite entry");
  }

  static Tensor zeros(Index rows, Index cols = 1) { return Tensor(Mat::Zero(rows, cols)); }

  static Tensor scalar(double x) { return Tensor(Mat::Constant(1, 1, x)); }

  static Tensor vector(std::initializer_list<double> xs) {
    Mat m(static_cast<Index>(xs.size()), 1);
    Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return Tensor(std::move(m));
  }

  const Mat& mat() const { return m_; }
  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  Index size() const { return m_.size(); }

  bool is_vector() const { return m_.cols() == 1; }
  bool is_scalar() const { return m_.rows() == 1 && m_.cols() == 1; }

  double operator()(Index r, Index c = 0) const { return m_(r, c); }

  /// Value of a 1x1 tensor.
  double as_scalar() const {
    if (!is_scalar()) throw std::invalid_argument("Tensor: not a scalar");
    return m_(0, 0);
  }

  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

 private:
  Mat m_;
};

}  // namespace resset
