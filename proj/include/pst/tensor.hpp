#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pst/error.hpp"

namespace pst {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr Index kMaxRank = 4;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

/// Dense row-major array of rank 1..4.
///
/// A default-constructed tensor is empty (rank 0, no data) and only serves as
/// a "not set" placeholder; every constructed tensor has positive dimensions.
/// Views into the storage are exposed as Eigen maps so elementwise math can be
/// written as expressions:
///
///     out.array() = gamma * a.array() + (1 - gamma) * b.array();
template <class Scalar>
class BasicTensor {
 public:
  using value_type = Scalar;
  using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), fill);
  }

  BasicTensor(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (static_cast<Index>(data_.size()) != shape_size(shape_)) {
      throw PreconditionError("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_string(shape_));
    }
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor constant(Shape shape, Scalar value) { return BasicTensor(std::move(shape), value); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<Scalar> data() & { return data_; }
  std::span<const Scalar> data() const& { return data_; }
  std::span<const Scalar> data() && = delete;
  const std::vector<Scalar>& values() const { return data_; }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const Scalar& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  template <class... Ix>
  Scalar& operator()(Ix... ix) {
    return data_[static_cast<std::size_t>(offset({static_cast<Index>(ix)...}))];
  }
  template <class... Ix>
  const Scalar& operator()(Ix... ix) const {
    return data_[static_cast<std::size_t>(offset({static_cast<Index>(ix)...}))];
  }

  ArrayMap array() & { return ArrayMap(data_.data(), size()); }
  ConstArrayMap array() const& { return ConstArrayMap(data_.data(), size()); }
  ConstArrayMap array() && = delete;

  /// Rows = first dimension, columns = product of the remaining ones.
  MatrixMap matrix() & { return MatrixMap(data_.data(), rows2d(), cols2d()); }
  ConstMatrixMap matrix() const& { return ConstMatrixMap(data_.data(), rows2d(), cols2d()); }
  ConstMatrixMap matrix() && = delete;

  /// Plane `c` of a [C, H, W] tensor as an H x W matrix.
  MatrixMap plane(Index c) {
    require(rank() == 3, "plane() needs a [C, H, W] tensor");
    return MatrixMap(data_.data() + c * shape_[1] * shape_[2], shape_[1], shape_[2]);
  }
  ConstMatrixMap plane(Index c) const {
    require(rank() == 3, "plane() needs a [C, H, W] tensor");
    return ConstMatrixMap(data_.data() + c * shape_[1] * shape_[2], shape_[1], shape_[2]);
  }

  BasicTensor reshaped(Shape shape) const {
    require(shape_size(shape) == size(),
            "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return BasicTensor(std::move(shape), data_);
  }

  template <class Other>
  BasicTensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return BasicTensor<Other>(shape_, std::move(out));
  }

  bool same_shape(const BasicTensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty() || static_cast<Index>(shape.size()) > kMaxRank) {
      throw PreconditionError("tensor rank must be 1..4, got shape " + shape_string(shape));
    }
    for (Index d : shape) {
      if (d <= 0) throw PreconditionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }

  Index offset(std::initializer_list<Index> ix) const {
    Index off = 0;
    std::size_t axis = 0;
    for (Index i : ix) off = off * shape_[axis++] + i;
    return off;
  }

  Index rows2d() const { return shape_.empty() ? 0 : shape_[0]; }
  Index cols2d() const { return shape_.empty() ? 0 : size() / shape_[0]; }

  Shape shape_;
  std::vector<Scalar> data_;
};

using Tensor = BasicTensor<float>;

template <class Scalar>
void require_same_shape(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw PreconditionError(what + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
  }
}

template <class Scalar>
Scalar max_abs_diff(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  require_same_shape(a, b, "max_abs_diff");
  return (a.array() - b.array()).abs().maxCoeff();
}

inline bool all_finite(const Tensor& t) { return t.array().isFinite().all(); }

}  // namespace pst
