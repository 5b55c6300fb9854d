#pragma once

#include "bml/image.hpp"

#include <Eigen/Core>

#include <array>
#include <stdexcept>
#include <string>

namespace bml::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense (batch, channels, height, width) activation buffer.
template <typename Scalar>
class Tensor {
 public:
  using Shape = std::array<Index, 4>;

  Tensor() = default;
  Tensor(Index n, Index c, Index h, Index w) : shape_{n, c, h, w}, data_(Vector<Scalar>::Zero(n * c * h * w)) {}
  explicit Tensor(const Shape& s) : Tensor(s[0], s[1], s[2], s[3]) {}

  Index n() const { return shape_[0]; }
  Index c() const { return shape_[1]; }
  Index h() const { return shape_[2]; }
  Index w() const { return shape_[3]; }
  Index plane_size() const { return shape_[2] * shape_[3]; }
  Index size() const { return data_.size(); }
  const Shape& shape() const { return shape_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Vector<Scalar>& flat() { return data_; }
  const Vector<Scalar>& flat() const { return data_; }

  Scalar& operator()(Index n, Index c, Index y, Index x) { return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x]; }
  Scalar operator()(Index n, Index c, Index y, Index x) const { return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x]; }

  /// One sample as a (channels x height*width) matrix.
  Eigen::Map<Matrix<Scalar>> sample(Index n) { return {data() + n * c() * plane_size(), c(), plane_size()}; }
  Eigen::Map<const Matrix<Scalar>> sample(Index n) const { return {data() + n * c() * plane_size(), c(), plane_size()}; }

  /// One channel plane as an image.
  Eigen::Map<Image<Scalar>> plane(Index n, Index ch) { return {data() + (n * c() + ch) * plane_size(), h(), w()}; }
  Eigen::Map<const Image<Scalar>> plane(Index n, Index ch) const { return {data() + (n * c() + ch) * plane_size(), h(), w()}; }

  void set_zero() { data_.setZero(); }
  bool all_finite() const { return data_.allFinite(); }

  /// Copy of channels [first, first + count).
  Tensor channels(Index first, Index count) const {
    Tensor out(n(), count, h(), w());
    for (Index b = 0; b < n(); ++b) out.sample(b) = sample(b).middleRows(first, count);
    return out;
  }

  /// Concatenation along the channel axis.
  static Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.c() == 0) return b;
    if (b.c() == 0) return a;
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) throw std::invalid_argument("concat: shape mismatch");
    Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (Index s = 0; s < a.n(); ++s) {
      out.sample(s).topRows(a.c()) = a.sample(s);
      out.sample(s).bottomRows(b.c()) = b.sample(s);
    }
    return out;
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "tensor +=");
    data_ += other.data_;
    return *this;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.flat() = data_.template cast<Other>();
    return out;
  }

  void require_same_shape(const Tensor& other, const char* what) const {
    if (shape_ != other.shape_) throw std::invalid_argument(std::string(what) + ": tensor shape mismatch");
  }

 private:
  Shape shape_{0, 0, 0, 0};
  Vector<Scalar> data_;
};

}  // namespace bml::nn
