#pragma once

#include "bml/nn/tensor.hpp"
#include "bml/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace bml::nn {

/// Trainable array plus its accumulated gradient. `shape` is the logical
/// shape recorded in checkpoints; `value` holds the same elements row-major.
template <typename Scalar>
struct Param {
  std::string name;
  std::vector<Index> shape;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Param() = default;
  Param(std::string n, std::vector<Index> s, Index rows, Index cols)
      : name(std::move(n)), shape(std::move(s)), value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)) {}

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }

  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void init_uniform(Rng& rng, Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
};

template <typename Scalar>
using ParamList = std::vector<Param<Scalar>*>;

}  // namespace bml::nn
