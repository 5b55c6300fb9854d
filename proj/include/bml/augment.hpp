#pragma once

#include "bml/image.hpp"
#include "bml/phantom.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace bml {

enum class FlipAxis { kHorizontal, kVertical };

/// Mirrors columns (horizontal) or rows (vertical).
template <typename Derived>
Image<typename Derived::Scalar> flip(const Eigen::ArrayBase<Derived>& image, FlipAxis axis) {
  return axis == FlipAxis::kHorizontal ? Image<typename Derived::Scalar>(image.rowwise().reverse())
                                       : Image<typename Derived::Scalar>(image.colwise().reverse());
}

/// Applies the same flip to the image and every mask of a sample.
PhantomSample flip(const PhantomSample& sample, FlipAxis axis);

struct BiasFieldParams {
  int order = 3;
  double bound = 0.3;
  std::uint64_t seed = 0;
};

/// Number of monomials u^i v^j with i + j <= order.
constexpr int bias_term_count(int order) { return (order + 1) * (order + 2) / 2; }

/// Coefficients drawn uniformly in [-bound, bound], one per monomial, in the
/// order (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ... (by total degree, then
/// decreasing power of u).
std::vector<double> draw_bias_coefficients(const BiasFieldParams& params);

/// exp(P(u, v)) with u, v in [-1, 1] spanning the first to last column/row.
GrayImage bias_field_from_coefficients(Index width, Index height, int order,
                                       const std::vector<double>& coefficients);

/// clip(image * exp(P(u, v)), 0, 1) with P drawn from `params`.
GrayImage bias_field(const GrayImage& image, const BiasFieldParams& params);

/// Global 256-bin histogram equalization:
///   y = (CDF(bin(x)) - CDF_min) / (1 - CDF_min),  bin(x) = min(floor(256 x), 255),
/// where CDF_min is the smallest nonzero CDF value. An image occupying a single
/// bin is returned unchanged.
GrayImage hist_equalize(const GrayImage& image);

/// Bin index used by the equalization and Otsu histograms.
inline int intensity_bin(double v, int bins = 256) {
  const double b = std::floor(v * bins);
  return b < 0.0 ? 0 : (b >= bins ? bins - 1 : static_cast<int>(b));
}

}  // namespace bml
