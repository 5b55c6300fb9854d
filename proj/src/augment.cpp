#include "bml/augment.hpp"

#include "bml/rng.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace bml {

PhantomSample flip(const PhantomSample& sample, FlipAxis axis) {
  return {flip(sample.image, axis), flip(sample.bone_mask, axis), flip(sample.lesion_mask, axis)};
}

std::vector<double> draw_bias_coefficients(const BiasFieldParams& params) {
  if (params.order < 0) throw std::invalid_argument("bias_field: order must be non-negative");
  Rng rng(params.seed);
  std::vector<double> coeffs(bias_term_count(params.order));
  for (auto& c : coeffs) c = rng.uniform(-params.bound, params.bound);
  return coeffs;
}

GrayImage bias_field_from_coefficients(Index width, Index height, int order,
                                       const std::vector<double>& coefficients) {
  if (static_cast<int>(coefficients.size()) != bias_term_count(order))
    throw std::invalid_argument("bias_field: coefficient count does not match order");
  auto normalized = [](Index i, Index n) { return n > 1 ? 2.0 * i / static_cast<double>(n - 1) - 1.0 : 0.0; };

  GrayImage field(height, width);
  std::vector<double> upow(order + 1), vpow(order + 1);
  for (Index r = 0; r < height; ++r) {
    const double v = normalized(r, height);
    for (Index c = 0; c < width; ++c) {
      const double u = normalized(c, width);
      upow[0] = vpow[0] = 1.0;
      for (int p = 1; p <= order; ++p) {
        upow[p] = upow[p - 1] * u;
        vpow[p] = vpow[p - 1] * v;
      }
      double poly = 0.0;
      int term = 0;
      for (int degree = 0; degree <= order; ++degree)
        for (int i = degree; i >= 0; --i) poly += coefficients[term++] * upow[i] * vpow[degree - i];
      field(r, c) = std::exp(poly);
    }
  }
  return field;
}

GrayImage bias_field(const GrayImage& image, const BiasFieldParams& params) {
  if (params.bound == 0.0) return image;
  const auto coeffs = draw_bias_coefficients(params);
  const GrayImage field = bias_field_from_coefficients(image.cols(), image.rows(), params.order, coeffs);
  return (image * field).cwiseMax(0.0).cwiseMin(1.0);
}

GrayImage hist_equalize(const GrayImage& image) {
  constexpr int kBins = 256;
  if (image.size() == 0) return image;
  std::array<Index, kBins> hist{};
  for (Index i = 0; i < image.size(); ++i) ++hist[intensity_bin(image.data()[i], kBins)];

  std::array<double, kBins> cdf{};
  Index running = 0;
  double cdf_min = 0.0;
  const double total = static_cast<double>(image.size());
  for (int b = 0; b < kBins; ++b) {
    running += hist[b];
    cdf[b] = static_cast<double>(running) / total;
    if (cdf_min == 0.0 && running > 0) cdf_min = cdf[b];
  }
  if (cdf_min >= 1.0) return image;

  const double span = 1.0 - cdf_min;
  return image.unaryExpr([&](double x) { return (cdf[intensity_bin(x, kBins)] - cdf_min) / span; });
}

}  // namespace bml
