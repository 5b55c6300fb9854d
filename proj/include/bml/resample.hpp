#pragma once

#include "bml/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bml {

namespace detail {

struct Tap {
  Index lo, hi;
  double frac;
};

// Half-pixel-center sampling with edge clamping.
inline std::vector<Tap> bilinear_taps(Index in, Index out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Index i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<Index>(std::floor(src));
    taps[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

// Clamped so that rounding can never leave the [a, b] hull; exact when a == b.
template <typename Scalar>
Scalar lerp_hull(Scalar a, Scalar b, double t) {
  const Scalar v = a + static_cast<Scalar>(t) * (b - a);
  return std::clamp(v, std::min(a, b), std::max(a, b));
}

}  // namespace detail

/// Bilinear resampling with pixel centers at (i + 0.5) / N and edge clamping.
/// Output values stay inside the input's [min, max].
template <typename Derived>
Image<typename Derived::Scalar> resize_bilinear(const Eigen::ArrayBase<Derived>& image,
                                                Index new_width, Index new_height) {
  using Scalar = typename Derived::Scalar;
  if (new_width < 1 || new_height < 1) throw std::invalid_argument("resize_bilinear: zero target dimension");
  if (image.size() == 0) throw std::invalid_argument("resize_bilinear: empty input");

  const auto cols = detail::bilinear_taps(image.cols(), new_width);
  const auto rows = detail::bilinear_taps(image.rows(), new_height);
  Image<Scalar> out(new_height, new_width);
  for (Index r = 0; r < new_height; ++r) {
    const auto& ty = rows[r];
    for (Index c = 0; c < new_width; ++c) {
      const auto& tx = cols[c];
      const Scalar top = detail::lerp_hull(image(ty.lo, tx.lo), image(ty.lo, tx.hi), tx.frac);
      const Scalar bottom = detail::lerp_hull(image(ty.hi, tx.lo), image(ty.hi, tx.hi), tx.frac);
      out(r, c) = detail::lerp_hull(top, bottom, ty.frac);
    }
  }
  return out;
}

/// Bilinear resampling of the 0/1 indicator followed by a 0.5 cut.
inline BinaryMask resize_mask(const BinaryMask& mask, Index new_width, Index new_height) {
  return resize_bilinear(mask.cast<double>(), new_width, new_height) >= 0.5;
}

}  // namespace bml
