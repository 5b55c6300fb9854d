#include "bml/inpaint.hpp"

#include "bml/components.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bml {
namespace {

Index round_up(Index v, Index m) { return (v + m - 1) / m * m; }

template <typename T>
Image<T> pad_edge(const Image<T>& src, Index rows, Index cols) {
  Image<T> out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = src(std::min(r, src.rows() - 1), std::min(c, src.cols() - 1));
  return out;
}

}  // namespace

GrayImage predict(nn::InpainterModel<float>& model, const GrayImage& image, const BinaryMask& mask) {
  require_same_shape(image, mask, "inpaint");
  constexpr Index m = nn::InpainterModel<float>::kSizeMultiple;
  const Index rows = std::max<Index>(round_up(image.rows(), m), 8);
  const Index cols = std::max<Index>(round_up(image.cols(), m), 8);
  GrayImage x = image;
  BinaryMask k = mask;
  if (rows != image.rows() || cols != image.cols()) {
    x = pad_edge(image, rows, cols);
    k = pad_edge(mask, rows, cols);
    // Padding is context, never a region to fill.
    k.bottomRows(rows - image.rows()).setConstant(false);
    k.rightCols(cols - image.cols()).setConstant(false);
  }
  const std::array<GrayImage, 1> xs{x};
  const std::array<BinaryMask, 1> ks{k};
  const auto out = model.forward(nn::make_input<float>(xs, ks));
  return out.plane(0, 0).topLeftCorner(image.rows(), image.cols()).cast<double>();
}

GrayImage inpaint(nn::InpainterModel<float>& model, const GrayImage& image, const BinaryMask& mask) {
  require_same_shape(image, mask, "inpaint");
  if (!mask.any()) return image;
  const GrayImage raw = predict(model, image, mask).cwiseMax(0.0).cwiseMin(1.0);
  return mask.select(raw, image);
}

GrayImage classical_inpaint(const GrayImage& image, const BinaryMask& mask, const ClassicalOptions& options) {
  require_same_shape(image, mask, "classical_inpaint");
  if (options.tolerance < 0.0 || options.max_iters < 0) throw std::invalid_argument("classical_inpaint: bad options");
  const Index h = image.rows(), w = image.cols();
  if (!mask.any()) return image;

  // Each component needs Dirichlet data somewhere on its rim.
  const LabeledComponents cc = connected_components(mask, Connectivity::kFour);
  std::vector<char> anchored(cc.components.size() + 1, 0);
  double lo = 1.0 / 0.0, hi = -1.0 / 0.0;
  Index min_r = h, max_r = 0, min_c = w, max_c = 0;
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      if (!mask(r, c)) continue;
      min_r = std::min(min_r, r), max_r = std::max(max_r, r);
      min_c = std::min(min_c, c), max_c = std::max(max_c, c);
      const std::array<std::array<Index, 2>, 4> nb{{{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}}};
      for (const auto& [nr, nc] : nb) {
        if (nr < 0 || nr >= h || nc < 0 || nc >= w || mask(nr, nc)) continue;
        anchored[cc.labels(r, c)] = 1;
        lo = std::min(lo, image(nr, nc));
        hi = std::max(hi, image(nr, nc));
      }
    }
  }
  for (std::size_t id = 1; id < anchored.size(); ++id)
    if (!anchored[id]) throw std::invalid_argument("classical_inpaint: masked region has no boundary data");

  GrayImage u = image;
  const double start = 0.5 * (lo + hi);
  u = mask.select(start, u);

  const double n = static_cast<double>(std::max(max_r - min_r, max_c - min_c) + 2);
  const double omega = 2.0 / (1.0 + std::sin(std::numbers::pi / n));
  for (int it = 0; it < options.max_iters; ++it) {
    double largest = 0.0;
    for (Index r = min_r; r <= max_r; ++r) {
      for (Index c = min_c; c <= max_c; ++c) {
        if (!mask(r, c)) continue;
        double sum = 0.0;
        int k = 0;
        if (r > 0) sum += u(r - 1, c), ++k;
        if (r + 1 < h) sum += u(r + 1, c), ++k;
        if (c > 0) sum += u(r, c - 1), ++k;
        if (c + 1 < w) sum += u(r, c + 1), ++k;
        const double old = u(r, c);
        const double next = std::clamp(old + omega * (sum / k - old), lo, hi);
        largest = std::max(largest, std::abs(next - old));
        u(r, c) = next;
      }
    }
    if (largest < options.tolerance) break;
  }
  return u;
}

}  // namespace bml
