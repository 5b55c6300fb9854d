#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bml {

using Index = Eigen::Index;

/// Row-major 2D field; rows() is the image height and cols() the width.
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Intensities in [0,1]. Carries input slices, reconstructions and difference maps.
using GrayImage = Image<double>;

/// Bone ROI, ground-truth lesion mask, or predicted anomaly mask.
using BinaryMask = Image<bool>;

template <typename A, typename B>
bool same_shape(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

template <typename A, typename B>
void require_same_shape(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b,
                        const char* what) {
  if (!same_shape(a, b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.cols()) + "x" + std::to_string(a.rows()) +
                                " vs " + std::to_string(b.cols()) + "x" +
                                std::to_string(b.rows()) + ")");
  }
}

/// Number of set pixels.
inline Index count(const BinaryMask& mask) { return mask.count(); }

/// True iff every set pixel of `inner` is also set in `outer`.
inline bool is_subset(const BinaryMask& inner, const BinaryMask& outer) {
  return same_shape(inner, outer) && !(inner && !outer).any();
}

/// Stack of equally sized slices stored as 32-bit floats, slice-major then row-major.
struct Volume {
  Index width = 0;
  Index height = 0;
  Index slices = 0;
  std::vector<float> data;

  Volume() = default;
  Volume(Index w, Index h, Index s) : width(w), height(h), slices(s), data(w * h * s, 0.0f) {}

  Eigen::Map<const Image<float>> slice(Index k) const {
    check_slice(k);
    return {data.data() + k * width * height, height, width};
  }
  Eigen::Map<Image<float>> slice(Index k) {
    check_slice(k);
    return {data.data() + k * width * height, height, width};
  }

  GrayImage slice_image(Index k) const { return slice(k).cast<double>(); }

 private:
  void check_slice(Index k) const {
    if (k < 0 || k >= slices) throw std::out_of_range("volume slice index out of range");
  }
};

struct Component {
  int id = 0;
  Index area = 0;
  Index min_row = 0, min_col = 0, max_row = 0, max_col = 0;
};

/// Label map (0 = background) plus per-component statistics; ids run 1..K in
/// first-encounter raster order.
struct LabeledComponents {
  Image<int> labels;
  std::vector<Component> components;
};

}  // namespace bml
