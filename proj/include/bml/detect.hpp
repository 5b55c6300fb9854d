#pragma once

#include "bml/image.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace bml {

struct DetectConfig {
  double open_radius = 1.0;
  double close_radius = 2.0;
  int bins = 256;
  bool restrict_to_bone = true;

  /// Throws std::invalid_argument unless radii >= 0 and bins >= 2.
  void validate() const;

  /// Radii scaled from a 128-pixel reference to `resolution`, rounded.
  DetectConfig scaled_to(Index resolution, Index reference = 128) const;
};

/// D = max(x' - x~', 0) on the bone, 0 elsewhere.
GrayImage diff_map(const GrayImage& x_eq, const GrayImage& recon_eq, const BinaryMask& bone);

struct OtsuSplit {
  int last_low_bin = -1;  ///< class 0 is bins [0, last_low_bin]
  bool degenerate = true;
};

/// Otsu split of an integer histogram. Between-class variance is compared
/// exactly in integer arithmetic; ties go to the smallest split. Degenerate
/// when fewer than two bins are occupied. Needs at most 4096 bins and a total
/// count below 2^24.
OtsuSplit otsu_from_histogram(const std::vector<std::uint64_t>& histogram);

struct OtsuResult {
  double threshold = 0.0;  ///< boundary between the classes, (k + 1) / bins
  BinaryMask mask;         ///< region pixels whose bin lies above the split
  bool degenerate = true;  ///< no split exists; mask is empty
};

/// Histogram over `region` pixels only, bins as in intensity_bin.
OtsuResult otsu_threshold(const GrayImage& values, const BinaryMask& region, int bins = 256);

BinaryMask morph_open(const BinaryMask& mask, double radius);
BinaryMask morph_close(const BinaryMask& mask, double radius);

/// Any function producing a reconstruction of `image` inside `mask`.
using Inpainter = std::function<GrayImage(const GrayImage& image, const BinaryMask& mask)>;

/// Every intermediate of one detection run, all at the input size.
struct PipelineTrace {
  GrayImage x, recon, x_eq, recon_eq, diff;
  BinaryMask otsu_mask, open_mask, final_mask;
  double threshold = 0.0;
  bool degenerate = true;
};

/// inpaint -> equalize both -> difference -> Otsu -> open -> close. The
/// result is clipped to the bone mask.
PipelineTrace run_pipeline(const GrayImage& x, const BinaryMask& bone, const Inpainter& inpainter,
                           const DetectConfig& config);

}  // namespace bml
