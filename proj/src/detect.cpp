#include "bml/detect.hpp"

#include "bml/augment.hpp"
#include "bml/morphology.hpp"

#include <cmath>
#include <stdexcept>

namespace bml {
namespace {

using u128 = unsigned __int128;

// Score (n1 s0 - n0 s1)^2 / (n0 n1) as quotient and remainder so two scores
// compare exactly without overflow.
struct Score {
  u128 quotient = 0;
  u128 remainder = 0;
  u128 denominator = 1;
};

Score score(std::uint64_t n0, std::uint64_t s0, std::uint64_t n1, std::uint64_t s1) {
  const u128 a = u128(n1) * s0, b = u128(n0) * s1;
  const u128 diff = a > b ? a - b : b - a;
  const u128 d = u128(n0) * n1;
  const u128 sq = diff * diff;
  return {sq / d, sq % d, d};
}

bool greater(const Score& x, const Score& y) {
  if (x.quotient != y.quotient) return x.quotient > y.quotient;
  return x.remainder * y.denominator > y.remainder * x.denominator;
}

}  // namespace

void DetectConfig::validate() const {
  if (!(open_radius >= 0.0) || !(close_radius >= 0.0)) throw std::invalid_argument("detect: radii must be >= 0");
  if (bins < 2) throw std::invalid_argument("detect: bins must be >= 2");
}

DetectConfig DetectConfig::scaled_to(Index resolution, Index reference) const {
  DetectConfig out = *this;
  const double f = static_cast<double>(resolution) / static_cast<double>(reference);
  out.open_radius = std::round(open_radius * f);
  out.close_radius = std::round(close_radius * f);
  return out;
}

GrayImage diff_map(const GrayImage& x_eq, const GrayImage& recon_eq, const BinaryMask& bone) {
  require_same_shape(x_eq, recon_eq, "diff_map");
  require_same_shape(x_eq, bone, "diff_map");
  return bone.select((x_eq - recon_eq).cwiseMax(0.0), 0.0);
}

OtsuSplit otsu_from_histogram(const std::vector<std::uint64_t>& histogram) {
  std::uint64_t total = 0, weighted = 0;
  int occupied = 0;
  for (std::size_t b = 0; b < histogram.size(); ++b) {
    total += histogram[b];
    weighted += histogram[b] * b;
    occupied += histogram[b] > 0;
  }
  if (total >= (std::uint64_t{1} << 24) || histogram.size() > 4096)
    throw std::invalid_argument("otsu: histogram too large for exact comparison");
  OtsuSplit best;
  if (occupied < 2) return best;

  Score best_score;
  std::uint64_t n0 = 0, s0 = 0;
  for (std::size_t k = 0; k + 1 < histogram.size(); ++k) {
    n0 += histogram[k];
    s0 += histogram[k] * k;
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const Score sc = score(n0, s0, n1, weighted - s0);
    if (best.degenerate || greater(sc, best_score)) {
      best_score = sc;
      best.last_low_bin = static_cast<int>(k);
      best.degenerate = false;
    }
  }
  return best;
}

OtsuResult otsu_threshold(const GrayImage& values, const BinaryMask& region, int bins) {
  require_same_shape(values, region, "otsu_threshold");
  if (bins < 2) throw std::invalid_argument("otsu_threshold: bins must be >= 2");
  if (!region.any()) throw std::invalid_argument("otsu_threshold: empty region");
  std::vector<std::uint64_t> hist(bins, 0);
  for (Index r = 0; r < values.rows(); ++r)
    for (Index c = 0; c < values.cols(); ++c)
      if (region(r, c)) ++hist[intensity_bin(values(r, c), bins)];

  OtsuResult out;
  out.mask = BinaryMask::Constant(values.rows(), values.cols(), false);
  const OtsuSplit split = otsu_from_histogram(hist);
  out.degenerate = split.degenerate;
  if (split.degenerate) return out;
  out.threshold = static_cast<double>(split.last_low_bin + 1) / bins;
  for (Index r = 0; r < values.rows(); ++r)
    for (Index c = 0; c < values.cols(); ++c)
      out.mask(r, c) = region(r, c) && intensity_bin(values(r, c), bins) > split.last_low_bin;
  return out;
}

BinaryMask morph_open(const BinaryMask& mask, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("morph_open: radius must be >= 0");
  return dilate(erode(mask, radius), radius);
}

BinaryMask morph_close(const BinaryMask& mask, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("morph_close: radius must be >= 0");
  return erode(dilate(mask, radius), radius);
}

PipelineTrace run_pipeline(const GrayImage& x, const BinaryMask& bone, const Inpainter& inpainter,
                           const DetectConfig& config) {
  config.validate();
  require_same_shape(x, bone, "run_pipeline");
  PipelineTrace t;
  t.x = x;
  t.recon = inpainter(x, bone);
  require_same_shape(x, t.recon, "run_pipeline: reconstruction");
  t.x_eq = hist_equalize(x);
  t.recon_eq = hist_equalize(t.recon);
  t.diff = diff_map(t.x_eq, t.recon_eq, bone);
  const BinaryMask region = config.restrict_to_bone ? bone : BinaryMask::Constant(x.rows(), x.cols(), true);
  if (region.any()) {
    OtsuResult otsu = otsu_threshold(t.diff, region, config.bins);
    t.threshold = otsu.threshold;
    t.degenerate = otsu.degenerate;
    t.otsu_mask = std::move(otsu.mask);
  } else {
    t.otsu_mask = BinaryMask::Constant(x.rows(), x.cols(), false);
  }
  t.open_mask = morph_open(t.otsu_mask, config.open_radius);
  t.final_mask = morph_close(t.open_mask, config.close_radius) && bone;
  return t;
}

}  // namespace bml
