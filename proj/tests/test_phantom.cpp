#include "bml/morphology.hpp"
#include "bml/phantom.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace bml;
using bml::test::TempDir;

namespace {

BinaryMask marrow_region(const PhantomConfig& cfg, const PhantomSample& s) {
  return s.bone_mask && erode(s.bone_mask, cfg.rim_width);
}

// Interior point of the bone support far from the rim.
std::pair<double, double> deep_center(const PhantomConfig& cfg, const PhantomSample& s, double clearance) {
  const BinaryMask ok = erode(lesion_support(cfg, s.bone_mask), clearance);
  for (Index r = ok.rows() / 2; r < ok.rows(); ++r)
    for (Index c = ok.cols() / 2; c < ok.cols(); ++c)
      if (ok(r, c)) return {double(r), double(c)};
  ADD_FAILURE() << "no interior point";
  return {0, 0};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Phantom, ZeroNoiseGivesBaseMarrow) {
  PhantomConfig cfg;
  cfg.marrow_noise = 0.0;
  const PhantomSample s = gen_healthy(cfg, 11);
  const BinaryMask marrow = marrow_region(cfg, s);
  ASSERT_GT(count(marrow), 1000);
  for (Index i = 0; i < marrow.size(); ++i)
    if (marrow.data()[i]) ASSERT_EQ(s.image.data()[i], cfg.marrow_intensity);
  EXPECT_FALSE(s.lesion_mask.any());
}

TEST(Phantom, SameSeedIsBitIdentical) {
  const PhantomConfig cfg;
  const PhantomSample a = gen_healthy(cfg, 5), b = gen_healthy(cfg, 5), c = gen_healthy(cfg, 6);
  EXPECT_TRUE((a.image == b.image).all());
  EXPECT_TRUE((a.bone_mask == b.bone_mask).all());
  EXPECT_FALSE((a.image == c.image).all());
}

TEST(Phantom, ImageInUnitRangeAndBoneInsideMargin) {
  const PhantomConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PhantomSample s = gen_healthy(cfg, seed);
    EXPECT_GE(s.image.minCoeff(), 0.0);
    EXPECT_LE(s.image.maxCoeff(), 1.0);
    EXPECT_FALSE(s.bone_mask.topRows(4).any());
    EXPECT_FALSE(s.bone_mask.bottomRows(4).any());
    EXPECT_FALSE(s.bone_mask.leftCols(4).any());
    EXPECT_FALSE(s.bone_mask.rightCols(4).any());
  }
}

// The marrow field is base + amplitude * (unit-variance smoothed noise), so the
// 3-sigma band should hold nearly everything.
TEST(Phantom, MarrowTextureStaysInThreeSigmaBand) {
  const PhantomConfig cfg;
  long inside = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const PhantomSample s = gen_healthy(cfg, derive_seed(99, 0, seed));
    const BinaryMask marrow = marrow_region(cfg, s);
    const auto band = (s.image - cfg.marrow_intensity).abs() <= 3.0 * cfg.marrow_noise;
    inside += (band && marrow).count();
    total += marrow.count();
  }
  EXPECT_GE(static_cast<double>(inside) / static_cast<double>(total), 0.95);
}

TEST(Phantom, InvalidShapeRejected) {
  PhantomConfig cfg;
  cfg.bone_semi_x_frac = 0.49;
  EXPECT_THROW(gen_healthy(cfg, 1), std::invalid_argument);
  cfg = {};
  cfg.marrow_intensity = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Lesion, ZeroLiftRejected) {
  const PhantomConfig cfg;
  const PhantomSample s = gen_healthy(cfg, 1);
  LesionSpec spec;
  std::tie(spec.center_row, spec.center_col) = deep_center(cfg, s, 6);
  spec.target_area = 50;
  spec.lift = 0.0;
  EXPECT_THROW(inject_lesion(cfg, s, spec, 1), std::invalid_argument);
}

TEST(Lesion, RegularLesionIsDiskOfTargetArea) {
  const PhantomConfig cfg;
  const PhantomSample s = gen_healthy(cfg, 2);
  LesionSpec spec;
  std::tie(spec.center_row, spec.center_col) = deep_center(cfg, s, 6);
  spec.target_area = 50;
  spec.irregularity = 0.0;
  const PhantomSample out = inject_lesion(cfg, s, spec, 3);
  const Index area = count(out.lesion_mask);
  EXPECT_GE(area, 40);
  EXPECT_LE(area, 60);
  // Rasterized disk: every lesion pixel is at least as close to the center as every non-lesion pixel.
  double max_in = 0.0, min_out = 1e9;
  for (Index r = 0; r < out.lesion_mask.rows(); ++r)
    for (Index c = 0; c < out.lesion_mask.cols(); ++c) {
      const double d = std::hypot(r - spec.center_row, c - spec.center_col);
      if (out.lesion_mask(r, c))
        max_in = std::max(max_in, d);
      else
        min_out = std::min(min_out, d);
    }
  EXPECT_LE(max_in, min_out);
  EXPECT_LE(max_in, std::sqrt(60 / std::numbers::pi) + 1.0);
}

TEST(Lesion, CenterOnRimRejected) {
  const PhantomConfig cfg;
  const PhantomSample s = gen_healthy(cfg, 4);
  const BinaryMask rim = s.bone_mask && !lesion_support(cfg, s.bone_mask);
  Index pick = -1;
  for (Index i = 0; i < rim.size() && pick < 0; ++i)
    if (rim.data()[i]) pick = i;
  ASSERT_GE(pick, 0);
  LesionSpec spec;
  spec.center_row = double(pick / rim.cols());
  spec.center_col = double(pick % rim.cols());
  spec.target_area = 20;
  EXPECT_THROW(inject_lesion(cfg, s, spec, 1), std::invalid_argument);
}

TEST(Lesion, OversizeLesionDoesNotFit) {
  const PhantomConfig cfg;
  const PhantomSample s = gen_healthy(cfg, 4);
  LesionSpec spec;
  std::tie(spec.center_row, spec.center_col) = deep_center(cfg, s, 1);
  spec.target_area = static_cast<double>(count(s.bone_mask));
  EXPECT_THROW(inject_lesion(cfg, s, spec, 1), std::domain_error);
}

TEST(Lesion, InvariantsOverRandomSpecs) {
  const PhantomConfig cfg;
  Rng rng(21);
  for (int t = 0; t < 30; ++t) {
    const PhantomSample s = gen_healthy(cfg, 100 + t);
    const BinaryMask support = lesion_support(cfg, s.bone_mask);
    LesionSpec spec;
    spec.target_area = rng.uniform(20, 300);
    spec.irregularity = rng.uniform(0.0, 0.4);
    spec.softness = rng.uniform(0.0, 2.0);
    spec.lift = rng.uniform(0.1, 0.5);
    std::tie(spec.center_row, spec.center_col) =
        deep_center(cfg, s, std::sqrt(spec.target_area / std::numbers::pi) * (1 + spec.irregularity) + 1);
    const PhantomSample out = inject_lesion(cfg, s, spec, t);
    EXPECT_TRUE(is_subset(out.lesion_mask, support));
    const double area = static_cast<double>(count(out.lesion_mask));
    EXPECT_GE(area, 0.8 * spec.target_area);
    EXPECT_LE(area, 1.2 * spec.target_area);
    EXPECT_TRUE((out.image.cwiseMin(1.0) >= s.image).all());
    EXPECT_TRUE(((out.image == s.image) || s.bone_mask).all());
  }
}

TEST(Lesion, MeanLiftExceedsHalfTheLift) {
  PhantomConfig cfg;
  for (double softness : {0.0, 1.0, 2.0}) {
    const PhantomSample s = gen_healthy(cfg, 8);
    LesionSpec spec;
    std::tie(spec.center_row, spec.center_col) = deep_center(cfg, s, 8);
    spec.target_area = 120;
    spec.irregularity = 0.0;
    spec.softness = softness;
    spec.lift = 0.3;
    const PhantomSample out = inject_lesion(cfg, s, spec, 9);
    const BinaryMask rest = out.bone_mask && !out.lesion_mask;
    const double in = out.lesion_mask.select(out.image, 0.0).sum() / count(out.lesion_mask);
    const double bg = rest.select(out.image, 0.0).sum() / count(rest);
    EXPECT_GE(in, bg + 0.5 * spec.lift) << "softness " << softness;
  }
}

TEST(Dataset, CountsSplitsAndClasses) {
  TempDir dir("ds");
  PhantomConfig cfg;
  cfg.size = 64;
  const SplitCounts counts{6, 5, 10};
  const Manifest m = gen_dataset(cfg, counts, default_size_classes(), {}, 42, dir.path());
  ASSERT_EQ(m.entries.size(), 21u);
  EXPECT_EQ(m.split("train").size(), 6u);
  EXPECT_EQ(m.split("val").size(), 5u);
  EXPECT_EQ(m.split("test").size(), 10u);
  std::array<int, 5> per_class{};
  for (const auto* e : m.split("test")) {
    ASSERT_TRUE(e->size_class.has_value());
    ++per_class[*e->size_class];
    EXPECT_GT(e->lesion_area_px, 0);
  }
  for (int k : per_class) EXPECT_EQ(k, 2);
  for (const auto* e : m.split("train")) {
    EXPECT_EQ(e->lesion_area_px, 0);
    EXPECT_FALSE(load_mask(m.resolve(e->lesion_mask_path)).any());
  }
  for (const auto& e : m.entries) {
    const BinaryMask bone = load_mask(m.resolve(e.bone_mask_path));
    const BinaryMask lesion = load_mask(m.resolve(e.lesion_mask_path));
    EXPECT_TRUE(is_subset(lesion, bone)) << e.id;
    EXPECT_EQ(count(lesion), e.lesion_area_px);
    EXPECT_EQ(count(bone), e.bone_area_px);
  }
  const Manifest back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back.entries.size(), m.entries.size());
}

TEST(Dataset, RegenerationIsByteIdentical) {
  TempDir a("dsa"), b("dsb");
  PhantomConfig cfg;
  cfg.size = 48;
  const SplitCounts counts{3, 2, 5};
  gen_dataset(cfg, counts, default_size_classes(), {}, 7, a.path());
  gen_dataset(cfg, counts, default_size_classes(), {}, 7, b.path());
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a.path());
    EXPECT_EQ(slurp(entry.path()), slurp(b.path() / rel)) << rel;
  }
}

TEST(Dataset, ZeroCountRejected) {
  TempDir dir("dsz");
  EXPECT_THROW(gen_dataset({}, {0, 1, 1}, default_size_classes(), {}, 1, dir.path()), std::invalid_argument);
}
