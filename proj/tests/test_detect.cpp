#include "bml/augment.hpp"
#include "bml/detect.hpp"
#include "bml/eval.hpp"
#include "bml/inpaint.hpp"
#include "bml/morphology.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace bml;

// --- difference map --------------------------------------------------------------

TEST(DiffMap, Examples) {
  GrayImage a(1, 3), b(1, 3);
  a << 0.8, 0.3, 0.6;
  b << 0.5, 0.5, 0.6;
  BinaryMask bone(1, 3);
  bone << true, true, true;
  const GrayImage d = diff_map(a, b, bone);
  EXPECT_NEAR(d(0, 0), 0.3, 1e-15);
  EXPECT_EQ(d(0, 1), 0.0);
  EXPECT_EQ(d(0, 2), 0.0);
  bone(0, 0) = false;
  EXPECT_EQ(diff_map(a, b, bone)(0, 0), 0.0);
  EXPECT_THROW(diff_map(a, GrayImage::Zero(1, 2), bone), std::invalid_argument);
}

TEST(DiffMap, BoundedOnRandomInputs) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const GrayImage a = test::random_image(rng, 10, 10), b = test::random_image(rng, 10, 10);
    const GrayImage d = diff_map(a, b, test::random_mask(rng, 10, 10, 0.7));
    EXPECT_GE(d.minCoeff(), 0.0);
    EXPECT_LE(d.maxCoeff(), 1.0);
    EXPECT_TRUE((diff_map(a, a, BinaryMask::Constant(10, 10, true)) == 0.0).all());
  }
}

// --- Otsu ------------------------------------------------------------------------

TEST(Otsu, ConstantRegionIsDegenerate) {
  const auto r = otsu_threshold(GrayImage::Constant(8, 8, 0.4), BinaryMask::Constant(8, 8, true));
  EXPECT_TRUE(r.degenerate);
  EXPECT_FALSE(r.mask.any());
}

TEST(Otsu, TwoLevelsSplitExactly) {
  GrayImage v = GrayImage::Constant(20, 10, 0.2);
  v.bottomRows(10).setConstant(0.8);
  const BinaryMask region = BinaryMask::Constant(20, 10, true);
  const auto r = otsu_threshold(v, region);
  ASSERT_FALSE(r.degenerate);
  EXPECT_TRUE((r.mask == (v == 0.8)).all());
  // Every split between the two occupied bins scores the same; the smallest wins.
  std::vector<std::uint64_t> hist(256, 0);
  hist[intensity_bin(0.2)] = 100;
  hist[intensity_bin(0.8)] = 100;
  EXPECT_EQ(test::brute_force_otsu(hist), intensity_bin(0.2));
  EXPECT_DOUBLE_EQ(r.threshold, (intensity_bin(0.2) + 1) / 256.0);
}

TEST(Otsu, MatchesExactBruteForceOnRandomHistograms) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const auto hist = test::random_histogram(rng);
    const OtsuSplit s = otsu_from_histogram(hist);
    const int expected = test::brute_force_otsu(hist);
    ASSERT_EQ(s.degenerate, expected < 0) << t;
    if (expected >= 0) {
      ASSERT_EQ(s.last_low_bin, expected) << t;
    }
  }
}

TEST(Otsu, OnlyRegionPixelsCount) {
  GrayImage v = GrayImage::Constant(4, 4, 0.1);
  v(0, 0) = 0.9;
  BinaryMask region = BinaryMask::Constant(4, 4, true);
  region(0, 0) = false;
  EXPECT_TRUE(otsu_threshold(v, region).degenerate);
  EXPECT_THROW(otsu_threshold(v, BinaryMask::Constant(4, 4, false)), std::invalid_argument);
}

TEST(Otsu, InvariantUnderBinPreservingMonotoneRescale) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const GrayImage v = test::random_image(rng, 16, 16).square();
    const BinaryMask region = test::random_mask(rng, 16, 16, 0.8);
    // Move each value inside its own bin with a strictly increasing map.
    const GrayImage w = v.unaryExpr([](double x) {
      const double b = intensity_bin(x);
      const double frac = x * 256.0 - b;
      return (b + std::sqrt(frac) * 0.999) / 256.0;
    });
    const auto a = otsu_threshold(v, region), b = otsu_threshold(w, region);
    EXPECT_EQ(a.threshold, b.threshold);
    EXPECT_TRUE((a.mask == b.mask).all());
  }
}

TEST(Otsu, ExactnessLimitsEnforced) {
  std::vector<std::uint64_t> hist(256, 0);
  hist[0] = hist[255] = std::uint64_t{1} << 23;
  EXPECT_THROW(otsu_from_histogram(hist), std::invalid_argument);
}

// --- morphology ------------------------------------------------------------------

namespace {

bool in_disk(Index dr, Index dc, double r) { return double(dr * dr + dc * dc) <= r * r; }

BinaryMask brute_dilate(const BinaryMask& m, double radius) {
  const Index h = m.rows(), w = m.cols(), k = static_cast<Index>(radius);
  BinaryMask out = BinaryMask::Constant(h, w, false);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      for (Index dr = -k; dr <= k && !out(r, c); ++dr)
        for (Index dc = -k; dc <= k; ++dc) {
          const Index rr = r + dr, cc = c + dc;
          if (in_disk(dr, dc, radius) && rr >= 0 && rr < h && cc >= 0 && cc < w && m(rr, cc)) {
            out(r, c) = true;
            break;
          }
        }
  return out;
}

BinaryMask brute_erode(const BinaryMask& m, double radius) {
  const Index h = m.rows(), w = m.cols(), k = static_cast<Index>(radius);
  BinaryMask out = BinaryMask::Constant(h, w, true);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      for (Index dr = -k; dr <= k; ++dr)
        for (Index dc = -k; dc <= k; ++dc) {
          const Index rr = r + dr, cc = c + dc;
          if (in_disk(dr, dc, radius) && rr >= 0 && rr < h && cc >= 0 && cc < w && !m(rr, cc)) out(r, c) = false;
        }
  return out;
}

}  // namespace

TEST(Morphology, MatchesBruteForceDisk) {
  Rng rng(4);
  for (int t = 0; t < 40; ++t) {
    const BinaryMask m = test::random_mask(rng, 20 + t % 7, 18 + t % 5, 0.15 + 0.02 * t);
    const double radius = 0.5 * (t % 9);
    EXPECT_TRUE((dilate(m, radius) == brute_dilate(m, radius)).all()) << radius;
    EXPECT_TRUE((erode(m, radius) == brute_erode(m, radius)).all()) << radius;
  }
}

TEST(Morphology, SquaredDistanceMatchesBruteForce) {
  Rng rng(5);
  const BinaryMask sites = test::random_mask(rng, 15, 11, 0.05);
  const auto d = squared_distance_to(sites);
  for (Index r = 0; r < 15; ++r)
    for (Index c = 0; c < 11; ++c) {
      double best = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < 15; ++i)
        for (Index j = 0; j < 11; ++j)
          if (sites(i, j)) best = std::min(best, double((r - i) * (r - i) + (c - j) * (c - j)));
      EXPECT_EQ(d(r, c), best);
    }
}

TEST(Morphology, IsolatedPixelOpenedAway) {
  BinaryMask m = BinaryMask::Constant(9, 9, false);
  m(4, 4) = true;
  EXPECT_FALSE(morph_open(m, 1).any());
}

// The radius-1 disk is the 5-pixel cross, so the 7x7 square loses exactly its
// four corners; with a radius reaching the diagonals (3x3 element) it survives.
TEST(Morphology, SevenBySevenSquareOpening) {
  BinaryMask m = BinaryMask::Constant(15, 15, false);
  m.block(4, 4, 7, 7).setConstant(true);
  const BinaryMask opened = morph_open(m, 1);
  EXPECT_EQ(count(opened), 45);
  BinaryMask corners = m;
  for (auto [r, c] : {std::pair{4, 4}, {4, 10}, {10, 4}, {10, 10}}) corners(r, c) = false;
  EXPECT_TRUE((opened == corners).all());
  EXPECT_TRUE((morph_open(m, 1.5) == m).all());
}

TEST(Morphology, HoleClosedAndEmptyStaysEmpty) {
  BinaryMask m = BinaryMask::Constant(12, 12, false);
  m.block(3, 3, 6, 6).setConstant(true);
  m(5, 5) = false;
  const BinaryMask closed = morph_close(m, 1);
  EXPECT_TRUE(closed(5, 5));
  EXPECT_FALSE(morph_close(BinaryMask::Constant(6, 6, false), 2).any());
}

TEST(Morphology, ZeroRadiusIsIdentityAndNegativeThrows) {
  Rng rng(6);
  const BinaryMask m = test::random_mask(rng, 10, 10, 0.5);
  EXPECT_TRUE((morph_open(m, 0) == m).all());
  EXPECT_TRUE((morph_close(m, 0) == m).all());
  EXPECT_THROW(morph_open(m, -1), std::invalid_argument);
  EXPECT_THROW(morph_close(m, -1), std::invalid_argument);
}

TEST(Morphology, AlgebraOnRandomMasks) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const BinaryMask m = test::random_mask(rng, 32, 32, rng.uniform(0.2, 0.8));
    const double r = 1.0 + (t % 3);
    const BinaryMask o = morph_open(m, r), c = morph_close(m, r);
    ASSERT_TRUE((morph_open(o, r) == o).all());
    ASSERT_TRUE((morph_close(c, r) == c).all());
    ASSERT_TRUE(is_subset(o, m));
    ASSERT_TRUE(is_subset(m, c));
    ASSERT_TRUE((o == !morph_close(!m, r)).all());
  }
}

// --- pipeline --------------------------------------------------------------------

namespace {

PhantomSample lesioned(std::uint64_t seed) {
  PhantomConfig cfg;
  const auto classes = default_size_classes();
  return dataset_sample(cfg, "test", 3, classes, {}, seed);
}

const Inpainter kClassical = [](const GrayImage& x, const BinaryMask& m) { return classical_inpaint(x, m); };

}  // namespace

TEST(Pipeline, PerfectReconstructionFindsNothing) {
  const PhantomSample s = lesioned(1);
  const auto t = run_pipeline(s.image, s.bone_mask, [](const GrayImage& x, const BinaryMask&) { return x; }, {});
  EXPECT_TRUE(t.degenerate);
  EXPECT_FALSE(t.final_mask.any());
  EXPECT_TRUE((t.diff == 0.0).all());
}

TEST(Pipeline, ClassicalFindsTheLesion) {
  for (std::uint64_t seed : {2, 3, 4}) {
    const PhantomSample s = lesioned(seed);
    const auto t = run_pipeline(s.image, s.bone_mask, kClassical, {});
    EXPECT_TRUE(is_subset(t.final_mask, s.bone_mask));
    const auto m = metrics(confusion(t.final_mask, s.lesion_mask, s.bone_mask));
    EXPECT_GT(m.dice, 0.0) << seed;
    for (const auto* stage : {&t.otsu_mask, &t.open_mask, &t.final_mask}) EXPECT_TRUE(same_shape(*stage, s.image));
    for (const auto* stage : {&t.x, &t.recon, &t.x_eq, &t.recon_eq, &t.diff}) EXPECT_TRUE(same_shape(*stage, s.image));
    EXPECT_TRUE((t.open_mask == morph_open(t.otsu_mask, 1)).all());
  }
}

TEST(Pipeline, Deterministic) {
  const PhantomSample s = lesioned(5);
  const auto a = run_pipeline(s.image, s.bone_mask, kClassical, {});
  const auto b = run_pipeline(s.image, s.bone_mask, kClassical, {});
  EXPECT_TRUE((a.recon == b.recon).all());
  EXPECT_TRUE((a.diff == b.diff).all());
  EXPECT_TRUE((a.final_mask == b.final_mask).all());
  EXPECT_EQ(a.threshold, b.threshold);
}

TEST(Pipeline, FinalMaskStaysInBoneWhenOtsuRunsOnTheFullSlice) {
  const PhantomSample s = lesioned(6);
  DetectConfig cfg;
  cfg.restrict_to_bone = false;
  cfg.close_radius = 4;
  const auto t = run_pipeline(s.image, s.bone_mask, kClassical, cfg);
  EXPECT_TRUE(is_subset(t.final_mask, s.bone_mask));
}

TEST(DetectConfig, ScalingAndValidation) {
  const DetectConfig base;
  EXPECT_EQ(base.scaled_to(128).open_radius, 1.0);
  EXPECT_EQ(base.scaled_to(192).open_radius, 2.0);  // 1.5 rounds away from zero
  EXPECT_EQ(base.scaled_to(192).close_radius, 3.0);
  EXPECT_EQ(base.scaled_to(448).open_radius, 4.0);  // 3.5
  EXPECT_EQ(base.scaled_to(448).close_radius, 7.0);
  EXPECT_EQ(base.scaled_to(320).close_radius, 5.0);
  DetectConfig bad;
  bad.bins = 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = {};
  bad.open_radius = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}
