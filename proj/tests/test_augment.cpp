#include "bml/augment.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace bml;

TEST(Flip, HorizontalSwapsColumns) {
  GrayImage g(2, 2);
  g << 1, 2, 3, 4;
  GrayImage expected(2, 2);
  expected << 2, 1, 4, 3;
  EXPECT_TRUE((flip(g, FlipAxis::kHorizontal) == expected).all());
  expected << 3, 4, 1, 2;
  EXPECT_TRUE((flip(g, FlipAxis::kVertical) == expected).all());
}

TEST(Flip, IsAnInvolutionAndKeepsMasksPaired) {
  Rng rng(1);
  PhantomSample s;
  s.image = test::random_image(rng, 9, 14);
  s.bone_mask = test::random_mask(rng, 9, 14, 0.6);
  s.lesion_mask = s.bone_mask && test::random_mask(rng, 9, 14, 0.3);
  for (const auto axis : {FlipAxis::kHorizontal, FlipAxis::kVertical}) {
    const PhantomSample once = flip(s, axis);
    const PhantomSample twice = flip(once, axis);
    EXPECT_TRUE((twice.image == s.image).all());
    EXPECT_TRUE((twice.bone_mask == s.bone_mask).all());
    EXPECT_TRUE(is_subset(once.lesion_mask, once.bone_mask));
    EXPECT_EQ(count(once.lesion_mask), count(s.lesion_mask));
  }
}

TEST(BiasField, ZeroBoundIsIdentity) {
  Rng rng(2);
  const GrayImage g = test::random_image(rng, 16, 20);
  EXPECT_TRUE((bias_field(g, {3, 0.0, 77}) == g).all());
}

TEST(BiasField, OrderOneClosedForm) {
  const double c = 0.7;
  const GrayImage g = GrayImage::Constant(5, 9, 0.5);
  const GrayImage field = bias_field_from_coefficients(9, 5, 1, {0.0, c, 0.0});
  const GrayImage out = (g * field).cwiseMin(1.0);
  for (Index col = 0; col < 9; ++col) {
    const double u = -1.0 + 2.0 * col / 8.0;
    for (Index r = 0; r < 5; ++r) EXPECT_NEAR(out(r, col), std::min(1.0, 0.5 * std::exp(c * u)), 1e-15);
  }
}

TEST(BiasField, CoefficientOrderByDegree) {
  // Terms (0,0) (1,0) (0,1) (2,0) (1,1) (0,2): pick the u*v term only.
  const GrayImage field = bias_field_from_coefficients(3, 3, 2, {0, 0, 0, 0, 1.0, 0});
  EXPECT_NEAR(field(0, 0), std::exp(1.0), 1e-15);   // u = v = -1
  EXPECT_NEAR(field(0, 2), std::exp(-1.0), 1e-15);  // u = 1, v = -1
  EXPECT_DOUBLE_EQ(field(1, 1), 1.0);
  EXPECT_THROW(bias_field_from_coefficients(3, 3, 2, {0, 0}), std::invalid_argument);
}

TEST(BiasField, FieldPositiveAndDrawsBounded) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const BiasFieldParams p{3, 0.5, seed};
    const auto coeffs = draw_bias_coefficients(p);
    ASSERT_EQ(static_cast<int>(coeffs.size()), bias_term_count(3));
    for (double v : coeffs) ASSERT_LE(std::abs(v), 0.5);
    ASSERT_GT(bias_field_from_coefficients(12, 10, 3, coeffs).minCoeff(), 0.0);
  }
}

TEST(BiasField, DeterministicPerSeedAndClipped) {
  Rng rng(3);
  const GrayImage g = test::random_image(rng, 12, 12);
  const GrayImage a = bias_field(g, {3, 0.8, 5}), b = bias_field(g, {3, 0.8, 5}), c = bias_field(g, {3, 0.8, 6});
  EXPECT_TRUE((a == b).all());
  EXPECT_FALSE((a == c).all());
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0);
}

TEST(HistEqualize, ConstantImageUnchanged) {
  const GrayImage g = GrayImage::Constant(7, 7, 0.42);
  EXPECT_TRUE((hist_equalize(g) == g).all());
}

TEST(HistEqualize, UniformHistogramIsNearIdentity) {
  // Level k occupies bin k with 3 pixels each: CDF(k) = (k+1)/256, CDF_min = 1/256,
  // so the output is k/255 and the input is (k+0.5)/256.
  GrayImage g(3, 256);
  for (Index r = 0; r < 3; ++r)
    for (Index k = 0; k < 256; ++k) g(r, k) = (k + 0.5) / 256.0;
  const GrayImage y = hist_equalize(g);
  for (Index k = 0; k < 256; ++k) EXPECT_NEAR(y(1, k), k / 255.0, 1e-12);
  EXPECT_LE((y - g).abs().maxCoeff(), 1.0 / 256.0);
}

TEST(HistEqualize, TwoLevelsMapToZeroAndOne) {
  GrayImage g = GrayImage::Constant(4, 4, 0.7);
  g.row(0).setConstant(0.2);  // 25% at the low level
  const GrayImage y = hist_equalize(g);
  EXPECT_TRUE((y.row(0) == 0.0).all());
  EXPECT_TRUE((y.bottomRows(3) == 1.0).all());
}

TEST(HistEqualize, MonotoneInRangeAndNearlyIdempotent) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    GrayImage g = test::random_image(rng, 32, 32);
    g = g.square() * (0.3 + 0.7 * rng.uniform());  // skewed histogram
    const GrayImage y = hist_equalize(g);
    EXPECT_GE(y.minCoeff(), 0.0);
    EXPECT_LE(y.maxCoeff(), 1.0);
    for (Index p = 0; p < g.size(); p += 7)
      for (Index q = 0; q < g.size(); q += 5)
        if (intensity_bin(g.data()[p]) <= intensity_bin(g.data()[q])) ASSERT_LE(y.data()[p], y.data()[q]);
    EXPECT_LE((hist_equalize(y) - y).abs().maxCoeff(), 1.0 / 255.0 + 1e-12);
  }
}
