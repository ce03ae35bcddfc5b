#include <gtest/gtest.h>

#include "hintseg/core_types.hpp"
#include "hintseg/rng.hpp"
#include "test_support.hpp"

using namespace hintseg;

TEST(RasterizeCircle, RadiusOneIsPlusShape) {
  auto pts = rasterize_circle({5, 5}, 1.0, 11, 11);
  ASSERT_EQ(pts.size(), 5u);
  EXPECT_EQ(pts.front(), (Point{5, 4}));
  EXPECT_EQ(pts.back(), (Point{5, 6}));
}

TEST(RasterizeCircle, RadiusZeroIsCentreOnly) {
  auto pts = rasterize_circle({2, 3}, 0.0, 8, 8);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0], (Point{2, 3}));
}

TEST(RasterizeCircle, ClipsAtBorder) {
  // quarter of the r=2 disc (13 px) around the corner: (0,0),(1,0),(2,0),(0,1),(1,1),(0,2)
  EXPECT_EQ(rasterize_circle({0, 0}, 2.0, 10, 10).size(), 6u);
  EXPECT_EQ(rasterize_circle({5, 5}, 2.0, 11, 11).size(), 13u);
}

TEST(RasterizeCircle, OutsideCentreThrows) {
  EXPECT_THROW(rasterize_circle({10, 0}, 1.0, 10, 10), bounds_error);
  EXPECT_THROW(rasterize_circle({0, -1}, 1.0, 10, 10), bounds_error);
  EXPECT_THROW(rasterize_circle({1, 1}, -1.0, 10, 10), std::invalid_argument);
}

TEST(RasterizeCircle, PixelCountApproachesArea) {
  const auto n = rasterize_circle({100, 100}, 40.0, 201, 201).size();
  EXPECT_NEAR(static_cast<double>(n), 3.14159265 * 1600.0, 0.01 * 3.14159265 * 1600.0);
}

TEST(PointAnnotation, ValidateRejectsBadInput) {
  auto a = test::one_point({3, 3}, {10, 10});
  EXPECT_NO_THROW(a.validate(16, 16));
  EXPECT_THROW(a.validate(8, 8), bounds_error);
  a.n_objects = 2;
  EXPECT_THROW(a.validate(16, 16), std::invalid_argument);
  auto same = test::one_point({3, 3}, {3, 3});
  EXPECT_THROW(same.validate(16, 16), std::invalid_argument);
}

TEST(PointAnnotation, WarnsWhenBackgroundIsClose) {
  auto a = test::one_point({3, 3}, {6, 3});
  EXPECT_EQ(annotation_warnings(a, 10).size(), 1u);
  EXPECT_TRUE(annotation_warnings(a, 2).empty());
}

TEST(PredictionMap, RejectsOutOfRange) {
  Grid<double> g(2, 2, 0.5);
  g(1, 1) = 1.5;
  EXPECT_THROW(PredictionMap{g}, std::invalid_argument);
  g(1, 1) = std::nan("");
  EXPECT_THROW(PredictionMap{g}, std::invalid_argument);
  EXPECT_DOUBLE_EQ(PredictionMap(3, 3, 0.25).mean(), 0.25);
}

TEST(ValidateSupervision, ReportsViolations) {
  SupervisionMask empty;
  EXPECT_EQ(validate_supervision(empty).violation, "empty shape");
  SupervisionMask s(4, 4);
  EXPECT_EQ(validate_supervision(s).violation, "no FG");
  s.labels(0, 0) = Label::Foreground;
  EXPECT_EQ(validate_supervision(s).violation, "no BG");
  s.labels(3, 3) = Label::Background;
  EXPECT_TRUE(validate_supervision(s).ok);
  EXPECT_EQ(validate_supervision(s, 4, 5).violation, "shape mismatch");
  EXPECT_EQ(s.labeled_count(), 2u);
}

TEST(DeriveSeed, DistinctTagsGiveDistinctSeeds) {
  EXPECT_NE(derive_seed({1, 2}), derive_seed({2, 1}));
  EXPECT_EQ(derive_seed({7, 8, 9}), derive_seed({7, 8, 9}));
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}
