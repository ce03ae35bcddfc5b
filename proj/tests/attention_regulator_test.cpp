#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "hintseg/attention_regulator.hpp"

using namespace hintseg;

namespace {

SupervisionMask block_supervision(int h, int w, int y0, int x0, int side) {
  SupervisionMask s(h, w);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) s.labels(y, x) = Label::Foreground;
  s.labels(h - 1, w - 1) = Label::Background;
  return s;
}

}  // namespace

TEST(Regulator, ExactZeroCountInsideRegion) {
  auto sup = block_supervision(32, 32, 5, 5, 10);
  RegulatorConfig cfg;
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    auto m = build_mask(sup, cfg, rng);
    int zeros = 0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (m.data[k]) continue;
      ++zeros;
      EXPECT_EQ(sup.labels.data[k], Label::Foreground);
    }
    EXPECT_EQ(zeros, 50);
  }
}

TEST(Regulator, ZeroPositionsAreUniform) {
  auto sup = block_supervision(20, 20, 2, 2, 10);
  RegulatorConfig cfg;
  Rng rng(2);
  const int draws = 1000;
  std::vector<double> hits(sup.labels.size(), 0.0);
  for (int t = 0; t < draws; ++t) {
    auto m = build_mask(sup, cfg, rng);
    for (std::size_t k = 0; k < m.size(); ++k)
      if (!m.data[k]) hits[k] += 1;
  }
  const double expected = draws * 0.5, variance = draws * 0.25;
  double chi2 = 0.0;
  int cells = 0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (sup.labels.data[k] != Label::Foreground) continue;
    chi2 += (hits[k] - expected) * (hits[k] - expected) / variance;
    ++cells;
  }
  boost::math::chi_squared dist(cells - 1);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01);
}

TEST(Regulator, RatioFloorsAndExtremes) {
  auto sup = block_supervision(16, 16, 0, 0, 3);  // 9 FG pixels
  Rng rng(3);
  RegulatorConfig cfg;
  auto count_zeros = [](const BinaryMask& m) { return std::count(m.data.begin(), m.data.end(), 0); };
  EXPECT_EQ(count_zeros(build_mask(sup, cfg, rng)), 4);
  cfg.mask_ratio = 0.0;
  EXPECT_EQ(count_zeros(build_mask(sup, cfg, rng)), 0);
  cfg.mask_ratio = 1.0;
  EXPECT_EQ(count_zeros(build_mask(sup, cfg, rng)), 9);
  cfg.enabled = false;
  EXPECT_EQ(count_zeros(build_mask(sup, cfg, rng)), 0);
  cfg.enabled = true;
  cfg.mask_ratio = 1.5;
  EXPECT_THROW(build_mask(sup, cfg, rng), std::invalid_argument);
}

TEST(Regulator, BaselinesIgnoreSupervision) {
  auto sup = block_supervision(32, 32, 0, 0, 4);
  Rng rng(4);
  RegulatorConfig cfg;
  cfg.type = RegulatorType::Cutout;
  auto m = build_mask(sup, cfg, rng);
  const auto zeros = std::count(m.data.begin(), m.data.end(), 0);
  EXPECT_GT(zeros, 0);
  EXPECT_LE(zeros, 64);
  cfg.type = RegulatorType::HaS;
  cfg.mask_ratio = 1.0;
  m = build_mask(sup, cfg, rng);
  EXPECT_EQ(std::count(m.data.begin(), m.data.end(), 0), 32 * 32);
  EXPECT_EQ(parse_regulator_type("has"), RegulatorType::HaS);
  EXPECT_THROW(parse_regulator_type("bogus"), std::invalid_argument);
}

TEST(Regulator, ApplyMaskZeroesAllChannels) {
  Image img(3, 4, 4, 0.7f);
  BinaryMask m(4, 4, 1);
  m(1, 2) = 0;
  auto out = apply_mask(img, m);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(out(c, 1, 2), 0.0f);
    EXPECT_EQ(out(c, 0, 0), 0.7f);
  }
  EXPECT_THROW(apply_mask(img, BinaryMask(3, 4, 1)), shape_error);
}
