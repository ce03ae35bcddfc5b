#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "hintseg/metrics.hpp"
#include "test_support.hpp"

using namespace hintseg;

namespace {

struct GoldenCase {
  std::string name;
  PredictionMap pred;
  BinaryMask gt;
  MetricReport expected;
};

std::vector<GoldenCase> load_goldens() {
  std::ifstream is(std::string(HINTSEG_FIXTURE_DIR) + "/metric_goldens.json");
  if (!is) throw std::runtime_error("missing metric_goldens.json");
  const auto j = nlohmann::json::parse(is);
  std::vector<GoldenCase> out;
  for (const auto& c : j.at("cases")) {
    const int h = c.at("height"), w = c.at("width");
    Grid<double> p(h, w);
    BinaryMask g(h, w);
    for (int k = 0; k < h * w; ++k) {
      p.data[k] = c.at("pred")[k].get<double>();
      g.data[k] = static_cast<std::uint8_t>(c.at("gt")[k].get<int>());
    }
    out.push_back({c.at("name"), PredictionMap(std::move(p)), std::move(g),
                   {c.at("mae"), c.at("s_measure"), c.at("e_measure"), c.at("f_w_beta")}});
  }
  return out;
}

BinaryMask disc(int s, double cy, double cx, double r) {
  BinaryMask m(s, s);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) m(y, x) = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
  return m;
}

PredictionMap as_prediction(const BinaryMask& m) {
  Grid<double> g(m.height, m.width);
  for (std::size_t k = 0; k < m.size(); ++k) g.data[k] = m.data[k];
  return PredictionMap(std::move(g));
}

}  // namespace

TEST(Metrics, MatchGoldens) {
  const auto cases = load_goldens();
  ASSERT_EQ(cases.size(), 20u);
  for (const auto& c : cases) {
    SCOPED_TRACE(c.name);
    const auto r = evaluate_metrics(c.pred, c.gt);
    EXPECT_NEAR(r.mae, c.expected.mae, 1e-6);
    EXPECT_NEAR(r.s_measure, c.expected.s_measure, 1e-6);
    EXPECT_NEAR(r.e_measure, c.expected.e_measure, 1e-6);
    EXPECT_NEAR(r.f_w_beta, c.expected.f_w_beta, 1e-6);
  }
}

TEST(Metrics, PerfectPredictionIsExact) {
  for (int s : {8, 16, 33}) {
    const auto gt = disc(s, s * 0.4, s * 0.6, s * 0.3);
    const auto r = evaluate_metrics(as_prediction(gt), gt);
    EXPECT_EQ(r.mae, 0.0);
    EXPECT_EQ(r.s_measure, 1.0);
    EXPECT_EQ(r.e_measure, 1.0);
    EXPECT_EQ(r.f_w_beta, 1.0);
  }
}

TEST(Metrics, AllBackgroundConventions) {
  BinaryMask gt(8, 8, 0);
  const auto zero = evaluate_metrics(PredictionMap(8, 8, 0.0), gt);
  EXPECT_EQ(zero.mae, 0.0);
  EXPECT_EQ(zero.s_measure, 1.0);
  EXPECT_EQ(zero.e_measure, 1.0);
  EXPECT_EQ(zero.f_w_beta, 1.0);
  const auto half = evaluate_metrics(PredictionMap(8, 8, 0.5), gt);
  EXPECT_DOUBLE_EQ(half.s_measure, 0.5);
  EXPECT_EQ(half.f_w_beta, 0.0);
}

TEST(Metrics, RangesAndMaeFormula) {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    auto p = test::random_prediction(16, 16, rng);
    const auto gt = disc(16, rng.uniform(4, 12), rng.uniform(4, 12), rng.uniform(2, 6));
    const auto r = evaluate_metrics(p, gt);
    double m = 0;
    for (std::size_t k = 0; k < gt.size(); ++k) m += std::abs(p.values()[k] - gt.data[k]);
    EXPECT_NEAR(r.mae, m / gt.size(), 1e-12);
    for (double v : {r.s_measure, r.e_measure, r.f_w_beta}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, BetterPredictionScoresBetter) {
  const auto gt = disc(32, 16, 16, 8);
  Grid<double> good(32, 32), bad(32, 32);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    good.data[k] = gt.data[k] ? 0.9 : 0.1;
    bad.data[k] = gt.data[k] ? 0.6 : 0.4;
  }
  const auto a = evaluate_metrics(PredictionMap(good), gt), b = evaluate_metrics(PredictionMap(bad), gt);
  EXPECT_LT(a.mae, b.mae);
  EXPECT_GT(a.s_measure, b.s_measure);
  EXPECT_GT(a.f_w_beta, b.f_w_beta);
}

TEST(Metrics, ShapeMismatchThrows) {
  EXPECT_THROW(mae(PredictionMap(4, 4, 0.5), BinaryMask(4, 5)), shape_error);
}

TEST(Metrics, CorpusMeanAveragesFields) {
  const auto m = corpus_mean({{0.1, 0.5, 0.6, 0.7}, {0.3, 0.7, 0.8, 0.9}});
  EXPECT_DOUBLE_EQ(m.mae, 0.2);
  EXPECT_DOUBLE_EQ(m.s_measure, 0.6);
  EXPECT_DOUBLE_EQ(m.f_w_beta, 0.8);
}
