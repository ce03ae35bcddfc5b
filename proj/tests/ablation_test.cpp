#include <gtest/gtest.h>

#include "hintseg/ablation.hpp"
#include "hintseg/corpus.hpp"
#include "test_support.hpp"

using namespace hintseg;

namespace {

const std::vector<PreparedItem>& items() {
  static const std::vector<PreparedItem> v = [] {
    auto p = corpus_preset("tiny");
    p.n_scenes = 3;
    return prepare_corpus(generate_corpus(p, 9), 64);
  }();
  return v;
}

}  // namespace

TEST(Ablation, ParseAxis) {
  const auto a = parse_ablation_axis("aug.set=flip|flip,scale|none");
  EXPECT_EQ(a.key, "aug.set");
  ASSERT_EQ(a.values.size(), 3u);
  EXPECT_EQ(a.values[1], "flip,scale");
  EXPECT_THROW(parse_ablation_axis("hint.tau"), config_error);
  EXPECT_THROW(parse_ablation_axis("bogus.key=1|2"), config_error);
}

TEST(Ablation, GridProducesEveryCellAndReference) {
  auto base = test::quick_config(3, 1);
  const auto r = run_ablation({parse_ablation_axis("regulator.type=ours|has|cutout")}, items(), base, {0, 1});
  ASSERT_EQ(r.cells.size(), 3u);
  EXPECT_EQ(r.reference_index, 0u);
  EXPECT_TRUE(r.cells[0].reference);
  for (const auto& c : r.cells) {
    EXPECT_EQ(c.runs.size(), 2u);
    EXPECT_FALSE(c.failed) << c.label();
    EXPECT_TRUE(std::isfinite(c.median(&MetricReport::mae)));
  }
  EXPECT_EQ(r.cells[1].label(), "regulator.type=has");

  test::TempDir dir("ablation");
  write_ablation_outputs(r, dir.str());
  const auto csv = test::slurp(dir.path() / "ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 6);
}

TEST(Ablation, DivergenceIsFlagged) {
  auto base = test::quick_config(3, 1);
  const auto r = run_ablation({parse_ablation_axis("optimizer.lr_max=0.02|1e12")}, items(), base, {0});
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_FALSE(r.cells[0].flagged);
  EXPECT_TRUE(r.cells[1].flagged);
  EXPECT_EQ(r.cells[1].flag_reason, "diverged");
}

TEST(Ablation, InvalidCellIsReportedNotFatal) {
  auto base = test::quick_config(3, 1);
  const auto r = run_ablation({parse_ablation_axis("hint.w=1|5")}, items(), base, {0});
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_FALSE(r.cells[0].failed);
  EXPECT_TRUE(r.cells[1].failed);  // w = 5 leaves no main epochs out of 3
}

TEST(Ablation, TauMovesHintsMoreThanAlpha) {
  // Warm-up once, then compare hint radii across the two hint knobs.
  auto cfg = test::quick_config(4, 2);
  RunReport rep;
  ModelState m = warmup(items(), cfg, rep);
  Rng rng(0);
  auto spread = [&](auto setter, std::initializer_list<double> values) {
    double lo = 1e9, hi = -1e9;
    for (double v : values) {
      HintConfig h = cfg.hint;
      setter(h, v);
      double total = 0;
      for (const auto& it : items()) {
        const Scene s{it.image, std::nullopt, it.id};
        total += generate_hint_supervision(s, it.annotation, m, h).supervision.count(Label::Foreground);
      }
      lo = std::min(lo, total);
      hi = std::max(hi, total);
    }
    return hi - lo;
  };
  const double tau = spread([](HintConfig& h, double v) { h.tau = v; }, {10.0, 245.0});
  const double alpha = spread([](HintConfig& h, double v) { h.alpha = v; }, {4.0, 4.5});
  EXPECT_GE(tau, alpha);
}
