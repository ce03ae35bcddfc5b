#include <gtest/gtest.h>

#include <sstream>

#include "hintseg/corpus.hpp"
#include "hintseg/training_pipeline.hpp"
#include "test_support.hpp"

using namespace hintseg;

namespace {

const std::vector<PreparedItem>& small_items() {
  static const std::vector<PreparedItem> items = [] {
    auto p = corpus_preset("tiny");
    p.n_scenes = 4;
    return prepare_corpus(generate_corpus(p, 5), 64);
  }();
  return items;
}

}  // namespace

TEST(Schedule, TriangularShape) {
  EXPECT_DOUBLE_EQ(triangular_lr(0, 100, 1.0, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(triangular_lr(50, 100, 1.0, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(triangular_lr(100, 100, 1.0, 0.1), 0.1);
  for (double t = 0; t <= 100; t += 1) {
    const double v = triangular_lr(t, 100, 2.0, 0.1);
    EXPECT_GE(v, 0.2 - 1e-12);
    EXPECT_LE(v, 2.0 + 1e-12);
    EXPECT_NEAR(v, triangular_lr(100 - t, 100, 2.0, 0.1), 1e-12);
    if (t > 0 && t <= 50) { EXPECT_GE(v, triangular_lr(t - 1, 100, 2.0, 0.1)); }
  }
}

TEST(Pipeline, StagesAreEnforced) {
  const auto cfg = test::quick_config();
  RunReport rep;
  ModelState m = make_model(cfg);
  EXPECT_THROW(hint_stage(small_items(), m, cfg, rep), stage_error);
  EXPECT_THROW(main_train(small_items(), {}, m, cfg, rep), stage_error);
  warmup(small_items(), m, cfg, rep);
  EXPECT_EQ(m.stage, TrainingStage::WarmedUp);
  EXPECT_EQ(m.epoch, cfg.hint.w);
  EXPECT_THROW(warmup(small_items(), m, cfg, rep), stage_error);
  EXPECT_THROW(main_train(small_items(), {}, m, cfg, rep), stage_error);
  const auto hints = hint_stage(small_items(), m, cfg, rep);
  EXPECT_EQ(hints.size(), small_items().size());
  EXPECT_EQ(m.stage, TrainingStage::HintsReady);
  main_train(small_items(), hints, m, cfg, rep);
  EXPECT_EQ(m.stage, TrainingStage::Trained);
  EXPECT_EQ(m.epoch, cfg.total_epochs());
}

TEST(Pipeline, SingleWarmupEpoch) {
  const auto cfg = test::quick_config(3, 1);
  const auto rep = run_pipeline(small_items(), cfg);
  ASSERT_FALSE(rep.diverged);
  EXPECT_EQ(rep.epochs.size(), 3u);
  EXPECT_EQ(rep.epochs[0].stage, "warmup");
  EXPECT_EQ(rep.epochs[1].stage, "main");
  EXPECT_TRUE(rep.metrics.has_value());
  EXPECT_TRUE(rep.warmup_metrics.has_value());
}

TEST(Pipeline, RepeatedRunsAreByteIdentical) {
  test::TempDir a("run_a"), b("run_b");
  const auto cfg = test::quick_config();
  run_pipeline(small_items(), cfg, a.str());
  run_pipeline(small_items(), cfg, b.str());
  const auto la = test::slurp(a.path() / "losses.csv");
  EXPECT_FALSE(la.empty());
  EXPECT_EQ(la, test::slurp(b.path() / "losses.csv"));
  EXPECT_EQ(test::slurp(a.path() / "metrics.csv"), test::slurp(b.path() / "metrics.csv"));
}

TEST(Pipeline, ResumeMatchesUninterrupted) {
  const auto cfg = test::quick_config(6, 2);
  RunReport r1;
  ModelState full = warmup(small_items(), cfg, r1);
  const auto hints = hint_stage(small_items(), full, cfg, r1);
  ModelState staged = full;
  main_train(small_items(), hints, full, cfg, r1);

  RunReport r2;
  main_train(small_items(), hints, staged, cfg, r2, 4);
  EXPECT_EQ(staged.epoch, 4);
  EXPECT_EQ(staged.stage, TrainingStage::HintsReady);
  std::stringstream ss;
  save_checkpoint(staged, ss);
  ModelState resumed = load_checkpoint(ss);
  main_train(small_items(), hints, resumed, cfg, r2);
  EXPECT_EQ(resumed.stage, TrainingStage::Trained);
  EXPECT_EQ(resumed.net.params(), full.net.params());
}

TEST(Pipeline, ContrastiveOffMeansTotalEqualsPce) {
  auto cfg = test::quick_config();
  cfg.contrastive.enabled = false;
  const auto rep = run_pipeline(small_items(), cfg);
  ASSERT_FALSE(rep.losses.empty());
  for (const auto& l : rep.losses) {
    EXPECT_EQ(l.l_c, 0.0);
    EXPECT_EQ(l.total, l.l_pce);
  }
}

TEST(Pipeline, ContrastiveOnProducesConsistencyLoss) {
  const auto cfg = test::quick_config();
  const auto rep = run_pipeline(small_items(), cfg);
  double lc = 0;
  for (const auto& l : rep.losses)
    if (l.stage == "main") lc += l.l_c;
  EXPECT_GT(lc, 0.0);
  for (const auto& l : rep.losses)
    if (l.stage == "warmup") { EXPECT_EQ(l.l_c, 0.0); }
}

TEST(Pipeline, RunDirectoryOutputs) {
  test::TempDir dir("outputs");
  const auto cfg = test::quick_config();
  run_pipeline(small_items(), cfg, dir.str());
  namespace fs = std::filesystem;
  for (const char* f : {"losses.csv", "metrics.csv", "report.json", "hints/hints.csv", "checkpoints/warmup.ckpt",
                        "checkpoints/final.ckpt"})
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "hints")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, static_cast<int>(small_items().size()));
  const auto hints = read_hints((dir.path() / "hints").string(), small_items());
  for (const auto& h : hints) EXPECT_TRUE(validate_supervision(h).ok);
  const auto model = load_checkpoint((dir.path() / "checkpoints" / "final.ckpt").string());
  EXPECT_EQ(model.stage, TrainingStage::Trained);
}

TEST(Pipeline, DivergenceRollsBack) {
  auto cfg = test::quick_config();
  cfg.optimizer.lr_max = 1e12;
  const auto rep = run_pipeline(small_items(), cfg);
  EXPECT_TRUE(rep.diverged);
  EXPECT_GE(rep.diverged_epoch, 0);
  EXPECT_FALSE(rep.diverged_reason.empty());
  EXPECT_FALSE(rep.metrics.has_value());
  for (const auto& l : rep.losses) EXPECT_TRUE(std::isfinite(l.total));
}

TEST(Pipeline, PointModeUsesSinglePixels) {
  auto cfg = test::quick_config();
  cfg.supervision = SupervisionMode::Point;
  for (const auto& it : small_items()) {
    const auto s = initial_supervision(it, cfg);
    EXPECT_EQ(s.count(Label::Foreground), it.annotation.foreground_points.size());
    EXPECT_EQ(s.count(Label::Background), 1u);
  }
  RunReport rep;
  ModelState m = warmup(small_items(), cfg, rep);
  const auto hints = hint_stage(small_items(), m, cfg, rep);
  for (const auto& h : rep.hints) EXPECT_EQ(h.reason, "point");
  EXPECT_EQ(hints[0].labeled_count(), small_items()[0].annotation.foreground_points.size() + 1);
}
