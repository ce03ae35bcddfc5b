#pragma once

// Two-stage schedule: warm-up on square labels, hint expansion, then main
// training with the attention regulator, two-view contrastive term and
// partial cross-entropy. Single-threaded and deterministic per seed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hintseg/attention_regulator.hpp"
#include "hintseg/config.hpp"
#include "hintseg/corpus.hpp"
#include "hintseg/hint_area_generator.hpp"
#include "hintseg/image_io.hpp"
#include "hintseg/losses.hpp"
#include "hintseg/metrics.hpp"
#include "hintseg/pyramid_encoder.hpp"
#include "hintseg/representation_optimizer.hpp"

namespace hintseg {

class stage_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A corpus item resampled to the network input size.
struct PreparedItem {
  std::string id;
  Image image;
  std::optional<BinaryMask> mask;  // native resolution, for evaluation
  PointAnnotation annotation;
  std::optional<SupervisionMask> scribble;
  int native_height = 0;
  int native_width = 0;
};

namespace pipeline_detail {

inline int rescale_coord(int v, int from, int to) {
  return std::clamp(static_cast<int>(std::floor((v + 0.5) * to / from)), 0, to - 1);
}

template <typename V>
Grid<V> resize_nearest(const Grid<V>& in, int h, int w) {
  if (in.height == h && in.width == w) return in;
  Grid<V> out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(y, x) = in(rescale_coord(y, h, in.height), rescale_coord(x, w, in.width));
  return out;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace pipeline_detail

inline std::vector<PreparedItem> prepare_corpus(const Corpus& corpus, int input_size) {
  using pipeline_detail::rescale_coord;
  std::vector<PreparedItem> out;
  out.reserve(corpus.size());
  for (const auto& it : corpus.items) {
    PreparedItem p;
    p.id = it.scene.id;
    p.native_height = it.scene.height();
    p.native_width = it.scene.width();
    p.mask = it.scene.mask;
    const int H = p.native_height, W = p.native_width;
    if (H == input_size && W == input_size) {
      p.image = it.scene.image;
      p.annotation = it.annotation;
      p.scribble = it.scribble;
    } else {
      p.image = nn::resize_bilinear(it.scene.image, input_size, input_size);
      for (auto& v : p.image.data) v = std::clamp(v, 0.0f, 1.0f);
      p.annotation.n_objects = it.annotation.n_objects;
      for (const auto& q : it.annotation.foreground_points)
        p.annotation.foreground_points.push_back({rescale_coord(q.x, W, input_size), rescale_coord(q.y, H, input_size)});
      const Point b = it.annotation.background_point;
      p.annotation.background_point = {rescale_coord(b.x, W, input_size), rescale_coord(b.y, H, input_size)};
      p.annotation.validate(input_size, input_size);
      if (it.scribble) {
        SupervisionMask s;
        s.labels = pipeline_detail::resize_nearest(it.scribble->labels, input_size, input_size);
        p.scribble = std::move(s);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Symmetric triangle over [0, total]: floor * peak at both ends, exactly
/// `peak` at total / 2.
inline double triangular_lr(double t, double total, double peak, double floor_frac) {
  if (total <= 0) return peak;
  const double half = total / 2.0;
  const double frac = 1.0 - std::min(1.0, std::abs(t - half) / half);
  return peak * (floor_frac + (1.0 - floor_frac) * frac);
}

struct LossRecord {
  long step = 0;
  int epoch = 0;
  std::string stage;
  double l_pce = 0, l_c = 0, total = 0;
};

struct EpochSummary {
  int epoch = 0;
  std::string stage;
  double l_pce = 0, l_c = 0, total = 0;
};

struct HintRecord {
  std::string id;
  double r = 0, R = 0;
  bool fallback = false;
  std::string reason;
};

struct RunReport {
  std::string config_text;
  std::vector<LossRecord> losses;
  std::vector<EpochSummary> epochs;
  std::vector<HintRecord> hints;
  std::vector<std::pair<std::string, MetricReport>> per_image;
  std::optional<MetricReport> metrics;
  std::optional<MetricReport> warmup_metrics;
  bool diverged = false;
  int diverged_epoch = -1;
  std::string diverged_reason;
  double wall_seconds = 0;

  double fallback_fraction() const {
    if (hints.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& h : hints) n += h.fallback;
    return static_cast<double>(n) / static_cast<double>(hints.size());
  }
};

/// Epoch-level training loop shared by warm-up and main training.
class Trainer {
 public:
  Trainer(const std::vector<PreparedItem>& items, const RunConfig& cfg, ModelState& model, RunReport& report)
      : items_(items), cfg_(cfg), model_(model), report_(report) {
    if (items_.empty()) throw std::invalid_argument("training needs a non-empty corpus");
    steps_per_epoch_ = (static_cast<int>(items_.size()) + cfg_.batch_size - 1) / cfg_.batch_size;
  }

  int steps_per_epoch() const { return steps_per_epoch_; }
  long total_steps() const { return static_cast<long>(cfg_.total_epochs()) * steps_per_epoch_; }

  /// Runs epochs [model.epoch, end_epoch) with `step(item_index, epoch)`
  /// returning {l_pce, l_c} and accumulating gradients. On a non-finite loss
  /// or parameter the model is restored to the start of the failing epoch and
  /// false is returned.
  template <typename StepFn>
  bool run(int end_epoch, const char* stage, StepFn&& step) {
    const int n = static_cast<int>(items_.size());
    while (model_.epoch < end_epoch) {
      const int epoch = model_.epoch;
      const std::vector<float> params_backup = model_.net.params();
      const std::vector<float> momentum_backup = model_.momentum;
      const std::size_t losses_before = report_.losses.size();

      std::vector<int> order(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) order[i] = i;
      Rng shuffle_rng(derive_seed({cfg_.seed, static_cast<std::uint64_t>(epoch), 0x0dde5u}));
      shuffle_rng.shuffle(order);

      EpochSummary summary{epoch, stage};
      std::string failure;
      for (int b = 0; b < steps_per_epoch_ && failure.empty(); ++b) {
        model_.net.zero_grads();
        double s_pce = 0, s_c = 0;
        const int lo = b * cfg_.batch_size, hi = std::min(n, lo + cfg_.batch_size);
        for (int k = lo; k < hi; ++k) {
          const auto [l_pce, l_c] = step(order[k], epoch);
          s_pce += l_pce;
          s_c += l_c;
        }
        const double cnt = hi - lo;
        LossRecord rec{static_cast<long>(epoch) * steps_per_epoch_ + b, epoch, stage, s_pce / cnt, s_c / cnt, 0.0};
        try {
          rec.total = total_loss(rec.l_c, rec.l_pce);
        } catch (const loss_error& e) {
          failure = std::string(e.what()) + " at step " + std::to_string(rec.step);
          break;
        }
        const double lr =
            triangular_lr(static_cast<double>(rec.step), static_cast<double>(total_steps()), cfg_.optimizer.lr_max,
                          cfg_.optimizer.lr_floor);
        if (!sgd_update(lr, cnt)) {
          failure = "non-finite parameter after update at step " + std::to_string(rec.step);
          break;
        }
        report_.losses.push_back(rec);
        summary.l_pce += rec.l_pce / steps_per_epoch_;
        summary.l_c += rec.l_c / steps_per_epoch_;
        summary.total += rec.total / steps_per_epoch_;
      }
      if (!failure.empty()) {
        model_.net.params() = params_backup;
        model_.momentum = momentum_backup;
        report_.losses.resize(losses_before);
        report_.diverged = true;
        report_.diverged_epoch = epoch;
        report_.diverged_reason = failure;
        return false;
      }
      report_.epochs.push_back(summary);
      ++model_.epoch;
    }
    return true;
  }

 private:
  /// SGD with momentum and L2 weight decay on the batch-mean gradient.
  bool sgd_update(double lr, double batch) {
    auto& p = model_.net.params();
    const auto& g = model_.net.grads();
    auto& v = model_.momentum;
    const float mu = static_cast<float>(cfg_.optimizer.momentum);
    const float wd = static_cast<float>(cfg_.optimizer.weight_decay);
    const float inv = static_cast<float>(1.0 / batch);
    const float step = static_cast<float>(lr);
    bool finite = true;
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = mu * v[k] + (g[k] * inv + wd * p[k]);
      p[k] -= step * v[k];
      if (!std::isfinite(p[k])) finite = false;
    }
    return finite;
  }

  const std::vector<PreparedItem>& items_;
  const RunConfig& cfg_;
  ModelState& model_;
  RunReport& report_;
  int steps_per_epoch_ = 1;
};

/// Square (or scribble) labels used before hint expansion.
inline SupervisionMask initial_supervision(const PreparedItem& item, const RunConfig& cfg) {
  if (cfg.supervision == SupervisionMode::Scribble) {
    if (!item.scribble) throw std::invalid_argument("supervision.mode=scribble but image " + item.id + " has no scribble");
    return *item.scribble;
  }
  return initial_square_supervision(item.annotation, cfg.square_side(), item.image.height, item.image.width);
}

inline ModelState make_model(const RunConfig& cfg) {
  EncoderConfig e = cfg.encoder;
  e.seed = cfg.seed;
  return ModelState(e);
}

namespace pipeline_detail {

/// One supervised forward/backward pass of f; returns the partial CE.
inline double supervised_pass(Network<float>& net, const Image& image, const SupervisionMask& sup, Reduction reduction) {
  if (sup.labeled_count() == 0) return 0.0;
  const auto tr = net.forward(image);
  const Grid<float> p = logits_to_probabilities(tr.logits, image.height, image.width);
  Grid<float> g;
  const double l = partial_ce<float>(p, sup, &g, reduction);
  net.backward(tr, probabilities_backward(p, g, tr.logits.height, tr.logits.width));
  return l;
}

}  // namespace pipeline_detail

/// hint.w epochs of partial CE on the initial labels. No augmentation,
/// regulator or contrastive term. Leaves the model at epoch w, stamped
/// WarmedUp (unless it diverged).
inline void warmup(const std::vector<PreparedItem>& items, ModelState& model, const RunConfig& cfg, RunReport& report) {
  cfg.validate();
  if (model.stage != TrainingStage::Initialized || model.epoch != 0)
    throw stage_error(std::string("warm-up expects a fresh model, got stage ") + stage_name(model.stage));
  std::vector<SupervisionMask> sup;
  for (const auto& it : items) sup.push_back(initial_supervision(it, cfg));
  Trainer trainer(items, cfg, model, report);
  const bool ok = trainer.run(cfg.warmup_epochs(), "warmup", [&](int i, int) {
    return std::pair<double, double>{pipeline_detail::supervised_pass(model.net, items[i].image, sup[i], cfg.pce_reduction),
                                     0.0};
  });
  if (ok) model.stage = TrainingStage::WarmedUp;
}

inline ModelState warmup(const std::vector<PreparedItem>& items, const RunConfig& cfg, RunReport& report) {
  ModelState model = make_model(cfg);
  warmup(items, model, cfg, report);
  return model;
}

/// Per-image supervision for main training. Hint mode expands the clicks with
/// the warmed-up model; square and point modes keep their squares; scribble
/// mode keeps the scribbles.
inline std::vector<SupervisionMask> hint_stage(const std::vector<PreparedItem>& items, ModelState& model,
                                               const RunConfig& cfg, RunReport& report) {
  if (model.stage != TrainingStage::WarmedUp)
    throw stage_error(std::string("hint stage expects a warmed-up model, got stage ") + stage_name(model.stage));
  std::vector<SupervisionMask> out;
  report.hints.clear();
  for (const auto& it : items) {
    HintRecord rec;
    rec.id = it.id;
    if (cfg.supervision == SupervisionMode::Hint) {
      Scene scene{it.image, std::nullopt, it.id};
      HintResult h = generate_hint_supervision(scene, it.annotation, model, cfg.hint);
      rec.r = h.r;
      rec.R = h.R;
      rec.fallback = h.fallback;
      rec.reason = h.reason;
      out.push_back(std::move(h.supervision));
    } else {
      rec.reason = to_string(cfg.supervision);
      out.push_back(initial_supervision(it, cfg));
    }
    const auto v = validate_supervision(out.back(), it.image.height, it.image.width);
    if (!v) throw std::runtime_error("hint supervision for " + it.id + " is invalid: " + v.violation);
    report.hints.push_back(rec);
  }
  model.stage = TrainingStage::HintsReady;
  return out;
}

namespace pipeline_detail {

struct MainStep {
  const RunConfig& cfg;
  Network<float>& net;
  AugmentationSet aug;

  MainStep(const RunConfig& c, Network<float>& n) : cfg(c), net(n), aug(c.aug) {
    if (c.regulator.enabled) aug.insert(TransformKind::RegulatorMask);
    else aug.erase(TransformKind::RegulatorMask);
  }

  std::pair<double, double> operator()(const PreparedItem& item, const SupervisionMask& sup, int epoch, int index) {
    const int H = item.image.height, W = item.image.width;
    Rng rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(index), 0xa11u}));
    AugPair pair = sample_pair(aug, rng);
    if (!cfg.contrastive.enabled && cfg.regulator.enabled && !has_kind(pair.t2, TransformKind::RegulatorMask)) {
      // Single supervised branch: it always carries the regulator.
      pair.t2.insert(pair.t2.begin(), TransformSpec::regulator());
    }
    BinaryMask keep;
    if (cfg.regulator.enabled) keep = build_mask(sup, cfg.regulator, rng);
    const BinaryMask* keep_ptr = cfg.regulator.enabled ? &keep : nullptr;

    // Branch 2: f only, carries the supervised loss.
    const Image i2 = apply_transform(item.image, pair.t2, keep_ptr);
    const SupervisionMask s2 = transform_supervision(sup, pair.t2);
    const auto tr2 = net.forward(i2);
    const Grid<float> p2 = logits_to_probabilities(tr2.logits, H, W);
    Grid<float> g2(H, W, 0.0f);
    double l_pce = 0.0;
    if (s2.labeled_count() > 0) l_pce = partial_ce<float>(p2, s2, &g2, cfg.pce_reduction);

    double l_c = 0.0;
    if (cfg.contrastive.enabled) {
      // Branch 1: g(f(.)) when the predictor is on.
      const Image i1 = apply_transform(item.image, pair.t1, keep_ptr);
      const auto tr1 = net.forward(i1);
      std::optional<PredictorTrace<float>> ptr;
      if (cfg.contrastive.predictor) ptr = net.predictor_forward(tr1.logits);
      const Tensor<float>& z1 = ptr ? ptr->logits : tr1.logits;
      const Grid<float> p1 = logits_to_probabilities(z1, H, W);

      const Alignment al(pair.t2, pair.t1, H, W);
      const Grid<float> p2a = al.forward(p2);
      const BinaryMask include = contrastive_include_mask(
          al.valid(), has_geometric(pair.t1) || has_geometric(pair.t2), cfg.contrastive.border);
      const ContrastiveOptions opt{cfg.contrastive.loss, cfg.contrastive.stopgrad, cfg.contrastive.normalize_mean};
      const auto res = contrastive_loss_and_grad<float>(p1, p2a, &include, opt);
      if (res.pixels > 0) {
        l_c = res.loss;
        if (!cfg.contrastive.stopgrad) {
          const Grid<float> back = al.adjoint(res.grad_p2);
          for (std::size_t k = 0; k < g2.size(); ++k) g2.data[k] += back.data[k];
        }
        Tensor<float> gz = probabilities_backward(p1, res.grad_p1, z1.height, z1.width);
        if (ptr) gz = net.predictor_backward(*ptr, gz);
        net.backward(tr1, gz);
      }
    }
    net.backward(tr2, probabilities_backward(p2, g2, tr2.logits.height, tr2.logits.width));
    return {l_pce, l_c};
  }
};

}  // namespace pipeline_detail

/// Main training from model.epoch up to `until_epoch` (default: the last
/// epoch). Requires a model stamped by the hint stage; stamps Trained when
/// the final epoch completes.
inline void main_train(const std::vector<PreparedItem>& items, const std::vector<SupervisionMask>& hints, ModelState& model,
                       const RunConfig& cfg, RunReport& report, int until_epoch = -1) {
  cfg.validate();
  if (model.stage != TrainingStage::HintsReady)
    throw stage_error(std::string("main training expects a model stamped by the hint stage, got stage ") +
                      stage_name(model.stage));
  if (hints.size() != items.size()) throw std::invalid_argument("one supervision mask per image is required");
  const int end = until_epoch < 0 ? cfg.total_epochs() : std::min(until_epoch, cfg.total_epochs());
  pipeline_detail::MainStep step(cfg, model.net);
  Trainer trainer(items, cfg, model, report);
  const bool ok = trainer.run(end, "main", [&](int i, int epoch) { return step(items[i], hints[i], epoch, i); });
  if (ok && model.epoch == cfg.total_epochs()) model.stage = TrainingStage::Trained;
}

/// f's prediction at the item's native resolution.
inline PredictionMap predict(const Network<float>& net, const PreparedItem& item) {
  const PredictionMap p = encode_padded(net, item.image);
  if (p.height() == item.native_height && p.width() == item.native_width) return p;
  Tensor<double> t(1, p.height(), p.width());
  t.data = p.values();
  const Tensor<double> up = nn::resize_bilinear(t, item.native_height, item.native_width);
  Grid<double> g(item.native_height, item.native_width);
  for (std::size_t k = 0; k < g.size(); ++k) g.data[k] = std::clamp(up.data[k], 0.0, 1.0);
  return PredictionMap(std::move(g));
}

inline MetricReport evaluate(const std::vector<PreparedItem>& items, const Network<float>& net,
                             std::vector<std::pair<std::string, MetricReport>>* per_image = nullptr) {
  std::vector<MetricReport> all;
  for (const auto& it : items) {
    if (!it.mask) throw std::invalid_argument("evaluation needs a ground-truth mask for " + it.id);
    all.push_back(evaluate_metrics(predict(net, it), *it.mask));
    if (per_image) per_image->push_back({it.id, all.back()});
  }
  return corpus_mean(all);
}

// ---------------------------------------------------------------------------
// Run directory outputs
// ---------------------------------------------------------------------------

inline void write_losses_csv(const std::string& path, const RunReport& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write " + path);
  os << "step,epoch,stage,l_pce,l_c,total\n";
  using pipeline_detail::fmt;
  for (const auto& l : r.losses)
    os << l.step << "," << l.epoch << "," << l.stage << "," << fmt(l.l_pce) << "," << fmt(l.l_c) << "," << fmt(l.total)
       << "\n";
}

inline void write_metrics_csv(const std::string& path, const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write " + path);
  os << "image_id,mae,sm,em,fwb\n";
  using pipeline_detail::fmt;
  for (const auto& [id, m] : rows)
    os << id << "," << fmt(m.mae) << "," << fmt(m.s_measure) << "," << fmt(m.e_measure) << "," << fmt(m.f_w_beta) << "\n";
}

inline nlohmann::json metrics_json(const MetricReport& m) {
  return {{"mae", m.mae}, {"sm", m.s_measure}, {"em", m.e_measure}, {"fwb", m.f_w_beta}, {"em_variant", kEMeasureVariant}};
}

inline void write_hints(const std::string& dir, const std::vector<PreparedItem>& items,
                        const std::vector<SupervisionMask>& hints, const RunReport& r) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream os(fs::path(dir) / "hints.csv", std::ios::binary);
  os << "image_id,r,R,fallback,reason\n";
  for (std::size_t i = 0; i < r.hints.size(); ++i) {
    const auto& h = r.hints[i];
    os << h.id << "," << pipeline_detail::fmt(h.r) << "," << pipeline_detail::fmt(h.R) << "," << (h.fallback ? 1 : 0) << ","
       << h.reason << "\n";
    if (i < hints.size()) write_supervision_png((fs::path(dir) / (items[i].id + ".png")).string(), hints[i]);
  }
}

inline std::vector<SupervisionMask> read_hints(const std::string& dir, const std::vector<PreparedItem>& items) {
  std::vector<SupervisionMask> out;
  for (const auto& it : items)
    out.push_back(read_supervision_png((std::filesystem::path(dir) / (it.id + ".png")).string()));
  return out;
}

inline nlohmann::json report_json(const RunReport& r) {
  nlohmann::json j;
  j["config"] = r.config_text;
  j["diverged"] = r.diverged;
  if (r.diverged) {
    j["diverged_epoch"] = r.diverged_epoch;
    j["diverged_reason"] = r.diverged_reason;
  }
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"stage", e.stage}, {"l_pce", e.l_pce}, {"l_c", e.l_c}, {"total", e.total}});
  j["epochs"] = epochs;
  nlohmann::json hints = nlohmann::json::array();
  for (const auto& h : r.hints)
    hints.push_back({{"image_id", h.id}, {"r", h.r}, {"R", h.R}, {"fallback", h.fallback}, {"reason", h.reason}});
  j["hints"] = hints;
  j["fallback_fraction"] = r.fallback_fraction();
  if (r.warmup_metrics) j["warmup_metrics"] = metrics_json(*r.warmup_metrics);
  if (r.metrics) j["metrics"] = metrics_json(*r.metrics);
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

inline void write_report_json(const std::string& path, const RunReport& r) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write " + path);
  os << report_json(r).dump(2) << "\n";
}

/// Warm-up, hint stage, main training and evaluation. When `run_dir` is
/// non-empty the standard outputs are written there.
inline RunReport run_pipeline(const std::vector<PreparedItem>& items, const RunConfig& cfg, const std::string& run_dir = "",
                              ModelState* final_model = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.config_text = cfg.to_text();
  if (!run_dir.empty()) fs::create_directories(fs::path(run_dir) / "checkpoints");

  ModelState model = warmup(items, cfg, report);
  std::vector<SupervisionMask> hints;
  if (!report.diverged) {
    report.warmup_metrics = evaluate(items, model.net);
    if (!run_dir.empty()) save_checkpoint(model, (fs::path(run_dir) / "checkpoints" / "warmup.ckpt").string());
    hints = hint_stage(items, model, cfg, report);
    if (!run_dir.empty()) write_hints((fs::path(run_dir) / "hints").string(), items, hints, report);
    main_train(items, hints, model, cfg, report);
  }
  if (!report.diverged) {
    report.metrics = evaluate(items, model.net, &report.per_image);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!run_dir.empty()) {
    save_checkpoint(model, (fs::path(run_dir) / "checkpoints" / (report.diverged ? "last_good.ckpt" : "final.ckpt")).string());
    write_losses_csv((fs::path(run_dir) / "losses.csv").string(), report);
    write_metrics_csv((fs::path(run_dir) / "metrics.csv").string(), report.per_image);
    write_report_json((fs::path(run_dir) / "report.json").string(), report);
  }
  if (final_model) *final_model = std::move(model);
  return report;
}

inline RunReport run_pipeline(const Corpus& corpus, const RunConfig& cfg, const std::string& run_dir = "") {
  return run_pipeline(prepare_corpus(corpus, cfg.input_size), cfg, run_dir);
}

}  // namespace hintseg
