#pragma once

// Point-to-region label expansion. Every annotated point first gets a small
// square; after a short warm-up the encoder's prediction map gives an object
// area estimate, from which a shared circle radius is derived for all points.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hintseg/core_types.hpp"
#include "hintseg/pyramid_encoder.hpp"

namespace hintseg {

enum class ThresholdMode { Fixed, Cluster2 };

struct HintConfig {
  int d = 10;
  double tau = 150.0;
  double alpha = 4.0;
  int w = 15;
  ThresholdMode threshold_mode = ThresholdMode::Fixed;
  double tau_scale = 255.0;  // tau is compared against probs * tau_scale

  void validate() const {
    if (d < 1) throw std::invalid_argument("hint.d must be >= 1");
    if (!(tau > 0.0 && tau < tau_scale)) throw std::invalid_argument("hint.tau must lie in (0, tau_scale)");
    if (!(alpha > 0.0)) throw std::invalid_argument("hint.alpha must be positive");
    if (w < 1) throw std::invalid_argument("hint.w must be >= 1");
    if (!(tau_scale > 0.0)) throw std::invalid_argument("hint.tau_scale must be positive");
  }
};

namespace detail {

inline void square_bounds(int center, int side, int extent, int& lo, int& hi) {
  lo = std::max(0, center - side / 2);
  hi = std::min(extent - 1, center - side / 2 + side - 1);
}

inline void paint_square(Grid<Label>& g, Point p, int side, Label l) {
  int x0, x1, y0, y1;
  square_bounds(p.x, side, g.width, x0, x1);
  square_bounds(p.y, side, g.height, y0, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) g(y, x) = l;
}

inline bool square_hits(const Grid<Label>& g, Point p, int side, Label l) {
  int x0, x1, y0, y1;
  square_bounds(p.x, side, g.width, x0, x1);
  square_bounds(p.y, side, g.height, y0, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (g(y, x) == l) return true;
  return false;
}

}  // namespace detail

/// FG squares of side d at each foreground point, a BG square at the
/// background point. The BG square shrinks until it no longer touches a FG
/// square; FG pixels are never relabelled, except that the clicked background
/// pixel itself is always BG.
inline SupervisionMask initial_square_supervision(const PointAnnotation& ann, int d, int height, int width) {
  if (d < 1) throw std::invalid_argument("square side must be >= 1");
  ann.validate(height, width);
  SupervisionMask sup(height, width);
  for (const auto& p : ann.foreground_points) detail::paint_square(sup.labels, p, d, Label::Foreground);
  int side = d;
  while (side > 1 && detail::square_hits(sup.labels, ann.background_point, side, Label::Foreground)) --side;
  if (!detail::square_hits(sup.labels, ann.background_point, side, Label::Foreground))
    detail::paint_square(sup.labels, ann.background_point, side, Label::Background);
  sup.labels(ann.background_point.y, ann.background_point.x) = Label::Background;
  return sup;
}

struct RadiusEstimate {
  double r = 0.0;
  std::size_t count = 0;    // pixels strictly above the threshold
  double threshold = 0.0;   // on the [0,1] probability scale
  bool fallback = false;
};

/// Two-cluster 1-D k-means threshold (midpoint of the converged centroids).
inline double cluster2_threshold(const std::vector<double>& values) {
  if (values.empty()) return 1.0;
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (lo == hi) return hi;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s0 = 0, s1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (double v : values) {
      if (v > mid) {
        s1 += v;
        ++n1;
      } else {
        s0 += v;
        ++n0;
      }
    }
    const double nlo = n0 ? s0 / n0 : lo;
    const double nhi = n1 ? s1 / n1 : hi;
    if (nlo == lo && nhi == hi) break;
    lo = nlo;
    hi = nhi;
  }
  return 0.5 * (lo + hi);
}

/// r = sqrt(#{P > tau / tau_scale} / N).
inline RadiusEstimate estimate_radius(const PredictionMap& pred, double tau, int n_objects, double tau_scale = 255.0,
                                      ThresholdMode mode = ThresholdMode::Fixed) {
  if (n_objects < 1) throw std::invalid_argument("estimate_radius: object count must be >= 1");
  RadiusEstimate e;
  e.threshold = mode == ThresholdMode::Fixed ? tau / tau_scale : cluster2_threshold(pred.values());
  for (double v : pred.values())
    if (v > e.threshold) ++e.count;
  e.r = std::sqrt(static_cast<double>(e.count) / n_objects);
  e.fallback = e.count == 0;
  return e;
}

struct ExpansionResult {
  SupervisionMask supervision;
  double R = 0.0;          // shared foreground radius
  double bg_radius = 0.0;  // background radius after conflict shrinking
};

/// FG circles of radius R = max(r/alpha, R_min) at every foreground point and
/// one BG circle at the background point, shrunk to stay clear of FG.
inline ExpansionResult expand_points(const PointAnnotation& ann, double r, double alpha, int height, int width) {
  if (!(r > 0.0)) throw std::invalid_argument("expand_points: radius must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("expand_points: alpha must be positive");
  ann.validate(height, width);
  ExpansionResult res;
  res.R = std::max(r / alpha, kMinRadius);
  res.supervision = SupervisionMask(height, width);
  auto& g = res.supervision.labels;
  for (const auto& p : ann.foreground_points)
    for (const auto& q : rasterize_circle(p, res.R, height, width)) g(q.y, q.x) = Label::Foreground;

  const Point b = ann.background_point;
  double nearest_fg = std::numeric_limits<double>::infinity();
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (g(y, x) == Label::Foreground) nearest_fg = std::min(nearest_fg, std::hypot(x - b.x, y - b.y));
  // Largest radius whose disc excludes every FG pixel, floored at R_min.
  res.bg_radius = std::max(kMinRadius, std::min(res.R, std::nextafter(nearest_fg, 0.0) - 1e-9));
  for (const auto& q : rasterize_circle(b, res.bg_radius, height, width))
    if (g(q.y, q.x) != Label::Foreground) g(q.y, q.x) = Label::Background;
  g(b.y, b.x) = Label::Background;
  return res;
}

struct HintResult {
  SupervisionMask supervision;
  double r = 0.0;
  double R = 0.0;
  bool fallback = false;
  std::string reason;  // empty, "empty_indicator" or "smaller_than_squares"
};

/// Expansion from an already computed warm-up prediction. Falls back to the
/// square supervision when nothing exceeds the threshold or when the circles
/// would label fewer pixels than the squares.
inline HintResult hint_supervision_from_prediction(const PredictionMap& pred, const PointAnnotation& ann,
                                                   const HintConfig& cfg) {
  cfg.validate();
  const int h = pred.height(), w = pred.width();
  HintResult out;
  const auto est = estimate_radius(pred, cfg.tau, ann.n_objects, cfg.tau_scale, cfg.threshold_mode);
  out.r = est.r;
  SupervisionMask squares = initial_square_supervision(ann, cfg.d, h, w);
  if (est.fallback) {
    out.supervision = std::move(squares);
    out.fallback = true;
    out.reason = "empty_indicator";
    return out;
  }
  auto ex = expand_points(ann, est.r, cfg.alpha, h, w);
  out.R = ex.R;
  if (ex.supervision.labeled_count() < squares.labeled_count()) {
    out.supervision = std::move(squares);
    out.fallback = true;
    out.reason = "smaller_than_squares";
    return out;
  }
  out.supervision = std::move(ex.supervision);
  return out;
}

/// encode -> estimate_radius -> expand_points with a model that has finished
/// exactly cfg.w warm-up epochs.
inline HintResult generate_hint_supervision(const Scene& scene, const PointAnnotation& ann, const ModelState& model,
                                            const HintConfig& cfg) {
  if (model.stage != TrainingStage::WarmedUp && model.stage != TrainingStage::HintsReady)
    throw std::logic_error(std::string("hint generation needs a warmed-up model, got stage ") + stage_name(model.stage));
  if (model.epoch != cfg.w)
    throw std::logic_error("hint generation expects a model after " + std::to_string(cfg.w) + " warm-up epochs, got " +
                           std::to_string(model.epoch));
  return hint_supervision_from_prediction(encode_padded(model.net, scene.image), ann, cfg);
}

}  // namespace hintseg
