#pragma once

// Segmentation quality metrics: MAE, structure measure (S_m), adaptive
// enhanced-alignment measure (E_m) and weighted F-measure (F^w_beta, beta^2 = 1).
//
// Conventions pinned here (and mirrored by the golden-file generator in
// tests/fixtures):
//   * predictions are used as given, no min-max rescaling;
//   * E_m binarises at min(2 * mean(pred), 1); a zero threshold binarises to
//     all-background; the enhanced sum is divided by H*W;
//   * small epsilons of the reference formulas are replaced by explicit
//     zero-denominator checks so that perfect predictions score exactly 1;
//   * nearest-foreground ties in the F^w distance transform go to the lowest
//     row-major index;
//   * all-background ground truth: S_m = 1 - mean(pred), E_m = fraction of
//     pixels binarised to background, F^w = 1 if mean(pred) < 0.01 else 0.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hintseg/core_types.hpp"
#include "hintseg/distance_transform.hpp"

namespace hintseg {

struct MetricReport {
  double mae = 0.0;
  double s_measure = 0.0;
  double e_measure = 0.0;
  double f_w_beta = 0.0;
};

inline constexpr const char* kEMeasureVariant = "adaptive";

namespace metrics_detail {

inline void check_shapes(const PredictionMap& pred, const BinaryMask& gt) {
  if (pred.height() != gt.height || pred.width() != gt.width) throw shape_error("metric: prediction and ground truth shapes differ");
  if (gt.size() == 0) throw shape_error("metric: empty map");
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v, double m) {
  if (v.size() < 2) return 0.0;
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double object_similarity(const std::vector<double>& v) {
  const double x = mean(v);
  return 2.0 * x / (x * x + 1.0 + sample_std(v, x));
}

/// Structural similarity of one quadrant.
inline double quadrant_ssim(const PredictionMap& pred, const BinaryMask& gt, int y0, int y1, int x0, int x1) {
  const int n = (y1 - y0) * (x1 - x0);
  if (n <= 0) return 0.0;
  double mx = 0, my = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      mx += pred(y, x);
      my += gt(y, x);
    }
  mx /= n;
  my /= n;
  double sx = 0, sy = 0, sxy = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double a = pred(y, x) - mx, b = gt(y, x) - my;
      sx += a * a;
      sy += b * b;
      sxy += a * b;
    }
  if (n > 1) {
    sx /= n - 1;
    sy /= n - 1;
    sxy /= n - 1;
  } else {
    sx = sy = sxy = 0;
  }
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sx + sy);
  if (alpha != 0.0) return alpha / beta;
  return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace metrics_detail

inline double mae(const PredictionMap& pred, const BinaryMask& gt) {
  metrics_detail::check_shapes(pred, gt);
  double s = 0;
  for (std::size_t k = 0; k < gt.size(); ++k) s += std::abs(pred.values()[k] - (gt.data[k] ? 1.0 : 0.0));
  return s / static_cast<double>(gt.size());
}

inline double s_measure(const PredictionMap& pred, const BinaryMask& gt) {
  using namespace metrics_detail;
  check_shapes(pred, gt);
  const int h = gt.height, w = gt.width;
  const double n = static_cast<double>(gt.size());
  std::size_t fg_count = 0;
  for (auto v : gt.data) fg_count += v ? 1 : 0;
  if (fg_count == 0) return 1.0 - pred.mean();
  if (fg_count == gt.size()) return pred.mean();

  std::vector<double> fg, bg;
  double row_sum = 0, col_sum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (gt(y, x)) {
        fg.push_back(pred(y, x));
        row_sum += y;
        col_sum += x;
      } else {
        bg.push_back(1.0 - pred(y, x));
      }
    }
  const double u = static_cast<double>(fg_count) / n;
  const double object = u * object_similarity(fg) + (1.0 - u) * object_similarity(bg);

  // Quadrant split at the (half-to-even rounded) centroid, exclusive end +1.
  const int cx = static_cast<int>(std::nearbyint(col_sum / static_cast<double>(fg_count))) + 1;
  const int cy = static_cast<int>(std::nearbyint(row_sum / static_cast<double>(fg_count))) + 1;
  const double w1 = static_cast<double>(cx) * cy / n;
  const double w2 = static_cast<double>(w - cx) * cy / n;
  const double w3 = static_cast<double>(h - cy) * cx / n;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double region = w1 * quadrant_ssim(pred, gt, 0, cy, 0, cx) + w2 * quadrant_ssim(pred, gt, 0, cy, cx, w) +
                        w3 * quadrant_ssim(pred, gt, cy, h, 0, cx) + w4 * quadrant_ssim(pred, gt, cy, h, cx, w);
  return std::max(0.0, 0.5 * object + 0.5 * region);
}

inline double e_measure(const PredictionMap& pred, const BinaryMask& gt) {
  metrics_detail::check_shapes(pred, gt);
  const std::size_t n = gt.size();
  const double threshold = std::min(2.0 * pred.mean(), 1.0);
  std::size_t fg_fg = 0, fg_bg = 0, gt_fg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const bool p = threshold > 0.0 && pred.values()[k] >= threshold;
    const bool g = gt.data[k] != 0;
    gt_fg += g;
    if (p && g) ++fg_fg;
    if (p && !g) ++fg_bg;
  }
  const std::size_t pred_fg = fg_fg + fg_bg;
  const std::size_t pred_bg = n - pred_fg;
  double enhanced_sum;
  if (gt_fg == 0) {
    enhanced_sum = static_cast<double>(pred_bg);
  } else if (gt_fg == n) {
    enhanced_sum = static_cast<double>(pred_fg);
  } else {
    const std::size_t bg_fg = gt_fg - fg_fg;
    const std::size_t bg_bg = pred_bg - bg_fg;
    const double mp = static_cast<double>(pred_fg) / n, mg = static_cast<double>(gt_fg) / n;
    const double parts[4] = {double(fg_fg), double(fg_bg), double(bg_fg), double(bg_bg)};
    const double pv[4] = {1 - mp, 1 - mp, -mp, -mp};
    const double gv[4] = {1 - mg, -mg, 1 - mg, -mg};
    enhanced_sum = 0;
    for (int i = 0; i < 4; ++i) {
      if (parts[i] == 0) continue;
      const double align = 2.0 * pv[i] * gv[i] / (pv[i] * pv[i] + gv[i] * gv[i]);
      enhanced_sum += (align + 1.0) * (align + 1.0) / 4.0 * parts[i];
    }
  }
  return enhanced_sum / static_cast<double>(n);
}

inline double weighted_f_beta(const PredictionMap& pred, const BinaryMask& gt) {
  metrics_detail::check_shapes(pred, gt);
  const int h = gt.height, w = gt.width;
  std::size_t fg_count = 0;
  for (auto v : gt.data) fg_count += v ? 1 : 0;
  if (fg_count == 0) return pred.mean() < 0.01 ? 1.0 : 0.0;

  Grid<double> err(h, w);
  for (std::size_t k = 0; k < gt.size(); ++k) err.data[k] = std::abs(pred.values()[k] - (gt.data[k] ? 1.0 : 0.0));

  // Background pixels inherit the error of their nearest foreground pixel.
  const Grid<double> d2 = squared_distance_to_foreground(gt);
  Grid<double> err_t = err;
  Grid<double> dist(h, w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (gt(y, x)) continue;
      const long long r2 = std::llround(d2(y, x));
      dist(y, x) = std::sqrt(static_cast<double>(r2));
      const int reach = static_cast<int>(std::sqrt(static_cast<double>(r2)));
      bool found = false;
      for (int dy = -reach; dy <= reach && !found; ++dy) {
        const long long rem = r2 - static_cast<long long>(dy) * dy;
        if (rem < 0) continue;
        long long dx = static_cast<long long>(std::sqrt(static_cast<double>(rem)));
        while (dx * dx > rem) --dx;
        while ((dx + 1) * (dx + 1) <= rem) ++dx;
        if (dx * dx != rem) continue;
        const int yy = y + dy;
        for (int sgn : {-1, 1}) {
          const int xx = x + sgn * static_cast<int>(dx);
          if (gt.contains(yy, xx) && gt(yy, xx)) {
            err_t(y, x) = err(yy, xx);
            found = true;
            break;
          }
        }
      }
    }

  // 7x7 Gaussian (sigma 5), zero padding.
  constexpr int kR = 3;
  constexpr double kSigma = 5.0;
  double kernel[2 * kR + 1][2 * kR + 1];
  double ksum = 0;
  for (int i = -kR; i <= kR; ++i)
    for (int j = -kR; j <= kR; ++j) ksum += kernel[i + kR][j + kR] = std::exp(-(i * i + j * j) / (2 * kSigma * kSigma));
  for (auto& r : kernel)
    for (auto& v : r) v /= ksum;

  const double theta = std::log(0.5) / 5.0;
  double tp_w = 0, fp_w = 0, ew_fg_sum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double ew = err(y, x);
      if (gt(y, x)) {
        double ea = 0;
        for (int i = -kR; i <= kR; ++i)
          for (int j = -kR; j <= kR; ++j)
            if (gt.contains(y + i, x + j)) ea += kernel[i + kR][j + kR] * err_t(y + i, x + j);
        if (ea < ew) ew = ea;
        ew_fg_sum += ew;
      } else {
        ew *= 2.0 - std::exp(theta * dist(y, x));
        fp_w += ew;
      }
    }
  tp_w = static_cast<double>(fg_count) - ew_fg_sum;
  const double recall = 1.0 - ew_fg_sum / static_cast<double>(fg_count);
  const double precision = (tp_w + fp_w) > 0 ? tp_w / (tp_w + fp_w) : 0.0;
  return (recall + precision) > 0 ? 2.0 * recall * precision / (recall + precision) : 0.0;
}

inline MetricReport evaluate_metrics(const PredictionMap& pred, const BinaryMask& gt) {
  return {mae(pred, gt), s_measure(pred, gt), e_measure(pred, gt), weighted_f_beta(pred, gt)};
}

inline MetricReport corpus_mean(const std::vector<MetricReport>& per_image) {
  MetricReport m;
  if (per_image.empty()) return m;
  for (const auto& r : per_image) {
    m.mae += r.mae;
    m.s_measure += r.s_measure;
    m.e_measure += r.e_measure;
    m.f_w_beta += r.f_w_beta;
  }
  const double n = static_cast<double>(per_image.size());
  m.mae /= n;
  m.s_measure /= n;
  m.e_measure /= n;
  m.f_w_beta /= n;
  return m;
}

}  // namespace hintseg
