#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hintseg/core_types.hpp"

namespace hintseg {

inline constexpr double kProbEpsilon = 1e-7;

enum class Reduction { Mean, Sum };

class loss_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossReport {
  double l_pce = 0.0;
  double l_c = 0.0;
  double total = 0.0;
  std::size_t labeled_count = 0;
};

/// Binary cross-entropy restricted to labelled pixels. When `grad` is given it
/// receives dL/dprob (zero on unlabelled pixels); the clamp is treated as the
/// identity for differentiation.
template <typename T>
double partial_ce(const Grid<T>& probs, const SupervisionMask& sup, Grid<T>* grad = nullptr,
                  Reduction reduction = Reduction::Mean) {
  if (!probs.same_shape(sup.labels)) throw shape_error("partial_ce: prediction and supervision shapes differ");
  const std::size_t n = sup.labeled_count();
  if (n == 0) throw loss_error("empty supervision");
  const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
  if (grad) *grad = Grid<T>(probs.height, probs.width, T(0));
  double sum = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const Label l = sup.labels.data[k];
    if (l == Label::Unlabeled) continue;
    const double p = std::clamp(static_cast<double>(probs.data[k]), kProbEpsilon, 1.0 - kProbEpsilon);
    const double s = l == Label::Foreground ? 1.0 : 0.0;
    sum -= s * std::log(p) + (1.0 - s) * std::log(1.0 - p);
    if (grad) grad->data[k] = static_cast<T>(scale * (p - s) / (p * (1.0 - p)));
  }
  return sum * scale;
}

inline double partial_ce(const PredictionMap& pred, const SupervisionMask& sup, Reduction reduction = Reduction::Mean) {
  return partial_ce<double>(pred.grid(), sup, nullptr, reduction);
}

/// Unit-weighted objective L = L_c + L_pce.
inline double total_loss(double l_c, double l_pce) {
  if (!std::isfinite(l_c) || !std::isfinite(l_pce)) throw loss_error("non-finite loss component");
  return l_c + l_pce;
}

inline LossReport make_loss_report(double l_c, double l_pce, std::size_t labeled) {
  return {l_pce, l_c, total_loss(l_c, l_pce), labeled};
}

}  // namespace hintseg
