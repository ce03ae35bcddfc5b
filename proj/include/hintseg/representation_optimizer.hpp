#pragma once

// Two-view augmentation, prediction alignment between views, and the
// stop-gradient contrastive objective.
//
// Geometric transforms are axis-aligned affine maps from output pixel
// coordinates to input pixel coordinates (pixel centres at integers), so any
// composition stays axis-aligned and is inverted in closed form.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hintseg/attention_regulator.hpp"
#include "hintseg/core_types.hpp"
#include "hintseg/rng.hpp"

namespace hintseg {

enum class TransformKind { RegulatorMask, ColorJitter, GaussianBlur, Scale, Crop, Flip, Translate };

inline constexpr std::array<TransformKind, 7> kAllTransformKinds{
    TransformKind::RegulatorMask, TransformKind::ColorJitter, TransformKind::GaussianBlur, TransformKind::Scale,
    TransformKind::Crop,          TransformKind::Flip,        TransformKind::Translate};

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Scale: return "scale";
    case TransformKind::Crop: return "crop";
    case TransformKind::Flip: return "flip";
    case TransformKind::Translate: return "translate";
    case TransformKind::RegulatorMask: return "regulator_mask";
    case TransformKind::GaussianBlur: return "gaussian_blur";
    case TransformKind::ColorJitter: return "color_jitter";
  }
  return "?";
}

inline TransformKind parse_transform_kind(const std::string& s) {
  for (auto k : kAllTransformKinds)
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown augmentation kind " + s);
}

inline bool is_geometric(TransformKind k) {
  return k == TransformKind::Scale || k == TransformKind::Crop || k == TransformKind::Flip || k == TransformKind::Translate;
}

/// Parameter meaning by kind:
///   scale:          [0] zoom factor about the image centre, in [0.75, 1.25]
///   crop:           [0..3] x0, y0, width, height as fractions of the image
///   flip:           horizontal mirror, no parameters
///   translate:      [0..1] shift as a fraction of width / height, |.| <= 0.1
///   gaussian_blur:  [0] sigma in pixels, in [0.1, 2.0]
///   color_jitter:   [0..2] brightness, contrast, saturation factors in [0.8, 1.2]
///   regulator_mask: no parameters; multiplies by the attention-regulator mask
struct TransformSpec {
  TransformKind kind = TransformKind::Flip;
  std::array<double, 4> params{};
  bool geometric = true;

  static TransformSpec make(TransformKind k, std::array<double, 4> p = {}) { return {k, p, is_geometric(k)}; }
  static TransformSpec scale(double s) { return make(TransformKind::Scale, {s}); }
  static TransformSpec crop(double x0, double y0, double w, double h) { return make(TransformKind::Crop, {x0, y0, w, h}); }
  static TransformSpec flip() { return make(TransformKind::Flip); }
  static TransformSpec translate(double fx, double fy) { return make(TransformKind::Translate, {fx, fy}); }
  static TransformSpec blur(double sigma) { return make(TransformKind::GaussianBlur, {sigma}); }
  static TransformSpec jitter(double b, double c, double s) { return make(TransformKind::ColorJitter, {b, c, s}); }
  static TransformSpec regulator() { return make(TransformKind::RegulatorMask); }

  std::string describe() const {
    std::ostringstream os;
    os << to_string(kind);
    switch (kind) {
      case TransformKind::Scale: os << "(" << params[0] << ")"; break;
      case TransformKind::Crop: os << "(" << params[0] << "," << params[1] << "," << params[2] << "," << params[3] << ")"; break;
      case TransformKind::Translate: os << "(" << params[0] << "," << params[1] << ")"; break;
      case TransformKind::GaussianBlur: os << "(" << params[0] << ")"; break;
      case TransformKind::ColorJitter: os << "(" << params[0] << "," << params[1] << "," << params[2] << ")"; break;
      default: break;
    }
    return os.str();
  }
};

using TransformList = std::vector<TransformSpec>;

struct AugPair {
  TransformList t1;
  TransformList t2;
  std::uint64_t seed = 0;
};

/// Set of enabled augmentation kinds.
class AugmentationSet {
 public:
  AugmentationSet() = default;
  AugmentationSet(std::initializer_list<TransformKind> kinds) {
    for (auto k : kinds) insert(k);
  }
  static AugmentationSet all() {
    AugmentationSet s;
    for (auto k : kAllTransformKinds) s.insert(k);
    return s;
  }
  /// Comma-separated kind names; "none" or "" for the empty set.
  static AugmentationSet parse(const std::string& text) {
    AugmentationSet s;
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(" \t"));
      tok.erase(tok.find_last_not_of(" \t") + 1);
      if (tok.empty() || tok == "none") continue;
      s.insert(parse_transform_kind(tok));
    }
    return s;
  }
  void insert(TransformKind k) { bits_ |= bit(k); }
  void erase(TransformKind k) { bits_ &= ~bit(k); }
  bool contains(TransformKind k) const { return (bits_ & bit(k)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::string to_string() const {
    std::string out;
    for (auto k : kAllTransformKinds)
      if (contains(k)) out += (out.empty() ? "" : ",") + std::string(hintseg::to_string(k));
    return out.empty() ? "none" : out;
  }

 private:
  static unsigned bit(TransformKind k) { return 1u << static_cast<unsigned>(k); }
  unsigned bits_ = 0;
};

inline constexpr double kAugmentProbability = 0.5;

namespace detail {

inline TransformList sample_branch(const AugmentationSet& set, bool with_regulator, Rng& rng) {
  TransformList out;
  if (with_regulator) out.push_back(TransformSpec::regulator());
  for (auto k : kAllTransformKinds) {
    if (k == TransformKind::RegulatorMask || !set.contains(k)) continue;
    if (!rng.bernoulli(kAugmentProbability)) continue;
    switch (k) {
      case TransformKind::ColorJitter:
        out.push_back(TransformSpec::jitter(rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2)));
        break;
      case TransformKind::GaussianBlur: out.push_back(TransformSpec::blur(rng.uniform(0.1, 2.0))); break;
      case TransformKind::Scale: out.push_back(TransformSpec::scale(rng.uniform(0.75, 1.25))); break;
      case TransformKind::Crop: {
        const double w = rng.uniform(std::sqrt(0.75), 1.0);
        const double h = rng.uniform(0.75 / w, 1.0);
        out.push_back(TransformSpec::crop(rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h), w, h));
        break;
      }
      case TransformKind::Flip: out.push_back(TransformSpec::flip()); break;
      case TransformKind::Translate:
        out.push_back(TransformSpec::translate(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)));
        break;
      default: break;
    }
  }
  return out;
}

}  // namespace detail

/// Independent draws per branch; each enabled kind is applied with
/// probability 0.5. The regulator mask, when enabled, goes to exactly one
/// branch chosen uniformly.
inline AugPair sample_pair(const AugmentationSet& set, Rng& rng) {
  AugPair pair;
  pair.seed = rng.next_u64();
  Rng local(pair.seed);
  int regulator_branch = -1;
  if (set.contains(TransformKind::RegulatorMask)) regulator_branch = local.bernoulli(0.5) ? 1 : 2;
  pair.t1 = detail::sample_branch(set, regulator_branch == 1, local);
  pair.t2 = detail::sample_branch(set, regulator_branch == 2, local);
  return pair;
}

inline bool has_geometric(const TransformList& specs) {
  return std::any_of(specs.begin(), specs.end(), [](const TransformSpec& s) { return s.geometric; });
}

inline bool has_kind(const TransformList& specs, TransformKind k) {
  return std::any_of(specs.begin(), specs.end(), [k](const TransformSpec& s) { return s.kind == k; });
}

/// Per-axis map src = a * dst + b.
struct AxisAffine {
  double a = 1.0, b = 0.0;
  double apply(double v) const { return a * v + b; }
  double invert(double v) const { return (v - b) / a; }
  /// (this o other)(v) = this(other(v))
  AxisAffine after(const AxisAffine& other) const { return {a * other.a, a * other.b + b}; }
  AxisAffine inverse() const { return {1.0 / a, -b / a}; }
};

struct GridAffine {
  AxisAffine x, y;
  GridAffine after(const GridAffine& o) const { return {x.after(o.x), y.after(o.y)}; }
  GridAffine inverse() const { return {x.inverse(), y.inverse()}; }
  bool is_identity() const { return x.a == 1.0 && x.b == 0.0 && y.a == 1.0 && y.b == 0.0; }
};

/// Output-to-input coordinate map of one geometric transform on an H x W grid.
inline GridAffine spec_affine(const TransformSpec& s, int height, int width) {
  GridAffine g;
  switch (s.kind) {
    case TransformKind::Flip: g.x = {-1.0, width - 1.0}; break;
    case TransformKind::Translate:
      g.x = {1.0, -std::round(s.params[0] * width)};
      g.y = {1.0, -std::round(s.params[1] * height)};
      break;
    case TransformKind::Scale: {
      const double f = s.params[0];
      const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
      g.x = {1.0 / f, cx - cx / f};
      g.y = {1.0 / f, cy - cy / f};
      break;
    }
    case TransformKind::Crop: {
      const double ax = s.params[2], ay = s.params[3];
      g.x = {ax, s.params[0] * width + 0.5 * ax - 0.5};
      g.y = {ay, s.params[1] * height + 0.5 * ay - 0.5};
      break;
    }
    default: break;
  }
  return g;
}

/// Composite output-to-canonical map of the geometric transforms in `specs`
/// (applied in list order to the image).
inline GridAffine composite_affine(const TransformList& specs, int height, int width) {
  GridAffine g;
  for (const auto& s : specs)
    if (s.geometric) g = g.after(spec_affine(s, height, width));
  return g;
}

namespace detail {

inline bool inside(double v, int n) { return v >= -0.5 && v <= n - 0.5; }

/// Bilinear sample with edge clamping; caller checks validity.
template <typename T>
T sample_bilinear(const T* plane, int height, int width, double sx, double sy) {
  sx = std::clamp(sx, 0.0, width - 1.0);
  sy = std::clamp(sy, 0.0, height - 1.0);
  const int x0 = std::min(static_cast<int>(std::floor(sx)), width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(sy)), height - 1);
  const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
  const double fx = sx - x0, fy = sy - y0;
  const double v = (1 - fy) * ((1 - fx) * plane[y0 * width + x0] + fx * plane[y0 * width + x1]) +
                   fy * ((1 - fx) * plane[y1 * width + x0] + fx * plane[y1 * width + x1]);
  return static_cast<T>(v);
}

inline Image warp_image(const Image& in, const GridAffine& g) {
  if (g.is_identity()) return in;
  Image out(in.channels, in.height, in.width, 0.0f);
  for (int y = 0; y < in.height; ++y) {
    const double sy = g.y.apply(y);
    if (!inside(sy, in.height)) continue;
    for (int x = 0; x < in.width; ++x) {
      const double sx = g.x.apply(x);
      if (!inside(sx, in.width)) continue;
      for (int c = 0; c < in.channels; ++c) out(c, y, x) = sample_bilinear(in.plane(c), in.height, in.width, sx, sy);
    }
  }
  return out;
}

template <typename V>
Grid<V> warp_nearest(const Grid<V>& in, const GridAffine& g, V fill) {
  if (g.is_identity()) return in;
  Grid<V> out(in.height, in.width, fill);
  for (int y = 0; y < in.height; ++y) {
    const double sy = g.y.apply(y);
    if (!inside(sy, in.height)) continue;
    const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, in.height - 1);
    for (int x = 0; x < in.width; ++x) {
      const double sx = g.x.apply(x);
      if (!inside(sx, in.width)) continue;
      out(y, x) = in(iy, std::clamp(static_cast<int>(std::lround(sx)), 0, in.width - 1));
    }
  }
  return out;
}

inline Image gaussian_blur(const Image& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  Image tmp(in.channels, in.height, in.width), out(in.channels, in.height, in.width);
  const int H = in.height, W = in.width;
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * in(c, y, std::clamp(x + i, 0, W - 1));
        tmp(c, y, x) = static_cast<float>(acc);
      }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(c, std::clamp(y + i, 0, H - 1), x);
        out(c, y, x) = static_cast<float>(acc);
      }
  }
  return out;
}

inline Image color_jitter(const Image& in, double brightness, double contrast, double saturation) {
  Image out = in;
  const std::size_t n = in.plane_size();
  for (auto& v : out.data) v = static_cast<float>(std::clamp(v * brightness, 0.0, 1.0));
  double mean_gray = 0;
  for (std::size_t k = 0; k < n; ++k)
    mean_gray += 0.299 * out.plane(0)[k] + 0.587 * out.plane(1)[k] + 0.114 * out.plane(2)[k];
  mean_gray /= static_cast<double>(n);
  for (auto& v : out.data) v = static_cast<float>(std::clamp((v - mean_gray) * contrast + mean_gray, 0.0, 1.0));
  for (std::size_t k = 0; k < n; ++k) {
    const double gray = 0.299 * out.plane(0)[k] + 0.587 * out.plane(1)[k] + 0.114 * out.plane(2)[k];
    for (int c = 0; c < 3; ++c) {
      float& v = out.plane(c)[k];
      v = static_cast<float>(std::clamp(gray + (v - gray) * saturation, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace detail

/// Applies `specs` in list order. A regulator_mask entry multiplies the image
/// by `regulator_mask` (given in the canonical frame, carried through the
/// geometric transforms applied so far).
inline Image apply_transform(const Image& image, const TransformList& specs, const BinaryMask* regulator_mask = nullptr) {
  Image cur = image;
  GridAffine so_far;
  for (const auto& s : specs) {
    switch (s.kind) {
      case TransformKind::RegulatorMask: {
        if (!regulator_mask) throw std::invalid_argument("apply_transform: regulator_mask requested without a mask");
        cur = apply_mask(cur, detail::warp_nearest<std::uint8_t>(*regulator_mask, so_far, 1));
        break;
      }
      case TransformKind::GaussianBlur: cur = detail::gaussian_blur(cur, s.params[0]); break;
      case TransformKind::ColorJitter: cur = detail::color_jitter(cur, s.params[0], s.params[1], s.params[2]); break;
      default: {
        const GridAffine g = spec_affine(s, cur.height, cur.width);
        cur = detail::warp_image(cur, g);
        so_far = so_far.after(g);
        break;
      }
    }
  }
  return cur;
}

/// Supervision seen by a branch: nearest-neighbour warp, unlabelled outside.
inline SupervisionMask transform_supervision(const SupervisionMask& sup, const TransformList& specs) {
  SupervisionMask out;
  out.labels = detail::warp_nearest<Label>(sup.labels, composite_affine(specs, sup.height(), sup.width()), Label::Unlabeled);
  return out;
}

/// Bilinear resampling operator between two branch frames with its adjoint.
class Alignment {
 public:
  /// Takes a map living in the frame of `from_specs` into the frame of
  /// `to_specs`: out(p) = map(A_from^-1(A_to(p))).
  Alignment(const TransformList& from_specs, const TransformList& to_specs, int height, int width)
      : height_(height), width_(width), valid_(height, width, 1) {
    const GridAffine g = composite_affine(from_specs, height, width).inverse().after(composite_affine(to_specs, height, width));
    identity_ = g.is_identity();
    if (identity_) return;
    taps_.resize(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double sx = g.x.apply(x), sy = g.y.apply(y);
        Taps& t = taps_[static_cast<std::size_t>(y) * width + x];
        if (!detail::inside(sx, width) || !detail::inside(sy, height)) {
          valid_(y, x) = 0;
          continue;
        }
        const double cx = std::clamp(sx, 0.0, width - 1.0), cy = std::clamp(sy, 0.0, height - 1.0);
        const int x0 = std::min(static_cast<int>(std::floor(cx)), width - 1);
        const int y0 = std::min(static_cast<int>(std::floor(cy)), height - 1);
        const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
        const double fx = cx - x0, fy = cy - y0;
        t.idx = {y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1};
        t.w = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
      }
  }

  bool identity() const { return identity_; }
  const BinaryMask& valid() const { return valid_; }

  template <typename T>
  Grid<T> forward(const Grid<T>& in) const {
    if (in.height != height_ || in.width != width_) throw shape_error("alignment: map shape mismatch");
    if (identity_) return in;
    Grid<T> out(height_, width_, T(0));
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (!valid_.data[k]) continue;
      const Taps& t = taps_[k];
      double v = 0;
      for (int j = 0; j < 4; ++j) v += t.w[j] * in.data[t.idx[j]];
      out.data[k] = static_cast<T>(v);
    }
    return out;
  }

  template <typename T>
  Grid<T> adjoint(const Grid<T>& grad_out) const {
    if (identity_) return grad_out;
    Grid<T> g(height_, width_, T(0));
    for (std::size_t k = 0; k < grad_out.size(); ++k) {
      if (!valid_.data[k]) continue;
      const Taps& t = taps_[k];
      for (int j = 0; j < 4; ++j) g.data[t.idx[j]] += static_cast<T>(t.w[j] * grad_out.data[k]);
    }
    return g;
  }

 private:
  struct Taps {
    std::array<int, 4> idx{};
    std::array<double, 4> w{};
  };
  int height_, width_;
  bool identity_ = false;
  BinaryMask valid_;
  std::vector<Taps> taps_;
};

struct AlignedMap {
  PredictionMap map;
  BinaryMask valid;  // 0 where the aligned pixel has no source in the other view
};

/// Brings a prediction made under `from_specs` into the frame of `to_specs`.
/// Photometric entries do not move pixels and are ignored.
inline AlignedMap align_prediction(const PredictionMap& map, const TransformList& from_specs, const TransformList& to_specs) {
  const Alignment al(from_specs, to_specs, map.height(), map.width());
  Grid<double> g = al.forward(map.grid());
  for (auto& v : g.data) v = std::clamp(v, 0.0, 1.0);
  return {PredictionMap(std::move(g)), al.valid()};
}

// ---------------------------------------------------------------------------
// Contrastive objective
// ---------------------------------------------------------------------------

enum class ContrastiveKind { L1, MSE, KL, Cos };

inline ContrastiveKind parse_contrastive_kind(const std::string& s) {
  if (s == "l1") return ContrastiveKind::L1;
  if (s == "mse") return ContrastiveKind::MSE;
  if (s == "kl") return ContrastiveKind::KL;
  if (s == "cos") return ContrastiveKind::Cos;
  throw std::invalid_argument("unknown contrastive.loss " + s);
}

inline const char* to_string(ContrastiveKind k) {
  switch (k) {
    case ContrastiveKind::L1: return "l1";
    case ContrastiveKind::MSE: return "mse";
    case ContrastiveKind::KL: return "kl";
    case ContrastiveKind::Cos: return "cos";
  }
  return "?";
}

struct ContrastiveOptions {
  ContrastiveKind kind = ContrastiveKind::L1;
  bool stopgrad = true;
  bool normalize_mean = true;  // false: plain pixel sum
};

template <typename T>
struct ContrastiveResult {
  double loss = 0.0;
  std::size_t pixels = 0;
  Grid<T> grad_p1;
  Grid<T> grad_p2;  // identically zero under stop-gradient
};

/// D(P1, stopgrad(P2)) over the pixels where `include` is non-zero (all
/// pixels when null). P1 is the predictor branch, P2 the target branch.
template <typename T>
ContrastiveResult<T> contrastive_loss_and_grad(const Grid<T>& p1, const Grid<T>& p2, const BinaryMask* include,
                                               const ContrastiveOptions& opt) {
  if (!p1.same_shape(p2)) throw shape_error("contrastive loss: prediction shapes differ");
  if (include && !include->same_shape(p1)) throw shape_error("contrastive loss: include mask shape differs");
  ContrastiveResult<T> r;
  r.grad_p1 = Grid<T>(p1.height, p1.width, T(0));
  r.grad_p2 = Grid<T>(p1.height, p1.width, T(0));
  auto used = [&](std::size_t k) { return !include || include->data[k]; };
  for (std::size_t k = 0; k < p1.size(); ++k)
    if (used(k)) ++r.pixels;
  if (r.pixels == 0) return r;
  const double scale = opt.normalize_mean ? 1.0 / static_cast<double>(r.pixels) : 1.0;
  const bool want_p2 = !opt.stopgrad;

  if (opt.kind == ContrastiveKind::Cos) {
    double dot = 0, n1 = 0, n2 = 0;
    for (std::size_t k = 0; k < p1.size(); ++k) {
      if (!used(k)) continue;
      dot += double(p1.data[k]) * p2.data[k];
      n1 += double(p1.data[k]) * p1.data[k];
      n2 += double(p2.data[k]) * p2.data[k];
    }
    const double a = std::sqrt(n1) + 1e-12, b = std::sqrt(n2) + 1e-12;
    const double c = dot / (a * b);
    r.loss = 1.0 - c;
    for (std::size_t k = 0; k < p1.size(); ++k) {
      if (!used(k)) continue;
      r.grad_p1.data[k] = static_cast<T>(-(p2.data[k] / (a * b) - c * p1.data[k] / (a * a)));
      if (want_p2) r.grad_p2.data[k] = static_cast<T>(-(p1.data[k] / (a * b) - c * p2.data[k] / (b * b)));
    }
    return r;
  }

  double sum = 0;
  for (std::size_t k = 0; k < p1.size(); ++k) {
    if (!used(k)) continue;
    const double a = p1.data[k], b = p2.data[k];
    double g1 = 0, g2 = 0;
    switch (opt.kind) {
      case ContrastiveKind::L1: {
        const double d = a - b;
        sum += std::abs(d);
        g1 = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        g2 = -g1;
        break;
      }
      case ContrastiveKind::MSE: {
        const double d = a - b;
        sum += d * d;
        g1 = 2 * d;
        g2 = -2 * d;
        break;
      }
      case ContrastiveKind::KL: {  // KL(Bern(P2) || Bern(P1))
        const double q = std::clamp(a, 1e-7, 1 - 1e-7), p = std::clamp(b, 1e-7, 1 - 1e-7);
        sum += p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q));
        g1 = -p / q + (1 - p) / (1 - q);
        g2 = std::log(p / q) - std::log((1 - p) / (1 - q));
        break;
      }
      default: break;
    }
    r.grad_p1.data[k] = static_cast<T>(g1 * scale);
    if (want_p2) r.grad_p2.data[k] = static_cast<T>(g2 * scale);
  }
  r.loss = sum * scale;
  return r;
}

/// Mean-normalised L1 distance between two aligned prediction maps.
inline double contrastive_loss(const PredictionMap& p1, const PredictionMap& p2) {
  return contrastive_loss_and_grad<double>(p1.grid(), p2.grid(), nullptr, {}).loss;
}

/// Pixels that enter the contrastive term: valid after alignment and, when a
/// geometric transform is active, outside a `band`-pixel border.
inline BinaryMask contrastive_include_mask(const BinaryMask& valid, bool geometric_active, int band = 4) {
  BinaryMask m = valid;
  if (!geometric_active) return m;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (y < band || x < band || y >= m.height - band || x >= m.width - band) m(y, x) = 0;
  return m;
}

}  // namespace hintseg
