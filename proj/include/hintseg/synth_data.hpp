#pragma once

// Toy camouflage scenes: a band-limited noise texture, objects cut from the
// same texture with a small colour tint, and one untinted high-contrast
// checker patch per object standing in for its most discriminative part.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hintseg/core_types.hpp"
#include "hintseg/distance_transform.hpp"
#include "hintseg/rng.hpp"

namespace hintseg {

enum class ShapeFamily { Blob, Ellipse, Annulus };

inline const char* to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::Blob: return "blob";
    case ShapeFamily::Ellipse: return "ellipse";
    case ShapeFamily::Annulus: return "annulus";
  }
  return "?";
}

inline ShapeFamily parse_shape_family(const std::string& s) {
  if (s == "blob") return ShapeFamily::Blob;
  if (s == "ellipse") return ShapeFamily::Ellipse;
  if (s == "annulus") return ShapeFamily::Annulus;
  throw std::invalid_argument("unknown shape family " + s);
}

struct SceneSpec {
  int height = 64;
  int width = 64;
  int n_objects = 1;
  double contrast = 0.35;
  std::uint64_t texture_seed = 0;
  ShapeFamily shape_family = ShapeFamily::Blob;
  // Object radius range as a fraction of min(H, W), divided by sqrt(n_objects).
  double min_radius_frac = 0.16;
  double max_radius_frac = 0.28;
  double patch_amplitude = 0.3;
  int patch_size = 5;

  void validate() const {
    if (height < 16 || width < 16) throw std::invalid_argument("scene must be at least 16x16");
    if (n_objects < 1) throw std::invalid_argument("n_objects must be >= 1");
    if (!(contrast > 0.0 && contrast <= 1.0)) throw std::invalid_argument("contrast must lie in (0,1]");
    if (!(min_radius_frac > 0.0 && min_radius_frac <= max_radius_frac))
      throw std::invalid_argument("bad object radius range");
    if (patch_size < 1 || patch_size % 2 == 0) throw std::invalid_argument("patch_size must be odd and positive");
  }
};

class generation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratedScene {
  Scene scene;
  Grid<int> objects;                // 0 = background, k = object k (1-based)
  std::vector<Point> patch_centers; // one per object
};

inline constexpr int kMinObjectArea = 50;
inline constexpr int kObjectGap = 2;
inline constexpr int kPlacementRetries = 100;

namespace synth_detail {

/// Value noise with smoothstep interpolation, roughly zero-mean in [-1, 1].
inline Grid<double> value_noise(int h, int w, int cell, Rng& rng) {
  const int gh = h / cell + 2, gw = w / cell + 2;
  Grid<double> nodes(gh, gw);
  for (auto& v : nodes.data) v = rng.uniform(-1.0, 1.0);
  const double ox = rng.uniform(0.0, cell), oy = rng.uniform(0.0, cell);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  Grid<double> out(h, w);
  for (int y = 0; y < h; ++y) {
    const double fy = (y + oy) / cell;
    const int iy = static_cast<int>(fy);
    const double ty = smooth(fy - iy);
    for (int x = 0; x < w; ++x) {
      const double fx = (x + ox) / cell;
      const int ix = static_cast<int>(fx);
      const double tx = smooth(fx - ix);
      const double top = nodes(iy, ix) * (1 - tx) + nodes(iy, ix + 1) * tx;
      const double bot = nodes(iy + 1, ix) * (1 - tx) + nodes(iy + 1, ix + 1) * tx;
      out(y, x) = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

struct Shape {
  ShapeFamily family;
  double cx, cy, r0;
  double ecc = 0, rot = 0;
  double harm_amp[3]{}, harm_phase[3]{};

  double bound() const {
    switch (family) {
      case ShapeFamily::Ellipse: return r0 * (1.0 + ecc);
      case ShapeFamily::Blob: return r0 * (1.0 + std::abs(harm_amp[0]) + std::abs(harm_amp[1]) + std::abs(harm_amp[2]));
      case ShapeFamily::Annulus: return r0;
    }
    return r0;
  }

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    switch (family) {
      case ShapeFamily::Ellipse: {
        const double u = dx * std::cos(rot) + dy * std::sin(rot);
        const double v = -dx * std::sin(rot) + dy * std::cos(rot);
        const double a = r0 * (1.0 + ecc), b = r0 * (1.0 - ecc);
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
      }
      case ShapeFamily::Blob: {
        const double th = std::atan2(dy, dx);
        double rad = r0;
        for (int k = 0; k < 3; ++k) rad += r0 * harm_amp[k] * std::cos((k + 2) * th + harm_phase[k]);
        return std::hypot(dx, dy) <= rad;
      }
      case ShapeFamily::Annulus: {
        const double rho = std::hypot(dx, dy);
        return rho <= r0 && rho >= 0.5 * r0;
      }
    }
    return false;
  }
};

inline Shape random_shape(ShapeFamily family, double r0, Rng& rng) {
  Shape s{family, 0, 0, r0};
  s.ecc = rng.uniform(0.0, 0.3);
  s.rot = rng.uniform(0.0, std::numbers::pi);
  for (int k = 0; k < 3; ++k) {
    s.harm_amp[k] = rng.uniform(-0.12, 0.12);
    s.harm_phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  return s;
}

inline double gray(const Image& im, int y, int x) { return (im(0, y, x) + im(1, y, x) + im(2, y, x)) / 3.0; }

}  // namespace synth_detail

inline GeneratedScene generate_scene(const SceneSpec& spec, const std::string& id = "scene") {
  using namespace synth_detail;
  spec.validate();
  const int H = spec.height, W = spec.width;
  Rng rng(derive_seed({spec.texture_seed, 0x5ce7eu}));

  // Background colour near (0.45, 0.45, 0.40); objects share a warm tint
  // direction with a little per-scene variation.
  double base[3] = {0.45, 0.45, 0.40}, tint[3] = {1.0, 0.5, -0.5};
  double norm = 0;
  for (int c = 0; c < 3; ++c) {
    base[c] += rng.uniform(-0.08, 0.08);
    tint[c] += 0.3 * rng.uniform(-1.0, 1.0);
    norm += tint[c] * tint[c];
  }
  for (double& t : tint) t *= 0.4 * spec.contrast / std::sqrt(norm);
  const Grid<double> coarse = value_noise(H, W, 8, rng);
  const Grid<double> fine = value_noise(H, W, 4, rng);
  Grid<double> chroma[3] = {value_noise(H, W, 8, rng), value_noise(H, W, 8, rng), value_noise(H, W, 8, rng)};

  Image image(3, H, W);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        image(c, y, x) = static_cast<float>(base[c] + 0.08 * coarse(y, x) + 0.04 * fine(y, x) + 0.03 * chroma[c](y, x));

  // Place objects.
  GeneratedScene out;
  out.objects = Grid<int>(H, W, 0);
  Grid<std::uint8_t> blocked(H, W, 0);  // existing objects dilated by the gap
  const double scale = std::min(H, W) / std::sqrt(static_cast<double>(spec.n_objects));
  for (int k = 1; k <= spec.n_objects; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      Shape s = random_shape(spec.shape_family, rng.uniform(spec.min_radius_frac, spec.max_radius_frac) * scale, rng);
      const double b = s.bound();
      if (2 * b + 3 > std::min(H, W)) continue;
      s.cx = rng.uniform(b + 1, W - 2 - b);
      s.cy = rng.uniform(b + 1, H - 2 - b);
      std::vector<std::size_t> pix;
      bool clash = false;
      for (int y = std::max(0, static_cast<int>(s.cy - b) - 1); y <= std::min(H - 1, static_cast<int>(s.cy + b) + 1) && !clash; ++y)
        for (int x = std::max(0, static_cast<int>(s.cx - b) - 1); x <= std::min(W - 1, static_cast<int>(s.cx + b) + 1); ++x) {
          if (!s.contains(x, y)) continue;
          if (blocked(y, x)) {
            clash = true;
            break;
          }
          pix.push_back(static_cast<std::size_t>(y) * W + x);
        }
      if (clash || pix.size() < static_cast<std::size_t>(kMinObjectArea)) continue;
      for (auto p : pix) out.objects.data[p] = k;
      for (auto p : pix) {
        const int py = static_cast<int>(p / W), px = static_cast<int>(p % W);
        for (int dy = -kObjectGap; dy <= kObjectGap; ++dy)
          for (int dx = -kObjectGap; dx <= kObjectGap; ++dx)
            if (blocked.contains(py + dy, px + dx)) blocked(py + dy, px + dx) = 1;
      }
      placed = true;
    }
    if (!placed) throw generation_error("could not place object " + std::to_string(k) + " after " +
                                        std::to_string(kPlacementRetries) + " attempts");
  }

  BinaryMask mask(H, W, 0);
  for (std::size_t p = 0; p < mask.size(); ++p) mask.data[p] = out.objects.data[p] > 0;

  // Discriminative patch: an untinted checkerboard centred near the thickest
  // part of the object (random among pixels at >= 3/4 of the maximum depth
  // that can hold it).
  BinaryMask in_patch(H, W, 0);
  BinaryMask background(H, W, 0);
  for (std::size_t p = 0; p < mask.size(); ++p) background.data[p] = !mask.data[p];
  const Grid<double> depth2 = squared_distance_to_foreground(background);
  const int half = spec.patch_size / 2;
  const double need = (half + 1.5) * (half + 1.5);
  for (int k = 1; k <= spec.n_objects; ++k) {
    std::size_t deepest = 0;
    double best = -1;
    for (std::size_t p = 0; p < mask.size(); ++p)
      if (out.objects.data[p] == k && depth2.data[p] > best) {
        best = depth2.data[p];
        deepest = p;
      }
    const double want = std::max(need, 0.5625 * best);
    std::vector<std::size_t> deep;
    for (std::size_t p = 0; p < mask.size(); ++p)
      if (out.objects.data[p] == k && depth2.data[p] >= want) deep.push_back(p);
    const std::size_t centre = deep.empty() ? deepest : deep[rng.below(deep.size())];
    const Point pc{static_cast<int>(centre % W), static_cast<int>(centre / W)};
    out.patch_centers.push_back(pc);
    for (int dy = -half; dy <= half; ++dy)
      for (int dx = -half; dx <= half; ++dx) {
        const int y = pc.y + dy, x = pc.x + dx;
        if (!mask.contains(y, x) || out.objects(y, x) != k) continue;
        const double sgn = ((dx + dy) & 1) ? -1.0 : 1.0;
        in_patch(y, x) = 1;
        for (int c = 0; c < 3; ++c) image(c, y, x) = static_cast<float>(image(c, y, x) + sgn * spec.patch_amplitude);
      }
  }
  for (int c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < mask.size(); ++p)
      if (mask.data[p] && !in_patch.data[p]) image.plane(c)[p] = static_cast<float>(image.plane(c)[p] + tint[c]);

  // Quantised to 8 bits so a scene survives a PNG round trip unchanged.
  for (auto& v : image.data) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  out.scene = make_scene(std::move(image), std::move(mask), id);
  return out;
}

// ---------------------------------------------------------------------------
// Annotation simulation
// ---------------------------------------------------------------------------

enum class AnnotationKind { Discriminative, Center, Random };

inline const char* to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::Discriminative: return "discriminative";
    case AnnotationKind::Center: return "center";
    case AnnotationKind::Random: return "random";
  }
  return "?";
}

inline AnnotationKind parse_annotation_kind(const std::string& s) {
  if (s == "discriminative") return AnnotationKind::Discriminative;
  if (s == "center") return AnnotationKind::Center;
  if (s == "random") return AnnotationKind::Random;
  throw std::invalid_argument("unknown annotation mode " + s);
}

struct AnnotationMode {
  AnnotationKind mode = AnnotationKind::Discriminative;
  int points_per_object = 1;

  void validate() const {
    if (points_per_object < 1 || points_per_object > 3) throw std::invalid_argument("points_per_object must be 1, 2 or 3");
  }
};

/// 8-connected components of a binary mask, labelled 1..n in row-major order
/// of their first pixel.
inline Grid<int> connected_components(const BinaryMask& m, int* count = nullptr) {
  Grid<int> lab(m.height, m.width, 0);
  int n = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (!m.data[s] || lab.data[s]) continue;
    lab.data[s] = ++n;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int y = static_cast<int>(p / m.width), x = static_cast<int>(p % m.width);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (!m.contains(yy, xx) || !m(yy, xx) || lab(yy, xx)) continue;
          lab(yy, xx) = n;
          stack.push_back(static_cast<std::size_t>(yy) * m.width + xx);
        }
    }
  }
  if (count) *count = n;
  return lab;
}

/// |4-neighbour Laplacian| of the channel-mean image, edges replicated.
inline Grid<double> laplacian_magnitude(const Image& im) {
  const int H = im.height, W = im.width;
  Grid<double> out(H, W);
  auto g = [&](int y, int x) { return synth_detail::gray(im, std::clamp(y, 0, H - 1), std::clamp(x, 0, W - 1)); };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      out(y, x) = std::abs(g(y - 1, x) + g(y + 1, x) + g(y, x - 1) + g(y, x + 1) - 4.0 * g(y, x));
  return out;
}

/// Uniform pixel at Euclidean distance > 2d from every `mask` pixel.
inline Point sample_background_point(const BinaryMask& mask, int d, Rng& rng) {
  const Grid<double> d2 = squared_distance_to_foreground(mask);
  const double lim = 4.0 * d * d;
  std::vector<std::size_t> cand;
  for (std::size_t p = 0; p < mask.size(); ++p)
    if (!mask.data[p] && d2.data[p] > lim) cand.push_back(p);
  if (cand.empty()) throw generation_error("scene too crowded: no background pixel farther than 2d from the objects");
  const std::size_t p = cand[rng.below(cand.size())];
  return {static_cast<int>(p % mask.width), static_cast<int>(p / mask.width)};
}

/// Background click for files that carry only foreground points: uniform over
/// pixels farther than 2d from every foreground point.
inline Point sample_background_point(const std::vector<Point>& fg, int height, int width, int d, Rng& rng) {
  BinaryMask m(height, width, 0);
  for (const auto& p : fg) m(p.y, p.x) = 1;
  return sample_background_point(m, d, rng);
}

/// One or more clicks per object and one background click. The annotation's
/// object count equals the number of foreground clicks.
inline PointAnnotation simulate_annotation(const Scene& scene, const AnnotationMode& mode, Rng& rng, int d = 10) {
  mode.validate();
  if (!scene.mask) throw std::invalid_argument("simulate_annotation needs a ground-truth mask");
  const BinaryMask& mask = *scene.mask;
  const int W = mask.width;
  int n = 0;
  const Grid<int> comp = connected_components(mask, &n);
  if (n == 0) throw generation_error("scene " + scene.id + " has no foreground object");
  std::vector<std::vector<std::size_t>> pixels(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < comp.size(); ++p)
    if (comp.data[p]) pixels[comp.data[p] - 1].push_back(p);

  const Grid<double> lap = mode.mode == AnnotationKind::Discriminative ? laplacian_magnitude(scene.image) : Grid<double>();
  auto to_point = [W](std::size_t p) { return Point{static_cast<int>(p % W), static_cast<int>(p / W)}; };

  PointAnnotation ann;
  for (const auto& obj : pixels) {
    std::vector<std::size_t> chosen;
    auto far_enough = [&](std::size_t p) {
      const Point a = to_point(p);
      for (auto q : chosen) {
        const Point b = to_point(q);
        if (std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) < 3) return false;
      }
      return true;
    };
    auto random_pick = [&]() {
      std::vector<std::size_t> pool;
      for (auto p : obj)
        if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) pool.push_back(p);
      if (pool.empty()) throw generation_error("object too small for the requested number of points");
      return pool[rng.below(pool.size())];
    };
    for (int i = 0; i < mode.points_per_object; ++i) {
      std::size_t pick = 0;
      switch (mode.mode) {
        case AnnotationKind::Discriminative: {
          // Strict '>' over a row-major scan: ties go to the lowest row, then column.
          double best = -1;
          bool any = false;
          for (auto p : obj)
            if (far_enough(p) && lap.data[p] > best) {
              best = lap.data[p];
              pick = p;
              any = true;
            }
          if (!any) pick = random_pick();
          break;
        }
        case AnnotationKind::Center: {
          if (i > 0) {
            pick = random_pick();
            break;
          }
          double sx = 0, sy = 0;
          for (auto p : obj) {
            sx += static_cast<double>(p % W);
            sy += static_cast<double>(p / W);
          }
          sx /= static_cast<double>(obj.size());
          sy /= static_cast<double>(obj.size());
          double best = std::numeric_limits<double>::infinity();
          for (auto p : obj) {
            const double dd = std::hypot(static_cast<double>(p % W) - sx, static_cast<double>(p / W) - sy);
            if (dd < best) {
              best = dd;
              pick = p;
            }
          }
          break;
        }
        case AnnotationKind::Random: pick = random_pick(); break;
      }
      chosen.push_back(pick);
      ann.foreground_points.push_back(to_point(pick));
    }
  }
  ann.n_objects = static_cast<int>(ann.foreground_points.size());
  ann.background_point = sample_background_point(mask, d, rng);
  ann.validate(mask.height, mask.width);
  return ann;
}

}  // namespace hintseg
