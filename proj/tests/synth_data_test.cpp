#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "hintseg/synth_data.hpp"
#include "test_support.hpp"

using namespace hintseg;

namespace {

// Asymptotic two-sample Kolmogorov-Smirnov p-value.
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  const double ne = double(a.size()) * b.size() / (a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double q = 0;
  for (int k = 1; k <= 100; ++k) q += 2 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(q, 0.0, 1.0);
}

bool near_patch(const GeneratedScene& g, int y, int x, int half) {
  for (const auto& c : g.patch_centers)
    if (std::abs(c.x - x) <= half + 1 && std::abs(c.y - y) <= half + 1) return true;
  return false;
}

SceneSpec spec_with(std::uint64_t seed, double contrast = 0.35, int n = 1, ShapeFamily f = ShapeFamily::Blob) {
  SceneSpec s;
  s.texture_seed = seed;
  s.contrast = contrast;
  s.n_objects = n;
  s.shape_family = f;
  return s;
}

double colour_difference(const GeneratedScene& g) {
  const auto& im = g.scene.image;
  const auto& m = *g.scene.mask;
  double fg[3] = {0, 0, 0}, bg[3] = {0, 0, 0};
  double nf = 0, nb = 0;
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x) {
      const bool f = m(y, x);
      for (int c = 0; c < 3; ++c) (f ? fg : bg)[c] += im(c, y, x);
      (f ? nf : nb) += 1;
    }
  double d = 0;
  for (int c = 0; c < 3; ++c) d += std::pow(fg[c] / nf - bg[c] / nb, 2);
  return std::sqrt(d);
}

}  // namespace

TEST(Synth, DeterministicPerSeed) {
  const auto a = generate_scene(spec_with(4));
  const auto b = generate_scene(spec_with(4));
  EXPECT_EQ(a.scene.image.data, b.scene.image.data);
  EXPECT_EQ(a.scene.mask->data, b.scene.mask->data);
  const auto c = generate_scene(spec_with(5));
  EXPECT_NE(a.scene.image.data, c.scene.image.data);
}

TEST(Synth, FullContrastSeparatesColours) {
  for (std::uint64_t s = 0; s < 10; ++s) EXPECT_GE(colour_difference(generate_scene(spec_with(s, 1.0))), 0.3);
}

TEST(Synth, VanishingContrastIsIndistinguishable) {
  // one object and one background pixel per scene keeps the samples independent
  std::vector<double> fg, bg;
  Rng rng(12);
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto g = generate_scene(spec_with(1000 + s, 1e-3));
    std::vector<std::size_t> f, b;
    for (int y = 0; y < g.scene.image.height; ++y)
      for (int x = 0; x < g.scene.image.width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * g.scene.image.width + x;
        if (!(*g.scene.mask)(y, x)) b.push_back(p);
        else if (!near_patch(g, y, x, 2)) f.push_back(p);
      }
    ASSERT_FALSE(f.empty());
    const auto pf = f[rng.below(f.size())], pb = b[rng.below(b.size())];
    fg.push_back(g.scene.image.data[pf]);
    bg.push_back(g.scene.image.data[pb]);
  }
  EXPECT_GT(ks_pvalue(fg, bg), 0.01);
}

TEST(Synth, RequestedObjectCount) {
  for (auto f : {ShapeFamily::Blob, ShapeFamily::Ellipse, ShapeFamily::Annulus})
    for (std::uint64_t s = 0; s < 5; ++s) {
      SceneSpec spec = spec_with(s, 0.35, 3, f);
      spec.height = spec.width = 128;
      const auto g = generate_scene(spec);
      int n = 0;
      connected_components(*g.scene.mask, &n);
      EXPECT_EQ(n, 3) << to_string(f) << " seed " << s;
      EXPECT_EQ(g.patch_centers.size(), 3u);
    }
}

TEST(Synth, ObjectsMeetMinimumArea) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = generate_scene(spec_with(s));
    EXPECT_GE(std::count(g.scene.mask->data.begin(), g.scene.mask->data.end(), 1), kMinObjectArea);
  }
}

TEST(Synth, DiscriminativeClickLandsInPatch) {
  int hits = 0, total = 0;
  for (std::uint64_t s = 0; s < 60; ++s) {
    const auto g = generate_scene(spec_with(s, 0.35, 1, static_cast<ShapeFamily>(s % 3)));
    Rng rng(s);
    const auto ann = simulate_annotation(g.scene, {AnnotationKind::Discriminative, 1}, rng);
    ++total;
    const auto p = ann.foreground_points[0];
    hits += std::abs(p.x - g.patch_centers[0].x) <= 2 && std::abs(p.y - g.patch_centers[0].y) <= 2;
  }
  EXPECT_GE(hits, 0.95 * total);
}

TEST(Synth, CenterClickNearCentroid) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = generate_scene(spec_with(s, 0.35, 1, ShapeFamily::Ellipse));
    Rng rng(s);
    const auto ann = simulate_annotation(g.scene, {AnnotationKind::Center, 1}, rng);
    double sx = 0, sy = 0, n = 0;
    const auto& m = *g.scene.mask;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m(y, x)) {
          sx += x;
          sy += y;
          ++n;
        }
    EXPECT_LE(std::abs(ann.foreground_points[0].x - sx / n), 1.0);
    EXPECT_LE(std::abs(ann.foreground_points[0].y - sy / n), 1.0);
  }
}

TEST(Synth, RandomClicksAreUniformOverObject) {
  SceneSpec spec = spec_with(77, 0.35, 1, ShapeFamily::Ellipse);
  const auto g = generate_scene(spec);
  const auto& m = *g.scene.mask;
  std::vector<std::size_t> obj;
  for (std::size_t p = 0; p < m.size(); ++p)
    if (m.data[p]) obj.push_back(p);
  // four bins by pixel index within the object
  std::vector<double> bins(4, 0);
  const int draws = 2000;
  Rng rng(1);
  for (int i = 0; i < draws; ++i) {
    const auto ann = simulate_annotation(g.scene, {AnnotationKind::Random, 1}, rng);
    const auto p = static_cast<std::size_t>(ann.foreground_points[0].y) * m.width + ann.foreground_points[0].x;
    const auto pos = std::lower_bound(obj.begin(), obj.end(), p) - obj.begin();
    bins[std::min<std::size_t>(3, pos * 4 / obj.size())] += 1;
  }
  double chi2 = 0;
  for (int b = 0; b < 4; ++b) {
    const double lo = std::ceil(b * obj.size() / 4.0), hi = std::ceil((b + 1) * obj.size() / 4.0);
    const double e = draws * (hi - lo) / obj.size();
    chi2 += (bins[b] - e) * (bins[b] - e) / e;
  }
  EXPECT_GT(boost::math::cdf(boost::math::complement(boost::math::chi_squared(3), chi2)), 0.01);
}

TEST(Synth, BackgroundClickKeepsDistance) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = generate_scene(spec_with(s));
    Rng rng(s);
    const auto ann = simulate_annotation(g.scene, {}, rng, 6);
    const auto& m = *g.scene.mask;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m(y, x)) { EXPECT_GT(std::hypot(x - ann.background_point.x, y - ann.background_point.y), 12.0); }
  }
}

TEST(Synth, MultiplePointsPerObject) {
  const auto g = generate_scene(spec_with(3, 0.35, 2));
  Rng rng(3);
  const auto ann = simulate_annotation(g.scene, {AnnotationKind::Discriminative, 3}, rng);
  EXPECT_EQ(ann.n_objects, 6);
  EXPECT_EQ(ann.foreground_points.size(), 6u);
  EXPECT_THROW(simulate_annotation(g.scene, {AnnotationKind::Random, 4}, rng), std::invalid_argument);
}

TEST(Synth, InvalidSpecsThrow) {
  SceneSpec s;
  s.contrast = 0.0;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
  s = SceneSpec{};
  s.height = 8;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
}
