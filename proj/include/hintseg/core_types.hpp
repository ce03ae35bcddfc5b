#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hintseg/tensor.hpp"

namespace hintseg {

/// Pixel coordinate. x is the column, y is the row, origin top-left.
struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Image = Tensor<float>;             // 3 x H x W, values in [0,1]
using BinaryMask = Grid<std::uint8_t>;   // 0 / 1

/// Smallest radius a hint circle may have. A radius-1 disc still covers the
/// annotated pixel and its 4-neighbourhood.
inline constexpr double kMinRadius = 1.0;

struct Scene {
  Image image;
  std::optional<BinaryMask> mask;
  std::string id;

  int height() const { return image.height; }
  int width() const { return image.width; }

  /// Throws shape_error / std::invalid_argument when an invariant is broken.
  void validate() const {
    if (image.channels != 3) throw shape_error("scene image must have 3 channels, got " + image.shape_string());
    if (image.height < 16 || image.width < 16)
      throw shape_error("scene " + id + " is smaller than 16x16: " + image.shape_string());
    if (mask && (mask->height != image.height || mask->width != image.width))
      throw shape_error("scene " + id + " mask does not match image size");
    for (float v : image.data)
      if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("scene " + id + " has image values outside [0,1]");
  }
};

inline Scene make_scene(Image image, std::optional<BinaryMask> mask, std::string id) {
  Scene s{std::move(image), std::move(mask), std::move(id)};
  s.validate();
  return s;
}

struct PointAnnotation {
  std::vector<Point> foreground_points;
  Point background_point;
  int n_objects = 0;

  void validate(int height, int width) const {
    if (n_objects < 1 || static_cast<std::size_t>(n_objects) != foreground_points.size())
      throw std::invalid_argument("annotation object count " + std::to_string(n_objects) +
                                  " does not match " + std::to_string(foreground_points.size()) +
                                  " foreground points");
    auto in = [&](Point p) { return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height; };
    for (const auto& p : foreground_points)
      if (!in(p)) throw bounds_error("foreground point out of bounds");
    if (!in(background_point)) throw bounds_error("background point out of bounds");
    for (const auto& p : foreground_points)
      if (p == background_point) throw std::invalid_argument("background point coincides with a foreground point");
  }
};

/// Soft checks that do not invalidate an annotation. The background click is
/// expected to sit clear of the foreground squares.
inline std::vector<std::string> annotation_warnings(const PointAnnotation& ann, int d) {
  std::vector<std::string> out;
  for (const auto& p : ann.foreground_points) {
    const double dist = std::hypot(p.x - ann.background_point.x, p.y - ann.background_point.y);
    if (dist <= d) {
      out.push_back("background point (" + std::to_string(ann.background_point.x) + "," +
                    std::to_string(ann.background_point.y) + ") lies within " + std::to_string(d) +
                    " px of foreground point (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")");
    }
  }
  return out;
}

enum class Label : std::uint8_t { Unlabeled = 0, Background = 1, Foreground = 2 };

struct SupervisionMask {
  Grid<Label> labels;

  SupervisionMask() = default;
  SupervisionMask(int h, int w) : labels(h, w, Label::Unlabeled) {}

  int height() const { return labels.height; }
  int width() const { return labels.width; }

  std::size_t count(Label l) const {
    return static_cast<std::size_t>(std::count(labels.data.begin(), labels.data.end(), l));
  }
  std::size_t labeled_count() const { return labels.size() - count(Label::Unlabeled); }
};

/// Per-pixel foreground probability.
class PredictionMap {
 public:
  PredictionMap() = default;
  explicit PredictionMap(Grid<double> probs) : probs_(std::move(probs)) {
    for (double v : probs_.data)
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("prediction value outside [0,1]");
  }
  PredictionMap(int h, int w, double fill) : PredictionMap(Grid<double>(h, w, fill)) {}

  int height() const { return probs_.height; }
  int width() const { return probs_.width; }
  double operator()(int y, int x) const { return probs_(y, x); }
  const Grid<double>& grid() const { return probs_; }
  const std::vector<double>& values() const { return probs_.data; }

  double mean() const {
    if (probs_.size() == 0) return 0.0;
    double s = 0.0;
    for (double v : probs_.data) s += v;
    return s / static_cast<double>(probs_.size());
  }

 private:
  Grid<double> probs_;
};

struct CircleRegion {
  Point center;
  double radius = kMinRadius;
};

/// All pixels whose centre lies within `radius` of `center`, clipped to the
/// image. Row-major order.
inline std::vector<Point> rasterize_circle(Point center, double radius, int height, int width) {
  if (center.x < 0 || center.x >= width || center.y < 0 || center.y >= height)
    throw bounds_error("circle centre (" + std::to_string(center.x) + "," + std::to_string(center.y) +
                       ") outside " + std::to_string(height) + "x" + std::to_string(width));
  if (!(radius >= 0.0)) throw std::invalid_argument("negative circle radius");
  const double r2 = radius * radius + 1e-9;
  const int reach = static_cast<int>(std::floor(radius));
  std::vector<Point> out;
  for (int y = std::max(0, center.y - reach); y <= std::min(height - 1, center.y + reach); ++y) {
    const double dy = y - center.y;
    for (int x = std::max(0, center.x - reach); x <= std::min(width - 1, center.x + reach); ++x) {
      const double dx = x - center.x;
      if (dx * dx + dy * dy <= r2) out.push_back({x, y});
    }
  }
  return out;
}

inline std::vector<Point> rasterize_circle(const CircleRegion& c, int height, int width) {
  return rasterize_circle(c.center, c.radius, height, width);
}

struct ValidationReport {
  bool ok = true;
  std::string violation;
  explicit operator bool() const { return ok; }
};

inline ValidationReport validate_supervision(const SupervisionMask& sup) {
  if (sup.labels.size() == 0) return {false, "empty shape"};
  if (sup.labels.size() != static_cast<std::size_t>(sup.height()) * sup.width()) return {false, "label grid out of bounds"};
  if (sup.count(Label::Foreground) == 0) return {false, "no FG"};
  if (sup.count(Label::Background) == 0) return {false, "no BG"};
  return {};
}

inline ValidationReport validate_supervision(const SupervisionMask& sup, int height, int width) {
  if (sup.height() != height || sup.width() != width) return {false, "shape mismatch"};
  return validate_supervision(sup);
}

}  // namespace hintseg
