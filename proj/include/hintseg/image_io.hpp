#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hintseg/core_types.hpp"

namespace hintseg {

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io_detail {

inline std::vector<std::uint8_t> read_png(const std::string& path, std::uint32_t format, int& height, int& width) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) throw io_error("cannot read png " + path + ": " + img.message);
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw io_error("cannot decode png " + path + ": " + img.message);
  }
  height = static_cast<int>(img.height);
  width = static_cast<int>(img.width);
  return buf;
}

inline void write_png(const std::string& path, std::uint32_t format, int height, int width,
                      const std::vector<std::uint8_t>& buf) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw io_error("cannot write png " + path + ": " + img.message);
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace io_detail

inline Image read_rgb_png(const std::string& path) {
  int h = 0, w = 0;
  const auto buf = io_detail::read_png(path, PNG_FORMAT_RGB, h, w);
  Image im(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) im(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
  return im;
}

inline void write_rgb_png(const std::string& path, const Image& im) {
  if (im.channels != 3) throw shape_error("write_rgb_png expects 3 channels, got " + im.shape_string());
  std::vector<std::uint8_t> buf(im.plane_size() * 3);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c) buf[(static_cast<std::size_t>(y) * im.width + x) * 3 + c] = io_detail::to_byte(im(c, y, x));
  io_detail::write_png(path, PNG_FORMAT_RGB, im.height, im.width, buf);
}

/// 8-bit grayscale as raw bytes.
inline Grid<std::uint8_t> read_gray_png(const std::string& path) {
  int h = 0, w = 0;
  auto buf = io_detail::read_png(path, PNG_FORMAT_GRAY, h, w);
  Grid<std::uint8_t> g(h, w);
  g.data = std::move(buf);
  return g;
}

inline void write_gray_png(const std::string& path, const Grid<std::uint8_t>& g) {
  io_detail::write_png(path, PNG_FORMAT_GRAY, g.height, g.width, g.data);
}

/// Binary masks: any value >= 128 is foreground.
inline BinaryMask read_mask_png(const std::string& path) {
  auto g = read_gray_png(path);
  for (auto& v : g.data) v = v >= 128 ? 1 : 0;
  return g;
}

inline void write_mask_png(const std::string& path, const BinaryMask& m) {
  Grid<std::uint8_t> g(m.height, m.width);
  for (std::size_t k = 0; k < m.size(); ++k) g.data[k] = m.data[k] ? 255 : 0;
  write_gray_png(path, g);
}

/// Prediction maps are stored as 8-bit grayscale and read back as byte / 255.
inline PredictionMap read_prediction_png(const std::string& path) {
  const auto g = read_gray_png(path);
  Grid<double> p(g.height, g.width);
  for (std::size_t k = 0; k < g.size(); ++k) p.data[k] = g.data[k] / 255.0;
  return PredictionMap(std::move(p));
}

inline void write_prediction_png(const std::string& path, const PredictionMap& pred) {
  Grid<std::uint8_t> g(pred.height(), pred.width());
  for (std::size_t k = 0; k < g.size(); ++k) g.data[k] = io_detail::to_byte(pred.values()[k]);
  write_gray_png(path, g);
}

/// Scribble / hint files: 255 = FG, 0 = BG, 128 = unlabelled.
inline SupervisionMask read_supervision_png(const std::string& path) {
  const auto g = read_gray_png(path);
  SupervisionMask s(g.height, g.width);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int v = g.data[k];
    if (v >= 192) s.labels.data[k] = Label::Foreground;
    else if (v < 64) s.labels.data[k] = Label::Background;
  }
  return s;
}

inline void write_supervision_png(const std::string& path, const SupervisionMask& s) {
  Grid<std::uint8_t> g(s.height(), s.width(), 128);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (s.labels.data[k] == Label::Foreground) g.data[k] = 255;
    else if (s.labels.data[k] == Label::Background) g.data[k] = 0;
  }
  write_gray_png(path, g);
}

}  // namespace hintseg
