#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hintseg/core_types.hpp"
#include "hintseg/rng.hpp"

namespace hintseg {

enum class RegulatorType { Ours, HaS, Cutout };

inline RegulatorType parse_regulator_type(const std::string& s) {
  if (s == "ours") return RegulatorType::Ours;
  if (s == "has") return RegulatorType::HaS;
  if (s == "cutout") return RegulatorType::Cutout;
  throw std::invalid_argument("unknown regulator.type " + s);
}

inline const char* to_string(RegulatorType t) {
  switch (t) {
    case RegulatorType::Ours: return "ours";
    case RegulatorType::HaS: return "has";
    case RegulatorType::Cutout: return "cutout";
  }
  return "?";
}

struct RegulatorConfig {
  double mask_ratio = 0.5;
  std::uint64_t seed = 0;
  bool enabled = true;
  RegulatorType type = RegulatorType::Ours;
  int has_grid = 4;          // HaS baseline: image split into has_grid x has_grid patches
  double cutout_frac = 0.25; // Cutout baseline: hole side as a fraction of the shorter side

  void validate() const {
    if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) throw std::invalid_argument("regulator.mask_ratio must lie in [0,1]");
    if (has_grid < 1) throw std::invalid_argument("regulator.has_grid must be >= 1");
    if (!(cutout_frac > 0.0 && cutout_frac <= 1.0)) throw std::invalid_argument("regulator.cutout_frac must lie in (0,1]");
  }
};

/// Keep-mask M (1 = keep, 0 = hide). For the default type, exactly
/// floor(mask_ratio * |FG|) foreground-labelled pixels are zeroed, chosen by
/// shuffling a fixed pool; every other pixel is 1.
inline BinaryMask build_mask(const SupervisionMask& sup, const RegulatorConfig& cfg, Rng& rng) {
  cfg.validate();
  const int h = sup.height(), w = sup.width();
  BinaryMask m(h, w, 1);
  if (!cfg.enabled) return m;
  switch (cfg.type) {
    case RegulatorType::Ours: {
      std::vector<std::size_t> fg;
      for (std::size_t k = 0; k < sup.labels.size(); ++k)
        if (sup.labels.data[k] == Label::Foreground) fg.push_back(k);
      const auto zeros = static_cast<std::size_t>(std::floor(cfg.mask_ratio * static_cast<double>(fg.size())));
      std::vector<std::uint8_t> pool(fg.size(), 1);
      std::fill(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(zeros), std::uint8_t{0});
      rng.shuffle(pool);
      for (std::size_t i = 0; i < fg.size(); ++i) m.data[fg[i]] = pool[i];
      break;
    }
    case RegulatorType::HaS: {
      const int g = cfg.has_grid;
      for (int gy = 0; gy < g; ++gy)
        for (int gx = 0; gx < g; ++gx) {
          if (!rng.bernoulli(cfg.mask_ratio)) continue;
          for (int y = gy * h / g; y < (gy + 1) * h / g; ++y)
            for (int x = gx * w / g; x < (gx + 1) * w / g; ++x) m(y, x) = 0;
        }
      break;
    }
    case RegulatorType::Cutout: {
      const int side = std::max(1, static_cast<int>(std::lround(cfg.cutout_frac * std::min(h, w))));
      const int cy = rng.uniform_int(0, h - 1), cx = rng.uniform_int(0, w - 1);
      for (int y = std::max(0, cy - side / 2); y < std::min(h, cy - side / 2 + side); ++y)
        for (int x = std::max(0, cx - side / 2); x < std::min(w, cx - side / 2 + side); ++x) m(y, x) = 0;
      break;
    }
  }
  return m;
}

/// I* = I * M, broadcast over channels.
inline Image apply_mask(const Image& image, const BinaryMask& m) {
  if (image.height != m.height || image.width != m.width)
    throw shape_error("apply_mask: mask does not match image " + image.shape_string());
  Image out = image;
  for (int c = 0; c < out.channels; ++c) {
    float* p = out.plane(c);
    for (std::size_t k = 0; k < out.plane_size(); ++k)
      if (!m.data[k]) p[k] = 0.0f;
  }
  return out;
}

}  // namespace hintseg
