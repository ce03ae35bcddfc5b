#pragma once

#include <vector>

#include "hintseg/core_types.hpp"

namespace hintseg {

/// Exact squared Euclidean distance to the nearest non-zero pixel
/// (Felzenszwalb-Huttenlocher lower envelope, separable).
inline Grid<double> squared_distance_to_foreground(const BinaryMask& fg) {
  const int h = fg.height, w = fg.width;
  constexpr double kInf = 1e20;
  Grid<double> d(h, w);
  for (std::size_t k = 0; k < fg.size(); ++k) d.data[k] = fg.data[k] ? 0.0 : kInf;
  auto pass = [](std::vector<double>& f) {
    const int n = static_cast<int>(f.size());
    std::vector<double> out(n), z(n + 1);
    std::vector<int> v(n);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
      auto cut = [&](int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p); };
      double s = cut(v[k]);
      while (s <= z[k]) {
        --k;
        s = cut(v[k]);
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      out[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
    }
    f = out;
  };
  std::vector<double> col(h), row(w);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = d(y, x);
    pass(col);
    for (int y = 0; y < h; ++y) d(y, x) = col[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = d(y, x);
    pass(row);
    for (int x = 0; x < w; ++x) d(y, x) = row[x];
  }
  return d;
}

}  // namespace hintseg
