#pragma once

// Forward/backward kernels for the handful of layer types the encoder needs:
// 3x3 convolution (padding 1, stride 1 or 2), ReLU, bilinear resize and the
// logistic squash. Weights are laid out [out][in][3][3].

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hintseg/tensor.hpp"

namespace hintseg::nn {

inline int conv_out_extent(int in, int stride) { return (in - 1) / stride + 1; }

template <typename T>
void conv3x3_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels,
                     int stride, Tensor<T>& out) {
  const int C = in.channels, H = in.height, W = in.width;
  if (weight.size() != static_cast<std::size_t>(out_channels) * C * 9 || bias.size() != static_cast<std::size_t>(out_channels))
    throw shape_error("conv3x3: weight size does not match " + in.shape_string() + " -> " + std::to_string(out_channels));
  const int Ho = conv_out_extent(H, stride), Wo = conv_out_extent(W, stride);
  out = Tensor<T>(out_channels, Ho, Wo);
  for (int o = 0; o < out_channels; ++o) {
    T* op = out.plane(o);
    std::fill(op, op + out.plane_size(), bias[o]);
    for (int i = 0; i < C; ++i) {
      const T* ip = in.plane(i);
      const T* wk = weight.data() + (static_cast<std::size_t>(o) * C + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int y_lo = ky == 0 ? 1 : 0;
        const int y_hi = std::min(Ho, (H - ky) / stride + 1);
        for (int kx = 0; kx < 3; ++kx) {
          const T wv = wk[ky * 3 + kx];
          const int x_lo = kx == 0 ? 1 : 0;
          const int x_hi = std::min(Wo, (W - kx) / stride + 1);
          for (int y = y_lo; y < y_hi; ++y) {
            const T* irow = ip + static_cast<std::size_t>(y * stride + ky - 1) * W + (kx - 1);
            T* orow = op + static_cast<std::size_t>(y) * Wo;
            if (stride == 1) {
              for (int x = x_lo; x < x_hi; ++x) orow[x] += wv * irow[x];
            } else {
              for (int x = x_lo; x < x_hi; ++x) orow[x] += wv * irow[x * stride];
            }
          }
        }
      }
    }
  }
}

/// Accumulates into grad_weight / grad_bias; overwrites *grad_in when given.
template <typename T>
void conv3x3_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& grad_out, int stride,
                      Tensor<T>* grad_in, std::span<T> grad_weight, std::span<T> grad_bias) {
  const int C = in.channels, H = in.height, W = in.width;
  const int O = grad_out.channels, Ho = grad_out.height, Wo = grad_out.width;
  if (Ho != conv_out_extent(H, stride) || Wo != conv_out_extent(W, stride))
    throw shape_error("conv3x3 backward: gradient shape " + grad_out.shape_string() + " does not match input " +
                      in.shape_string());
  if (grad_in) *grad_in = Tensor<T>(C, H, W);
  for (int o = 0; o < O; ++o) {
    const T* gp = grad_out.plane(o);
    T gb = 0;
    for (std::size_t k = 0; k < grad_out.plane_size(); ++k) gb += gp[k];
    grad_bias[o] += gb;
    for (int i = 0; i < C; ++i) {
      const T* ip = in.plane(i);
      T* gip = grad_in ? grad_in->plane(i) : nullptr;
      const std::size_t widx = (static_cast<std::size_t>(o) * C + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int y_lo = ky == 0 ? 1 : 0;
        const int y_hi = std::min(Ho, (H - ky) / stride + 1);
        for (int kx = 0; kx < 3; ++kx) {
          const T wv = weight[widx + ky * 3 + kx];
          const int x_lo = kx == 0 ? 1 : 0;
          const int x_hi = std::min(Wo, (W - kx) / stride + 1);
          T gw = 0;
          for (int y = y_lo; y < y_hi; ++y) {
            const std::size_t in_off = static_cast<std::size_t>(y * stride + ky - 1) * W + (kx - 1);
            const T* irow = ip + in_off;
            const T* grow = gp + static_cast<std::size_t>(y) * Wo;
            if (stride == 1) {
              for (int x = x_lo; x < x_hi; ++x) gw += grow[x] * irow[x];
              if (gip) {
                T* girow = gip + in_off;
                for (int x = x_lo; x < x_hi; ++x) girow[x] += wv * grow[x];
              }
            } else {
              for (int x = x_lo; x < x_hi; ++x) gw += grow[x] * irow[x * stride];
              if (gip) {
                T* girow = gip + in_off;
                for (int x = x_lo; x < x_hi; ++x) girow[x * stride] += wv * grow[x];
              }
            }
          }
          grad_weight[widx + ky * 3 + kx] += gw;
        }
      }
    }
  }
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.data) v = v > T(0) ? v : T(0);
}

/// grad *= (activation > 0), where activation is the post-ReLU output.
template <typename T>
void relu_backward_inplace(const Tensor<T>& activation, Tensor<T>& grad) {
  for (std::size_t k = 0; k < grad.size(); ++k)
    if (!(activation.data[k] > T(0))) grad.data[k] = T(0);
}

/// Linear interpolation table for one axis (half-pixel centres, corners not
/// aligned, negative source coordinates clamped to zero).
template <typename T>
struct AxisInterp {
  std::vector<int> lo, hi;
  std::vector<T> w_lo, w_hi;

  AxisInterp(int in, int out) : lo(out), hi(out), w_lo(out), w_hi(out) {
    const double scale = static_cast<double>(in) / out;
    for (int d = 0; d < out; ++d) {
      double src = (d + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      int i0 = static_cast<int>(std::floor(src));
      if (i0 > in - 1) i0 = in - 1;
      const int i1 = std::min(i0 + 1, in - 1);
      const double l1 = src - i0;
      lo[d] = i0;
      hi[d] = i1;
      w_lo[d] = static_cast<T>(1.0 - l1);
      w_hi[d] = static_cast<T>(l1);
    }
  }
};

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& in, int out_h, int out_w) {
  if (in.height == out_h && in.width == out_w) return in;
  const AxisInterp<T> ay(in.height, out_h), ax(in.width, out_w);
  Tensor<T> out(in.channels, out_h, out_w);
  for (int c = 0; c < in.channels; ++c) {
    const T* ip = in.plane(c);
    T* op = out.plane(c);
    for (int y = 0; y < out_h; ++y) {
      const T* r0 = ip + static_cast<std::size_t>(ay.lo[y]) * in.width;
      const T* r1 = ip + static_cast<std::size_t>(ay.hi[y]) * in.width;
      const T wy0 = ay.w_lo[y], wy1 = ay.w_hi[y];
      T* orow = op + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        const int x0 = ax.lo[x], x1 = ax.hi[x];
        orow[x] = wy0 * (ax.w_lo[x] * r0[x0] + ax.w_hi[x] * r0[x1]) + wy1 * (ax.w_lo[x] * r1[x0] + ax.w_hi[x] * r1[x1]);
      }
    }
  }
  return out;
}

/// Adjoint of resize_bilinear: maps a gradient on the resized tensor back to
/// the source resolution.
template <typename T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& grad_out, int in_h, int in_w) {
  if (grad_out.height == in_h && grad_out.width == in_w) return grad_out;
  const int out_h = grad_out.height, out_w = grad_out.width;
  const AxisInterp<T> ay(in_h, out_h), ax(in_w, out_w);
  Tensor<T> g(grad_out.channels, in_h, in_w);
  for (int c = 0; c < grad_out.channels; ++c) {
    const T* gp = grad_out.plane(c);
    T* ip = g.plane(c);
    for (int y = 0; y < out_h; ++y) {
      T* r0 = ip + static_cast<std::size_t>(ay.lo[y]) * in_w;
      T* r1 = ip + static_cast<std::size_t>(ay.hi[y]) * in_w;
      const T wy0 = ay.w_lo[y], wy1 = ay.w_hi[y];
      const T* grow = gp + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        const T v = grow[x];
        const int x0 = ax.lo[x], x1 = ax.hi[x];
        r0[x0] += wy0 * ax.w_lo[x] * v;
        r0[x1] += wy0 * ax.w_hi[x] * v;
        r1[x0] += wy1 * ax.w_lo[x] * v;
        r1[x1] += wy1 * ax.w_hi[x] * v;
      }
    }
  }
  return g;
}

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) {
    const T e = std::exp(-z);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(z);
  return e / (T(1) + e);
}

}  // namespace hintseg::nn
