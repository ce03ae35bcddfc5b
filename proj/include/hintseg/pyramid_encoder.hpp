#pragma once

// Segmentation network: a four-stage strided convolutional pyramid with
// features at strides 4/8/16/32, per-stage 3x3 channel reduction, bilinear
// upsampling to stride 4, concatenation and a 3x3 fusion conv producing a
// single logit plane. The predictor g is a two-layer 3x3 conv head applied to
// that logit plane.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "hintseg/core_types.hpp"
#include "hintseg/layers.hpp"
#include "hintseg/rng.hpp"

namespace hintseg {

inline constexpr int kPyramidLevels = 4;
inline constexpr std::array<int, kPyramidLevels> kPyramidStrides{4, 8, 16, 32};

// Fixed input normalisation applied inside the encoder: (x - mean) * scale.
inline constexpr double kInputMean = 0.5;
inline constexpr double kInputScale = 4.0;

struct EncoderConfig {
  std::array<int, kPyramidLevels> stage_channels{12, 16, 24, 32};
  int reduced_channels = 8;  // 64 at full scale
  int base_width = 8;
  std::uint64_t seed = 0;
  // Predictor head settings; written into checkpoint headers.
  std::string predictor_activation = "relu";
  std::string predictor_init = "identity_noise";  // identity | identity_noise | random
  double predictor_init_noise = 0.05;

  void validate() const {
    for (int c : stage_channels)
      if (c <= 0) throw std::invalid_argument("encoder stage channels must be positive");
    if (reduced_channels < 2) throw std::invalid_argument("encoder reduced_channels must be >= 2");
    if (base_width <= 0) throw std::invalid_argument("encoder base_width must be positive");
    if (predictor_activation != "relu") throw std::invalid_argument("unsupported predictor activation " + predictor_activation);
    if (predictor_init != "identity" && predictor_init != "identity_noise" && predictor_init != "random")
      throw std::invalid_argument("unknown predictor init " + predictor_init);
  }
};

struct ConvSlot {
  int in = 0;
  int out = 0;
  int stride = 1;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t weight_size() const { return static_cast<std::size_t>(out) * in * 9; }
};

/// Parameter layout of encoder f followed by predictor g in one flat vector.
struct NetworkLayout {
  ConvSlot stem;
  std::array<ConvSlot, kPyramidLevels> down, refine, reduce;
  ConvSlot fuse;
  ConvSlot pred_hidden, pred_out;
  std::size_t encoder_params = 0;
  std::size_t total_params = 0;

  explicit NetworkLayout(const EncoderConfig& cfg) {
    std::size_t cursor = 0;
    auto slot = [&](int in, int out, int stride) {
      ConvSlot s{in, out, stride, cursor, 0};
      cursor += s.weight_size();
      s.bias_offset = cursor;
      cursor += static_cast<std::size_t>(out);
      return s;
    };
    stem = slot(3, cfg.base_width, 2);
    int prev = cfg.base_width;
    for (int l = 0; l < kPyramidLevels; ++l) {
      down[l] = slot(prev, cfg.stage_channels[l], 2);
      refine[l] = slot(cfg.stage_channels[l], cfg.stage_channels[l], 1);
      prev = cfg.stage_channels[l];
    }
    for (int l = 0; l < kPyramidLevels; ++l) reduce[l] = slot(cfg.stage_channels[l], cfg.reduced_channels, 1);
    fuse = slot(kPyramidLevels * cfg.reduced_channels, 1, 1);
    encoder_params = cursor;
    pred_hidden = slot(1, cfg.reduced_channels, 1);
    pred_out = slot(cfg.reduced_channels, 1, 1);
    total_params = cursor;
  }
};

/// Activations kept from an encoder forward pass for the backward pass.
template <typename T>
struct EncoderTrace {
  Tensor<T> input;
  Tensor<T> stem;
  std::array<Tensor<T>, kPyramidLevels> down, features, reduced;
  Tensor<T> concat;
  Tensor<T> logits;  // 1 x H/4 x W/4
};

template <typename T>
struct PredictorTrace {
  Tensor<T> input;
  Tensor<T> hidden;
  Tensor<T> logits;
};

template <typename T>
class Network {
 public:
  explicit Network(EncoderConfig cfg)
      : config_((cfg.validate(), std::move(cfg))),
        layout_(config_),
        params_(layout_.total_params, T(0)),
        grads_(layout_.total_params, T(0)) {}

  const EncoderConfig& config() const { return config_; }
  const NetworkLayout& layout() const { return layout_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  std::vector<T>& grads() { return grads_; }
  const std::vector<T>& grads() const { return grads_; }
  std::size_t parameter_count() const { return params_.size(); }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), T(0)); }

  /// He-normal weights for ReLU layers, zero biases; predictor per config.
  void initialize() {
    Rng rng(derive_seed({config_.seed, 0x1e11u}));
    std::fill(params_.begin(), params_.end(), T(0));
    auto he = [&](const ConvSlot& s, double gain) {
      const double std = gain * std::sqrt(1.0 / (9.0 * s.in));
      for (std::size_t k = 0; k < s.weight_size(); ++k) params_[s.weight_offset + k] = static_cast<T>(std * rng.normal());
    };
    he(layout_.stem, std::sqrt(2.0));
    for (int l = 0; l < kPyramidLevels; ++l) {
      he(layout_.down[l], std::sqrt(2.0));
      he(layout_.refine[l], std::sqrt(2.0));
      he(layout_.reduce[l], std::sqrt(2.0));
    }
    he(layout_.fuse, 1.0);
    if (config_.predictor_init == "random") {
      he(layout_.pred_hidden, std::sqrt(2.0));
      he(layout_.pred_out, 1.0);
    } else {
      const double noise = config_.predictor_init == "identity_noise" ? config_.predictor_init_noise : 0.0;
      set_predictor_identity(noise, rng);
    }
  }

  /// g(z) = relu(z) - relu(-z) = z, optionally perturbed.
  void set_predictor_identity(double noise, Rng& rng) {
    const ConvSlot& h = layout_.pred_hidden;
    const ConvSlot& o = layout_.pred_out;
    for (std::size_t k = 0; k < h.weight_size(); ++k) params_[h.weight_offset + k] = static_cast<T>(noise * rng.normal());
    for (int c = 0; c < h.out; ++c) params_[h.bias_offset + c] = T(0);
    for (std::size_t k = 0; k < o.weight_size(); ++k) params_[o.weight_offset + k] = static_cast<T>(noise * rng.normal());
    params_[o.bias_offset] = T(0);
    params_[h.weight_offset + 0 * 9 + 4] += T(1);
    params_[h.weight_offset + 1 * 9 + 4] += T(-1);
    params_[o.weight_offset + 0 * 9 + 4] += T(1);
    params_[o.weight_offset + 1 * 9 + 4] += T(-1);
  }
  void set_predictor_identity() {
    Rng unused(0);
    set_predictor_identity(0.0, unused);
  }

  /// Encoder f up to the fused stride-4 logit plane.
  EncoderTrace<T> forward(const Tensor<T>& image) const {
    check_input(image);
    EncoderTrace<T> tr;
    tr.input = image;
    for (auto& v : tr.input.data) v = (v - kInputMean) * kInputScale;
    conv(layout_.stem, tr.input, tr.stem);
    nn::relu_inplace(tr.stem);
    const Tensor<T>* prev = &tr.stem;
    for (int l = 0; l < kPyramidLevels; ++l) {
      conv(layout_.down[l], *prev, tr.down[l]);
      nn::relu_inplace(tr.down[l]);
      conv(layout_.refine[l], tr.down[l], tr.features[l]);
      nn::relu_inplace(tr.features[l]);
      prev = &tr.features[l];
    }
    const int h4 = tr.features[0].height, w4 = tr.features[0].width;
    const int r = config_.reduced_channels;
    tr.concat = Tensor<T>(kPyramidLevels * r, h4, w4);
    for (int l = 0; l < kPyramidLevels; ++l) {
      conv(layout_.reduce[l], tr.features[l], tr.reduced[l]);
      nn::relu_inplace(tr.reduced[l]);
      const Tensor<T> up = nn::resize_bilinear(tr.reduced[l], h4, w4);
      std::copy(up.data.begin(), up.data.end(), tr.concat.data.begin() + static_cast<std::ptrdiff_t>(l * r * up.plane_size()));
    }
    conv(layout_.fuse, tr.concat, tr.logits);
    return tr;
  }

  /// Accumulates parameter gradients given dLoss/dlogits on the stride-4 plane.
  void backward(const EncoderTrace<T>& tr, const Tensor<T>& grad_logits) {
    if (!grad_logits.same_shape(tr.logits)) throw shape_error("encoder backward: gradient shape mismatch");
    Tensor<T> g_concat;
    conv_back(layout_.fuse, tr.concat, grad_logits, &g_concat);
    const int r = config_.reduced_channels;
    const int h4 = tr.concat.height, w4 = tr.concat.width;
    std::array<Tensor<T>, kPyramidLevels> g_feat;
    for (int l = 0; l < kPyramidLevels; ++l) {
      Tensor<T> g_up(r, h4, w4);
      std::copy(g_concat.data.begin() + static_cast<std::ptrdiff_t>(l * r * g_up.plane_size()),
                g_concat.data.begin() + static_cast<std::ptrdiff_t>((l + 1) * r * g_up.plane_size()), g_up.data.begin());
      Tensor<T> g_red = nn::resize_bilinear_backward(g_up, tr.reduced[l].height, tr.reduced[l].width);
      nn::relu_backward_inplace(tr.reduced[l], g_red);
      conv_back(layout_.reduce[l], tr.features[l], g_red, &g_feat[l]);
    }
    Tensor<T> g_next;  // gradient flowing down from level l+1 into features[l]
    for (int l = kPyramidLevels - 1; l >= 0; --l) {
      Tensor<T> g = g_feat[l];
      if (l + 1 < kPyramidLevels)
        for (std::size_t k = 0; k < g.size(); ++k) g.data[k] += g_next.data[k];
      nn::relu_backward_inplace(tr.features[l], g);
      Tensor<T> g_down;
      conv_back(layout_.refine[l], tr.down[l], g, &g_down);
      nn::relu_backward_inplace(tr.down[l], g_down);
      const Tensor<T>& below = l == 0 ? tr.stem : tr.features[l - 1];
      conv_back(layout_.down[l], below, g_down, &g_next);
    }
    nn::relu_backward_inplace(tr.stem, g_next);
    conv_back(layout_.stem, tr.input, g_next, nullptr);
  }

  PredictorTrace<T> predictor_forward(const Tensor<T>& logits) const {
    if (logits.channels != 1) throw shape_error("predictor expects a single-channel logit plane, got " + logits.shape_string());
    PredictorTrace<T> tr;
    tr.input = logits;
    conv(layout_.pred_hidden, tr.input, tr.hidden);
    nn::relu_inplace(tr.hidden);
    conv(layout_.pred_out, tr.hidden, tr.logits);
    return tr;
  }

  /// Returns dLoss/d(predictor input); accumulates predictor gradients.
  Tensor<T> predictor_backward(const PredictorTrace<T>& tr, const Tensor<T>& grad_logits) {
    if (!grad_logits.same_shape(tr.logits)) throw shape_error("predictor backward: gradient shape mismatch");
    Tensor<T> g_hidden, g_in;
    conv_back(layout_.pred_out, tr.hidden, grad_logits, &g_hidden);
    nn::relu_backward_inplace(tr.hidden, g_hidden);
    conv_back(layout_.pred_hidden, tr.input, g_hidden, &g_in);
    return g_in;
  }

  static void check_input(const Tensor<T>& image) {
    if (image.channels != 3) throw shape_error("encoder input must have 3 channels, got " + image.shape_string());
    if (image.height % 32 != 0 || image.width % 32 != 0 || image.height == 0 || image.width == 0)
      throw shape_error("encoder input " + image.shape_string() + " is not divisible by 32; pad first");
  }

 private:
  void conv(const ConvSlot& s, const Tensor<T>& in, Tensor<T>& out) const {
    nn::conv3x3_forward<T>(in, std::span<const T>(params_.data() + s.weight_offset, s.weight_size()),
                           std::span<const T>(params_.data() + s.bias_offset, static_cast<std::size_t>(s.out)), s.out,
                           s.stride, out);
  }
  void conv_back(const ConvSlot& s, const Tensor<T>& in, const Tensor<T>& g_out, Tensor<T>* g_in) {
    nn::conv3x3_backward<T>(in, std::span<const T>(params_.data() + s.weight_offset, s.weight_size()), g_out, s.stride,
                            g_in, std::span<T>(grads_.data() + s.weight_offset, s.weight_size()),
                            std::span<T>(grads_.data() + s.bias_offset, static_cast<std::size_t>(s.out)));
  }

  EncoderConfig config_;
  NetworkLayout layout_;
  std::vector<T> params_;
  std::vector<T> grads_;
};

/// Upsample a stride-4 logit plane to H x W and squash it.
template <typename T>
Grid<T> logits_to_probabilities(const Tensor<T>& logits, int height, int width) {
  const Tensor<T> up = nn::resize_bilinear(logits, height, width);
  Grid<T> p(height, width);
  for (std::size_t k = 0; k < p.size(); ++k) p.data[k] = nn::sigmoid(up.data[k]);
  return p;
}

/// Chain rule through logits_to_probabilities: dL/dP -> dL/dlogits (stride 4).
template <typename T>
Tensor<T> probabilities_backward(const Grid<T>& probs, const Grid<T>& grad_probs, int logit_h, int logit_w) {
  Tensor<T> g(1, probs.height, probs.width);
  for (std::size_t k = 0; k < probs.size(); ++k) g.data[k] = grad_probs.data[k] * probs.data[k] * (T(1) - probs.data[k]);
  return nn::resize_bilinear_backward(g, logit_h, logit_w);
}

template <typename T>
PredictionMap to_prediction_map(const Grid<T>& p) {
  Grid<double> g(p.height, p.width);
  for (std::size_t k = 0; k < p.size(); ++k) g.data[k] = std::clamp(static_cast<double>(p.data[k]), 0.0, 1.0);
  return PredictionMap(std::move(g));
}

/// f(image) as a probability map. H and W must be multiples of 32.
template <typename T>
PredictionMap encode(const Network<T>& net, const Image& image) {
  const Tensor<T> in = tensor_cast<T>(image);
  const auto tr = net.forward(in);
  return to_prediction_map(logits_to_probabilities(tr.logits, image.height, image.width));
}

/// g applied to pre-squash fused logits, returned at H x W.
template <typename T>
PredictionMap predictor_head(const Network<T>& net, const Tensor<T>& fused_logits, int height, int width) {
  if (fused_logits.channels != 1 || fused_logits.height * 4 != height || fused_logits.width * 4 != width)
    throw shape_error("predictor_head: fused logits " + fused_logits.shape_string() + " do not match " +
                      std::to_string(height) + "x" + std::to_string(width));
  const auto tr = net.predictor_forward(fused_logits);
  return to_prediction_map(logits_to_probabilities(tr.logits, height, width));
}

inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

/// Reflect-pads to the next multiple of 32, encodes, and crops back.
template <typename T>
PredictionMap encode_padded(const Network<T>& net, const Image& image) {
  const int H = image.height, W = image.width;
  const int Hp = (H + 31) / 32 * 32, Wp = (W + 31) / 32 * 32;
  if (Hp == H && Wp == W) return encode(net, image);
  Image padded(3, Hp, Wp);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < Hp; ++y)
      for (int x = 0; x < Wp; ++x) padded(c, y, x) = image(c, reflect_index(y, H), reflect_index(x, W));
  const PredictionMap full = encode(net, padded);
  Grid<double> crop(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) crop(y, x) = full(y, x);
  return PredictionMap(std::move(crop));
}

// ---------------------------------------------------------------------------
// Model state and checkpoints
// ---------------------------------------------------------------------------

enum class TrainingStage : std::uint32_t { Initialized = 0, WarmedUp = 1, HintsReady = 2, Trained = 3 };

inline const char* stage_name(TrainingStage s) {
  switch (s) {
    case TrainingStage::Initialized: return "initialized";
    case TrainingStage::WarmedUp: return "warmed_up";
    case TrainingStage::HintsReady: return "hints_ready";
    case TrainingStage::Trained: return "trained";
  }
  return "unknown";
}

struct ModelState {
  Network<float> net;
  std::vector<float> momentum;
  int epoch = 0;
  TrainingStage stage = TrainingStage::Initialized;

  explicit ModelState(const EncoderConfig& cfg) : net(cfg), momentum(net.parameter_count(), 0.0f) { net.initialize(); }

  std::size_t parameter_count() const { return net.parameter_count(); }
};

class checkpoint_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'H', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string encoder_config_header(const EncoderConfig& c) {
  std::ostringstream os;
  os << "stage_channels=" << c.stage_channels[0] << "," << c.stage_channels[1] << "," << c.stage_channels[2] << ","
     << c.stage_channels[3] << "\n"
     << "reduced_channels=" << c.reduced_channels << "\n"
     << "base_width=" << c.base_width << "\n"
     << "seed=" << c.seed << "\n"
     << "predictor_depth=2\n"
     << "predictor_activation=" << c.predictor_activation << "\n"
     << "predictor_init=" << c.predictor_init << "\n"
     << "predictor_init_noise=" << c.predictor_init_noise << "\n"
     << "upsampling=bilinear_half_pixel\n"
     << "input_norm=" << kInputMean << "," << kInputScale << "\n"
     << "dtype=f32\n";
  return os.str();
}

inline EncoderConfig parse_encoder_config_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw checkpoint_error("checkpoint header missing key " + k);
    return it->second;
  };
  if (need("dtype") != "f32") throw checkpoint_error("unsupported checkpoint dtype " + need("dtype"));
  {
    std::ostringstream expected;
    expected << kInputMean << "," << kInputScale;
    if (need("input_norm") != expected.str())
      throw checkpoint_error("checkpoint input normalisation " + need("input_norm") + " differs from " + expected.str());
  }
  EncoderConfig c;
  {
    std::istringstream sc(need("stage_channels"));
    std::string tok;
    for (int l = 0; l < kPyramidLevels; ++l) {
      if (!std::getline(sc, tok, ',')) throw checkpoint_error("bad stage_channels in checkpoint header");
      c.stage_channels[l] = std::stoi(tok);
    }
  }
  c.reduced_channels = std::stoi(need("reduced_channels"));
  c.base_width = std::stoi(need("base_width"));
  c.seed = std::stoull(need("seed"));
  c.predictor_activation = need("predictor_activation");
  c.predictor_init = need("predictor_init");
  c.predictor_init_noise = std::stod(need("predictor_init_noise"));
  c.validate();
  return c;
}

namespace detail {
template <typename V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw checkpoint_error("truncated checkpoint");
  return v;
}
}  // namespace detail

inline void save_checkpoint(const ModelState& m, std::ostream& os) {
  const std::string header = encoder_config_header(m.net.config());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(os, kCheckpointVersion);
  detail::write_pod(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::write_pod(os, static_cast<std::uint32_t>(m.epoch));
  detail::write_pod(os, static_cast<std::uint32_t>(m.stage));
  detail::write_pod(os, static_cast<std::uint64_t>(m.net.params().size()));
  os.write(reinterpret_cast<const char*>(m.net.params().data()),
           static_cast<std::streamsize>(m.net.params().size() * sizeof(float)));
  detail::write_pod(os, static_cast<std::uint64_t>(m.momentum.size()));
  os.write(reinterpret_cast<const char*>(m.momentum.data()), static_cast<std::streamsize>(m.momentum.size() * sizeof(float)));
  if (!os) throw checkpoint_error("failed writing checkpoint");
}

inline ModelState load_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw checkpoint_error("not a checkpoint file");
  const auto version = detail::read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw checkpoint_error("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = detail::read_pod<std::uint32_t>(is);
  std::string header(hlen, '\0');
  is.read(header.data(), hlen);
  if (!is) throw checkpoint_error("truncated checkpoint header");
  ModelState m(parse_encoder_config_header(header));
  m.epoch = static_cast<int>(detail::read_pod<std::uint32_t>(is));
  const auto stage = detail::read_pod<std::uint32_t>(is);
  if (stage > static_cast<std::uint32_t>(TrainingStage::Trained)) throw checkpoint_error("bad stage stamp");
  m.stage = static_cast<TrainingStage>(stage);
  const auto np = detail::read_pod<std::uint64_t>(is);
  if (np != m.net.params().size()) throw checkpoint_error("parameter count does not match header config");
  is.read(reinterpret_cast<char*>(m.net.params().data()), static_cast<std::streamsize>(np * sizeof(float)));
  const auto nm = detail::read_pod<std::uint64_t>(is);
  if (nm != np) throw checkpoint_error("optimizer state size mismatch");
  is.read(reinterpret_cast<char*>(m.momentum.data()), static_cast<std::streamsize>(nm * sizeof(float)));
  if (!is) throw checkpoint_error("truncated checkpoint payload");
  return m;
}

inline void save_checkpoint(const ModelState& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw checkpoint_error("cannot open " + path + " for writing");
  save_checkpoint(m, os);
}

inline ModelState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw checkpoint_error("cannot open checkpoint " + path);
  return load_checkpoint(is);
}

/// Same architecture and parameters at another scalar precision.
template <typename To, typename From>
Network<To> network_cast(const Network<From>& src) {
  Network<To> out(src.config());
  for (std::size_t k = 0; k < src.params().size(); ++k) out.params()[k] = static_cast<To>(src.params()[k]);
  return out;
}

}  // namespace hintseg
