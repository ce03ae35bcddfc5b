#include <gtest/gtest.h>

#include <sstream>

#include "gradcheck.hpp"
#include "hintseg/losses.hpp"
#include "hintseg/pyramid_encoder.hpp"
#include "test_support.hpp"

using namespace hintseg;

namespace {

Image random_image(int s, std::uint64_t seed) {
  Rng rng(seed);
  Image img(3, s, s);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace

TEST(Encoder, StrideFourLogits) {
  Network<float> net(EncoderConfig{});
  net.initialize();
  const auto tr = net.forward(random_image(64, 1));
  EXPECT_EQ(tr.logits.channels, 1);
  EXPECT_EQ(tr.logits.height, 16);
  EXPECT_EQ(tr.logits.width, 16);
  for (int l = 0; l < kPyramidLevels; ++l) EXPECT_EQ(tr.features[l].height, 64 / kPyramidStrides[l]);
  EXPECT_EQ(encode(net, random_image(64, 2)).height(), 64);
}

TEST(Encoder, RejectsUnpaddedInput) {
  Network<float> net(EncoderConfig{});
  EXPECT_THROW(net.forward(Tensor<float>(3, 48, 64)), shape_error);
  EXPECT_THROW(net.forward(Tensor<float>(1, 64, 64)), shape_error);
  net.initialize();
  const auto p = encode_padded(net, random_image(40, 3));
  EXPECT_EQ(p.height(), 40);
  EXPECT_EQ(p.width(), 40);
}

TEST(Encoder, ZeroParametersGiveOneHalf) {
  Network<float> net(EncoderConfig{});
  const auto p = encode(net, random_image(32, 4));
  for (double v : p.values()) EXPECT_EQ(v, 0.5);
}

TEST(Encoder, IdentityPredictor) {
  Network<double> net(test::gradcheck_encoder(5));
  net.initialize();
  net.set_predictor_identity();
  const auto tr = net.forward(tensor_cast<double>(random_image(32, 5)));
  const auto pt = net.predictor_forward(tr.logits);
  for (std::size_t k = 0; k < tr.logits.size(); ++k) EXPECT_NEAR(pt.logits.data[k], tr.logits.data[k], 1e-12);
}

TEST(Encoder, InitialisationIsSeeded) {
  EncoderConfig a, b;
  a.seed = b.seed = 3;
  Network<float> n1(a), n2(b);
  n1.initialize();
  n2.initialize();
  EXPECT_EQ(n1.params(), n2.params());
  b.seed = 4;
  Network<float> n3(b);
  n3.initialize();
  EXPECT_NE(n1.params(), n3.params());
}

TEST(Encoder, PartialCeGradientMatchesFiniteDifference) {
  Network<double> net(test::gradcheck_encoder(6));
  net.initialize();
  const Tensor<double> x = tensor_cast<double>(random_image(32, 6));
  SupervisionMask sup(32, 32);
  for (int y = 4; y < 12; ++y)
    for (int xx = 4; xx < 12; ++xx) sup.labels(y, xx) = Label::Foreground;
  for (int y = 22; y < 30; ++y)
    for (int xx = 20; xx < 28; ++xx) sup.labels(y, xx) = Label::Background;
  auto loss = [&](const Network<double>& n) {
    const auto tr = n.forward(x);
    return partial_ce<double>(logits_to_probabilities(tr.logits, 32, 32), sup);
  };
  const auto tr = net.forward(x);
  const auto p = logits_to_probabilities(tr.logits, 32, 32);
  Grid<double> g;
  partial_ce<double>(p, sup, &g);
  net.zero_grads();
  net.backward(tr, probabilities_backward(p, g, tr.logits.height, tr.logits.width));
  const auto analytic = net.grads();
  Rng rng(7);
  double num = 0, den = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t k = rng.below(analytic.size());
    Network<double> a = net, b = net;
    a.params()[k] += 1e-6;
    b.params()[k] -= 1e-6;
    const double fd = (loss(a) - loss(b)) / 2e-6;
    num += (fd - analytic[k]) * (fd - analytic[k]);
    den += fd * fd;
  }
  EXPECT_LT(std::sqrt(num / den), 1e-4);
}

TEST(Encoder, NetworkCastPreservesOutput) {
  Network<float> f(EncoderConfig{});
  f.initialize();
  const auto d = network_cast<double>(f);
  const Image img = random_image(32, 8);
  const auto a = encode(f, img), b = encode(d, img);
  for (std::size_t k = 0; k < a.values().size(); ++k) EXPECT_NEAR(a.values()[k], b.values()[k], 1e-4);
}

TEST(Checkpoint, RoundTrip) {
  EncoderConfig cfg;
  cfg.seed = 11;
  ModelState m(cfg);
  m.epoch = 7;
  m.stage = TrainingStage::HintsReady;
  m.momentum[3] = 0.25f;
  std::stringstream ss;
  save_checkpoint(m, ss);
  const ModelState r = load_checkpoint(ss);
  EXPECT_EQ(r.epoch, 7);
  EXPECT_EQ(r.stage, TrainingStage::HintsReady);
  EXPECT_EQ(r.net.params(), m.net.params());
  EXPECT_EQ(r.momentum, m.momentum);
  EXPECT_EQ(r.net.config().seed, 11u);
}

TEST(Checkpoint, RejectsCorruptOrForeignFiles) {
  std::stringstream junk("not a checkpoint at all");
  EXPECT_THROW(load_checkpoint(junk), checkpoint_error);

  ModelState m(EncoderConfig{});
  std::stringstream ss;
  save_checkpoint(m, ss);
  std::string bytes = ss.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(load_checkpoint(cut), checkpoint_error);

  const auto pos = bytes.find("input_norm=");
  ASSERT_NE(pos, std::string::npos);
  bytes[pos + 11] = '9';  // different normalisation, same header length
  std::stringstream foreign(bytes);
  EXPECT_THROW(load_checkpoint(foreign), checkpoint_error);
  EXPECT_THROW(load_checkpoint(std::string("/nonexistent.ckpt")), checkpoint_error);
}
