#pragma once

// Gradient check of the contrastive term through the full network, shared by
// the unit tests and the acceptance binary.

#include <cmath>
#include <vector>

#include "hintseg/pyramid_encoder.hpp"
#include "hintseg/representation_optimizer.hpp"

namespace hintseg::test {

struct StopgradCheck {
  double p2_path_max_abs = 0.0;  // largest |dL_c/dtheta| reaching the target branch
  double p1_relative_error = 0.0;
  std::size_t checked = 0;
};

inline EncoderConfig gradcheck_encoder(std::uint64_t seed) {
  EncoderConfig e;
  e.stage_channels = {3, 4, 4, 5};
  e.reduced_channels = 2;
  e.base_width = 3;
  e.seed = seed;
  e.predictor_init = "identity_noise";
  e.predictor_init_noise = 0.2;
  return e;
}

/// L_c(theta) = MSE(g(f(T1 x)), stopgrad(align(f(T2 x)))) on a 32x32 image.
inline StopgradCheck check_stopgrad(std::uint64_t seed, std::size_t n_params = 40) {
  Network<double> net(gradcheck_encoder(seed));
  net.initialize();
  Rng rng(derive_seed({seed, 0x9c}));
  const int S = 32;
  Image img(3, S, S);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  const TransformList t1{TransformSpec::flip()};
  const TransformList t2{TransformSpec::translate(0.0625, -0.0625)};
  const Tensor<double> x1 = tensor_cast<double>(apply_transform(img, t1));
  const Tensor<double> x2 = tensor_cast<double>(apply_transform(img, t2));
  const Alignment al(t2, t1, S, S);
  const BinaryMask include = contrastive_include_mask(al.valid(), true, 4);
  ContrastiveOptions opt;
  opt.kind = ContrastiveKind::MSE;
  opt.stopgrad = true;

  auto branch1 = [&](const Network<double>& n) {
    const auto tr = n.forward(x1);
    const auto pt = n.predictor_forward(tr.logits);
    return logits_to_probabilities(pt.logits, S, S);
  };
  const auto tr2 = net.forward(x2);
  const Grid<double> p2 = logits_to_probabilities(tr2.logits, S, S);
  const Grid<double> target = al.forward(p2);

  StopgradCheck out;
  // Target branch: whatever the loss hands back must be exactly zero.
  const auto tr1 = net.forward(x1);
  const auto pt1 = net.predictor_forward(tr1.logits);
  const Grid<double> p1 = logits_to_probabilities(pt1.logits, S, S);
  const auto res = contrastive_loss_and_grad<double>(p1, target, &include, opt);
  net.zero_grads();
  net.backward(tr2, probabilities_backward(p2, al.adjoint(res.grad_p2), tr2.logits.height, tr2.logits.width));
  for (double g : net.grads()) out.p2_path_max_abs = std::max(out.p2_path_max_abs, std::abs(g));
  for (double g : res.grad_p2.data) out.p2_path_max_abs = std::max(out.p2_path_max_abs, std::abs(g));

  // Predictor branch: analytic vs central differences with the target frozen.
  net.zero_grads();
  Tensor<double> gz = probabilities_backward(p1, res.grad_p1, pt1.logits.height, pt1.logits.width);
  net.backward(tr1, net.predictor_backward(pt1, gz));
  const std::vector<double> analytic = net.grads();

  std::vector<std::size_t> idx(analytic.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(analytic[a]) > std::abs(analytic[b]); });
  idx.resize(std::min(n_params, idx.size()));

  double num = 0.0, den = 0.0;
  const double h = 1e-6;
  for (std::size_t k : idx) {
    Network<double> a = net, b = net;
    a.params()[k] += h;
    b.params()[k] -= h;
    const double la = contrastive_loss_and_grad<double>(branch1(a), target, &include, opt).loss;
    const double lb = contrastive_loss_and_grad<double>(branch1(b), target, &include, opt).loss;
    const double fd = (la - lb) / (2 * h);
    num += (fd - analytic[k]) * (fd - analytic[k]);
    den += fd * fd;
  }
  out.p1_relative_error = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
  out.checked = idx.size();
  return out;
}

}  // namespace hintseg::test
