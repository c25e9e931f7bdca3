#include "faceseal/losses.hpp"

#include "faceseal/image.hpp"

namespace faceseal {

namespace {

namespace F = torch::nn::functional;

constexpr double kScoreEps = 1e-6;

torch::Tensor clamp_score(const torch::Tensor& a) { return a.clamp(kScoreEps, 1.0 - kScoreEps); }

class L2Perceptual : public PerceptualMetric {
 public:
  torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) const override {
    return (a - b).pow(2).mean();
  }
  std::string name() const override { return "l2"; }
};

// Mean squared distance accumulated over a 4-level average pyramid. Smooth,
// structured differences survive downsampling while equal-energy pixel noise
// decays by ~4x per level, so this scores them apart.
class PyramidPerceptual : public PerceptualMetric {
 public:
  torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) const override {
    auto x = a.dim() == 3 ? a.unsqueeze(0) : a;
    auto y = b.dim() == 3 ? b.unsqueeze(0) : b;
    auto diff = (x - y).pow(2).mean();
    auto total = diff;
    for (int level = 1; level < 4; ++level) {
      if (x.size(2) < 2 || x.size(3) < 2) break;
      x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
      y = F::avg_pool2d(y, F::AvgPool2dFuncOptions(2));
      total = total + (x - y).pow(2).mean();
    }
    return total / 4.0;
  }
  std::string name() const override { return "pyramid"; }
};

}  // namespace

std::shared_ptr<PerceptualMetric> make_perceptual_metric(const std::string& name) {
  if (name == "l2") return std::make_shared<L2Perceptual>();
  if (name == "pyramid") return std::make_shared<PyramidPerceptual>();
  throw config_error("unknown perceptual metric: " + name);
}

torch::Tensor message_loss(const torch::Tensor& s, const torch::Tensor& s_b, const torch::Tensor& s_m) {
  if (s.sizes() != s_b.sizes() || s.sizes() != s_m.sizes())
    throw std::invalid_argument("message_loss: length mismatch");
  return (s - s_b).abs().mean() - (s - s_m).abs().mean();
}

torch::Tensor image_distortion_loss(const torch::Tensor& x, const torch::Tensor& x_w,
                                    const PerceptualMetric& metric, double c_p) {
  require_same_shape(x, x_w, "image_distortion_loss");
  auto l1 = (x - x_w).abs().mean();
  auto l2 = (x - x_w).pow(2).mean();
  if (c_p == 0.0) return l1 + l2;
  return l1 + l2 + c_p * metric.distance(x, x_w);
}

torch::Tensor generator_adversarial_loss(const torch::Tensor& a_xw) {
  return torch::log(1.0 - clamp_score(a_xw)).mean();
}

torch::Tensor discriminator_loss(const torch::Tensor& a_x, const torch::Tensor& a_xw) {
  return (torch::log(1.0 - clamp_score(a_x)) + torch::log(clamp_score(a_xw))).mean();
}

std::pair<torch::Tensor, LossBreakdown> total_encoder_decoder_loss(const TotalLossInputs& in,
                                                                   const LossWeights& weights,
                                                                   const PerceptualMetric& metric,
                                                                   double image_weight) {
  require_same_shape(in.x, in.x_w, "total_loss");
  LossBreakdown out;
  out.image_weight = image_weight;

  auto l1 = (in.x - in.x_w).abs().mean();
  auto l2 = (in.x - in.x_w).pow(2).mean();
  auto lpips = metric.distance(in.x, in.x_w);
  auto adv = generator_adversarial_loss(in.a_xw);
  auto image = l1 + l2 + weights.perceptual * lpips + weights.adversarial * adv;
  auto msg = message_loss(in.s, in.s_benign, in.s_malicious);

  auto total = image_weight * image + weights.message * msg;
  if (weights.aux != 0.0) {
    if (!in.proj.defined() || !in.decoded_map.defined())
      throw std::invalid_argument("total_loss: aux weight set but projection maps missing");
    auto aux = (in.proj - in.decoded_map).abs().mean();
    total = total + weights.aux * aux;
    out.aux = aux.item<double>();
  }

  out.l1 = l1.item<double>();
  out.l2 = l2.item<double>();
  out.lpips = lpips.item<double>();
  out.adversarial = adv.item<double>();
  out.image = image.item<double>();
  out.message = msg.item<double>();
  out.total = total.item<double>();
  return {total, out};
}

}  // namespace faceseal
