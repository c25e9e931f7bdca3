#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>

#include "faceseal/common.hpp"

namespace faceseal {

/// Scalar coefficients of the training objective.
struct LossWeights {
  double perceptual = 1.0;   // c_p
  double adversarial = 0.1;  // c_g
  double message = 2.0;      // c_M
  double aux = 0.0;          // intermediate message-map term, off by default
};

/// Per-step scalars, logged once per iteration.
struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double lpips = 0.0;
  double adversarial = 0.0;  // log(1 - A(x_w))
  double image = 0.0;        // l1 + l2 + c_p*lpips + c_g*adversarial
  double message = 0.0;      // L1(s, s_b) - L1(s, s_m)
  double aux = 0.0;
  double image_weight = 1.0;  // ramp factor applied to the image term
  double total = 0.0;
};

/// Distance in a fixed feature space standing in for a learned perceptual
/// metric. "l2" is the fallback (plain mean squared error); "pyramid" is a
/// multi-scale distance that weighs structured differences more than
/// high-frequency noise of equal energy.
class PerceptualMetric {
 public:
  virtual ~PerceptualMetric() = default;
  virtual torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) const = 0;
  virtual std::string name() const = 0;
};

std::shared_ptr<PerceptualMetric> make_perceptual_metric(const std::string& name);

/// Mean |s - s_b| - mean |s - s_m| over bits (and batch); in [-1, 1].
torch::Tensor message_loss(const torch::Tensor& s, const torch::Tensor& s_b, const torch::Tensor& s_m);

/// l1 + l2 + c_p * perceptual, all as batch means.
torch::Tensor image_distortion_loss(const torch::Tensor& x, const torch::Tensor& x_w,
                                    const PerceptualMetric& metric, double c_p);

/// log(1 - a_xw), with a_xw clamped into [eps, 1-eps].
torch::Tensor generator_adversarial_loss(const torch::Tensor& a_xw);

/// log(1 - a_x) + log(a_xw), minimized when real images score 0 and
/// watermarked ones score 1.
torch::Tensor discriminator_loss(const torch::Tensor& a_x, const torch::Tensor& a_xw);

struct TotalLossInputs {
  torch::Tensor x;           // originals [N,3,H,W]
  torch::Tensor x_w;         // watermarked
  torch::Tensor s;           // messages [N,L]
  torch::Tensor s_benign;    // decoder output on the benign branch
  torch::Tensor s_malicious; // decoder output on the malicious branch
  torch::Tensor a_xw;        // discriminator mean score on x_w, [N] or scalar
  torch::Tensor proj;        // optional: encoder message map [N,1,P,P]
  torch::Tensor decoded_map; // optional: decoder intermediate map on benign branch
};

/// Full objective: image_weight * (L_d + c_g*L_G) + c_M*L_M (+ c_aux*aux).
/// Returns the differentiable scalar plus the logged breakdown.
std::pair<torch::Tensor, LossBreakdown> total_encoder_decoder_loss(const TotalLossInputs& in,
                                                                   const LossWeights& weights,
                                                                   const PerceptualMetric& metric,
                                                                   double image_weight = 1.0);

}  // namespace faceseal
