#pragma once

#include <torch/torch.h>

#include <random>
#include <string>
#include <vector>

namespace faceseal {

// Differentiable benign distortions. Every transform accepts a CHW image or
// an NCHW batch, maps [0,1] inputs to [0,1] outputs (clamp on exit) and is
// differentiable with respect to the image.

enum class TransformKind {
  identity,
  gaussian_blur,
  jpeg,
  saturation,
  contrast,
  down_up,
  translate_rotate,
};

const char* transform_kind_name(TransformKind k);

struct TransformSpec {
  TransformKind kind = TransformKind::identity;
  int kernel = 3;          // gaussian_blur: odd, one of {3,5,7}
  int quality = 80;        // jpeg
  double weight = 1.0;     // saturation interpolation weight
  double factor = 1.0;     // contrast factor
  double scale = 2.0;      // down_up factor
  int shift_y = 0;         // translate_rotate, pixels
  int shift_x = 0;
  double rotate_deg = 0.0;

  std::string describe() const;  // e.g. "jpeg(q=60)", for logs and reports
};

/// Sampling ranges matching the training distortion distribution.
struct BenignRanges {
  std::vector<int> blur_kernels{3, 5, 7};
  std::vector<int> jpeg_qualities{40, 60, 80};
  double saturation_lo = 0.0, saturation_hi = 1.0;
  double contrast_lo = 0.5, contrast_hi = 1.5;
  double scale_lo = 2.0, scale_hi = 5.0;
  int shift_max = 10;
  double rotate_max = 10.0;
};

// Rounding surrogate used inside the differentiable JPEG:
//   pass_through - forward rounds, gradient is identity
//   cubic        - round(v) + (v - round(v))^3
//   none         - no rounding; the smooth map whose gradient pass_through
//                  reproduces (reference path for finite-difference checks)
enum class RoundingMode { pass_through, cubic, none };

torch::Tensor gaussian_blur(const torch::Tensor& img, int kernel);
torch::Tensor diff_jpeg(const torch::Tensor& img, int quality, RoundingMode rounding = RoundingMode::pass_through);
torch::Tensor adjust_saturation(const torch::Tensor& img, double weight);
torch::Tensor adjust_contrast(const torch::Tensor& img, double factor);
torch::Tensor down_up_sample(const torch::Tensor& img, double scale);
torch::Tensor translate_rotate(const torch::Tensor& img, int shift_y, int shift_x, double rotate_deg);

/// Applies one spec uniformly to a whole batch.
torch::Tensor apply_benign(const torch::Tensor& batch, const TransformSpec& spec,
                           RoundingMode rounding = RoundingMode::pass_through);

/// Uniform choice over the 7 kinds (identity included), parameters drawn from
/// the configured ranges. Shifts are integer draws, everything else uniform
/// reals.
TransformSpec sample_benign(std::mt19937_64& rng, const BenignRanges& ranges = {});

}  // namespace faceseal
