#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "faceseal/common.hpp"

namespace faceseal {

// Images are float32 CHW tensors with exactly 3 channels (RGB) and values in
// [0,1]. Batches are NCHW. All public operations keep that convention and
// clamp on exit where numerics could escape the range.

bool is_image(const torch::Tensor& t);
void require_image(const torch::Tensor& t, const char* what);
void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what);

enum class ImageFormat { png, jpeg };

/// Decodes a PNG or JPEG file to a [0,1] RGB tensor. Grayscale inputs are
/// replicated to 3 channels, alpha is dropped.
torch::Tensor load_image(const std::string& path);

/// Writes an image as 8-bit PNG (lossless) or JPEG at the given quality.
void save_image(const torch::Tensor& img, const std::string& path,
                ImageFormat format = ImageFormat::png, int quality = 95);

// In-memory round trip through the real JPEG codec (4:4:4 sampling, same as
// save_image). Used by the evaluation harness and diff-JPEG calibration.
std::vector<std::uint8_t> encode_jpeg(const torch::Tensor& img, int quality);
torch::Tensor decode_jpeg(const std::vector<std::uint8_t>& bytes);

/// Convenience: encode to JPEG at `quality` and decode again.
torch::Tensor jpeg_codec_roundtrip(const torch::Tensor& img, int quality);

/// Largest centered square crop followed by bilinear resize to side x side.
torch::Tensor center_crop_resize(const torch::Tensor& img, std::int64_t side);

/// Maps to the 8-bit grid and back: round(v*255)/255.
torch::Tensor quantize_8bit(const torch::Tensor& img);

/// Luminance with weights (0.299, 0.587, 0.114); output keeps 3 equal channels
/// when `replicate` is true, otherwise a single channel.
torch::Tensor rgb_to_gray(const torch::Tensor& img, bool replicate = true);

/// Peak signal-to-noise ratio in dB with peak 1.0. Identical inputs give +inf.
double psnr(const torch::Tensor& a, const torch::Tensor& b);

/// Mean SSIM over channels: 11x11 Gaussian window (sigma 1.5), C1=0.01^2,
/// C2=0.03^2, window applied in valid mode.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

struct QualityReport {
  double psnr = 0.0;  // dB; +inf when inputs are identical
  double ssim = 0.0;
  // Same metrics after snapping both inputs to the 8-bit grid. Saved files are
  // 8-bit, so reports quote these by default.
  double psnr_quantized = 0.0;
  double ssim_quantized = 0.0;
};

QualityReport compare_images(const torch::Tensor& a, const torch::Tensor& b);

}  // namespace faceseal
