#pragma once

#include <torch/torch.h>

#include <array>
#include <random>
#include <vector>

namespace faceseal {

using Polygon = std::vector<std::array<double, 2>>;  // (x, y) vertices

/// Facial feature polygons used to localize simulated tampering.
struct FacePolygons {
  std::vector<Polygon> eyes;
  Polygon nose;
  Polygon lips;

  std::vector<Polygon> all() const;
  bool empty() const { return eyes.empty() && nose.empty() && lips.empty(); }
};

/// Scanline fill, even-odd rule, pixel-center sampling. Returns a float
/// [H,W] tensor with 1 inside any polygon and 0 outside. Polygons with fewer
/// than 3 vertices are rejected.
torch::Tensor rasterize_polygons(const std::vector<Polygon>& polys, std::int64_t h, std::int64_t w);

/// Mask of ones with polygon interiors set to the retention factor across all
/// 3 channels. `feather_px` > 0 ramps linearly back to 1 over that many
/// pixels outside the polygons (off by default).
torch::Tensor build_retention_mask(const FacePolygons& polys, double retention, std::int64_t h, std::int64_t w,
                                   int feather_px = 0);

/// Same, starting from a precomputed binary interior mask [H,W] or [1,H,W].
torch::Tensor retention_mask_from_binary(const torch::Tensor& interior, double retention, int feather_px = 0);

/// Blend mask*watermarked + (1-mask)*original; differentiable in both images.
/// Accepts CHW or NCHW; mask broadcasts ([3,H,W], [1,H,W] or [N,3,H,W]).
torch::Tensor apply_malicious(const torch::Tensor& watermarked, const torch::Tensor& original,
                              const torch::Tensor& mask);

/// Uniform draw of the retention factor; defaults follow the training range.
double sample_retention(std::mt19937_64& rng, double lo = 0.0, double hi = 0.4);

}  // namespace faceseal
