#include "faceseal/malicious.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace faceseal {

namespace {

namespace F = torch::nn::functional;

// x-coordinates where the horizontal line y=yc crosses polygon edges.
// Half-open edge rule in y keeps shared vertices from double-counting.
void crossings(const Polygon& poly, double yc, std::vector<double>& xs) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    const double y0 = a[1], y1 = b[1];
    if ((yc >= y0 && yc < y1) || (yc >= y1 && yc < y0)) {
      const double t = (yc - y0) / (y1 - y0);
      xs.push_back(a[0] + t * (b[0] - a[0]));
    }
  }
}

}  // namespace

std::vector<Polygon> FacePolygons::all() const {
  std::vector<Polygon> out = eyes;
  if (!nose.empty()) out.push_back(nose);
  if (!lips.empty()) out.push_back(lips);
  return out;
}

torch::Tensor rasterize_polygons(const std::vector<Polygon>& polys, std::int64_t h, std::int64_t w) {
  if (h < 1 || w < 1) throw std::invalid_argument("rasterize_polygons: empty raster");
  for (const auto& p : polys)
    if (p.size() < 3) throw std::invalid_argument("rasterize_polygons: polygon needs at least 3 vertices");

  auto mask = torch::zeros({h, w}, torch::kFloat32);
  auto acc = mask.accessor<float, 2>();
  std::vector<double> xs;
  for (const auto& poly : polys) {
    double ymin = poly[0][1], ymax = poly[0][1];
    for (const auto& v : poly) {
      ymin = std::min(ymin, v[1]);
      ymax = std::max(ymax, v[1]);
    }
    const std::int64_t row0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(ymin - 0.5)));
    const std::int64_t row1 = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::ceil(ymax)));
    for (std::int64_t row = row0; row <= row1; ++row) {
      const double yc = row + 0.5;
      xs.clear();
      crossings(poly, yc, xs);
      std::sort(xs.begin(), xs.end());
      for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
        // pixel centers col+0.5 in [xs[i], xs[i+1]); half-open keeps shared
        // boundaries from double-filling
        std::int64_t c0 = static_cast<std::int64_t>(std::ceil(xs[i] - 0.5));
        std::int64_t c1 = static_cast<std::int64_t>(std::floor(xs[i + 1] - 0.5 - 1e-12));
        c0 = std::max<std::int64_t>(c0, 0);
        c1 = std::min<std::int64_t>(c1, w - 1);
        for (std::int64_t c = c0; c <= c1; ++c) acc[row][c] = 1.0f;
      }
    }
  }
  return mask;
}

torch::Tensor retention_mask_from_binary(const torch::Tensor& interior, double retention, int feather_px) {
  if (retention < 0.0 || retention > 1.0)
    throw std::invalid_argument("retention_mask: retention must be in [0,1]");
  auto bin = interior;
  if (bin.dim() == 3) bin = bin.squeeze(0);
  if (bin.dim() != 2) throw std::invalid_argument("retention_mask: interior mask must be [H,W] or [1,H,W]");
  bin = bin.to(torch::kFloat32);

  torch::Tensor level = bin;
  if (feather_px > 0) {
    // coverage level: 1 inside, stepping down linearly over feather_px dilations
    auto d = bin.view({1, 1, bin.size(0), bin.size(1)});
    auto sum = d.clone();
    for (int i = 0; i < feather_px; ++i) {
      d = F::max_pool2d(d, F::MaxPool2dFuncOptions(3).stride(1).padding(1));
      sum += d;
    }
    level = (sum / (feather_px + 1)).view_as(bin);
  }
  auto mask = 1.0 - (1.0 - retention) * level;
  return mask.unsqueeze(0).repeat({3, 1, 1});
}

torch::Tensor build_retention_mask(const FacePolygons& polys, double retention, std::int64_t h, std::int64_t w,
                                   int feather_px) {
  auto interior = rasterize_polygons(polys.all(), h, w);
  return retention_mask_from_binary(interior, retention, feather_px);
}

torch::Tensor apply_malicious(const torch::Tensor& watermarked, const torch::Tensor& original,
                              const torch::Tensor& mask) {
  if (!watermarked.defined() || !original.defined() || watermarked.sizes() != original.sizes())
    throw std::invalid_argument("apply_malicious: image shape mismatch");
  auto m = mask.to(watermarked.scalar_type());
  if (watermarked.dim() == 4 && m.dim() == 3) m = m.unsqueeze(0);
  return m * watermarked + (1.0 - m) * original;
}

double sample_retention(std::mt19937_64& rng, double lo, double hi) {
  if (lo < 0.0 || hi > 1.0 || lo > hi) throw std::invalid_argument("sample_retention: need 0 <= lo <= hi <= 1");
  if (lo == hi) return lo;
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

}  // namespace faceseal
