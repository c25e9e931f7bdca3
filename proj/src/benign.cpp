#include "faceseal/benign.hpp"

#include <cmath>
#include <sstream>

#include "faceseal/common.hpp"
#include "faceseal/image.hpp"

namespace faceseal {

namespace {

namespace F = torch::nn::functional;

struct Batched {
  torch::Tensor x;
  bool was_single = false;
};

Batched as_batch(const torch::Tensor& t, const char* what) {
  if (!t.defined() || (t.dim() != 3 && t.dim() != 4) || t.size(-3) != 3)
    throw std::invalid_argument(std::string(what) + ": expected CHW or NCHW tensor with 3 channels");
  if (t.dim() == 3) return {t.unsqueeze(0), true};
  return {t, false};
}

torch::Tensor unbatch(torch::Tensor t, const Batched& b) { return b.was_single ? t.squeeze(0) : t; }

torch::Tensor gaussian_kernel_1d(int kernel, double sigma, const torch::TensorOptions& opts) {
  auto k = torch::empty({kernel}, torch::kFloat64);
  const double c = (kernel - 1) / 2.0;
  for (int i = 0; i < kernel; ++i) k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  k /= k.sum();
  return k.to(opts.dtype().toScalarType());
}

// round() with a smooth stand-in gradient
torch::Tensor surrogate_round(const torch::Tensor& v, RoundingMode mode) {
  switch (mode) {
    case RoundingMode::pass_through:
      return v + (v.round() - v).detach();
    case RoundingMode::cubic: {
      auto r = v.round().detach();
      auto d = v - r;
      return r + d * d * d;
    }
    case RoundingMode::none:
      return v;
  }
  return v;
}

torch::Tensor dct_matrix(const torch::TensorOptions& opts) {
  auto d = torch::empty({8, 8}, torch::kFloat64);
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < 8; ++k) {
    const double ck = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int n = 0; n < 8; ++n) d[k][n] = ck * std::cos(pi * (2 * n + 1) * k / 16.0);
  }
  return d.to(opts.dtype().toScalarType());
}

// Annex K base tables (natural order), scaled the way codecs do it.
torch::Tensor quant_tables(int quality, const torch::TensorOptions& opts) {
  static const int luma[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                               14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                               18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                               49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  static const int chroma[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  auto q = torch::empty({3, 64}, torch::kFloat64);
  for (int i = 0; i < 64; ++i) {
    auto scaled = [&](int base) {
      int v = (base * scale + 50) / 100;
      return std::min(std::max(v, 1), 255);
    };
    q[0][i] = scaled(luma[i]);
    q[1][i] = scaled(chroma[i]);
    q[2][i] = scaled(chroma[i]);
  }
  return q.view({1, 3, 1, 8, 8}).to(opts.dtype().toScalarType());
}

torch::Tensor rgb_to_ycbcr255(const torch::Tensor& x) {
  auto r = x.select(1, 0), g = x.select(1, 1), b = x.select(1, 2);
  auto y = 0.299 * r + 0.587 * g + 0.114 * b;
  auto cb = -0.168735892 * r - 0.331264108 * g + 0.5 * b + 128.0;
  auto cr = 0.5 * r - 0.418687589 * g - 0.081312411 * b + 128.0;
  return torch::stack({y, cb, cr}, 1);
}

torch::Tensor ycbcr255_to_rgb(const torch::Tensor& x) {
  auto y = x.select(1, 0), cb = x.select(1, 1) - 128.0, cr = x.select(1, 2) - 128.0;
  auto r = y + 1.402 * cr;
  auto g = y - 0.344136286 * cb - 0.714136286 * cr;
  auto b = y + 1.772 * cb;
  return torch::stack({r, g, b}, 1);
}

// Integer translation via reflect pad + slice; exact on the interior.
torch::Tensor integer_shift(const torch::Tensor& x, int shift_y, int shift_x) {
  const std::int64_t h = x.size(2), w = x.size(3);
  if (std::abs(shift_y) >= h || std::abs(shift_x) >= w)
    throw std::invalid_argument("translate_rotate: shift larger than the image");
  const std::int64_t left = std::max(shift_x, 0), right = std::max(-shift_x, 0);
  const std::int64_t top = std::max(shift_y, 0), bottom = std::max(-shift_y, 0);
  auto padded = F::pad(x, F::PadFuncOptions({left, right, top, bottom}).mode(torch::kReflect));
  return padded.slice(2, 0, h).slice(3, 0, w).contiguous();
}

}  // namespace

const char* transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::gaussian_blur: return "gaussian_blur";
    case TransformKind::jpeg: return "jpeg";
    case TransformKind::saturation: return "saturation";
    case TransformKind::contrast: return "contrast";
    case TransformKind::down_up: return "down_up";
    case TransformKind::translate_rotate: return "translate_rotate";
  }
  return "?";
}

std::string TransformSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case TransformKind::identity: os << "identity"; break;
    case TransformKind::gaussian_blur: os << "blur(k=" << kernel << ")"; break;
    case TransformKind::jpeg: os << "jpeg(q=" << quality << ")"; break;
    case TransformKind::saturation: os << "saturation(w=" << weight << ")"; break;
    case TransformKind::contrast: os << "contrast(f=" << factor << ")"; break;
    case TransformKind::down_up: os << "down_up(s=" << scale << ")"; break;
    case TransformKind::translate_rotate:
      os << "shift_rotate(dy=" << shift_y << ",dx=" << shift_x << ",r=" << rotate_deg << ")";
      break;
  }
  return os.str();
}

torch::Tensor gaussian_blur(const torch::Tensor& img, int kernel) {
  auto b = as_batch(img, "gaussian_blur");
  if (kernel % 2 == 0 || kernel < 3 || kernel > 7)
    throw std::invalid_argument("gaussian_blur: kernel must be one of {3,5,7}");
  const double sigma = 0.3 * ((kernel - 1) / 2.0 - 1.0) + 0.8;
  auto k1 = gaussian_kernel_1d(kernel, sigma, b.x.options());
  auto k2 = torch::outer(k1, k1).view({1, 1, kernel, kernel}).repeat({3, 1, 1, 1});
  const std::int64_t p = kernel / 2;
  auto padded = F::pad(b.x, F::PadFuncOptions({p, p, p, p}).mode(torch::kReflect));
  auto out = F::conv2d(padded, k2, F::Conv2dFuncOptions().groups(3));
  return unbatch(out.clamp(0, 1), b);
}

torch::Tensor diff_jpeg(const torch::Tensor& img, int quality, RoundingMode rounding) {
  auto b = as_batch(img, "diff_jpeg");
  if (quality < 1 || quality > 100) throw std::invalid_argument("diff_jpeg: quality must be in 1..100");
  auto x = b.x;
  const std::int64_t h = x.size(2), w = x.size(3);
  const std::int64_t ph = (8 - h % 8) % 8, pw = (8 - w % 8) % 8;
  if (ph || pw) x = F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReflect));
  const std::int64_t hp = x.size(2), wp = x.size(3);
  const std::int64_t nb = (hp / 8) * (wp / 8);
  const std::int64_t n = x.size(0);

  auto ycc = rgb_to_ycbcr255(x * 255.0) - 128.0;

  // [N,3,H,W] -> per-channel 8x8 blocks [N,3,nb,8,8]
  auto blocks = F::unfold(ycc, F::UnfoldFuncOptions({8, 8}).stride({8, 8}))
                    .view({n, 3, 64, nb})
                    .permute({0, 1, 3, 2})
                    .reshape({n, 3, nb, 8, 8});

  auto d = dct_matrix(x.options());
  auto coeff = torch::matmul(torch::matmul(d, blocks), d.t());

  auto q = quant_tables(quality, x.options());
  auto deq = surrogate_round(coeff / q, rounding) * q;

  auto rec = torch::matmul(torch::matmul(d.t(), deq), d);
  auto folded = F::fold(rec.reshape({n, 3, nb, 64}).permute({0, 1, 3, 2}).reshape({n, 3 * 64, nb}),
                        F::FoldFuncOptions({hp, wp}, {8, 8}).stride({8, 8}));

  auto rgb = ycbcr255_to_rgb(folded + 128.0) / 255.0;
  if (ph || pw) rgb = rgb.slice(2, 0, h).slice(3, 0, w);
  return unbatch(rgb.clamp(0, 1), b);
}

torch::Tensor adjust_saturation(const torch::Tensor& img, double weight) {
  auto b = as_batch(img, "adjust_saturation");
  if (weight < 0.0 || weight > 1.0) throw std::invalid_argument("adjust_saturation: weight must be in [0,1]");
  auto gray = rgb_to_gray(b.x, /*replicate=*/true);
  auto out = weight * b.x + (1.0 - weight) * gray;
  return unbatch(out.clamp(0, 1), b);
}

torch::Tensor adjust_contrast(const torch::Tensor& img, double factor) {
  auto b = as_batch(img, "adjust_contrast");
  if (factor <= 0.0) throw std::invalid_argument("adjust_contrast: factor must be positive");
  auto mu = rgb_to_gray(b.x, /*replicate=*/false).mean({1, 2, 3}, /*keepdim=*/true);
  auto out = mu + factor * (b.x - mu);
  return unbatch(out.clamp(0, 1), b);
}

torch::Tensor down_up_sample(const torch::Tensor& img, double scale) {
  auto b = as_batch(img, "down_up_sample");
  if (scale < 1.0) throw std::invalid_argument("down_up_sample: scale must be >= 1");
  const std::int64_t h = b.x.size(2), w = b.x.size(3);
  const std::int64_t dh = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(h / scale)));
  const std::int64_t dw = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(w / scale)));
  if (dh == h && dw == w) return unbatch(b.x.clone(), b);
  auto down = F::interpolate(b.x, F::InterpolateFuncOptions()
                                      .size(std::vector<std::int64_t>{dh, dw})
                                      .mode(torch::kBilinear)
                                      .align_corners(false));
  auto up = F::interpolate(down, F::InterpolateFuncOptions()
                                     .size(std::vector<std::int64_t>{h, w})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  return unbatch(up.clamp(0, 1), b);
}

torch::Tensor translate_rotate(const torch::Tensor& img, int shift_y, int shift_x, double rotate_deg) {
  auto b = as_batch(img, "translate_rotate");
  if (rotate_deg == 0.0) {
    if (shift_y == 0 && shift_x == 0) return unbatch(b.x.clone(), b);
    return unbatch(integer_shift(b.x, shift_y, shift_x).clamp(0, 1), b);
  }
  const std::int64_t n = b.x.size(0), h = b.x.size(2), w = b.x.size(3);
  const double theta = rotate_deg * 3.14159265358979323846 / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;

  auto ys = torch::arange(h, torch::kFloat64);
  auto xs = torch::arange(w, torch::kFloat64);
  auto dy = (ys - cy - shift_y).view({h, 1});
  auto dx = (xs - cx - shift_x).view({1, w});
  auto x_src = ct * dx + st * dy + cx;   // inverse rotation
  auto y_src = -st * dx + ct * dy + cy;
  auto gx = (2.0 * x_src + 1.0) / static_cast<double>(w) - 1.0;
  auto gy = (2.0 * y_src + 1.0) / static_cast<double>(h) - 1.0;
  auto grid = torch::stack({gx.expand({h, w}), gy.expand({h, w})}, -1)
                  .to(b.x.scalar_type())
                  .unsqueeze(0)
                  .expand({n, h, w, 2});

  auto out = F::grid_sample(b.x, grid, F::GridSampleFuncOptions()
                                           .mode(torch::kBilinear)
                                           .padding_mode(torch::kReflection)
                                           .align_corners(false));
  return unbatch(out.clamp(0, 1), b);
}

torch::Tensor apply_benign(const torch::Tensor& batch, const TransformSpec& spec, RoundingMode rounding) {
  switch (spec.kind) {
    case TransformKind::identity: return batch.clone();
    case TransformKind::gaussian_blur: return gaussian_blur(batch, spec.kernel);
    case TransformKind::jpeg: return diff_jpeg(batch, spec.quality, rounding);
    case TransformKind::saturation: return adjust_saturation(batch, spec.weight);
    case TransformKind::contrast: return adjust_contrast(batch, spec.factor);
    case TransformKind::down_up: return down_up_sample(batch, spec.scale);
    case TransformKind::translate_rotate: return translate_rotate(batch, spec.shift_y, spec.shift_x, spec.rotate_deg);
  }
  throw std::invalid_argument("apply_benign: unknown transform kind");
}

TransformSpec sample_benign(std::mt19937_64& rng, const BenignRanges& ranges) {
  std::uniform_int_distribution<int> kind_draw(0, 6);
  TransformSpec spec;
  spec.kind = static_cast<TransformKind>(kind_draw(rng));
  switch (spec.kind) {
    case TransformKind::identity:
      break;
    case TransformKind::gaussian_blur: {
      std::uniform_int_distribution<std::size_t> pick(0, ranges.blur_kernels.size() - 1);
      spec.kernel = ranges.blur_kernels[pick(rng)];
      break;
    }
    case TransformKind::jpeg: {
      std::uniform_int_distribution<std::size_t> pick(0, ranges.jpeg_qualities.size() - 1);
      spec.quality = ranges.jpeg_qualities[pick(rng)];
      break;
    }
    case TransformKind::saturation: {
      std::uniform_real_distribution<double> u(ranges.saturation_lo, ranges.saturation_hi);
      spec.weight = u(rng);
      break;
    }
    case TransformKind::contrast: {
      std::uniform_real_distribution<double> u(ranges.contrast_lo, ranges.contrast_hi);
      spec.factor = u(rng);
      break;
    }
    case TransformKind::down_up: {
      std::uniform_real_distribution<double> u(ranges.scale_lo, ranges.scale_hi);
      spec.scale = u(rng);
      break;
    }
    case TransformKind::translate_rotate: {
      std::uniform_int_distribution<int> shift(-ranges.shift_max, ranges.shift_max);
      std::uniform_real_distribution<double> rot(-ranges.rotate_max, ranges.rotate_max);
      spec.shift_y = shift(rng);
      spec.shift_x = shift(rng);
      spec.rotate_deg = rot(rng);
      break;
    }
  }
  return spec;
}

}  // namespace faceseal
