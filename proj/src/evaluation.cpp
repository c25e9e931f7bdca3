#include "faceseal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "faceseal/benign.hpp"
#include "faceseal/image.hpp"
#include "faceseal/malicious.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace faceseal {

namespace {

torch::Tensor harden_tensor(const torch::Tensor& soft) { return (soft >= 0.5).to(torch::kFloat32); }

double vec_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double vec_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = vec_mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double bit_recovery_accuracy(const MessageBits& s, const SoftBits& s_hat) {
  if (s.length() != s_hat.length()) throw std::invalid_argument("bit_recovery_accuracy: length mismatch");
  auto hard = harden(s_hat);
  int match = 0;
  for (int i = 0; i < s.length(); ++i) match += hard.bits[i] == s.bits[i] ? 1 : 0;
  return 100.0 * match / static_cast<double>(s.length());
}

double bit_recovery_accuracy(const torch::Tensor& s, const torch::Tensor& soft) {
  if (s.sizes() != soft.sizes()) throw std::invalid_argument("bit_recovery_accuracy: shape mismatch");
  auto match = harden_tensor(soft).eq(s.to(torch::kFloat32).round()).to(torch::kFloat64);
  return 100.0 * match.mean().item<double>();
}

std::vector<double> per_image_bra(const torch::Tensor& s, const torch::Tensor& soft) {
  if (s.sizes() != soft.sizes() || s.dim() != 2) throw std::invalid_argument("per_image_bra: expected matching [N,L]");
  auto match = harden_tensor(soft).eq(s.to(torch::kFloat32).round()).to(torch::kFloat64).mean(1).mul(100.0);
  auto acc = match.contiguous();
  const double* p = acc.data_ptr<double>();
  return std::vector<double>(p, p + acc.numel());
}

double bits_per_pixel(std::int64_t message_bits, std::int64_t height, std::int64_t width, std::int64_t channels) {
  if (message_bits < 1 || height < 1 || width < 1 || channels < 1)
    throw std::invalid_argument("bits_per_pixel: all dimensions must be positive");
  return static_cast<double>(message_bits) / (static_cast<double>(height) * width * channels);
}

RocResult roc_auc(const std::vector<double>& benign_bra, const std::vector<double>& malicious_bra) {
  if (benign_bra.empty() || malicious_bra.empty()) throw std::invalid_argument("roc_auc: empty score list");
  std::set<double> thresholds(benign_bra.begin(), benign_bra.end());
  thresholds.insert(malicious_bra.begin(), malicious_bra.end());

  RocResult roc;
  roc.points.push_back({0.0, 0.0, -std::numeric_limits<double>::infinity()});
  const double nb = static_cast<double>(benign_bra.size());
  const double nm = static_cast<double>(malicious_bra.size());
  for (double t : thresholds) {  // ascending; scores <= t called manipulated
    double fp = 0, tp = 0;
    for (double b : benign_bra) fp += b <= t ? 1 : 0;
    for (double m : malicious_bra) tp += m <= t ? 1 : 0;
    roc.points.push_back({fp / nb, tp / nm, t});
  }
  double auc = 0;
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto& a = roc.points[i - 1];
    const auto& b = roc.points[i];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  roc.auc = auc;
  return roc;
}

EvalTransform identity_eval() {
  return {"none", false, [](const torch::Tensor& x_w, const torch::Tensor&, const torch::Tensor&) { return x_w; }};
}

EvalTransform codec_jpeg_eval(int quality) {
  return {"jpeg-codec-" + std::to_string(quality), false,
          [quality](const torch::Tensor& x_w, const torch::Tensor&, const torch::Tensor&) {
            return jpeg_codec_roundtrip(x_w, quality);
          }};
}

EvalTransform saturation_eval(double weight) {
  return {"saturation-" + std::to_string(weight).substr(0, 4), false,
          [weight](const torch::Tensor& x_w, const torch::Tensor&, const torch::Tensor&) {
            return adjust_saturation(x_w, weight);
          }};
}

EvalTransform contrast_eval(double factor) {
  return {"contrast-" + std::to_string(factor).substr(0, 4), false,
          [factor](const torch::Tensor& x_w, const torch::Tensor&, const torch::Tensor&) {
            return adjust_contrast(x_w, factor);
          }};
}

EvalTransform blur_eval(int kernel) {
  return {"blur-" + std::to_string(kernel), false,
          [kernel](const torch::Tensor& x_w, const torch::Tensor&, const torch::Tensor&) {
            return gaussian_blur(x_w, kernel);
          }};
}

EvalTransform down_up_eval(double scale) {
  return {"down_up-" + std::to_string(scale).substr(0, 3), false,
          [scale](const torch::Tensor& x_w, const torch::Tensor&, const torch::Tensor&) {
            return down_up_sample(x_w, scale);
          }};
}

EvalTransform shift_rotate_eval(int dy, int dx, double deg) {
  return {"shift-rotate", false, [dy, dx, deg](const torch::Tensor& x_w, const torch::Tensor&, const torch::Tensor&) {
            return translate_rotate(x_w, dy, dx, deg);
          }};
}

EvalTransform tamper_eval(double retention) {
  char name[48];
  std::snprintf(name, sizeof(name), "tamper-wr-%.2f", retention);
  return {name, true, [retention](const torch::Tensor& x_w, const torch::Tensor& x, const torch::Tensor& mask) {
            auto m = 1.0 - (1.0 - retention) * mask;
            return apply_malicious(x_w, x, m);
          }};
}

std::vector<EvalTransform> default_eval_transforms() {
  return {identity_eval(),
          codec_jpeg_eval(80),
          codec_jpeg_eval(50),
          saturation_eval(0.35),
          contrast_eval(1.35),
          blur_eval(5),
          down_up_eval(2.5),
          shift_rotate_eval(3, -2, 4.0),
          tamper_eval(0.0),
          tamper_eval(0.25)};
}

const TransformResult* EvalReport::find(const std::string& name) const {
  for (const auto& t : transforms)
    if (t.name == name) return &t;
  return nullptr;
}

json EvalReport::to_json() const {
  json j;
  j["images"] = images;
  j["message_bits"] = message_bits;
  j["bpp"] = bpp;
  j["psnr_mean"] = psnr_mean;
  j["ssim_mean"] = ssim_mean;
  json ts = json::array();
  for (const auto& t : transforms)
    ts.push_back({{"name", t.name},
                  {"malicious", t.malicious},
                  {"bra_mean", t.bra_mean},
                  {"bra_std", t.bra_std},
                  {"per_image", t.per_image}});
  j["transforms"] = ts;
  json pts = json::array();
  for (const auto& p : roc.points) pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", p.threshold}});
  j["roc"] = {{"auc", roc.auc}, {"points", pts}};
  j["full_scale_reference"] = {{"psnr", kFullScaleReference.psnr},
                               {"ssim", kFullScaleReference.ssim},
                               {"bpp", kFullScaleReference.bpp},
                               {"bra_none", kFullScaleReference.bra_none},
                               {"bra_jpg75", kFullScaleReference.bra_jpg75},
                               {"bra_jpg50", kFullScaleReference.bra_jpg50},
                               {"bra_instagram_aden", kFullScaleReference.bra_aden},
                               {"bra_instagram_brooklyn", kFullScaleReference.bra_brooklyn},
                               {"bra_instagram_clarendon", kFullScaleReference.bra_clarendon},
                               {"bra_simswap", kFullScaleReference.bra_simswap},
                               {"bra_fsft", kFullScaleReference.bra_fsft},
                               {"bra_faceswap", kFullScaleReference.bra_faceswap},
                               {"detector_auc", kFullScaleReference.detector_auc},
                               {"multiface_bra", kFullScaleReference.multiface_bra},
                               {"copy_attack_bra", kFullScaleReference.copy_attack_bra}};
  return j;
}

EvalReport transform_benchmark(const ModelBundle& bundle, const FaceDataset& testset, const EvalOptions& options) {
  if (testset.size() == 0) throw std::invalid_argument("transform_benchmark: empty test set");
  torch::NoGradGuard guard;
  auto& models = const_cast<ModelBundle&>(bundle);
  models.train(false);

  auto transforms = options.transforms.empty() ? default_eval_transforms() : options.transforms;
  const std::int64_t n =
      options.max_images > 0 ? std::min<std::int64_t>(options.max_images, testset.size()) : testset.size();
  const std::int64_t chunk = std::max<std::int64_t>(1, options.chunk);
  const std::int64_t bits = bundle.arch.message_bits;
  const std::int64_t side = bundle.arch.image_side;

  EvalReport report;
  report.images = n;
  report.message_bits = bits;
  report.bpp = bits_per_pixel(bits, side, side, 3);
  report.transforms.resize(transforms.size());
  for (std::size_t t = 0; t < transforms.size(); ++t) {
    report.transforms[t].name = transforms[t].name;
    report.transforms[t].malicious = transforms[t].malicious;
  }

  if (!options.export_watermarked_dir.empty()) fs::create_directories(options.export_watermarked_dir);

  std::vector<torch::Tensor> all_messages(n);
  double psnr_sum = 0, ssim_sum = 0;

  for (std::int64_t start = 0; start < n; start += chunk) {
    const std::int64_t count = std::min(chunk, n - start);
    auto idx = torch::arange(start, start + count, torch::kInt64);
    auto x = testset.image_batch(idx);
    auto masks = testset.mask_batch(idx);

    auto s = torch::empty({count, bits}, torch::kFloat32);
    for (std::int64_t i = 0; i < count; ++i) {
      const std::string name = fs::path(testset.files[start + i]).filename().string();
      auto msg = generate_message(options.message_key, name, static_cast<int>(bits));
      s[i] = message_to_tensor(msg);
      all_messages[start + i] = s[i];
    }

    auto x_w = models.encoder->forward(x, s);
    for (std::int64_t i = 0; i < count; ++i) {
      auto a = quantize_8bit(x[i]), b = quantize_8bit(x_w[i]);
      double p = psnr(a, b);
      psnr_sum += std::isinf(p) ? 100.0 : p;
      ssim_sum += ssim(a, b);
      if (!options.export_watermarked_dir.empty()) {
        const std::string name = fs::path(testset.files[start + i]).filename().string();
        save_image(x_w[i], (fs::path(options.export_watermarked_dir) / name).string());
      }
    }

    for (std::size_t t = 0; t < transforms.size(); ++t) {
      std::vector<torch::Tensor> ys(count);
      for (std::int64_t i = 0; i < count; ++i) ys[i] = transforms[t].apply(x_w[i], x[i], masks[i]);
      auto soft = models.decoder->forward(torch::stack(ys)).soft_bits;
      auto bra = per_image_bra(s, soft);
      auto& dst = report.transforms[t].per_image;
      dst.insert(dst.end(), bra.begin(), bra.end());
    }
  }

  report.psnr_mean = psnr_sum / static_cast<double>(n);
  report.ssim_mean = ssim_sum / static_cast<double>(n);

  // externally manipulated copies of the exported watermarked images
  for (const auto& [label, dir] : options.external_malicious_dirs) {
    TransformResult ext;
    ext.name = "external:" + label;
    ext.malicious = true;
    for (std::int64_t i = 0; i < n; ++i) {
      const std::string name = fs::path(testset.files[i]).filename().string();
      const fs::path path = fs::path(dir) / name;
      if (!fs::exists(path)) continue;
      auto img = center_crop_resize(load_image(path.string()), side);
      auto soft = models.decoder->forward(img.unsqueeze(0)).soft_bits;
      ext.per_image.push_back(bit_recovery_accuracy(all_messages[i].unsqueeze(0), soft));
    }
    if (!ext.per_image.empty()) report.transforms.push_back(std::move(ext));
  }

  std::vector<double> benign, malicious;
  for (auto& t : report.transforms) {
    t.bra_mean = vec_mean(t.per_image);
    t.bra_std = vec_std(t.per_image);
    auto& sink = t.malicious ? malicious : benign;
    sink.insert(sink.end(), t.per_image.begin(), t.per_image.end());
  }
  if (!benign.empty() && !malicious.empty()) report.roc = roc_auc(benign, malicious);
  return report;
}

double perturbation_copy_attack(const ModelBundle& bundle, const torch::Tensor& sources,
                                const torch::Tensor& targets, const torch::Tensor& messages) {
  if (sources.sizes() != targets.sizes()) throw std::invalid_argument("copy_attack: source/target shape mismatch");
  if (messages.size(0) != sources.size(0)) throw std::invalid_argument("copy_attack: one message per pair required");
  torch::NoGradGuard guard;
  auto& models = const_cast<ModelBundle&>(bundle);
  models.train(false);

  const std::int64_t n = sources.size(0), chunk = 16;
  double total = 0;
  for (std::int64_t start = 0; start < n; start += chunk) {
    const std::int64_t count = std::min(chunk, n - start);
    auto src = sources.slice(0, start, start + count);
    auto dst = targets.slice(0, start, start + count);
    auto msg = messages.slice(0, start, start + count);
    auto x_w = models.encoder->forward(src, msg);
    auto delta = x_w - src;
    auto forged = (dst + delta).clamp(0, 1);
    auto soft = models.decoder->forward(forged).soft_bits;
    for (double b : per_image_bra(msg, soft)) total += b;
  }
  return total / static_cast<double>(n);
}

}  // namespace faceseal
