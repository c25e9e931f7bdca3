#pragma once

#include <torch/torch.h>

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faceseal/dataset.hpp"
#include "faceseal/message.hpp"
#include "faceseal/networks.hpp"

namespace faceseal {

/// Percent of bits recovered after hardening the soft output at 0.5.
double bit_recovery_accuracy(const MessageBits& s, const SoftBits& s_hat);
double bit_recovery_accuracy(const torch::Tensor& s, const torch::Tensor& soft);  // [N,L] vs [N,L], mean
std::vector<double> per_image_bra(const torch::Tensor& s, const torch::Tensor& soft);

/// Capacity in bits per pixel: L / (H*W*C).
double bits_per_pixel(std::int64_t message_bits, std::int64_t height, std::int64_t width, std::int64_t channels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // BRA percent; scores <= threshold are called manipulated
};

struct RocResult {
  std::vector<RocPoint> points;  // nondecreasing in both coordinates
  double auc = 0.0;
};

/// Detector quality when flagging an image as manipulated whenever its BRA
/// falls at or below a threshold. Thresholds sweep the observed values;
/// trapezoidal area.
RocResult roc_auc(const std::vector<double>& benign_bra, const std::vector<double>& malicious_bra);

/// One evaluation-time distortion. Evaluation transforms see the watermarked
/// image plus the original and feature mask so tamper proxies can blend.
struct EvalTransform {
  std::string name;
  bool malicious = false;
  std::function<torch::Tensor(const torch::Tensor& x_w, const torch::Tensor& x, const torch::Tensor& mask)> apply;
};

EvalTransform identity_eval();
EvalTransform codec_jpeg_eval(int quality);     // through the real codec
EvalTransform saturation_eval(double weight);
EvalTransform contrast_eval(double factor);
EvalTransform blur_eval(int kernel);
EvalTransform down_up_eval(double scale);
EvalTransform shift_rotate_eval(int dy, int dx, double deg);
EvalTransform tamper_eval(double retention);    // facial-feature watermark removal

/// Held-out benchmark set: codec JPEG levels, color jitter, geometry, plus
/// the mask-based tamper proxy at two strengths.
std::vector<EvalTransform> default_eval_transforms();

struct TransformResult {
  std::string name;
  bool malicious = false;
  double bra_mean = 0.0;
  double bra_std = 0.0;
  std::vector<double> per_image;  // kept so detectors can re-threshold later
};

/// Published full-scale results of the original system, recorded in reports
/// for context; desk-scale runs are not expected to reproduce them.
struct FullScaleReference {
  double psnr = 36.08;
  double ssim = 0.975;
  double bpp = 6.5e-4;
  double bra_none = 99.68;
  double bra_jpg75 = 99.49;
  double bra_jpg50 = 98.38;
  double bra_aden = 97.40;
  double bra_brooklyn = 98.34;
  double bra_clarendon = 99.32;
  double bra_simswap = 64.93;
  double bra_fsft = 52.21;
  double bra_faceswap = 31.77;
  double detector_auc = 0.996;
  double multiface_bra = 99.50;
  double copy_attack_bra = 17.6;
};
inline constexpr FullScaleReference kFullScaleReference{};

struct EvalReport {
  std::int64_t images = 0;
  std::int64_t message_bits = 0;
  double bpp = 0.0;
  double psnr_mean = 0.0;  // original vs watermarked, 8-bit quantized
  double ssim_mean = 0.0;
  std::vector<TransformResult> transforms;
  RocResult roc;  // all benign entries vs all malicious entries

  const TransformResult* find(const std::string& name) const;
  nlohmann::json to_json() const;
};

struct EvalOptions {
  std::vector<EvalTransform> transforms;  // empty -> default_eval_transforms()
  std::int64_t max_images = 0;            // 0 -> whole split
  std::int64_t chunk = 16;
  std::string message_key = "faceseal-eval";  // per-image message = keyed hash of the file name
  std::string export_watermarked_dir;         // when set, watermarked test images are written here
  // name -> directory of externally manipulated copies of exported images;
  // files are matched by name and scored as malicious entries
  std::vector<std::pair<std::string, std::string>> external_malicious_dirs;
};

/// Embeds per-image messages into the test split, applies every transform and
/// reports per-transform BRA plus imperceptibility and detector quality.
EvalReport transform_benchmark(const ModelBundle& bundle, const FaceDataset& testset, const EvalOptions& options = {});

/// Watermark-transplant attack: residuals extracted from source images are
/// pasted onto targets; returns the mean BRA the decoder still achieves
/// against the transplanted messages.
double perturbation_copy_attack(const ModelBundle& bundle, const torch::Tensor& sources,
                                const torch::Tensor& targets, const torch::Tensor& messages);

}  // namespace faceseal
