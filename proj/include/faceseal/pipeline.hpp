#pragma once

#include <string>
#include <vector>

#include "faceseal/dataset.hpp"
#include "faceseal/image.hpp"
#include "faceseal/message.hpp"
#include "faceseal/networks.hpp"
#include "faceseal/sidecar.hpp"

namespace faceseal {

struct IngestOptions {
  std::int64_t side = 256;
  std::uint64_t seed = 1;
  std::int64_t max_test = 1000;
};

/// Center-crops/resizes every image in `src_dir` to side x side PNGs under
/// `out_dir`, carries polygon/box sidecars through the same geometry, and
/// writes a deterministic seeded split manifest: test = min(max_test, N/5),
/// the remainder 80% train / 20% val.
Manifest ingest_dataset(const std::string& src_dir, const std::string& out_dir, const IngestOptions& options = {});

struct EmbedOptions {
  ImageFormat format = ImageFormat::png;
  int quality = 95;  // jpeg only
};

struct EmbedResult {
  QualityReport quality;  // watermarked vs. preprocessed input
};

/// Loads, center-crops/resizes to the model side, embeds the message and
/// writes the watermarked image.
EmbedResult embed_image_file(const ModelBundle& bundle, const std::string& in_path, const MessageBits& message,
                             const std::string& out_path, const EmbedOptions& options = {});

struct VerifyResult {
  std::string decoded_hex;
  double bra = 0.0;         // percent agreement with the expected message
  bool authentic = false;   // bra >= threshold
  double threshold = 85.0;
};

VerifyResult verify_image(const ModelBundle& bundle, const torch::Tensor& image, const MessageBits& expected,
                          double threshold_percent = 85.0);
VerifyResult verify_image_file(const ModelBundle& bundle, const std::string& path, const MessageBits& expected,
                               double threshold_percent = 85.0);

/// Embeds one message per face box (or one shared message): each crop is
/// resized to the model side, watermarked, resized back and pasted. Pixels
/// outside the boxes are untouched. Overlapping boxes are processed in order;
/// later boxes overwrite the overlap.
torch::Tensor multiface_embed(const ModelBundle& bundle, const torch::Tensor& image,
                              const std::vector<FaceBox>& boxes, const std::vector<MessageBits>& messages);

/// Per-face verification; the image is authentic only if every face is.
std::vector<VerifyResult> multiface_verify(const ModelBundle& bundle, const torch::Tensor& image,
                                           const std::vector<FaceBox>& boxes,
                                           const std::vector<MessageBits>& expected,
                                           double threshold_percent = 85.0);

}  // namespace faceseal
