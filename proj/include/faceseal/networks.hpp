#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faceseal/common.hpp"

namespace faceseal {

/// Shape hyperparameters for the three networks. Width vectors left empty are
/// filled with defaults derived from the depth; depth 0 means log2(side).
struct ArchConfig {
  std::int64_t image_side = 256;
  std::int64_t message_bits = 128;
  std::int64_t projection_side = 96;   // message is projected to this square
  std::int64_t depth = 0;              // down/up stages per U-Net
  std::vector<std::int64_t> encoder_widths;
  std::vector<std::int64_t> decoder_widths;
  std::vector<std::int64_t> discriminator_widths;
  std::int64_t patch_side = 32;        // discriminator scores one 32x32 tile each

  /// Returns a copy with defaults filled in; throws config_error when the
  /// geometry does not work out (side not divisible by 2^depth or by the
  /// patch size).
  ArchConfig resolved() const;
  bool operator==(const ArchConfig&) const = default;
};

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);

/// U-Net with stride-2 down convolutions and up stages made of a convolution
/// followed by nearest-neighbour upsampling; skip connections by channel
/// concatenation; the head sees the full-resolution features together with
/// the raw input.
struct UNetBackboneImpl : torch::nn::Module {
  UNetBackboneImpl(std::int64_t in_channels, std::int64_t out_channels, std::vector<std::int64_t> widths,
                   std::int64_t side);
  torch::Tensor forward(const torch::Tensor& x);

  std::vector<torch::nn::Conv2d> down_convs;
  std::vector<torch::nn::InstanceNorm2d> down_norms;  // null slot where spatial size is 1
  std::vector<torch::nn::Conv2d> up_convs;
  std::vector<torch::nn::InstanceNorm2d> up_norms;
  torch::nn::Conv2d head{nullptr};
  std::int64_t side_ = 0;
  std::vector<std::int64_t> widths_;
};
TORCH_MODULE(UNetBackbone);

/// Embeds an L-bit message into an image as an additive residual.
struct EncoderNetImpl : torch::nn::Module {
  explicit EncoderNetImpl(const ArchConfig& arch);

  /// Watermarked image: clamp(image + residual(image, message), 0, 1).
  torch::Tensor forward(const torch::Tensor& image, const torch::Tensor& message);
  torch::Tensor residual(const torch::Tensor& image, const torch::Tensor& message);
  /// Message projection map before resizing, [N,1,P,P]; input to the
  /// optional auxiliary loss.
  torch::Tensor project_message(const torch::Tensor& message);

  torch::nn::Linear project{nullptr};
  UNetBackbone backbone{nullptr};
  ArchConfig arch_;
};
TORCH_MODULE(EncoderNet);

struct DecoderOutput {
  torch::Tensor soft_bits;    // [N,L], values in (0,1)
  torch::Tensor decoded_map;  // [N,1,P,P] intermediate map (s_ProjDecoded)
};

/// Recovers soft message bits from an image.
struct DecoderNetImpl : torch::nn::Module {
  explicit DecoderNetImpl(const ArchConfig& arch);
  DecoderOutput forward(const torch::Tensor& image);

  UNetBackbone backbone{nullptr};
  torch::nn::Linear readout{nullptr};
  ArchConfig arch_;
};
TORCH_MODULE(DecoderNet);

struct PatchScores {
  torch::Tensor grid;  // [N,1,G,G] per-patch probabilities, G = side/32
  torch::Tensor mean;  // [N]
};

/// Patch discriminator: three stride-2 blocks and a stride-4 scoring head,
/// one probability per 32x32 tile, averaged.
struct PatchDiscriminatorImpl : torch::nn::Module {
  explicit PatchDiscriminatorImpl(const ArchConfig& arch);
  PatchScores forward(const torch::Tensor& image);

  torch::nn::Sequential features{nullptr};
  torch::nn::Conv2d score{nullptr};
  ArchConfig arch_;
};
TORCH_MODULE(PatchDiscriminator);

struct ModelBundle {
  ArchConfig arch;
  EncoderNet encoder{nullptr};
  DecoderNet decoder{nullptr};
  PatchDiscriminator discriminator{nullptr};

  void train(bool on = true);
  void to(torch::Dtype dtype);
  std::vector<torch::Tensor> generator_parameters() const;  // encoder + decoder
  std::int64_t parameter_count() const;
};

/// Builds all three networks with a deterministic initialization.
ModelBundle init_models(const ArchConfig& arch, std::uint64_t seed);

// Convenience wrappers that accept CHW or NCHW (and [L] or [N,L] messages)
// and validate shapes against the bundle's configuration.
torch::Tensor encode(const ModelBundle& bundle, const torch::Tensor& image, const torch::Tensor& message);
DecoderOutput decode(const ModelBundle& bundle, const torch::Tensor& image);
PatchScores discriminate(const ModelBundle& bundle, const torch::Tensor& image);

}  // namespace faceseal
