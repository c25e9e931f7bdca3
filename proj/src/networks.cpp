#include "faceseal/networks.hpp"

#include <cmath>

namespace faceseal {

namespace {

namespace F = torch::nn::functional;

std::vector<std::int64_t> default_widths(std::int64_t depth, std::int64_t base, std::int64_t cap) {
  std::vector<std::int64_t> w(depth);
  for (std::int64_t i = 0; i < depth; ++i) w[i] = std::min(base << i, cap);
  return w;
}

void init_weights(torch::nn::Module& m) {
  torch::NoGradGuard guard;
  if (auto* conv = m.as<torch::nn::Conv2d>()) {
    torch::nn::init::normal_(conv->weight, 0.0, 0.02);
    if (conv->bias.defined()) torch::nn::init::zeros_(conv->bias);
  } else if (auto* linear = m.as<torch::nn::Linear>()) {
    torch::nn::init::normal_(linear->weight, 0.0, 0.02);
    torch::nn::init::zeros_(linear->bias);
  } else if (auto* norm = m.as<torch::nn::InstanceNorm2d>()) {
    if (norm->weight.defined()) torch::nn::init::normal_(norm->weight, 1.0, 0.02);
    if (norm->bias.defined()) torch::nn::init::zeros_(norm->bias);
  }
}

torch::Tensor bilinear_resize(const torch::Tensor& x, std::int64_t h, std::int64_t w) {
  return F::interpolate(
      x, F::InterpolateFuncOptions().size(std::vector<std::int64_t>{h, w}).mode(torch::kBilinear).align_corners(false));
}

std::pair<torch::Tensor, bool> as_image_batch(const torch::Tensor& t, const ArchConfig& arch, const char* what) {
  if (!t.defined() || (t.dim() != 3 && t.dim() != 4))
    throw std::invalid_argument(std::string(what) + ": expected CHW or NCHW image tensor");
  auto x = t.dim() == 3 ? t.unsqueeze(0) : t;
  if (x.size(1) != 3 || x.size(2) != arch.image_side || x.size(3) != arch.image_side)
    throw std::invalid_argument(std::string(what) + ": expected 3x" + std::to_string(arch.image_side) + "x" +
                                std::to_string(arch.image_side) + " images");
  return {x, t.dim() == 3};
}

}  // namespace

ArchConfig ArchConfig::resolved() const {
  ArchConfig a = *this;
  if (a.image_side < 2) throw config_error("arch: image side too small");
  if (a.message_bits < 1) throw config_error("arch: message length must be positive");
  if (a.projection_side < 1) throw config_error("arch: projection side must be positive");
  if (a.depth == 0) {
    std::int64_t d = 0, s = a.image_side;
    while (s % 2 == 0 && s > 1) {
      s /= 2;
      ++d;
    }
    a.depth = d;
  }
  if (a.depth < 1) throw config_error("arch: depth must be at least 1");
  const std::int64_t div = std::int64_t{1} << a.depth;
  if (a.image_side % div != 0 || a.image_side / div < 1)
    throw config_error("arch: image side " + std::to_string(a.image_side) + " is not divisible by 2^" +
                       std::to_string(a.depth));
  if (a.patch_side < 1 || a.image_side % (a.patch_side) != 0 || a.image_side % 32 != 0)
    throw config_error("arch: image side must be a multiple of the 32-pixel patch size");
  if (a.encoder_widths.empty()) a.encoder_widths = default_widths(a.depth, 32, 256);
  if (a.decoder_widths.empty()) a.decoder_widths = a.encoder_widths;
  if (a.discriminator_widths.empty()) a.discriminator_widths = {64, 128, 256};
  if (static_cast<std::int64_t>(a.encoder_widths.size()) != a.depth ||
      static_cast<std::int64_t>(a.decoder_widths.size()) != a.depth)
    throw config_error("arch: width list length must equal depth");
  if (a.discriminator_widths.size() != 3) throw config_error("arch: discriminator takes exactly 3 block widths");
  return a;
}

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = nlohmann::json{{"image_side", a.image_side},
                     {"message_bits", a.message_bits},
                     {"projection_side", a.projection_side},
                     {"depth", a.depth},
                     {"encoder_widths", a.encoder_widths},
                     {"decoder_widths", a.decoder_widths},
                     {"discriminator_widths", a.discriminator_widths},
                     {"patch_side", a.patch_side}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  a = ArchConfig{};
  a.image_side = j.value("image_side", a.image_side);
  a.message_bits = j.value("message_bits", a.message_bits);
  a.projection_side = j.value("projection_side", a.projection_side);
  a.depth = j.value("depth", a.depth);
  a.encoder_widths = j.value("encoder_widths", a.encoder_widths);
  a.decoder_widths = j.value("decoder_widths", a.decoder_widths);
  a.discriminator_widths = j.value("discriminator_widths", a.discriminator_widths);
  a.patch_side = j.value("patch_side", a.patch_side);
}

// ---- U-Net backbone ----

UNetBackboneImpl::UNetBackboneImpl(std::int64_t in_channels, std::int64_t out_channels,
                                   std::vector<std::int64_t> widths, std::int64_t side)
    : side_(side), widths_(std::move(widths)) {
  const std::int64_t depth = static_cast<std::int64_t>(widths_.size());
  std::int64_t ch = in_channels;
  std::int64_t spatial = side;
  for (std::int64_t i = 0; i < depth; ++i) {
    auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, widths_[i], 4).stride(2).padding(1));
    down_convs.push_back(register_module("down_" + std::to_string(i), conv));
    spatial /= 2;
    if (spatial > 1) {
      auto norm = torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(widths_[i]).affine(true));
      down_norms.push_back(register_module("down_norm_" + std::to_string(i), norm));
    } else {
      down_norms.push_back(nullptr);
    }
    ch = widths_[i];
  }
  for (std::int64_t j = depth - 1; j >= 0; --j) {
    const std::int64_t in = j == depth - 1 ? widths_[j] : widths_[j + 1] + widths_[j];
    auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in, widths_[j], 3).padding(1));
    up_convs.push_back(register_module("up_" + std::to_string(j), conv));
    const std::int64_t up_spatial = side >> (j + 1);
    if (up_spatial > 1) {
      auto norm = torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(widths_[j]).affine(true));
      up_norms.push_back(register_module("up_norm_" + std::to_string(j), norm));
    } else {
      up_norms.push_back(nullptr);
    }
  }
  head = register_module("head",
                         torch::nn::Conv2d(torch::nn::Conv2dOptions(widths_[0] + in_channels, out_channels, 3).padding(1)));
}

torch::Tensor UNetBackboneImpl::forward(const torch::Tensor& x) {
  const std::int64_t depth = static_cast<std::int64_t>(widths_.size());
  std::vector<torch::Tensor> skips(depth);
  auto h = x;
  for (std::int64_t i = 0; i < depth; ++i) {
    h = down_convs[i](h);
    if (down_norms[i]) h = down_norms[i](h);
    h = torch::leaky_relu(h, 0.2);
    skips[i] = h;
  }
  for (std::int64_t k = 0; k < depth; ++k) {
    const std::int64_t j = depth - 1 - k;  // up_convs[k] belongs to stage j
    if (j < depth - 1) h = torch::cat({h, skips[j]}, 1);
    h = up_convs[k](h);
    if (up_norms[k]) h = up_norms[k](h);
    h = torch::relu(h);
    h = F::interpolate(h, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
  }
  return head(torch::cat({h, x}, 1));
}

// ---- Encoder ----

EncoderNetImpl::EncoderNetImpl(const ArchConfig& arch) : arch_(arch.resolved()) {
  project = register_module(
      "project", torch::nn::Linear(arch_.message_bits, arch_.projection_side * arch_.projection_side));
  backbone = register_module("backbone",
                             UNetBackbone(4, 3, arch_.encoder_widths, arch_.image_side));
}

torch::Tensor EncoderNetImpl::project_message(const torch::Tensor& message) {
  if (message.dim() != 2 || message.size(1) != arch_.message_bits)
    throw std::invalid_argument("encoder: message must be [N," + std::to_string(arch_.message_bits) + "]");
  auto p = project(message);
  return p.view({message.size(0), 1, arch_.projection_side, arch_.projection_side});
}

torch::Tensor EncoderNetImpl::residual(const torch::Tensor& image, const torch::Tensor& message) {
  auto proj = project_message(message);
  auto channel = bilinear_resize(proj, arch_.image_side, arch_.image_side);
  return backbone(torch::cat({image, channel}, 1));
}

torch::Tensor EncoderNetImpl::forward(const torch::Tensor& image, const torch::Tensor& message) {
  return (image + residual(image, message)).clamp(0, 1);
}

// ---- Decoder ----

DecoderNetImpl::DecoderNetImpl(const ArchConfig& arch) : arch_(arch.resolved()) {
  backbone = register_module("backbone",
                             UNetBackbone(3, 1, arch_.decoder_widths, arch_.image_side));
  readout = register_module(
      "readout", torch::nn::Linear(arch_.projection_side * arch_.projection_side, arch_.message_bits));
}

DecoderOutput DecoderNetImpl::forward(const torch::Tensor& image) {
  auto full = backbone(image);
  auto map = bilinear_resize(full, arch_.projection_side, arch_.projection_side);
  auto soft = torch::sigmoid(readout(map.flatten(1)));
  return {soft, map};
}

// ---- Discriminator ----

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const ArchConfig& arch) : arch_(arch.resolved()) {
  const auto& w = arch_.discriminator_widths;
  features = torch::nn::Sequential();
  std::int64_t ch = 3;
  for (int i = 0; i < 3; ++i) {
    features->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, w[i], 4).stride(2).padding(1)));
    if (i > 0) features->push_back(torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(w[i]).affine(true)));
    features->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    ch = w[i];
  }
  register_module("features", features);
  // stride-8 features; a non-overlapping stride-4 head makes each score cover
  // one 32x32 tile of the input
  score = register_module("score", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, 1, 4).stride(4)));
}

PatchScores PatchDiscriminatorImpl::forward(const torch::Tensor& image) {
  auto h = features->forward(image);
  auto grid = torch::sigmoid(score(h));
  return {grid, grid.mean({1, 2, 3})};
}

// ---- Bundle ----

void ModelBundle::train(bool on) {
  encoder->train(on);
  decoder->train(on);
  discriminator->train(on);
}

void ModelBundle::to(torch::Dtype dtype) {
  encoder->to(dtype);
  decoder->to(dtype);
  discriminator->to(dtype);
}

std::vector<torch::Tensor> ModelBundle::generator_parameters() const {
  auto params = encoder->parameters();
  auto dec = decoder->parameters();
  params.insert(params.end(), dec.begin(), dec.end());
  return params;
}

std::int64_t ModelBundle::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : encoder->parameters()) n += p.numel();
  for (const auto& p : decoder->parameters()) n += p.numel();
  for (const auto& p : discriminator->parameters()) n += p.numel();
  return n;
}

ModelBundle init_models(const ArchConfig& arch, std::uint64_t seed) {
  ModelBundle b;
  b.arch = arch.resolved();
  torch::manual_seed(seed);
  b.encoder = EncoderNet(b.arch);
  b.decoder = DecoderNet(b.arch);
  b.discriminator = PatchDiscriminator(b.arch);
  b.encoder->apply(init_weights);
  b.decoder->apply(init_weights);
  b.discriminator->apply(init_weights);
  return b;
}

torch::Tensor encode(const ModelBundle& bundle, const torch::Tensor& image, const torch::Tensor& message) {
  auto [x, single] = as_image_batch(image, bundle.arch, "encode");
  auto m = message.dim() == 1 ? message.unsqueeze(0) : message;
  if (m.dim() != 2 || m.size(1) != bundle.arch.message_bits)
    throw std::invalid_argument("encode: message must have length " + std::to_string(bundle.arch.message_bits));
  if (m.size(0) != x.size(0)) throw std::invalid_argument("encode: batch size mismatch between images and messages");
  auto out = const_cast<ModelBundle&>(bundle).encoder->forward(x, m.to(x.scalar_type()));
  return single ? out.squeeze(0) : out;
}

DecoderOutput decode(const ModelBundle& bundle, const torch::Tensor& image) {
  auto [x, single] = as_image_batch(image, bundle.arch, "decode");
  auto out = const_cast<ModelBundle&>(bundle).decoder->forward(x);
  if (single) {
    out.soft_bits = out.soft_bits.squeeze(0);
    out.decoded_map = out.decoded_map.squeeze(0);
  }
  return out;
}

PatchScores discriminate(const ModelBundle& bundle, const torch::Tensor& image) {
  auto [x, single] = as_image_batch(image, bundle.arch, "discriminate");
  auto out = const_cast<ModelBundle&>(bundle).discriminator->forward(x);
  if (single) {
    out.grid = out.grid.squeeze(0);
    out.mean = out.mean.squeeze(0);
  }
  return out;
}

}  // namespace faceseal
