#include "faceseal/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

namespace fs = std::filesystem;

namespace faceseal {

namespace {

namespace F = torch::nn::functional;

bool has_image_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// polygon coordinates through the same crop + resize as the pixels
Polygon map_polygon(const Polygon& poly, double left, double top, double scale, std::int64_t side) {
  Polygon out;
  out.reserve(poly.size());
  for (const auto& v : poly) {
    double x = (v[0] - left) * scale;
    double y = (v[1] - top) * scale;
    x = std::clamp(x, 0.0, static_cast<double>(side - 1));
    y = std::clamp(y, 0.0, static_cast<double>(side - 1));
    out.push_back({x, y});
  }
  return out;
}

torch::Tensor resize_to(const torch::Tensor& img, std::int64_t h, std::int64_t w) {
  return F::interpolate(img.unsqueeze(0),
                        F::InterpolateFuncOptions().size(std::vector<std::int64_t>{h, w}).mode(torch::kBilinear).align_corners(false))
      .squeeze(0)
      .clamp(0, 1);
}

void validate_boxes(const torch::Tensor& image, const std::vector<FaceBox>& boxes) {
  const std::int64_t h = image.size(1), w = image.size(2);
  if (boxes.empty()) throw std::invalid_argument("multiface: no face boxes given");
  for (const auto& b : boxes) {
    if (b.side < 32) throw std::invalid_argument("multiface: face box side must be >= 32");
    if (b.x0 < 0 || b.y0 < 0 || b.x0 + b.side > w || b.y0 + b.side > h)
      throw std::invalid_argument("multiface: face box out of image bounds");
  }
}

const MessageBits& message_for_face(const std::vector<MessageBits>& messages, std::size_t i) {
  if (messages.size() == 1) return messages[0];
  return messages[i];
}

}  // namespace

Manifest ingest_dataset(const std::string& src_dir, const std::string& out_dir, const IngestOptions& options) {
  if (options.side < 1) throw std::invalid_argument("ingest: side must be positive");
  std::vector<fs::path> sources;
  for (const auto& entry : fs::directory_iterator(src_dir))
    if (entry.is_regular_file() && has_image_extension(entry.path())) sources.push_back(entry.path());
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) throw io_error("ingest: no images in " + src_dir);

  fs::create_directories(out_dir);

  // deterministic seeded split: test first, remainder 80/20
  std::vector<std::size_t> order(sources.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = sources.size();
  const std::size_t n_test = std::min<std::size_t>(static_cast<std::size_t>(options.max_test), n / 5);
  const std::size_t n_train = static_cast<std::size_t>((n - n_test) * 0.8);

  std::vector<std::string> split(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const char* s = rank < n_test ? "test" : (rank < n_test + n_train ? "train" : "val");
    split[order[rank]] = s;
  }

  Manifest manifest;
  manifest.root = out_dir;
  manifest.side = options.side;
  manifest.seed = options.seed;

  for (std::size_t i = 0; i < n; ++i) {
    auto img = load_image(sources[i].string());
    const std::int64_t h = img.size(1), w = img.size(2);
    const std::int64_t crop = std::min(h, w);
    const double top = (h - crop) / 2.0, left = (w - crop) / 2.0;
    const double scale = static_cast<double>(options.side) / static_cast<double>(crop);

    auto out_img = center_crop_resize(img, options.side);
    const std::string out_name = sources[i].stem().string() + ".png";
    save_image(out_img, (fs::path(out_dir) / out_name).string());

    const std::string src_sidecar = sidecar_path_for(sources[i].string());
    if (fs::exists(src_sidecar)) {
      auto sc = load_sidecar(src_sidecar);
      Sidecar mapped;
      mapped.image = out_name;
      for (const auto& eye : sc.polygons.eyes)
        mapped.polygons.eyes.push_back(map_polygon(eye, left, top, scale, options.side));
      mapped.polygons.nose = map_polygon(sc.polygons.nose, left, top, scale, options.side);
      mapped.polygons.lips = map_polygon(sc.polygons.lips, left, top, scale, options.side);
      for (auto box : sc.faces) {
        box.x0 = static_cast<std::int64_t>(std::llround((box.x0 - left) * scale));
        box.y0 = static_cast<std::int64_t>(std::llround((box.y0 - top) * scale));
        box.side = static_cast<std::int64_t>(std::llround(box.side * scale));
        mapped.faces.push_back(box);
      }
      save_sidecar(mapped, (fs::path(out_dir) / (sources[i].stem().string() + ".json")).string());
    }
    manifest.entries.push_back({out_name, split[i]});
  }
  manifest.save();
  return manifest;
}

EmbedResult embed_image_file(const ModelBundle& bundle, const std::string& in_path, const MessageBits& message,
                             const std::string& out_path, const EmbedOptions& options) {
  if (message.length() != bundle.arch.message_bits)
    throw std::invalid_argument("embed: message has " + std::to_string(message.length()) + " bits, model expects " +
                                std::to_string(bundle.arch.message_bits));
  torch::NoGradGuard guard;
  const_cast<ModelBundle&>(bundle).train(false);
  auto x = center_crop_resize(load_image(in_path), bundle.arch.image_side);
  auto x_w = encode(bundle, x, message_to_tensor(message));
  save_image(x_w, out_path, options.format, options.quality);
  EmbedResult result;
  result.quality = compare_images(x, x_w);
  return result;
}

VerifyResult verify_image(const ModelBundle& bundle, const torch::Tensor& image, const MessageBits& expected,
                          double threshold_percent) {
  if (expected.length() != bundle.arch.message_bits)
    throw std::invalid_argument("verify: expected message has wrong length");
  torch::NoGradGuard guard;
  const_cast<ModelBundle&>(bundle).train(false);
  auto x = image;
  if (x.size(1) != bundle.arch.image_side || x.size(2) != bundle.arch.image_side)
    x = center_crop_resize(x, bundle.arch.image_side);
  auto soft = soft_from_tensor(decode(bundle, x).soft_bits);
  VerifyResult r;
  r.threshold = threshold_percent;
  r.decoded_hex = bits_to_hex(harden(soft));
  int match = 0;
  auto hard = harden(soft);
  for (int i = 0; i < expected.length(); ++i) match += hard.bits[i] == expected.bits[i] ? 1 : 0;
  r.bra = 100.0 * match / static_cast<double>(expected.length());
  r.authentic = r.bra >= threshold_percent;
  return r;
}

VerifyResult verify_image_file(const ModelBundle& bundle, const std::string& path, const MessageBits& expected,
                               double threshold_percent) {
  return verify_image(bundle, load_image(path), expected, threshold_percent);
}

torch::Tensor multiface_embed(const ModelBundle& bundle, const torch::Tensor& image,
                              const std::vector<FaceBox>& boxes, const std::vector<MessageBits>& messages) {
  require_image(image, "multiface_embed");
  validate_boxes(image, boxes);
  if (messages.size() != boxes.size() && messages.size() != 1)
    throw std::invalid_argument("multiface_embed: need one message per face or a single shared message");
  torch::NoGradGuard guard;
  const_cast<ModelBundle&>(bundle).train(false);

  auto out = image.clone();
  const std::int64_t side = bundle.arch.image_side;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const auto& msg = message_for_face(messages, i);
    if (msg.length() != bundle.arch.message_bits)
      throw std::invalid_argument("multiface_embed: message length mismatch");
    auto crop = out.slice(1, b.y0, b.y0 + b.side).slice(2, b.x0, b.x0 + b.side);
    auto resized = resize_to(crop, side, side);
    auto x_w = encode(bundle, resized, message_to_tensor(msg));
    auto back = resize_to(x_w, b.side, b.side);
    out.slice(1, b.y0, b.y0 + b.side).slice(2, b.x0, b.x0 + b.side).copy_(back);
  }
  return out;
}

std::vector<VerifyResult> multiface_verify(const ModelBundle& bundle, const torch::Tensor& image,
                                           const std::vector<FaceBox>& boxes,
                                           const std::vector<MessageBits>& expected, double threshold_percent) {
  require_image(image, "multiface_verify");
  validate_boxes(image, boxes);
  if (expected.size() != boxes.size() && expected.size() != 1)
    throw std::invalid_argument("multiface_verify: need one message per face or a single shared message");
  torch::NoGradGuard guard;
  const_cast<ModelBundle&>(bundle).train(false);

  std::vector<VerifyResult> results;
  const std::int64_t side = bundle.arch.image_side;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    auto crop = image.slice(1, b.y0, b.y0 + b.side).slice(2, b.x0, b.x0 + b.side);
    auto resized = resize_to(crop, side, side);
    results.push_back(verify_image(bundle, resized, message_for_face(expected, i), threshold_percent));
  }
  return results;
}

}  // namespace faceseal
