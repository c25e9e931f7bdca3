#include "faceseal/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "faceseal/common.hpp"
#include "faceseal/image.hpp"
#include "faceseal/malicious.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace faceseal {

std::vector<std::string> Manifest::files(const std::string& split) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back((fs::path(root) / e.file).string());
  return out;
}

std::size_t Manifest::count(const std::string& split) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.split == split ? 1 : 0;
  return n;
}

void Manifest::save() const {
  json j;
  j["side"] = side;
  j["seed"] = seed;
  json list = json::array();
  for (const auto& e : entries) list.push_back({{"file", e.file}, {"split", e.split}});
  j["entries"] = list;
  std::ofstream out(fs::path(root) / "manifest.json");
  if (!out) throw io_error("cannot write manifest in " + root);
  out << j.dump(2) << "\n";
}

Manifest Manifest::load(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw io_error("no manifest.json in " + dir);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw format_error(std::string("bad manifest: ") + e.what());
  }
  Manifest m;
  m.root = dir;
  m.side = j.at("side").get<std::int64_t>();
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& e : j.at("entries"))
    m.entries.push_back({e.at("file").get<std::string>(), e.at("split").get<std::string>()});
  return m;
}

torch::Tensor FaceDataset::image_batch(const torch::Tensor& indices) const {
  return images.index_select(0, indices).to(torch::kFloat32).div_(255.0f);
}

torch::Tensor FaceDataset::mask_batch(const torch::Tensor& indices) const {
  return feature_masks.index_select(0, indices).to(torch::kFloat32);
}

torch::Tensor FaceDataset::image(std::int64_t i) const {
  return images[i].to(torch::kFloat32).div_(255.0f);
}

torch::Tensor FaceDataset::mask(std::int64_t i) const { return feature_masks[i].to(torch::kFloat32); }

FaceDataset FaceDataset::load(const Manifest& manifest, const std::string& split, PolygonProvider& polygons,
                              const std::string& on_missing_polygons) {
  if (on_missing_polygons != "error" && on_missing_polygons != "skip")
    throw config_error("on_missing_polygons must be \"error\" or \"skip\"");
  auto paths = manifest.files(split);
  if (paths.empty()) throw config_error("dataset split '" + split + "' is empty");

  std::vector<torch::Tensor> imgs, masks;
  std::vector<std::string> kept;
  for (const auto& path : paths) {
    auto poly = polygons.polygons_for(path);
    if (!poly) {
      if (on_missing_polygons == "error") throw config_error("no polygons for " + path);
      std::cerr << "warning: skipping " << path << " (no polygon sidecar)\n";
      continue;
    }
    auto img = load_image(path);
    if (img.size(1) != manifest.side || img.size(2) != manifest.side)
      throw config_error("image " + path + " does not match manifest side " + std::to_string(manifest.side));
    imgs.push_back(img.mul(255.0f).round().to(torch::kUInt8));
    masks.push_back(rasterize_polygons(poly->all(), manifest.side, manifest.side).to(torch::kUInt8).unsqueeze(0));
    kept.push_back(path);
  }
  if (imgs.empty()) throw config_error("dataset split '" + split + "' has no usable images");

  FaceDataset ds;
  ds.images = torch::stack(imgs);
  ds.feature_masks = torch::stack(masks);
  ds.files = std::move(kept);
  return ds;
}

}  // namespace faceseal
