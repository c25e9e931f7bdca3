#include "faceseal/sidecar.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "faceseal/common.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace faceseal {

namespace {

json polygon_to_json(const Polygon& p) {
  json arr = json::array();
  for (const auto& v : p) arr.push_back({static_cast<std::int64_t>(std::llround(v[0])),
                                         static_cast<std::int64_t>(std::llround(v[1]))});
  return arr;
}

Polygon polygon_from_json(const json& arr) {
  Polygon p;
  for (const auto& v : arr) p.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  return p;
}

}  // namespace

std::string sidecar_path_for(const std::string& image_path) {
  fs::path p(image_path);
  p.replace_extension(".json");
  return p.string();
}

Sidecar load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open sidecar: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw format_error("bad sidecar " + path + ": " + e.what());
  }
  Sidecar sc;
  sc.image = j.value("image", "");
  if (j.contains("polygons")) {
    const auto& p = j["polygons"];
    if (p.contains("eyes"))
      for (const auto& eye : p["eyes"]) sc.polygons.eyes.push_back(polygon_from_json(eye));
    if (p.contains("nose")) sc.polygons.nose = polygon_from_json(p["nose"]);
    if (p.contains("lips")) sc.polygons.lips = polygon_from_json(p["lips"]);
  }
  if (j.contains("faces")) {
    for (const auto& f : j["faces"]) {
      FaceBox box;
      box.x0 = f.at("x0").get<std::int64_t>();
      box.y0 = f.at("y0").get<std::int64_t>();
      box.side = f.at("side").get<std::int64_t>();
      box.source = f.value("source", "sidecar");
      sc.faces.push_back(box);
    }
  }
  return sc;
}

void save_sidecar(const Sidecar& sc, const std::string& path) {
  json j;
  j["image"] = sc.image;
  json eyes = json::array();
  for (const auto& e : sc.polygons.eyes) eyes.push_back(polygon_to_json(e));
  j["polygons"] = {{"eyes", eyes},
                   {"nose", polygon_to_json(sc.polygons.nose)},
                   {"lips", polygon_to_json(sc.polygons.lips)}};
  if (!sc.faces.empty()) {
    json faces = json::array();
    for (const auto& f : sc.faces)
      faces.push_back({{"x0", f.x0}, {"y0", f.y0}, {"side", f.side}, {"source", f.source}});
    j["faces"] = faces;
  }
  std::ofstream out(path);
  if (!out) throw io_error("cannot write sidecar: " + path);
  out << j.dump(2) << "\n";
}

std::optional<FacePolygons> SidecarPolygonProvider::polygons_for(const std::string& image_path) {
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(image_path);
    if (it != cache_.end()) return it->second;
  }
  std::optional<FacePolygons> result;
  const std::string sidecar = sidecar_path_for(image_path);
  if (fs::exists(sidecar)) {
    auto sc = load_sidecar(sidecar);
    if (!sc.polygons.empty()) result = sc.polygons;
  }
  std::unique_lock lock(mutex_);
  cache_[image_path] = result;
  return result;
}

}  // namespace faceseal
