#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "faceseal/malicious.hpp"

namespace faceseal {

/// Square face bounding box, used by the multi-face pipeline.
struct FaceBox {
  std::int64_t x0 = 0;
  std::int64_t y0 = 0;
  std::int64_t side = 0;
  std::string source = "sidecar";
};

/// Per-image sidecar record: facial feature polygons and optional face boxes.
/// Stored as `<image stem>.json` next to the image.
struct Sidecar {
  std::string image;  // image file name (no directory)
  FacePolygons polygons;
  std::vector<FaceBox> faces;
};

std::string sidecar_path_for(const std::string& image_path);

Sidecar load_sidecar(const std::string& path);
void save_sidecar(const Sidecar& sc, const std::string& path);

/// Source of facial feature polygons for an image. The default implementation
/// reads sidecar files; a detector-backed provider can be plugged in without
/// touching the training or evaluation code.
class PolygonProvider {
 public:
  virtual ~PolygonProvider() = default;
  /// Returns nullopt when no polygons are available for the image.
  virtual std::optional<FacePolygons> polygons_for(const std::string& image_path) = 0;
};

/// Reads `<stem>.json` sidecars and caches them per path.
class SidecarPolygonProvider : public PolygonProvider {
 public:
  std::optional<FacePolygons> polygons_for(const std::string& image_path) override;

 private:
  std::shared_mutex mutex_;
  std::unordered_map<std::string, std::optional<FacePolygons>> cache_;
};

}  // namespace faceseal
