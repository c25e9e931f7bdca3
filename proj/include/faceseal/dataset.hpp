#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "faceseal/sidecar.hpp"

namespace faceseal {

/// One ingested image and the split it was assigned to.
struct ManifestEntry {
  std::string file;   // file name relative to the manifest directory
  std::string split;  // "train" | "val" | "test"
};

struct Manifest {
  std::string root;
  std::int64_t side = 0;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::vector<std::string> files(const std::string& split) const;  // absolute paths
  std::size_t count(const std::string& split) const;

  void save() const;  // writes <root>/manifest.json
  static Manifest load(const std::string& dir);
};

/// In-memory split: images as uint8 plus rasterized facial-feature masks.
struct FaceDataset {
  torch::Tensor images;         // [N,3,S,S] uint8
  torch::Tensor feature_masks;  // [N,1,S,S] uint8, 1 inside feature polygons
  std::vector<std::string> files;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  std::int64_t side() const { return images.defined() ? images.size(2) : 0; }

  torch::Tensor image_batch(const torch::Tensor& indices) const;  // float32 [n,3,S,S]
  torch::Tensor mask_batch(const torch::Tensor& indices) const;   // float32 [n,1,S,S]
  torch::Tensor image(std::int64_t i) const;                      // float32 [3,S,S]
  torch::Tensor mask(std::int64_t i) const;                       // float32 [1,S,S]

  /// Loads a split. `on_missing_polygons` is "error" or "skip"; skipped
  /// images are dropped with a warning on stderr.
  static FaceDataset load(const Manifest& manifest, const std::string& split, PolygonProvider& polygons,
                          const std::string& on_missing_polygons = "error");
};

}  // namespace faceseal
