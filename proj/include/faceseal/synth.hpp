#pragma once

#include <torch/torch.h>

#include <random>
#include <string>
#include <vector>

#include "faceseal/sidecar.hpp"

namespace faceseal {

// Procedural face images with known facial-feature polygons. Stand-in for a
// face dataset plus landmark detector: every image ships with the exact
// eye/nose/lip polygons that were drawn, so training and evaluation are fully
// reproducible offline.

struct SynthFace {
  torch::Tensor image;  // [3,S,S] float in [0,1]
  FacePolygons polygons;
};

SynthFace make_synthetic_face(std::mt19937_64& rng, std::int64_t side);

/// Writes `count` faces (PNG) plus polygon sidecars into `dir`. Per-image
/// seeds derive from `seed` and the index, so subsets are stable.
void write_synthetic_dataset(const std::string& dir, std::int64_t count, std::int64_t side, std::uint64_t seed);

struct TwoFaceComposite {
  torch::Tensor image;  // [3,H,W]
  std::vector<FaceBox> boxes;
  std::vector<FacePolygons> polygons;  // per face, in composite coordinates
};

/// Two faces pasted side by side on a shared background; boxes and polygons
/// are reported in composite coordinates.
TwoFaceComposite make_two_face_composite(std::mt19937_64& rng, std::int64_t face_side, std::int64_t pad = 16);

}  // namespace faceseal
