// Generates procedural face datasets (images + polygon sidecars) so the
// toolkit can be trained and benchmarked without external data.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "faceseal/image.hpp"
#include "faceseal/synth.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"synthetic face dataset generator"};
  std::string out_dir;
  std::int64_t count = 100, side = 128, composites = 0;
  std::uint64_t seed = 7;
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--count", count, "Number of single-face images");
  app.add_option("--side", side, "Image side in pixels");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--composites", composites, "Additional two-face composites (with box sidecars)");
  CLI11_PARSE(app, argc, argv);

  try {
    faceseal::write_synthetic_dataset(out_dir, count, side, seed);
    for (std::int64_t i = 0; i < composites; ++i) {
      std::mt19937_64 rng(seed ^ (0xA24BAED4963EE407ULL * static_cast<std::uint64_t>(i + 1)));
      auto comp = faceseal::make_two_face_composite(rng, side);
      char name[32];
      std::snprintf(name, sizeof(name), "pair_%06lld", static_cast<long long>(i));
      faceseal::save_image(comp.image, (fs::path(out_dir) / (std::string(name) + ".png")).string());
      faceseal::Sidecar sc;
      sc.image = std::string(name) + ".png";
      sc.faces = comp.boxes;
      faceseal::save_sidecar(sc, (fs::path(out_dir) / (std::string(name) + ".json")).string());
    }
    std::cout << "wrote " << count << " faces";
    if (composites > 0) std::cout << " and " << composites << " composites";
    std::cout << " to " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
