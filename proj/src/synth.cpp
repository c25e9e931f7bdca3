#include "faceseal/synth.hpp"

#include <cmath>
#include <filesystem>

#include "faceseal/benign.hpp"
#include "faceseal/image.hpp"
#include "faceseal/malicious.hpp"

namespace fs = std::filesystem;

namespace faceseal {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Draw {
  std::mt19937_64& rng;
  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return u(rng);
  }
  torch::Tensor color(double r0, double r1, double g0, double g1, double b0, double b1) {
    return torch::tensor({static_cast<float>(uniform(r0, r1)), static_cast<float>(uniform(g0, g1)),
                          static_cast<float>(uniform(b0, b1))});
  }
};

Polygon ellipse_polygon(double cx, double cy, double rx, double ry, double rot_deg = 0.0, int segments = 16) {
  Polygon poly;
  const double rot = rot_deg * kPi / 180.0;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * kPi * i / segments;
    const double x = rx * std::cos(a), y = ry * std::sin(a);
    poly.push_back({cx + x * std::cos(rot) - y * std::sin(rot), cy + x * std::sin(rot) + y * std::cos(rot)});
  }
  return poly;
}

void fill_polygon(torch::Tensor& canvas, const Polygon& poly, const torch::Tensor& color, double alpha = 1.0) {
  auto mask = rasterize_polygons({poly}, canvas.size(1), canvas.size(2)).unsqueeze(0) * alpha;
  canvas = canvas * (1.0 - mask) + color.view({3, 1, 1}) * mask;
}

torch::Tensor gradient_background(Draw& d, std::int64_t h, std::int64_t w) {
  auto c0 = d.color(0.1, 0.9, 0.1, 0.9, 0.1, 0.9);
  auto c1 = d.color(0.1, 0.9, 0.1, 0.9, 0.1, 0.9);
  const double angle = d.uniform(0, 2 * kPi);
  auto ys = torch::arange(h, torch::kFloat32).view({h, 1}).expand({h, w}) / static_cast<double>(h);
  auto xs = torch::arange(w, torch::kFloat32).view({1, w}).expand({h, w}) / static_cast<double>(w);
  auto t = (0.5 + 0.5 * (std::cos(angle) * (xs - 0.5) + std::sin(angle) * (ys - 0.5)) * 2.0).clamp(0, 1);
  auto bg = c0.view({3, 1, 1}) * (1.0 - t) + c1.view({3, 1, 1}) * t;

  // a couple of soft blobs for texture
  for (int i = 0; i < 2; ++i) {
    const double bx = d.uniform(0.0, w), by = d.uniform(0.0, h);
    const double r = d.uniform(0.15, 0.4) * std::min(h, w);
    auto blob = torch::exp(-((xs * w - bx).pow(2) + (ys * h - by).pow(2)) / (2 * r * r));
    bg = bg * (1.0 - 0.35 * blob) + d.color(0, 1, 0, 1, 0, 1).view({3, 1, 1}) * 0.35 * blob;
  }
  return bg.clamp(0, 1);
}

// Draws one face onto the canvas; feature polygons come back in canvas
// coordinates.
FacePolygons draw_face(Draw& d, torch::Tensor& canvas, double cx, double cy, double size) {
  const double tilt = d.uniform(-4.0, 4.0);
  auto skin = d.color(0.55, 0.95, 0.45, 0.8, 0.35, 0.7);
  auto hair = d.color(0.05, 0.5, 0.03, 0.35, 0.02, 0.3);
  auto iris = d.color(0.1, 0.6, 0.2, 0.6, 0.3, 0.9);
  auto lipc = d.color(0.55, 0.85, 0.15, 0.4, 0.2, 0.4);

  const double head_rx = size * d.uniform(0.27, 0.33);
  const double head_ry = size * d.uniform(0.34, 0.40);

  fill_polygon(canvas, ellipse_polygon(cx, cy - head_ry * 0.45, head_rx * 1.15, head_ry * 0.85, tilt, 20), hair);
  fill_polygon(canvas, ellipse_polygon(cx, cy, head_rx, head_ry, tilt, 24), skin);

  const double eye_dx = size * d.uniform(0.10, 0.14);
  const double eye_y = cy - size * d.uniform(0.06, 0.10);
  const double eye_rx = size * d.uniform(0.045, 0.06);
  const double eye_ry = eye_rx * d.uniform(0.5, 0.65);

  FacePolygons polys;
  for (int side_i : {-1, 1}) {
    const double ex = cx + side_i * eye_dx;
    fill_polygon(canvas, ellipse_polygon(ex, eye_y, eye_rx, eye_ry, tilt, 14), torch::tensor({0.95f, 0.95f, 0.95f}));
    fill_polygon(canvas, ellipse_polygon(ex, eye_y, eye_ry * 0.8, eye_ry * 0.8, 0, 10), iris);
    fill_polygon(canvas, ellipse_polygon(ex, eye_y, eye_ry * 0.35, eye_ry * 0.35, 0, 8),
                 torch::tensor({0.05f, 0.05f, 0.05f}));
    // brow
    fill_polygon(canvas,
                 ellipse_polygon(ex, eye_y - eye_ry * 2.2, eye_rx * 1.05, eye_ry * 0.35, tilt + side_i * 4, 10),
                 hair, 0.9);
    polys.eyes.push_back(ellipse_polygon(ex, eye_y, eye_rx * 1.3, eye_ry * 1.6, tilt, 12));
  }

  const double nose_y = cy + size * d.uniform(0.02, 0.05);
  const double nose_w = size * d.uniform(0.035, 0.055);
  const double nose_h = size * d.uniform(0.10, 0.14);
  Polygon nose{{cx, nose_y - nose_h * 0.55}, {cx - nose_w, nose_y + nose_h * 0.45}, {cx + nose_w, nose_y + nose_h * 0.45}};
  fill_polygon(canvas, nose, skin * 0.82, 0.9);
  polys.nose = {{cx, nose_y - nose_h * 0.7}, {cx - nose_w * 1.35, nose_y + nose_h * 0.6},
                {cx + nose_w * 1.35, nose_y + nose_h * 0.6}};

  const double lip_y = cy + size * d.uniform(0.17, 0.22);
  const double lip_rx = size * d.uniform(0.07, 0.10);
  const double lip_ry = lip_rx * d.uniform(0.30, 0.42);
  fill_polygon(canvas, ellipse_polygon(cx, lip_y, lip_rx, lip_ry, tilt, 14), lipc);
  polys.lips = ellipse_polygon(cx, lip_y, lip_rx * 1.25, lip_ry * 1.5, tilt, 12);
  return polys;
}

void clamp_polygons(FacePolygons& polys, std::int64_t h, std::int64_t w) {
  auto clamp_poly = [&](Polygon& p) {
    for (auto& v : p) {
      v[0] = std::clamp(v[0], 0.0, static_cast<double>(w - 1));
      v[1] = std::clamp(v[1], 0.0, static_cast<double>(h - 1));
    }
  };
  for (auto& e : polys.eyes) clamp_poly(e);
  clamp_poly(polys.nose);
  clamp_poly(polys.lips);
}

}  // namespace

SynthFace make_synthetic_face(std::mt19937_64& rng, std::int64_t side) {
  if (side < 32) throw std::invalid_argument("make_synthetic_face: side must be >= 32");
  Draw d{rng};
  auto canvas = gradient_background(d, side, side);
  const double cx = side * d.uniform(0.46, 0.54);
  const double cy = side * d.uniform(0.48, 0.56);
  auto polys = draw_face(d, canvas, cx, cy, static_cast<double>(side));
  clamp_polygons(polys, side, side);

  canvas = gaussian_blur(canvas, 3);
  canvas = (canvas + 0.012 * torch::randn_like(canvas)).clamp(0, 1);
  return {canvas, polys};
}

void write_synthetic_dataset(const std::string& dir, std::int64_t count, std::int64_t side, std::uint64_t seed) {
  fs::create_directories(dir);
  for (std::int64_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(i + 1)));
    torch::manual_seed(static_cast<std::uint64_t>(seed + i));  // noise draws
    auto face = make_synthetic_face(rng, side);
    char name[32];
    std::snprintf(name, sizeof(name), "face_%06lld", static_cast<long long>(i));
    save_image(face.image, (fs::path(dir) / (std::string(name) + ".png")).string());
    Sidecar sc;
    sc.image = std::string(name) + ".png";
    sc.polygons = face.polygons;
    save_sidecar(sc, (fs::path(dir) / (std::string(name) + ".json")).string());
  }
}

TwoFaceComposite make_two_face_composite(std::mt19937_64& rng, std::int64_t face_side, std::int64_t pad) {
  Draw d{rng};
  const std::int64_t h = face_side + 2 * pad;
  const std::int64_t w = 2 * face_side + 3 * pad;
  TwoFaceComposite out;
  out.image = gradient_background(d, h, w);
  for (int i = 0; i < 2; ++i) {
    auto face = make_synthetic_face(rng, face_side);
    FaceBox box;
    box.x0 = pad + i * (face_side + pad);
    box.y0 = pad;
    box.side = face_side;
    out.image.slice(1, box.y0, box.y0 + face_side).slice(2, box.x0, box.x0 + face_side).copy_(face.image);
    auto shift = [&](Polygon p) {
      for (auto& v : p) {
        v[0] += static_cast<double>(box.x0);
        v[1] += static_cast<double>(box.y0);
      }
      return p;
    };
    FacePolygons moved;
    for (const auto& e : face.polygons.eyes) moved.eyes.push_back(shift(e));
    moved.nose = shift(face.polygons.nose);
    moved.lips = shift(face.polygons.lips);
    out.boxes.push_back(box);
    out.polygons.push_back(std::move(moved));
  }
  return out;
}

}  // namespace faceseal
