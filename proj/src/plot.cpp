#include "faceseal/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "faceseal/image.hpp"

namespace faceseal {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used
struct Glyph {
  char c;
  unsigned char rows[7];
};

const Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
};

const Glyph* find_glyph(char c) {
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont)
    if (g.c == u) return &g;
  return nullptr;
}

void put_pixel(torch::Tensor& canvas, std::int64_t y, std::int64_t x, const float rgb[3]) {
  if (y < 0 || x < 0 || y >= canvas.size(1) || x >= canvas.size(2)) return;
  for (int c = 0; c < 3; ++c) canvas[c][y][x] = rgb[c];
}

void draw_text(torch::Tensor& canvas, std::int64_t y, std::int64_t x, const std::string& text, const float rgb[3]) {
  std::int64_t cx = x;
  for (char ch : text) {
    if (const auto* g = find_glyph(ch)) {
      for (int r = 0; r < 7; ++r)
        for (int b = 0; b < 5; ++b)
          if (g->rows[r] & (1 << (4 - b))) put_pixel(canvas, y + r, cx + b, rgb);
    }
    cx += 6;
  }
}

void draw_line(torch::Tensor& canvas, double y0, double x0, double y1, double x1, const float rgb[3]) {
  const double steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = i / steps;
    put_pixel(canvas, static_cast<std::int64_t>(std::lround(y0 + t * (y1 - y0))),
              static_cast<std::int64_t>(std::lround(x0 + t * (x1 - x0))), rgb);
  }
}

void fill_rect(torch::Tensor& canvas, std::int64_t y0, std::int64_t x0, std::int64_t y1, std::int64_t x1,
               const float rgb[3]) {
  for (std::int64_t y = y0; y < y1; ++y)
    for (std::int64_t x = x0; x < x1; ++x) put_pixel(canvas, y, x, rgb);
}

constexpr float kBlack[3] = {0.1f, 0.1f, 0.1f};
constexpr float kGray[3] = {0.75f, 0.75f, 0.75f};
constexpr float kBlue[3] = {0.15f, 0.35f, 0.8f};
constexpr float kRed[3] = {0.85f, 0.25f, 0.2f};

}  // namespace

void render_roc_plot(const RocResult& roc, const std::string& path) {
  const std::int64_t H = 420, W = 480, m = 50;
  auto canvas = torch::ones({3, H, W}, torch::kFloat32);
  auto px = [&](double fpr) { return m + fpr * (W - 2 * m); };
  auto py = [&](double tpr) { return H - m - tpr * (H - 2 * m); };

  for (double g : {0.25, 0.5, 0.75}) {
    draw_line(canvas, py(g), px(0), py(g), px(1), kGray);
    draw_line(canvas, py(0), px(g), py(1), px(g), kGray);
  }
  draw_line(canvas, py(0), px(0), py(0), px(1), kBlack);
  draw_line(canvas, py(0), px(0), py(1), px(0), kBlack);
  draw_line(canvas, py(0), px(0), py(1), px(1), kGray);  // chance

  for (std::size_t i = 1; i < roc.points.size(); ++i)
    draw_line(canvas, py(roc.points[i - 1].tpr), px(roc.points[i - 1].fpr), py(roc.points[i].tpr),
              px(roc.points[i].fpr), kBlue);

  draw_text(canvas, H - m + 10, (W - 30) / 2, "FPR", kBlack);
  draw_text(canvas, m - 20, m, "TPR", kBlack);
  char label[32];
  std::snprintf(label, sizeof(label), "AUC=%.3f", roc.auc);
  draw_text(canvas, py(0.08), px(0.55), label, kBlack);
  draw_text(canvas, H - m + 10, px(0) - 6, "0", kBlack);
  draw_text(canvas, H - m + 10, px(1) - 6, "1", kBlack);
  save_image(canvas, path);
}

void render_bra_bars(const EvalReport& report, const std::string& path) {
  const std::int64_t n = static_cast<std::int64_t>(report.transforms.size());
  const std::int64_t row_h = 22, top = 30, left = 150, right = 70;
  const std::int64_t H = top * 2 + n * row_h, W = 560;
  auto canvas = torch::ones({3, H, W}, torch::kFloat32);
  const std::int64_t span = W - left - right;

  draw_text(canvas, 8, left, "BIT RECOVERY (%)", kBlack);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& t = report.transforms[i];
    const std::int64_t y = top + i * row_h;
    std::string name = t.name.size() > 22 ? t.name.substr(0, 22) : t.name;
    draw_text(canvas, y + 5, 8, name, kBlack);
    const auto len = static_cast<std::int64_t>(span * std::clamp(t.bra_mean, 0.0, 100.0) / 100.0);
    fill_rect(canvas, y + 3, left, y + row_h - 5, left + len, t.malicious ? kRed : kBlue);
    char v[16];
    std::snprintf(v, sizeof(v), "%.1f", t.bra_mean);
    draw_text(canvas, y + 5, left + len + 6, v, kBlack);
  }
  draw_line(canvas, top - 4, left, top + n * row_h, left, kBlack);
  save_image(canvas, path);
}

}  // namespace faceseal
