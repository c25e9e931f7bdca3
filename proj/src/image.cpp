#include "faceseal/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>

namespace faceseal {

namespace {

namespace F = torch::nn::functional;

struct FileHandle {
  std::FILE* fp = nullptr;
  explicit FileHandle(const std::string& path, const char* mode) : fp(std::fopen(path.c_str(), mode)) {}
  ~FileHandle() {
    if (fp) std::fclose(fp);
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
};

torch::Tensor tensor_from_rgb8(const std::vector<std::uint8_t>& rgb, std::int64_t h, std::int64_t w) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(rgb.data()), {h, w, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0f);
}

std::vector<std::uint8_t> rgb8_from_tensor(const torch::Tensor& img) {
  auto bytes = img.mul(255.0f).round().clamp(0, 255).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  const auto* p = bytes.data_ptr<std::uint8_t>();
  return std::vector<std::uint8_t>(p, p + bytes.numel());
}

// ---- PNG ----

torch::Tensor load_png(std::FILE* fp, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("png: out of memory reading " + path);
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("png: failed to decode " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return tensor_from_rgb8(pixels, h, w);
}

void save_png(const torch::Tensor& img, const std::string& path) {
  auto rgb = rgb8_from_tensor(img);
  const std::int64_t h = img.size(1), w = img.size(2);

  FileHandle file(path, "wb");
  if (!file.fp) throw io_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    throw io_error("png: out of memory writing " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("png: failed to write " + path);
  }
  png_init_io(png, file.fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (std::int64_t y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- JPEG ----

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

[[noreturn]] void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

torch::Tensor decode_jpeg_impl(const std::uint8_t* data, std::size_t size, const std::string& what) {
  jpeg_decompress_struct cinfo{};
  JpegErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw io_error("jpeg: failed to decode " + what);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const std::int64_t w = cinfo.output_width, h = cinfo.output_height;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return tensor_from_rgb8(pixels, h, w);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  FileHandle file(path, "rb");
  if (!file.fp) throw io_error("cannot open: " + path);
  std::fseek(file.fp, 0, SEEK_END);
  long size = std::ftell(file.fp);
  std::fseek(file.fp, 0, SEEK_SET);
  if (size < 0) throw io_error("cannot read: " + path);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && std::fread(bytes.data(), 1, bytes.size(), file.fp) != bytes.size())
    throw io_error("cannot read: " + path);
  return bytes;
}

}  // namespace

bool is_image(const torch::Tensor& t) {
  if (!t.defined() || t.dim() != 3 || t.size(0) != 3) return false;
  if (t.scalar_type() != torch::kFloat32 && t.scalar_type() != torch::kFloat64) return false;
  return t.size(1) >= 1 && t.size(2) >= 1;
}

void require_image(const torch::Tensor& t, const char* what) {
  if (!is_image(t)) throw std::invalid_argument(std::string(what) + ": expected a 3xHxW float image tensor");
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.defined() || !b.defined() || a.sizes() != b.sizes())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

torch::Tensor load_image(const std::string& path) {
  auto bytes = read_file_bytes(path);
  static const std::uint8_t png_sig[8] = {0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) {
    FileHandle file(path, "rb");
    if (!file.fp) throw io_error("cannot open: " + path);
    return load_png(file.fp, path);
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return decode_jpeg_impl(bytes.data(), bytes.size(), path);
  }
  throw format_error("unsupported image format: " + path);
}

void save_image(const torch::Tensor& img, const std::string& path, ImageFormat format, int quality) {
  require_image(img, "save_image");
  if (format == ImageFormat::jpeg && (quality < 1 || quality > 100))
    throw std::invalid_argument("save_image: quality must be in 1..100");
  if (format == ImageFormat::png) {
    save_png(img.to(torch::kFloat32), path);
    return;
  }
  auto bytes = encode_jpeg(img, quality);
  FileHandle file(path, "wb");
  if (!file.fp) throw io_error("cannot open for writing: " + path);
  if (std::fwrite(bytes.data(), 1, bytes.size(), file.fp) != bytes.size())
    throw io_error("short write: " + path);
}

std::vector<std::uint8_t> encode_jpeg(const torch::Tensor& img, int quality) {
  require_image(img, "encode_jpeg");
  if (quality < 1 || quality > 100) throw std::invalid_argument("encode_jpeg: quality must be in 1..100");
  auto rgb = rgb8_from_tensor(img.to(torch::kFloat32));
  const std::int64_t h = img.size(1), w = img.size(2);

  jpeg_compress_struct cinfo{};
  JpegErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;

  unsigned char* out = nullptr;
  unsigned long out_size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    if (out) free(out);
    throw io_error("jpeg: encode failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &out, &out_size);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  // 4:4:4, no chroma subsampling; keeps the codec aligned with the
  // differentiable approximation used in training.
  cinfo.comp_info[0].h_samp_factor = 1;
  cinfo.comp_info[0].v_samp_factor = 1;
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * w * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> bytes(out, out + out_size);
  free(out);
  return bytes;
}

torch::Tensor decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  return decode_jpeg_impl(bytes.data(), bytes.size(), "<memory>");
}

torch::Tensor jpeg_codec_roundtrip(const torch::Tensor& img, int quality) {
  return decode_jpeg(encode_jpeg(img, quality));
}

torch::Tensor center_crop_resize(const torch::Tensor& img, std::int64_t side) {
  require_image(img, "center_crop_resize");
  if (side < 1) throw std::invalid_argument("center_crop_resize: side must be >= 1");
  const std::int64_t h = img.size(1), w = img.size(2);
  const std::int64_t s = std::min(h, w);
  const std::int64_t top = (h - s) / 2, left = (w - s) / 2;
  auto crop = img.slice(1, top, top + s).slice(2, left, left + s);
  if (s == side) return crop.clone();
  auto out = F::interpolate(crop.unsqueeze(0),
                            F::InterpolateFuncOptions()
                                .size(std::vector<std::int64_t>{side, side})
                                .mode(torch::kBilinear)
                                .align_corners(false))
                 .squeeze(0);
  return out.clamp_(0, 1);
}

torch::Tensor quantize_8bit(const torch::Tensor& img) {
  return img.mul(255.0).round().clamp(0, 255).div(255.0);
}

torch::Tensor rgb_to_gray(const torch::Tensor& img, bool replicate) {
  auto gray = 0.299 * img.select(-3, 0) + 0.587 * img.select(-3, 1) + 0.114 * img.select(-3, 2);
  gray = gray.unsqueeze(-3);
  if (replicate) {
    std::vector<std::int64_t> reps(gray.dim(), 1);
    reps[gray.dim() - 3] = 3;
    gray = gray.repeat(reps);
  }
  return gray.to(img.scalar_type());
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  require_same_shape(a, b, "psnr");
  double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>();
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
  require_image(a, "ssim");
  require_same_shape(a, b, "ssim");
  if (a.size(1) < 11 || a.size(2) < 11) throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  auto x = a.to(torch::kFloat64).unsqueeze(0);
  auto y = b.to(torch::kFloat64).unsqueeze(0);

  torch::Tensor g1 = torch::empty({11}, torch::kFloat64);
  for (int i = 0; i < 11; ++i) g1[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2.0 * 1.5 * 1.5));
  auto win = torch::outer(g1, g1);
  win /= win.sum();
  auto weight = win.view({1, 1, 11, 11}).repeat({3, 1, 1, 1});

  auto filt = [&](const torch::Tensor& t) {
    return F::conv2d(t, weight, F::Conv2dFuncOptions().groups(3));
  };
  auto mu_x = filt(x), mu_y = filt(y);
  auto sig_x = filt(x * x) - mu_x * mu_x;
  auto sig_y = filt(y * y) - mu_y * mu_y;
  auto sig_xy = filt(x * y) - mu_x * mu_y;

  auto map = ((2 * mu_x * mu_y + c1) * (2 * sig_xy + c2)) /
             ((mu_x * mu_x + mu_y * mu_y + c1) * (sig_x + sig_y + c2));
  return map.mean().item<double>();
}

QualityReport compare_images(const torch::Tensor& a, const torch::Tensor& b) {
  QualityReport r;
  r.psnr = psnr(a, b);
  r.ssim = ssim(a, b);
  auto aq = quantize_8bit(a), bq = quantize_8bit(b);
  r.psnr_quantized = psnr(aq, bq);
  r.ssim_quantized = ssim(aq, bq);
  return r;
}

}  // namespace faceseal
