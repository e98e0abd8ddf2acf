#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "meshsal/error.hpp"
#include "meshsal/mesh.hpp"

namespace meshsal {

using Color = Eigen::Vector3d;

/// RGB image with channels in [0,1], rows stored top to bottom.
class TextureImage {
 public:
  TextureImage() = default;
  TextureImage(int width, int height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) throw InputError("texture dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
      throw InputError("texture pixel buffer does not match its dimensions");
    }
    for (double c : pixels_) {
      if (!(c >= 0.0 && c <= 1.0)) throw InputError("texture channel value outside [0,1]");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  Color pixel(int row, int col) const {
    const double* p = &pixels_[(static_cast<std::size_t>(row) * width_ + col) * 3];
    return {p[0], p[1], p[2]};
  }
  const std::vector<double>& data() const { return pixels_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Bilinear stencil: four pixels and their normalized area weights.
struct BilinearStencil {
  std::array<int, 4> row{};
  std::array<int, 4> col{};
  std::array<double, 4> weight{};
};

/// UV (0,0) is the bottom-left of the image, so row = (1 - v) * H - 0.5 in
/// continuous pixel-center coordinates. Queries past the outermost pixel
/// centers clamp to the edge row/column.
inline BilinearStencil bilinear_stencil(int width, int height, const Vec2& uv) {
  // Snap rounding noise so queries at pixel centers return the pixel exactly.
  auto snap = [](double p) {
    const double r = std::round(p);
    return std::abs(p - r) < 1e-10 ? r : p;
  };
  const double x = std::clamp(snap(uv.x() * width - 0.5), 0.0, static_cast<double>(width - 1));
  const double y = std::clamp(snap((1.0 - uv.y()) * height - 0.5), 0.0, static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(std::floor(x)), width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  BilinearStencil s;
  s.row = {y0, y0, y1, y1};
  s.col = {x0, x1, x0, x1};
  s.weight = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  return s;
}

/// Continuous texture lookup with bilinear interpolation of the four nearest
/// pixel centers.
inline Color sample_uv(const TextureImage& tex, const Vec2& uv) {
  const BilinearStencil s = bilinear_stencil(tex.width(), tex.height(), uv);
  Color c = Color::Zero();
  for (int k = 0; k < 4; ++k) {
    if (s.weight[k] != 0.0) c += s.weight[k] * tex.pixel(s.row[k], s.col[k]);
  }
  return c;
}

namespace detail {

inline TextureImage from_rgb8(int width, int height, const std::uint8_t* bytes) {
  std::vector<double> px(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = bytes[i] / 255.0;
  return TextureImage(width, height, std::move(px));
}

inline TextureImage load_ppm(const std::string& path, const std::vector<std::uint8_t>& buf) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long long {
    for (;;) {
      while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
      if (pos < buf.size() && buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= buf.size() || !std::isdigit(buf[pos])) throw InputError("malformed PPM header: " + path);
    long long value = 0;
    while (pos < buf.size() && std::isdigit(buf[pos])) {
      value = value * 10 + (buf[pos] - '0');
      if (value > (1LL << 30)) throw InputError("PPM dimension too large: " + path);
      ++pos;
    }
    return value;
  };
  const long long w = next_token();
  const long long h = next_token();
  const long long maxval = next_token();
  if (maxval != 255) throw InputError("unsupported PPM maxval " + std::to_string(maxval) + " (only 255): " + path);
  if (w < 1 || h < 1) throw InputError("PPM has zero size: " + path);
  if (pos >= buf.size() || !std::isspace(buf[pos])) throw InputError("malformed PPM header: " + path);
  ++pos;  // single whitespace before raster
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (buf.size() - pos < need) throw InputError("truncated PPM raster: " + path);
  return from_rgb8(static_cast<int>(w), static_cast<int>(h), buf.data() + pos);
}

inline TextureImage load_png(const std::string& path, const std::vector<std::uint8_t>& buf) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size())) {
    throw InputError("cannot decode PNG " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raster.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw InputError("cannot decode PNG " + path + ": " + msg);
  }
  return from_rgb8(static_cast<int>(image.width), static_cast<int>(image.height), raster.data());
}

}  // namespace detail

/// Loads a binary PPM (P6, maxval 255) or an 8-bit PNG; channel = byte / 255.
inline TextureImage load_texture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open texture file: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() >= 2 && buf[0] == 'P' && buf[1] == '6') return detail::load_ppm(path, buf);
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() >= 8 && std::equal(kPngMagic, kPngMagic + 8, buf.begin())) return detail::load_png(path, buf);
  throw InputError("unsupported texture format (expected P6 PPM or PNG): " + path);
}

inline std::vector<std::uint8_t> to_rgb8(const TextureImage& tex) {
  std::vector<std::uint8_t> bytes(tex.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(tex.data()[i] * 255.0));
  }
  return bytes;
}

inline void save_ppm(const std::string& path, const TextureImage& tex) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write texture file: " + path);
  out << "P6\n" << tex.width() << ' ' << tex.height() << "\n255\n";
  const auto bytes = to_rgb8(tex);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void save_png(const std::string& path, const TextureImage& tex) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(tex.width());
  image.height = static_cast<png_uint_32>(tex.height());
  image.format = PNG_FORMAT_RGB;
  const auto bytes = to_rgb8(tex);
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw InputError("cannot write PNG " + path + ": " + image.message);
  }
}

}  // namespace meshsal
