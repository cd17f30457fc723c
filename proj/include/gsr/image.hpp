#pragma once

#include "gsr/common.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gsr {

/// H x W linear-radiance RGB image with accumulated opacity.
///
/// Pixels are stored row-major, top row first. Values are kept in double
/// precision in memory; the float map format stores 32-bit floats.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;    // 3 * width * height
  std::vector<double> alpha;  // width * height, may be empty

  ImageBuffer() = default;
  ImageBuffer(int w, int h, bool with_alpha = true)
      : width(w), height(h), rgb(static_cast<std::size_t>(3) * w * h, 0.0) {
    if (with_alpha) alpha.assign(static_cast<std::size_t>(w) * h, 0.0);
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return width <= 0 || height <= 0; }
  bool has_alpha() const { return !alpha.empty(); }

  double& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  Vec3 pixel(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void set_pixel(int x, int y, const Vec3& v) {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = v.x();
    rgb[i + 1] = v.y();
    rgb[i + 2] = v.z();
  }

  bool same_shape(const ImageBuffer& o) const { return width == o.width && height == o.height; }
};

/// Equirectangular environment map: an ImageBuffer without alpha.
///
/// Texel (u, v) center maps to polar angle theta = pi (v + 0.5) / H measured
/// from +y (up) and azimuth phi = 2 pi (u + 0.5) / W, with direction
/// (sin theta sin phi, cos theta, sin theta cos phi). phi = 0 faces +z, the
/// asset's frontal axis.
using EnvMap = ImageBuffer;

inline Vec3 envmap_direction(double theta, double phi) {
  const double st = std::sin(theta);
  return {st * std::sin(phi), std::cos(theta), st * std::cos(phi)};
}

inline Vec3 envmap_texel_direction(const EnvMap& env, int u, int v) {
  const double theta = kPi * (v + 0.5) / env.height;
  const double phi = 2.0 * kPi * (u + 0.5) / env.width;
  return envmap_direction(theta, phi);
}

inline EnvMap make_constant_envmap(int w, int h, const Vec3& value) {
  EnvMap env(w, h, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) env.set_pixel(x, y, value);
  return env;
}

/// Rotates the map about the vertical axis by angle_rad: the rotated map
/// at azimuth phi holds the source radiance at phi - angle. Columns are
/// linearly interpolated with wrap-around.
inline EnvMap rotate_envmap(const EnvMap& env, double angle_rad) {
  EnvMap out(env.width, env.height, false);
  const double shift = angle_rad / (2.0 * kPi) * env.width;
  for (int y = 0; y < env.height; ++y) {
    for (int x = 0; x < env.width; ++x) {
      const double src = x - shift;
      const double fl = std::floor(src);
      const double t = src - fl;
      int x0 = static_cast<int>(fl) % env.width;
      if (x0 < 0) x0 += env.width;
      const int x1 = (x0 + 1) % env.width;
      out.set_pixel(x, y, (1.0 - t) * env.pixel(x0, y) + t * env.pixel(x1, y));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Portable float map (PFM): "PF" header, little-endian floats (scale < 0),
// rows stored bottom-to-top.

inline std::vector<std::uint8_t> encode_pfm(const ImageBuffer& img) {
  const std::string header = "PF\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.pixel_count() * 12);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(x, y, c)));
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff));
      }
    }
  }
  return out;
}

inline void write_pfm(const ImageBuffer& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  const auto bytes = encode_pfm(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

inline ImageBuffer read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0)
    throw Error(ErrorCode::kParse, "malformed PFM header: " + path);
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  ImageBuffer img(w, h, false);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * channels * 4);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw Error(ErrorCode::kTruncated, "PFM payload truncated: " + path);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const unsigned char* p = &row[(static_cast<std::size_t>(x) * channels + (channels == 3 ? c : 0)) * 4];
        const std::uint32_t bits =
            little ? (p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24))
                   : (p[3] | (p[2] << 8) | (p[1] << 16) | (static_cast<std::uint32_t>(p[0]) << 24));
        img.at(x, y, c) = std::bit_cast<float>(bits);
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// 8-bit PNG with a gamma 2.2 transfer curve.

inline std::uint8_t encode_gamma_8bit(double linear) {
  const double v = std::pow(std::clamp(linear, 0.0, 1.0), 1.0 / 2.2);
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

inline double decode_gamma_8bit(std::uint8_t v) { return std::pow(v / 255.0, 2.2); }

namespace detail {
inline void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* buffer = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  buffer->insert(buffer->end(), data, data + length);
}
inline void png_flush_noop(png_structp) {}

struct PngReadCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};
inline void png_consume(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->data + cur->offset, length);
  cur->offset += length;
}
inline std::vector<std::uint8_t> png_write(const std::vector<std::uint8_t>& pixels, int width, int height,
                                           bool with_alpha) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "png: cannot allocate encoder");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "png: encode failed");
  }
  png_set_write_fn(png, &out, png_append, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               with_alpha ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * (with_alpha ? 4 : 3);
  for (int y = 0; y < height; ++y) png_write_row(png, &pixels[y * stride]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}
}  // namespace detail

/// Encodes rgb (and alpha when present) to PNG bytes in memory.
inline std::vector<std::uint8_t> encode_png(const ImageBuffer& img, bool include_alpha = false) {
  const bool with_alpha = include_alpha && img.has_alpha();
  const int channels = with_alpha ? 4 : 3;
  std::vector<std::uint8_t> pixels(img.pixel_count() * channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      std::uint8_t* p = &pixels[(static_cast<std::size_t>(y) * img.width + x) * channels];
      for (int c = 0; c < 3; ++c) p[c] = encode_gamma_8bit(img.at(x, y, c));
      if (with_alpha) {
        const double a = img.alpha[static_cast<std::size_t>(y) * img.width + x];
        p[3] = static_cast<std::uint8_t>(std::lround(std::clamp(a, 0.0, 1.0) * 255.0));
      }
    }
  }
  return detail::png_write(pixels, img.width, img.height, with_alpha);
}

/// Decodes PNG bytes to linear radiance (gamma 2.2 decode); 8-bit only.
inline ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw Error(ErrorCode::kParse, "not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIo, "png: cannot allocate decoder");
  }
  detail::PngReadCursor cursor{bytes.data(), bytes.size(), 0};
  ImageBuffer img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kParse, "png: decode failed");
  }
  png_set_read_fn(png, &cursor, detail::png_consume);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h * channels);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = &pixels[static_cast<std::size_t>(y) * w * channels];
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  img = ImageBuffer(w, h, channels == 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* p = &pixels[(static_cast<std::size_t>(y) * w + x) * channels];
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = decode_gamma_8bit(p[c]);
      if (channels == 4) img.alpha[static_cast<std::size_t>(y) * w + x] = p[3] / 255.0;
    }
  }
  return img;
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_png(const ImageBuffer& img, const std::string& path) {
  write_bytes(path, encode_png(img));
}

inline ImageBuffer read_png(const std::string& path) { return decode_png(read_bytes(path)); }

/// Loads a PFM or PNG by extension.
inline ImageBuffer read_image(const std::string& path) {
  auto ends_with = [&](const char* ext) {
    const std::size_t n = std::strlen(ext);
    return path.size() >= n && path.compare(path.size() - n, n, ext) == 0;
  };
  if (ends_with(".pfm") || ends_with(".PFM")) return read_pfm(path);
  if (ends_with(".png") || ends_with(".PNG")) return read_png(path);
  throw Error(ErrorCode::kParse, "unsupported image format: " + path);
}

}  // namespace gsr
