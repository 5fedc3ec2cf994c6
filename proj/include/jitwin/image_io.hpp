#pragma once

#include <png.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "jitwin/error.hpp"
#include "jitwin/mask.hpp"

namespace jitwin {

/// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  bool operator==(const Image&) const = default;
};

inline Image read_png(const std::filesystem::path& path, int channels) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw Error(ErrorCode::kIoError, path.string() + ": " + img.message);
  }
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image out{static_cast<int>(img.width), static_cast<int>(img.height), channels, {}};
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kIoError, path.string() + ": " + img.message);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError, path.string() + ": " + img.message);
  }
}

/// Foreground = 255, background = 0.
inline Image mask_to_image(const BinaryMask& m) {
  Image img{m.width(), m.height(), 1, std::vector<std::uint8_t>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i) img.pixels[i] = m[i] ? 255 : 0;
  return img;
}

/// Any non-zero gray value counts as foreground.
inline BinaryMask image_to_mask(const Image& img) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = img.pixels[i * img.channels] != 0;
  return BinaryMask(img.width, img.height, std::move(bits));
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j, int indent = -1) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << j.dump(indent) << "\n";
}

/// Reads a mask stored as RLE JSON (.json) or single-channel PNG (.png).
inline BinaryMask read_mask_file(const std::filesystem::path& path) {
  if (path.extension() == ".png") return image_to_mask(read_png(path, 1));
  return rle_decode(read_json_file(path).get<RleMask>());
}

inline void write_mask_file(const std::filesystem::path& path, const BinaryMask& m) {
  if (path.extension() == ".png") {
    write_png(path, mask_to_image(m));
  } else {
    write_json_file(path, nlohmann::json(rle_encode(m)));
  }
}

/// Alpha-blends `color` over the masked pixels of an RGB(A) frame.
inline Image overlay(Image frame, const BinaryMask& m, std::array<std::uint8_t, 3> color, double alpha = 0.5) {
  if (frame.width != m.width() || frame.height != m.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) + ", mask is " +
                    std::to_string(m.width()) + "x" + std::to_string(m.height()));
  }
  if (frame.channels < 3) throw Error(ErrorCode::kDimensionMismatch, "overlay needs an RGB frame");
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      if (!m.at(x, y)) continue;
      std::uint8_t* px = frame.at(x, y);
      for (int c = 0; c < 3; ++c) {
        px[c] = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * px[c] + alpha * color[static_cast<std::size_t>(c)]));
      }
    }
  return frame;
}

}  // namespace jitwin
