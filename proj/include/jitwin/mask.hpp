#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/error.hpp"

namespace jitwin {

/// Dense row-major binary mask. Pixel (x, y) lives at index y * width + x.
class BinaryMask {
 public:
  BinaryMask() = default;

  BinaryMask(int width, int height, bool fill = false) : width_(width), height_(height) {
    check_dims(width, height);
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
  }

  BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    check_dims(width, height);
    if (bits_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "bit count " + std::to_string(bits_.size()) + " != " + std::to_string(width) +
                      "x" + std::to_string(height));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set_flat(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const noexcept { return count() == 0; }

  bool same_shape(const BinaryMask& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  void fill_rect(int x, int y, int w, int h) {
    for (int yy = std::max(0, y); yy < std::min(height_, y + h); ++yy)
      for (int xx = std::max(0, x); xx < std::min(width_, x + w); ++xx) set(xx, yy);
  }

  BinaryMask complement() const {
    BinaryMask out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
  }

  bool operator==(const BinaryMask&) const = default;

 private:
  static void check_dims(int w, int h) {
    if (w < 1 || h < 1) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "mask dimensions must be >= 1, got " + std::to_string(w) + "x" + std::to_string(h));
    }
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Run-length form: counts alternate background/foreground over the row-major
/// flattening, starting with a (possibly zero) background run.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const RleMask&) const = default;
};

/// Real-valued mask with every value in [0, 1].
struct SoftMask {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  SoftMask() = default;
  SoftMask(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  static SoftMask from_binary(const BinaryMask& m) {
    SoftMask s(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) s.values[i] = m[i] ? 1.0 : 0.0;
    return s;
  }
};

struct Bbox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const noexcept { return static_cast<long long>(w) * h; }
  bool operator==(const Bbox&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

inline RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (auto b : mask.bits()) {
    if (b != current) {
      rle.counts.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

inline BinaryMask rle_decode(const RleMask& rle) {
  if (rle.width < 1 || rle.height < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "rle dimensions must be >= 1");
  }
  std::uint64_t total = 0;
  for (auto c : rle.counts) total += c;
  const auto expected = static_cast<std::uint64_t>(rle.width) * static_cast<std::uint64_t>(rle.height);
  if (total != expected) {
    throw Error(ErrorCode::kSumMismatch,
                "sum(counts)=" + std::to_string(total) + " but w*h=" + std::to_string(expected));
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(expected);
  std::uint8_t value = 0;
  for (auto c : rle.counts) {
    bits.insert(bits.end(), c, value);
    value ^= 1;
  }
  return BinaryMask(rle.width, rle.height, std::move(bits));
}

/// True when the counts obey the canonical form produced by rle_encode.
inline bool rle_is_canonical(const RleMask& rle) {
  if (rle.counts.empty()) return false;
  for (std::size_t i = 1; i < rle.counts.size(); ++i)
    if (rle.counts[i] == 0) return false;
  return true;
}

inline void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

/// |a ∩ b| / |a ∪ b|; two empty masks score 1.0.
inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0;
  std::size_t uni = 0;
  auto ab = a.bits();
  auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += ab[i] & bb[i];
    uni += ab[i] | bb[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline BinaryMask mask_union(std::span<const BinaryMask> masks, int width, int height) {
  BinaryMask out(width, height);
  std::vector<std::uint8_t> bits(out.size(), 0);
  for (const auto& m : masks) {
    require_same_shape(out, m);
    auto mb = m.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] |= mb[i];
  }
  return BinaryMask(width, height, std::move(bits));
}

/// Positive-area intersection; boxes that only share an edge do not intersect.
inline bool bbox_intersects(const Bbox& a, const Bbox& b) {
  const int ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const int iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return ix > 0 && iy > 0;
}

inline double bbox_iou(const Bbox& a, const Bbox& b) {
  const long long ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const long long iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const long long inter = ix * iy;
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline std::optional<Bbox> tight_bbox(const BinaryMask& m) {
  int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return std::nullopt;
  return Bbox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

/// Mean pixel coordinate of the foreground.
inline std::optional<Point> mask_centroid(const BinaryMask& m) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
  if (n == 0) return std::nullopt;
  return Point{sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

// RLE JSON: {"w": .., "h": .., "counts": [..]}
inline void to_json(nlohmann::json& j, const RleMask& r) {
  j = nlohmann::json{{"w", r.width}, {"h", r.height}, {"counts", r.counts}};
}

inline void from_json(const nlohmann::json& j, RleMask& r) {
  if (!j.is_object() || !j.contains("w") || !j.contains("h") || !j.contains("counts")) {
    throw Error(ErrorCode::kSchemaError, "mask: expected object with w, h, counts");
  }
  r.width = j.at("w").get<int>();
  r.height = j.at("h").get<int>();
  r.counts.clear();
  for (const auto& c : j.at("counts")) {
    if (!c.is_number_integer() || c.get<long long>() < 0) {
      throw Error(ErrorCode::kSchemaError, "mask: counts must be non-negative integers");
    }
    r.counts.push_back(c.get<std::uint32_t>());
  }
}

}  // namespace jitwin
