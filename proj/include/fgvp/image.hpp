// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgvp {

/// Raised when two rasters that must share dimensions do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Color {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Color&, const Color&) = default;
};

namespace palette {
inline constexpr Color kRed{255, 0, 0};
inline constexpr Color kGreen{0, 255, 0};
inline constexpr Color kYellow{255, 255, 0};
inline constexpr Color kCyan{0, 255, 255};
inline constexpr Color kBlue{0, 0, 255};
inline constexpr Color kPurple{128, 0, 128};
inline constexpr Color kCptRed{240, 0, 30};
inline constexpr Color kBlack{0, 0, 0};
}  // namespace palette

/// Axis-aligned box: top-left corner plus extent, in pixels.
struct Box {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double cx() const { return x + w / 2; }
  double cy() const { return y + h / 2; }
  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  bool valid() const { return w > 0 && h > 0; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Ellipse {
  double cx = 0;
  double cy = 0;
  double rx = 0;
  double ry = 0;

  static Ellipse inscribed(const Box& b) { return {b.cx(), b.cy(), b.w / 2, b.h / 2}; }

  friend bool operator==(const Ellipse&, const Ellipse&) = default;
};

/// 8-bit sRGB raster, row-major, interleaved RGB.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int height, int width, Color fill = palette::kBlack);
  ImageBuffer(int height, int width, std::vector<std::uint8_t> rgb);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return height_ == 0 || width_ == 0; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  Color at(int y, int x) const {
    const auto* p = &data_[offset(y, x)];
    return {p[0], p[1], p[2]};
  }
  void set(int y, int x, Color c) {
    auto* p = &data_[offset(y, x)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t offset(int y, int x) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// One bit per pixel, row-major, packed into 64-bit words.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, bool value = false);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  bool get(int y, int x) const {
    const std::size_t i = index(y, x);
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(int y, int x, bool v = true) {
    const std::size_t i = index(y, x);
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (v) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }
  bool in_bounds(int y, int x) const { return y >= 0 && x >= 0 && y < height_ && x < width_; }

  std::size_t area() const;
  bool empty() const { return area() == 0; }
  bool same_shape(const BinaryMask& o) const { return height_ == o.height_ && width_ == o.width_; }

  BinaryMask operator&(const BinaryMask& o) const;
  BinaryMask operator|(const BinaryMask& o) const;
  /// Set difference: bits in *this and not in o.
  BinaryMask operator-(const BinaryMask& o) const;
  BinaryMask operator~() const;

  bool subset_of(const BinaryMask& o) const;

  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width_ + x; }
  void clear_padding();

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint64_t> words_;
};

/// |a ∩ b| without materializing the intersection.
std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b);
std::size_t union_area(const BinaryMask& a, const BinaryMask& b);

/// Integer pixel span [begin, end) covered by a real interval under the
/// pixel-center test, clamped to [0, limit).
struct PixelSpan {
  int begin = 0;
  int end = 0;
  bool empty() const { return end <= begin; }
};
PixelSpan pixel_span(double lo, double extent, int limit);

/// Half-up rounding to an 8-bit level, saturating.
std::uint8_t round_to_u8(double v);

}  // namespace fgvp
