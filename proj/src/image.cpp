// SPDX-License-Identifier: Apache-2.0
#include "fgvp/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace fgvp {

ImageBuffer::ImageBuffer(int height, int width, Color fill) : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("ImageBuffer: dimensions must be positive");
  }
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    data_[3 * i] = fill.r;
    data_[3 * i + 1] = fill.g;
    data_[3 * i + 2] = fill.b;
  }
}

ImageBuffer::ImageBuffer(int height, int width, std::vector<std::uint8_t> rgb)
    : height_(height), width_(width), data_(std::move(rgb)) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("ImageBuffer: dimensions must be positive");
  }
  if (data_.size() != pixel_count() * 3) {
    throw DimensionError("ImageBuffer: pixel array length does not match height*width*3");
  }
}

BinaryMask::BinaryMask(int height, int width, bool value) : height_(height), width_(width) {
  if (height < 0 || width < 0) {
    throw std::invalid_argument("BinaryMask: negative dimensions");
  }
  words_.assign((pixel_count() + 63) / 64, value ? ~std::uint64_t{0} : 0);
  clear_padding();
}

void BinaryMask::clear_padding() {
  const std::size_t tail = pixel_count() & 63;
  if (tail != 0 && !words_.empty()) {
    words_.back() &= (std::uint64_t{1} << tail) - 1;
  }
}

std::size_t BinaryMask::area() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

BinaryMask BinaryMask::operator&(const BinaryMask& o) const {
  if (!same_shape(o)) throw DimensionError("BinaryMask: shape mismatch");
  BinaryMask out = *this;
  for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] &= o.words_[i];
  return out;
}

BinaryMask BinaryMask::operator|(const BinaryMask& o) const {
  if (!same_shape(o)) throw DimensionError("BinaryMask: shape mismatch");
  BinaryMask out = *this;
  for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] |= o.words_[i];
  return out;
}

BinaryMask BinaryMask::operator-(const BinaryMask& o) const {
  if (!same_shape(o)) throw DimensionError("BinaryMask: shape mismatch");
  BinaryMask out = *this;
  for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] &= ~o.words_[i];
  return out;
}

BinaryMask BinaryMask::operator~() const {
  BinaryMask out = *this;
  for (auto& w : out.words_) w = ~w;
  out.clear_padding();
  return out;
}

bool BinaryMask::subset_of(const BinaryMask& o) const {
  if (!same_shape(o)) throw DimensionError("BinaryMask: shape mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~o.words_[i]) return false;
  }
  return true;
}

std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw DimensionError("BinaryMask: shape mismatch");
  std::size_t n = 0;
  auto wa = a.words();
  auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) n += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
  return n;
}

std::size_t union_area(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw DimensionError("BinaryMask: shape mismatch");
  std::size_t n = 0;
  auto wa = a.words();
  auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) n += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  return n;
}

PixelSpan pixel_span(double lo, double extent, int limit) {
  // px is covered iff lo <= px + 0.5 < lo + extent.
  const double b = std::ceil(lo - 0.5);
  const double e = std::ceil(lo + extent - 0.5);
  PixelSpan s;
  s.begin = static_cast<int>(std::clamp(b, 0.0, static_cast<double>(limit)));
  s.end = static_cast<int>(std::clamp(e, 0.0, static_cast<double>(limit)));
  return s;
}

std::uint8_t round_to_u8(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace fgvp
