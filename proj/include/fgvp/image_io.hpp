// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "fgvp/image.hpp"

namespace fgvp {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes PNG or JPEG (sniffed from the leading bytes) to 8-bit RGB.
ImageBuffer decode_image(std::span<const std::uint8_t> data);
ImageBuffer read_image(const std::filesystem::path& path);

/// Lossless 8-bit RGB PNG.
std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
void write_png(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace fgvp
