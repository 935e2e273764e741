// SPDX-License-Identifier: Apache-2.0
//
// Visual prompt taxonomy: crops (P, A2), keypoint (A1), box (B*), circle (C*)
// and mask (D*) prompts in line (1), color (2), grayscale-reverse (3) and
// blur-reverse (4) variants.
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fgvp/imagecore.hpp"

namespace fgvp {

enum class PromptKind { P, A1, A2, B1, B2, B3, B4, C1, C2, C3, C4, D1, D2, D3, D4 };

inline constexpr PromptKind kAllPromptKinds[] = {
    PromptKind::P,  PromptKind::A1, PromptKind::A2, PromptKind::B1, PromptKind::B2,
    PromptKind::B3, PromptKind::B4, PromptKind::C1, PromptKind::C2, PromptKind::C3,
    PromptKind::C4, PromptKind::D1, PromptKind::D2, PromptKind::D3, PromptKind::D4};

/// Lowercase code, e.g. "d4".
std::string_view to_string(PromptKind kind);
/// Accepts the lowercase code (case-insensitive); throws std::invalid_argument.
PromptKind parse_prompt_kind(std::string_view code);
/// Parses an ensemble written with '|' separators, e.g. "p|d1|d3|d4".
std::vector<PromptKind> parse_ensemble(std::string_view text);
std::string format_ensemble(const std::vector<PromptKind>& kinds);

bool needs_mask(PromptKind kind);
bool is_crop_kind(PromptKind kind);

enum class SquareMode { Stretch, Pad, CenterCrop };
std::string_view to_string(SquareMode mode);
SquareMode parse_square_mode(std::string_view text);

struct PromptStyle {
  Color line_color = palette::kRed;
  int line_thickness = 2;
  Color fill_color = palette::kGreen;
  double alpha = 0.5;
  double blur_sigma = 100.0;
  double keypoint_radius = 6.0;
  double expand_scale = 1.0;
  SquareMode square_mode = SquareMode::Pad;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Raised when a region cannot support the requested prompt (e.g. missing
/// mask for D*, or a mask eroded to nothing).
class RegionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Region {
  Box box;
  std::optional<BinaryMask> mask;

  /// Region whose box is the tight box of the mask.
  static Region from_mask(BinaryMask mask);
};

/// Tight bounding box of the set bits. Throws RegionError on an empty mask.
Box box_from_mask(const BinaryMask& mask);

/// True when the mask's tight box lies within the region box grown by slack.
bool region_consistent(const Region& region, double slack = 2.0);

BinaryMask region_support(PromptKind kind, const Region& region, int height, int width,
                          double keypoint_radius = PromptStyle{}.keypoint_radius);

/// Scales box geometry about its center; dilates (s>1) or erodes (s<1) the
/// mask with a disc of radius |s-1|*sqrt(area/pi).
Region expand_region(const Region& region, double scale);

/// Renders prompts for many regions of one image, sharing the blurred and
/// grayscale whole-image intermediates. Thread-safe.
class PromptCanvas {
 public:
  explicit PromptCanvas(ImageBuffer img);

  const ImageBuffer& image() const { return image_; }
  const ImageBuffer& blurred(double sigma) const;
  const ImageBuffer& grayscale() const;

  /// Applies style.expand_scale, then renders the prompt.
  ImageBuffer render(const Region& region, PromptKind kind, const PromptStyle& style) const;

 private:
  ImageBuffer image_;
  mutable std::mutex mu_;
  mutable std::map<double, std::unique_ptr<ImageBuffer>> blurred_;
  mutable std::unique_ptr<ImageBuffer> gray_;
};

ImageBuffer render_prompt(const ImageBuffer& img, const Region& region, PromptKind kind, const PromptStyle& style);

/// Squares an image for the scorer and resizes it to side x side.
ImageBuffer prepare_input(const ImageBuffer& img, SquareMode mode, int side, const PadFill& fill = palette::kBlack);

/// Per-kind default: stretch for crop prompts, pad for whole-image prompts.
SquareMode default_square_mode(PromptKind kind);

}  // namespace fgvp
