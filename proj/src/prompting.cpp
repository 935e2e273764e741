// SPDX-License-Identifier: Apache-2.0
#include "fgvp/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace fgvp {

namespace {

constexpr std::string_view kKindCodes[] = {"p",  "a1", "a2", "b1", "b2", "b3", "b4", "c1",
                                           "c2", "c3", "c4", "d1", "d2", "d3", "d4"};

std::string lower_trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

enum class Shape { Crop, Keypoint, Box, Ellipse, Mask };

Shape shape_of(PromptKind k) {
  switch (k) {
    case PromptKind::P:
    case PromptKind::A2:
      return Shape::Crop;
    case PromptKind::A1:
      return Shape::Keypoint;
    case PromptKind::B1:
    case PromptKind::B2:
    case PromptKind::B3:
    case PromptKind::B4:
      return Shape::Box;
    case PromptKind::C1:
    case PromptKind::C2:
    case PromptKind::C3:
    case PromptKind::C4:
      return Shape::Ellipse;
    default:
      return Shape::Mask;
  }
}

// Variant digit: 1 line, 2 color, 3 grayscale reverse, 4 blur reverse.
int variant_of(PromptKind k) {
  switch (k) {
    case PromptKind::B1:
    case PromptKind::C1:
    case PromptKind::D1:
      return 1;
    case PromptKind::B2:
    case PromptKind::C2:
    case PromptKind::D2:
      return 2;
    case PromptKind::B3:
    case PromptKind::C3:
    case PromptKind::D3:
      return 3;
    case PromptKind::B4:
    case PromptKind::C4:
    case PromptKind::D4:
      return 4;
    default:
      return 0;
  }
}

Box scale_box(const Box& b, double s) {
  const double w = b.w * s;
  const double h = b.h * s;
  return {b.cx() - w / 2, b.cy() - h / 2, w, h};
}

}  // namespace

std::string_view to_string(PromptKind kind) { return kKindCodes[static_cast<int>(kind)]; }

PromptKind parse_prompt_kind(std::string_view code) {
  const std::string c = lower_trim(code);
  for (std::size_t i = 0; i < std::size(kKindCodes); ++i) {
    if (c == kKindCodes[i]) return static_cast<PromptKind>(i);
  }
  throw std::invalid_argument("unknown prompt kind '" + std::string(code) + "'");
}

std::vector<PromptKind> parse_ensemble(std::string_view text) {
  std::vector<PromptKind> kinds;
  std::size_t start = 0;
  for (;;) {
    const std::size_t bar = text.find('|', start);
    kinds.push_back(parse_prompt_kind(text.substr(start, bar == std::string_view::npos ? text.npos : bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return kinds;
}

std::string format_ensemble(const std::vector<PromptKind>& kinds) {
  std::string s;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i > 0) s += '|';
    s += to_string(kinds[i]);
  }
  return s;
}

bool needs_mask(PromptKind kind) { return shape_of(kind) == Shape::Mask; }

bool is_crop_kind(PromptKind kind) { return shape_of(kind) == Shape::Crop; }

std::string_view to_string(SquareMode mode) {
  switch (mode) {
    case SquareMode::Stretch:
      return "stretch";
    case SquareMode::Pad:
      return "pad";
    case SquareMode::CenterCrop:
      return "center_crop";
  }
  return "pad";
}

SquareMode parse_square_mode(std::string_view text) {
  const std::string s = lower_trim(text);
  if (s == "stretch") return SquareMode::Stretch;
  if (s == "pad") return SquareMode::Pad;
  if (s == "center_crop" || s == "center-crop") return SquareMode::CenterCrop;
  throw std::invalid_argument("unknown square mode '" + std::string(text) + "'");
}

void PromptStyle::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  if (!(expand_scale > 0.0)) throw std::invalid_argument("expand scale must be positive");
  if (line_thickness < 1) throw std::invalid_argument("line thickness must be >= 1");
  if (!(blur_sigma >= 0.0)) throw std::invalid_argument("blur sigma must be non-negative");
  if (!(keypoint_radius >= 1.0)) throw std::invalid_argument("keypoint radius must be >= 1");
}

Box box_from_mask(const BinaryMask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(y, x)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw RegionError("box_from_mask: mask is empty");
  return {double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

Region Region::from_mask(BinaryMask mask) {
  Region r;
  r.box = box_from_mask(mask);
  r.mask = std::move(mask);
  return r;
}

bool region_consistent(const Region& region, double slack) {
  if (!region.mask) return true;
  if (region.mask->empty()) return false;
  const Box t = box_from_mask(*region.mask);
  const Box& b = region.box;
  return t.x >= b.x - slack && t.y >= b.y - slack && t.right() <= b.right() + slack &&
         t.bottom() <= b.bottom() + slack;
}

BinaryMask region_support(PromptKind kind, const Region& region, int height, int width, double keypoint_radius) {
  switch (shape_of(kind)) {
    case Shape::Crop:
    case Shape::Box:
      return rasterize_box(region.box, height, width);
    case Shape::Ellipse:
      return rasterize_ellipse(Ellipse::inscribed(region.box), height, width);
    case Shape::Keypoint:
      return rasterize_ellipse({region.box.cx(), region.box.cy(), keypoint_radius, keypoint_radius}, height, width);
    case Shape::Mask:
      if (!region.mask) {
        throw RegionError("prompt kind " + std::string(to_string(kind)) + " requires a segmentation mask");
      }
      if (region.mask->height() != height || region.mask->width() != width) {
        throw DimensionError("region mask dimensions do not match the image");
      }
      return *region.mask;
  }
  return BinaryMask(height, width);
}

Region expand_region(const Region& region, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("expand_region: scale must be positive");
  if (scale == 1.0) return region;
  Region out;
  out.box = scale_box(region.box, scale);
  if (region.mask) {
    const double r_eq = std::sqrt(double(region.mask->area()) / std::numbers::pi);
    const double radius = std::abs(scale - 1.0) * r_eq;
    BinaryMask m = scale > 1.0 ? dilate_disc(*region.mask, radius) : erode_disc(*region.mask, radius);
    if (m.empty()) throw RegionError("expand_region: mask eroded to nothing (degenerate region)");
    out.mask = std::move(m);
  }
  return out;
}

PromptCanvas::PromptCanvas(ImageBuffer img) : image_(std::move(img)) {}

const ImageBuffer& PromptCanvas::blurred(double sigma) const {
  std::lock_guard lock(mu_);
  auto& slot = blurred_[sigma];
  if (!slot) slot = std::make_unique<ImageBuffer>(gaussian_blur(image_, sigma));
  return *slot;
}

const ImageBuffer& PromptCanvas::grayscale() const {
  std::lock_guard lock(mu_);
  if (!gray_) gray_ = std::make_unique<ImageBuffer>(to_grayscale(image_));
  return *gray_;
}

ImageBuffer PromptCanvas::render(const Region& input_region, PromptKind kind, const PromptStyle& style) const {
  style.validate();
  const Region region = expand_region(input_region, style.expand_scale);
  const int h = image_.height();
  const int w = image_.width();

  if (kind == PromptKind::P) return crop(image_, region.box);
  if (kind == PromptKind::A2) {
    ImageBuffer c = crop(image_, region.box);
    return alpha_blend(c, style.fill_color, style.alpha, BinaryMask(c.height(), c.width(), true));
  }
  if (kind == PromptKind::A1) {
    return draw_disc(image_, region.box.cx(), region.box.cy(), style.keypoint_radius, style.line_color);
  }

  switch (variant_of(kind)) {
    case 1:
      if (kind == PromptKind::B1) return draw_box_outline(image_, region.box, style.line_color, style.line_thickness);
      if (kind == PromptKind::C1) {
        return draw_ellipse_outline(image_, Ellipse::inscribed(region.box), style.line_color, style.line_thickness);
      }
      return fill(image_, style.line_color, mask_contour(region_support(kind, region, h, w), style.line_thickness));
    case 2:
      return alpha_blend(image_, style.fill_color, style.alpha, region_support(kind, region, h, w));
    case 3:
      return composite(image_, grayscale(), region_support(kind, region, h, w));
    case 4:
      return composite(image_, blurred(style.blur_sigma), region_support(kind, region, h, w));
    default:
      break;
  }
  throw std::logic_error("unhandled prompt kind");
}

ImageBuffer render_prompt(const ImageBuffer& img, const Region& region, PromptKind kind, const PromptStyle& style) {
  return PromptCanvas(img).render(region, kind, style);
}

ImageBuffer prepare_input(const ImageBuffer& img, SquareMode mode, int side, const PadFill& fill_rule) {
  if (side < 1) throw std::invalid_argument("prepare_input: side must be >= 1");
  switch (mode) {
    case SquareMode::Stretch:
      return resize(img, side, side);
    case SquareMode::Pad:
      if (img.height() == img.width()) return resize(img, side, side);
      return resize(pad_to_square(img, fill_rule), side, side);
    case SquareMode::CenterCrop: {
      const int s = std::min(img.height(), img.width());
      const Box b{double((img.width() - s) / 2), double((img.height() - s) / 2), double(s), double(s)};
      return resize(crop(img, b), side, side);
    }
  }
  return resize(img, side, side);
}

SquareMode default_square_mode(PromptKind kind) {
  return is_crop_kind(kind) ? SquareMode::Stretch : SquareMode::Pad;
}

}  // namespace fgvp
