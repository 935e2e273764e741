// SPDX-License-Identifier: Apache-2.0
//
// Raster primitives shared by every prompt renderer. All functions are pure:
// identical inputs give bit-identical outputs.
#pragma once

#include <variant>

#include <Eigen/Core>

#include "fgvp/image.hpp"

namespace fgvp {

/// Float plane used for filtering, row-major like ImageBuffer.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Normalized 1-D Gaussian taps for offsets [-radius, radius].
Eigen::VectorXd gaussian_kernel(double sigma, int radius);

/// Kernel radius used by gaussian_blur for an image of the given size.
int blur_radius(double sigma, int height, int width);

/// Separable Gaussian blur, clamp-to-edge, radius ceil(3*sigma) capped at
/// max(H,W)-1. sigma < 0.1 returns the input unchanged.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

/// Rec.601 luma replicated to all three channels.
ImageBuffer to_grayscale(const ImageBuffer& img);

ImageBuffer alpha_blend(const ImageBuffer& img, Color color, double alpha, const BinaryMask& support);

/// fg where support is set, bg elsewhere.
ImageBuffer composite(const ImageBuffer& fg, const ImageBuffer& bg, const BinaryMask& support);

/// Fill the support with color at alpha 1.
ImageBuffer fill(const ImageBuffer& img, Color color, const BinaryMask& support);

BinaryMask rasterize_box(const Box& box, int height, int width);
BinaryMask rasterize_ellipse(const Ellipse& e, int height, int width);

ImageBuffer draw_box_outline(const ImageBuffer& img, const Box& box, Color color, int thickness);
ImageBuffer draw_ellipse_outline(const ImageBuffer& img, const Ellipse& e, Color color, int thickness);
BinaryMask box_outline_band(const Box& box, int thickness, int height, int width);
BinaryMask ellipse_outline_band(const Ellipse& e, int thickness, int height, int width);

ImageBuffer draw_disc(const ImageBuffer& img, double cx, double cy, double radius, Color color);

/// Morphology with a (2r+1)x(2r+1) square element. Pixels outside the image
/// count as unset.
BinaryMask dilate_square(const BinaryMask& mask, int radius);
BinaryMask erode_square(const BinaryMask& mask, int radius);

/// Morphology with a Euclidean disc of real radius, via an exact distance
/// transform.
BinaryMask dilate_disc(const BinaryMask& mask, double radius);
BinaryMask erode_disc(const BinaryMask& mask, double radius);

/// dilate(mask, ceil(t/2)) minus erode(mask, floor(t/2)).
BinaryMask mask_contour(const BinaryMask& mask, int thickness);

/// Copies the region of img covered by box (pixel-center test, clamped).
/// Throws std::invalid_argument when nothing remains after clamping.
ImageBuffer crop(const ImageBuffer& img, const Box& box);

/// Bilinear resampling with half-pixel centers.
ImageBuffer resize(const ImageBuffer& img, int out_height, int out_width);

/// Pad fill rule: a solid color, or the edge-extended image blurred with sigma.
struct BlurExtend {
  double sigma = 10.0;
};
using PadFill = std::variant<Color, BlurExtend>;

/// Centers img on a square canvas of side max(H,W).
ImageBuffer pad_to_square(const ImageBuffer& img, const PadFill& fill = palette::kBlack);

}  // namespace fgvp
