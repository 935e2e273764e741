// SPDX-License-Identifier: Apache-2.0
#include "fgvp/imagecore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace fgvp {

namespace {

void require_same_dims(const ImageBuffer& img, const BinaryMask& m, const char* what) {
  if (img.height() != m.height() || img.width() != m.width()) {
    throw DimensionError(std::string(what) + ": support mask dimensions do not match image");
  }
}

std::array<Plane<double>, 3> to_planes(const ImageBuffer& img) {
  std::array<Plane<double>, 3> planes;
  for (auto& p : planes) p.resize(img.height(), img.width());
  const auto px = img.bytes();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * img.width() + x) * 3;
      for (int c = 0; c < 3; ++c) planes[c](y, x) = px[o + c];
    }
  }
  return planes;
}

ImageBuffer from_planes(const std::array<Plane<double>, 3>& planes) {
  const int h = static_cast<int>(planes[0].rows());
  const int w = static_cast<int>(planes[0].cols());
  ImageBuffer out(h, w);
  auto px = out.bytes();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
      for (int c = 0; c < 3; ++c) px[o + c] = round_to_u8(planes[c](y, x));
    }
  }
  return out;
}

// Correlates each row with the kernel, clamping indices at the edges.
Plane<double> convolve_rows(const Plane<double>& in, const Eigen::VectorXd& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  const Eigen::Index w = in.cols();
  Plane<double> out(in.rows(), in.cols());
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(w + 2 * r));
  for (Eigen::Index i = 0; i < w + 2 * r; ++i) {
    idx[static_cast<std::size_t>(i)] = std::clamp<Eigen::Index>(i - r, 0, w - 1);
  }
  for (Eigen::Index y = 0; y < in.rows(); ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0;
      for (Eigen::Index t = 0; t < kernel.size(); ++t) {
        acc += kernel[t] * in(y, idx[static_cast<std::size_t>(x + t)]);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

// One-dimensional exact squared distance transform (lower envelope of parabolas).
void distance_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (f[v[k]] == kInf) {
      v[k] = q;
      continue;
    }
    double s;
    for (;;) {
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (f[v[0]] == kInf) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared Euclidean distance from every pixel to the nearest seed pixel.
Plane<double> squared_distance(const std::vector<bool>& seeds, int h, int w) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Plane<double> d(h, w);
  std::vector<double> f(static_cast<std::size_t>(std::max(h, w)));
  std::vector<double> out(f.size());
  for (int y = 0; y < h; ++y) {
    f.resize(static_cast<std::size_t>(w));
    out.resize(static_cast<std::size_t>(w));
    for (int x = 0; x < w; ++x) f[x] = seeds[static_cast<std::size_t>(y) * w + x] ? 0.0 : kInf;
    distance_1d(f, out);
    for (int x = 0; x < w; ++x) d(y, x) = out[x];
  }
  f.resize(static_cast<std::size_t>(h));
  out.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = d(y, x);
    distance_1d(f, out);
    for (int y = 0; y < h; ++y) d(y, x) = out[y];
  }
  return d;
}

// Counts of set pixels in a (2r+1)-wide window along rows, then columns.
BinaryMask window_filter(const BinaryMask& mask, int radius, bool require_all) {
  const int h = mask.height();
  const int w = mask.width();
  if (radius <= 0 || h == 0 || w == 0) return mask;
  const int full = 2 * radius + 1;
  BinaryMask rows(h, w);
  std::vector<int> prefix(static_cast<std::size_t>(std::max(h, w)) + 1);
  for (int y = 0; y < h; ++y) {
    prefix[0] = 0;
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + (mask.get(y, x) ? 1 : 0);
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - radius);
      const int hi = std::min(w, x + radius + 1);
      const int n = prefix[hi] - prefix[lo];
      if (require_all ? n == full : n > 0) rows.set(y, x);
    }
  }
  BinaryMask out(h, w);
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0;
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + (rows.get(y, x) ? 1 : 0);
    for (int y = 0; y < h; ++y) {
      const int lo = std::max(0, y - radius);
      const int hi = std::min(h, y + radius + 1);
      const int n = prefix[hi] - prefix[lo];
      if (require_all ? n == full : n > 0) out.set(y, x);
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd gaussian_kernel(double sigma, int radius) {
  Eigen::VectorXd k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(double(i) * i) / (2.0 * sigma * sigma));
  }
  return k / k.sum();
}

int blur_radius(double sigma, int height, int width) {
  const int cap = std::max(height, width) - 1;
  return std::min(static_cast<int>(std::ceil(3.0 * sigma)), cap);
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  if (sigma < 0) throw std::invalid_argument("gaussian_blur: sigma must be non-negative");
  if (sigma < 0.1 || img.empty()) return img;
  const int radius = blur_radius(sigma, img.height(), img.width());
  if (radius <= 0) return img;
  const Eigen::VectorXd kernel = gaussian_kernel(sigma, radius);
  auto planes = to_planes(img);
  for (auto& p : planes) {
    Plane<double> horiz = convolve_rows(p, kernel);
    Plane<double> t = horiz.transpose();
    Plane<double> vert = convolve_rows(t, kernel);
    p = vert.transpose();
  }
  return from_planes(planes);
}

ImageBuffer to_grayscale(const ImageBuffer& img) {
  ImageBuffer out = img;
  auto px = out.bytes();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double y = 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
    const std::uint8_t v = round_to_u8(y);
    px[3 * i] = px[3 * i + 1] = px[3 * i + 2] = v;
  }
  return out;
}

ImageBuffer alpha_blend(const ImageBuffer& img, Color color, double alpha, const BinaryMask& support) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha_blend: alpha must lie in [0,1]");
  require_same_dims(img, support, "alpha_blend");
  ImageBuffer out = img;
  const std::array<double, 3> c{double(color.r), double(color.g), double(color.b)};
  auto px = out.bytes();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!support.get(y, x)) continue;
      const std::size_t o = (static_cast<std::size_t>(y) * img.width() + x) * 3;
      for (int k = 0; k < 3; ++k) px[o + k] = round_to_u8((1.0 - alpha) * px[o + k] + alpha * c[k]);
    }
  }
  return out;
}

ImageBuffer composite(const ImageBuffer& fg, const ImageBuffer& bg, const BinaryMask& support) {
  if (fg.height() != bg.height() || fg.width() != bg.width()) {
    throw DimensionError("composite: foreground and background dimensions differ");
  }
  require_same_dims(fg, support, "composite");
  ImageBuffer out = bg;
  for (int y = 0; y < fg.height(); ++y) {
    for (int x = 0; x < fg.width(); ++x) {
      if (support.get(y, x)) out.set(y, x, fg.at(y, x));
    }
  }
  return out;
}

ImageBuffer fill(const ImageBuffer& img, Color color, const BinaryMask& support) {
  require_same_dims(img, support, "fill");
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (support.get(y, x)) out.set(y, x, color);
    }
  }
  return out;
}

BinaryMask rasterize_box(const Box& box, int height, int width) {
  BinaryMask m(height, width);
  if (!(box.w > 0 && box.h > 0)) return m;
  const PixelSpan xs = pixel_span(box.x, box.w, width);
  const PixelSpan ys = pixel_span(box.y, box.h, height);
  for (int y = ys.begin; y < ys.end; ++y) {
    for (int x = xs.begin; x < xs.end; ++x) m.set(y, x);
  }
  return m;
}

BinaryMask rasterize_ellipse(const Ellipse& e, int height, int width) {
  BinaryMask m(height, width);
  if (!(e.rx > 0 && e.ry > 0)) return m;
  // Clipped to the bounding box's pixel span.
  const PixelSpan xs = pixel_span(e.cx - e.rx, 2 * e.rx, width);
  const PixelSpan ys = pixel_span(e.cy - e.ry, 2 * e.ry, height);
  for (int y = ys.begin; y < ys.end; ++y) {
    const double dy = (y + 0.5 - e.cy) / e.ry;
    for (int x = xs.begin; x < xs.end; ++x) {
      const double dx = (x + 0.5 - e.cx) / e.rx;
      if (dx * dx + dy * dy <= 1.0) m.set(y, x);
    }
  }
  return m;
}

BinaryMask box_outline_band(const Box& box, int thickness, int height, int width) {
  if (thickness < 1) throw std::invalid_argument("outline thickness must be >= 1");
  const double half = thickness / 2.0;
  BinaryMask outer = rasterize_box({box.x - half, box.y - half, box.w + thickness, box.h + thickness}, height, width);
  if (box.w - thickness <= 0 || box.h - thickness <= 0) return outer;
  return outer - rasterize_box({box.x + half, box.y + half, box.w - thickness, box.h - thickness}, height, width);
}

BinaryMask ellipse_outline_band(const Ellipse& e, int thickness, int height, int width) {
  if (thickness < 1) throw std::invalid_argument("outline thickness must be >= 1");
  const double half = thickness / 2.0;
  BinaryMask outer = rasterize_ellipse({e.cx, e.cy, e.rx + half, e.ry + half}, height, width);
  if (e.rx - half <= 0 || e.ry - half <= 0) return outer;
  return outer - rasterize_ellipse({e.cx, e.cy, e.rx - half, e.ry - half}, height, width);
}

ImageBuffer draw_box_outline(const ImageBuffer& img, const Box& box, Color color, int thickness) {
  return fill(img, color, box_outline_band(box, thickness, img.height(), img.width()));
}

ImageBuffer draw_ellipse_outline(const ImageBuffer& img, const Ellipse& e, Color color, int thickness) {
  return fill(img, color, ellipse_outline_band(e, thickness, img.height(), img.width()));
}

ImageBuffer draw_disc(const ImageBuffer& img, double cx, double cy, double radius, Color color) {
  if (radius < 1) throw std::invalid_argument("draw_disc: radius must be >= 1");
  return fill(img, color, rasterize_ellipse({cx, cy, radius, radius}, img.height(), img.width()));
}

BinaryMask dilate_square(const BinaryMask& mask, int radius) { return window_filter(mask, radius, false); }

BinaryMask erode_square(const BinaryMask& mask, int radius) { return window_filter(mask, radius, true); }

BinaryMask dilate_disc(const BinaryMask& mask, double radius) {
  if (radius <= 0 || mask.empty()) return mask;
  const int h = mask.height();
  const int w = mask.width();
  std::vector<bool> seeds(mask.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) seeds[static_cast<std::size_t>(y) * w + x] = mask.get(y, x);
  }
  const Plane<double> d = squared_distance(seeds, h, w);
  BinaryMask out(h, w);
  const double r2 = radius * radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (d(y, x) <= r2) out.set(y, x);
    }
  }
  return out;
}

BinaryMask erode_disc(const BinaryMask& mask, double radius) {
  if (radius <= 0) return mask;
  // Pad by one ring of unset pixels so the image border erodes too.
  const int h = mask.height() + 2;
  const int w = mask.width() + 2;
  std::vector<bool> seeds(static_cast<std::size_t>(h) * w, true);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      seeds[static_cast<std::size_t>(y + 1) * w + x + 1] = !mask.get(y, x);
    }
  }
  const Plane<double> d = squared_distance(seeds, h, w);
  BinaryMask out(mask.height(), mask.width());
  const double r2 = radius * radius;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (d(y + 1, x + 1) > r2) out.set(y, x);
    }
  }
  return out;
}

BinaryMask mask_contour(const BinaryMask& mask, int thickness) {
  if (thickness < 1) throw std::invalid_argument("mask_contour: thickness must be >= 1");
  const int outer = (thickness + 1) / 2;
  const int inner = thickness / 2;
  return dilate_square(mask, outer) - erode_square(mask, inner);
}

ImageBuffer crop(const ImageBuffer& img, const Box& box) {
  const PixelSpan xs = pixel_span(box.x, box.w, img.width());
  const PixelSpan ys = pixel_span(box.y, box.h, img.height());
  if (!(box.w > 0 && box.h > 0) || xs.empty() || ys.empty()) {
    throw std::invalid_argument("crop: box lies entirely outside the image");
  }
  ImageBuffer out(ys.end - ys.begin, xs.end - xs.begin);
  for (int y = ys.begin; y < ys.end; ++y) {
    for (int x = xs.begin; x < xs.end; ++x) out.set(y - ys.begin, x - xs.begin, img.at(y, x));
  }
  return out;
}

ImageBuffer resize(const ImageBuffer& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) throw std::invalid_argument("resize: output dimensions must be >= 1");
  if (out_height == img.height() && out_width == img.width()) return img;
  const double sy = double(img.height()) / out_height;
  const double sx = double(img.width()) / out_width;
  ImageBuffer out(out_height, out_width);
  const auto src = img.bytes();
  auto dst = out.bytes();
  const int w = img.width();
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(img.height() - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int yy, int xx) { return double(src[(static_cast<std::size_t>(yy) * w + xx) * 3 + c]); };
        const double top = (1 - tx) * at(y0, x0) + tx * at(y0, x1);
        const double bot = (1 - tx) * at(y1, x0) + tx * at(y1, x1);
        dst[(static_cast<std::size_t>(y) * out_width + x) * 3 + c] = round_to_u8((1 - ty) * top + ty * bot);
      }
    }
  }
  return out;
}

ImageBuffer pad_to_square(const ImageBuffer& img, const PadFill& fill_rule) {
  const int side = std::max(img.height(), img.width());
  const int oy = (side - img.height()) / 2;
  const int ox = (side - img.width()) / 2;
  ImageBuffer canvas;
  if (const auto* color = std::get_if<Color>(&fill_rule)) {
    canvas = ImageBuffer(side, side, *color);
  } else {
    canvas = ImageBuffer(side, side);
    for (int y = 0; y < side; ++y) {
      const int sy = std::clamp(y - oy, 0, img.height() - 1);
      for (int x = 0; x < side; ++x) {
        canvas.set(y, x, img.at(sy, std::clamp(x - ox, 0, img.width() - 1)));
      }
    }
    canvas = gaussian_blur(canvas, std::get<BlurExtend>(fill_rule).sigma);
  }
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) canvas.set(y + oy, x + ox, img.at(y, x));
  }
  return canvas;
}

}  // namespace fgvp
