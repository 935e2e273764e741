// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fgvp/imagecore.hpp"
#include "oracles.hpp"

using namespace fgvp;

namespace {

ImageBuffer solid(int h, int w, Color c) { return ImageBuffer(h, w, c); }

std::size_t changed_pixels(const ImageBuffer& a, const ImageBuffer& b, Color* color = nullptr, bool* pure = nullptr) {
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (a.at(y, x) != b.at(y, x)) {
        ++n;
        if (color && pure && b.at(y, x) != *color) *pure = false;
      }
    }
  }
  return n;
}

}  // namespace

TEST_CASE("gaussian_blur examples") {
  std::mt19937_64 rng(1);
  const ImageBuffer img = oracle::random_image(rng, 9, 11);
  CHECK(gaussian_blur(img, 0) == img);
  CHECK(gaussian_blur(img, 0.05) == img);
  CHECK(gaussian_blur(solid(8, 8, {17, 200, 99}), 50) == solid(8, 8, {17, 200, 99}));
  CHECK_THROWS_AS(gaussian_blur(img, -1), std::invalid_argument);

  ImageBuffer dot(5, 5);
  dot.set(2, 2, {255, 255, 255});
  CHECK(oracle::max_abs_diff(gaussian_blur(dot, 1.0), oracle::dense_blur(dot, 1.0)) <= 1);
}

TEST_CASE("gaussian_blur matches the dense oracle on small images") {
  std::mt19937_64 rng(2);
  for (double sigma : {0.5, 1.0, 2.0, 5.0}) {
    for (int t = 0; t < 4; ++t) {
      const ImageBuffer img = oracle::random_image(rng, oracle::uniform_int(rng, 1, 16), oracle::uniform_int(rng, 1, 16));
      CHECK(oracle::max_abs_diff(gaussian_blur(img, sigma), oracle::dense_blur(img, sigma)) <= 1);
    }
  }
}

TEST_CASE("gaussian_blur smooths monotonically at large sigma") {
  std::mt19937_64 rng(4);
  const ImageBuffer img = oracle::random_image(rng, 32, 32);
  auto spread = [](const ImageBuffer& im) {
    int lo = 255, hi = 0;
    for (auto v : im.bytes()) {
      lo = std::min<int>(lo, v);
      hi = std::max<int>(hi, v);
    }
    return hi - lo;
  };
  int prev = spread(img);
  for (double s : {2.0, 10.0, 50.0, 100.0}) {
    const int cur = spread(gaussian_blur(img, s));
    CHECK(cur <= prev);
    prev = cur;
  }
  CHECK(gaussian_kernel(1.0, 3).sum() == doctest::Approx(1.0));
  CHECK(blur_radius(100, 64, 48) == 63);
  CHECK(blur_radius(1.2, 64, 48) == 4);
}

TEST_CASE("gaussian_blur is pure") {
  std::mt19937_64 rng(6);
  const ImageBuffer img = oracle::random_image(rng, 20, 30);
  CHECK(gaussian_blur(img, 3.3) == gaussian_blur(img, 3.3));
}

TEST_CASE("to_grayscale") {
  ImageBuffer img(1, 3);
  img.set(0, 0, {77, 77, 77});
  img.set(0, 1, {255, 0, 0});
  img.set(0, 2, {0, 0, 0});
  const ImageBuffer g = to_grayscale(img);
  CHECK(g.at(0, 0) == Color{77, 77, 77});
  CHECK(g.at(0, 1) == Color{76, 76, 76});
  CHECK(g.at(0, 2) == Color{0, 0, 0});
  std::mt19937_64 rng(7);
  const ImageBuffer r = oracle::random_image(rng, 10, 10);
  CHECK(to_grayscale(to_grayscale(r)) == to_grayscale(r));
}

TEST_CASE("alpha_blend") {
  std::mt19937_64 rng(8);
  const ImageBuffer img = oracle::random_image(rng, 6, 6);
  const BinaryMask all(6, 6, true);
  CHECK(alpha_blend(img, palette::kGreen, 0.0, all) == img);
  CHECK(alpha_blend(img, palette::kGreen, 1.0, all) == solid(6, 6, palette::kGreen));
  const ImageBuffer grey = solid(1, 1, {100, 100, 100});
  CHECK(alpha_blend(grey, {0, 255, 0}, 0.5, BinaryMask(1, 1, true)).at(0, 0) == Color{50, 178, 50});
  CHECK(alpha_blend(grey, {0, 255, 0}, 0.5, BinaryMask(1, 1, false)) == grey);
  CHECK_THROWS_AS(alpha_blend(img, palette::kGreen, 1.5, all), std::invalid_argument);
  CHECK_THROWS_AS(alpha_blend(img, palette::kGreen, 0.5, BinaryMask(5, 6)), DimensionError);
}

TEST_CASE("composite") {
  const ImageBuffer fg = solid(6, 5, {1, 2, 3});
  const ImageBuffer bg = solid(6, 5, {200, 100, 50});
  CHECK(composite(fg, bg, BinaryMask(6, 5, true)) == fg);
  CHECK(composite(fg, bg, BinaryMask(6, 5, false)) == bg);
  BinaryMask checker(6, 5);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 5; ++x) checker.set(y, x, (x + y) % 2 == 0);
  }
  const ImageBuffer out = composite(fg, bg, checker);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 5; ++x) CHECK(out.at(y, x) == ((x + y) % 2 == 0 ? fg.at(y, x) : bg.at(y, x)));
  }
}

TEST_CASE("composite of any transform restricted to the mask is the identity") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 10; ++t) {
    const ImageBuffer img = oracle::random_image(rng, 12, 14);
    const BinaryMask m = oracle::random_mask(rng, 12, 14);
    for (const ImageBuffer& f : {gaussian_blur(img, 2), to_grayscale(img), solid(12, 14, palette::kCyan)}) {
      const ImageBuffer out = composite(img, f, m);
      for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 14; ++x) {
          if (m.get(y, x)) CHECK(out.at(y, x) == img.at(y, x));
        }
      }
    }
  }
}

TEST_CASE("rasterize_box and rasterize_ellipse") {
  CHECK(rasterize_box({0, 0, 9, 7}, 7, 9) == BinaryMask(7, 9, true));
  CHECK(rasterize_box({2, 2, 3, 3}, 8, 8).area() == 9);
  CHECK(rasterize_box({-4, -4, 2, 2}, 8, 8).empty());
  const BinaryMask e = rasterize_ellipse(Ellipse::inscribed({0, 0, 10, 10}), 10, 10);
  CHECK(std::abs(double(e.area()) - std::numbers::pi * 25) <= 0.1 * std::numbers::pi * 25);
  CHECK(e.subset_of(rasterize_box({0, 0, 10, 10}, 10, 10)));

  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const Box b{oracle::uniform(rng, -5, 30), oracle::uniform(rng, -5, 30), oracle::uniform(rng, 0.1, 20),
                oracle::uniform(rng, 0.1, 20)};
    CHECK(rasterize_ellipse(Ellipse::inscribed(b), 32, 32).subset_of(rasterize_box(b, 32, 32)));
  }
}

TEST_CASE("outline strokes") {
  const ImageBuffer img = solid(40, 40, {10, 10, 10});
  const Box b{10, 10, 20, 20};
  const ImageBuffer out = draw_box_outline(img, b, palette::kRed, 2);
  const BinaryMask band = rasterize_box({9, 9, 22, 22}, 40, 40) - rasterize_box({11, 11, 18, 18}, 40, 40);
  bool pure = true;
  Color red = palette::kRed;
  CHECK(changed_pixels(img, out, &red, &pure) == band.area());
  CHECK(pure);
  CHECK(box_outline_band(b, 2, 40, 40) == band);

  // band thicker than the shape covers its interior
  const ImageBuffer thick = draw_box_outline(img, {15, 15, 4, 4}, palette::kRed, 10);
  for (int y = 15; y < 19; ++y) {
    for (int x = 15; x < 19; ++x) CHECK(thick.at(y, x) == palette::kRed);
  }

  const Ellipse e = Ellipse::inscribed(b);
  const ImageBuffer ring = draw_ellipse_outline(img, e, palette::kRed, 2);
  pure = true;
  CHECK(changed_pixels(img, ring, &red, &pure) == ellipse_outline_band(e, 2, 40, 40).area());
  CHECK(pure);
  CHECK_THROWS_AS(box_outline_band(b, 0, 40, 40), std::invalid_argument);
}

TEST_CASE("draw_disc") {
  const ImageBuffer img = solid(12, 12, {5, 5, 5});
  const ImageBuffer d = draw_disc(img, 5, 5, 1, palette::kRed);
  Color red = palette::kRed;
  bool pure = true;
  const auto n = changed_pixels(img, d, &red, &pure);
  CHECK(n >= 1);
  CHECK(n <= 5);
  CHECK(pure);
  CHECK(draw_disc(img, -50, -50, 3, palette::kRed) == img);
}

TEST_CASE("square morphology matches brute force") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 30; ++t) {
    const BinaryMask m = oracle::random_mask(rng, oracle::uniform_int(rng, 1, 18), oracle::uniform_int(rng, 1, 18));
    const int r = oracle::uniform_int(rng, 0, 3);
    CHECK(dilate_square(m, r) == oracle::dilate(m, r));
    CHECK(erode_square(m, r) == oracle::erode(m, r));
  }
}

TEST_CASE("mask_contour") {
  const BinaryMask full(10, 12, true);
  const BinaryMask band = mask_contour(full, 2);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 12; ++x) {
      const bool border = y == 0 || x == 0 || y == 9 || x == 11;
      CHECK(band.get(y, x) == border);
    }
  }
  BinaryMask dot(9, 9);
  dot.set(4, 4);
  const BinaryMask ring = mask_contour(dot, 2);
  CHECK(ring.area() <= 9);
  CHECK(ring.get(4, 4));

  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    const BinaryMask m = oracle::random_mask(rng, 16, 16);
    for (int th = 1; th <= 4; ++th) {
      const BinaryMask c = mask_contour(m, th);
      CHECK((c & erode_square(m, th / 2)).empty());
      CHECK(c == (oracle::dilate(m, (th + 1) / 2) - oracle::erode(m, th / 2)));
    }
  }
}

TEST_CASE("disc morphology") {
  BinaryMask disc = rasterize_ellipse({20, 20, 10, 10}, 41, 41);
  const BinaryMask grown = dilate_disc(disc, 2);
  CHECK(std::abs(double(grown.area()) - std::numbers::pi * 144) <= 0.15 * std::numbers::pi * 144);
  CHECK(disc.subset_of(grown));
  const BinaryMask shrunk = erode_disc(disc, 2);
  CHECK(shrunk.subset_of(disc));
  CHECK(std::abs(double(shrunk.area()) - std::numbers::pi * 64) <= 0.15 * std::numbers::pi * 64);
  CHECK(erode_disc(BinaryMask(5, 5, true), 1).area() == 9);
}

TEST_CASE("crop, resize and pad_to_square") {
  std::mt19937_64 rng(14);
  const ImageBuffer img = oracle::random_image(rng, 4, 8);
  CHECK(crop(img, {0, 0, 8, 4}) == img);
  const ImageBuffer c = crop(img, {2, 1, 3, 2});
  CHECK(c.height() == 2);
  CHECK(c.width() == 3);
  CHECK(c.at(0, 0) == img.at(1, 2));
  CHECK_THROWS_AS(crop(img, {20, 20, 3, 3}), std::invalid_argument);

  CHECK(oracle::max_abs_diff(resize(img, 4, 8), img) <= 1);
  const ImageBuffer up = resize(solid(3, 5, {9, 8, 7}), 11, 2);
  CHECK(up == solid(11, 2, {9, 8, 7}));

  const ImageBuffer p = pad_to_square(img, Color{1, 2, 3});
  CHECK(p.height() == 8);
  CHECK(p.width() == 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      if (y >= 2 && y <= 5) {
        CHECK(p.at(y, x) == img.at(y - 2, x));
      } else {
        CHECK(p.at(y, x) == Color{1, 2, 3});
      }
    }
  }
  const ImageBuffer pb = pad_to_square(img, BlurExtend{2.0});
  for (int y = 2; y <= 5; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(pb.at(y, x) == img.at(y - 2, x));
  }
  const ImageBuffer sq = oracle::random_image(rng, 5, 5);
  CHECK(pad_to_square(sq) == sq);
}
