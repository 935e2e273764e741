// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "fgvp/backends.hpp"
#include "fgvp/digest.hpp"

namespace fgvp {

Embedding fixture_embed(std::span<const std::uint8_t> bytes, const FixtureSpec& spec) {
  if (bytes.empty()) throw std::invalid_argument("fixture_embed: empty input");
  const Sha256 h = sha256(bytes);
  if (!spec.programmed.empty()) {
    if (auto it = spec.programmed.find(to_hex(h)); it != spec.programmed.end()) return it->second;
  }
  std::uint64_t state = 0;
  for (int i = 0; i < 8; ++i) state |= std::uint64_t{h[i]} << (8 * i);
  std::mt19937_64 rng(state ^ (spec.seed * 0x9E3779B97F4A7C15ull));
  Eigen::VectorXd v(spec.dim);
  for (int i = 0; i < spec.dim; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v[i] = 2.0 * u - 1.0;
  }
  return (v / v.norm()).cast<float>();
}

std::vector<std::uint8_t> fixture_image_bytes(const ImageBuffer& img) {
  const std::string head = "img:" + std::to_string(img.height()) + "x" + std::to_string(img.width()) + ":";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  const auto px = img.bytes();
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

std::vector<std::uint8_t> fixture_text_bytes(const std::string& text) {
  const std::string s = "txt:" + text;
  return {s.begin(), s.end()};
}

FixtureScorer::FixtureScorer(FixtureSpec spec) : spec_(std::move(spec)) {
  if (spec_.dim < 1) throw std::invalid_argument("fixture dimension must be >= 1");
}

Embedding FixtureScorer::embed_image(const ImageBuffer& img) {
  ++calls_;
  return fixture_embed(fixture_image_bytes(img), spec_);
}

Embedding FixtureScorer::embed_text(const std::string& text) {
  ++calls_;
  return fixture_embed(fixture_text_bytes(text), spec_);
}

namespace {

Embedding unit(const Embedding& v, int dim) {
  if (v.size() != dim) throw std::invalid_argument("programmed vector has wrong dimension");
  const float n = v.norm();
  if (!(n > 0)) throw std::invalid_argument("programmed vector must be non-zero");
  return v / n;
}

}  // namespace

void FixtureScorer::program_image(const ImageBuffer& img, const Embedding& v) {
  spec_.programmed[to_hex(sha256(fixture_image_bytes(img)))] = unit(v, spec_.dim);
}

void FixtureScorer::program_text(const std::string& text, const Embedding& v) {
  spec_.programmed[to_hex(sha256(fixture_text_bytes(text)))] = unit(v, spec_.dim);
}

BinaryMask flood_region(const ImageBuffer& img, int seed_y, int seed_x, int tolerance) {
  BinaryMask m(img.height(), img.width());
  if (!m.in_bounds(seed_y, seed_x)) return m;
  const Color seed = img.at(seed_y, seed_x);
  auto close = [&](Color c) {
    return std::abs(int(c.r) - seed.r) <= tolerance && std::abs(int(c.g) - seed.g) <= tolerance &&
           std::abs(int(c.b) - seed.b) <= tolerance;
  };
  std::vector<std::pair<int, int>> stack{{seed_y, seed_x}};
  m.set(seed_y, seed_x);
  while (!stack.empty()) {
    auto [y, x] = stack.back();
    stack.pop_back();
    const int ny[4] = {y - 1, y + 1, y, y};
    const int nx[4] = {x, x, x - 1, x + 1};
    for (int k = 0; k < 4; ++k) {
      if (!m.in_bounds(ny[k], nx[k]) || m.get(ny[k], nx[k]) || !close(img.at(ny[k], nx[k]))) continue;
      m.set(ny[k], nx[k]);
      stack.emplace_back(ny[k], nx[k]);
    }
  }
  return m;
}

std::vector<SegmentResult> FixtureSegmenter::segment_boxes(const ImageBuffer& img, std::span<const Box> boxes) {
  std::vector<SegmentResult> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back({rasterize_box(b, img.height(), img.width()), 1.0});
  return out;
}

std::vector<SegmentResult> FixtureSegmenter::segment_points(const ImageBuffer& img, std::span<const Point> points) {
  std::vector<SegmentResult> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const int x = static_cast<int>(std::floor(p.x));
    const int y = static_cast<int>(std::floor(p.y));
    out.push_back({flood_region(img, y, x, tolerance_), 1.0});
  }
  return out;
}

}  // namespace fgvp
