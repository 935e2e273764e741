// SPDX-License-Identifier: Apache-2.0
//
// Writes the bundled synthetic benchmark sets: flat-colored blocks on a
// smooth background, so the fixture segmenter recovers them exactly.
#include <array>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "fgvp/eval.hpp"
#include "fgvp/image_io.hpp"

namespace fs = std::filesystem;
using namespace fgvp;

namespace {

constexpr int kSide = 64;

struct Block {
  Color color;
  std::string name;
};

const std::array<Block, 5> kBlocks = {{{palette::kRed, "red"},
                                       {palette::kBlue, "blue"},
                                       {palette::kYellow, "yellow"},
                                       {palette::kCyan, "cyan"},
                                       {palette::kPurple, "purple"}}};

int draw(std::mt19937& rng, int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); }

ImageBuffer background(std::mt19937& rng) {
  ImageBuffer img(kSide, kSide);
  const int base = draw(rng, 90, 150);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      const auto v = static_cast<std::uint8_t>(base + (x + y) / 8);
      img.set(y, x, Color{v, v, static_cast<std::uint8_t>(v / 2 + 40)});
    }
  }
  return img;
}

void paint(ImageBuffer& img, const Box& b, Color c) { img = fill(img, c, rasterize_box(b, img.height(), img.width())); }

std::vector<RecRecord> make_rec(const fs::path& dir, std::mt19937& rng) {
  std::vector<RecRecord> out;
  for (int i = 0; i < 10; ++i) {
    ImageBuffer img = background(rng);
    // three blocks in left / middle / right columns
    std::vector<Box> boxes;
    std::vector<std::size_t> colors;
    std::size_t first = rng() % kBlocks.size();
    for (int k = 0; k < 3; ++k) {
      const int w = draw(rng, 10, 16);
      const int h = draw(rng, 10, 24);
      const int x = 2 + k * 21 + draw(rng, 0, 19 - w);
      const int y = draw(rng, 2, kSide - h - 2);
      boxes.push_back(Box{double(x), double(y), double(w), double(h)});
      colors.push_back((first + static_cast<std::size_t>(k)) % kBlocks.size());
      paint(img, boxes.back(), kBlocks[colors.back()].color);
    }
    const std::string name = "rec_" + std::to_string(i) + ".png";
    write_png(dir / name, img);
    const std::size_t a = rng() % 3;
    const std::size_t b = (a + 1 + rng() % 2) % 3;
    const bool grid = i % 4 == 3;
    out.push_back({name, grid ? std::vector<Box>{} : boxes, "the " + kBlocks[colors[a]].name + " block", boxes[a]});
    const char* side = b == 0 ? "the left" : (b == 2 ? "the right" : "the middle");
    out.push_back({name, grid ? std::vector<Box>{} : boxes,
                   "the " + kBlocks[colors[b]].name + " block on " + side, boxes[b]});
  }
  return out;
}

std::vector<PartRecord> make_part(const fs::path& dir, std::mt19937& rng) {
  std::vector<PartRecord> out;
  for (int i = 0; i < 10; ++i) {
    ImageBuffer img = background(rng);
    const int ox = draw(rng, 2, 10);
    const int oy = draw(rng, 2, 10);
    const int ow = draw(rng, 40, kSide - ox - 2);
    const int oh = draw(rng, 40, kSide - oy - 2);
    const Box object{double(ox), double(oy), double(ow), double(oh)};
    paint(img, object, palette::kBlack);
    const int head_h = oh / 3;
    const Box head{double(ox + ow / 4), double(oy + 2), double(ow / 2), double(head_h - 3)};
    const Box body{double(ox + 2), double(oy + head_h + 1), double(ow - 4), double(oh - head_h - 3)};
    paint(img, head, kBlocks[0].color);
    paint(img, body, kBlocks[1 + rng() % 4].color);
    const std::string name = "part_" + std::to_string(i) + ".png";
    write_png(dir / name, img);
    out.push_back({name, object, {"head", "body", "leg"}, {{"head", head}, {"body", body}}});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data/synthetic");
  fs::create_directories(dir);
  std::mt19937 rng(20231018u);
  save_rec_jsonl(dir / "rec.jsonl", make_rec(dir, rng));
  save_part_jsonl(dir / "part.jsonl", make_part(dir, rng));
  std::cout << "wrote synthetic sets to " << dir.string() << "\n";
  return 0;
}
