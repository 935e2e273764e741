// SPDX-License-Identifier: Apache-2.0
#include "fgvp/proposals.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

namespace fgvp {

namespace {

struct Components {
  std::vector<int> label;  // -1 for pixels not in the labelled class
  std::vector<std::size_t> area;
  std::vector<bool> touches_border;
};

// 4-connected components of pixels whose bit equals `value`.
Components label_components(const BinaryMask& m, bool value) {
  const int h = m.height();
  const int w = m.width();
  Components c;
  c.label.assign(m.pixel_count(), -1);
  std::vector<std::size_t> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = static_cast<std::size_t>(y0) * w + x0;
      if (m.get(y0, x0) != value || c.label[start] >= 0) continue;
      const int id = static_cast<int>(c.area.size());
      c.area.push_back(0);
      c.touches_border.push_back(false);
      c.label[start] = id;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const int y = static_cast<int>(p / w);
        const int x = static_cast<int>(p % w);
        ++c.area[id];
        if (y == 0 || x == 0 || y == h - 1 || x == w - 1) c.touches_border[id] = true;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (!m.in_bounds(ny[k], nx[k]) || m.get(ny[k], nx[k]) != value) continue;
          const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
          if (c.label[q] >= 0) continue;
          c.label[q] = id;
          stack.push_back(q);
        }
      }
    }
  }
  return c;
}

BinaryMask filter_pass(const BinaryMask& mask, double min_island, double max_hole) {
  const Components fg = label_components(mask, true);
  if (fg.area.empty()) return mask;
  const double largest = double(*std::max_element(fg.area.begin(), fg.area.end()));
  BinaryMask out = mask;
  const int w = mask.width();
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = fg.label[static_cast<std::size_t>(y) * w + x];
      if (id >= 0 && double(fg.area[id]) < min_island * largest) out.set(y, x, false);
    }
  }
  const Components bg = label_components(out, false);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = bg.label[static_cast<std::size_t>(y) * w + x];
      if (id >= 0 && !bg.touches_border[id] && double(bg.area[id]) < max_hole * largest) out.set(y, x, true);
    }
  }
  return out;
}

MaskProposal make_proposal(BinaryMask mask, double quality, std::optional<Box> query) {
  MaskProposal p;
  p.box = box_from_mask(mask);
  p.mask = std::move(mask);
  p.quality = quality;
  p.query_box = query;
  return p;
}

void check_results(const std::vector<SegmentResult>& results, std::size_t expected, const ImageBuffer& img) {
  if (results.size() != expected) {
    throw SegmenterError(std::min(results.size(), expected),
                         "backend returned " + std::to_string(results.size()) + " masks for " +
                             std::to_string(expected) + " queries");
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].mask.height() != img.height() || results[i].mask.width() != img.width()) {
      throw SegmenterError(i, "mask dimensions do not match the image");
    }
  }
}

}  // namespace

std::vector<Point> grid_points(int height, int width, int per_side) {
  if (per_side < 1) throw std::invalid_argument("grid_points: grid size must be >= 1");
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(per_side) * per_side);
  for (int i = 0; i < per_side; ++i) {
    for (int j = 0; j < per_side; ++j) {
      pts.push_back({(j + 0.5) * width / per_side, (i + 0.5) * height / per_side});
    }
  }
  return pts;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const std::size_t u = union_area(a, b);
  if (u == 0) return 0.0;
  return double(intersection_area(a, b)) / double(u);
}

std::vector<std::size_t> mask_nms_indices(std::span<const MaskProposal> props, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("mask_nms: threshold must lie in [0,1]");
  std::vector<std::size_t> order(props.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> areas(props.size());
  for (std::size_t i = 0; i < props.size(); ++i) areas[i] = props[i].mask.area();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (props[a].quality != props[b].quality) return props[a].quality > props[b].quality;
    return areas[a] > areas[b];
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (mask_iou(props[i].mask, props[k].mask) >= threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(i);
  }
  return kept;
}

std::vector<MaskProposal> mask_nms(std::span<const MaskProposal> props, double threshold) {
  std::vector<MaskProposal> out;
  for (std::size_t i : mask_nms_indices(props, threshold)) out.push_back(props[i]);
  return out;
}

BinaryMask filter_mask(const BinaryMask& mask, double min_island, double max_hole) {
  if (!(min_island >= 0 && min_island <= 1 && max_hole >= 0 && max_hole <= 1)) {
    throw std::invalid_argument("filter_mask: fractions must lie in [0,1]");
  }
  BinaryMask cur = mask;
  for (int pass = 0; pass < 64; ++pass) {
    BinaryMask next = filter_pass(cur, min_island, max_hole);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

std::vector<MaskProposal> propose_from_boxes(SegmenterBackend& backend, const ImageBuffer& img,
                                             std::span<const Box> boxes, const MaskFilterOptions& filter) {
  if (boxes.empty()) return {};
  if (!backend.capabilities().segment_boxes) throw std::invalid_argument("segmenter does not support box prompts");
  std::vector<SegmentResult> results = backend.segment_boxes(img, boxes);
  check_results(results, boxes.size(), img);
  std::vector<MaskProposal> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    BinaryMask m = std::move(results[i].mask);
    if (filter.enabled) m = filter_mask(m, filter.min_island, filter.max_hole);
    double quality = results[i].quality;
    if (m.empty()) {
      // Empty mask: use the query box instead.
      m = rasterize_box(boxes[i], img.height(), img.width());
      quality = 0.0;
      if (m.empty()) throw SegmenterError(i, "empty mask and query box outside the image");
    }
    out.push_back(make_proposal(std::move(m), quality, boxes[i]));
  }
  return out;
}

std::vector<MaskProposal> propose_grid(SegmenterBackend& backend, const ImageBuffer& img, GridSpec grid,
                                       double nms_threshold, const MaskFilterOptions& filter) {
  if (!backend.capabilities().segment_points) throw std::invalid_argument("segmenter does not support point prompts");
  const std::vector<Point> pts = grid_points(img.height(), img.width(), grid.per_side);
  std::vector<SegmentResult> results = backend.segment_points(img, pts);
  check_results(results, pts.size(), img);
  std::vector<MaskProposal> candidates;
  for (auto& r : results) {
    BinaryMask m = std::move(r.mask);
    if (m.empty()) continue;
    if (filter.enabled) m = filter_mask(m, filter.min_island, filter.max_hole);
    if (m.empty()) continue;
    candidates.push_back(make_proposal(std::move(m), r.quality, std::nullopt));
  }
  return mask_nms(candidates, nms_threshold);
}

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.height(), mask.width(), {}};
  bool current = false;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const bool v = mask.get(y, x);
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  if (rle.height < 0 || rle.width < 0) throw std::invalid_argument("rle: negative size");
  BinaryMask m(rle.height, rle.width);
  const std::size_t total = m.pixel_count();
  std::size_t pos = 0;
  bool value = false;
  for (std::uint32_t run : rle.counts) {
    if (pos + run > total) throw std::invalid_argument("rle: runs exceed mask size");
    if (value) {
      for (std::size_t p = pos; p < pos + run; ++p) {
        m.set(static_cast<int>(p % rle.height), static_cast<int>(p / rle.height));
      }
    }
    pos += run;
    value = !value;
  }
  if (pos != total) throw std::invalid_argument("rle: runs do not cover the mask");
  return m;
}

void to_json(nlohmann::json& j, const RleMask& rle) {
  j = nlohmann::json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

void from_json(const nlohmann::json& j, RleMask& rle) {
  const auto& size = j.at("size");
  if (!size.is_array() || size.size() != 2) throw std::invalid_argument("rle: size must be [H, W]");
  rle.height = size[0].get<int>();
  rle.width = size[1].get<int>();
  rle.counts = j.at("counts").get<std::vector<std::uint32_t>>();
}

}  // namespace fgvp
