// SPDX-License-Identifier: Apache-2.0
//
// Region candidates from a class-agnostic segmenter: box-prompted masks,
// grid-keypoint masks with greedy mask NMS, mask cleanup and tight boxes.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fgvp/prompting.hpp"

namespace fgvp {

struct Point {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct GridSpec {
  int per_side = 16;
};

struct MaskProposal {
  BinaryMask mask;
  Box box;  // tight box of mask
  double quality = 0;
  std::optional<Box> query_box;  // the box the segmenter was prompted with, if any
};

/// One segmenter answer: the single best mask for one query.
struct SegmentResult {
  BinaryMask mask;
  double quality = 0;
};

struct SegmenterCapabilities {
  bool segment_boxes = false;
  bool segment_points = false;
};

/// Class-agnostic segmenter. Returned masks match the query image size.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual SegmenterCapabilities capabilities() const = 0;
  virtual std::vector<SegmentResult> segment_boxes(const ImageBuffer& img, std::span<const Box> boxes) = 0;
  virtual std::vector<SegmentResult> segment_points(const ImageBuffer& img, std::span<const Point> points) = 0;
};

/// Backend failure tied to the query that triggered it.
class SegmenterError : public std::runtime_error {
 public:
  SegmenterError(std::size_t index, const std::string& what)
      : std::runtime_error("segmenter failed at query " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Cell centers ((j+0.5)W/g, (i+0.5)H/g), row-major.
std::vector<Point> grid_points(int height, int width, int per_side);

/// |a∩b| / |a∪b|, 0 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Greedy NMS: quality descending (ties: larger area, then input order);
/// keeps a proposal iff IoU with every kept mask is < threshold. Returns
/// input indices in keep order.
std::vector<std::size_t> mask_nms_indices(std::span<const MaskProposal> props, double threshold);
std::vector<MaskProposal> mask_nms(std::span<const MaskProposal> props, double threshold);

struct MaskFilterOptions {
  bool enabled = true;
  double min_island = 0.1;
  double max_hole = 0.1;
};

/// Drops 4-connected islands smaller than min_island * largest component and
/// fills enclosed holes smaller than max_hole * largest component, repeated
/// to a fixed point.
BinaryMask filter_mask(const BinaryMask& mask, double min_island = 0.1, double max_hole = 0.1);

std::vector<MaskProposal> propose_from_boxes(SegmenterBackend& backend, const ImageBuffer& img,
                                             std::span<const Box> boxes, const MaskFilterOptions& filter = {});

std::vector<MaskProposal> propose_grid(SegmenterBackend& backend, const ImageBuffer& img, GridSpec grid = {},
                                       double nms_threshold = 0.7, const MaskFilterOptions& filter = {});

/// COCO-style uncompressed RLE: column-major runs, starting with zeros.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;
  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const BinaryMask& mask);
/// Throws std::invalid_argument when the runs do not cover H*W exactly.
BinaryMask rle_decode(const RleMask& rle);

void to_json(nlohmann::json& j, const RleMask& rle);
void from_json(const nlohmann::json& j, RleMask& rle);

}  // namespace fgvp
