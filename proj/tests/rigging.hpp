// SPDX-License-Identifier: Apache-2.0
//
// Programs fixture embeddings so a benchmark run has a known outcome. Every
// caption or label gets its own basis vector and the other proposals get a
// spare basis vector orthogonal to all of them. For a correct rig the
// ground-truth proposal gets the caption's vector, so it is always the best
// match. For an adversarial rig every proposal that would count as a hit
// gets the negated vector, so none is chosen, also under optimal assignment.
#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgvp/backends.hpp"
#include "fgvp/eval.hpp"
#include "fgvp/image_io.hpp"

namespace testing {

inline fgvp::Embedding basis(int dim, std::size_t k) {
  if (k + 1 >= static_cast<std::size_t>(dim)) throw std::invalid_argument("fixture dimension too small to rig");
  return fgvp::Embedding::Unit(dim, static_cast<Eigen::Index>(k));
}

/// Correct rig: the box with the largest IoU against `gt`. Adversarial rig:
/// every box that would count as a hit.
inline std::vector<std::size_t> targets_for(const std::vector<fgvp::Box>& boxes, const fgvp::Box& gt, bool correct) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < boxes.size(); ++i) {
    if (fgvp::box_iou(boxes[i], gt) > fgvp::box_iou(boxes[best], gt)) best = i;
  }
  if (correct) return {best};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (fgvp::box_iou(boxes[i], gt) > 0.5) out.push_back(i);
  }
  return out;
}

inline fgvp::Embedding spare(int dim) { return fgvp::Embedding::Unit(dim, dim - 1); }

inline void program_regions(fgvp::FixtureScorer& scorer, const fgvp::ImageBuffer& img,
                            const std::vector<fgvp::Region>& d_regions, const std::vector<fgvp::Region>& plain_regions,
                            std::size_t target, const fgvp::Embedding& v, const fgvp::RunConfig& config) {
  const fgvp::PromptCanvas canvas(img);
  for (fgvp::PromptKind kind : config.prompts) {
    const auto& regions = fgvp::needs_mask(kind) ? d_regions : plain_regions;
    const std::vector<fgvp::Region> one{regions[target]};
    scorer.program_image(fgvp::prompted_inputs(canvas, one, kind, config)[0], v);
  }
}

struct RiggedImage {
  fgvp::ImageBuffer img;
  std::vector<fgvp::Region> d_regions, plain_regions;
  std::vector<std::size_t> targets;
  std::vector<fgvp::Embedding> vectors;
};

/// Spare vectors first so a proposal that is the target of any record keeps
/// its target vector.
inline void program_all(fgvp::FixtureScorer& scorer, const std::vector<RiggedImage>& rigs,
                        const fgvp::RunConfig& config) {
  for (const auto& r : rigs) {
    for (std::size_t i = 0; i < r.plain_regions.size(); ++i) {
      program_regions(scorer, r.img, r.d_regions, r.plain_regions, i, spare(scorer.dim()), config);
    }
  }
  for (const auto& r : rigs) {
    for (std::size_t t = 0; t < r.targets.size(); ++t) {
      program_regions(scorer, r.img, r.d_regions, r.plain_regions, r.targets[t], r.vectors[t], config);
    }
  }
}

/// `correct`: the ground-truth proposal scores 1 against its caption;
/// otherwise it scores -1.
inline void rig_rec(fgvp::FixtureScorer& scorer, fgvp::SegmenterBackend& segmenter,
                    const std::vector<fgvp::RecRecord>& records, const fgvp::RunConfig& config,
                    const std::filesystem::path& root, bool correct) {
  std::map<std::string, std::size_t> caption_slot;
  std::vector<RiggedImage> rigs;
  for (const auto& rec : records) {
    const std::size_t k = caption_slot.emplace(rec.caption, caption_slot.size()).first->second;
    const fgvp::Embedding e = basis(scorer.dim(), k);
    scorer.program_text(config.caption_prefix + rec.caption, e);
    RiggedImage r{fgvp::read_image(root / rec.image), {}, {}, {}, {}};
    const fgvp::ImageBuffer& img = r.img;
    auto& d_regions = r.d_regions;
    auto& plain_regions = r.plain_regions;
    std::vector<fgvp::Box> hit_boxes;
    if (!rec.proposals.empty()) {
      for (const auto& b : rec.proposals) plain_regions.push_back({b, std::nullopt});
      hit_boxes = rec.proposals;
      if (config.needs_masks()) {
        for (auto& p : fgvp::propose_from_boxes(segmenter, img, rec.proposals, config.mask_filter)) {
          d_regions.push_back({p.box, std::move(p.mask)});
        }
      }
    } else {
      for (auto& p : fgvp::propose_grid(segmenter, img, fgvp::GridSpec{config.grid}, config.nms_threshold,
                                        config.mask_filter)) {
        hit_boxes.push_back(p.box);
        plain_regions.push_back({p.box, std::nullopt});
        d_regions.push_back({p.box, std::move(p.mask)});
      }
    }
    for (std::size_t t : targets_for(hit_boxes, rec.gt_box, correct)) {
      r.targets.push_back(t);
      r.vectors.push_back(correct ? e : -e);
    }
    rigs.push_back(std::move(r));
  }
  program_all(scorer, rigs, config);
}

/// Each ground-truth part's best proposal gets its label's vector (or the
/// negation).
inline void rig_partdet(fgvp::FixtureScorer& scorer, fgvp::SegmenterBackend& segmenter,
                        const std::vector<fgvp::PartRecord>& records, const fgvp::RunConfig& config,
                        const std::filesystem::path& root, bool correct) {
  std::map<std::string, std::size_t> label_slot;
  std::vector<RiggedImage> rigs;
  for (const auto& rec : records) {
    for (const auto& l : rec.labels) {
      const std::size_t k = label_slot.emplace(l, label_slot.size()).first->second;
      scorer.program_text(config.label_prefix + l, basis(scorer.dim(), k));
    }
    const fgvp::ImageBuffer img = fgvp::read_image(root / rec.image);
    const fgvp::PixelSpan xs = fgvp::pixel_span(rec.object_box.x, rec.object_box.w, img.width());
    const fgvp::PixelSpan ys = fgvp::pixel_span(rec.object_box.y, rec.object_box.h, img.height());
    RiggedImage r{fgvp::crop(img, rec.object_box), {}, {}, {}, {}};
    auto& d_regions = r.d_regions;
    auto& plain_regions = r.plain_regions;
    std::vector<fgvp::Box> boxes;
    for (auto& p : fgvp::propose_grid(segmenter, r.img, fgvp::GridSpec{config.grid}, config.nms_threshold,
                                      config.mask_filter)) {
      boxes.push_back({p.box.x + xs.begin, p.box.y + ys.begin, p.box.w, p.box.h});
      plain_regions.push_back({p.box, std::nullopt});
      d_regions.push_back({p.box, std::move(p.mask)});
    }
    for (const auto& part : rec.gt) {
      const fgvp::Embedding e = basis(scorer.dim(), label_slot.at(part.label));
      for (std::size_t t : targets_for(boxes, part.box, correct)) {
        r.targets.push_back(t);
        r.vectors.push_back(correct ? e : -e);
      }
    }
    rigs.push_back(std::move(r));
  }
  program_all(scorer, rigs, config);
}

}  // namespace testing
