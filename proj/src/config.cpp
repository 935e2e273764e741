// SPDX-License-Identifier: Apache-2.0
#include "fgvp/config.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace fgvp {

std::string_view to_string(PostChain p) {
  switch (p) {
    case PostChain::None:
      return "none";
    case PostChain::Relations:
      return "relations";
    case PostChain::Subtract:
      return "subtract";
    case PostChain::RelationsSubtract:
      return "relations+subtract";
  }
  return "none";
}

PostChain parse_post_chain(std::string_view text) {
  if (text == "none") return PostChain::None;
  if (text == "relations") return PostChain::Relations;
  if (text == "subtract") return PostChain::Subtract;
  if (text == "relations+subtract" || text == "subtract+relations") return PostChain::RelationsSubtract;
  throw std::invalid_argument("unknown post-processing chain '" + std::string(text) + "'");
}

std::string_view to_string(MatchingMode m) { return m == MatchingMode::Hungarian ? "hungarian" : "argmax"; }

MatchingMode parse_matching_mode(std::string_view text) {
  if (text == "hungarian") return MatchingMode::Hungarian;
  if (text == "argmax") return MatchingMode::Argmax;
  throw std::invalid_argument("unknown matching mode '" + std::string(text) + "'");
}

bool RunConfig::needs_masks() const { return std::any_of(prompts.begin(), prompts.end(), needs_mask); }

void RunConfig::validate() const {
  if (prompts.empty()) throw std::invalid_argument("at least one prompt kind is required");
  style.validate();
  if (input_size < 1) throw std::invalid_argument("input size must be >= 1");
  if (grid < 1) throw std::invalid_argument("grid size must be >= 1");
  if (!(nms_threshold >= 0 && nms_threshold <= 1)) throw std::invalid_argument("NMS threshold must lie in [0,1]");
  if (neg_q < 0) throw std::invalid_argument("negative caption count must be >= 0");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  if (backend != "fixture" && backend != "remote") throw std::invalid_argument("backend must be fixture or remote");
  if (needs_masks() && !use_segmenter) {
    throw std::invalid_argument("prompt ensemble " + format_ensemble(prompts) + " needs masks but no segmenter is configured");
  }
}

namespace {

nlohmann::json color_json(Color c) { return nlohmann::json::array({c.r, c.g, c.b}); }

}  // namespace

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["prompts"] = format_ensemble(c.prompts);
  j["post"] = to_string(c.post);
  j["relation_aggregation"] = to_string(c.relation_aggregation);
  j["ensemble_mode"] = to_string(c.ensemble_mode);
  j["sigma"] = c.style.blur_sigma;
  j["thickness"] = c.style.line_thickness;
  j["line_color"] = color_json(c.style.line_color);
  j["fill_color"] = color_json(c.style.fill_color);
  j["alpha"] = c.style.alpha;
  j["keypoint_radius"] = c.style.keypoint_radius;
  j["expand"] = c.style.expand_scale;
  j["square"] = c.square ? std::string(to_string(*c.square)) : std::string("auto");
  j["input_size"] = c.input_size;
  j["grid"] = c.grid;
  j["nms"] = c.nms_threshold;
  j["mask_filter"] = c.mask_filter.enabled;
  j["min_island"] = c.mask_filter.min_island;
  j["max_hole"] = c.mask_filter.max_hole;
  j["matching"] = to_string(c.matching);
  j["neg_q"] = c.neg_q;
  j["seed"] = c.seed;
  j["caption_prefix"] = c.caption_prefix;
  j["label_prefix"] = c.label_prefix;
  j["backend"] = c.backend;
  if (c.backend == "remote") j["url"] = c.url;
  if (c.backend == "fixture") j["fixture_dim"] = c.fixture_dim;
  j["segmenter"] = c.use_segmenter;
  j["jobs"] = c.jobs;
  return j;
}

}  // namespace fgvp
