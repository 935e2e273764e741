// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fgvp/prompting.hpp"
#include "fgvp/proposals.hpp"
#include "fgvp/scoring.hpp"

namespace fgvp {

enum class PostChain { None, Relations, Subtract, RelationsSubtract };
std::string_view to_string(PostChain p);
PostChain parse_post_chain(std::string_view text);
inline bool uses_relations(PostChain p) { return p == PostChain::Relations || p == PostChain::RelationsSubtract; }
inline bool uses_subtraction(PostChain p) { return p == PostChain::Subtract || p == PostChain::RelationsSubtract; }

enum class MatchingMode { Hungarian, Argmax };
std::string_view to_string(MatchingMode m);
MatchingMode parse_matching_mode(std::string_view text);

/// Fully resolved run configuration. Defaults follow the best settings
/// reported for each knob.
struct RunConfig {
  std::vector<PromptKind> prompts{PromptKind::D4};
  PostChain post = PostChain::None;
  RelationAggregation relation_aggregation = RelationAggregation::Max;
  EnsembleMode ensemble_mode = EnsembleMode::Mean;
  PromptStyle style;
  /// nullopt: stretch for crop prompts, pad for the rest.
  std::optional<SquareMode> square;
  int input_size = 224;
  int grid = 16;
  double nms_threshold = 0.7;
  MaskFilterOptions mask_filter;
  MatchingMode matching = MatchingMode::Hungarian;
  int neg_q = 10;
  std::uint64_t seed = 0;
  std::string caption_prefix;
  std::string label_prefix = "a photo of ";
  std::string backend = "fixture";
  std::string url = "http://127.0.0.1:8000";
  bool use_segmenter = true;
  int fixture_dim = 512;
  int jobs = 1;
  bool mask_timing = false;

  SquareMode square_for(PromptKind kind) const { return square ? *square : default_square_mode(kind); }
  bool needs_masks() const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& c);

}  // namespace fgvp
