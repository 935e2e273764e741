// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion, IoU@0.5 accuracy and end-to-end benchmark runs for
// referring expression comprehension and part detection.
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fgvp/backends.hpp"
#include "fgvp/config.hpp"

namespace fgvp {

struct RecRecord {
  std::string image;
  std::vector<Box> proposals;  // empty: proposal-free (grid) mode
  std::string caption;
  Box gt_box;

  friend bool operator==(const RecRecord&, const RecRecord&) = default;
};

struct PartAnnotation {
  std::string label;
  Box box;
  friend bool operator==(const PartAnnotation&, const PartAnnotation&) = default;
};

struct PartRecord {
  std::string image;
  Box object_box;
  std::vector<std::string> labels;
  std::vector<PartAnnotation> gt;

  friend bool operator==(const PartRecord&, const PartRecord&) = default;
};

/// Malformed dataset file; the message names the file and line.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

template <typename Record>
struct Dataset {
  std::vector<Record> records;
  std::vector<std::string> warnings;
};

Dataset<RecRecord> load_rec_jsonl(const std::filesystem::path& path);
Dataset<PartRecord> load_part_jsonl(const std::filesystem::path& path);
void save_rec_jsonl(const std::filesystem::path& path, const std::vector<RecRecord>& records);
void save_part_jsonl(const std::filesystem::path& path, const std::vector<PartRecord>& records);

double box_iou(const Box& a, const Box& b);

/// One scored unit: a REC record, or one ground-truth part.
struct ItemResult {
  std::size_t record = 0;
  std::string label;  // part label; empty for REC
  bool hit = false;
  double iou = 0;
  std::optional<std::size_t> selected;
  std::optional<Box> selected_box;  // box used for the hit test
  std::optional<Box> tight_box;     // tight mask box, when a mask exists
  std::optional<std::string> error;
};

struct EvalReport {
  std::string task;  // "rec" or "partdet"
  std::vector<ItemResult> items;
  std::size_t records = 0;
  std::size_t hits = 0;
  std::size_t total = 0;
  double accuracy = 0;
  std::vector<std::pair<std::size_t, std::string>> errors;  // (record, message)
  nlohmann::json config;
  double seconds = 0;
  double ips = 0;
};

EvalReport evaluate_rec(ScorerBackend& scorer, SegmenterBackend* segmenter, const std::vector<RecRecord>& records,
                        const RunConfig& config, const std::filesystem::path& image_root = {});

EvalReport evaluate_partdet(ScorerBackend& scorer, SegmenterBackend& segmenter, const std::vector<PartRecord>& records,
                            const RunConfig& config, const std::filesystem::path& image_root = {});

/// Prompted, squared scorer inputs for every region under one prompt kind.
std::vector<ImageBuffer> prompted_inputs(const PromptCanvas& canvas, std::span<const Region> regions, PromptKind kind,
                                         const RunConfig& config);

/// Negative captions for one record: up to q captions of records whose image
/// differs, sampled without replacement from a generator seeded by
/// (seed, record index).
std::vector<std::string> sample_negatives(const std::vector<RecRecord>& records, std::size_t index, int q,
                                          std::uint64_t seed);

enum class ReportFormat { Json, Markdown };
nlohmann::json report_to_json(const EvalReport& report);
std::string report_to_markdown(const EvalReport& report);
/// Writes to a temp file and renames over the target.
void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);

}  // namespace fgvp
