// SPDX-License-Identifier: Apache-2.0
#include "fgvp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "fgvp/image_io.hpp"
#include "fgvp/parallel.hpp"

namespace fgvp {

namespace fs = std::filesystem;
using nlohmann::json;

double box_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<ImageBuffer> prompted_inputs(const PromptCanvas& canvas, std::span<const Region> regions, PromptKind kind,
                                         const RunConfig& config) {
  std::vector<ImageBuffer> out;
  out.reserve(regions.size());
  const SquareMode mode = config.square_for(kind);
  for (const Region& r : regions) {
    out.push_back(prepare_input(canvas.render(r, kind, config.style), mode, config.input_size));
  }
  return out;
}

std::vector<std::string> sample_negatives(const std::vector<RecRecord>& records, std::size_t index, int q,
                                          std::uint64_t seed) {
  if (index >= records.size()) throw std::out_of_range("sample_negatives: record index out of range");
  if (q <= 0) return {};
  std::vector<std::string> pool;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.image == records[index].image) continue;
    if (seen.insert(r.caption).second) pool.push_back(r.caption);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(q));
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

namespace {

ImageBuffer load_record_image(const fs::path& root, const std::string& ref) {
  const fs::path p(ref);
  return read_image(p.is_absolute() || root.empty() ? p : root / p);
}

ScoreMatrix ensemble_for(ScorerBackend& scorer, const PromptCanvas& canvas, const std::vector<Region>& d_regions,
                         const std::vector<Region>& plain_regions, const CaptionSet& captions,
                         const RunConfig& config) {
  std::vector<ScoreMatrix> per_kind;
  per_kind.reserve(config.prompts.size());
  for (PromptKind kind : config.prompts) {
    const auto& regions = needs_mask(kind) ? d_regions : plain_regions;
    const auto inputs = prompted_inputs(canvas, regions, kind, config);
    per_kind.push_back(similarity_matrix(scorer, inputs, captions));
  }
  return ensemble_scores(std::span<const ScoreMatrix>(per_kind), config.ensemble_mode);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void finish(EvalReport& report, const RunConfig& config, std::size_t images, const Timer& timer) {
  report.total = report.items.size();
  report.hits = static_cast<std::size_t>(std::count_if(report.items.begin(), report.items.end(),
                                                       [](const ItemResult& r) { return r.hit; }));
  report.accuracy = report.total ? static_cast<double>(report.hits) / static_cast<double>(report.total) : 0.0;
  std::sort(report.errors.begin(), report.errors.end());
  report.config = config_to_json(config);
  if (config.mask_timing || config.backend == "fixture") {
    report.seconds = 0;
    report.ips = 0;
  } else {
    report.seconds = timer.seconds();
    report.ips = report.seconds > 0 ? static_cast<double>(images) / report.seconds : 0.0;
  }
}

ItemResult rec_one(ScorerBackend& scorer, SegmenterBackend* segmenter, const std::vector<RecRecord>& records,
                   std::size_t index, const RunConfig& config, const fs::path& root) {
  const RecRecord& rec = records[index];
  ItemResult item;
  item.record = index;

  const ImageBuffer img = load_record_image(root, rec.image);
  const PromptCanvas canvas(img);
  const bool box_mode = !rec.proposals.empty();
  const bool masks = config.needs_masks();

  std::vector<Region> d_regions;
  std::vector<Region> plain_regions;
  std::vector<Box> hit_boxes;
  std::vector<std::optional<Box>> tight_boxes;
  if (box_mode) {
    for (const Box& b : rec.proposals) {
      plain_regions.push_back(Region{b, std::nullopt});
      hit_boxes.push_back(b);
    }
    if (masks) {
      if (segmenter == nullptr) throw std::invalid_argument("mask prompts need a segmenter");
      for (auto& p : propose_from_boxes(*segmenter, img, rec.proposals, config.mask_filter)) {
        tight_boxes.push_back(p.box);
        d_regions.push_back(Region{p.box, std::move(p.mask)});
      }
    } else {
      tight_boxes.assign(rec.proposals.size(), std::nullopt);
    }
  } else {
    if (segmenter == nullptr) throw std::invalid_argument("proposal-free records need a segmenter");
    for (auto& p : propose_grid(*segmenter, img, GridSpec{config.grid}, config.nms_threshold, config.mask_filter)) {
      hit_boxes.push_back(p.box);
      tight_boxes.push_back(p.box);
      plain_regions.push_back(Region{p.box, std::nullopt});
      d_regions.push_back(Region{p.box, std::move(p.mask)});
    }
    if (hit_boxes.empty()) throw std::runtime_error("segmenter returned no proposals");
  }

  const bool rel = uses_relations(config.post);
  const ParsedCaption parsed = parse_caption(rec.caption);
  CaptionSet captions{{rec.caption}, config.caption_prefix};
  if (rel) {
    captions.texts.push_back(parsed.head);
    captions.texts.push_back(parsed.anchor ? *parsed.anchor : parsed.head);
  }
  const std::size_t neg_begin = captions.texts.size();
  if (uses_subtraction(config.post)) {
    for (auto& n : sample_negatives(records, index, config.neg_q, config.seed)) captions.texts.push_back(std::move(n));
  }

  const ScoreMatrix s = ensemble_for(scorer, canvas, d_regions, plain_regions, captions, config);
  ScoreMatrix main = s.col(0);
  if (rel) {
    const std::vector<ParsedCaption> p{parsed};
    main = apply_relations(main, hit_boxes, p, s.col(1), s.col(2), img.height(), img.width(),
                           config.relation_aggregation);
  }
  const Eigen::Index q = s.cols() - static_cast<Eigen::Index>(neg_begin);
  if (q > 0) main = subtract_negatives(main, s.rightCols(q));

  const auto pick = static_cast<std::size_t>(select_region(main)[0]);
  item.selected = pick;
  item.selected_box = hit_boxes[pick];
  item.tight_box = tight_boxes[pick];
  item.iou = box_iou(hit_boxes[pick], rec.gt_box);
  item.hit = item.iou > 0.5;
  return item;
}

std::vector<ItemResult> part_one(ScorerBackend& scorer, SegmenterBackend& segmenter, const PartRecord& rec,
                                 std::size_t index, const RunConfig& config, const fs::path& root) {
  const ImageBuffer img = load_record_image(root, rec.image);
  const PixelSpan xs = pixel_span(rec.object_box.x, rec.object_box.w, img.width());
  const PixelSpan ys = pixel_span(rec.object_box.y, rec.object_box.h, img.height());
  const ImageBuffer object = crop(img, rec.object_box);
  const PromptCanvas canvas(object);

  std::vector<Region> d_regions;
  std::vector<Region> plain_regions;
  std::vector<Box> boxes;
  for (auto& p : propose_grid(segmenter, object, GridSpec{config.grid}, config.nms_threshold, config.mask_filter)) {
    boxes.push_back(Box{p.box.x + xs.begin, p.box.y + ys.begin, p.box.w, p.box.h});
    plain_regions.push_back(Region{p.box, std::nullopt});
    d_regions.push_back(Region{p.box, std::move(p.mask)});
  }
  if (boxes.empty()) throw std::runtime_error("segmenter returned no proposals");

  const CaptionSet captions{rec.labels, config.label_prefix};
  const ScoreMatrix s = ensemble_for(scorer, canvas, d_regions, plain_regions, captions, config);

  // label index -> chosen proposal
  std::map<std::size_t, std::size_t> chosen;
  if (config.matching == MatchingMode::Hungarian) {
    for (const auto& [n, m] : hungarian_assign(s)) chosen[static_cast<std::size_t>(m)] = static_cast<std::size_t>(n);
  } else {
    const auto labels = select_labels(s);
    for (std::size_t n = 0; n < labels.size(); ++n) {
      const auto m = static_cast<std::size_t>(labels[n]);
      auto it = chosen.find(m);
      if (it == chosen.end() || s(static_cast<Eigen::Index>(n), labels[n]) >
                                    s(static_cast<Eigen::Index>(it->second), labels[n])) {
        chosen[m] = n;
      }
    }
  }

  std::vector<ItemResult> items;
  for (const auto& part : rec.gt) {
    ItemResult item;
    item.record = index;
    item.label = part.label;
    const auto m = static_cast<std::size_t>(
        std::find(rec.labels.begin(), rec.labels.end(), part.label) - rec.labels.begin());
    if (auto it = chosen.find(m); it != chosen.end()) {
      item.selected = it->second;
      item.selected_box = boxes[it->second];
      item.tight_box = boxes[it->second];
      item.iou = box_iou(boxes[it->second], part.box);
      item.hit = item.iou > 0.5;
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace

EvalReport evaluate_rec(ScorerBackend& scorer, SegmenterBackend* segmenter, const std::vector<RecRecord>& records,
                        const RunConfig& config, const fs::path& image_root) {
  if (records.empty()) throw std::invalid_argument("evaluate_rec: no records");
  config.validate();
  if (config.needs_masks() && segmenter == nullptr) {
    throw std::invalid_argument("prompt ensemble " + format_ensemble(config.prompts) + " needs a segmenter");
  }
  const Timer timer;
  CachedScorer cached(scorer);
  std::vector<ItemResult> items(records.size());
  std::vector<std::optional<std::string>> errors(records.size());
  parallel_for(records.size(), config.jobs, [&](std::size_t i) {
    try {
      items[i] = rec_one(cached, segmenter, records, i, config, image_root);
    } catch (const std::exception& e) {
      items[i] = ItemResult{};
      items[i].record = i;
      items[i].error = e.what();
      errors[i] = e.what();
    }
  });
  EvalReport report;
  report.task = "rec";
  report.records = records.size();
  report.items = std::move(items);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) report.errors.emplace_back(i, *errors[i]);
  }
  finish(report, config, records.size(), timer);
  return report;
}

EvalReport evaluate_partdet(ScorerBackend& scorer, SegmenterBackend& segmenter, const std::vector<PartRecord>& records,
                            const RunConfig& config, const fs::path& image_root) {
  if (records.empty()) throw std::invalid_argument("evaluate_partdet: no records");
  config.validate();
  const Timer timer;
  CachedScorer cached(scorer);
  std::vector<std::vector<ItemResult>> per_record(records.size());
  std::vector<std::optional<std::string>> errors(records.size());
  parallel_for(records.size(), config.jobs, [&](std::size_t i) {
    try {
      per_record[i] = part_one(cached, segmenter, records[i], i, config, image_root);
    } catch (const std::exception& e) {
      per_record[i].clear();
      for (const auto& part : records[i].gt) {
        ItemResult item;
        item.record = i;
        item.label = part.label;
        item.error = e.what();
        per_record[i].push_back(std::move(item));
      }
      errors[i] = e.what();
    }
  });
  EvalReport report;
  report.task = "partdet";
  report.records = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (auto& item : per_record[i]) report.items.push_back(std::move(item));
    if (errors[i]) report.errors.emplace_back(i, *errors[i]);
  }
  finish(report, config, records.size(), timer);
  return report;
}

namespace {

json box_json(const std::optional<Box>& b) {
  if (!b) return nullptr;
  return json::array({b->x, b->y, b->w, b->h});
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json items = json::array();
  for (const auto& it : report.items) {
    json j;
    j["record"] = it.record;
    if (!it.label.empty()) j["label"] = it.label;
    j["hit"] = it.hit;
    j["iou"] = it.iou;
    j["selected"] = it.selected ? json(*it.selected) : json(nullptr);
    j["selected_box"] = box_json(it.selected_box);
    j["tight_box"] = box_json(it.tight_box);
    if (it.error) j["error"] = *it.error;
    items.push_back(std::move(j));
  }
  json errors = json::array();
  for (const auto& [rec, msg] : report.errors) errors.push_back({{"record", rec}, {"message", msg}});
  json j;
  j["task"] = report.task;
  j["records"] = report.records;
  j["hits"] = report.hits;
  j["total"] = report.total;
  j["accuracy"] = report.accuracy;
  j["config"] = report.config;
  j["seconds"] = report.seconds;
  j["ips"] = report.ips;
  j["items"] = std::move(items);
  j["errors"] = std::move(errors);
  return j;
}

std::string report_to_markdown(const EvalReport& report) {
  std::ostringstream out;
  out << "# " << (report.task == "rec" ? "Referring expression comprehension" : "Part detection") << "\n\n";
  out << "| metric | value |\n|---|---|\n";
  out << "| accuracy | " << std::fixed << std::setprecision(4) << report.accuracy << " |\n";
  out << "| hits | " << report.hits << " |\n";
  out << "| total | " << report.total << " |\n";
  out << "| records | " << report.records << " |\n";
  out << "| errors | " << report.errors.size() << " |\n";
  out << "| ips | " << std::setprecision(3) << report.ips << " |\n\n";
  out << "## Config\n\n```json\n" << report.config.dump(2) << "\n```\n";
  if (!report.errors.empty()) {
    out << "\n## Errors\n\n";
    for (const auto& [rec, msg] : report.errors) out << "- record " << rec << ": " << msg << "\n";
  }
  out << "\n## Items\n\n| record | label | hit | iou | selected |\n|---|---|---|---|---|\n";
  for (const auto& it : report.items) {
    out << "| " << it.record << " | " << it.label << " | " << (it.hit ? "yes" : "no") << " | " << std::setprecision(4)
        << it.iou << " | " << (it.selected ? std::to_string(*it.selected) : "-") << " |\n";
  }
  return out.str();
}

void write_report(const EvalReport& report, const fs::path& path, ReportFormat format) {
  const std::string body = format == ReportFormat::Json ? report_to_json(report).dump(2) + "\n"
                                                        : report_to_markdown(report);
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report: " + tmp.string());
    out << body;
    out.flush();
    if (!out) throw std::runtime_error("short write: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot write report " + path.string() + ": " + ec.message());
  }
}

}  // namespace fgvp
