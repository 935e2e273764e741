// SPDX-License-Identifier: Apache-2.0
#include "fgvp/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fgvp/backends.hpp"
#include "fgvp/eval.hpp"
#include "fgvp/image_io.hpp"

namespace fgvp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Color parse_color(const std::string& text) {
  static const std::map<std::string, Color> kNamed = {
      {"red", palette::kRed},   {"green", palette::kGreen},   {"yellow", palette::kYellow},
      {"cyan", palette::kCyan}, {"blue", palette::kBlue},     {"purple", palette::kPurple},
      {"black", palette::kBlack}};
  if (auto it = kNamed.find(text); it != kNamed.end()) return it->second;
  std::array<int, 3> v{};
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (in >> v[0] >> c1 >> v[1] >> c2 >> v[2] && c1 == ',' && c2 == ',' && in.peek() == EOF &&
      std::all_of(v.begin(), v.end(), [](int x) { return x >= 0 && x <= 255; })) {
    return Color{static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]), static_cast<std::uint8_t>(v[2])};
  }
  throw UsageError("bad color '" + text + "': use a name or R,G,B");
}

/// Raw flag values, resolved into a RunConfig after parsing.
struct Flags {
  std::string prompts = "d4";
  std::string post = "none";
  std::string aggregation = "max";
  std::string ensemble = "mean";
  std::string square = "auto";
  std::string line_color = "red";
  std::string fill_color = "green";
  std::string matching = "hungarian";
  std::string mask_filter = "on";
  std::string segmenter = "on";
  std::string report;
  std::string format = "json";
  std::string cache_dir;
  bool no_cache = false;
  bool strict = false;
  RunConfig config;
};

void add_style_flags(CLI::App& cmd, Flags& f) {
  auto& s = f.config.style;
  cmd.add_option("--sigma", s.blur_sigma, "Gaussian blur sigma for reverse-blur prompts (default 100, best blur strength)")
      ->capture_default_str();
  cmd.add_option("--thickness", s.line_thickness, "Outline thickness in pixels (default 2, best line width)")
      ->capture_default_str();
  cmd.add_option("--line-color", f.line_color, "Outline color, name or R,G,B (default red, best line color)")
      ->capture_default_str();
  cmd.add_option("--fill-color", f.fill_color, "Color-prompt fill, name or R,G,B (default green, best fill color)")
      ->capture_default_str();
  cmd.add_option("--alpha", s.alpha, "Color-prompt fill opacity (default 0.5, best transparency)")->capture_default_str();
  cmd.add_option("--keypoint-radius", s.keypoint_radius, "Keypoint disc radius in pixels")->capture_default_str();
  cmd.add_option("--expand", s.expand_scale, "Region expand scale about its center (default 1.0, unexpanded)")
      ->capture_default_str();
}

void add_backend_flags(CLI::App& cmd, Flags& f) {
  auto& c = f.config;
  cmd.add_option("--backend", c.backend, "Model backend")->check(CLI::IsMember({"fixture", "remote"}))->capture_default_str();
  cmd.add_option("--url", c.url, "Model server base URL for --backend remote")->capture_default_str();
  cmd.add_option("--segmenter", f.segmenter, "Use the segmenter backend (required for mask prompts)")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  cmd.add_option("--seed", c.seed, "Seed for the fixture backend and negative-caption sampling")->capture_default_str();
  cmd.add_option("--fixture-dim", c.fixture_dim, "Embedding size of the fixture backend")->capture_default_str();
  cmd.add_option("--cache-dir", f.cache_dir, "Embedding cache directory (default $FGVP_CACHE_DIR or ~/.cache/fgvp)");
  cmd.add_flag("--no-cache", f.no_cache, "Disable the on-disk cache for remote calls");
}

void add_eval_flags(CLI::App& cmd, Flags& f, bool rec) {
  auto& c = f.config;
  cmd.add_option("--prompts", f.prompts, "Prompt ensemble joined with '|', e.g. p|d1|d3|d4 (default d4, best single prompt)")
      ->capture_default_str();
  cmd.add_option("--ensemble", f.ensemble, "Ensemble reduction: mean or softmax-mean")->capture_default_str();
  cmd.add_option("--square", f.square, "Square mode: auto, stretch, pad or center-crop")->capture_default_str();
  cmd.add_option("--input-size", c.input_size, "Scorer input side in pixels")->capture_default_str();
  cmd.add_option("--grid", c.grid, "Grid points per side for proposal-free mode (default 16, best grid)")
      ->capture_default_str();
  cmd.add_option("--nms", c.nms_threshold, "Mask NMS IoU threshold (default 0.7, best threshold)")->capture_default_str();
  cmd.add_option("--mask-filter", f.mask_filter, "Small island / hole cleanup of proposal masks")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  cmd.add_option("--jobs", c.jobs, "Records evaluated in parallel")->capture_default_str();
  cmd.add_flag("--mask-timing", c.mask_timing, "Zero the timing fields so reports compare byte for byte");
  cmd.add_flag("--strict", f.strict, "Exit with status 2 when any record fails");
  cmd.add_option("--report", f.report, "Report output path");
  cmd.add_option("--format", f.format, "Report format")->check(CLI::IsMember({"json", "markdown"}))->capture_default_str();
  if (rec) {
    cmd.add_option("--post", f.post, "Post-processing: none, relations, subtract or relations+subtract")
        ->capture_default_str();
    cmd.add_option("--relation-agg", f.aggregation, "Anchor aggregation for relations: max or sum")
        ->check(CLI::IsMember({"max", "sum"}))
        ->capture_default_str();
    cmd.add_option("--neg-q", c.neg_q, "Negative captions per record for subtraction")->capture_default_str();
    cmd.add_option("--caption-prefix", c.caption_prefix, "Text prepended to every caption");
  } else {
    cmd.add_option("--matching", f.matching, "Part assignment: hungarian or argmax")
        ->check(CLI::IsMember({"hungarian", "argmax"}))
        ->capture_default_str();
    cmd.add_option("--label-prefix", c.label_prefix, "Text prepended to every part label")->capture_default_str();
  }
  add_style_flags(cmd, f);
  add_backend_flags(cmd, f);
}

RunConfig resolve(Flags& f) {
  RunConfig c = f.config;
  try {
    c.prompts = parse_ensemble(f.prompts);
    c.post = parse_post_chain(f.post);
    c.relation_aggregation = f.aggregation == "sum" ? RelationAggregation::Sum : RelationAggregation::Max;
    c.ensemble_mode = parse_ensemble_mode(f.ensemble);
    if (f.square == "auto") {
      c.square.reset();
    } else {
      c.square = parse_square_mode(f.square);
    }
    c.style.line_color = parse_color(f.line_color);
    c.style.fill_color = parse_color(f.fill_color);
    c.matching = parse_matching_mode(f.matching);
    c.mask_filter.enabled = f.mask_filter == "on";
    c.use_segmenter = f.segmenter == "on";
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

struct Backends {
  std::unique_ptr<ScorerBackend> scorer;
  std::unique_ptr<SegmenterBackend> segmenter;
};

Backends make_backends(const RunConfig& c, const Flags& f) {
  Backends b;
  if (c.backend == "fixture") {
    FixtureSpec spec;
    spec.seed = c.seed;
    spec.dim = c.fixture_dim;
    b.scorer = std::make_unique<FixtureScorer>(spec);
    if (c.use_segmenter) b.segmenter = std::make_unique<FixtureSegmenter>();
    return b;
  }
  RemoteConfig rc;
  rc.base_url = c.url;
  rc.validate();
  auto client = std::make_shared<RemoteClient>(rc);
  std::shared_ptr<DiskCache> cache;
  if (!f.no_cache) cache = std::make_shared<DiskCache>(f.cache_dir.empty() ? default_cache_dir() : fs::path(f.cache_dir));
  b.scorer = std::make_unique<RemoteScorer>(client, cache);
  if (c.use_segmenter) b.segmenter = std::make_unique<RemoteSegmenter>(client, cache);
  return b;
}

int finish_eval(const EvalReport& report, const Flags& f, std::ostream& out, std::ostream& err) {
  for (const auto& [rec, msg] : report.errors) err << "fgvp: record " << rec << ": " << msg << "\n";
  out << "accuracy: " << report.accuracy << " (" << report.hits << "/" << report.total << ")";
  if (!report.errors.empty()) out << ", " << report.errors.size() << " record error(s)";
  out << "\n";
  if (!f.report.empty()) {
    write_report(report, f.report, f.format == "markdown" ? ReportFormat::Markdown : ReportFormat::Json);
    out << "report: " << f.report << "\n";
  }
  return f.strict && !report.errors.empty() ? kExitRecordErrors : kExitOk;
}

int cmd_rec(const std::string& dataset, Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve(f);
  const auto ds = load_rec_jsonl(dataset);
  if (!c.use_segmenter) {
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (ds.records[i].proposals.empty()) {
        throw UsageError("record " + std::to_string(i) + " has no proposals and the segmenter is off");
      }
    }
  }
  Backends b = make_backends(c, f);
  const EvalReport report = evaluate_rec(*b.scorer, b.segmenter.get(), ds.records, c, fs::path(dataset).parent_path());
  return finish_eval(report, f, out, err);
}

int cmd_partdet(const std::string& dataset, Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve(f);
  if (!c.use_segmenter) throw UsageError("part detection needs the segmenter");
  const auto ds = load_part_jsonl(dataset);
  Backends b = make_backends(c, f);
  const EvalReport report =
      evaluate_partdet(*b.scorer, *b.segmenter, ds.records, c, fs::path(dataset).parent_path());
  return finish_eval(report, f, out, err);
}

std::vector<Region> load_geometry(const fs::path& path, int height, int width) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open geometry file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  std::vector<Box> boxes;
  std::vector<BinaryMask> masks;
  try {
    if (!j.is_object()) throw std::runtime_error("expected an object with \"boxes\" and/or \"masks\"");
    if (j.contains("boxes")) {
      for (const auto& b : j.at("boxes")) {
        const auto v = b.get<std::vector<double>>();
        if (v.size() != 4 || !(v[2] > 0 && v[3] > 0)) throw std::runtime_error("boxes must be [x, y, w, h] with w, h > 0");
        boxes.push_back(Box{v[0], v[1], v[2], v[3]});
      }
    }
    if (j.contains("masks")) {
      for (const auto& m : j.at("masks")) {
        BinaryMask mask = rle_decode(m.get<RleMask>());
        if (mask.height() != height || mask.width() != width) throw std::runtime_error("mask size differs from image");
        masks.push_back(std::move(mask));
      }
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (!boxes.empty() && !masks.empty() && boxes.size() != masks.size()) {
    throw std::runtime_error(path.string() + ": boxes and masks differ in count");
  }
  std::vector<Region> regions;
  if (!masks.empty()) {
    for (std::size_t i = 0; i < masks.size(); ++i) {
      Region r = Region::from_mask(std::move(masks[i]));
      if (!boxes.empty()) r.box = boxes[i];
      regions.push_back(std::move(r));
    }
  } else {
    for (const Box& b : boxes) regions.push_back(Region{b, std::nullopt});
  }
  if (regions.empty()) throw std::runtime_error(path.string() + ": no boxes or masks");
  return regions;
}

int cmd_render(const std::string& image_path, const std::string& geometry, const std::string& out_dir, Flags& f,
               std::ostream& out) {
  std::vector<PromptKind> kinds;
  RunConfig c = f.config;
  try {
    kinds = parse_ensemble(f.prompts);
    c.style.line_color = parse_color(f.line_color);
    c.style.fill_color = parse_color(f.fill_color);
    c.style.validate();
    c.use_segmenter = f.segmenter == "on";
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const ImageBuffer img = read_image(image_path);
  std::vector<Region> regions = load_geometry(geometry, img.height(), img.width());
  const bool has_masks = std::all_of(regions.begin(), regions.end(), [](const Region& r) { return r.mask.has_value(); });
  if (!has_masks && std::any_of(kinds.begin(), kinds.end(), needs_mask)) {
    if (!c.use_segmenter) throw UsageError("mask prompts need masks in the geometry file or the segmenter");
    Backends b = make_backends(c, f);
    std::vector<Box> boxes;
    for (const auto& r : regions) boxes.push_back(r.box);
    auto props = propose_from_boxes(*b.segmenter, img, boxes, c.mask_filter);
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (!regions[i].mask) regions[i].mask = std::move(props[i].mask);
    }
  }
  fs::create_directories(out_dir);
  const PromptCanvas canvas(img);
  const std::string stem = fs::path(image_path).stem().string();
  std::size_t written = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (PromptKind k : kinds) {
      const fs::path file = fs::path(out_dir) / (stem + "_" + std::to_string(i) + "_" + std::string(to_string(k)) + ".png");
      write_png(file, canvas.render(regions[i], k, c.style));
      ++written;
    }
  }
  out << "wrote " << written << " image(s) to " << out_dir << "\n";
  return kExitOk;
}

int cmd_cache(const std::string& action, const std::string& dir, std::ostream& out) {
  DiskCache cache(dir.empty() ? default_cache_dir() : fs::path(dir));
  if (action == "stats") {
    const CacheStats s = cache.stats();
    out << "directory: " << cache.dir().string() << "\nentries: " << s.entries << "\nbytes: " << s.bytes << "\n";
  } else {
    out << "removed " << cache.clear() << " entries\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fine-grained visual prompting: render prompts and run zero-shot benchmarks"};
  app.name("fgvp");
  app.require_subcommand(1);

  Flags render_flags;
  std::string image_path, geometry, out_dir = ".";
  auto* render = app.add_subcommand("render", "Render prompted images for boxes or masks");
  render->add_option("image", image_path, "Input image (PNG or JPEG)")->required();
  render->add_option("--geometry", geometry, "JSON with \"boxes\" [[x,y,w,h],...] and/or RLE \"masks\"")->required();
  render->add_option("--kind", render_flags.prompts, "Prompt kind or '|' ensemble, e.g. d4 or b1|c1")->capture_default_str();
  render->add_option("--out", out_dir, "Output directory")->capture_default_str();
  add_style_flags(*render, render_flags);
  add_backend_flags(*render, render_flags);

  Flags rec_flags;
  std::string rec_dataset;
  auto* rec = app.add_subcommand("rec", "Referring expression comprehension benchmark");
  rec->add_option("dataset", rec_dataset, "RecRecord JSONL file")->required();
  add_eval_flags(*rec, rec_flags, true);

  Flags part_flags;
  std::string part_dataset;
  auto* part = app.add_subcommand("partdet", "Part detection benchmark without box proposals");
  part->add_option("dataset", part_dataset, "PartRecord JSONL file")->required();
  add_eval_flags(*part, part_flags, false);

  std::string cache_action, cache_dir;
  auto* cache = app.add_subcommand("cache", "Inspect or clear the embedding cache");
  cache->add_option("action", cache_action, "stats or clear")->required()->check(CLI::IsMember({"stats", "clear"}));
  cache->add_option("--cache-dir", cache_dir, "Cache directory (default $FGVP_CACHE_DIR or ~/.cache/fgvp)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (render->parsed()) return cmd_render(image_path, geometry, out_dir, render_flags, out);
    if (rec->parsed()) return cmd_rec(rec_dataset, rec_flags, out, err);
    if (part->parsed()) return cmd_partdet(part_dataset, part_flags, out, err);
    return cmd_cache(cache_action, cache_dir, out);
  } catch (const UsageError& e) {
    err << "fgvp: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "fgvp: error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace fgvp::cli
