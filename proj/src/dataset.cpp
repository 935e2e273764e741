// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "fgvp/eval.hpp"
#include "fgvp/log.hpp"

namespace fgvp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

class LineContext {
 public:
  LineContext(const fs::path& path, std::size_t line) : path_(path), line_(line) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw DatasetError(path_.string() + ":" + std::to_string(line_) + ": " + msg, line_);
  }

  const json& require(const json& obj, const char* key) const {
    if (!obj.contains(key)) fail(std::string("missing required field '") + key + "'");
    return obj.at(key);
  }

  std::string string_field(const json& obj, const char* key, bool non_empty = true) const {
    const json& v = require(obj, key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    std::string s = trim(v.get<std::string>());
    if (non_empty && s.empty()) fail(std::string("field '") + key + "' must be non-empty");
    return s;
  }

  Box box(const json& v, const std::string& what) const {
    if (!v.is_array() || v.size() != 4) fail(what + " must be [x, y, w, h]");
    Box b;
    double* out[4] = {&b.x, &b.y, &b.w, &b.h};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!v[i].is_number()) fail(what + " must contain numbers");
      *out[i] = v[i].get<double>();
    }
    if (!b.valid()) fail(what + " must have positive width and height");
    return b;
  }

  void warn_unknown(const json& obj, const std::set<std::string>& known, std::vector<std::string>& warnings) const {
    for (const auto& [k, _] : obj.items()) {
      if (known.count(k) == 0) {
        warnings.push_back(path_.string() + ":" + std::to_string(line_) + ": unknown field '" + k + "' ignored");
        warn(warnings.back());
      }
    }
  }

 private:
  const fs::path& path_;
  std::size_t line_;
};

template <class Record, class Parse>
Dataset<Record> load_jsonl(const fs::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset: " + path.string(), 0);
  Dataset<Record> ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    LineContext ctx(path, lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      ctx.fail(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) ctx.fail("record must be a JSON object");
    ds.records.push_back(parse(ctx, obj, ds.warnings));
  }
  if (ds.records.empty()) throw DatasetError(path.string() + ": no records", 0);
  return ds;
}

json box_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

template <class Record, class ToJson>
void save_jsonl(const fs::path& path, const std::vector<Record>& records, ToJson to_json_fn) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset: " + path.string());
  for (const auto& r : records) out << to_json_fn(r).dump() << '\n';
  if (!out) throw std::runtime_error("short write: " + path.string());
}

}  // namespace

Dataset<RecRecord> load_rec_jsonl(const fs::path& path) {
  static const std::set<std::string> kKnown = {"image", "proposals", "caption", "gt_box"};
  return load_jsonl<RecRecord>(path, [](const LineContext& ctx, const json& obj, std::vector<std::string>& warnings) {
    ctx.warn_unknown(obj, kKnown, warnings);
    RecRecord r;
    r.image = ctx.string_field(obj, "image");
    r.caption = ctx.string_field(obj, "caption");
    r.gt_box = ctx.box(ctx.require(obj, "gt_box"), "gt_box");
    if (obj.contains("proposals")) {
      const json& props = obj.at("proposals");
      if (!props.is_array()) ctx.fail("proposals must be an array of boxes");
      for (std::size_t i = 0; i < props.size(); ++i) {
        r.proposals.push_back(ctx.box(props[i], "proposals[" + std::to_string(i) + "]"));
      }
    }
    return r;
  });
}

Dataset<PartRecord> load_part_jsonl(const fs::path& path) {
  static const std::set<std::string> kKnown = {"image", "object_box", "labels", "gt"};
  return load_jsonl<PartRecord>(path, [](const LineContext& ctx, const json& obj, std::vector<std::string>& warnings) {
    ctx.warn_unknown(obj, kKnown, warnings);
    PartRecord r;
    r.image = ctx.string_field(obj, "image");
    r.object_box = ctx.box(ctx.require(obj, "object_box"), "object_box");
    const json& labels = ctx.require(obj, "labels");
    if (!labels.is_array() || labels.empty()) ctx.fail("labels must be a non-empty array of strings");
    for (const auto& l : labels) {
      if (!l.is_string() || trim(l.get<std::string>()).empty()) ctx.fail("labels must be non-empty strings");
      r.labels.push_back(trim(l.get<std::string>()));
    }
    const json& gt = ctx.require(obj, "gt");
    if (!gt.is_array()) ctx.fail("gt must be an array");
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!gt[i].is_object()) ctx.fail("gt entries must be objects");
      PartAnnotation a;
      a.label = ctx.string_field(gt[i], "label");
      a.box = ctx.box(ctx.require(gt[i], "box"), "gt[" + std::to_string(i) + "].box");
      if (std::find(r.labels.begin(), r.labels.end(), a.label) == r.labels.end()) {
        ctx.fail("gt label '" + a.label + "' is not listed in labels");
      }
      r.gt.push_back(std::move(a));
    }
    return r;
  });
}

void save_rec_jsonl(const fs::path& path, const std::vector<RecRecord>& records) {
  save_jsonl(path, records, [](const RecRecord& r) {
    json props = json::array();
    for (const auto& b : r.proposals) props.push_back(box_json(b));
    return json{{"image", r.image}, {"proposals", props}, {"caption", r.caption}, {"gt_box", box_json(r.gt_box)}};
  });
}

void save_part_jsonl(const fs::path& path, const std::vector<PartRecord>& records) {
  save_jsonl(path, records, [](const PartRecord& r) {
    json gt = json::array();
    for (const auto& a : r.gt) gt.push_back({{"label", a.label}, {"box", box_json(a.box)}});
    return json{{"image", r.image}, {"object_box", box_json(r.object_box)}, {"labels", r.labels}, {"gt", gt}};
  });
}

}  // namespace fgvp
