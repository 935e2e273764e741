// SPDX-License-Identifier: Apache-2.0
#include "fgvp/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "fgvp/digest.hpp"

namespace fgvp {

std::vector<Embedding> ScorerBackend::embed_images(std::span<const ImageBuffer> imgs) {
  std::vector<Embedding> out;
  out.reserve(imgs.size());
  for (const auto& img : imgs) out.push_back(embed_image(img));
  return out;
}

std::vector<Embedding> ScorerBackend::embed_texts(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t));
  return out;
}

std::string image_key(const ImageBuffer& img) {
  std::string buf = "img:" + std::to_string(img.height()) + "x" + std::to_string(img.width()) + ":";
  const auto px = img.bytes();
  buf.append(reinterpret_cast<const char*>(px.data()), px.size());
  const Sha256 h = sha256(buf);
  return to_hex(h);
}

Embedding CachedScorer::embed_image(const ImageBuffer& img) {
  const std::string key = "i" + image_key(img);
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  Embedding e = inner_.embed_image(img);
  std::lock_guard lock(mu_);
  memo_[key] = e;
  return e;
}

Embedding CachedScorer::embed_text(const std::string& text) {
  const std::string key = "t" + text;
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  Embedding e = inner_.embed_text(text);
  std::lock_guard lock(mu_);
  memo_[key] = e;
  return e;
}

std::size_t CachedScorer::size() const {
  std::lock_guard lock(mu_);
  return memo_.size();
}

ScoreMatrix similarity_matrix(ScorerBackend& backend, std::span<const ImageBuffer> images, const CaptionSet& captions) {
  if (images.empty()) throw std::invalid_argument("similarity_matrix: no images");
  if (captions.texts.empty()) throw std::invalid_argument("similarity_matrix: no captions");

  // Deduplicate inputs so each distinct one is embedded once.
  std::map<std::string, std::size_t> image_slot;
  std::vector<ImageBuffer> unique_images;
  std::vector<std::size_t> image_index(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto [it, inserted] = image_slot.emplace(image_key(images[i]), unique_images.size());
    if (inserted) unique_images.push_back(images[i]);
    image_index[i] = it->second;
  }
  std::map<std::string, std::size_t> text_slot;
  std::vector<std::string> unique_texts;
  std::vector<std::size_t> text_index(captions.texts.size());
  for (std::size_t m = 0; m < captions.texts.size(); ++m) {
    std::string full = captions.prefix + captions.texts[m];
    auto [it, inserted] = text_slot.emplace(full, unique_texts.size());
    if (inserted) unique_texts.push_back(std::move(full));
    text_index[m] = it->second;
  }

  const std::vector<Embedding> img_emb = backend.embed_images(unique_images);
  const std::vector<Embedding> txt_emb = backend.embed_texts(unique_texts);
  const int dim = backend.dim();
  Eigen::MatrixXd img_mat(static_cast<Eigen::Index>(unique_images.size()), dim);
  Eigen::MatrixXd txt_mat(static_cast<Eigen::Index>(unique_texts.size()), dim);
  for (std::size_t i = 0; i < img_emb.size(); ++i) {
    if (img_emb[i].size() != dim) throw ScoringError("image embedding has wrong dimension", i);
    img_mat.row(static_cast<Eigen::Index>(i)) = img_emb[i].cast<double>().transpose();
  }
  for (std::size_t i = 0; i < txt_emb.size(); ++i) {
    if (txt_emb[i].size() != dim) throw ScoringError("text embedding has wrong dimension", i);
    txt_mat.row(static_cast<Eigen::Index>(i)) = txt_emb[i].cast<double>().transpose();
  }
  const Eigen::MatrixXd gram = img_mat * txt_mat.transpose();

  ScoreMatrix s(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(captions.texts.size()));
  for (Eigen::Index n = 0; n < s.rows(); ++n) {
    for (Eigen::Index m = 0; m < s.cols(); ++m) {
      s(n, m) = gram(static_cast<Eigen::Index>(image_index[n]), static_cast<Eigen::Index>(text_index[m]));
    }
  }
  if (!s.allFinite()) throw ScoringError("non-finite similarity", 0);
  return s;
}

std::string_view to_string(EnsembleMode mode) { return mode == EnsembleMode::Mean ? "mean" : "softmax_mean"; }

EnsembleMode parse_ensemble_mode(std::string_view text) {
  if (text == "mean") return EnsembleMode::Mean;
  if (text == "softmax_mean" || text == "softmax-mean") return EnsembleMode::SoftmaxMean;
  throw std::invalid_argument("unknown ensemble mode '" + std::string(text) + "'");
}

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::Left:
      return "left";
    case Relation::Right:
      return "right";
    case Relation::Above:
      return "above";
    case Relation::Below:
      return "below";
    case Relation::Bigger:
      return "bigger";
    case Relation::Smaller:
      return "smaller";
    case Relation::Inside:
      return "inside";
    case Relation::None:
      return "none";
  }
  return "none";
}

std::string_view to_string(RelationAggregation a) { return a == RelationAggregation::Max ? "max" : "sum"; }

namespace {

struct Keyword {
  std::string_view phrase;
  Relation relation;
  bool anchored;
};

// Order matters: the first entry present in the caption wins.
constexpr Keyword kKeywords[] = {
    {"in front of", Relation::None, false},
    {"next to", Relation::None, false},
    {"behind", Relation::None, false},
    {"to the left of", Relation::Left, true},
    {"on the left of", Relation::Left, true},
    {"left of", Relation::Left, true},
    {"to the right of", Relation::Right, true},
    {"on the right of", Relation::Right, true},
    {"right of", Relation::Right, true},
    {"on top of", Relation::Above, true},
    {"above", Relation::Above, true},
    {"over", Relation::Above, true},
    {"below", Relation::Below, true},
    {"underneath", Relation::Below, true},
    {"under", Relation::Below, true},
    {"beneath", Relation::Below, true},
    {"bigger than", Relation::Bigger, true},
    {"larger than", Relation::Bigger, true},
    {"smaller than", Relation::Smaller, true},
    {"inside", Relation::Inside, true},
    {"on the left", Relation::Left, false},
    {"to the left", Relation::Left, false},
    {"leftmost", Relation::Left, false},
    {"left", Relation::Left, false},
    {"on the right", Relation::Right, false},
    {"to the right", Relation::Right, false},
    {"rightmost", Relation::Right, false},
    {"right", Relation::Right, false},
    {"at the top", Relation::Above, false},
    {"top", Relation::Above, false},
    {"upper", Relation::Above, false},
    {"at the bottom", Relation::Below, false},
    {"bottom", Relation::Below, false},
    {"lower", Relation::Below, false},
    {"biggest", Relation::Bigger, false},
    {"largest", Relation::Bigger, false},
    {"bigger", Relation::Bigger, false},
    {"larger", Relation::Bigger, false},
    {"smallest", Relation::Smaller, false},
    {"smaller", Relation::Smaller, false},
};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::size_t find_word(std::string_view text, std::string_view phrase) {
  for (std::size_t pos = text.find(phrase); pos != std::string_view::npos; pos = text.find(phrase, pos + 1)) {
    const std::size_t end = pos + phrase.size();
    const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    const bool right_ok = end == text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) return pos;
  }
  return std::string_view::npos;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) || s.back() == '.' || s.back() == ','))
    s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

ParsedCaption parse_caption(std::string_view caption) {
  std::string lower(caption);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const std::string base = trim(lower);
  ParsedCaption out;
  out.head = base;
  for (const Keyword& k : kKeywords) {
    const std::size_t pos = find_word(base, k.phrase);
    if (pos == std::string::npos) continue;
    if (k.relation == Relation::None) return out;
    std::string before = trim(std::string_view(base).substr(0, pos));
    std::string after = trim(std::string_view(base).substr(pos + k.phrase.size()));
    out.relation = k.relation;
    if (k.anchored && !after.empty()) {
      out.absolute = false;
      out.anchor = after;
      out.head = before.empty() ? base : before;
    } else {
      out.absolute = true;
      std::string head = trim(before + " " + after);
      out.head = head.empty() ? base : head;
    }
    return out;
  }
  return out;
}

int relation_score(Relation r, const Box& a, const Box& b) {
  switch (r) {
    case Relation::Left:
      return a.cx() < b.cx();
    case Relation::Right:
      return a.cx() > b.cx();
    case Relation::Above:
      return a.cy() < b.cy();
    case Relation::Below:
      return a.cy() > b.cy();
    case Relation::Bigger:
      return a.area() > b.area();
    case Relation::Smaller:
      return a.area() < b.area();
    case Relation::Inside: {
      const double margin = 0.05 * std::hypot(b.w, b.h);
      return a.x >= b.x - margin && a.y >= b.y - margin && a.right() <= b.right() + margin &&
             a.bottom() <= b.bottom() + margin;
    }
    case Relation::None:
      return 1;
  }
  return 0;
}

int relation_score_absolute(Relation r, const Box& a, int image_height, int image_width, double median) {
  switch (r) {
    case Relation::Left:
      return a.cx() < image_width / 2.0;
    case Relation::Right:
      return a.cx() > image_width / 2.0;
    case Relation::Above:
      return a.cy() < image_height / 2.0;
    case Relation::Below:
      return a.cy() > image_height / 2.0;
    case Relation::Bigger:
      return a.area() > median;
    case Relation::Smaller:
      return a.area() < median;
    case Relation::Inside:
    case Relation::None:
      return 1;
  }
  return 0;
}

double median_area(std::span<const Box> boxes) {
  if (boxes.empty()) return 0.0;
  std::vector<double> a;
  a.reserve(boxes.size());
  for (const auto& b : boxes) a.push_back(b.area());
  std::sort(a.begin(), a.end());
  const std::size_t mid = a.size() / 2;
  return a.size() % 2 == 1 ? a[mid] : 0.5 * (a[mid - 1] + a[mid]);
}

}  // namespace fgvp
