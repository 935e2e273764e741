// SPDX-License-Identifier: Apache-2.0
//
// Image-text similarity matrices and their post-processing: ensembling,
// spatial relations, negative-caption subtraction and selection.
#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "fgvp/hungarian.hpp"
#include "fgvp/image.hpp"

namespace fgvp {

template <typename Scalar = double>
using ScoreMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// N proposals x M texts.
using ScoreMatrix = ScoreMatrixT<double>;

using Embedding = Eigen::VectorXf;

/// Embedding model. Outputs are unit vectors of a fixed dimension.
class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual int dim() const = 0;
  virtual Embedding embed_image(const ImageBuffer& img) = 0;
  virtual Embedding embed_text(const std::string& text) = 0;
  virtual std::vector<Embedding> embed_images(std::span<const ImageBuffer> imgs);
  virtual std::vector<Embedding> embed_texts(std::span<const std::string> texts);
};

/// Thread-safe memo of embeddings keyed by input content. Concurrent writers
/// of one key store identical values, so last write wins.
class CachedScorer final : public ScorerBackend {
 public:
  explicit CachedScorer(ScorerBackend& inner) : inner_(inner) {}
  int dim() const override { return inner_.dim(); }
  Embedding embed_image(const ImageBuffer& img) override;
  Embedding embed_text(const std::string& text) override;
  std::size_t size() const;

 private:
  ScorerBackend& inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Embedding> memo_;
};

/// Content key for an image: SHA-256 over dimensions and pixels.
std::string image_key(const ImageBuffer& img);

struct CaptionSet {
  std::vector<std::string> texts;
  std::string prefix;  // template applied before embedding, e.g. "a photo of "
};

class ScoringError : public std::runtime_error {
 public:
  ScoringError(std::string_view what, std::size_t index)
      : std::runtime_error(std::string(what) + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// S[n][m] = <embed(image_n), embed(prefix + text_m)>. Each distinct input is
/// embedded once.
ScoreMatrix similarity_matrix(ScorerBackend& backend, std::span<const ImageBuffer> images, const CaptionSet& captions);

enum class EnsembleMode { Mean, SoftmaxMean };
std::string_view to_string(EnsembleMode mode);
EnsembleMode parse_ensemble_mode(std::string_view text);

/// Column-wise softmax over proposals (temperature 1).
template <typename Derived>
ScoreMatrixT<typename Derived::Scalar> softmax_columns(const Eigen::MatrixBase<Derived>& s) {
  ScoreMatrixT<typename Derived::Scalar> out = s;
  for (Eigen::Index m = 0; m < out.cols(); ++m) {
    auto col = out.col(m);
    col.array() = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  return out;
}

template <typename Scalar>
ScoreMatrixT<Scalar> ensemble_scores(std::span<const ScoreMatrixT<Scalar>> matrices, EnsembleMode mode) {
  if (matrices.empty()) throw std::invalid_argument("ensemble_scores: no matrices");
  ScoreMatrixT<Scalar> acc = ScoreMatrixT<Scalar>::Zero(matrices[0].rows(), matrices[0].cols());
  for (const auto& s : matrices) {
    if (s.rows() != acc.rows() || s.cols() != acc.cols()) {
      throw std::invalid_argument("ensemble_scores: shape mismatch");
    }
    if (mode == EnsembleMode::Mean) {
      acc += s;
    } else {
      acc += softmax_columns(s);
    }
  }
  if (matrices.size() == 1) return acc;
  return acc / Scalar(matrices.size());
}

inline ScoreMatrix ensemble_scores(std::span<const ScoreMatrix> matrices, EnsembleMode mode) {
  return ensemble_scores<double>(matrices, mode);
}

// ---------------------------------------------------------------------------
// Spatial relations

enum class Relation { Left, Right, Above, Below, Bigger, Smaller, Inside, None };
std::string_view to_string(Relation r);

struct ParsedCaption {
  std::string head;
  Relation relation = Relation::None;
  std::optional<std::string> anchor;
  bool absolute = false;

  friend bool operator==(const ParsedCaption&, const ParsedCaption&) = default;
};

/// Keyword-table relation parser: first table entry found (on word
/// boundaries) wins; head is the text before it, anchor the text after.
ParsedCaption parse_caption(std::string_view caption);

/// r(a, b) for an anchored relation.
int relation_score(Relation r, const Box& a, const Box& b);
/// r(a) for an absolute relation, against the image center (positions) or
/// the median proposal area (sizes).
int relation_score_absolute(Relation r, const Box& a, int image_height, int image_width, double median_area);

double median_area(std::span<const Box> boxes);

enum class RelationAggregation { Max, Sum };
std::string_view to_string(RelationAggregation a);

/// Reweights each column by its parsed relation. head and anchor hold the
/// similarity of every proposal to the head / anchor phrase of each text
/// (N x M). Columns whose relation is None are returned unchanged; columns
/// with no supporting proposal fall back to the head scores.
template <typename DS, typename DH, typename DA>
ScoreMatrixT<typename DS::Scalar> apply_relations(const Eigen::MatrixBase<DS>& s, std::span<const Box> boxes,
                                                 std::span<const ParsedCaption> parsed,
                                                 const Eigen::MatrixBase<DH>& head, const Eigen::MatrixBase<DA>& anchor,
                                                 int image_height, int image_width,
                                                 RelationAggregation agg = RelationAggregation::Max) {
  using Scalar = typename DS::Scalar;
  const Eigen::Index n = s.rows();
  if (static_cast<Eigen::Index>(boxes.size()) != n || static_cast<Eigen::Index>(parsed.size()) != s.cols() ||
      head.rows() != n || head.cols() != s.cols() || anchor.rows() != n || anchor.cols() != s.cols()) {
    throw std::invalid_argument("apply_relations: shape mismatch");
  }
  ScoreMatrixT<Scalar> out = s;
  const double med = median_area(boxes);
  for (Eigen::Index m = 0; m < s.cols(); ++m) {
    const ParsedCaption& p = parsed[m];
    if (p.relation == Relation::None) continue;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> col(n);
    bool supported = false;
    if (p.absolute) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const int r = relation_score_absolute(p.relation, boxes[i], image_height, image_width, med);
        supported = supported || r != 0;
        col[i] = head(i, m) * Scalar(r);
      }
    } else if (n >= 2) {
      for (Eigen::Index i = 0; i < n; ++i) {
        Scalar acc = agg == RelationAggregation::Sum ? Scalar(0) : -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          const int r = relation_score(p.relation, boxes[i], boxes[j]);
          supported = supported || r != 0;
          const Scalar term = anchor(j, m) * Scalar(r);
          acc = agg == RelationAggregation::Sum ? acc + term : std::max(acc, term);
        }
        col[i] = head(i, m) * acc;
      }
    }
    out.col(m) = supported ? col : head.col(m).template cast<Scalar>().eval();
  }
  return out;
}

/// S - mean over negatives of S~, broadcast across texts. Q = 0 is identity.
template <typename DS, typename DN>
ScoreMatrixT<typename DS::Scalar> subtract_negatives(const Eigen::MatrixBase<DS>& s,
                                                    const Eigen::MatrixBase<DN>& negatives) {
  using Scalar = typename DS::Scalar;
  if (negatives.cols() == 0) return s;
  if (negatives.rows() != s.rows()) throw std::invalid_argument("subtract_negatives: row count mismatch");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> penalty =
      negatives.rowwise().sum().template cast<Scalar>() / Scalar(negatives.cols());
  return s.colwise() - penalty;
}

/// Argmax over proposals for each text; ties go to the lowest index.
template <typename Derived>
std::vector<Eigen::Index> select_region(const Eigen::MatrixBase<Derived>& s) {
  if (s.rows() < 1) throw std::invalid_argument("select_region: no proposals");
  std::vector<Eigen::Index> out(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index m = 0; m < s.cols(); ++m) {
    Eigen::Index best = 0;
    for (Eigen::Index n = 1; n < s.rows(); ++n) {
      if (s(n, m) > s(best, m)) best = n;
    }
    out[m] = best;
  }
  return out;
}

/// Argmax over texts for each proposal; ties go to the lowest index.
template <typename Derived>
std::vector<Eigen::Index> select_labels(const Eigen::MatrixBase<Derived>& s) {
  return select_region(s.transpose());
}

}  // namespace fgvp
