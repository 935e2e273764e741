// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "fgvp/backends.hpp"
#include "fgvp/hungarian.hpp"
#include "fgvp/scoring.hpp"
#include "oracles.hpp"

using namespace fgvp;

namespace {

ScoreMatrix random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, double lo = -1, double hi = 1) {
  ScoreMatrix s(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) s(i, j) = oracle::uniform(rng, lo, hi);
  }
  return s;
}

Embedding unit(int dim, int axis) {
  Embedding e = Embedding::Zero(dim);
  e[axis] = 1;
  return e;
}

std::vector<Box> random_boxes(std::mt19937_64& rng, int n) {
  std::vector<Box> b;
  for (int i = 0; i < n; ++i) {
    b.push_back({double(oracle::uniform_int(rng, 0, 40)), double(oracle::uniform_int(rng, 0, 40)),
                 double(oracle::uniform_int(rng, 1, 20)), double(oracle::uniform_int(rng, 1, 20))});
  }
  return b;
}

}  // namespace

TEST_CASE("similarity_matrix") {
  FixtureScorer scorer(FixtureSpec{3, 16, {}});
  const ImageBuffer a(4, 4, palette::kRed), b(4, 4, palette::kBlue), c(5, 4, palette::kRed);
  scorer.program_image(a, unit(16, 0));
  scorer.program_image(b, unit(16, 1));
  scorer.program_text("x", unit(16, 0));
  scorer.program_text("y", unit(16, 1));
  scorer.program_text("z", unit(16, 2));
  const std::vector<ImageBuffer> imgs = {a, b};
  const ScoreMatrix s = similarity_matrix(scorer, imgs, CaptionSet{{"x", "y", "z"}, ""});
  ScoreMatrix expect(2, 3);
  expect << 1, 0, 0, 0, 1, 0;
  CHECK(s == expect);

  const std::vector<ImageBuffer> rep = {c, c, c};
  const ScoreMatrix r = similarity_matrix(scorer, rep, CaptionSet{{"cat", "dog"}, "a photo of "});
  CHECK(r.row(0) == r.row(1));
  CHECK(r.row(1) == r.row(2));
  const std::vector<ImageBuffer> one = {c};
  const ScoreMatrix o = similarity_matrix(scorer, one, CaptionSet{{"cat"}, ""});
  CHECK(o.rows() == 1);
  CHECK(o(0, 0) >= -1.0 - 1e-6);
  CHECK(o(0, 0) <= 1.0 + 1e-6);
  CHECK_THROWS_AS(similarity_matrix(scorer, std::vector<ImageBuffer>{}, CaptionSet{{"x"}, ""}), std::invalid_argument);
}

TEST_CASE("cached scorer embeds each input once") {
  FixtureScorer inner;
  CachedScorer cached(inner);
  const ImageBuffer a(3, 3, palette::kRed);
  const Embedding e1 = cached.embed_image(a);
  const Embedding e2 = cached.embed_image(a);
  CHECK(e1 == e2);
  CHECK(cached.embed_text("t") == inner.embed_text("t"));
  const std::size_t before = inner.calls();
  (void)cached.embed_text("t");
  CHECK(inner.calls() == before);
  CHECK(cached.size() == 2);
}

TEST_CASE("ensemble_scores") {
  std::mt19937_64 rng(1);
  const ScoreMatrix s = random_matrix(rng, 3, 2);
  const std::vector<ScoreMatrix> single = {s};
  CHECK(ensemble_scores(single, EnsembleMode::Mean) == s);
  const std::vector<ScoreMatrix> copies = {s, s, s, s};
  CHECK(ensemble_scores(copies, EnsembleMode::Mean).isApprox(s, 1e-15));
  ScoreMatrix a(2, 1), b(2, 1);
  a << 0, 1;
  b << 1, 0;
  const std::vector<ScoreMatrix> ab = {a, b};
  const ScoreMatrix mean = ensemble_scores(ab, EnsembleMode::Mean);
  CHECK(mean(0, 0) == 0.5);
  CHECK(mean(1, 0) == 0.5);
  const ScoreMatrix sm = ensemble_scores(copies, EnsembleMode::SoftmaxMean);
  for (Eigen::Index m = 0; m < sm.cols(); ++m) CHECK(sm.col(m).sum() == doctest::Approx(1.0));
  const std::vector<ScoreMatrix> bad = {s, random_matrix(rng, 2, 2)};
  CHECK_THROWS_AS(ensemble_scores(bad, EnsembleMode::Mean), std::invalid_argument);
  CHECK(parse_ensemble_mode("softmax-mean") == EnsembleMode::SoftmaxMean);
}

TEST_CASE("parse_caption") {
  const ParsedCaption a = parse_caption("elephant on the left");
  CHECK(a.relation == Relation::Left);
  CHECK(a.absolute);
  CHECK(a.head == "elephant");
  CHECK_FALSE(a.anchor.has_value());

  const ParsedCaption b = parse_caption("cat");
  CHECK(b.relation == Relation::None);
  CHECK(b.head == "cat");

  const ParsedCaption c = parse_caption("dog left of the car");
  CHECK(c.relation == Relation::Left);
  CHECK_FALSE(c.absolute);
  CHECK(c.head == "dog");
  CHECK(c.anchor == std::optional<std::string>("the car"));

  CHECK(parse_caption("  the biggest cake. ").relation == Relation::Bigger);
  CHECK(parse_caption("man in front of the bus").relation == Relation::None);
  CHECK(parse_caption("cup under the table").relation == Relation::Below);
  CHECK(parse_caption("leftover pizza").relation == Relation::None);
  CHECK(parse_caption("bottle inside the fridge").anchor == std::optional<std::string>("the fridge"));
}

TEST_CASE("relation_score") {
  CHECK(relation_score(Relation::Left, {8, 0, 4, 4}, {48, 0, 4, 4}) == 1);
  CHECK(relation_score(Relation::Left, {48, 0, 4, 4}, {8, 0, 4, 4}) == 0);
  CHECK(relation_score(Relation::Bigger, {0, 0, 5, 5}, {0, 0, 5, 5}) == 0);
  CHECK(relation_score(Relation::Inside, {2, 2, 4, 4}, {0, 0, 10, 10}) == 1);
  CHECK(relation_score(Relation::Inside, {0, 0, 10, 10}, {2, 2, 4, 4}) == 0);
  CHECK(relation_score_absolute(Relation::Left, {0, 0, 10, 10}, 100, 100, 1) == 1);
  CHECK(relation_score_absolute(Relation::Below, {0, 0, 10, 10}, 100, 100, 1) == 0);
  CHECK(relation_score_absolute(Relation::Bigger, {0, 0, 10, 10}, 100, 100, 50) == 1);
  const std::vector<Box> boxes = {{0, 0, 1, 1}, {0, 0, 2, 2}, {0, 0, 3, 3}, {0, 0, 4, 4}};
  CHECK(median_area(boxes) == 6.5);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto b = random_boxes(rng, 2);
    for (Relation r : {Relation::Left, Relation::Right, Relation::Above, Relation::Below, Relation::Bigger,
                       Relation::Smaller, Relation::Inside}) {
      CHECK(relation_score(r, b[0], b[1]) == oracle::relation(r, b[0], b[1]));
    }
  }
}

TEST_CASE("apply_relations") {
  // two proposals, "X on the left": left keeps its score, right is zeroed
  const std::vector<Box> boxes = {{0, 0, 10, 10}, {80, 0, 10, 10}};
  ScoreMatrix head(2, 1);
  head << 0.3, 0.6;
  const std::vector<ParsedCaption> parsed = {parse_caption("x on the left")};
  const ScoreMatrix out = apply_relations(head, boxes, parsed, head, head, 20, 100);
  CHECK(out(0, 0) == 0.3);
  CHECK(out(1, 0) == 0.0);

  const std::vector<ParsedCaption> none = {parse_caption("cat")};
  ScoreMatrix s(2, 1);
  s << 0.9, 0.1;
  CHECK(apply_relations(s, boxes, none, head, head, 20, 100) == s);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const int n = oracle::uniform_int(rng, 2, 6);
    const auto b = random_boxes(rng, n);
    const ScoreMatrix h = random_matrix(rng, n, 1, 0, 1);
    const ScoreMatrix a = random_matrix(rng, n, 1, 0, 1);
    const std::vector<ParsedCaption> p = {parse_caption("dog left of the car")};
    for (auto agg : {RelationAggregation::Max, RelationAggregation::Sum}) {
      const ScoreMatrix got = apply_relations(h, b, p, h, a, 64, 64, agg);
      const Eigen::VectorXd want =
          oracle::anchored_column(Relation::Left, b, h.col(0), a.col(0), agg == RelationAggregation::Sum);
      CHECK(got.col(0) == want);
      const ScoreMatrix scaled = apply_relations(h, b, p, (h * 3.5).eval(), a, 64, 64, agg);
      CHECK(select_region(scaled) == select_region(got));
    }
  }
}

TEST_CASE("subtract_negatives") {
  std::mt19937_64 rng(4);
  const ScoreMatrix s = random_matrix(rng, 3, 2);
  CHECK(subtract_negatives(s, ScoreMatrix(3, 0)) == s);
  const ScoreMatrix c = ScoreMatrix::Constant(3, 4, 0.25);
  CHECK(subtract_negatives(s, c) == (s.array() - 0.25).matrix());

  ScoreMatrix s2(2, 2), neg(2, 2);
  s2 << 0.5, 0.2, 0.1, 0.4;
  neg << 0.3, 0.1, 0.0, 0.2;
  ScoreMatrix hand(2, 2);
  hand << 0.5 - 0.2, 0.2 - 0.2, 0.1 - 0.1, 0.4 - 0.1;
  CHECK(subtract_negatives(s2, neg) == hand);
  CHECK_THROWS_AS(subtract_negatives(s2, ScoreMatrix(3, 1)), std::invalid_argument);

  for (int t = 0; t < 50; ++t) {
    const ScoreMatrix a = random_matrix(rng, 4, 3), n = random_matrix(rng, 4, 5);
    const double k = oracle::uniform(rng, -2, 2);
    const ScoreMatrix shifted = subtract_negatives((a.array() + k).matrix(), (n.array() + k).matrix());
    CHECK(select_labels(shifted) == select_labels(subtract_negatives(a, n)));
  }
}

TEST_CASE("select_region and select_labels") {
  ScoreMatrix col(3, 1);
  col << 0.1, 0.9, 0.3;
  CHECK(select_region(col)[0] == 1);
  CHECK(select_region(ScoreMatrix::Constant(4, 1, 0.2))[0] == 0);
  ScoreMatrix row(1, 2);
  row << 0.2, 0.8;
  CHECK(select_labels(row)[0] == 1);
  CHECK(select_labels(ScoreMatrix::Constant(1, 1, 0.0))[0] == 0);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const ScoreMatrix s = random_matrix(rng, 6, 3);
    const auto sel = select_region(s);
    for (Eigen::Index m = 0; m < 3; ++m) {
      for (Eigen::Index n = 0; n < 6; ++n) CHECK(s(n, m) <= s(sel[m], m));
    }
    CHECK(select_region((s.array().exp() * 2 + 1).matrix()) == sel);
    const ScoreMatrix l = random_matrix(rng, 4, 5);
    const auto lab = select_labels(l);
    for (Eigen::Index n = 0; n < 4; ++n) {
      for (Eigen::Index m = 0; m < 5; ++m) CHECK(l(n, m) <= l(n, lab[n]));
    }
  }
  CHECK_THROWS_AS(select_region(ScoreMatrix(0, 2)), std::invalid_argument);
}

TEST_CASE("hungarian_assign") {
  ScoreMatrix d = ScoreMatrix::Constant(4, 4, 0.1);
  d.diagonal().setConstant(0.9);
  const Assignment id = hungarian_assign(d);
  REQUIRE(id.size() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(id[i] == std::pair<Eigen::Index, Eigen::Index>{i, i});
  CHECK(hungarian_assign(ScoreMatrix::Constant(1, 1, 0.3)) == Assignment{{0, 0}});

  std::mt19937_64 rng(6);
  for (auto [n, m] : {std::pair{6, 6}, std::pair{5, 7}, std::pair{7, 3}}) {
    for (int t = 0; t < 10; ++t) {
      const ScoreMatrix s = random_matrix(rng, n, m);
      const Assignment a = hungarian_assign(s);
      CHECK(a.size() == static_cast<std::size_t>(std::min(n, m)));
      CHECK(assignment_value(s, a) == doctest::Approx(oracle::best_assignment_value(s)).epsilon(1e-12));
      // greedy: rows in order take their best free column
      double greedy = 0;
      std::vector<bool> used(static_cast<std::size_t>(m), false);
      for (Eigen::Index i = 0; i < std::min<Eigen::Index>(n, m); ++i) {
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < m; ++j) {
          if (!used[j] && (best < 0 || s(i, j) > s(i, best))) best = j;
        }
        used[best] = true;
        greedy += s(i, best);
      }
      CHECK(assignment_value(s, a) >= greedy - 1e-12);
    }
  }
  // ties resolve the same way every time
  const ScoreMatrix flat = ScoreMatrix::Constant(3, 3, 1.0);
  CHECK(hungarian_assign(flat) == Assignment{{0, 0}, {1, 1}, {2, 2}});
}
