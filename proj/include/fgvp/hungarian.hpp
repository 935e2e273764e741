// SPDX-License-Identifier: Apache-2.0
//
// Maximum-weight bipartite assignment (Kuhn-Munkres with potentials), with a
// deterministic lexicographic tie-break among optimal assignments.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace fgvp {

/// (row, column) pairs sorted by row.
using Assignment = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

namespace detail {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct SquareSolution {
  std::vector<Eigen::Index> col_of_row;
  std::vector<Scalar> u;  // row potentials
  std::vector<Scalar> v;  // column potentials
};

/// Minimum-cost perfect matching on a square cost matrix, O(n^3).
template <typename Scalar>
SquareSolution<Scalar> solve_square(const DenseMatrix<Scalar>& cost) {
  const Eigen::Index n = cost.rows();
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  // 1-based; index 0 is the virtual root column.
  std::vector<Scalar> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<Eigen::Index> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (Eigen::Index i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    Eigen::Index j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const Eigen::Index i0 = row_of_col[j0];
      Scalar delta = kInf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  SquareSolution<Scalar> sol;
  sol.col_of_row.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 1; j <= n; ++j) sol.col_of_row[row_of_col[j] - 1] = j - 1;
  sol.u.assign(u.begin() + 1, u.end());
  sol.v.assign(v.begin() + 1, v.end());
  return sol;
}

/// Rewrites an optimal matching into the lexicographically smallest one
/// (column of row 0 first, then row 1, ...) among matchings made only of
/// tight edges, i.e. zero reduced cost within tol. Every such matching is
/// optimal by complementary slackness.
template <typename Scalar>
void lexicographic_refine(const DenseMatrix<Scalar>& cost, SquareSolution<Scalar>& sol, Scalar tol) {
  const Eigen::Index n = cost.rows();
  auto tight = [&](Eigen::Index i, Eigen::Index j) { return std::abs(cost(i, j) - sol.u[i] - sol.v[j]) <= tol; };
  std::vector<Eigen::Index>& col = sol.col_of_row;
  std::vector<Eigen::Index> row(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) row[col[i]] = i;
  std::vector<bool> fixed_row(n, false), fixed_col(n, false), seen(n);
  std::vector<Eigen::Index> via_row(n), queue;

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < col[i]; ++j) {
      if (fixed_col[j] || !tight(i, j)) continue;
      // Row i takes j. The displaced owner must reach col[i] (freed by i)
      // along an alternating path of tight edges through unfixed rows.
      const Eigen::Index target = col[i];
      const Eigen::Index start = row[j];
      std::fill(seen.begin(), seen.end(), false);
      queue.assign(1, start);
      seen[start] = true;
      Eigen::Index end_row = -1;
      for (std::size_t q = 0; q < queue.size() && end_row < 0; ++q) {
        const Eigen::Index r = queue[q];
        for (Eigen::Index c = 0; c < n; ++c) {
          if (c == j || c == col[r] || fixed_col[c] || !tight(r, c)) continue;
          if (c == target) {
            end_row = r;
            break;
          }
          const Eigen::Index owner = row[c];
          if (owner == i || fixed_row[owner] || seen[owner]) continue;
          seen[owner] = true;
          via_row[owner] = r;  // r takes c from owner
          queue.push_back(owner);
        }
      }
      if (end_row < 0) continue;
      Eigen::Index r = end_row;
      Eigen::Index take = target;
      for (;;) {
        const Eigen::Index old = col[r];
        col[r] = take;
        row[take] = r;
        if (r == start) break;
        take = old;
        r = via_row[r];
      }
      col[i] = j;
      row[j] = i;
      break;
    }
    fixed_row[i] = true;
    fixed_col[col[i]] = true;
  }
}

}  // namespace detail

/// Assignment maximizing total similarity over an N x M matrix. Returns
/// exactly min(N, M) pairs. The matrix is padded to square internally with
/// a constant, which every full assignment pays equally; among optimal
/// assignments (ties within a relative 1e-9) the lexicographically smallest
/// column sequence is returned.
template <typename Derived>
Assignment hungarian_assign(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = scores.rows();
  const Eigen::Index m = scores.cols();
  if (n < 1 || m < 1) throw std::invalid_argument("hungarian_assign: matrix must be non-empty");
  if (!scores.allFinite()) throw std::invalid_argument("hungarian_assign: scores must be finite");
  const Eigen::Index k = std::max(n, m);
  detail::DenseMatrix<Scalar> cost = detail::DenseMatrix<Scalar>::Zero(k, k);
  cost.topLeftCorner(n, m) = -scores.derived();
  auto sol = detail::solve_square<Scalar>(cost);
  const Scalar scale = std::max<Scalar>(Scalar(1), cost.cwiseAbs().maxCoeff());
  detail::lexicographic_refine<Scalar>(cost, sol, Scalar(1e-9) * scale);
  Assignment out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol.col_of_row[i] < m) out.emplace_back(i, sol.col_of_row[i]);
  }
  return out;
}

template <typename Derived>
typename Derived::Scalar assignment_value(const Eigen::MatrixBase<Derived>& scores, const Assignment& a) {
  typename Derived::Scalar total = 0;
  for (auto [r, c] : a) total += scores(r, c);
  return total;
}

}  // namespace fgvp
