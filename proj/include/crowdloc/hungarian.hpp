/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <Eigen/Core>
#include <limits>
#include <vector>

namespace crowdloc {

/// Cost above which a pairing counts as forbidden. Real costs must stay well
/// below it so the solver maximizes the number of allowed pairs first and
/// breaks ties on total cost.
inline constexpr double kUnmatchableCost = 1e8;

/// Minimum-cost assignment on a rectangular cost matrix (rows -> columns,
/// shortest augmenting path, O(n^3)). Returns, per row, the assigned column
/// or -1. The matrix is padded internally to square with forbidden cost.
inline std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  const int n = std::max(rows, cols);
  if (n == 0) return {};

  auto at = [&](int r, int c) -> double {
    if (r < rows && c < cols) return cost(r, c);
    return kUnmatchableCost;
  };

  // 1-indexed potentials/links per the classic formulation.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1,
                             std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      int j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = at(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(static_cast<size_t>(rows), -1);
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<size_t>(j)];
    if (i >= 1 && i <= rows && j <= cols) assignment[static_cast<size_t>(i - 1)] = j - 1;
  }
  return assignment;
}

}  // namespace crowdloc
