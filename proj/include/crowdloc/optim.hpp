/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace crowdloc {

struct NelderMeadOptions {
  int max_iterations = 400;   ///< per restart round
  double f_tol = 1e-12;       ///< spread of simplex values
  double x_tol = 1e-10;       ///< simplex diameter
  int restarts = 2;           ///< re-seeded rounds around the incumbent
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
};

/// Derivative-free simplex minimization (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5). Deterministic for a given start.
inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
    const NelderMeadOptions& opts = {}) {
  const int n = static_cast<int>(x0.size());
  NelderMeadResult result;
  result.x = x0;
  result.value = f(x0);
  result.evaluations = 1;

  Eigen::VectorXd round_step = step;
  for (int round = 0; round <= opts.restarts; ++round) {
    std::vector<Eigen::VectorXd> xs(static_cast<size_t>(n) + 1, result.x);
    std::vector<double> fs(static_cast<size_t>(n) + 1);
    fs[0] = result.value;
    for (int i = 0; i < n; ++i) {
      xs[static_cast<size_t>(i) + 1](i) += round_step(i);
      fs[static_cast<size_t>(i) + 1] = f(xs[static_cast<size_t>(i) + 1]);
      ++result.evaluations;
    }

    std::vector<size_t> order(static_cast<size_t>(n) + 1);
    auto sort_simplex = [&] {
      std::iota(order.begin(), order.end(), size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](size_t a, size_t b) { return fs[a] < fs[b]; });
    };

    for (int it = 0; it < opts.max_iterations; ++it) {
      sort_simplex();
      const size_t best = order.front(), worst = order.back();
      const size_t second_worst = order[static_cast<size_t>(n - 1)];

      double diameter = 0.0;
      for (size_t i = 1; i <= static_cast<size_t>(n); ++i)
        diameter = std::max(diameter,
                            (xs[order[i]] - xs[best]).lpNorm<Eigen::Infinity>());
      if (fs[worst] - fs[best] < opts.f_tol && diameter < opts.x_tol) break;

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (size_t i = 0; i <= static_cast<size_t>(n); ++i)
        if (i != worst) centroid += xs[i];
      centroid /= n;

      const Eigen::VectorXd reflected = centroid + (centroid - xs[worst]);
      const double f_ref = f(reflected);
      ++result.evaluations;

      if (f_ref < fs[best]) {
        const Eigen::VectorXd expanded =
            centroid + 2.0 * (centroid - xs[worst]);
        const double f_exp = f(expanded);
        ++result.evaluations;
        if (f_exp < f_ref) {
          xs[worst] = expanded;
          fs[worst] = f_exp;
        } else {
          xs[worst] = reflected;
          fs[worst] = f_ref;
        }
      } else if (f_ref < fs[second_worst]) {
        xs[worst] = reflected;
        fs[worst] = f_ref;
      } else {
        const bool outside = f_ref < fs[worst];
        const Eigen::VectorXd contracted =
            outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                    : Eigen::VectorXd(centroid + 0.5 * (xs[worst] - centroid));
        const double f_con = f(contracted);
        ++result.evaluations;
        if (f_con < std::min(f_ref, fs[worst])) {
          xs[worst] = contracted;
          fs[worst] = f_con;
        } else {
          for (size_t i = 0; i <= static_cast<size_t>(n); ++i) {
            if (i == best) continue;
            xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
            fs[i] = f(xs[i]);
            ++result.evaluations;
          }
        }
      }
    }

    sort_simplex();
    if (fs[order.front()] < result.value) {
      result.value = fs[order.front()];
      result.x = xs[order.front()];
    }
    round_step *= 0.1;
  }
  return result;
}

}  // namespace crowdloc
