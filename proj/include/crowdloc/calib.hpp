/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <optional>
#include <span>
#include <vector>

#include "crowdloc/error.hpp"
#include "crowdloc/geometry.hpp"
#include "crowdloc/optim.hpp"

namespace crowdloc {

/// One person's vertical axis in the image: shoulder midpoint down to ankle
/// midpoint, weighted by the mean confidence of the four joints.
struct PersonAxis {
  Point2 top{0.0, 0.0};
  Point2 bot{0.0, 0.0};
  double weight = 1.0;
};

struct CalibConfig {
  /// Assumed height of the axis TOP point (the shoulder midpoint) above the
  /// ground, meters. 1.345 is the shoulder height of an average 1.70 m adult
  /// (0.791 of stature), matching where p_top actually sits on a body.
  double height_prior = 1.345;
  double lambda_angle = 1.0;
  double lambda_mod = 1.0;
  double f_min = 0.0;          ///< 0 = 0.2 * image_w
  double f_max = 0.0;          ///< 0 = 5 * image_w
  std::optional<CameraIntrinsics> fixed_intrinsics;
  int multistart_count = 8;
  int max_iterations = 1200;
  double convergence_tol = 1e-12;
  double image_w = 0.0;        ///< required unless fixed_intrinsics is set
  double image_h = 0.0;
  double infeasible_penalty = 10.0;  ///< loss for trials that lose the ground
  double trim_quantile = 0.9;  ///< per-person losses above it are down-weighted
  double trim_weight = 0.1;
  int threads = 1;

  double effective_f_min() const {
    return f_min > 0.0 ? f_min : 0.2 * effective_width();
  }
  double effective_f_max() const {
    return f_max > 0.0 ? f_max : 5.0 * effective_width();
  }
  double effective_width() const {
    return fixed_intrinsics ? fixed_intrinsics->image_w : image_w;
  }
  double effective_height() const {
    return fixed_intrinsics ? fixed_intrinsics->image_h : image_h;
  }

  void validate() const {
    if (!(height_prior > 0.0))
      throw Error(ErrorCode::InvalidArgument, "height prior must be positive");
    if (lambda_angle < 0.0 || lambda_mod < 0.0 ||
        (lambda_angle == 0.0 && lambda_mod == 0.0))
      throw Error(ErrorCode::InvalidArgument,
                  "loss weights must be nonnegative and not both zero");
    if (effective_width() <= 0.0 || effective_height() <= 0.0)
      throw Error(ErrorCode::InvalidArgument,
                  "image size required (or fixed intrinsics)");
    if (!(effective_f_min() > 0.0) || effective_f_max() <= effective_f_min())
      throw Error(ErrorCode::InvalidArgument, "bad focal search range");
    if (multistart_count < 1)
      throw Error(ErrorCode::InvalidArgument, "multistart_count must be >= 1");
  }
};

/// Reprojection loss of one axis under trial (K, G): place a person of the
/// prior height on the ground at the observed ankle pixel, reproject the
/// head end, and penalize angle and relative-length mismatch against the
/// observed axis. Infeasible trials score the fixed penalty so the search
/// space stays connected.
inline double person_loss(const CameraIntrinsics& K, const GroundPlane& G,
                          const PersonAxis& axis, const CalibConfig& cfg) {
  const auto foot = try_reverse_project_to_ground(K, G, axis.bot);
  if (!foot) return cfg.infeasible_penalty;
  const auto top = try_project(K, *foot + cfg.height_prior * G.normal);
  if (!top) return cfg.infeasible_penalty;

  const Point2 predicted = *top - axis.bot;
  const Point2 observed = axis.top - axis.bot;
  const double len_pred = predicted.norm();
  const double len_obs = observed.norm();
  if (len_pred <= kGeometryEps || len_obs <= kGeometryEps)
    return cfg.infeasible_penalty;

  const double cosine = predicted.dot(observed) / (len_pred * len_obs);
  const double angle_term = 1.0 - std::clamp(cosine, -1.0, 1.0);
  const double mod_term = std::abs(len_pred - len_obs) / len_obs;
  return cfg.lambda_angle * angle_term + cfg.lambda_mod * mod_term;
}

struct CalibResult {
  CameraIntrinsics intrinsics;
  GroundPlane ground;
  double residual = 0.0;
  int num_axes = 0;
};

namespace detail {

/// Two unconstrained parameters: N = (a, -1, b) normalized, so the normal
/// always points to the hemisphere above the ground (y < 0).
inline Point3 normal_from_ab(double a, double b) {
  return Point3{a, -1.0, b}.normalized();
}

struct CalibObjective {
  std::span<const PersonAxis> axes;
  const CalibConfig* cfg;
  bool fit_focal;
  mutable std::vector<double> losses;  // scratch

  /// params: [log f,] a, b, log D
  double operator()(const Eigen::VectorXd& params) const {
    int idx = 0;
    double wall = 0.0;
    CameraIntrinsics K;
    if (fit_focal) {
      double lf = params(idx++);
      const double lo = std::log(cfg->effective_f_min());
      const double hi = std::log(cfg->effective_f_max());
      if (lf < lo) {
        wall += (lo - lf) * 10.0;
        lf = lo;
      } else if (lf > hi) {
        wall += (lf - hi) * 10.0;
        lf = hi;
      }
      K = CameraIntrinsics::from_focal(std::exp(lf), cfg->effective_width(),
                                       cfg->effective_height());
    } else {
      K = *cfg->fixed_intrinsics;
    }
    const double a = params(idx++);
    const double b = params(idx++);
    const double log_d = params(idx++);
    const GroundPlane G{normal_from_ab(a, b), std::exp(log_d)};

    losses.resize(axes.size());
    for (size_t i = 0; i < axes.size(); ++i)
      losses[i] = person_loss(K, G, axes[i], *cfg);

    // Nearest-rank quantile; axes scoring above it are likely not standing
    // upright and get their weight scaled down.
    std::vector<double> sorted = losses;
    std::sort(sorted.begin(), sorted.end());
    const size_t rank = static_cast<size_t>(std::max<long>(
        0, static_cast<long>(
               std::ceil(cfg->trim_quantile * static_cast<double>(sorted.size()))) -
               1));
    const double threshold = sorted[rank];

    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < axes.size(); ++i) {
      double w = axes[i].weight;
      if (losses[i] > threshold) w *= cfg->trim_weight;
      num += w * losses[i];
      den += w;
    }
    if (den <= 0.0) return cfg->infeasible_penalty + wall;
    return num / den + wall;
  }
};

/// Median camera-to-plane distance implied by the axes under (f, N) and the
/// height prior; seeds log D for each start.
inline double initial_plane_offset(std::span<const PersonAxis> axes,
                                   const CameraIntrinsics& K, const Point3& N,
                                   double height_prior) {
  std::vector<double> candidates;
  candidates.reserve(axes.size());
  for (const auto& axis : axes) {
    const double len = (axis.top - axis.bot).norm();
    if (len <= 1.0) continue;
    const double depth = K.f * height_prior / len;
    const Point3 foot = depth * pixel_ray(K, axis.bot);
    const double d = -N.dot(foot);
    if (d > 0.1) candidates.push_back(d);
  }
  if (candidates.empty()) return 3.0 * height_prior;
  std::nth_element(candidates.begin(),
                   candidates.begin() + static_cast<long>(candidates.size() / 2),
                   candidates.end());
  return candidates[candidates.size() / 2];
}

}  // namespace detail

/// Fit focal length and ground plane (or the plane only, when intrinsics are
/// fixed) by minimizing the confidence-weighted mean person loss with a
/// multi-start Nelder-Mead search. Deterministic for a given config and
/// input order.
inline CalibResult estimate_camera_ground(std::span<const PersonAxis> axes,
                                          const CalibConfig& cfg) {
  cfg.validate();

  std::vector<PersonAxis> usable;
  usable.reserve(axes.size());
  for (const auto& axis : axes)
    if ((axis.top - axis.bot).norm() > 1.0 && axis.weight > 0.0)
      usable.push_back(axis);
  if (usable.size() < 3)
    throw Error(ErrorCode::InsufficientAxes,
                "need at least 3 usable person axes, got " +
                    std::to_string(usable.size()));

  // Reject ankle points that are collinear in the image.
  {
    Point2 mean{0.0, 0.0};
    for (const auto& a : usable) mean += a.bot;
    mean /= static_cast<double>(usable.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& a : usable) {
      const Point2 d = a.bot - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    if (eig.eigenvalues()(0) / static_cast<double>(usable.size()) < 1e-6)
      throw Error(ErrorCode::InsufficientAxes,
                  "ankle points are collinear in the image");
  }

  const bool fit_focal = !cfg.fixed_intrinsics.has_value();
  detail::CalibObjective objective{usable, &cfg, fit_focal, {}};

  // Start grid: focal values log-spaced in bounds x two canonical tilts
  // (straight down and a typical surveillance pitch).
  std::vector<Eigen::VectorXd> starts;
  const std::array<double, 2> tilt_b = {0.0, std::tan(30.0 * M_PI / 180.0)};
  if (fit_focal) {
    const int n_f = std::max(1, cfg.multistart_count / 2);
    const double lo = std::log(cfg.effective_f_min());
    const double hi = std::log(cfg.effective_f_max());
    for (int i = 0; i < n_f; ++i) {
      const double lf = lo + (hi - lo) * (i + 0.5) / n_f;
      const CameraIntrinsics K = CameraIntrinsics::from_focal(
          std::exp(lf), cfg.effective_width(), cfg.effective_height());
      for (double b : tilt_b) {
        const Point3 N = detail::normal_from_ab(0.0, b);
        const double d0 =
            detail::initial_plane_offset(usable, K, N, cfg.height_prior);
        Eigen::VectorXd x(4);
        x << lf, 0.0, b, std::log(d0);
        starts.push_back(x);
      }
    }
  } else {
    const CameraIntrinsics& K = *cfg.fixed_intrinsics;
    const std::array<double, 3> d_scales = {0.5, 1.0, 2.0};
    for (double b : tilt_b) {
      const Point3 N = detail::normal_from_ab(0.0, b);
      const double d0 =
          detail::initial_plane_offset(usable, K, N, cfg.height_prior);
      for (double s : d_scales) {
        Eigen::VectorXd x(3);
        x << 0.0, b, std::log(d0 * s);
        starts.push_back(x);
      }
    }
  }

  NelderMeadOptions nm;
  nm.max_iterations = cfg.max_iterations;
  nm.f_tol = cfg.convergence_tol;
  nm.restarts = 2;

  auto run_start = [&](const Eigen::VectorXd& x0) {
    detail::CalibObjective local = objective;  // own scratch per thread
    Eigen::VectorXd step(x0.size());
    if (fit_focal)
      step << 0.3, 0.15, 0.15, 0.25;
    else
      step << 0.15, 0.15, 0.25;
    return nelder_mead([&local](const Eigen::VectorXd& p) { return local(p); },
                       x0, step, nm);
  };

  std::vector<NelderMeadResult> results(starts.size());
  if (cfg.threads > 1 && starts.size() > 1) {
    std::vector<std::future<NelderMeadResult>> futures;
    futures.reserve(starts.size());
    for (const auto& x0 : starts)
      futures.push_back(
          std::async(std::launch::async, [&run_start, x0] { return run_start(x0); }));
    for (size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  } else {
    for (size_t i = 0; i < starts.size(); ++i) results[i] = run_start(starts[i]);
  }

  size_t best = 0;
  bool any_finite = false;
  for (size_t i = 0; i < results.size(); ++i) {
    if (!std::isfinite(results[i].value)) continue;
    if (!any_finite || results[i].value < results[best].value) {
      best = i;
      any_finite = true;
    }
  }
  if (!any_finite)
    throw Error(ErrorCode::OptimizerDiverged, "no trial produced finite loss");

  NelderMeadResult incumbent = results[best];

  if (fit_focal) {
    // The loss valley is long and shallow in log f. Sweep a focal grid with
    // the remaining parameters re-fit at each point, then polish in full.
    NelderMeadOptions reduced = nm;
    reduced.max_iterations = std::max(200, cfg.max_iterations / 4);
    reduced.restarts = 1;
    auto refit_at_focal = [&](double lf, const Eigen::VectorXd& seed) {
      detail::CalibObjective local = objective;
      Eigen::Vector3d step3(0.1, 0.1, 0.15);
      const auto sub = nelder_mead(
          [&local, lf](const Eigen::VectorXd& p) {
            Eigen::VectorXd full(4);
            full << lf, p(0), p(1), p(2);
            return local(full);
          },
          seed.tail(3), step3, reduced);
      NelderMeadResult out;
      out.x = Eigen::VectorXd(4);
      out.x << lf, sub.x(0), sub.x(1), sub.x(2);
      out.value = sub.value;
      return out;
    };

    for (const auto& [half_width, points] :
         std::vector<std::pair<double, int>>{{0.6, 21}, {0.06, 13}}) {
      const double lf_center = incumbent.x(0);
      std::vector<NelderMeadResult> sweep(static_cast<size_t>(points));
      auto run_point = [&](size_t i) {
        const double lf =
            lf_center - half_width +
            2.0 * half_width * static_cast<double>(i) / (points - 1);
        sweep[i] = refit_at_focal(
            std::clamp(lf, std::log(cfg.effective_f_min()),
                       std::log(cfg.effective_f_max())),
            incumbent.x);
      };
      if (cfg.threads > 1) {
        std::vector<std::future<void>> futures;
        for (size_t i = 0; i < sweep.size(); ++i)
          futures.push_back(std::async(std::launch::async, run_point, i));
        for (auto& f : futures) f.get();
      } else {
        for (size_t i = 0; i < sweep.size(); ++i) run_point(i);
      }
      for (const auto& candidate : sweep)
        if (std::isfinite(candidate.value) && candidate.value < incumbent.value)
          incumbent = candidate;
    }

    detail::CalibObjective local = objective;
    Eigen::VectorXd polish_step(4);
    polish_step << 0.02, 0.02, 0.02, 0.02;
    const auto polished = nelder_mead(
        [&local](const Eigen::VectorXd& p) { return local(p); }, incumbent.x,
        polish_step, nm);
    if (polished.value < incumbent.value) incumbent = polished;
  }

  const Eigen::VectorXd& x = incumbent.x;
  int idx = 0;
  CameraIntrinsics K;
  if (fit_focal) {
    const double lf = std::clamp(x(idx++), std::log(cfg.effective_f_min()),
                                 std::log(cfg.effective_f_max()));
    K = CameraIntrinsics::from_focal(std::exp(lf), cfg.effective_width(),
                                     cfg.effective_height());
  } else {
    K = *cfg.fixed_intrinsics;
  }
  const double a = x(idx++);
  const double b = x(idx++);
  const GroundPlane G{detail::normal_from_ab(a, b), std::exp(x(idx))};
  return {K, G, incumbent.value, static_cast<int>(usable.size())};
}

}  // namespace crowdloc
