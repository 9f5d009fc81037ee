/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crowdloc/error.hpp"
#include "crowdloc/hungarian.hpp"
#include "crowdloc/skeleton.hpp"

namespace crowdloc {

inline constexpr double kPcodTieEpsilon = 0.1;   ///< meters
inline constexpr double kMatchGateFactor = 0.5;  ///< of the GT pixel height

struct MatchCandidate {
  int id = 0;
  Point2 torso_px{0.0, 0.0};
};

struct MatchTarget {
  int id = 0;
  Point2 torso_px{0.0, 0.0};
  double pixel_height = 0.0;
  bool excluded = false;  ///< occluded by the scene or truncated by the edge
};

/// One-to-one prediction/ground-truth pairing. Predictions matched to
/// excluded ground truths are dropped from the statistics entirely: they are
/// neither pairs nor false positives.
struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  ///< (pred id, gt id), gt not excluded
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;  ///< non-excluded only
  std::vector<int> excluded_gt;

  double precision() const {
    const double denom = static_cast<double>(pairs.size() + unmatched_pred.size());
    return denom > 0.0 ? static_cast<double>(pairs.size()) / denom : 0.0;
  }
  double recall() const {
    const double denom = static_cast<double>(pairs.size() + unmatched_gt.size());
    return denom > 0.0 ? static_cast<double>(pairs.size()) / denom : 0.0;
  }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
};

/// Optimal assignment on 2D torso distance, gated at half the ground-truth
/// pixel height.
inline MatchResult match(std::span<const MatchCandidate> preds,
                         std::span<const MatchTarget> gts,
                         double gate_factor = kMatchGateFactor) {
  const int np = static_cast<int>(preds.size());
  const int ng = static_cast<int>(gts.size());
  Eigen::MatrixXd cost(np, ng);
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < ng; ++j) {
      const double d = (preds[static_cast<size_t>(i)].torso_px -
                        gts[static_cast<size_t>(j)].torso_px)
                           .norm();
      const double gate = gate_factor * gts[static_cast<size_t>(j)].pixel_height;
      cost(i, j) = d <= gate ? d : kUnmatchableCost;
    }
  }
  const std::vector<int> assignment = solve_assignment(cost);

  MatchResult result;
  std::vector<bool> gt_matched(static_cast<size_t>(ng), false);
  for (int i = 0; i < np; ++i) {
    const int j = assignment[static_cast<size_t>(i)];
    if (j < 0 || cost(i, j) >= kUnmatchableCost) {
      result.unmatched_pred.push_back(preds[static_cast<size_t>(i)].id);
      continue;
    }
    gt_matched[static_cast<size_t>(j)] = true;
    if (!gts[static_cast<size_t>(j)].excluded)
      result.pairs.emplace_back(preds[static_cast<size_t>(i)].id,
                                gts[static_cast<size_t>(j)].id);
  }
  for (int j = 0; j < ng; ++j) {
    if (gts[static_cast<size_t>(j)].excluded)
      result.excluded_gt.push_back(gts[static_cast<size_t>(j)].id);
    else if (!gt_matched[static_cast<size_t>(j)])
      result.unmatched_gt.push_back(gts[static_cast<size_t>(j)].id);
  }
  return result;
}

/// Pair-wise percentage distance similarity over matched torso centers
/// (estimated, ground truth), in [0, 100].
inline double ppds(std::span<const std::pair<Point3, Point3>> pairs) {
  const size_t n = pairs.size();
  if (n < 2)
    throw Error(ErrorCode::TooFewPairs, "PPDS needs at least 2 matched pairs");
  double sum = 0.0;
  size_t count = 0;
  for (size_t k = 0; k < n; ++k) {
    for (size_t i = k + 1; i < n; ++i) {
      const double gt_dist = (pairs[k].second - pairs[i].second).norm();
      if (gt_dist <= 1e-9)
        throw Error(ErrorCode::CoincidentGroundTruth,
                    "two ground-truth torsos coincide");
      const double est_dist = (pairs[k].first - pairs[i].first).norm();
      const double d = std::abs(est_dist - gt_dist) / gt_dist;
      sum += 1.0 - std::min(d, 1.0);
      ++count;
    }
  }
  return 100.0 * sum / static_cast<double>(count);
}

/// Similarity transform (rotation + translation + uniform scale, reflection
/// excluded) minimizing the squared alignment error of src onto dst.
inline Eigen::Matrix4d procrustes_similarity(
    const std::vector<Point3>& src, const std::vector<Point3>& dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw Error(ErrorCode::DegenerateConfiguration,
                "similarity fit needs >= 3 point pairs");
  Eigen::Matrix3Xd S(3, static_cast<Eigen::Index>(src.size()));
  Eigen::Matrix3Xd D(3, static_cast<Eigen::Index>(dst.size()));
  for (size_t i = 0; i < src.size(); ++i) {
    S.col(static_cast<Eigen::Index>(i)) = src[i];
    D.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  const Eigen::Matrix3Xd centered = D.colwise() - D.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  if (svd.singularValues()(1) < 1e-9 * std::max(svd.singularValues()(0), 1e-300))
    throw Error(ErrorCode::DegenerateConfiguration,
                "target points are collinear");
  return Eigen::umeyama(S, D, true);
}

/// PPDS after Procrustes alignment of the estimated torso layout onto the
/// ground truth.
inline double pa_ppds(std::span<const std::pair<Point3, Point3>> pairs) {
  if (pairs.size() < 3)
    throw Error(ErrorCode::DegenerateConfiguration,
                "PA-PPDS needs at least 3 matched pairs");
  std::vector<Point3> est, gt;
  est.reserve(pairs.size());
  gt.reserve(pairs.size());
  for (const auto& [e, g] : pairs) {
    est.push_back(e);
    gt.push_back(g);
  }
  const Eigen::Matrix4d T = procrustes_similarity(est, gt);
  std::vector<std::pair<Point3, Point3>> aligned;
  aligned.reserve(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    const Point3 e = (T * est[i].homogeneous()).hnormalized();
    aligned.emplace_back(e, gt[i]);
  }
  return ppds(aligned);
}

/// Percentage of person pairs whose predicted depth order matches the ground
/// truth. Depth gaps below the tie epsilon must tie on both sides to count.
inline double pcod(std::span<const std::pair<double, double>> depths,
                   double tie_eps = kPcodTieEpsilon) {
  const size_t n = depths.size();
  if (n < 2)
    throw Error(ErrorCode::TooFewPairs, "PCOD needs at least 2 matched pairs");
  size_t correct = 0, count = 0;
  for (size_t k = 0; k < n; ++k) {
    for (size_t i = k + 1; i < n; ++i) {
      const double de = depths[k].first - depths[i].first;
      const double dg = depths[k].second - depths[i].second;
      const bool tie_e = std::abs(de) < tie_eps;
      const bool tie_g = std::abs(dg) < tie_eps;
      bool ok = false;
      if (tie_e && tie_g)
        ok = true;
      else if (!tie_e && !tie_g)
        ok = (de > 0.0) == (dg > 0.0);
      correct += ok ? 1 : 0;
      ++count;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(count);
}

/// COCO-style object keypoint similarity over the labeled ground-truth
/// keypoints, with s^2 the ground-truth bbox area.
inline double oks(const Skeleton2D& pred, const Skeleton2D& gt,
                  double gt_bbox_area) {
  double sum = 0.0;
  int labeled = 0;
  const double s2 = std::max(gt_bbox_area, 1e-12);
  for (int i = 0; i < kJointCount; ++i) {
    const auto& kg = gt.joints[static_cast<size_t>(i)];
    if (!kg.present) continue;
    ++labeled;
    const auto& kp = pred.joints[static_cast<size_t>(i)];
    if (!kp.present) continue;  // missed keypoint contributes 0
    const double d2 = (kp.pos - kg.pos).squaredNorm();
    const double k = kOksConstants[static_cast<size_t>(i)];
    sum += std::exp(-d2 / (2.0 * s2 * k * k));
  }
  if (labeled == 0)
    throw Error(ErrorCode::NoLabeledKeypoints, "ground truth has no keypoints");
  return sum / labeled;
}

namespace detail {

inline Point3 root_joint(const JointArray3& joints) {
  return (joints[static_cast<size_t>(Joint::LeftHip)] +
          joints[static_cast<size_t>(Joint::RightHip)]) /
         2.0;
}

}  // namespace detail

/// Mean per-joint error after aligning the root joints (hip midpoints) by
/// translation only.
inline double t_mpjpe(const JointArray3& pred, const JointArray3& gt) {
  const Point3 shift = detail::root_joint(gt) - detail::root_joint(pred);
  double sum = 0.0;
  for (int i = 0; i < kJointCount; ++i)
    sum += (pred[static_cast<size_t>(i)] + shift - gt[static_cast<size_t>(i)])
               .norm();
  return sum / kJointCount;
}

/// Mean per-joint error after a full similarity Procrustes fit per person.
inline double pa_mpjpe(const JointArray3& pred, const JointArray3& gt) {
  std::vector<Point3> src(pred.begin(), pred.end());
  std::vector<Point3> dst(gt.begin(), gt.end());
  const Eigen::Matrix4d T = procrustes_similarity(src, dst);
  double sum = 0.0;
  for (int i = 0; i < kJointCount; ++i) {
    const Point3 p =
        (T * pred[static_cast<size_t>(i)].homogeneous()).hnormalized();
    sum += (p - gt[static_cast<size_t>(i)]).norm();
  }
  return sum / kJointCount;
}

/// Matched-mean value and its F1-punished counterpart.
struct MetricEntry {
  std::optional<double> match;
  std::optional<double> norm;
};

struct MetricsReport {
  MetricEntry ppds, pa_ppds, pcod, oks;      ///< scores: norm = match * f1
  MetricEntry t_mpjpe, pa_mpjpe;             ///< errors: norm = match / f1
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Fill in the punished values: scores are multiplied by F1, errors divided.
/// A zero F1 leaves error norms undefined rather than infinite.
inline void punish(MetricsReport& report) {
  auto score = [&](MetricEntry& e) {
    if (e.match) e.norm = *e.match * report.f1;
  };
  auto error = [&](MetricEntry& e) {
    if (e.match) {
      if (report.f1 <= 0.0)
        e.norm = std::nullopt;
      else
        e.norm = *e.match / report.f1;
    }
  };
  score(report.ppds);
  score(report.pa_ppds);
  score(report.pcod);
  score(report.oks);
  error(report.t_mpjpe);
  error(report.pa_mpjpe);
}

}  // namespace crowdloc
