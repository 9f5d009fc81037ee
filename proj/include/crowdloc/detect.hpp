/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "crowdloc/error.hpp"
#include "crowdloc/skeleton.hpp"
#include "crowdloc/tiling.hpp"

namespace crowdloc {

inline constexpr double kLowConfidence = 0.2;
inline constexpr double kHighConfidence = 0.35;
inline constexpr double kEdgeProximityFraction = 0.02;
inline constexpr double kDefaultDedupTau = 0.25;

/// Which edges of a crop are covered by another crop in the same plan.
struct EdgeNeighbors {
  bool left = false, top = false, right = false, bottom = false;
};

/// Shift a crop-local skeleton into original-image coordinates.
inline Skeleton2D to_image_coords(const Skeleton2D& skel, const CropBox& crop) {
  Skeleton2D out = skel;
  for (auto& k : out.joints)
    if (k.present) k.pos += Point2{crop.u0, crop.v0};
  return out;
}

/// Drop detections that are both low-confidence somewhere and pressed against
/// a crop edge that a neighboring crop covers; such people appear whole in
/// the neighbor.
inline std::vector<Skeleton2D> filter_truncated(
    const std::vector<Skeleton2D>& detections, const CropBox& crop,
    const EdgeNeighbors& neighbors) {
  std::vector<Skeleton2D> kept;
  kept.reserve(detections.size());
  const double margin = kEdgeProximityFraction * crop.size;
  for (const auto& det : detections) {
    bool low_conf = false;
    for (const auto& k : det.joints)
      if (k.present && k.confidence < kLowConfidence) low_conf = true;
    const auto box = det.bbox();
    bool near_neighbor_edge = false;
    if (box) {
      if (neighbors.left && box->min_u <= margin) near_neighbor_edge = true;
      if (neighbors.top && box->min_v <= margin) near_neighbor_edge = true;
      if (neighbors.right && box->max_u >= crop.size - margin)
        near_neighbor_edge = true;
      if (neighbors.bottom && box->max_v >= crop.size - margin)
        near_neighbor_edge = true;
    }
    if (low_conf && near_neighbor_edge) continue;
    kept.push_back(det);
  }
  return kept;
}

/// Mean distance over keypoints confident (> 0.35) in both skeletons,
/// normalized by the mean of the two bbox heights. Symmetric.
inline double pose_similarity(const Skeleton2D& a, const Skeleton2D& b) {
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < kJointCount; ++i) {
    const auto& ka = a.joints[static_cast<size_t>(i)];
    const auto& kb = b.joints[static_cast<size_t>(i)];
    if (ka.present && kb.present && ka.confidence > kHighConfidence &&
        kb.confidence > kHighConfidence) {
      sum += (ka.pos - kb.pos).norm();
      ++n;
    }
  }
  if (n == 0)
    throw Error(ErrorCode::NoCommonKeypoints,
                "no keypoint is high-confidence in both skeletons");
  const double height = (a.pixel_height() + b.pixel_height()) / 2.0;
  if (height <= kGeometryEps)
    throw Error(ErrorCode::NoCommonKeypoints, "degenerate pixel heights");
  return sum / n / height;
}

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), size_t{0});
  }
  size_t find(size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<size_t> parent_;
};

/// Uniform-grid index over anchor points; exact for radius queries.
inline std::vector<std::pair<size_t, size_t>> radius_pairs(
    const std::vector<Point2>& anchors, double radius) {
  std::vector<std::pair<size_t, size_t>> pairs;
  if (anchors.empty() || radius <= 0.0) return pairs;
  const double cell = radius;
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<size_t>> grid;
  auto key = [cell](const Point2& p) {
    return std::pair{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                     static_cast<std::int64_t>(std::floor(p.y() / cell))};
  };
  for (size_t i = 0; i < anchors.size(); ++i)
    grid[key(anchors[i])].push_back(i);
  const double r2 = radius * radius;
  for (const auto& [k, bucket] : grid) {
    for (std::int64_t du = -1; du <= 1; ++du) {
      for (std::int64_t dv = -1; dv <= 1; ++dv) {
        const auto it = grid.find({k.first + du, k.second + dv});
        if (it == grid.end()) continue;
        for (size_t i : bucket) {
          for (size_t j : it->second) {
            if (j <= i) continue;
            if ((anchors[i] - anchors[j]).squaredNorm() <= r2)
              pairs.emplace_back(i, j);
          }
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace detail

/// Single-linkage grouping of near-duplicate detections; one survivor per
/// group (highest mean confidence, ties by torso position then crop id).
/// Candidate pairs come from a grid index over torso centers with search
/// radius twice the largest pixel height in the batch.
inline std::vector<Skeleton2D> deduplicate(
    const std::vector<Skeleton2D>& detections,
    double tau = kDefaultDedupTau) {
  const size_t n = detections.size();
  if (n == 0) return {};

  std::vector<Point2> anchors(n);
  double max_height = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const auto torso = detections[i].torso_center();
    const auto box = detections[i].bbox();
    anchors[i] = torso ? *torso
                       : (box ? Point2{(box->min_u + box->max_u) / 2.0,
                                       (box->min_v + box->max_v) / 2.0}
                              : Point2{0.0, 0.0});
    max_height = std::max(max_height, detections[i].pixel_height());
  }

  detail::UnionFind groups(n);
  for (const auto& [i, j] : detail::radius_pairs(anchors, 2.0 * max_height)) {
    try {
      if (pose_similarity(detections[i], detections[j]) < tau)
        groups.unite(i, j);
    } catch (const Error&) {
      // no shared high-confidence keypoints: cannot be duplicates
    }
  }

  // Pick the survivor of each group.
  std::vector<size_t> best(n, n);
  auto better = [&](size_t a, size_t b) {
    const double ca = detections[a].mean_confidence();
    const double cb = detections[b].mean_confidence();
    if (ca != cb) return ca > cb;
    const auto ta = std::tuple{anchors[a].y(), anchors[a].x(),
                               detections[a].source_crop};
    const auto tb = std::tuple{anchors[b].y(), anchors[b].x(),
                               detections[b].source_crop};
    return ta < tb;
  };
  for (size_t i = 0; i < n; ++i) {
    const size_t root = groups.find(i);
    if (best[root] == n || better(i, best[root])) best[root] = i;
  }

  std::vector<Skeleton2D> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    if (best[groups.find(i)] == i) out.push_back(detections[i]);
  return out;
}

}  // namespace crowdloc
