/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "crowdloc/metrics.hpp"
#include "crowdloc/synth.hpp"

namespace crowdloc {

/// One predicted person as the evaluator sees it.
struct EvalPerson {
  int id = 0;
  JointArray3 joints_cam{};
};

/// Match predictions to a ground-truth scene and fill the full report:
/// pairing by 2D torso distance, spatial-consistency scores over matched
/// torso centers, joint metrics per matched pair, and F1 punishment.
/// Ground-truth persons flagged occluded or truncated are excluded from the
/// statistics.
inline MetricsReport evaluate_against_scene(const SceneTruth& scene,
                                            std::span<const EvalPerson> preds) {
  const CameraIntrinsics& K = scene.intrinsics;

  std::vector<MatchCandidate> candidates;
  candidates.reserve(preds.size());
  std::vector<const EvalPerson*> by_id(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    const Point3 torso = torso_center_3d(preds[i].joints_cam);
    MatchCandidate c;
    c.id = static_cast<int>(i);
    const auto px = try_project(K, torso);
    c.torso_px = px ? *px : Point2{-1e9, -1e9};
    candidates.push_back(c);
    by_id[i] = &preds[i];
  }

  std::vector<MatchTarget> targets;
  targets.reserve(scene.persons.size());
  for (const auto& person : scene.persons) {
    MatchTarget t;
    t.id = person.id;
    t.torso_px = person.torso2;
    t.pixel_height = person.bbox_2d().height();
    t.excluded = person.occluded || person.truncated;
    targets.push_back(t);
  }

  const MatchResult matching = match(candidates, targets);

  MetricsReport report;
  report.precision = matching.precision();
  report.recall = matching.recall();
  report.f1 = matching.f1();

  std::vector<std::pair<Point3, Point3>> torso_pairs;
  std::vector<std::pair<double, double>> depth_pairs;
  double oks_sum = 0.0, t_sum = 0.0, pa_sum = 0.0;
  size_t joint_count = 0;
  for (const auto& [pred_id, gt_id] : matching.pairs) {
    const EvalPerson& pred = *by_id[static_cast<size_t>(pred_id)];
    const PersonTruth& gt = scene.persons[static_cast<size_t>(gt_id)];
    const Point3 pred_torso = torso_center_3d(pred.joints_cam);
    torso_pairs.emplace_back(pred_torso, gt.torso3);
    depth_pairs.emplace_back(pred_torso.z(), gt.torso3.z());

    Skeleton2D pred_2d;
    for (int j = 0; j < kJointCount; ++j) {
      const auto px = try_project(K, pred.joints_cam[static_cast<size_t>(j)]);
      if (px) pred_2d.set(static_cast<Joint>(j), *px, 1.0);
    }
    const Skeleton2D gt_2d = gt.skeleton_2d();
    oks_sum += oks(pred_2d, gt_2d, gt.bbox_2d().area());
    t_sum += t_mpjpe(pred.joints_cam, gt.joints_cam);
    pa_sum += pa_mpjpe(pred.joints_cam, gt.joints_cam);
    ++joint_count;
  }

  if (joint_count > 0) {
    const double n = static_cast<double>(joint_count);
    report.oks.match = oks_sum / n;
    report.t_mpjpe.match = t_sum / n;
    report.pa_mpjpe.match = pa_sum / n;
  }
  if (torso_pairs.size() >= 2) {
    report.ppds.match = ppds(torso_pairs);
    report.pcod.match = pcod(depth_pairs);
  }
  if (torso_pairs.size() >= 3) {
    try {
      report.pa_ppds.match = pa_ppds(torso_pairs);
    } catch (const Error&) {
      // collinear crowd: leave undefined
    }
  }
  punish(report);
  return report;
}

}  // namespace crowdloc
