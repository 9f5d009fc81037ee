/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdloc/calib.hpp"
#include "crowdloc/detect.hpp"
#include "crowdloc/error.hpp"
#include "crowdloc/geometry.hpp"
#include "crowdloc/parallel.hpp"
#include "crowdloc/synth.hpp"
#include "crowdloc/tiling.hpp"
#include "crowdloc/upright.hpp"

namespace crowdloc {

/// Pluggable keypoint detector: square crop in, crop-local skeletons out.
/// Implementations must be deterministic in the crop geometry alone so the
/// pipeline stays reproducible under any processing order.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Skeleton2D> detect(const CropBox& crop) const = 0;
};

class SimulatedDetector : public Detector {
 public:
  SimulatedDetector(const SceneTruth& scene, DetectorCapability capability,
                    std::uint64_t seed)
      : scene_(&scene), capability_(capability), seed_(seed) {}

  std::vector<Skeleton2D> detect(const CropBox& crop) const override {
    return simulate_detection_crop(*scene_, crop, capability_, seed_);
  }

  const DetectorCapability& capability() const { return capability_; }

 private:
  const SceneTruth* scene_;
  DetectorCapability capability_;
  std::uint64_t seed_;
};

/// Pluggable HVIP estimator operating in the upright frame. Returns the
/// normalized vertical offset from the torso anchor to the ground point, or
/// nothing when the estimate is unavailable for this person.
class HvipEstimator {
 public:
  virtual ~HvipEstimator() = default;
  virtual std::optional<double> estimate(const UprightFrame& frame,
                                         const Skeleton2D& skel_up,
                                         const Skeleton2D& skel_image) const = 0;
};

/// Ankle-midpoint heuristic (valid for standing people).
class HeuristicHvipEstimator : public HvipEstimator {
 public:
  std::optional<double> estimate(const UprightFrame& frame,
                                 const Skeleton2D& skel_up,
                                 const Skeleton2D&) const override {
    if (!skel_up.has(Joint::LeftAnkle) || !skel_up.has(Joint::RightAnkle))
      return std::nullopt;
    return heuristic_hvip(skel_up, frame.resolution);
  }
};

namespace detail {

/// Nearest ground-truth person by torso pixel distance, gated at half the
/// person's pixel height.
inline std::optional<int> nearest_truth(const SceneTruth& scene,
                                        const Skeleton2D& skel_image) {
  const auto torso = skel_image.torso_center();
  if (!torso) return std::nullopt;
  int best = -1;
  double best_dist = 0.0;
  for (const auto& person : scene.persons) {
    const double d = (person.torso2 - *torso).norm();
    if (best < 0 || d < best_dist) {
      best = person.id;
      best_dist = d;
    }
  }
  if (best < 0) return std::nullopt;
  const double gate =
      0.5 * scene.persons[static_cast<size_t>(best)].bbox_2d().height();
  if (best_dist > gate) return std::nullopt;
  return best;
}

}  // namespace detail

/// Ground-truth HVIP lookup for detections that match a synthetic person.
class OracleHvipEstimator : public HvipEstimator {
 public:
  explicit OracleHvipEstimator(const SceneTruth& scene) : scene_(&scene) {}

  std::optional<double> estimate(const UprightFrame& frame,
                                 const Skeleton2D&,
                                 const Skeleton2D& skel_image) const override {
    const auto id = detail::nearest_truth(*scene_, skel_image);
    if (!id) return std::nullopt;
    return oracle_hvip_offset(*scene_, *id, frame);
  }

 private:
  const SceneTruth* scene_;
};

struct BodyEstimate {
  JointArray3 joints_u3{};
  OrthoCam ortho;
  std::vector<double> shape_params;
};

/// Pluggable upright-space body regressor.
class BodyEstimator {
 public:
  virtual ~BodyEstimator() = default;
  virtual std::optional<BodyEstimate> estimate(
      const UprightFrame& frame, const Skeleton2D& skel_up,
      const Skeleton2D& skel_image) const = 0;
};

/// Ground-truth body regressor for synthetic scenes.
class OracleBodyEstimator : public BodyEstimator {
 public:
  explicit OracleBodyEstimator(const SceneTruth& scene) : scene_(&scene) {}

  std::optional<BodyEstimate> estimate(
      const UprightFrame& frame, const Skeleton2D&,
      const Skeleton2D& skel_image) const override {
    const auto id = detail::nearest_truth(*scene_, skel_image);
    if (!id) return std::nullopt;
    const UprightRegression reg = oracle_upright_regression(*scene_, *id, frame);
    BodyEstimate est;
    est.joints_u3 = reg.joints_u3;
    est.ortho = reg.ortho;
    est.shape_params = {
        scene_->persons[static_cast<size_t>(*id)].stature / kCanonicalStature};
    return est;
  }

 private:
  const SceneTruth* scene_;
};

struct PipelineConfig {
  CalibConfig calib;
  TilingConfig tiling;
  UprightConfig upright;
  double dedup_tau = kDefaultDedupTau;
  int max_iterations = 3;
  double convergence_angle_deg = 1.0;
  double convergence_rel_offset = 0.01;
  double convergence_rel_focal = 0.01;
  double stature_min_plausible = 1.2;
  double stature_max_plausible = 2.3;
  int threads = 1;
};

struct IterationRecord {
  double angle_deg = 0.0;    ///< change of the ground normal
  double rel_offset = 0.0;   ///< |dD| / D
  double rel_focal = 0.0;    ///< |df| / f
  double residual = 0.0;
  int num_detections = 0;
  int num_crops = 0;
};

struct PipelineState {
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
};

struct CroppingResult {
  CameraIntrinsics intrinsics;
  GroundPlane ground;
  std::vector<Skeleton2D> detections;  ///< original-image coordinates, deduped
  std::vector<CropBox> final_plan;
  PipelineState state;
  double bootstrap_residual = 0.0;
};

namespace detail {

/// An edge of a crop counts as "covered" when any other crop of the plan
/// overlaps a thin strip just beyond it.
inline EdgeNeighbors edge_neighbors(std::span<const CropBox> plan,
                                    size_t index) {
  const CropBox& b = plan[index];
  const double strip = std::max(2.0, kEdgeProximityFraction * b.size);
  auto overlaps = [&](double u0, double v0, double u1, double v1) {
    for (size_t i = 0; i < plan.size(); ++i) {
      if (i == index) continue;
      const CropBox& o = plan[i];
      if (o.u0 < u1 && o.u0 + o.size > u0 && o.v0 < v1 && o.v0 + o.size > v0)
        return true;
    }
    return false;
  };
  EdgeNeighbors n;
  n.left = overlaps(b.u0 - strip, b.v0, b.u0, b.v0 + b.size);
  n.right = overlaps(b.u0 + b.size, b.v0, b.u0 + b.size + strip,
                     b.v0 + b.size);
  n.top = overlaps(b.u0, b.v0 - strip, b.u0 + b.size, b.v0);
  n.bottom = overlaps(b.u0, b.v0 + b.size, b.u0 + b.size,
                      b.v0 + b.size + strip);
  return n;
}

/// Detect over a crop plan, drop crop-truncated detections, lift to image
/// coordinates, and deduplicate. Crop ids are offset by `first_crop_id`.
inline std::vector<Skeleton2D> detect_over_plan(std::span<const CropBox> plan,
                                                const Detector& detector,
                                                int first_crop_id, double tau,
                                                int threads) {
  std::vector<std::vector<Skeleton2D>> per_crop(plan.size());
  parallel_for(plan.size(), threads, [&](size_t i) {
    auto dets = detector.detect(plan[i]);
    dets = filter_truncated(dets, plan[i], edge_neighbors(plan, i));
    for (auto& d : dets) {
      d = to_image_coords(d, plan[i]);
      d.source_crop = first_crop_id + static_cast<int>(i);
    }
    per_crop[i] = std::move(dets);
  });
  std::vector<Skeleton2D> pooled;
  for (auto& dets : per_crop)
    pooled.insert(pooled.end(), dets.begin(), dets.end());
  return deduplicate(pooled, tau);
}

inline std::vector<PersonAxis> axes_from_detections(
    std::span<const Skeleton2D> detections) {
  std::vector<PersonAxis> axes;
  axes.reserve(detections.size());
  for (const auto& det : detections) {
    if (!det.has(Joint::LeftShoulder) || !det.has(Joint::RightShoulder) ||
        !det.has(Joint::LeftAnkle) || !det.has(Joint::RightAnkle))
      continue;
    PersonAxis axis;
    axis.top = (det.at(Joint::LeftShoulder).pos +
                det.at(Joint::RightShoulder).pos) /
               2.0;
    axis.bot =
        (det.at(Joint::LeftAnkle).pos + det.at(Joint::RightAnkle).pos) / 2.0;
    axis.weight = (det.at(Joint::LeftShoulder).confidence +
                   det.at(Joint::RightShoulder).confidence +
                   det.at(Joint::LeftAnkle).confidence +
                   det.at(Joint::RightAnkle).confidence) /
                  4.0;
    if ((axis.top - axis.bot).norm() > 1.0) axes.push_back(axis);
  }
  return axes;
}

}  // namespace detail

/// Bootstrap with multi-scale uniform crops, then alternate calibration and
/// ground-aware cropping until the ground parameters settle (or the
/// iteration cap is hit).
inline CroppingResult run_iterative_cropping(double image_w, double image_h,
                                             const Detector& detector,
                                             const PipelineConfig& cfg) {
  CalibConfig calib_cfg = cfg.calib;
  if (calib_cfg.image_w <= 0.0) calib_cfg.image_w = image_w;
  if (calib_cfg.image_h <= 0.0) calib_cfg.image_h = image_h;
  calib_cfg.threads = cfg.threads;

  // Bootstrap: pool every uniform attempt, then dedup once.
  std::vector<Skeleton2D> detections;
  {
    std::vector<CropBox> all;
    for (const auto& attempt : uniform_crops(image_w, image_h)) {
      std::vector<Skeleton2D> dets = detail::detect_over_plan(
          attempt, detector, static_cast<int>(all.size()), cfg.dedup_tau,
          cfg.threads);
      detections.insert(detections.end(), dets.begin(), dets.end());
      all.insert(all.end(), attempt.begin(), attempt.end());
    }
    detections = deduplicate(detections, cfg.dedup_tau);
  }
  if (detections.empty())
    throw Error(ErrorCode::NoDetections, "bootstrap produced no detections");

  CroppingResult result;
  auto calibrate = [&](std::span<const Skeleton2D> dets) {
    const auto axes = detail::axes_from_detections(dets);
    try {
      return estimate_camera_ground(axes, calib_cfg);
    } catch (const Error& e) {
      throw Error(ErrorCode::CalibrationFailed, e.what());
    }
  };

  CalibResult calib = calibrate(detections);
  result.bootstrap_residual = calib.residual;

  for (int iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
    const std::vector<CropBox> plan =
        plan_crops(calib.intrinsics, calib.ground, cfg.tiling);
    std::vector<Skeleton2D> new_detections = detail::detect_over_plan(
        plan, detector, 0, cfg.dedup_tau, cfg.threads);
    if (new_detections.empty())
      throw Error(ErrorCode::NoDetections,
                  "ground-aware pass produced no detections");
    const CalibResult updated = calibrate(new_detections);

    IterationRecord record;
    record.angle_deg =
        angle_between(updated.ground.normal, calib.ground.normal) * 180.0 /
        M_PI;
    record.rel_offset = std::abs(updated.ground.offset - calib.ground.offset) /
                        std::max(std::abs(calib.ground.offset), 1e-12);
    record.rel_focal = std::abs(updated.intrinsics.f - calib.intrinsics.f) /
                       std::max(calib.intrinsics.f, 1e-12);
    record.residual = updated.residual;
    record.num_detections = static_cast<int>(new_detections.size());
    record.num_crops = static_cast<int>(plan.size());

    calib = updated;
    detections = std::move(new_detections);
    result.final_plan = plan;
    result.state.history.push_back(record);
    result.state.iterations = iteration;
    if (record.angle_deg < cfg.convergence_angle_deg &&
        record.rel_offset < cfg.convergence_rel_offset &&
        record.rel_focal < cfg.convergence_rel_focal) {
      result.state.converged = true;
      break;
    }
  }

  result.intrinsics = calib.intrinsics;
  result.ground = calib.ground;
  result.detections = std::move(detections);
  return result;
}

struct SkippedPerson {
  int detection_index = 0;
  std::string reason;
};

struct ReconstructedPerson {
  int detection_index = 0;
  Placement3D placement;
  bool stature_flagged = false;  ///< implied stature outside plausible bounds
};

struct ReconstructAllResult {
  std::vector<ReconstructedPerson> persons;  ///< input order
  std::vector<SkippedPerson> skipped;
};

/// Per-person reconstruction: upright frame, HVIP, body estimate, and the
/// transform back to camera space. Failures are isolated into the skip list;
/// implausible statures are flagged, never dropped.
inline ReconstructAllResult reconstruct_all(
    std::span<const Skeleton2D> detections, const CameraIntrinsics& K,
    const GroundPlane& G, const HvipEstimator& hvip_estimator,
    const BodyEstimator& body_estimator, const PipelineConfig& cfg = {}) {
  struct Slot {
    std::optional<ReconstructedPerson> person;
    std::optional<SkippedPerson> skipped;
  };
  std::vector<Slot> slots(detections.size());

  parallel_for(detections.size(), cfg.threads, [&](size_t i) {
    const Skeleton2D& skel = detections[i];
    const int index = static_cast<int>(i);
    try {
      const UprightFrame frame = build_upright_frame(K, G, skel, cfg.upright);
      const Skeleton2D skel_up = warp_to_upright(skel, frame);

      const auto d_hvip = hvip_estimator.estimate(frame, skel_up, skel);
      if (!d_hvip) {
        slots[i].skipped = {index, "hvip estimator returned no estimate"};
        return;
      }
      const Point2 torso_up = frame.apply(frame.torso_pixel);
      const Point2 hvip_pixel = compose_hvip(torso_up, *d_hvip, frame);

      const auto body = body_estimator.estimate(frame, skel_up, skel);
      if (!body) {
        slots[i].skipped = {index, "body estimator returned no estimate"};
        return;
      }

      ReconstructedPerson person;
      person.detection_index = index;
      person.placement = upright_to_camera(body->joints_u3, body->ortho, frame,
                                           frame.torso_pixel, hvip_pixel, K, G);
      person.placement.shape_params = body->shape_params;
      const double implied_stature =
          person.placement.scale_to_cam * kCanonicalStature;
      person.stature_flagged = implied_stature < cfg.stature_min_plausible ||
                               implied_stature > cfg.stature_max_plausible;
      slots[i].person = std::move(person);
    } catch (const Error& e) {
      slots[i].skipped = {index, e.what()};
    }
  });

  ReconstructAllResult result;
  for (auto& slot : slots) {
    if (slot.person) result.persons.push_back(std::move(*slot.person));
    if (slot.skipped) result.skipped.push_back(std::move(*slot.skipped));
  }
  return result;
}

}  // namespace crowdloc
