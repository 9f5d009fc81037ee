/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <vector>

#include "crowdloc/detect.hpp"
#include "crowdloc/error.hpp"
#include "crowdloc/geometry.hpp"
#include "crowdloc/rng.hpp"
#include "crowdloc/skeleton.hpp"
#include "crowdloc/tiling.hpp"
#include "crowdloc/upright.hpp"

namespace crowdloc {

/// Stature of the canonical body; upright-3D joints are expressed as if the
/// person had this stature, and the recovered scale factor restores the true
/// one.
inline constexpr double kCanonicalStature = 1.7;

/// Standard anthropometric segment lengths as fractions of stature.
namespace body {
inline constexpr double kTrunk = 0.30;
inline constexpr double kUpperArm = 0.17;
inline constexpr double kLowerArm = 0.16;
inline constexpr double kThigh = 0.245;
inline constexpr double kShank = 0.246;
inline constexpr double kHeadOffset = 0.13;
inline constexpr double kHipHalfWidth = 0.095;
inline constexpr double kShoulderHalfWidth = 0.115;
}  // namespace body

/// Fixed-proportion articulated skeleton in its model frame: y up, feet on
/// y = 0, x lateral, z forward.
struct SkeletonModel {
  double stature = kCanonicalStature;
  JointArray3 joints{};

  /// Straight-limbed body with per-side arm abduction and sagittal leg
  /// swing, in degrees. The body is lowered so the lowest ankle touches 0.
  static SkeletonModel build(double stature, double arm_left_deg = 15.0,
                             double arm_right_deg = 15.0,
                             double leg_left_deg = 0.0,
                             double leg_right_deg = 0.0) {
    SkeletonModel m;
    m.stature = stature;
    const double hip_y = (body::kThigh + body::kShank) * stature;
    const double shoulder_y = hip_y + body::kTrunk * stature;
    const double nose_y = shoulder_y + body::kHeadOffset * stature;
    const double hw = body::kHipHalfWidth * stature;
    const double sw = body::kShoulderHalfWidth * stature;

    auto set = [&m](Joint j, double x, double y, double z) {
      m.joints[static_cast<size_t>(j)] = Point3{x, y, z};
    };
    set(Joint::Nose, 0.0, nose_y, 0.03 * stature);
    set(Joint::LeftShoulder, sw, shoulder_y, 0.0);
    set(Joint::RightShoulder, -sw, shoulder_y, 0.0);
    set(Joint::LeftHip, hw, hip_y, 0.0);
    set(Joint::RightHip, -hw, hip_y, 0.0);

    auto arm = [&](Joint shoulder, Joint elbow, Joint wrist, double side,
                   double abduct_deg) {
      const double a = abduct_deg * M_PI / 180.0;
      const Point3 dir{side * std::sin(a), -std::cos(a), 0.0};
      const Point3 s = m.joints[static_cast<size_t>(shoulder)];
      const Point3 e = s + body::kUpperArm * stature * dir;
      m.joints[static_cast<size_t>(elbow)] = e;
      m.joints[static_cast<size_t>(wrist)] = e + body::kLowerArm * stature * dir;
    };
    arm(Joint::LeftShoulder, Joint::LeftElbow, Joint::LeftWrist, 1.0,
        arm_left_deg);
    arm(Joint::RightShoulder, Joint::RightElbow, Joint::RightWrist, -1.0,
        arm_right_deg);

    auto leg = [&](Joint hip, Joint knee, Joint ankle, double swing_deg) {
      const double a = swing_deg * M_PI / 180.0;
      const Point3 dir{0.0, -std::cos(a), std::sin(a)};
      const Point3 h = m.joints[static_cast<size_t>(hip)];
      const Point3 k = h + body::kThigh * stature * dir;
      m.joints[static_cast<size_t>(knee)] = k;
      m.joints[static_cast<size_t>(ankle)] = k + body::kShank * stature * dir;
    };
    leg(Joint::LeftHip, Joint::LeftKnee, Joint::LeftAnkle, leg_left_deg);
    leg(Joint::RightHip, Joint::RightKnee, Joint::RightAnkle, leg_right_deg);

    const double lowest =
        std::min(m.joints[static_cast<size_t>(Joint::LeftAnkle)].y(),
                 m.joints[static_cast<size_t>(Joint::RightAnkle)].y());
    for (auto& j : m.joints) j.y() -= lowest;
    return m;
  }
};

struct PersonTruth {
  int id = 0;
  double stature = kCanonicalStature;
  double yaw = 0.0;
  Point3 root{0.0, 0.0, 0.0};  ///< ground contact point, on the plane
  JointArray3 joints_cam{};
  std::array<Point2, kJointCount> joints_2d{};
  Point3 torso3{0.0, 0.0, 0.0};
  Point3 hvip3{0.0, 0.0, 0.0};
  Point2 torso2{0.0, 0.0};
  Point2 hvip2{0.0, 0.0};
  double height_above_ground = 0.0;
  bool occluded = false;
  bool truncated = false;

  Skeleton2D skeleton_2d() const {
    Skeleton2D s;
    for (int i = 0; i < kJointCount; ++i)
      s.set(static_cast<Joint>(i), joints_2d[static_cast<size_t>(i)], 1.0);
    return s;
  }

  BoundingBox bbox_2d() const { return *skeleton_2d().bbox(); }
};

struct SceneSpec {
  double fov_deg = 90.0;
  double image_w = 9600.0;
  double image_h = 5400.0;
  int n_people = 100;
  double tilt_min_deg = 0.0;
  double tilt_max_deg = 15.0;
  double stature_min = 1.55;
  double stature_max = 1.90;
  double min_separation = 1.0;   ///< meters between ground contact points
  double camera_height_min = 5.0;
  double camera_height_max = 10.0;
  double min_depth = 8.0;
  double max_depth = 0.0;        ///< 0: up to where people shrink to ~60 px
  double arm_abduction_deg = 15.0;
  double arm_swing_deg = 12.0;
  double leg_swing_deg = 8.0;
  bool frontal = false;  ///< face the camera (yaw 0) instead of random yaws
  bool pitch_only = false;  ///< tilt the ground by camera pitch only
  bool allow_truncated = false;
  int max_attempts_per_person = 500;
  std::uint64_t seed = 0;

  void validate() const {
    if (fov_deg < 20.0 || fov_deg > 150.0)
      throw Error(ErrorCode::InvalidArgument, "fov must be in [20, 150] deg");
    if (n_people < 1)
      throw Error(ErrorCode::InvalidArgument, "need at least one person");
    if (!(stature_min > 0.0) || stature_max < stature_min)
      throw Error(ErrorCode::InvalidArgument, "bad stature range");
    if (image_w < 512.0 || image_h < 512.0)
      throw Error(ErrorCode::InvalidArgument, "image too small");
  }
};

struct SceneTruth {
  CameraIntrinsics intrinsics;
  GroundPlane ground;
  std::vector<PersonTruth> persons;
  std::uint64_t seed = 0;
  SceneSpec spec;
};

namespace detail {

/// Model-to-camera rotation: model y to the ground normal, then yaw about it.
inline Eigen::Matrix3d ground_orientation(const Point3& normal, double yaw) {
  const Point3 e1 = normal.cross(Point3{0.0, 0.0, 1.0}).normalized();
  Eigen::Matrix3d base;
  base.col(0) = e1;
  base.col(1) = normal;
  base.col(2) = e1.cross(normal);
  Eigen::Matrix3d spin;
  const double c = std::cos(yaw), s = std::sin(yaw);
  spin << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return base * spin;
}

}  // namespace detail

/// Deterministic synthetic scene: camera from the field of view, a mildly
/// tilted ground plane, and standing people rejection-sampled on it.
inline SceneTruth generate_scene(const SceneSpec& spec) {
  spec.validate();
  RandomStream rng(spec.seed, 0);

  SceneTruth scene;
  scene.seed = spec.seed;
  scene.spec = spec;
  scene.intrinsics = CameraIntrinsics::from_fov_deg(spec.fov_deg, spec.image_w,
                                                    spec.image_h);

  // Draw tilt/azimuth/height until the camera actually overlooks the ground:
  // an unlucky azimuth can tip the plane out of a narrow frustum entirely.
  bool ground_ok = false;
  for (int attempt = 0; attempt < 200 && !ground_ok; ++attempt) {
    const double tilt =
        rng.uniform(spec.tilt_min_deg, spec.tilt_max_deg) * M_PI / 180.0;
    const double azimuth =
        spec.pitch_only ? 1.5 * M_PI : rng.uniform(0.0, 2.0 * M_PI);
    const Point3 normal{std::sin(tilt) * std::cos(azimuth), -std::cos(tilt),
                        std::sin(tilt) * std::sin(azimuth)};
    const double cam_height =
        rng.uniform(spec.camera_height_min, spec.camera_height_max);
    const GroundPlane candidate(normal, cam_height);
    const CameraIntrinsics cam = CameraIntrinsics::from_fov_deg(
        spec.fov_deg, spec.image_w, spec.image_h);
    const Point2 low{spec.image_w / 2.0, 0.95 * spec.image_h};
    const Point2 mid{spec.image_w / 2.0, 0.70 * spec.image_h};
    if (try_reverse_project_to_ground(cam, candidate, low) &&
        try_reverse_project_to_ground(cam, candidate, mid)) {
      scene.ground = candidate;
      ground_ok = true;
    }
  }
  if (!ground_ok)
    throw Error(ErrorCode::PlacementInfeasible,
                "no tilt draw leaves the ground visible in the frustum");

  const CameraIntrinsics& K = scene.intrinsics;
  const GroundPlane& G = scene.ground;
  const double max_depth =
      spec.max_depth > 0.0 ? spec.max_depth : K.f * spec.stature_min / 60.0;

  long budget =
      static_cast<long>(spec.max_attempts_per_person) * spec.n_people;
  while (static_cast<int>(scene.persons.size()) < spec.n_people) {
    if (--budget < 0)
      throw Error(ErrorCode::PlacementInfeasible,
                  "could not place all people with the given separation");
    const Point2 pixel{rng.uniform(0.02 * K.image_w, 0.98 * K.image_w),
                       rng.uniform(0.02 * K.image_h, 0.98 * K.image_h)};
    const auto foot = try_reverse_project_to_ground(K, G, pixel);
    if (!foot) continue;
    if (foot->z() < spec.min_depth || foot->z() > max_depth) continue;
    bool separated = true;
    for (const auto& other : scene.persons) {
      if ((other.root - *foot).norm() < spec.min_separation) {
        separated = false;
        break;
      }
    }
    if (!separated) continue;

    const double stature = rng.uniform(spec.stature_min, spec.stature_max);
    const double yaw = spec.frontal ? 0.0 : rng.uniform(0.0, 2.0 * M_PI);
    const double arm_l = spec.arm_abduction_deg +
                         rng.uniform(-spec.arm_swing_deg, spec.arm_swing_deg);
    const double arm_r = spec.arm_abduction_deg +
                         rng.uniform(-spec.arm_swing_deg, spec.arm_swing_deg);
    const double leg_l = rng.uniform(-spec.leg_swing_deg, spec.leg_swing_deg);
    const double leg_r = rng.uniform(-spec.leg_swing_deg, spec.leg_swing_deg);
    const SkeletonModel model =
        SkeletonModel::build(stature, arm_l, arm_r, leg_l, leg_r);

    const Eigen::Matrix3d R = detail::ground_orientation(G.normal, yaw);
    PersonTruth person;
    person.id = static_cast<int>(scene.persons.size());
    person.stature = stature;
    person.yaw = yaw;
    person.root = *foot;

    bool visible = true;
    bool truncated = false;
    for (int i = 0; i < kJointCount; ++i) {
      const Point3 J = R * model.joints[static_cast<size_t>(i)] + *foot;
      person.joints_cam[static_cast<size_t>(i)] = J;
      const auto p = try_project(K, J);
      if (!p) {
        visible = false;
        break;
      }
      person.joints_2d[static_cast<size_t>(i)] = *p;
      if (p->x() < 0.0 || p->x() > K.image_w || p->y() < 0.0 ||
          p->y() > K.image_h)
        truncated = true;
    }
    if (!visible) continue;
    if (truncated && !spec.allow_truncated) continue;
    person.truncated = truncated;

    person.torso3 = torso_center_3d(person.joints_cam);
    person.height_above_ground = G.height_above(person.torso3);
    person.hvip3 = person.torso3 - person.height_above_ground * G.normal;
    person.torso2 = project(K, person.torso3);
    person.hvip2 = project(K, person.hvip3);
    scene.persons.push_back(person);
  }

  // Simple occlusion heuristic: a nearer person's torso box covering most of
  // a farther one's marks the farther as occluded.
  for (auto& a : scene.persons) {
    BoundingBox box_a{};
    bool first = true;
    for (Joint j : kTorsoJoints) {
      const Point2& p = a.joints_2d[static_cast<size_t>(j)];
      if (first) {
        box_a = {p.x(), p.y(), p.x(), p.y()};
        first = false;
      } else {
        box_a.min_u = std::min(box_a.min_u, p.x());
        box_a.min_v = std::min(box_a.min_v, p.y());
        box_a.max_u = std::max(box_a.max_u, p.x());
        box_a.max_v = std::max(box_a.max_v, p.y());
      }
    }
    for (const auto& b : scene.persons) {
      if (b.id == a.id || b.torso3.z() >= a.torso3.z()) continue;
      BoundingBox box_b{};
      first = true;
      for (Joint j : kTorsoJoints) {
        const Point2& p = b.joints_2d[static_cast<size_t>(j)];
        if (first) {
          box_b = {p.x(), p.y(), p.x(), p.y()};
          first = false;
        } else {
          box_b.min_u = std::min(box_b.min_u, p.x());
          box_b.min_v = std::min(box_b.min_v, p.y());
          box_b.max_u = std::max(box_b.max_u, p.x());
          box_b.max_v = std::max(box_b.max_v, p.y());
        }
      }
      const double iw = std::min(box_a.max_u, box_b.max_u) -
                        std::max(box_a.min_u, box_b.min_u);
      const double ih = std::min(box_a.max_v, box_b.max_v) -
                        std::max(box_a.min_v, box_b.min_v);
      if (iw <= 0.0 || ih <= 0.0) continue;
      if (iw * ih > 0.5 * std::max(box_a.area(), 1e-12)) {
        a.occluded = true;
        break;
      }
    }
  }
  return scene;
}

/// What the pluggable detector is assumed to manage. A person is emitted in
/// a crop only when fully inside it and within the detectable height band.
/// min_height_fraction is the proportional floor of real detectors (they
/// downscale large crops to a fixed input); 0 disables it and leaves the
/// absolute floor alone.
struct DetectorCapability {
  double min_pixel_height = 60.0;
  double max_height_fraction = 0.9;
  double min_height_fraction = 0.0;
  double keypoint_noise_sigma = 0.0;
  double miss_rate = 0.0;
  double false_positive_rate = 0.0;

  void validate() const {
    if (!(min_pixel_height >= 1.0))
      throw Error(ErrorCode::InvalidArgument, "min_pixel_height must be >= 1");
    for (double r : {miss_rate, false_positive_rate})
      if (r < 0.0 || r > 1.0)
        throw Error(ErrorCode::InvalidArgument, "rates must be in [0, 1]");
  }
};

namespace detail {

inline std::uint64_t crop_stream_key(const CropBox& crop) {
  auto bits = [](double v) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, sizeof(u));
    return u;
  };
  return mix_u64(bits(crop.u0), mix_u64(bits(crop.v0), bits(crop.size)));
}

}  // namespace detail

/// Simulated detection of one crop, in crop-local coordinates. Deterministic
/// in (scene, crop geometry, capability, seed) and independent of the order
/// crops are processed in.
inline std::vector<Skeleton2D> simulate_detection_crop(
    const SceneTruth& scene, const CropBox& crop,
    const DetectorCapability& cap, std::uint64_t seed) {
  cap.validate();
  const std::uint64_t crop_key = detail::crop_stream_key(crop);
  std::vector<Skeleton2D> detections;

  const double min_h =
      std::max(cap.min_pixel_height, cap.min_height_fraction * crop.size);
  const double max_h = cap.max_height_fraction * crop.size;

  for (const auto& person : scene.persons) {
    bool inside = true;
    for (const auto& p : person.joints_2d) {
      if (!crop.contains(p)) {
        inside = false;
        break;
      }
    }
    if (!inside) continue;
    const double height = person.bbox_2d().height();
    if (height < min_h || height > max_h) continue;

    RandomStream rng(seed, mix_u64(crop_key,
                                   static_cast<std::uint64_t>(person.id)));
    if (cap.miss_rate > 0.0 && rng.uniform01() < cap.miss_rate) continue;

    Skeleton2D det;
    det.source_crop = -1;  // assigned by the caller
    for (int i = 0; i < kJointCount; ++i) {
      const Point2 local =
          person.joints_2d[static_cast<size_t>(i)] - Point2{crop.u0, crop.v0};
      double conf = 1.0;
      Point2 noisy = local;
      if (cap.keypoint_noise_sigma > 0.0) {
        const Point2 noise{rng.normal(0.0, cap.keypoint_noise_sigma),
                           rng.normal(0.0, cap.keypoint_noise_sigma)};
        noisy += noise;
        conf = std::clamp(1.0 - noise.norm() / (3.0 * cap.keypoint_noise_sigma),
                          0.5, 1.0);
      }
      det.set(static_cast<Joint>(i), noisy, conf);
    }
    detections.push_back(det);
  }

  if (cap.false_positive_rate > 0.0) {
    RandomStream rng(seed, mix_u64(crop_key, 0x46414b45ull));
    if (rng.uniform01() < cap.false_positive_rate) {
      const double h = rng.uniform(std::max(min_h, 1.0),
                                   std::max(max_h * 0.8, min_h + 1.0));
      const SkeletonModel model = SkeletonModel::build(kCanonicalStature);
      const BoundingBox span{-body::kShoulderHalfWidth * kCanonicalStature,
                             0.0,
                             body::kShoulderHalfWidth * kCanonicalStature,
                             0.921 * kCanonicalStature};
      const double s = h / span.height();
      const double cu = rng.uniform(h, std::max(crop.size - h, h + 1.0));
      const double cv = rng.uniform(h, std::max(crop.size - h, h + 1.0));
      Skeleton2D fake;
      for (int i = 0; i < kJointCount; ++i) {
        const Point3& m = model.joints[static_cast<size_t>(i)];
        fake.set(static_cast<Joint>(i),
                 Point2{cu + s * m.x(), cv - s * (m.y() - span.max_v / 2.0)},
                 rng.uniform(0.5, 0.95));
      }
      detections.push_back(fake);
    }
  }
  return detections;
}

/// Batch form over a crop list; detections stay crop-local and carry the
/// index of their crop.
inline std::vector<std::vector<Skeleton2D>> simulate_detection(
    const SceneTruth& scene, std::span<const CropBox> crops,
    const DetectorCapability& cap, std::uint64_t seed) {
  std::vector<std::vector<Skeleton2D>> out;
  out.reserve(crops.size());
  for (size_t c = 0; c < crops.size(); ++c) {
    auto dets = simulate_detection_crop(scene, crops[c], cap, seed);
    for (auto& d : dets) d.source_crop = static_cast<int>(c);
    out.push_back(std::move(dets));
  }
  return out;
}

/// Ground-truth stand-in for the upright-space body regressor: the true
/// joints expressed in the frame basis at canonical stature, with the
/// orthographic scale taken from the frame's own pixels-per-meter so the
/// downstream placement is exact. The residual reports how far a true
/// orthographic reprojection is from the perspective one.
struct UprightRegression {
  JointArray3 joints_u3{};
  OrthoCam ortho;
  double residual_u2 = 0.0;
};

inline UprightRegression oracle_upright_regression(const SceneTruth& scene,
                                                   int person_id,
                                                   const UprightFrame& frame) {
  const auto& person = scene.persons.at(static_cast<size_t>(person_id));
  const CameraIntrinsics& K = scene.intrinsics;
  const Point3 center = person.torso3;
  const double unit = kCanonicalStature / person.stature;

  UprightRegression reg;
  for (int i = 0; i < kJointCount; ++i)
    reg.joints_u3[static_cast<size_t>(i)] =
        unit * (frame.basis.transpose() *
                (person.joints_cam[static_cast<size_t>(i)] - center));

  const double rho =
      upright_pixels_per_meter(frame, K, scene.ground, center);
  reg.ortho.sx = reg.ortho.sy = rho * person.stature / kCanonicalStature;
  const Point2 anchor = frame.apply(project(K, center));
  reg.ortho.tx = anchor.x();
  reg.ortho.ty = anchor.y();

  for (int i = 0; i < kJointCount; ++i) {
    const Point2 ortho =
        ortho_project_u2(reg.joints_u3[static_cast<size_t>(i)], reg.ortho);
    const Point2 persp =
        frame.apply(person.joints_2d[static_cast<size_t>(i)]);
    reg.residual_u2 = std::max(reg.residual_u2, (ortho - persp).norm());
  }
  return reg;
}

/// Exact upright-frame HVIP offset for a ground-truth person.
inline double oracle_hvip_offset(const SceneTruth& scene, int person_id,
                                 const UprightFrame& frame) {
  const auto& person = scene.persons.at(static_cast<size_t>(person_id));
  const Point2 torso_up = frame.apply(person.torso2);
  const Point2 hvip_up = frame.apply(person.hvip2);
  return (hvip_up.y() - torso_up.y()) / frame.resolution;
}

}  // namespace crowdloc
