/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <string>

#include "crowdloc/error.hpp"

namespace crowdloc {

using Point2 = Eigen::Vector2d;
using Point3 = Eigen::Vector3d;

/// Denominator guard shared by all ray/plane expressions.
inline constexpr double kGeometryEps = 1e-9;

/// Pinhole camera, x right / y down / z forward, square pixels (f = fx = fy),
/// principal point defaulting to the image center.
struct CameraIntrinsics {
  double f = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double image_w = 0.0;
  double image_h = 0.0;

  static CameraIntrinsics from_focal(double f, double image_w, double image_h) {
    return {f, image_w / 2.0, image_h / 2.0, image_w, image_h};
  }

  /// f = (w/2) / tan(fov/2), horizontal field of view in degrees.
  static CameraIntrinsics from_fov_deg(double fov_deg, double image_w,
                                       double image_h) {
    const double half = fov_deg * M_PI / 360.0;
    return from_focal(image_w / 2.0 / std::tan(half), image_w, image_h);
  }

  void validate() const {
    if (!(f > 0.0))
      throw Error(ErrorCode::InvalidArgument, "focal length must be positive");
    if (cx < 0.0 || cx > image_w || cy < 0.0 || cy > image_h)
      throw Error(ErrorCode::InvalidArgument,
                  "principal point outside the image");
  }
};

/// Ground plane {P : N.P + D = 0} in camera coordinates, N unit length.
/// With y pointing down, a ground below the camera has normal.y() < 0 and
/// N.P + D is the signed height of P above the plane.
struct GroundPlane {
  Point3 normal{0.0, -1.0, 0.0};
  double offset = 0.0;

  GroundPlane() = default;
  GroundPlane(const Point3& n, double d) : normal(n), offset(d) {
    const double len = normal.norm();
    if (len < kGeometryEps)
      throw Error(ErrorCode::InvalidArgument, "ground normal has zero length");
    if (std::abs(len - 1.0) > 1e-9) normal /= len;
  }

  double height_above(const Point3& p) const {
    return normal.dot(p) + offset;
  }

  /// Orthogonal projection of p onto the plane along the normal.
  Point3 drop_to_plane(const Point3& p) const {
    return p - height_above(p) * normal;
  }
};

/// Direction of the viewing ray through pixel p (unnormalized, z = 1).
inline Point3 pixel_ray(const CameraIntrinsics& K, const Point2& p) {
  return {(p.x() - K.cx) / K.f, (p.y() - K.cy) / K.f, 1.0};
}

inline std::optional<Point2> try_project(const CameraIntrinsics& K,
                                         const Point3& P) {
  if (P.z() <= kGeometryEps) return std::nullopt;
  return Point2{K.f * P.x() / P.z() + K.cx, K.f * P.y() / P.z() + K.cy};
}

inline Point2 project(const CameraIntrinsics& K, const Point3& P) {
  const auto p = try_project(K, P);
  if (!p)
    throw Error(ErrorCode::NonPositiveDepth,
                "point at z = " + std::to_string(P.z()));
  return *p;
}

enum class RayPlaneFailure { ParallelToGround, BehindCamera };

inline std::optional<Point3> try_reverse_project_to_ground(
    const CameraIntrinsics& K, const GroundPlane& G, const Point2& p,
    RayPlaneFailure* why = nullptr) {
  const Point3 dir = pixel_ray(K, p);
  const double denom = G.normal.dot(dir);
  if (std::abs(denom) <= kGeometryEps) {
    if (why) *why = RayPlaneFailure::ParallelToGround;
    return std::nullopt;
  }
  const double t = -G.offset / denom;
  if (t <= kGeometryEps) {
    if (why) *why = RayPlaneFailure::BehindCamera;
    return std::nullopt;
  }
  return Point3{t * dir};
}

/// Intersect the pixel ray with the ground plane at positive depth.
inline Point3 reverse_project_to_ground(const CameraIntrinsics& K,
                                        const GroundPlane& G, const Point2& p) {
  RayPlaneFailure why{};
  const auto P = try_reverse_project_to_ground(K, G, p, &why);
  if (!P) {
    if (why == RayPlaneFailure::ParallelToGround)
      throw Error(ErrorCode::RayParallelToGround,
                  "pixel ray parallel to the ground plane");
    throw Error(ErrorCode::IntersectionBehindCamera,
                "pixel above the vanishing line of the ground");
  }
  return *P;
}

/// True when at least one pixel of a coarse image grid sees the ground at
/// positive depth.
inline bool ground_visible(const CameraIntrinsics& K, const GroundPlane& G,
                           int grid = 9) {
  for (int i = 0; i <= grid; ++i) {
    for (int j = 0; j <= grid; ++j) {
      const Point2 p{K.image_w * i / grid, K.image_h * j / grid};
      if (try_reverse_project_to_ground(K, G, p)) return true;
    }
  }
  return false;
}

/// Output of the progressive position transform: 3D torso center, the HVIP
/// it sits above, and the signed height between them.
struct ProgressivePosition {
  Point3 torso;
  Point3 hvip;
  double height = 0.0;
};

/// Recover the 3D torso center from its 2D projection p_t and the 2D ground
/// point p_v directly below it along the ground normal. Only the v-coordinate
/// of p_t enters the height formula.
inline ProgressivePosition progressive_position_transform(
    const CameraIntrinsics& K, const GroundPlane& G, const Point2& p_t,
    const Point2& p_v) {
  RayPlaneFailure why{};
  const auto hvip = try_reverse_project_to_ground(K, G, p_v, &why);
  if (!hvip)
    throw Error(ErrorCode::HvipAboveVanishingLine,
                "2D HVIP does not reach the ground plane");
  const double vt = p_t.y() - K.cy;
  const double denom = vt * G.normal.z() - K.f * G.normal.y();
  if (std::abs(denom) <= kGeometryEps)
    throw Error(ErrorCode::DegenerateDenominator,
                "torso pixel row makes the height formula singular");
  const double d = (K.f * hvip->y() - vt * hvip->z()) / denom;
  return {*hvip + d * G.normal, *hvip, d};
}

inline double angle_between(const Point3& a, const Point3& b) {
  const double c = a.normalized().dot(b.normalized());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace crowdloc
