/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include "crowdloc/geometry.hpp"

namespace crowdloc {

/// 13-joint body model: nose plus the 12 primary limb joints. The four torso
/// joints (shoulders, hips) define the torso center.
enum class Joint : int {
  Nose = 0,
  LeftShoulder,
  RightShoulder,
  LeftElbow,
  RightElbow,
  LeftWrist,
  RightWrist,
  LeftHip,
  RightHip,
  LeftKnee,
  RightKnee,
  LeftAnkle,
  RightAnkle,
};

inline constexpr int kJointCount = 13;

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "nose",       "left_shoulder", "right_shoulder", "left_elbow",
    "right_elbow", "left_wrist",   "right_wrist",    "left_hip",
    "right_hip",  "left_knee",     "right_knee",     "left_ankle",
    "right_ankle"};

inline constexpr std::array<Joint, 4> kTorsoJoints = {
    Joint::LeftShoulder, Joint::RightShoulder, Joint::LeftHip,
    Joint::RightHip};

/// Per-keypoint OKS constants: doubled COCO sigmas, with our single head
/// joint using the nose constant.
inline constexpr std::array<double, kJointCount> kOksConstants = {
    0.052, 0.158, 0.158, 0.144, 0.144, 0.124, 0.124,
    0.214, 0.214, 0.174, 0.174, 0.178, 0.178};

inline std::optional<Joint> joint_from_name(std::string_view name) {
  for (int i = 0; i < kJointCount; ++i)
    if (kJointNames[static_cast<size_t>(i)] == name)
      return static_cast<Joint>(i);
  return std::nullopt;
}

struct Keypoint {
  Point2 pos{0.0, 0.0};
  double confidence = 0.0;
  bool present = false;
};

struct BoundingBox {
  double min_u = 0.0, min_v = 0.0, max_u = 0.0, max_v = 0.0;
  double width() const { return max_u - min_u; }
  double height() const { return max_v - min_v; }
  double area() const { return width() * height(); }
};

/// Named 2D keypoints with confidences, in either crop-local or
/// original-image coordinates depending on context.
struct Skeleton2D {
  std::array<Keypoint, kJointCount> joints{};
  int source_crop = -1;

  const Keypoint& at(Joint j) const {
    return joints[static_cast<size_t>(j)];
  }

  void set(Joint j, const Point2& pos, double confidence = 1.0) {
    joints[static_cast<size_t>(j)] = {pos, confidence, true};
  }

  bool has(Joint j) const { return at(j).present; }

  int present_count() const {
    int n = 0;
    for (const auto& k : joints) n += k.present ? 1 : 0;
    return n;
  }

  double mean_confidence() const {
    double sum = 0.0;
    int n = 0;
    for (const auto& k : joints)
      if (k.present) {
        sum += k.confidence;
        ++n;
      }
    return n > 0 ? sum / n : 0.0;
  }

  /// Tight box over present joints.
  std::optional<BoundingBox> bbox() const {
    BoundingBox b;
    bool any = false;
    for (const auto& k : joints) {
      if (!k.present) continue;
      if (!any) {
        b = {k.pos.x(), k.pos.y(), k.pos.x(), k.pos.y()};
        any = true;
      } else {
        b.min_u = std::min(b.min_u, k.pos.x());
        b.min_v = std::min(b.min_v, k.pos.y());
        b.max_u = std::max(b.max_u, k.pos.x());
        b.max_v = std::max(b.max_v, k.pos.y());
      }
    }
    if (!any) return std::nullopt;
    return b;
  }

  double pixel_height() const {
    const auto b = bbox();
    return b ? b->height() : 0.0;
  }

  /// Mean of the two shoulder and two hip keypoints; requires all four.
  std::optional<Point2> torso_center() const {
    Point2 sum{0.0, 0.0};
    for (Joint j : kTorsoJoints) {
      if (!has(j)) return std::nullopt;
      sum += at(j).pos;
    }
    return Point2{sum / 4.0};
  }
};

/// 3D joints for a full skeleton (all 13 joints always present).
using JointArray3 = std::array<Point3, kJointCount>;

inline Point3 torso_center_3d(const JointArray3& joints) {
  Point3 sum = Point3::Zero();
  for (Joint j : kTorsoJoints) sum += joints[static_cast<size_t>(j)];
  return sum / 4.0;
}

}  // namespace crowdloc
