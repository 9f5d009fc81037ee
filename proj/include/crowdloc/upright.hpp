/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "crowdloc/error.hpp"
#include "crowdloc/geometry.hpp"
#include "crowdloc/skeleton.hpp"
#include "crowdloc/tiling.hpp"

namespace crowdloc {

struct UprightConfig {
  double torso_elevation = 1.15;  ///< assumed torso height for the rough fix
  double resolution = 512.0;      ///< side of the square upright image
  double height_fraction = 0.75;  ///< pose-free height / resolution
  double anchor_u_fraction = 0.5;   ///< warped torso center, u
  double anchor_v_fraction = 0.375;  ///< warped torso center, v
};

/// Exact homography from >= 4 correspondences (normalized DLT).
inline Eigen::Matrix3d solve_homography_dlt(const std::vector<Point2>& src,
                                            const std::vector<Point2>& dst) {
  if (src.size() < 4 || src.size() != dst.size())
    throw Error(ErrorCode::InvalidArgument,
                "homography needs >= 4 matched points");

  auto normalizer = [](const std::vector<Point2>& pts) {
    Point2 mean{0.0, 0.0};
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    double dist = 0.0;
    for (const auto& p : pts) dist += (p - mean).norm();
    dist /= static_cast<double>(pts.size());
    const double s = dist > 1e-12 ? std::sqrt(2.0) / dist : 1.0;
    Eigen::Matrix3d T;
    T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return T;
  };
  const Eigen::Matrix3d Ts = normalizer(src);
  const Eigen::Matrix3d Td = normalizer(dst);

  const auto n = src.size();
  Eigen::MatrixXd A(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d s = Ts * src[i].homogeneous();
    const Eigen::Vector3d d = Td * dst[i].homogeneous();
    const double x = s.x() / s.z(), y = s.y() / s.z();
    const double u = d.x() / d.z(), v = d.y() / d.z();
    A.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    A.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d H = Td.inverse() * Hn * Ts;
  if (std::abs(H(2, 2)) < 1e-15)
    throw Error(ErrorCode::DegenerateBasis, "homography has vanishing scale");
  H /= H(2, 2);
  return H;
}

inline Point2 apply_homography(const Eigen::Matrix3d& H, const Point2& p) {
  const Eigen::Vector3d q = H * p.homogeneous();
  if (std::abs(q.z()) < 1e-15)
    throw Error(ErrorCode::DegenerateBasis, "point maps to infinity");
  return q.hnormalized();
}

/// Per-person normalization: the homography chain into the upright 512x512
/// frame plus the 3D basis it was built from. In the upright frame +v points
/// toward the ground, so the person stands head-up.
struct UprightFrame {
  Eigen::Matrix3d warp = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d scale = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d trans = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d upright = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();  ///< columns x, y, z
  Point3 torso_rough{0.0, 0.0, 0.0};
  Point2 torso_pixel{0.0, 0.0};  ///< image-space torso center the frame anchors
  double resolution = 512.0;

  Point2 apply(const Point2& p) const { return apply_homography(upright, p); }
  Point2 apply_inverse(const Point2& p) const {
    return apply_homography(upright.inverse(), p);
  }

  Point3 axis_x() const { return basis.col(0); }
  Point3 axis_y() const { return basis.col(1); }
  Point3 axis_z() const { return basis.col(2); }
};

/// Trunk length plus the longer arm chain plus the longer leg chain; a scale
/// proxy that barely moves with pose.
inline double pose_free_pixel_height(const Skeleton2D& skel) {
  auto need = [&](Joint j) -> const Point2& {
    if (!skel.has(j))
      throw Error(ErrorCode::MissingChain,
                  std::string("missing joint ") +
                      std::string(kJointNames[static_cast<size_t>(j)]));
    return skel.at(j).pos;
  };
  auto chain = [&](Joint a, Joint b, Joint c) -> std::optional<double> {
    if (!skel.has(a) || !skel.has(b) || !skel.has(c)) return std::nullopt;
    return (skel.at(a).pos - skel.at(b).pos).norm() +
           (skel.at(b).pos - skel.at(c).pos).norm();
  };

  const Point2 mid_shoulder =
      (need(Joint::LeftShoulder) + need(Joint::RightShoulder)) / 2.0;
  const Point2 mid_hip = (need(Joint::LeftHip) + need(Joint::RightHip)) / 2.0;
  const double trunk = (mid_shoulder - mid_hip).norm();

  const auto left_arm =
      chain(Joint::LeftShoulder, Joint::LeftElbow, Joint::LeftWrist);
  const auto right_arm =
      chain(Joint::RightShoulder, Joint::RightElbow, Joint::RightWrist);
  if (!left_arm && !right_arm)
    throw Error(ErrorCode::MissingChain, "no complete arm chain");
  const double arm = std::max(left_arm.value_or(0.0), right_arm.value_or(0.0));

  const auto left_leg = chain(Joint::LeftHip, Joint::LeftKnee, Joint::LeftAnkle);
  const auto right_leg =
      chain(Joint::RightHip, Joint::RightKnee, Joint::RightAnkle);
  if (!left_leg && !right_leg)
    throw Error(ErrorCode::MissingChain, "no complete leg chain");
  const double leg = std::max(left_leg.value_or(0.0), right_leg.value_or(0.0));

  return trunk + arm + leg;
}

/// Build the image -> upright-2D chain for one detected person. The warp is
/// anchored at a rough 3D torso fix (ray through the torso pixel meeting the
/// ground lifted by the configured elevation), the scale pins the pose-free
/// height to 75% of the frame, and the translation pins the warped torso
/// center to the configured anchor.
inline UprightFrame build_upright_frame(const CameraIntrinsics& K,
                                        const GroundPlane& G,
                                        const Skeleton2D& skel,
                                        const UprightConfig& cfg = {}) {
  const auto torso = skel.torso_center();
  if (!torso)
    throw Error(ErrorCode::MissingChain,
                "torso center needs both shoulders and both hips");

  const GroundPlane torso_plane = translate_ground(G, cfg.torso_elevation);
  const auto rough = try_reverse_project_to_ground(K, torso_plane, *torso);
  if (!rough)
    throw Error(ErrorCode::TorsoRayMissesPlane,
                "torso ray misses the elevated ground plane");

  const Point3 cross = G.normal.cross(*rough);
  if (cross.norm() < 1e-9)
    throw Error(ErrorCode::DegenerateBasis,
                "person sits on the vertical through the camera");
  UprightFrame frame;
  frame.torso_rough = *rough;
  frame.torso_pixel = *torso;
  frame.resolution = cfg.resolution;
  const Point3 vx = cross.normalized();
  const Point3 vz = rough->normalized();
  const Point3 vy = vz.cross(vx);
  frame.basis.col(0) = vx;
  frame.basis.col(1) = vy;
  frame.basis.col(2) = vz;

  // +y of the basis points away from the ground, which must read as
  // upward (-v) in the upright frame.
  std::vector<Point2> src, dst;
  for (const double sx : {1.0, -1.0}) {
    for (const double sy : {1.0, -1.0}) {
      src.push_back(project(K, *rough + sx * vx + sy * vy));
      dst.push_back({sx, -sy});
    }
  }
  frame.warp = solve_homography_dlt(src, dst);

  Skeleton2D warped = skel;
  for (auto& k : warped.joints)
    if (k.present) k.pos = apply_homography(frame.warp, k.pos);
  const double height = pose_free_pixel_height(warped);
  if (height < 1e-12)
    throw Error(ErrorCode::DegenerateBasis, "degenerate warped skeleton");
  const double s = cfg.height_fraction * cfg.resolution / height;
  frame.scale = Eigen::Vector3d{s, s, 1.0}.asDiagonal();

  const Point2 scaled_torso =
      s * apply_homography(frame.warp, *torso);
  const Point2 anchor{cfg.anchor_u_fraction * cfg.resolution,
                      cfg.anchor_v_fraction * cfg.resolution};
  frame.trans = Eigen::Matrix3d::Identity();
  frame.trans(0, 2) = anchor.x() - scaled_torso.x();
  frame.trans(1, 2) = anchor.y() - scaled_torso.y();

  frame.upright = frame.trans * frame.scale * frame.warp;
  if (std::abs(frame.upright.determinant()) < 1e-12)
    throw Error(ErrorCode::DegenerateBasis, "upright homography not invertible");
  return frame;
}

/// Warp all keypoints of a skeleton into the upright frame.
inline Skeleton2D warp_to_upright(const Skeleton2D& skel,
                                  const UprightFrame& frame) {
  Skeleton2D out = skel;
  for (auto& k : out.joints)
    if (k.present) k.pos = frame.apply(k.pos);
  return out;
}

/// Map an upright-frame HVIP offset back to an original-image point:
/// p_v sits d_hvip * resolution below the warped torso center.
inline Point2 compose_hvip(const Point2& torso_up, double d_hvip,
                           const UprightFrame& frame) {
  if (!(std::abs(d_hvip) < 1.0))
    throw Error(ErrorCode::InvalidArgument,
                "normalized HVIP offset must satisfy |d| < 1");
  const Point2 hvip_up{torso_up.x(),
                       torso_up.y() + frame.resolution * d_hvip};
  return frame.apply_inverse(hvip_up);
}

/// Ankle-midpoint stand-in for a learned HVIP estimator; valid for standing
/// people whose feet rest on the ground.
inline double heuristic_hvip(const Skeleton2D& skel_up,
                             double resolution = 512.0) {
  if (!skel_up.has(Joint::LeftAnkle) || !skel_up.has(Joint::RightAnkle))
    throw Error(ErrorCode::MissingAnkles, "both ankles required");
  const auto torso = skel_up.torso_center();
  if (!torso)
    throw Error(ErrorCode::MissingChain,
                "torso center needs both shoulders and both hips");
  const double ankle_v = (skel_up.at(Joint::LeftAnkle).pos.y() +
                          skel_up.at(Joint::RightAnkle).pos.y()) /
                         2.0;
  return (ankle_v - torso->y()) / resolution;
}

/// Orthographic camera of the upright 3D space: u = x*sx + tx,
/// v = -y*sy + ty (the upright 3D y-axis points up, image v runs down).
struct OrthoCam {
  double sx = 1.0;
  double sy = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

inline Point2 ortho_project_u2(const Point3& p_u3, const OrthoCam& O) {
  return {p_u3.x() * O.sx + O.tx, -p_u3.y() * O.sy + O.ty};
}

/// Final camera-space placement of one person.
struct Placement3D {
  JointArray3 joints_cam{};
  Point3 torso{0.0, 0.0, 0.0};
  Point3 hvip{0.0, 0.0, 0.0};
  Point2 hvip_pixel{0.0, 0.0};
  double scale_to_cam = 1.0;
  Eigen::Matrix3d rot_to_cam = Eigen::Matrix3d::Identity();
  Point3 trans_to_cam{0.0, 0.0, 0.0};
  std::vector<double> shape_params;
};

/// Pixels-per-meter of the upright frame at the person: the upright-space
/// length of a vertical meter stick centered on the torso.
inline double upright_pixels_per_meter(const UprightFrame& frame,
                                       const CameraIntrinsics& K,
                                       const GroundPlane& G,
                                       const Point3& torso) {
  const Point2 a = frame.apply(project(K, torso + 0.5 * G.normal));
  const Point2 b = frame.apply(project(K, torso - 0.5 * G.normal));
  return (a - b).norm();
}

/// Place an upright-3D body into camera space: the torso lands exactly on
/// the progressive-position fix, the rotation is the frame basis, and the
/// scale converts upright units to meters through the orthographic scale.
inline Placement3D upright_to_camera(const JointArray3& joints_u3,
                                     const OrthoCam& O,
                                     const UprightFrame& frame,
                                     const Point2& p_t, const Point2& p_v,
                                     const CameraIntrinsics& K,
                                     const GroundPlane& G) {
  const ProgressivePosition pos = progressive_position_transform(K, G, p_t, p_v);

  const double rho = upright_pixels_per_meter(frame, K, G, pos.torso);
  if (rho < 1e-12)
    throw Error(ErrorCode::DegenerateBasis, "degenerate upright scale");

  Placement3D out;
  out.torso = pos.torso;
  out.hvip = pos.hvip;
  out.hvip_pixel = p_v;
  out.rot_to_cam = frame.basis;
  out.scale_to_cam = O.sy / rho;
  const Point3 torso_u3 = torso_center_3d(joints_u3);
  out.trans_to_cam = pos.torso - out.rot_to_cam * (out.scale_to_cam * torso_u3);
  for (int i = 0; i < kJointCount; ++i)
    out.joints_cam[static_cast<size_t>(i)] =
        out.rot_to_cam *
            (out.scale_to_cam * joints_u3[static_cast<size_t>(i)]) +
        out.trans_to_cam;
  return out;
}

}  // namespace crowdloc
