/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace crowdloc;
using testsupport::axes_from_scene;
using testsupport::shoulder_height;
using testsupport::standing_spec;

namespace {

// Exact single-person fixture: a vertical axis of the prior height standing
// on the plane.
struct ExactScene {
  CameraIntrinsics K{1000, 1000, 1000, 2000, 2000};
  GroundPlane G{{0.0, -1.0, 0.0}, 6.0};
  CalibConfig cfg;

  ExactScene() {
    cfg.image_w = K.image_w;
    cfg.image_h = K.image_h;
    cfg.height_prior = 1.4;
  }

  PersonAxis exact_axis(const Point2& foot_pixel) const {
    const Point3 foot = reverse_project_to_ground(K, G, foot_pixel);
    const Point3 top = foot + cfg.height_prior * G.normal;
    return {project(K, top), foot_pixel, 1.0};
  }
};

TEST(PersonLoss, ZeroAtGeneratingConfiguration) {
  const ExactScene s;
  const PersonAxis axis = s.exact_axis({1200, 1700});
  EXPECT_NEAR(person_loss(s.K, s.G, axis, s.cfg), 0.0, 1e-9);
}

TEST(PersonLoss, PositiveUnderTiltedTrialGround) {
  const ExactScene s;
  const PersonAxis axis = s.exact_axis({1200, 1700});
  const double t = 5.0 * M_PI / 180.0;
  const GroundPlane tilted({0.0, -std::cos(t), std::sin(t)}, s.G.offset);
  EXPECT_GT(person_loss(s.K, tilted, axis, s.cfg), 1e-6);
}

TEST(PersonLoss, TenPercentLengthMismatchScoresPointOne) {
  const ExactScene s;
  const Point2 foot_pixel{1200, 1700};
  const Point3 foot = reverse_project_to_ground(s.K, s.G, foot_pixel);
  const Point2 predicted_top =
      project(s.K, foot + s.cfg.height_prior * s.G.normal);
  // observed axis: same direction, length scaled so the prediction is 10% long
  PersonAxis axis;
  axis.bot = foot_pixel;
  axis.top = foot_pixel + (predicted_top - foot_pixel) / 1.1;
  axis.weight = 1.0;
  EXPECT_NEAR(person_loss(s.K, s.G, axis, s.cfg), 0.10, 1e-9);
}

TEST(PersonLoss, InfeasibleFootScoresFixedPenalty) {
  const ExactScene s;
  PersonAxis axis;
  axis.bot = {1000, 500};  // above the vanishing line
  axis.top = {1000, 300};
  EXPECT_EQ(person_loss(s.K, s.G, axis, s.cfg), s.cfg.infeasible_penalty);
}

TEST(PersonLoss, AngularTermIsScaleFree) {
  const ExactScene s;
  CalibConfig cfg = s.cfg;
  cfg.lambda_mod = 0.0;
  const Point2 foot_pixel{1300, 1800};
  PersonAxis axis;
  axis.bot = foot_pixel;
  axis.top = foot_pixel + Point2{30, -170};
  const double base = person_loss(s.K, s.G, axis, cfg);
  // power-of-two scale: every IEEE operation scales exactly
  axis.top = foot_pixel + 8.0 * Point2{30, -170};
  EXPECT_EQ(person_loss(s.K, s.G, axis, cfg), base);
}

TEST(PersonLoss, DoublingWeightsDoublesLoss) {
  const ExactScene s;
  PersonAxis axis;
  axis.bot = {1300, 1800};
  axis.top = {1320, 1620};
  CalibConfig twice = s.cfg;
  twice.lambda_angle *= 2.0;
  twice.lambda_mod *= 2.0;
  EXPECT_NEAR(person_loss(s.K, s.G, axis, twice),
              2.0 * person_loss(s.K, s.G, axis, s.cfg), 1e-15);
}

TEST(PersonLoss, MidpointRelabelingInvariance) {
  // the midpoint entering the axis is insensitive to which shoulder/ankle
  // came first
  const Point2 a{100.25, 200.5}, b{130.75, 198.25};
  const Point2 m1 = (a + b) / 2.0;
  const Point2 m2 = (b + a) / 2.0;
  EXPECT_EQ(m1.x(), m2.x());
  EXPECT_EQ(m1.y(), m2.y());
}

TEST(EstimateCameraGround, RecoversNoiselessScenes) {
  const SceneTruth scene = generate_scene(testsupport::frontal_spec(60.0, 50, 42));
  CalibConfig cfg;
  cfg.image_w = scene.intrinsics.image_w;
  cfg.image_h = scene.intrinsics.image_h;
  cfg.height_prior = shoulder_height(1.7);
  cfg.threads = 2;
  const CalibResult result = estimate_camera_ground(axes_from_scene(scene), cfg);
  EXPECT_LT(angle_between(result.ground.normal, scene.ground.normal),
            0.5 * M_PI / 180.0);
  EXPECT_LT(std::abs(result.ground.offset - scene.ground.offset) /
                scene.ground.offset,
            0.01);
  EXPECT_LT(std::abs(result.intrinsics.f - scene.intrinsics.f) /
                scene.intrinsics.f,
            0.01);
}

TEST(EstimateCameraGround, ToleratesStatureVariationAndPixelNoise) {
  SceneSpec spec = standing_spec(60.0, 50, 77);
  spec.stature_min = 0.9 * 1.7;
  spec.stature_max = 1.1 * 1.7;
  const SceneTruth scene = generate_scene(spec);
  auto axes = axes_from_scene(scene);
  RandomStream rng(5, 0);
  for (auto& a : axes) {
    a.top += Point2{rng.normal(0, 1), rng.normal(0, 1)};
    a.bot += Point2{rng.normal(0, 1), rng.normal(0, 1)};
  }
  CalibConfig cfg;
  cfg.image_w = scene.intrinsics.image_w;
  cfg.image_h = scene.intrinsics.image_h;
  cfg.height_prior = shoulder_height(1.7);
  cfg.threads = 2;
  const CalibResult result = estimate_camera_ground(axes, cfg);
  EXPECT_LT(angle_between(result.ground.normal, scene.ground.normal),
            2.5 * M_PI / 180.0);
  EXPECT_LT(std::abs(result.ground.offset - scene.ground.offset) /
                scene.ground.offset,
            0.05);
}

TEST(EstimateCameraGround, FixedIntrinsicsRefinesGroundOnly) {
  const SceneTruth scene = generate_scene(testsupport::frontal_spec(90.0, 10, 13));
  CalibConfig cfg;
  cfg.fixed_intrinsics = scene.intrinsics;
  cfg.height_prior = shoulder_height(1.7);
  cfg.threads = 2;
  const CalibResult result = estimate_camera_ground(axes_from_scene(scene), cfg);
  EXPECT_EQ(result.intrinsics.f, scene.intrinsics.f);
  EXPECT_LT(angle_between(result.ground.normal, scene.ground.normal),
            0.2 * M_PI / 180.0);
}

TEST(EstimateCameraGround, LossIncreasesAroundTruth) {
  const SceneTruth scene = generate_scene(testsupport::frontal_spec(60.0, 30, 21));
  const auto axes = axes_from_scene(scene);
  CalibConfig cfg;
  cfg.image_w = scene.intrinsics.image_w;
  cfg.image_h = scene.intrinsics.image_h;
  cfg.height_prior = shoulder_height(1.7);

  auto mean_loss = [&](const CameraIntrinsics& K, const GroundPlane& G) {
    double sum = 0.0;
    for (const auto& a : axes) sum += person_loss(K, G, a, cfg);
    return sum / static_cast<double>(axes.size());
  };
  const double at_truth = mean_loss(scene.intrinsics, scene.ground);
  EXPECT_LT(at_truth, 1e-4);

  for (const double sign : {-1.0, 1.0}) {
    const double t = sign * 2.0 * M_PI / 180.0;
    Eigen::Matrix3d rot =
        Eigen::AngleAxisd(t, Point3{1, 0, 0}).toRotationMatrix();
    const GroundPlane tilted(rot * scene.ground.normal, scene.ground.offset);
    EXPECT_GT(mean_loss(scene.intrinsics, tilted), at_truth);

    GroundPlane shifted = scene.ground;
    shifted.offset *= 1.0 + sign * 0.05;
    EXPECT_GT(mean_loss(scene.intrinsics, shifted), at_truth);

    CameraIntrinsics zoomed = scene.intrinsics;
    zoomed.f *= 1.0 + sign * 0.05;
    EXPECT_GT(mean_loss(zoomed, scene.ground), at_truth);
  }
}

TEST(EstimateCameraGround, DoublingWeightsKeepsTheOptimum) {
  const SceneTruth scene = generate_scene(testsupport::frontal_spec(90.0, 20, 31));
  const auto axes = axes_from_scene(scene);
  CalibConfig cfg;
  cfg.image_w = scene.intrinsics.image_w;
  cfg.image_h = scene.intrinsics.image_h;
  cfg.height_prior = shoulder_height(1.7);
  cfg.threads = 2;
  const CalibResult a = estimate_camera_ground(axes, cfg);
  CalibConfig doubled = cfg;
  doubled.lambda_angle *= 2.0;
  doubled.lambda_mod *= 2.0;
  const CalibResult b = estimate_camera_ground(axes, doubled);
  EXPECT_LT(std::abs(a.intrinsics.f - b.intrinsics.f) / a.intrinsics.f, 1e-3);
  EXPECT_LT(angle_between(a.ground.normal, b.ground.normal), 1e-4);
  EXPECT_LT(std::abs(a.ground.offset - b.ground.offset) / a.ground.offset,
            1e-3);
  EXPECT_NEAR(b.residual, 2.0 * a.residual,
              1e-6 * std::max(1.0, a.residual));
}

TEST(EstimateCameraGround, RejectsTooFewOrCollinearAxes) {
  CalibConfig cfg;
  cfg.image_w = 2000;
  cfg.image_h = 2000;
  std::vector<PersonAxis> two = {{{100, 100}, {100, 300}, 1.0},
                                 {{500, 100}, {500, 300}, 1.0}};
  EXPECT_THROW(estimate_camera_ground(two, cfg), Error);

  std::vector<PersonAxis> collinear;
  for (int i = 0; i < 8; ++i) {
    const double u = 200.0 + 180.0 * i;
    collinear.push_back({{u, 1500}, {u, 1700}, 1.0});  // feet on one image row
  }
  // feet rows are identical => ankle points lie on a line
  try {
    estimate_camera_ground(collinear, cfg);
    FAIL() << "expected InsufficientAxes";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientAxes);
  }
}

TEST(EstimateCameraGround, DeterministicAcrossThreadCounts) {
  const SceneTruth scene = generate_scene(testsupport::frontal_spec(90.0, 25, 55));
  const auto axes = axes_from_scene(scene);
  CalibConfig cfg;
  cfg.image_w = scene.intrinsics.image_w;
  cfg.image_h = scene.intrinsics.image_h;
  cfg.height_prior = shoulder_height(1.7);
  cfg.threads = 1;
  const CalibResult a = estimate_camera_ground(axes, cfg);
  cfg.threads = 4;
  const CalibResult b = estimate_camera_ground(axes, cfg);
  EXPECT_EQ(a.intrinsics.f, b.intrinsics.f);
  EXPECT_EQ(a.ground.offset, b.ground.offset);
  EXPECT_EQ(a.ground.normal, b.ground.normal);
  EXPECT_EQ(a.residual, b.residual);
}

}  // namespace
