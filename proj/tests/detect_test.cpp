/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace crowdloc;

namespace {

// simple vertical figure with a given bbox height, all confidences equal
Skeleton2D stick_figure(const Point2& top, double height, double conf = 1.0,
                        int crop = 0) {
  Skeleton2D s;
  const double w = height / 4.0;
  auto place = [&](Joint j, double fx, double fy) {
    s.set(j, top + Point2{fx * w, fy * height}, conf);
  };
  place(Joint::Nose, 0.0, 0.0);
  place(Joint::LeftShoulder, 0.5, 0.12);
  place(Joint::RightShoulder, -0.5, 0.12);
  place(Joint::LeftElbow, 0.7, 0.35);
  place(Joint::RightElbow, -0.7, 0.35);
  place(Joint::LeftWrist, 0.8, 0.55);
  place(Joint::RightWrist, -0.8, 0.55);
  place(Joint::LeftHip, 0.3, 0.5);
  place(Joint::RightHip, -0.3, 0.5);
  place(Joint::LeftKnee, 0.3, 0.75);
  place(Joint::RightKnee, -0.3, 0.75);
  place(Joint::LeftAnkle, 0.3, 1.0);
  place(Joint::RightAnkle, -0.3, 1.0);
  s.source_crop = crop;
  return s;
}

TEST(FilterTruncated, DropsOnlyLowConfidenceNearCoveredEdges) {
  const CropBox crop{0, 0, 1000, 0, 0};
  const EdgeNeighbors all{true, true, true, true};

  // confident detection touching an edge: kept
  Skeleton2D confident = stick_figure({120, 5}, 300, 0.9);
  // one weak keypoint, bbox within 2% of a covered edge: removed
  Skeleton2D weak_on_edge = stick_figure({120, 5}, 300, 0.9);
  weak_on_edge.set(Joint::LeftWrist,
                   weak_on_edge.at(Joint::LeftWrist).pos, 0.1);
  // weak keypoint but centered: kept
  Skeleton2D weak_center = stick_figure({450, 300}, 300, 0.9);
  weak_center.set(Joint::LeftWrist, weak_center.at(Joint::LeftWrist).pos, 0.1);

  const auto kept =
      filter_truncated({confident, weak_on_edge, weak_center}, crop, all);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_TRUE(kept[0].at(Joint::LeftWrist).confidence > 0.2);
  EXPECT_TRUE(kept[1].at(Joint::LeftWrist).confidence < 0.2);

  // same weak detection survives when the edge has no neighbor
  const auto no_neighbors =
      filter_truncated({weak_on_edge}, crop, EdgeNeighbors{});
  EXPECT_EQ(no_neighbors.size(), 1u);
}

TEST(ToImageCoords, ShiftsByCropOrigin) {
  const CropBox crop{100, 200, 512, 1, 2};
  const Skeleton2D local = stick_figure({50, 10}, 200);
  const Skeleton2D image = to_image_coords(local, crop);
  EXPECT_EQ(image.at(Joint::Nose).pos.x(), 150);
  EXPECT_EQ(image.at(Joint::Nose).pos.y(), 210);
}

TEST(PoseSimilarity, IdenticalSkeletonsScoreZero) {
  const Skeleton2D a = stick_figure({500, 100}, 250);
  EXPECT_EQ(pose_similarity(a, a), 0.0);
}

TEST(PoseSimilarity, FullBodyShiftScoresOne) {
  const Skeleton2D a = stick_figure({500, 100}, 250);
  const double h = a.pixel_height();
  Skeleton2D b = a;
  for (auto& k : b.joints) k.pos.x() += h;
  EXPECT_NEAR(pose_similarity(a, b), 1.0, 1e-12);
  EXPECT_EQ(pose_similarity(a, b), pose_similarity(b, a));
}

TEST(PoseSimilarity, HandComputedTwoJointCase) {
  // two joints confident in both, distances 10 and 30, both heights 100
  Skeleton2D a, b;
  // bbox height 100 via the two confident joints
  a.set(Joint::LeftShoulder, {0, 0}, 0.9);
  a.set(Joint::LeftAnkle, {0, 100}, 0.9);
  b.set(Joint::LeftShoulder, {10, 0}, 0.9);
  b.set(Joint::LeftAnkle, {30, 100}, 0.9);
  // extra joints below the confidence cut, inside the bbox
  a.set(Joint::Nose, {0, 50}, 0.2);
  b.set(Joint::Nose, {5, 50}, 0.2);
  EXPECT_NEAR(pose_similarity(a, b), 0.2, 1e-12);
}

TEST(PoseSimilarity, NoCommonConfidentKeypointsThrows) {
  Skeleton2D a, b;
  a.set(Joint::Nose, {0, 0}, 0.9);
  a.set(Joint::LeftAnkle, {0, 100}, 0.2);
  b.set(Joint::Nose, {0, 0}, 0.2);
  b.set(Joint::LeftAnkle, {0, 100}, 0.9);
  try {
    pose_similarity(a, b);
    FAIL() << "expected NoCommonKeypoints";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoCommonKeypoints);
  }
}

TEST(Deduplicate, MergesJitteredCopiesAcrossCrops) {
  const Skeleton2D base = stick_figure({900, 400}, 200, 1.0, 0);
  RandomStream rng(3, 0);
  Skeleton2D copy = testsupport::jittered_copy(base, rng, 1.0);
  copy.source_crop = 1;
  EXPECT_LT(pose_similarity(base, copy), 0.05);
  const auto kept = deduplicate({base, copy}, 0.25);
  EXPECT_EQ(kept.size(), 1u);
}

TEST(Deduplicate, KeepsDistinctPeopleMetersApart) {
  // people >= 5 m apart in 3D stay distinct across the FoV sweep
  for (double fov : {30.0, 60.0, 90.0, 120.0}) {
    SceneSpec spec = testsupport::standing_spec(fov, 20, 17);
    spec.min_separation = 5.0;
    spec.camera_height_min = 7.0;
    spec.max_depth = 70.0;  // deeper in-line pairs become truly ambiguous
    const SceneTruth scene = generate_scene(spec);
    std::vector<Skeleton2D> dets;
    for (const auto& p : scene.persons) dets.push_back(p.skeleton_2d());
    const auto kept = deduplicate(dets, 0.25);
    EXPECT_EQ(kept.size(), dets.size()) << "fov " << fov;
  }
}

TEST(Deduplicate, EmptyInput) {
  EXPECT_TRUE(deduplicate({}, 0.25).empty());
}

TEST(Deduplicate, Idempotent) {
  RandomStream rng(9, 0);
  std::vector<Skeleton2D> dets;
  for (int p = 0; p < 15; ++p) {
    const Skeleton2D base = stick_figure(
        {rng.uniform(100, 3800), rng.uniform(100, 1800)}, rng.uniform(80, 300));
    dets.push_back(base);
    const int copies = static_cast<int>(rng.uniform_int(3));
    for (int c = 0; c < copies; ++c)
      dets.push_back(testsupport::jittered_copy(base, rng, 1.5));
  }
  const auto once = deduplicate(dets, 0.25);
  const auto twice = deduplicate(once, 0.25);
  ASSERT_EQ(once.size(), twice.size());
  for (size_t i = 0; i < once.size(); ++i)
    EXPECT_EQ(once[i].at(Joint::Nose).pos, twice[i].at(Joint::Nose).pos);
}

TEST(Deduplicate, MatchesBruteForceGroupingOnRandomInstances) {
  for (int instance = 0; instance < 40; ++instance) {
    RandomStream rng(1000 + instance, 0);
    std::vector<Skeleton2D> dets;
    const int people = 5 + static_cast<int>(rng.uniform_int(25));
    for (int p = 0; p < people; ++p) {
      const Skeleton2D base =
          stick_figure({rng.uniform(0, 6000), rng.uniform(0, 3000)},
                       rng.uniform(70, 400), rng.uniform(0.6, 1.0),
                       static_cast<int>(rng.uniform_int(5)));
      const int copies = 1 + static_cast<int>(rng.uniform_int(3));
      for (int c = 0; c < copies; ++c) {
        Skeleton2D d = testsupport::jittered_copy(base, rng, 2.0);
        d.source_crop = static_cast<int>(rng.uniform_int(8));
        dets.push_back(d);
      }
    }
    const auto fast = deduplicate(dets, 0.25);
    EXPECT_EQ(fast.size(), testsupport::bruteforce_group_count(dets, 0.25))
        << "instance " << instance;
  }
}

TEST(Deduplicate, SurvivorHasHighestMeanConfidence) {
  const Skeleton2D base = stick_figure({500, 500}, 200, 0.6);
  RandomStream rng(4, 0);
  Skeleton2D better = testsupport::jittered_copy(base, rng, 0.5);
  for (auto& k : better.joints) k.confidence = 0.95;
  better.source_crop = 3;
  const auto kept = deduplicate({base, better}, 0.25);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].source_crop, 3);
}

TEST(Deduplicate, TiesBreakOnTorsoThenCrop) {
  const Skeleton2D a = stick_figure({500, 500}, 200, 0.8);
  Skeleton2D b = a;  // identical joints and confidence
  b.source_crop = 7;
  const auto kept = deduplicate({b, a}, 0.25);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].source_crop, 0);  // same torso, lower crop id wins
}

}  // namespace
