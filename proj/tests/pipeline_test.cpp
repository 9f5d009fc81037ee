/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace crowdloc;
namespace fs = std::filesystem;

namespace {

SceneSpec pipeline_scene_spec(std::uint64_t seed) {
  SceneSpec spec = testsupport::frontal_spec(90.0, 40, seed);
  // spacing and depth keep distinct people out of the dedup ambiguity zone
  // and everyone comfortably above the detectable floor
  spec.min_separation = 5.0;
  spec.camera_height_min = 7.0;
  spec.max_depth = 70.0;
  return spec;
}

PipelineConfig tuned_pipeline_config(int threads = 2) {
  PipelineConfig cfg;
  cfg.threads = threads;
  cfg.calib.height_prior = testsupport::shoulder_height(1.7);
  return cfg;
}

TEST(IterativeCropping, ConvergesInOnePassOnNoiselessScenes) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(11));
  const PipelineConfig cfg = tuned_pipeline_config();
  const SimulatedDetector detector(scene, {}, 99);
  const CroppingResult result = run_iterative_cropping(
      scene.intrinsics.image_w, scene.intrinsics.image_h, detector, cfg);

  EXPECT_EQ(result.state.iterations, 1);
  EXPECT_TRUE(result.state.converged);
  EXPECT_LT(angle_between(result.ground.normal, scene.ground.normal),
            0.5 * M_PI / 180.0);
  EXPECT_LT(std::abs(result.intrinsics.f - scene.intrinsics.f) /
                scene.intrinsics.f,
            0.01);

  const auto scores = testsupport::score_detections(scene, result.detections);
  EXPECT_EQ(scores.f1, 1.0);
}

TEST(IterativeCropping, HandlesDetectorNoiseWithinThreeIterations) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(13));
  const PipelineConfig cfg = tuned_pipeline_config();
  DetectorCapability cap;
  cap.keypoint_noise_sigma = 2.0;
  const SimulatedDetector detector(scene, cap, 7);
  const CroppingResult result = run_iterative_cropping(
      scene.intrinsics.image_w, scene.intrinsics.image_h, detector, cfg);
  EXPECT_LE(result.state.iterations, 3);
  EXPECT_LT(angle_between(result.ground.normal, scene.ground.normal),
            2.5 * M_PI / 180.0);
}

TEST(IterativeCropping, NoDetectionsThrows) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(17));
  DetectorCapability blind;
  blind.min_pixel_height = 1e6;
  const SimulatedDetector detector(scene, blind, 1);
  try {
    run_iterative_cropping(scene.intrinsics.image_w, scene.intrinsics.image_h,
                           detector, tuned_pipeline_config());
    FAIL() << "expected NoDetections";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoDetections);
  }
}

TEST(IterativeCropping, ConvergedStateIsAFixedPoint) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(19));
  const PipelineConfig cfg = tuned_pipeline_config();
  const SimulatedDetector detector(scene, {}, 3);
  const CroppingResult result = run_iterative_cropping(
      scene.intrinsics.image_w, scene.intrinsics.image_h, detector, cfg);
  ASSERT_TRUE(result.state.converged);

  // recalibrating on the final detections moves the parameters less than the
  // convergence thresholds
  std::vector<PersonAxis> axes;
  for (const auto& det : result.detections) {
    PersonAxis a;
    a.top = (det.at(Joint::LeftShoulder).pos +
             det.at(Joint::RightShoulder).pos) /
            2.0;
    a.bot =
        (det.at(Joint::LeftAnkle).pos + det.at(Joint::RightAnkle).pos) / 2.0;
    a.weight = 1.0;
    axes.push_back(a);
  }
  CalibConfig calib_cfg = cfg.calib;
  calib_cfg.image_w = scene.intrinsics.image_w;
  calib_cfg.image_h = scene.intrinsics.image_h;
  calib_cfg.threads = cfg.threads;
  const CalibResult again = estimate_camera_ground(axes, calib_cfg);
  EXPECT_LT(angle_between(again.ground.normal, result.ground.normal),
            cfg.convergence_angle_deg * M_PI / 180.0);
  EXPECT_LT(std::abs(again.ground.offset - result.ground.offset) /
                result.ground.offset,
            cfg.convergence_rel_offset);
  EXPECT_LT(std::abs(again.intrinsics.f - result.intrinsics.f) /
                result.intrinsics.f,
            cfg.convergence_rel_focal);
}

TEST(ReconstructAll, IsolatesPerPersonFailures) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(23));
  const PipelineConfig cfg = tuned_pipeline_config();
  std::vector<Skeleton2D> detections;
  for (const auto& p : scene.persons) detections.push_back(p.skeleton_2d());
  // cripple one person's ankles; the heuristic estimator cannot place them
  detections[5].joints[static_cast<size_t>(Joint::LeftAnkle)].present = false;
  detections[5].joints[static_cast<size_t>(Joint::RightAnkle)].present = false;

  const HeuristicHvipEstimator hvip;
  const OracleBodyEstimator body(scene);
  const auto result = reconstruct_all(detections, scene.intrinsics,
                                      scene.ground, hvip, body, cfg);
  ASSERT_EQ(result.skipped.size(), 1u);
  EXPECT_EQ(result.skipped[0].detection_index, 5);
  EXPECT_EQ(result.persons.size(), detections.size() - 1);
  // output order follows input order
  int prev = -1;
  for (const auto& rp : result.persons) {
    EXPECT_GT(rp.detection_index, prev);
    prev = rp.detection_index;
  }
}

TEST(ReconstructAll, FlagsImplausibleStatures) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(29));
  const PipelineConfig cfg = tuned_pipeline_config();
  std::vector<Skeleton2D> detections = {scene.persons[0].skeleton_2d()};

  // body estimate whose orthographic scale implies a 2x too large person
  class InflatedBody : public BodyEstimator {
   public:
    explicit InflatedBody(const SceneTruth& scene) : oracle_(scene) {}
    std::optional<BodyEstimate> estimate(
        const UprightFrame& frame, const Skeleton2D& up,
        const Skeleton2D& img) const override {
      auto est = oracle_.estimate(frame, up, img);
      if (est) est->ortho.sy *= 2.0, est->ortho.sx *= 2.0;
      return est;
    }

   private:
    OracleBodyEstimator oracle_;
  };

  const OracleHvipEstimator hvip(scene);
  const InflatedBody body(scene);
  const auto result = reconstruct_all(detections, scene.intrinsics,
                                      scene.ground, hvip, body, cfg);
  ASSERT_EQ(result.persons.size(), 1u);
  EXPECT_TRUE(result.persons[0].stature_flagged);  // flagged, never dropped
}

TEST(EvaluateAgainstScene, IdentityPredictionsScorePerfect) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(31));
  std::vector<EvalPerson> preds;
  for (const auto& p : scene.persons) preds.push_back({p.id, p.joints_cam});
  const MetricsReport report = evaluate_against_scene(scene, preds);
  EXPECT_EQ(report.f1, 1.0);
  EXPECT_NEAR(*report.oks.match, 1.0, 1e-12);
  EXPECT_NEAR(*report.ppds.match, 100.0, 1e-9);
  EXPECT_NEAR(*report.pa_ppds.match, 100.0, 1e-9);
  EXPECT_NEAR(*report.pcod.match, 100.0, 1e-12);
  EXPECT_NEAR(*report.t_mpjpe.match, 0.0, 1e-12);
  // punishment identities on the report
  EXPECT_NEAR(*report.ppds.norm, *report.ppds.match * report.f1, 1e-12);
  EXPECT_NEAR(*report.t_mpjpe.norm, *report.t_mpjpe.match / report.f1, 1e-12);
}

TEST(Io, SchemasRoundTrip) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(37));
  // scene
  const json scene_json = scene_to_json(scene);
  const SceneTruth back = scene_from_json(scene_json);
  EXPECT_EQ(scene_to_json(back).dump(), scene_json.dump());

  // calibration
  const CalibrationFile calib{scene.intrinsics, scene.ground, 0.25, 40};
  const CalibrationFile calib_back =
      calibration_from_json(calibration_to_json(calib));
  EXPECT_EQ(calib_back.intrinsics.f, calib.intrinsics.f);
  EXPECT_EQ(calib_back.ground.offset, calib.ground.offset);
  EXPECT_EQ(calib_back.ground.normal, calib.ground.normal);

  // crop plan + csv
  const auto plan = plan_crops(scene.intrinsics, scene.ground, {});
  double w = 0, h = 0;
  const auto plan_back = crop_plan_from_json(
      crop_plan_to_json(scene.intrinsics.image_w, scene.intrinsics.image_h,
                        plan),
      &w, &h);
  ASSERT_EQ(plan_back.size(), plan.size());
  EXPECT_EQ(plan_back[0].size, plan[0].size);
  EXPECT_EQ(w, scene.intrinsics.image_w);
  const std::string csv = crop_plan_to_csv(plan);
  EXPECT_NE(csv.find("u0,v0,size,row,col"), std::string::npos);

  // detections
  std::vector<Skeleton2D> dets;
  for (const auto& p : scene.persons) dets.push_back(p.skeleton_2d());
  const auto dets_back = detections_from_json(
      detections_to_json(dets, scene.intrinsics.image_w,
                         scene.intrinsics.image_h));
  ASSERT_EQ(dets_back.size(), dets.size());
  EXPECT_EQ(dets_back[3].at(Joint::Nose).pos, dets[3].at(Joint::Nose).pos);

  // predictions read back for evaluation
  const OracleHvipEstimator hvip(scene);
  const OracleBodyEstimator body(scene);
  const auto recon =
      reconstruct_all(dets, scene.intrinsics, scene.ground, hvip, body,
                      tuned_pipeline_config());
  const auto preds =
      eval_predictions_from_json(predictions_to_json(recon));
  EXPECT_EQ(preds.size(), recon.persons.size());

  // a scene file also parses as predictions (identity evaluation)
  const auto self_preds = eval_predictions_from_json(scene_json);
  EXPECT_EQ(self_preds.size(), scene.persons.size());

  // metrics report json + csv shapes
  const MetricsReport report = evaluate_against_scene(scene, self_preds);
  const json report_json = metrics_report_to_json(report);
  EXPECT_EQ(report_json.at("kind"), "metrics_report");
  const std::string report_csv = metrics_report_to_csv(report, "scene0");
  EXPECT_NE(report_csv.find("ppds_match"), std::string::npos);
  EXPECT_NE(report_csv.find("scene0"), std::string::npos);
}

TEST(Determinism, PipelineOutputsAreByteIdenticalAcrossThreadCounts) {
  const SceneTruth scene = generate_scene(pipeline_scene_spec(41));
  DetectorCapability cap;
  cap.keypoint_noise_sigma = 1.5;
  std::string dumps[2];
  for (int variant = 0; variant < 2; ++variant) {
    PipelineConfig cfg = tuned_pipeline_config(variant == 0 ? 1 : 4);
    const SimulatedDetector detector(scene, cap, 12345);
    const CroppingResult crop = run_iterative_cropping(
        scene.intrinsics.image_w, scene.intrinsics.image_h, detector, cfg);
    const OracleHvipEstimator hvip(scene);
    const OracleBodyEstimator body(scene);
    const auto recon = reconstruct_all(crop.detections, crop.intrinsics,
                                       crop.ground, hvip, body, cfg);
    dumps[variant] = predictions_to_json(recon).dump();
  }
  EXPECT_EQ(dumps[0], dumps[1]);
}

// ------------------------------------------------------------- CLI binary

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "crowdloc_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd =
        std::string(CROWDLOC_CLI_PATH) + " " + args + " > " +
        (dir_ / "stdout.txt").string() + " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }

  std::string slurp(const fs::path& p) const {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
};

TEST_F(CliTest, SynthesizeEvaluatePipelineChain) {
  const fs::path scene = dir_ / "scene.json";
  ASSERT_EQ(run("synth --fov 90 --people 30 --seed 7 --min-separation 5"
                " --arm-swing 0 --leg-swing 0 --stature-min 1.7"
                " --stature-max 1.7 --frontal --max-depth 70 -o " +
                scene.string()),
            0);
  ASSERT_TRUE(fs::exists(scene));

  // identity evaluation: the scene against itself is perfect
  const fs::path report = dir_ / "report.json";
  ASSERT_EQ(run("evaluate --pred " + scene.string() + " --gt " +
                scene.string() + " -o " + report.string() + " --csv " +
                (dir_ / "report.csv").string()),
            0);
  const json rj = json::parse(slurp(report));
  EXPECT_EQ(rj.at("f1").get<double>(), 1.0);
  EXPECT_NEAR(rj.at("metrics").at("oks").at("match").get<double>(), 1.0,
              1e-12);

  // full pipeline with the simulated detector
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run("--threads 2 pipeline --scene " + scene.string() +
                " --detector sim:sigma=0 --seed 5 -o " + out.string()),
            0);
  const json manifest = json::parse(slurp(out / "manifest.json"));
  EXPECT_LE(manifest.at("iterations").get<int>(), 3);
  EXPECT_TRUE(manifest.at("converged").get<bool>());
  EXPECT_TRUE(fs::exists(out / "predictions.json"));
  EXPECT_TRUE(fs::exists(out / "calibration.json"));
  EXPECT_TRUE(fs::exists(out / "crop_plan.json"));

  // evaluate the pipeline predictions
  ASSERT_EQ(run("evaluate --pred " + (out / "predictions.json").string() +
                " --gt " + scene.string() + " -o " +
                (dir_ / "run_report.json").string()),
            0);
  const json run_report = json::parse(slurp(dir_ / "run_report.json"));
  EXPECT_GT(run_report.at("metrics").at("oks").at("match").get<double>(), 0.99);
}

TEST_F(CliTest, SeedReproducibility) {
  const fs::path a = dir_ / "a.json";
  const fs::path b = dir_ / "b.json";
  ASSERT_EQ(run("synth --fov 70 --people 12 --seed 3 -o " + a.string()), 0);
  ASSERT_EQ(run("synth --fov 70 --people 12 --seed 3 -o " + b.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(CliTest, ExitCodesAndStructuredErrors) {
  EXPECT_EQ(run("no-such-subcommand"), 1);
  EXPECT_EQ(run("evaluate --pred missing.json --gt missing.json"), 2);
  const std::string err = slurp(dir_ / "stderr.txt");
  EXPECT_NE(err.find("\"error\""), std::string::npos);

  // config file with an unknown key is rejected
  const fs::path bad = dir_ / "bad.json";
  std::ofstream(bad) << R"({"calib": {"no_such_key": 1}})";
  EXPECT_EQ(run("--config " + bad.string() + " synth --people 3 -o " +
                (dir_ / "s.json").string()),
            2);
}

TEST_F(CliTest, PlanAndGroundSubcommands) {
  const fs::path scene = dir_ / "scene.json";
  ASSERT_EQ(run("synth --fov 90 --people 25 --seed 9 --min-separation 3 -o " +
                scene.string()),
            0);
  const SceneTruth truth = scene_from_json(json::parse(slurp(scene)));

  // detections file from the ground truth
  std::vector<Skeleton2D> dets;
  for (const auto& p : truth.persons) dets.push_back(p.skeleton_2d());
  const fs::path det_path = dir_ / "detections.json";
  std::ofstream(det_path) << detections_to_json(
                                 dets, truth.intrinsics.image_w,
                                 truth.intrinsics.image_h)
                                 .dump(2);

  const fs::path calib = dir_ / "calib.json";
  ASSERT_EQ(run("estimate-ground --detections " + det_path.string() + " -o " +
                calib.string()),
            0);
  const CalibrationFile cf = calibration_from_json(json::parse(slurp(calib)));
  EXPECT_LT(angle_between(cf.ground.normal, truth.ground.normal),
            2.0 * M_PI / 180.0);

  const fs::path plan = dir_ / "plan.json";
  ASSERT_EQ(run("plan-crops --calib " + calib.string() + " -o " +
                plan.string() + " --csv " + (dir_ / "plan.csv").string()),
            0);
  EXPECT_FALSE(crop_plan_from_json(json::parse(slurp(plan))).empty());

  const fs::path deduped = dir_ / "deduped.json";
  ASSERT_EQ(run("dedup --detections " + det_path.string() + " -o " +
                deduped.string()),
            0);
  EXPECT_EQ(detections_from_json(json::parse(slurp(deduped))).size(),
            dets.size());

  const fs::path preds = dir_ / "preds.json";
  ASSERT_EQ(run("localize --detections " + det_path.string() + " --calib " +
                calib.string() + " --scene " + scene.string() +
                " --hvip heuristic --body oracle -o " + preds.string()),
            0);
  const json pj = json::parse(slurp(preds));
  EXPECT_EQ(pj.at("kind"), "predictions");
  EXPECT_GT(pj.at("persons").size(), 0u);
}

TEST_F(CliTest, SelftestPasses) { EXPECT_EQ(run("selftest --quick"), 0); }

}  // namespace
