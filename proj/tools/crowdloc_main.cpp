/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

// Command-line surface: synthetic scenes, crop planning, ground estimation,
// dedup, localization, evaluation, the full pipeline, and a selftest.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure. Errors go to stderr as structured JSON; results go to
// files or stdout only.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "crowdloc/crowdloc.hpp"

namespace {

using crowdloc::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code_for(crowdloc::ErrorCode code) {
  using crowdloc::ErrorCode;
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InsufficientAxes:
    case ErrorCode::NoDetections:
    case ErrorCode::NoLabeledKeypoints:
    case ErrorCode::JointSetMismatch:
      return kExitData;
    default:
      return kExitNumeric;
  }
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump()
            << std::endl;
}

// ---------------------------------------------------------------------------
// Layered configuration: defaults < config file < environment < flags.
// Unknown file keys are rejected. The effective config is echoed into run
// manifests.

struct LayeredConfig {
  crowdloc::PipelineConfig pipeline;
  crowdloc::DetectorCapability capability;

  // every known (section, key) with a setter into the structs above
  using Setter = std::function<void(LayeredConfig&, const json&)>;
  static const std::map<std::string, std::map<std::string, Setter>>& registry() {
    static const std::map<std::string, std::map<std::string, Setter>> reg = {
        {"calib",
         {
             {"height_prior", [](LayeredConfig& c, const json& v) { c.pipeline.calib.height_prior = v.get<double>(); }},
             {"lambda_angle", [](LayeredConfig& c, const json& v) { c.pipeline.calib.lambda_angle = v.get<double>(); }},
             {"lambda_mod", [](LayeredConfig& c, const json& v) { c.pipeline.calib.lambda_mod = v.get<double>(); }},
             {"f_min", [](LayeredConfig& c, const json& v) { c.pipeline.calib.f_min = v.get<double>(); }},
             {"f_max", [](LayeredConfig& c, const json& v) { c.pipeline.calib.f_max = v.get<double>(); }},
             {"multistart_count", [](LayeredConfig& c, const json& v) { c.pipeline.calib.multistart_count = v.get<int>(); }},
             {"max_iterations", [](LayeredConfig& c, const json& v) { c.pipeline.calib.max_iterations = v.get<int>(); }},
             {"convergence_tol", [](LayeredConfig& c, const json& v) { c.pipeline.calib.convergence_tol = v.get<double>(); }},
             {"infeasible_penalty", [](LayeredConfig& c, const json& v) { c.pipeline.calib.infeasible_penalty = v.get<double>(); }},
             {"trim_quantile", [](LayeredConfig& c, const json& v) { c.pipeline.calib.trim_quantile = v.get<double>(); }},
             {"trim_weight", [](LayeredConfig& c, const json& v) { c.pipeline.calib.trim_weight = v.get<double>(); }},
         }},
        {"tiling",
         {
             {"s_ratio", [](LayeredConfig& c, const json& v) { c.pipeline.tiling.s_ratio = v.get<double>(); }},
             {"s_min_pixel", [](LayeredConfig& c, const json& v) { c.pipeline.tiling.s_min_pixel = v.get<double>(); }},
             {"person_max_height", [](LayeredConfig& c, const json& v) { c.pipeline.tiling.person_max_height = v.get<double>(); }},
             {"horizontal_overlap", [](LayeredConfig& c, const json& v) { c.pipeline.tiling.horizontal_overlap = v.get<double>(); }},
             {"row_samples", [](LayeredConfig& c, const json& v) { c.pipeline.tiling.row_samples = v.get<int>(); }},
         }},
        {"upright",
         {
             {"torso_elevation", [](LayeredConfig& c, const json& v) { c.pipeline.upright.torso_elevation = v.get<double>(); }},
             {"resolution", [](LayeredConfig& c, const json& v) { c.pipeline.upright.resolution = v.get<double>(); }},
             {"height_fraction", [](LayeredConfig& c, const json& v) { c.pipeline.upright.height_fraction = v.get<double>(); }},
             {"anchor_v_fraction", [](LayeredConfig& c, const json& v) { c.pipeline.upright.anchor_v_fraction = v.get<double>(); }},
         }},
        {"detect",
         {
             {"dedup_tau", [](LayeredConfig& c, const json& v) { c.pipeline.dedup_tau = v.get<double>(); }},
         }},
        {"pipeline",
         {
             {"max_iterations", [](LayeredConfig& c, const json& v) { c.pipeline.max_iterations = v.get<int>(); }},
             {"convergence_angle_deg", [](LayeredConfig& c, const json& v) { c.pipeline.convergence_angle_deg = v.get<double>(); }},
             {"convergence_rel_offset", [](LayeredConfig& c, const json& v) { c.pipeline.convergence_rel_offset = v.get<double>(); }},
             {"convergence_rel_focal", [](LayeredConfig& c, const json& v) { c.pipeline.convergence_rel_focal = v.get<double>(); }},
             {"stature_min_plausible", [](LayeredConfig& c, const json& v) { c.pipeline.stature_min_plausible = v.get<double>(); }},
             {"stature_max_plausible", [](LayeredConfig& c, const json& v) { c.pipeline.stature_max_plausible = v.get<double>(); }},
             {"threads", [](LayeredConfig& c, const json& v) { c.pipeline.threads = v.get<int>(); }},
         }},
        {"capability",
         {
             {"min_pixel_height", [](LayeredConfig& c, const json& v) { c.capability.min_pixel_height = v.get<double>(); }},
             {"max_height_fraction", [](LayeredConfig& c, const json& v) { c.capability.max_height_fraction = v.get<double>(); }},
             {"min_height_fraction", [](LayeredConfig& c, const json& v) { c.capability.min_height_fraction = v.get<double>(); }},
             {"keypoint_noise_sigma", [](LayeredConfig& c, const json& v) { c.capability.keypoint_noise_sigma = v.get<double>(); }},
             {"miss_rate", [](LayeredConfig& c, const json& v) { c.capability.miss_rate = v.get<double>(); }},
             {"false_positive_rate", [](LayeredConfig& c, const json& v) { c.capability.false_positive_rate = v.get<double>(); }},
         }},
    };
    return reg;
  }

  void apply(const std::string& section, const std::string& key, const json& value) {
    const auto& reg = registry();
    const auto sit = reg.find(section);
    if (sit == reg.end())
      throw crowdloc::Error(crowdloc::ErrorCode::InvalidArgument,
                            "unknown config section: " + section);
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end())
      throw crowdloc::Error(crowdloc::ErrorCode::InvalidArgument,
                            "unknown config key: " + section + "." + key);
    kit->second(*this, value);
  }

  void load_file(const std::string& path) {
    const json j = crowdloc::read_json_file(path);
    if (!j.is_object())
      throw crowdloc::Error(crowdloc::ErrorCode::InvalidArgument,
                            "config file must be a JSON object");
    for (const auto& [section, body] : j.items()) {
      if (!body.is_object())
        throw crowdloc::Error(crowdloc::ErrorCode::InvalidArgument,
                              "config section must be an object: " + section);
      for (const auto& [key, value] : body.items()) apply(section, key, value);
    }
  }

  void load_environment(char** envp) {
    // CROWDLOC_<SECTION>_<KEY>=<json value>
    for (char** e = envp; e && *e; ++e) {
      const std::string entry(*e);
      if (entry.rfind("CROWDLOC_", 0) != 0) continue;
      const auto eq = entry.find('=');
      if (eq == std::string::npos) continue;
      std::string name = entry.substr(9, eq - 9);
      const std::string value = entry.substr(eq + 1);
      const auto us = name.find('_');
      if (us == std::string::npos) continue;
      std::string section = name.substr(0, us);
      std::string key = name.substr(us + 1);
      for (auto& c : section) c = static_cast<char>(std::tolower(c));
      for (auto& c : key) c = static_cast<char>(std::tolower(c));
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::exception&) {
        parsed = value;  // plain string
      }
      apply(section, key, parsed);
    }
  }

  json effective() const {
    return json{
        {"calib",
         {{"height_prior", pipeline.calib.height_prior},
          {"lambda_angle", pipeline.calib.lambda_angle},
          {"lambda_mod", pipeline.calib.lambda_mod},
          {"f_min", pipeline.calib.f_min},
          {"f_max", pipeline.calib.f_max},
          {"multistart_count", pipeline.calib.multistart_count},
          {"max_iterations", pipeline.calib.max_iterations},
          {"convergence_tol", pipeline.calib.convergence_tol},
          {"infeasible_penalty", pipeline.calib.infeasible_penalty},
          {"trim_quantile", pipeline.calib.trim_quantile},
          {"trim_weight", pipeline.calib.trim_weight}}},
        {"tiling",
         {{"s_ratio", pipeline.tiling.s_ratio},
          {"s_min_pixel", pipeline.tiling.s_min_pixel},
          {"person_max_height", pipeline.tiling.person_max_height},
          {"horizontal_overlap", pipeline.tiling.horizontal_overlap},
          {"row_samples", pipeline.tiling.row_samples}}},
        {"upright",
         {{"torso_elevation", pipeline.upright.torso_elevation},
          {"resolution", pipeline.upright.resolution},
          {"height_fraction", pipeline.upright.height_fraction},
          {"anchor_v_fraction", pipeline.upright.anchor_v_fraction}}},
        {"detect", {{"dedup_tau", pipeline.dedup_tau}}},
        {"pipeline",
         {{"max_iterations", pipeline.max_iterations},
          {"convergence_angle_deg", pipeline.convergence_angle_deg},
          {"convergence_rel_offset", pipeline.convergence_rel_offset},
          {"convergence_rel_focal", pipeline.convergence_rel_focal},
          {"stature_min_plausible", pipeline.stature_min_plausible},
          {"stature_max_plausible", pipeline.stature_max_plausible},
          {"threads", pipeline.threads}}},
        {"capability",
         {{"min_pixel_height", capability.min_pixel_height},
          {"max_height_fraction", capability.max_height_fraction},
          {"min_height_fraction", capability.min_height_fraction},
          {"keypoint_noise_sigma", capability.keypoint_noise_sigma},
          {"miss_rate", capability.miss_rate},
          {"false_positive_rate", capability.false_positive_rate}}}};
  }
};

// "sim:sigma=2,miss=0.05,fp=0.01,minfrac=0.05" -> capability overrides
void parse_detector_spec(const std::string& spec,
                         crowdloc::DetectorCapability& cap) {
  if (spec.rfind("sim", 0) != 0)
    throw crowdloc::Error(crowdloc::ErrorCode::InvalidArgument,
                          "only the sim:<params> detector is built in");
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return;
  std::string rest = spec.substr(colon + 1);
  std::istringstream stream(rest);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw crowdloc::Error(crowdloc::ErrorCode::InvalidArgument,
                            "bad detector parameter: " + item);
    const std::string key = item.substr(0, eq);
    const double value = std::stod(item.substr(eq + 1));
    if (key == "sigma")
      cap.keypoint_noise_sigma = value;
    else if (key == "miss")
      cap.miss_rate = value;
    else if (key == "fp")
      cap.false_positive_rate = value;
    else if (key == "minh")
      cap.min_pixel_height = value;
    else if (key == "maxfrac")
      cap.max_height_fraction = value;
    else if (key == "minfrac")
      cap.min_height_fraction = value;
    else
      throw crowdloc::Error(crowdloc::ErrorCode::InvalidArgument,
                            "unknown detector parameter: " + key);
  }
}

std::vector<crowdloc::PersonAxis> axes_from_file_detections(
    const std::vector<crowdloc::Skeleton2D>& detections) {
  using crowdloc::Joint;
  std::vector<crowdloc::PersonAxis> axes;
  for (const auto& det : detections) {
    if (!det.has(Joint::LeftShoulder) || !det.has(Joint::RightShoulder) ||
        !det.has(Joint::LeftAnkle) || !det.has(Joint::RightAnkle))
      continue;
    crowdloc::PersonAxis axis;
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

// ----------------------------------------------------------------- selftest

bool selftest(bool quick) {
  using namespace crowdloc;
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  {  // projection round trip
    RandomStream rng(2024, 1);
    bool ok = true;
    const int n = quick ? 200 : 2000;
    for (int i = 0; i < n && ok; ++i) {
      CameraIntrinsics K = CameraIntrinsics::from_fov_deg(
          rng.uniform(30, 120), 4000, 3000);
      GroundPlane G(
          Point3{rng.uniform(-0.2, 0.2), -1.0, rng.uniform(-0.2, 0.2)},
          rng.uniform(3, 12));
      const Point2 pixel{rng.uniform(0, 4000), rng.uniform(0, 3000)};
      const auto P = try_reverse_project_to_ground(K, G, pixel);
      if (!P) continue;
      ok = (project(K, *P) - pixel).norm() < 1e-6 &&
           std::abs(G.height_above(*P)) < 1e-9 * std::abs(G.offset) + 1e-12;
    }
    check("geometry round trip", ok);
  }
  {  // progressive position transform self-consistency
    RandomStream rng(2024, 2);
    bool ok = true;
    const int n = quick ? 200 : 2000;
    for (int i = 0; i < n && ok; ++i) {
      CameraIntrinsics K = CameraIntrinsics::from_fov_deg(90, 2000, 2000);
      GroundPlane G(Point3{rng.uniform(-0.2, 0.2), -1.0, rng.uniform(-0.2, 0.2)},
                    rng.uniform(3, 10));
      const Point2 pixel{rng.uniform(200, 1800), rng.uniform(1200, 1950)};
      const auto Pv = try_reverse_project_to_ground(K, G, pixel);
      if (!Pv) continue;
      const double d = rng.uniform(0.0, 2.0);
      const Point3 Pt = *Pv + d * G.normal;
      const auto pt = try_project(K, Pt);
      if (!pt) continue;
      const auto rec = progressive_position_transform(K, G, *pt, pixel);
      ok = (rec.torso - Pt).norm() < 1e-6 && std::abs(rec.height - d) < 1e-9;
    }
    check("progressive position transform", ok);
  }
  {  // dedup equals brute force
    bool ok = true;
    for (int inst = 0; inst < (quick ? 5 : 20) && ok; ++inst) {
      RandomStream rng(77, static_cast<std::uint64_t>(inst));
      std::vector<Skeleton2D> dets;
      const int people = 10 + static_cast<int>(rng.uniform_int(20));
      for (int p = 0; p < people; ++p) {
        const Point2 base{rng.uniform(0, 4000), rng.uniform(0, 2000)};
        const double h = rng.uniform(80, 400);
        const int copies = 1 + static_cast<int>(rng.uniform_int(3));
        for (int c = 0; c < copies; ++c) {
          Skeleton2D s;
          for (int j = 0; j < kJointCount; ++j) {
            const Point2 offset{rng.uniform(-0.2, 0.2) * h,
                                (j / 4.0) * h / 3.0};
            const Point2 jitter{rng.normal(0, 1.5), rng.normal(0, 1.5)};
            s.set(static_cast<Joint>(j), base + offset + jitter,
                  rng.uniform(0.5, 1.0));
          }
          s.source_crop = c;
          dets.push_back(s);
        }
      }
      const auto fast = deduplicate(dets, 0.25);
      // brute force single linkage over all pairs
      std::vector<int> group(dets.size());
      for (size_t i = 0; i < dets.size(); ++i) group[i] = static_cast<int>(i);
      bool changed = true;
      while (changed) {
        changed = false;
        for (size_t i = 0; i < dets.size(); ++i)
          for (size_t j = i + 1; j < dets.size(); ++j) {
            double sim = 1e9;
            try {
              sim = pose_similarity(dets[i], dets[j]);
            } catch (const Error&) {
            }
            if (sim < 0.25 && group[i] != group[j]) {
              const int from = std::max(group[i], group[j]);
              const int to = std::min(group[i], group[j]);
              for (auto& g : group)
                if (g == from) g = to;
              changed = true;
            }
          }
      }
      std::set<int> roots(group.begin(), group.end());
      ok = fast.size() == roots.size();
    }
    check("dedup equals brute-force grouping", ok);
  }
  {  // upright normalization on one scene
    SceneSpec spec;
    spec.n_people = quick ? 10 : 30;
    spec.image_w = 4096;
    spec.image_h = 4096;
    spec.seed = 5;
    const SceneTruth scene = generate_scene(spec);
    bool ok = true;
    for (const auto& p : scene.persons) {
      const UprightFrame frame =
          build_upright_frame(scene.intrinsics, scene.ground, p.skeleton_2d());
      const Skeleton2D up = warp_to_upright(p.skeleton_2d(), frame);
      const Point2 anchor = frame.apply(frame.torso_pixel);
      ok = ok && std::abs(pose_free_pixel_height(up) - 384.0) < 0.5 &&
           (anchor - Point2{256.0, 192.0}).norm() < 0.5;
    }
    check("upright normalization", ok);
  }
  {  // metric identities
    MetricsReport r;
    r.f1 = 0.9;
    r.ppds.match = 80.0;
    r.t_mpjpe.match = 0.1;
    punish(r);
    check("punishment identities",
          std::abs(*r.ppds.norm - 72.0) < 1e-12 &&
              std::abs(*r.t_mpjpe.norm - 0.1 / 0.9) < 1e-12);
  }
  {  // determinism across thread counts
    SceneSpec spec;
    spec.n_people = 20;
    spec.image_w = 4096;
    spec.image_h = 4096;
    spec.seed = 9;
    spec.min_separation = 3.0;
    const SceneTruth scene = generate_scene(spec);
    DetectorCapability cap;
    cap.keypoint_noise_sigma = 2.0;
    std::string dumps[2];
    for (int t = 0; t < 2; ++t) {
      PipelineConfig cfg;
      cfg.threads = t == 0 ? 1 : 4;
      SimulatedDetector detector(scene, cap, 123);
      const auto crop = run_iterative_cropping(spec.image_w, spec.image_h,
                                               detector, cfg);
      OracleHvipEstimator hvip(scene);
      OracleBodyEstimator body(scene);
      const auto recon = reconstruct_all(crop.detections, crop.intrinsics,
                                         crop.ground, hvip, body, cfg);
      dumps[t] = predictions_to_json(recon).dump();
    }
    check("thread-count determinism", dumps[0] == dumps[1]);
  }
  return failures == 0;
}

}  // namespace

int main(int argc, char** argv, char** envp) {
  using namespace crowdloc;

  CLI::App app{"crowdloc: ground-aware 3D crowd localization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 0;
  app.add_option("--config", config_path, "layered config file (JSON)");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  SceneSpec scene_spec;
  std::string synth_out;
  synth->add_option("--fov", scene_spec.fov_deg, "horizontal FoV, degrees");
  synth->add_option("--people", scene_spec.n_people, "number of people");
  synth->add_option("--seed", scene_spec.seed, "RNG seed");
  synth->add_option("--width", scene_spec.image_w, "image width, px");
  synth->add_option("--height", scene_spec.image_h, "image height, px");
  synth->add_option("--tilt-min", scene_spec.tilt_min_deg, "min ground tilt, deg");
  synth->add_option("--tilt-max", scene_spec.tilt_max_deg, "max ground tilt, deg");
  synth->add_option("--stature-min", scene_spec.stature_min, "min stature, m");
  synth->add_option("--stature-max", scene_spec.stature_max, "max stature, m");
  synth->add_option("--min-separation", scene_spec.min_separation,
                    "min distance between people, m");
  synth->add_option("--min-depth", scene_spec.min_depth, "min person depth, m");
  synth->add_option("--max-depth", scene_spec.max_depth,
                    "max person depth, m (0 = auto)");
  synth->add_option("--arm-swing", scene_spec.arm_swing_deg, "arm jitter, deg");
  synth->add_option("--leg-swing", scene_spec.leg_swing_deg, "leg jitter, deg");
  synth->add_flag("--frontal", scene_spec.frontal,
                  "make everyone face the camera");
  synth->add_flag("--pitch-only", scene_spec.pitch_only,
                  "tilt the ground by camera pitch only");
  synth->add_flag("--allow-truncated", scene_spec.allow_truncated,
                  "keep people cut by the image edge");
  synth->add_option("-o,--output", synth_out, "scene JSON path")->required();

  // plan-crops
  auto* plan_cmd = app.add_subcommand("plan-crops", "ground-aware crop plan");
  std::string plan_calib, plan_out, plan_csv;
  plan_cmd->add_option("--calib", plan_calib, "calibration JSON")->required();
  plan_cmd->add_option("-o,--output", plan_out, "plan JSON path");
  plan_cmd->add_option("--csv", plan_csv, "plan CSV path");

  // estimate-ground
  auto* estimate = app.add_subcommand("estimate-ground",
                                      "camera + ground from detections");
  std::string est_detections, est_out, est_fixed_calib;
  estimate->add_option("--detections", est_detections, "detections JSON")
      ->required();
  estimate->add_option("--fixed-calib", est_fixed_calib,
                       "calibration JSON fixing the intrinsics");
  estimate->add_option("-o,--output", est_out, "calibration JSON path")
      ->required();

  // dedup
  auto* dedup_cmd = app.add_subcommand("dedup", "remove duplicate detections");
  std::string dedup_in, dedup_out;
  double dedup_tau_flag = kDefaultDedupTau;
  dedup_cmd->add_option("--detections", dedup_in, "detections JSON")->required();
  dedup_cmd->add_option("--tau", dedup_tau_flag, "pose-similarity threshold");
  dedup_cmd->add_option("-o,--output", dedup_out, "output JSON path")
      ->required();

  // localize
  auto* localize = app.add_subcommand(
      "localize", "reconstruct people from detections + calibration");
  std::string loc_detections, loc_calib, loc_scene, loc_out;
  std::string loc_hvip = "heuristic", loc_body = "oracle";
  localize->add_option("--detections", loc_detections, "detections JSON")
      ->required();
  localize->add_option("--calib", loc_calib, "calibration JSON")->required();
  localize->add_option("--scene", loc_scene,
                       "scene JSON (required by oracle estimators)");
  localize->add_option("--hvip", loc_hvip, "hvip estimator: heuristic|oracle");
  localize->add_option("--body", loc_body, "body estimator: oracle");
  localize->add_option("-o,--output", loc_out, "predictions JSON path")
      ->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score predictions vs truth");
  std::string eval_pred, eval_gt, eval_out, eval_csv, eval_name = "image";
  evaluate->add_option("--pred", eval_pred, "predictions (or scene) JSON")
      ->required();
  evaluate->add_option("--gt", eval_gt, "ground-truth scene JSON")->required();
  evaluate->add_option("-o,--output", eval_out, "report JSON path");
  evaluate->add_option("--csv", eval_csv, "report CSV path");
  evaluate->add_option("--name", eval_name, "image name for the CSV row");

  // pipeline
  auto* pipeline_cmd = app.add_subcommand(
      "pipeline", "iterative cropping + reconstruction end to end");
  std::string pipe_scene, pipe_out_dir, pipe_detector = "sim:sigma=0";
  std::string pipe_hvip = "oracle", pipe_body = "oracle";
  std::uint64_t pipe_seed = 0;
  pipeline_cmd->add_option("--scene", pipe_scene, "scene JSON")->required();
  pipeline_cmd->add_option("--detector", pipe_detector,
                           "detector spec, e.g. sim:sigma=2,miss=0.01");
  pipeline_cmd->add_option("--hvip", pipe_hvip, "heuristic|oracle");
  pipeline_cmd->add_option("--body", pipe_body, "oracle");
  pipeline_cmd->add_option("--seed", pipe_seed, "detector seed");
  pipeline_cmd->add_option("-o,--output", pipe_out_dir, "output directory")
      ->required();

  // selftest
  auto* selftest_cmd =
      app.add_subcommand("selftest", "run the built-in invariant suite");
  bool selftest_quick = false;
  selftest_cmd->add_flag("--quick", selftest_quick, "smaller instance counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return kExitOk;  // --help
    print_error("UsageError", e.what());
    return kExitUsage;
  }

  try {
    LayeredConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    config.load_environment(envp);
    if (threads > 0) config.pipeline.threads = threads;

    if (*synth) {
      const SceneTruth scene = generate_scene(scene_spec);
      write_json_file(synth_out, scene_to_json(scene));
      std::cout << "people: " << scene.persons.size() << "\n";
      return kExitOk;
    }

    if (*plan_cmd) {
      const CalibrationFile calib =
          calibration_from_json(read_json_file(plan_calib));
      const auto boxes =
          plan_crops(calib.intrinsics, calib.ground, config.pipeline.tiling);
      const json plan_json = crop_plan_to_json(calib.intrinsics.image_w,
                                               calib.intrinsics.image_h, boxes);
      if (!plan_out.empty())
        write_json_file(plan_out, plan_json);
      else
        std::cout << plan_json.dump(2) << "\n";
      if (!plan_csv.empty()) write_text_file(plan_csv, crop_plan_to_csv(boxes));
      return kExitOk;
    }

    if (*estimate) {
      double image_w = 0.0, image_h = 0.0;
      const auto detections = detections_from_json(
          read_json_file(est_detections), &image_w, &image_h);
      CalibConfig cfg = config.pipeline.calib;
      cfg.image_w = image_w;
      cfg.image_h = image_h;
      cfg.threads = config.pipeline.threads;
      if (!est_fixed_calib.empty())
        cfg.fixed_intrinsics =
            calibration_from_json(read_json_file(est_fixed_calib)).intrinsics;
      const auto axes = axes_from_file_detections(detections);
      const CalibResult result = estimate_camera_ground(axes, cfg);
      write_json_file(est_out,
                      calibration_to_json({result.intrinsics, result.ground,
                                           result.residual, result.num_axes}));
      return kExitOk;
    }

    if (*dedup_cmd) {
      double image_w = 0.0, image_h = 0.0;
      const auto detections =
          detections_from_json(read_json_file(dedup_in), &image_w, &image_h);
      const auto kept = deduplicate(detections, dedup_tau_flag);
      write_json_file(dedup_out, detections_to_json(kept, image_w, image_h));
      std::cout << "kept " << kept.size() << " of " << detections.size()
                << "\n";
      return kExitOk;
    }

    if (*localize || *pipeline_cmd) {
      const bool full = static_cast<bool>(*pipeline_cmd);
      const std::string scene_path = full ? pipe_scene : loc_scene;
      const std::string hvip_kind = full ? pipe_hvip : loc_hvip;
      const std::string body_kind = full ? pipe_body : loc_body;

      std::optional<SceneTruth> scene;
      if (!scene_path.empty())
        scene = scene_from_json(read_json_file(scene_path));
      if ((hvip_kind == "oracle" || body_kind == "oracle") && !scene)
        throw Error(ErrorCode::InvalidArgument,
                    "oracle estimators need --scene");

      std::unique_ptr<HvipEstimator> hvip;
      if (hvip_kind == "heuristic")
        hvip = std::make_unique<HeuristicHvipEstimator>();
      else if (hvip_kind == "oracle")
        hvip = std::make_unique<OracleHvipEstimator>(*scene);
      else
        throw Error(ErrorCode::InvalidArgument,
                    "unknown hvip estimator: " + hvip_kind);
      std::unique_ptr<BodyEstimator> body;
      if (body_kind == "oracle")
        body = std::make_unique<OracleBodyEstimator>(*scene);
      else
        throw Error(ErrorCode::InvalidArgument,
                    "unknown body estimator: " + body_kind);

      if (*localize) {
        const auto detections =
            detections_from_json(read_json_file(loc_detections));
        const CalibrationFile calib =
            calibration_from_json(read_json_file(loc_calib));
        const auto result =
            reconstruct_all(detections, calib.intrinsics, calib.ground, *hvip,
                            *body, config.pipeline);
        write_json_file(loc_out, predictions_to_json(result));
        std::cout << "reconstructed " << result.persons.size() << ", skipped "
                  << result.skipped.size() << "\n";
        return kExitOk;
      }

      // full pipeline
      parse_detector_spec(pipe_detector, config.capability);
      std::filesystem::create_directories(pipe_out_dir);
      const auto dir = std::filesystem::path(pipe_out_dir);
      const auto t0 = std::chrono::steady_clock::now();
      SimulatedDetector detector(*scene, config.capability, pipe_seed);
      const CroppingResult crop = run_iterative_cropping(
          scene->intrinsics.image_w, scene->intrinsics.image_h, detector,
          config.pipeline);
      const auto t1 = std::chrono::steady_clock::now();
      const auto recon =
          reconstruct_all(crop.detections, crop.intrinsics, crop.ground, *hvip,
                          *body, config.pipeline);
      const auto t2 = std::chrono::steady_clock::now();

      write_json_file(dir / "calibration.json",
                      calibration_to_json({crop.intrinsics, crop.ground,
                                           crop.state.history.empty()
                                               ? crop.bootstrap_residual
                                               : crop.state.history.back().residual,
                                           static_cast<int>(crop.detections.size())}));
      write_json_file(dir / "crop_plan.json",
                      crop_plan_to_json(scene->intrinsics.image_w,
                                        scene->intrinsics.image_h,
                                        crop.final_plan));
      write_json_file(dir / "detections.json",
                      detections_to_json(crop.detections,
                                         scene->intrinsics.image_w,
                                         scene->intrinsics.image_h));
      write_json_file(dir / "predictions.json", predictions_to_json(recon));

      json history = json::array();
      for (const auto& it : crop.state.history)
        history.push_back(json{{"angle_deg", it.angle_deg},
                               {"rel_offset", it.rel_offset},
                               {"rel_focal", it.rel_focal},
                               {"residual", it.residual},
                               {"num_detections", it.num_detections},
                               {"num_crops", it.num_crops}});
      const json manifest{
          {"schema_version", kSchemaVersion},
          {"kind", "run_manifest"},
          {"seed", pipe_seed},
          {"detector", pipe_detector},
          {"hvip", hvip_kind},
          {"body", body_kind},
          {"threads", config.pipeline.threads},
          {"iterations", crop.state.iterations},
          {"converged", crop.state.converged},
          {"history", history},
          {"skipped", recon.skipped.size()},
          {"reconstructed", recon.persons.size()},
          {"config", config.effective()},
          {"timings_ms",
           {{"cropping",
             std::chrono::duration<double, std::milli>(t1 - t0).count()},
            {"reconstruction",
             std::chrono::duration<double, std::milli>(t2 - t1).count()}}}};
      write_json_file(dir / "manifest.json", manifest);
      std::cout << "converged=" << (crop.state.converged ? "true" : "false")
                << " iterations=" << crop.state.iterations << " people="
                << recon.persons.size() << "\n";
      return kExitOk;
    }

    if (*evaluate) {
      const SceneTruth scene = scene_from_json(read_json_file(eval_gt));
      const auto preds =
          eval_predictions_from_json(read_json_file(eval_pred));
      const MetricsReport report = evaluate_against_scene(scene, preds);
      const json report_json = metrics_report_to_json(report);
      if (!eval_out.empty())
        write_json_file(eval_out, report_json);
      else
        std::cout << report_json.dump(2) << "\n";
      if (!eval_csv.empty())
        write_text_file(eval_csv, metrics_report_to_csv(report, eval_name));
      return kExitOk;
    }

    if (*selftest_cmd) return selftest(selftest_quick) ? kExitOk : kExitNumeric;

    print_error("UsageError", "no subcommand given");
    return kExitUsage;
  } catch (const Error& e) {
    print_error(error_code_name(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    print_error("JsonError", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return kExitNumeric;
  }
}
