/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdloc/calib.hpp"
#include "crowdloc/eval.hpp"
#include "crowdloc/metrics.hpp"
#include "crowdloc/pipeline.hpp"
#include "crowdloc/synth.hpp"

namespace crowdloc {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path + ": " + e.what());
  }
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

namespace detail {

inline void check_kind(const json& j, const std::string& kind,
                       const std::string& context) {
  if (!j.is_object())
    throw Error(ErrorCode::IoError, context + ": expected a JSON object");
  if (j.value("kind", std::string{}) != kind)
    throw Error(ErrorCode::IoError,
                context + ": expected kind \"" + kind + "\"");
}

inline json point_to_json(const Point2& p) { return json::array({p.x(), p.y()}); }
inline json point_to_json(const Point3& p) {
  return json::array({p.x(), p.y(), p.z()});
}

inline Point2 point2_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}
inline Point3 point3_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline json joints3_to_json(const JointArray3& joints) {
  json j = json::object();
  for (int i = 0; i < kJointCount; ++i)
    j[std::string(kJointNames[static_cast<size_t>(i)])] =
        point_to_json(joints[static_cast<size_t>(i)]);
  return j;
}

inline JointArray3 joints3_from_json(const json& j) {
  JointArray3 joints{};
  for (int i = 0; i < kJointCount; ++i)
    joints[static_cast<size_t>(i)] = point3_from_json(
        j.at(std::string(kJointNames[static_cast<size_t>(i)])));
  return joints;
}

}  // namespace detail

// ---------------------------------------------------------------- calibration

struct CalibrationFile {
  CameraIntrinsics intrinsics;
  GroundPlane ground;
  double residual = 0.0;
  int num_axes = 0;
};

inline json calibration_to_json(const CalibrationFile& c) {
  return json{{"schema_version", kSchemaVersion},
              {"kind", "calibration"},
              {"f", c.intrinsics.f},
              {"cx", c.intrinsics.cx},
              {"cy", c.intrinsics.cy},
              {"image_w", c.intrinsics.image_w},
              {"image_h", c.intrinsics.image_h},
              {"normal", detail::point_to_json(c.ground.normal)},
              {"offset", c.ground.offset},
              {"residual", c.residual},
              {"num_axes", c.num_axes}};
}

inline CalibrationFile calibration_from_json(const json& j) {
  detail::check_kind(j, "calibration", "calibration file");
  CalibrationFile c;
  c.intrinsics = {j.at("f").get<double>(), j.at("cx").get<double>(),
                  j.at("cy").get<double>(), j.at("image_w").get<double>(),
                  j.at("image_h").get<double>()};
  c.ground = GroundPlane(detail::point3_from_json(j.at("normal")),
                         j.at("offset").get<double>());
  c.residual = j.value("residual", 0.0);
  c.num_axes = j.value("num_axes", 0);
  return c;
}

// ------------------------------------------------------------------ crop plan

inline json crop_plan_to_json(double image_w, double image_h,
                              const std::vector<CropBox>& boxes) {
  json arr = json::array();
  for (const auto& b : boxes)
    arr.push_back(json{{"u0", b.u0},
                       {"v0", b.v0},
                       {"size", b.size},
                       {"row", b.row_index},
                       {"col", b.col_index}});
  return json{{"schema_version", kSchemaVersion},
              {"kind", "crop_plan"},
              {"image_w", image_w},
              {"image_h", image_h},
              {"boxes", arr}};
}

inline std::vector<CropBox> crop_plan_from_json(const json& j,
                                                double* image_w = nullptr,
                                                double* image_h = nullptr) {
  detail::check_kind(j, "crop_plan", "crop plan file");
  if (image_w) *image_w = j.at("image_w").get<double>();
  if (image_h) *image_h = j.at("image_h").get<double>();
  std::vector<CropBox> boxes;
  for (const auto& b : j.at("boxes"))
    boxes.push_back({b.at("u0").get<double>(), b.at("v0").get<double>(),
                     b.at("size").get<double>(), b.at("row").get<int>(),
                     b.at("col").get<int>()});
  return boxes;
}

inline std::string crop_plan_to_csv(const std::vector<CropBox>& boxes) {
  std::ostringstream out;
  out << "u0,v0,size,row,col\n";
  out.precision(17);
  for (const auto& b : boxes)
    out << b.u0 << ',' << b.v0 << ',' << b.size << ',' << b.row_index << ','
        << b.col_index << '\n';
  return out.str();
}

// ----------------------------------------------------------------- detections

inline json detections_to_json(const std::vector<Skeleton2D>& detections,
                               double image_w, double image_h) {
  json persons = json::array();
  for (size_t i = 0; i < detections.size(); ++i) {
    const auto& det = detections[i];
    json joints = json::object();
    for (int k = 0; k < kJointCount; ++k) {
      const auto& kp = det.joints[static_cast<size_t>(k)];
      if (!kp.present) continue;
      joints[std::string(kJointNames[static_cast<size_t>(k)])] =
          json::array({kp.pos.x(), kp.pos.y(), kp.confidence});
    }
    persons.push_back(json{{"id", static_cast<int>(i)},
                           {"joints", joints},
                           {"source_crop", det.source_crop}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"kind", "detections"},
              {"image_w", image_w},
              {"image_h", image_h},
              {"persons", persons}};
}

inline std::vector<Skeleton2D> detections_from_json(const json& j,
                                                    double* image_w = nullptr,
                                                    double* image_h = nullptr) {
  detail::check_kind(j, "detections", "detections file");
  if (image_w) *image_w = j.value("image_w", 0.0);
  if (image_h) *image_h = j.value("image_h", 0.0);
  std::vector<Skeleton2D> detections;
  for (const auto& p : j.at("persons")) {
    Skeleton2D det;
    det.source_crop = p.value("source_crop", -1);
    for (const auto& [name, value] : p.at("joints").items()) {
      const auto joint = joint_from_name(name);
      if (!joint)
        throw Error(ErrorCode::IoError, "unknown joint name: " + name);
      det.set(*joint, {value.at(0).get<double>(), value.at(1).get<double>()},
              value.at(2).get<double>());
    }
    detections.push_back(det);
  }
  return detections;
}

// ---------------------------------------------------------------------- scene

inline json scene_to_json(const SceneTruth& scene) {
  const SceneSpec& s = scene.spec;
  json persons = json::array();
  for (const auto& p : scene.persons) {
    json joints_2d = json::object();
    for (int i = 0; i < kJointCount; ++i)
      joints_2d[std::string(kJointNames[static_cast<size_t>(i)])] =
          detail::point_to_json(p.joints_2d[static_cast<size_t>(i)]);
    persons.push_back(json{{"id", p.id},
                           {"stature", p.stature},
                           {"yaw", p.yaw},
                           {"root", detail::point_to_json(p.root)},
                           {"joints_cam", detail::joints3_to_json(p.joints_cam)},
                           {"joints_2d", joints_2d},
                           {"torso_3d", detail::point_to_json(p.torso3)},
                           {"hvip_3d", detail::point_to_json(p.hvip3)},
                           {"torso_2d", detail::point_to_json(p.torso2)},
                           {"hvip_2d", detail::point_to_json(p.hvip2)},
                           {"height_above_ground", p.height_above_ground},
                           {"occluded", p.occluded},
                           {"truncated", p.truncated}});
  }
  return json{
      {"schema_version", kSchemaVersion},
      {"kind", "scene"},
      {"seed", scene.seed},
      {"intrinsics",
       {{"f", scene.intrinsics.f},
        {"cx", scene.intrinsics.cx},
        {"cy", scene.intrinsics.cy},
        {"image_w", scene.intrinsics.image_w},
        {"image_h", scene.intrinsics.image_h}}},
      {"ground",
       {{"normal", detail::point_to_json(scene.ground.normal)},
        {"offset", scene.ground.offset}}},
      {"spec",
       {{"fov_deg", s.fov_deg},
        {"image_w", s.image_w},
        {"image_h", s.image_h},
        {"n_people", s.n_people},
        {"tilt_min_deg", s.tilt_min_deg},
        {"tilt_max_deg", s.tilt_max_deg},
        {"stature_min", s.stature_min},
        {"stature_max", s.stature_max},
        {"min_separation", s.min_separation},
        {"camera_height_min", s.camera_height_min},
        {"camera_height_max", s.camera_height_max},
        {"min_depth", s.min_depth},
        {"max_depth", s.max_depth},
        {"arm_abduction_deg", s.arm_abduction_deg},
        {"arm_swing_deg", s.arm_swing_deg},
        {"leg_swing_deg", s.leg_swing_deg},
        {"frontal", s.frontal},
        {"pitch_only", s.pitch_only},
        {"allow_truncated", s.allow_truncated},
        {"max_attempts_per_person", s.max_attempts_per_person},
        {"seed", s.seed}}},
      {"persons", persons}};
}

inline SceneTruth scene_from_json(const json& j) {
  detail::check_kind(j, "scene", "scene file");
  SceneTruth scene;
  scene.seed = j.at("seed").get<std::uint64_t>();
  const json& k = j.at("intrinsics");
  scene.intrinsics = {k.at("f").get<double>(), k.at("cx").get<double>(),
                      k.at("cy").get<double>(), k.at("image_w").get<double>(),
                      k.at("image_h").get<double>()};
  scene.ground = GroundPlane(
      detail::point3_from_json(j.at("ground").at("normal")),
      j.at("ground").at("offset").get<double>());
  const json& s = j.at("spec");
  scene.spec.fov_deg = s.at("fov_deg").get<double>();
  scene.spec.image_w = s.at("image_w").get<double>();
  scene.spec.image_h = s.at("image_h").get<double>();
  scene.spec.n_people = s.at("n_people").get<int>();
  scene.spec.tilt_min_deg = s.value("tilt_min_deg", 0.0);
  scene.spec.tilt_max_deg = s.value("tilt_max_deg", 15.0);
  scene.spec.stature_min = s.value("stature_min", 1.55);
  scene.spec.stature_max = s.value("stature_max", 1.90);
  scene.spec.min_separation = s.value("min_separation", 1.0);
  scene.spec.camera_height_min = s.value("camera_height_min", 5.0);
  scene.spec.camera_height_max = s.value("camera_height_max", 10.0);
  scene.spec.min_depth = s.value("min_depth", 8.0);
  scene.spec.max_depth = s.value("max_depth", 0.0);
  scene.spec.arm_abduction_deg = s.value("arm_abduction_deg", 15.0);
  scene.spec.arm_swing_deg = s.value("arm_swing_deg", 12.0);
  scene.spec.leg_swing_deg = s.value("leg_swing_deg", 8.0);
  scene.spec.frontal = s.value("frontal", false);
  scene.spec.pitch_only = s.value("pitch_only", false);
  scene.spec.allow_truncated = s.value("allow_truncated", false);
  scene.spec.max_attempts_per_person = s.value("max_attempts_per_person", 500);
  scene.spec.seed = s.value("seed", std::uint64_t{0});

  for (const auto& p : j.at("persons")) {
    PersonTruth person;
    person.id = p.at("id").get<int>();
    person.stature = p.at("stature").get<double>();
    person.yaw = p.at("yaw").get<double>();
    person.root = detail::point3_from_json(p.at("root"));
    person.joints_cam = detail::joints3_from_json(p.at("joints_cam"));
    const json& j2d = p.at("joints_2d");
    for (int i = 0; i < kJointCount; ++i)
      person.joints_2d[static_cast<size_t>(i)] = detail::point2_from_json(
          j2d.at(std::string(kJointNames[static_cast<size_t>(i)])));
    person.torso3 = detail::point3_from_json(p.at("torso_3d"));
    person.hvip3 = detail::point3_from_json(p.at("hvip_3d"));
    person.torso2 = detail::point2_from_json(p.at("torso_2d"));
    person.hvip2 = detail::point2_from_json(p.at("hvip_2d"));
    person.height_above_ground = p.at("height_above_ground").get<double>();
    person.occluded = p.value("occluded", false);
    person.truncated = p.value("truncated", false);
    scene.persons.push_back(person);
  }
  return scene;
}

// ---------------------------------------------------------------- predictions

inline json predictions_to_json(const ReconstructAllResult& result) {
  json persons = json::array();
  for (const auto& rp : result.persons) {
    const Placement3D& p = rp.placement;
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot.push_back(p.rot_to_cam(r, c));
    persons.push_back(
        json{{"id", rp.detection_index},
             {"joints_cam", detail::joints3_to_json(p.joints_cam)},
             {"torso", detail::point_to_json(p.torso)},
             {"hvip_2d", detail::point_to_json(p.hvip_pixel)},
             {"hvip_3d", detail::point_to_json(p.hvip)},
             {"s_tocam", p.scale_to_cam},
             {"r_tocam", rot},
             {"t_tocam", detail::point_to_json(p.trans_to_cam)},
             {"shape_params", p.shape_params},
             {"stature_flagged", rp.stature_flagged}});
  }
  json skipped = json::array();
  for (const auto& s : result.skipped)
    skipped.push_back(json{{"index", s.detection_index}, {"reason", s.reason}});
  return json{{"schema_version", kSchemaVersion},
              {"kind", "predictions"},
              {"persons", persons},
              {"skipped", skipped}};
}

/// Load predictions for evaluation; a scene file is also accepted so a
/// ground-truth file can be evaluated against itself.
inline std::vector<EvalPerson> eval_predictions_from_json(const json& j) {
  if (!j.is_object())
    throw Error(ErrorCode::IoError, "predictions: expected a JSON object");
  const std::string kind = j.value("kind", std::string{});
  std::vector<EvalPerson> preds;
  if (kind == "predictions" || kind == "scene") {
    for (const auto& p : j.at("persons")) {
      EvalPerson e;
      e.id = p.at("id").get<int>();
      e.joints_cam = detail::joints3_from_json(p.at("joints_cam"));
      preds.push_back(e);
    }
    return preds;
  }
  throw Error(ErrorCode::IoError,
              "predictions: expected kind \"predictions\" or \"scene\"");
}

// ------------------------------------------------------------- metrics report

inline json metrics_report_to_json(const MetricsReport& r) {
  auto entry = [](const MetricEntry& e) {
    json j = json::object();
    j["match"] = e.match ? json(*e.match) : json(nullptr);
    j["norm"] = e.norm ? json(*e.norm) : json(nullptr);
    return j;
  };
  return json{{"schema_version", kSchemaVersion},
              {"kind", "metrics_report"},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"metrics",
               {{"ppds", entry(r.ppds)},
                {"pa_ppds", entry(r.pa_ppds)},
                {"pcod", entry(r.pcod)},
                {"oks", entry(r.oks)},
                {"t_mpjpe", entry(r.t_mpjpe)},
                {"pa_mpjpe", entry(r.pa_mpjpe)}}}};
}

inline std::string metrics_report_to_csv(const MetricsReport& r,
                                         const std::string& image_name) {
  std::ostringstream out;
  out.precision(17);
  out << "image,precision,recall,f1";
  for (const char* m :
       {"ppds", "pa_ppds", "pcod", "oks", "t_mpjpe", "pa_mpjpe"})
    out << ',' << m << "_match," << m << "_norm";
  out << '\n' << image_name << ',' << r.precision << ',' << r.recall << ','
      << r.f1;
  auto cell = [&out](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  for (const MetricEntry* e :
       {&r.ppds, &r.pa_ppds, &r.pcod, &r.oks, &r.t_mpjpe, &r.pa_mpjpe}) {
    cell(e->match);
    cell(e->norm);
  }
  out << '\n';
  return out.str();
}

}  // namespace crowdloc
