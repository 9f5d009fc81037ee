/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <stdexcept>
#include <string>

namespace crowdloc {

enum class ErrorCode {
  // geometry
  NonPositiveDepth,
  RayParallelToGround,
  IntersectionBehindCamera,
  DegenerateDenominator,
  HvipAboveVanishingLine,
  // calib
  GroundNotVisibleAtPixel,
  InsufficientAxes,
  OptimizerDiverged,
  // tiling
  RowAboveVanishingLine,
  NoValidRows,
  // detect
  NoCommonKeypoints,
  // upright
  TorsoRayMissesPlane,
  DegenerateBasis,
  MissingChain,
  MissingAnkles,
  // metrics
  TooFewPairs,
  CoincidentGroundTruth,
  DegenerateConfiguration,
  NoLabeledKeypoints,
  JointSetMismatch,
  ZeroF1,
  // synth / pipeline
  PlacementInfeasible,
  CalibrationFailed,
  NoDetections,
  // generic
  InvalidArgument,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::RayParallelToGround: return "RayParallelToGround";
    case ErrorCode::IntersectionBehindCamera: return "IntersectionBehindCamera";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::HvipAboveVanishingLine: return "HvipAboveVanishingLine";
    case ErrorCode::GroundNotVisibleAtPixel: return "GroundNotVisibleAtPixel";
    case ErrorCode::InsufficientAxes: return "InsufficientAxes";
    case ErrorCode::OptimizerDiverged: return "OptimizerDiverged";
    case ErrorCode::RowAboveVanishingLine: return "RowAboveVanishingLine";
    case ErrorCode::NoValidRows: return "NoValidRows";
    case ErrorCode::NoCommonKeypoints: return "NoCommonKeypoints";
    case ErrorCode::TorsoRayMissesPlane: return "TorsoRayMissesPlane";
    case ErrorCode::DegenerateBasis: return "DegenerateBasis";
    case ErrorCode::MissingChain: return "MissingChain";
    case ErrorCode::MissingAnkles: return "MissingAnkles";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::CoincidentGroundTruth: return "CoincidentGroundTruth";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoLabeledKeypoints: return "NoLabeledKeypoints";
    case ErrorCode::JointSetMismatch: return "JointSetMismatch";
    case ErrorCode::ZeroF1: return "ZeroF1";
    case ErrorCode::PlacementInfeasible: return "PlacementInfeasible";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
    case ErrorCode::NoDetections: return "NoDetections";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

/// Exception carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace crowdloc
