/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "crowdloc/error.hpp"
#include "crowdloc/geometry.hpp"

namespace crowdloc {

/// Square crop in original-image pixels. Boxes may extend past the right or
/// top image edge; a slicing tool clips them at read time.
struct CropBox {
  double u0 = 0.0;
  double v0 = 0.0;
  double size = 0.0;
  int row_index = 0;
  int col_index = 0;

  bool contains(const Point2& p) const {
    return p.x() >= u0 && p.x() <= u0 + size && p.y() >= v0 &&
           p.y() <= v0 + size;
  }
};

struct TilingConfig {
  double s_ratio = 0.5;          ///< expected max person-height / crop-size
  double s_min_pixel = 60.0;     ///< minimum detectable person height, px
  double person_max_height = 2.1;  ///< tallest person considered, meters
  double horizontal_overlap = 0.5;  ///< fraction of the crop size
  int row_samples = 33;          ///< pixels probed per row by getMaxH

  void validate() const {
    if (!(s_ratio > 0.0 && s_ratio <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "s_ratio must be in (0, 1]");
    if (!(s_min_pixel >= 1.0))
      throw Error(ErrorCode::InvalidArgument, "s_min_pixel must be >= 1");
    if (!(person_max_height > 0.0))
      throw Error(ErrorCode::InvalidArgument, "person_max_height must be > 0");
    if (!(horizontal_overlap >= 0.0 && horizontal_overlap < 1.0))
      throw Error(ErrorCode::InvalidArgument,
                  "horizontal_overlap must be in [0, 1)");
  }
};

/// Plane through the points P + h*N for P on G. Shifting "up" by h shrinks
/// the offset: N.(P + hN) + (D - h) = 0.
inline GroundPlane translate_ground(const GroundPlane& G, double h) {
  GroundPlane out = G;
  out.offset = G.offset - h;
  return out;
}

/// Signed pixel length, extremized over a horizontal image row, of a vertical
/// (ground-normal) vector of 3D length `length_m` rooted on the plane at that
/// row. Positive means the vector points up in the image. `d_bot` counts
/// pixels from the image bottom edge; the row's v-coordinate is
/// image_h - d_bot.
inline double max_pixel_height_on_row(double d_bot, const CameraIntrinsics& K,
                                      const GroundPlane& G, double length_m,
                                      int samples = 33) {
  const double v = K.image_h - d_bot;
  bool any = false;
  double extremum = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double u = samples > 1 ? K.image_w * i / (samples - 1)
                                 : K.image_w / 2.0;
    const Point2 p{u, v};
    const auto foot = try_reverse_project_to_ground(K, G, p);
    if (!foot) continue;
    const auto head = try_project(K, *foot + length_m * G.normal);
    if (!head) continue;
    const double signed_len = p.y() - head->y();
    if (!any || std::abs(signed_len) > std::abs(extremum)) {
      extremum = signed_len;
      any = true;
    }
  }
  if (!any)
    throw Error(ErrorCode::RowAboveVanishingLine,
                "no pixel on the row reaches the ground plane");
  return extremum;
}

/// Ground-aware crop planning: rows are built bottom-up, each row sized from
/// the tallest possible person standing on its bottom line, and the next row
/// placed so that a maximal person whose head touches the current line is
/// still covered.
inline std::vector<CropBox> plan_crops(const CameraIntrinsics& K,
                                       const GroundPlane& G,
                                       const TilingConfig& cfg = {}) {
  cfg.validate();
  K.validate();
  const GroundPlane head_plane = translate_ground(G, cfg.person_max_height);

  std::vector<CropBox> boxes;
  double d_bot = 0.0;
  int row = 0;
  while (true) {
    double h_max = 0.0;
    try {
      h_max = max_pixel_height_on_row(d_bot, K, G, cfg.person_max_height,
                                      cfg.row_samples);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RowAboveVanishingLine) {
        if (boxes.empty())
          throw Error(ErrorCode::NoValidRows,
                      "ground plane not visible in the image");
        break;
      }
      throw;
    }
    if (h_max < cfg.s_min_pixel) break;

    const double size = h_max / cfg.s_ratio;
    const double v_bottom = K.image_h - d_bot;
    // v0 may go negative near the image top; the row is kept and the box is
    // clipped at read time.
    const double v0 = v_bottom - size;
    const double stride = size * (1.0 - cfg.horizontal_overlap);
    int col = 0;
    for (double u0 = 0.0; u0 < K.image_w; u0 += stride)
      boxes.push_back({u0, v0, size, row, col++});
    ++row;

    double advance = 0.0;
    try {
      advance = std::abs(max_pixel_height_on_row(
          d_bot, K, head_plane, -cfg.person_max_height, cfg.row_samples));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RowAboveVanishingLine) break;
      throw;
    }
    if (advance <= kGeometryEps) break;
    d_bot += advance;
    if (d_bot > K.image_h) break;
  }
  return boxes;
}

/// Bootstrap tilings when no ground estimate exists yet: one attempt per
/// size in {512, 1024, 2048, ...} up to max(w, h)/4, each covering the image
/// with 50% overlap. Rows are anchored at the image bottom so overhang is
/// only on the right/top.
inline std::vector<std::vector<CropBox>> uniform_crops(double image_w,
                                                       double image_h) {
  if (image_w < 512.0 || image_h < 512.0)
    throw Error(ErrorCode::InvalidArgument,
                "image must be at least 512 x 512");
  std::vector<std::vector<CropBox>> attempts;
  const double bound = std::max(image_w, image_h) / 4.0;
  for (double size = 512.0; size <= bound; size *= 2.0) {
    std::vector<CropBox> boxes;
    const double stride = size / 2.0;
    double v_bot = image_h;
    int row = 0;
    while (true) {
      const double v0 = v_bot - size;
      int col = 0;
      for (double u0 = 0.0; u0 < image_w; u0 += stride)
        boxes.push_back({u0, v0, size, row, col++});
      ++row;
      if (v0 <= 0.0) break;
      v_bot -= stride;
    }
    attempts.push_back(std::move(boxes));
  }
  return attempts;
}

}  // namespace crowdloc
