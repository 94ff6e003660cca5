/******************************************************************************
 * Copyright 2026 The segopt Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#pragma once

// Trajectory alignment and absolute trajectory error.

#include <cmath>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/io.hpp"

namespace segopt {

enum class AlignMode { Se3, Sim3 };

struct AlignmentResult {
  SimPose transform;  // maps estimate positions onto ground truth; scale 1 in Se3 mode
  double rmse = 0.0;
  std::vector<double> errors;  // per associated frame, m
  std::vector<std::pair<int, int>> matches;  // (estimate index, ground-truth index)
};

/// Nearest-timestamp association within `tolerance` seconds.
inline std::vector<std::pair<int, int>> associate(const std::vector<double>& est,
                                                  const std::vector<double>& gt,
                                                  double tolerance = 0.02) {
  std::vector<std::pair<int, int>> out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    while (j + 1 < gt.size() && std::abs(gt[j + 1] - est[i]) <= std::abs(gt[j] - est[i])) ++j;
    if (j < gt.size() && std::abs(gt[j] - est[i]) <= tolerance) {
      out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

/// Closed-form least-squares alignment of positions.
inline AlignmentResult align_positions(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                                       AlignMode mode) {
  if (est.size() != gt.size()) throw AlignmentError("position count mismatch");
  const int n = static_cast<int>(est.size());
  if (n < 3) throw AlignmentError("need at least 3 associated positions, got " + std::to_string(n));
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (int i = 0; i < n; ++i) {
    src.col(i) = est[i];
    dst.col(i) = gt[i];
  }
  const Eigen::Matrix3Xd centered = src.colwise() - src.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  const Vec3 sv = svd.singularValues();
  if (!(sv[1] > 1e-9 * std::max(sv[0], 1e-300))) {
    throw AlignmentError("degenerate alignment: positions are collinear");
  }
  const Mat4 t = Eigen::umeyama(src, dst, mode == AlignMode::Sim3);
  const Mat3 sr = t.topLeftCorner<3, 3>();
  const double s = mode == AlignMode::Sim3 ? std::cbrt(sr.determinant()) : 1.0;
  AlignmentResult out;
  out.transform = SimPose(Rotation::from_matrix(sr / s), t.topRightCorner<3, 1>(), s);
  double sum = 0.0;
  out.errors.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double e = (out.transform * est[i] - gt[i]).norm();
    out.errors.push_back(e);
    sum += e * e;
  }
  out.rmse = std::sqrt(sum / n);
  return out;
}

inline AlignmentResult umeyama_align(const Trajectory& est, const Trajectory& gt, AlignMode mode,
                                     double tolerance = 0.02) {
  const auto matches = associate(est.timestamps, gt.timestamps, tolerance);
  std::vector<Vec3> a, b;
  for (const auto& [i, j] : matches) {
    a.push_back(est.poses[i].translation());
    b.push_back(gt.poses[j].translation());
  }
  if (a.size() < 3) {
    throw AlignmentError("only " + std::to_string(a.size()) + " timestamp associations (need 3)");
  }
  AlignmentResult out = align_positions(a, b, mode);
  out.matches = matches;
  return out;
}

/// ATE RMSE between index-aligned pose lists.
inline double ate_rmse(const std::vector<Pose>& est, const std::vector<Pose>& gt, AlignMode mode = AlignMode::Se3) {
  std::vector<Vec3> a, b;
  for (std::size_t i = 0; i < est.size(); ++i) {
    a.push_back(est[i].translation());
    b.push_back(gt[i].translation());
  }
  return align_positions(a, b, mode).rmse;
}

}  // namespace segopt
