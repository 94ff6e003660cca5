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

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"

namespace segopt {

struct Frame {
  int id = 0;
  double timestamp = 0.0;  // seconds
  Pose pose;               // camera-to-world
  bool is_fixed = false;
};

struct Landmark {
  int id = 0;
  Vec3 position = Vec3::Zero();
};

enum class EdgeKind { Odometry, LoopClosure, Synthesized };

inline const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Odometry: return "odometry";
    case EdgeKind::LoopClosure: return "loop-closure";
    case EdgeKind::Synthesized: return "synthesized";
  }
  return "?";
}

struct PoseEdge {
  int from = 0;
  int to = 0;
  Pose measurement;  // expected relative pose T_from^-1 * T_to
  Mat6 information = Mat6::Identity();
  EdgeKind kind = EdgeKind::Odometry;
};

struct Observation {
  int frame = 0;
  int landmark = 0;
  Vec2 pixel = Vec2::Zero();
  Mat2 information = Mat2::Identity();
};

/// Shared pinhole camera without distortion.
struct Camera {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
};

struct PoseGraph {
  std::vector<Frame> frames;
  std::vector<PoseEdge> edges;
};

/// Bundle-adjustment input. Landmark ids equal their index, frame ids too.
/// `edges` carries the odometry/loop constraints used for velocity
/// statistics, synthesized bridges, and the weak relative-pose terms of the
/// BA objective.
struct BaProblem {
  std::vector<Frame> frames;
  std::vector<Landmark> landmarks;
  std::vector<Observation> observations;
  Camera camera;
  std::vector<PoseEdge> edges;

  PoseGraph pose_graph() const { return PoseGraph{frames, edges}; }

  static BaProblem from_pose_graph(const PoseGraph& g) {
    BaProblem p;
    p.frames = g.frames;
    p.edges = g.edges;
    return p;
  }
};

inline std::vector<Pose> poses_of(const std::vector<Frame>& frames) {
  std::vector<Pose> out;
  out.reserve(frames.size());
  for (const Frame& f : frames) out.push_back(f.pose);
  return out;
}

inline std::vector<Vec3> positions_of(const std::vector<Landmark>& lms) {
  std::vector<Vec3> out;
  out.reserve(lms.size());
  for (const Landmark& l : lms) out.push_back(l.position);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

inline bool is_spd(const Eigen::MatrixXd& m, double sym_tol = 1e-9) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() >
      sym_tol * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

namespace detail {

inline void validate_frames(const std::vector<Frame>& frames) {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].id != static_cast<int>(i)) {
      throw InvalidArgument("frame ids must be dense 0..N-1 in order; got id " +
                            std::to_string(frames[i].id) + " at position " +
                            std::to_string(i));
    }
    if (i > 0 && !(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw InvalidArgument("timestamps must be strictly increasing at frame " +
                            std::to_string(i));
    }
  }
}

inline void validate_edges(const std::vector<PoseEdge>& edges, std::size_t n) {
  for (const PoseEdge& e : edges) {
    if (e.from < 0 || e.to < 0 || e.from >= static_cast<int>(n) ||
        e.to >= static_cast<int>(n)) {
      throw InvalidArgument("edge references unknown frame");
    }
    if (e.from == e.to) throw InvalidArgument("edge with from == to");
    if (!is_spd(e.information)) {
      throw InvalidArgument("edge information not symmetric positive-definite (" +
                            std::to_string(e.from) + "->" + std::to_string(e.to) + ")");
    }
  }
}

}  // namespace detail

/// Checks ids, timestamps, information matrices, and the single gauge anchor.
inline void validate(const PoseGraph& g) {
  detail::validate_frames(g.frames);
  detail::validate_edges(g.edges, g.frames.size());
  const auto fixed = std::count_if(g.frames.begin(), g.frames.end(),
                                   [](const Frame& f) { return f.is_fixed; });
  if (!g.frames.empty() && fixed != 1) {
    throw InvalidArgument("pose graph needs exactly one fixed frame, found " +
                          std::to_string(fixed));
  }
}

inline void validate(const BaProblem& p) {
  validate(p.pose_graph());
  if (!(p.camera.fx > 0.0 && p.camera.fy > 0.0)) {
    throw InvalidArgument("camera focal lengths must be positive");
  }
  for (std::size_t i = 0; i < p.landmarks.size(); ++i) {
    if (p.landmarks[i].id != static_cast<int>(i)) {
      throw InvalidArgument("landmark ids must be dense 0..M-1");
    }
  }
  std::vector<int> count(p.landmarks.size(), 0);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(p.observations.size());
  for (const Observation& o : p.observations) {
    if (o.frame < 0 || o.frame >= static_cast<int>(p.frames.size()) ||
        o.landmark < 0 || o.landmark >= static_cast<int>(p.landmarks.size())) {
      throw InvalidArgument("observation references unknown frame or landmark");
    }
    ++count[o.landmark];
    pairs.emplace_back(o.frame, o.landmark);
  }
  std::sort(pairs.begin(), pairs.end());
  if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end()) {
    throw InvalidArgument("duplicate (frame, landmark) observation");
  }
  for (std::size_t l = 0; l < count.size(); ++l) {
    if (count[l] < 2) {
      throw InvalidArgument("landmark " + std::to_string(l) +
                            " has fewer than 2 observations");
    }
  }
}

// ---------------------------------------------------------------------------
// Residuals

/// e = log(dT^-1 * Ti^-1 * Tj).
inline Twist pose_edge_residual(const PoseEdge& edge, const Pose& ti, const Pose& tj) {
  return se3_log(edge.measurement.inverse() * relative(ti, tj));
}

struct PoseEdgeLinearization {
  Twist residual;
  Mat6 d_from;  // w.r.t. right perturbation of Ti
  Mat6 d_to;    // w.r.t. right perturbation of Tj
};

inline PoseEdgeLinearization linearize_pose_edge(const PoseEdge& edge, const Pose& ti,
                                                 const Pose& tj) {
  PoseEdgeLinearization out;
  const Pose rel = relative(ti, tj);
  out.residual = se3_log(edge.measurement.inverse() * rel);
  const Mat6 jr_inv = se3_right_jacobian_inverse(out.residual);
  out.d_to = jr_inv;
  out.d_from = -jr_inv * adjoint(rel.inverse());
  return out;
}

/// Pixel of a world point, or nullopt when it is not in front of the camera.
inline std::optional<Vec2> project(const Camera& cam, const Pose& frame_pose,
                                   const Vec3& landmark) {
  const Vec3 pc = frame_pose.inverse() * landmark;
  if (!(pc.z() > 1e-6)) return std::nullopt;
  return Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
}

struct ReprojectionLinearization {
  Vec2 residual;                        // projection - measured pixel
  Eigen::Matrix<double, 2, 6> d_pose;   // right perturbation of the frame
  Eigen::Matrix<double, 2, 3> d_point;  // world point
};

inline std::optional<ReprojectionLinearization> linearize_reprojection(
    const Camera& cam, const Pose& frame_pose, const Vec3& landmark, const Vec2& pixel) {
  const Mat3 rt = frame_pose.rotation().matrix().transpose();
  const Vec3 pc = rt * (landmark - frame_pose.translation());
  if (!(pc.z() > 1e-6)) return std::nullopt;
  const double iz = 1.0 / pc.z();
  ReprojectionLinearization out;
  out.residual = Vec2(cam.fx * pc.x() * iz + cam.cx, cam.fy * pc.y() * iz + cam.cy) - pixel;
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << cam.fx * iz, 0.0, -cam.fx * pc.x() * iz * iz,  //
      0.0, cam.fy * iz, -cam.fy * pc.y() * iz * iz;
  // pc(delta) = exp(-delta) * pc  =>  d/drho = -I, d/dphi = hat(pc)
  out.d_pose.leftCols<3>() = -dproj;
  out.d_pose.rightCols<3>() = dproj * hat(pc);
  out.d_point = dproj * rt;
  return out;
}

// ---------------------------------------------------------------------------
// Covisibility

/// Per-frame sorted landmark lists; answers covisibility queries by merge.
class CovisibilityIndex {
 public:
  CovisibilityIndex() = default;
  explicit CovisibilityIndex(const BaProblem& p) : per_frame_(p.frames.size()) {
    for (const Observation& o : p.observations) {
      if (o.frame >= 0 && o.frame < static_cast<int>(per_frame_.size())) {
        per_frame_[o.frame].push_back(o.landmark);
      }
    }
    for (auto& v : per_frame_) std::sort(v.begin(), v.end());
  }

  std::size_t frame_count() const { return per_frame_.size(); }

  const std::vector<int>& landmarks_of(int frame) const { return per_frame_.at(frame); }

  int covisibility(int a, int b) const {
    check(a);
    check(b);
    const auto& la = per_frame_[a];
    const auto& lb = per_frame_[b];
    int n = 0;
    auto i = la.begin();
    auto j = lb.begin();
    while (i != la.end() && j != lb.end()) {
      if (*i < *j) {
        ++i;
      } else if (*j < *i) {
        ++j;
      } else {
        ++n;
        ++i;
        ++j;
      }
    }
    return n;
  }

 private:
  void check(int f) const {
    if (f < 0 || f >= static_cast<int>(per_frame_.size())) {
      throw InvalidArgument("covisibility: unknown frame id " + std::to_string(f));
    }
  }

  std::vector<std::vector<int>> per_frame_;
};

/// Number of landmarks observed by both frames.
inline int covisibility(const BaProblem& p, int a, int b) {
  return CovisibilityIndex(p).covisibility(a, b);
}

// ---------------------------------------------------------------------------
// Costs

inline double total_cost_pose_graph(const PoseGraph& g) {
  double cost = 0.0;
  for (const PoseEdge& e : g.edges) {
    const Twist r = pose_edge_residual(e, g.frames[e.from].pose, g.frames[e.to].pose);
    cost += r.dot(e.information * r);
  }
  return cost;
}

struct BaCost {
  double cost = 0.0;
  std::size_t behind_camera = 0;
};

/// Reprojection part only; pose edges are not included.
inline BaCost total_cost_ba(const BaProblem& p) {
  BaCost out;
  for (const Observation& o : p.observations) {
    const auto uv = project(p.camera, p.frames[o.frame].pose, p.landmarks[o.landmark].position);
    if (!uv) {
      ++out.behind_camera;
      continue;
    }
    const Vec2 r = *uv - o.pixel;
    out.cost += r.dot(o.information * r);
  }
  return out;
}

}  // namespace segopt
