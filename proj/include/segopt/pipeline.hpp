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

// End-to-end runs: classical full optimization and the segment-based
// variants (segment, reduce, solve globally, update pruned frames).

#include <algorithm>
#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/graph_model.hpp"
#include "segopt/interpolation.hpp"
#include "segopt/metrics.hpp"
#include "segopt/reduction.hpp"
#include "segopt/segmentation.hpp"
#include "segopt/solver.hpp"

namespace segopt {

enum class Strategy { Full, Hybrid, VelocityOnly, ReprojOnly, FixedLength, Covisibility };
enum class Updater { Interpolate, Linear, LocalSolve };

struct MethodSpec {
  std::string name;
  Strategy strategy = Strategy::Hybrid;
  bool use_buffer = true;
  Updater updater = Updater::Interpolate;
};

inline const std::vector<MethodSpec>& method_registry() {
  static const std::vector<MethodSpec> methods = {
      {"full", Strategy::Full, true, Updater::Interpolate},
      {"segmented", Strategy::Hybrid, true, Updater::Interpolate},
      {"fixed-length", Strategy::FixedLength, true, Updater::Interpolate},
      {"covis", Strategy::Covisibility, true, Updater::Interpolate},
      {"reproj-only", Strategy::ReprojOnly, true, Updater::Interpolate},
      {"velocity-only", Strategy::VelocityOnly, true, Updater::Interpolate},
      {"no-buffer", Strategy::Hybrid, false, Updater::Interpolate},
      {"local-ba", Strategy::Hybrid, true, Updater::LocalSolve},
      {"linear-interp", Strategy::Hybrid, true, Updater::Linear},
  };
  return methods;
}

inline std::string method_names() {
  std::string s;
  for (const MethodSpec& m : method_registry()) s += (s.empty() ? "" : ", ") + m.name;
  return s;
}

inline const MethodSpec& find_method(const std::string& name) {
  for (const MethodSpec& m : method_registry()) {
    if (m.name == name) return m;
  }
  throw UsageError("unknown method '" + name + "'; registered: " + method_names());
}

enum class OptimizeMode { Auto, PoseGraph, Ba, Both };

inline OptimizeMode parse_optimize_mode(const std::string& s) {
  if (s == "auto") return OptimizeMode::Auto;
  if (s == "pg" || s == "pose-graph") return OptimizeMode::PoseGraph;
  if (s == "ba") return OptimizeMode::Ba;
  if (s == "both") return OptimizeMode::Both;
  throw UsageError("unknown optimize mode '" + s + "' (auto, pg, ba, both)");
}

struct PipelineConfig {
  SolverConfig solver;
  SegmentationParams segmentation;
  ReductionOptions reduction;
  OptimizeMode mode = OptimizeMode::Auto;  // auto: both when observations exist, else pg
  int fixed_segments = 0;    // 0: as many segments as the hybrid criterion finds
  int covis_split = 30;      // covisibility baseline split threshold
  AlignMode align = AlignMode::Se3;
};

struct PhaseTimes {
  double segmentation = 0.0;
  double reduction = 0.0;
  double global_solve = 0.0;
  double interpolation = 0.0;  // pruned-frame and landmark update
  double total = 0.0;
};

struct RunReport {
  std::string method;
  std::size_t frames = 0;
  std::size_t segments = 0;
  double buffer_fraction = 0.0;
  double kept_fraction = 0.0;
  PhaseTimes times;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool monotone = true;
  std::optional<double> ate_rmse;
  std::size_t synthesized_edges = 0;
  std::size_t loops_dropped = 0;
  std::size_t loops_reanchored = 0;
  std::size_t landmarks_dropped = 0;
  std::size_t gap_fallbacks = 0;
  std::size_t behind_camera = 0;
  std::size_t frozen_landmarks = 0;
  std::vector<std::string> warnings;
  std::vector<double> cost_trace;  // of the last global solve
};

struct RunResult {
  RunReport report;
  std::vector<Pose> poses;
  std::vector<Vec3> landmarks;
  SegmentationResult segmentation;
};

namespace detail {

using PipelineClock = std::chrono::steady_clock;

class Stopwatch {
 public:
  Stopwatch() : t0_(PipelineClock::now()) {}
  double seconds() const { return std::chrono::duration<double>(PipelineClock::now() - t0_).count(); }

 private:
  PipelineClock::time_point t0_;
};

// Costs and trace describe the last global solve; iterations accumulate.
inline void absorb(RunReport& r, const SolveReport& s) {
  r.initial_cost = s.initial_cost;
  r.iterations += s.iterations;
  r.final_cost = s.final_cost;
  r.monotone = r.monotone && s.monotone();
  r.behind_camera = s.behind_camera;
  r.frozen_landmarks = s.frozen_landmarks;
  r.cost_trace = s.cost_trace;
}

inline void absorb(RunReport& r, const ReductionStats& s) {
  r.synthesized_edges += s.synthesized_edges;
  r.loops_dropped += s.loops_dropped;
  r.loops_reanchored += s.loops_reanchored;
  r.landmarks_dropped += s.landmarks_dropped;
  r.warnings.insert(r.warnings.end(), s.warnings.begin(), s.warnings.end());
}

/// Moves every landmark rigidly with its first observer.
inline std::vector<Vec3> carry_landmarks(const BaProblem& p, const std::vector<Pose>& before,
                                         const std::vector<Pose>& after) {
  std::vector<int> first(p.landmarks.size(), -1);
  for (const Observation& o : p.observations) {
    if (first[o.landmark] < 0 || o.frame < first[o.landmark]) first[o.landmark] = o.frame;
  }
  std::vector<Vec3> out = positions_of(p.landmarks);
  for (std::size_t l = 0; l < out.size(); ++l) {
    if (first[l] >= 0) out[l] = after[first[l]] * (before[first[l]].inverse() * out[l]);
  }
  return out;
}

inline BaProblem with_state(const BaProblem& p, const std::vector<Pose>& poses, const std::vector<Vec3>& points) {
  BaProblem q = p;
  for (std::size_t i = 0; i < q.frames.size(); ++i) q.frames[i].pose = poses[i];
  for (std::size_t l = 0; l < q.landmarks.size(); ++l) q.landmarks[l].position = points[l];
  return q;
}

inline bool uses_observations(const BaProblem& p, OptimizeMode mode) {
  if (mode == OptimizeMode::PoseGraph) return false;
  if (mode == OptimizeMode::Auto) return !p.observations.empty();
  return true;
}

inline bool uses_pose_graph(const BaProblem& p, OptimizeMode mode) {
  if (mode == OptimizeMode::Ba) return false;
  if (mode == OptimizeMode::Auto || mode == OptimizeMode::Both) return !p.edges.empty();
  return true;
}

}  // namespace detail

/// Labels the trajectory with the method's strategy.
inline SegmentationResult segment_for_method(const BaProblem& problem, const MethodSpec& m,
                                             const PipelineConfig& cfg) {
  SegmentationParams params = cfg.segmentation;
  params.use_buffer = m.use_buffer;
  const std::vector<FrameStats> stats = compute_frame_stats(problem);
  switch (m.strategy) {
    case Strategy::Full: return SegmentationResult::all_buffer(problem.frames.size());
    case Strategy::Hybrid: params.criterion = SplitCriterion::Hybrid; break;
    case Strategy::VelocityOnly: params.criterion = SplitCriterion::VelocityOnly; break;
    case Strategy::ReprojOnly: params.criterion = SplitCriterion::ReprojOnly; break;
    case Strategy::FixedLength: {
      int k = cfg.fixed_segments;
      if (k <= 0) {
        SegmentationParams hp = params;
        hp.criterion = SplitCriterion::Hybrid;
        k = std::max<int>(1, static_cast<int>(segment_by_stats(stats, hp).segments.size()));
      }
      return segment_fixed_length(problem.frames.size(), k, params);
    }
    case Strategy::Covisibility: return segment_by_covisibility(CovisibilityIndex(problem), params, cfg.covis_split);
  }
  return segment_by_stats(stats, params);
}

namespace detail {

/// Updates the non-anchored frames of `poses` (anchors already optimized).
inline void update_pruned(const BaProblem& problem, Updater updater, const std::vector<bool>& anchored,
                          const std::vector<Pose>& pre, std::vector<Pose>& poses, std::vector<Vec3>& points,
                          const SolverConfig& solver) {
  const std::vector<FrameStats> stats = detail::velocity_stats(with_state(problem, pre, points).frames);
  switch (updater) {
    case Updater::Interpolate:
      poses = interpolate_trajectory(anchored, pre, poses, stats, InterpolationMode::Blend);
      break;
    case Updater::Linear:
      poses = interpolate_trajectory(anchored, pre, poses, stats, InterpolationMode::Linear);
      break;
    case Updater::LocalSolve:
      local_solve_update(problem, anchored, pre, poses, points, solver);
      break;
  }
}

}  // namespace detail

/// Runs one method on `problem`. With `ground_truth` the report carries the ATE.
inline RunResult run_method(const BaProblem& problem, const MethodSpec& method, const PipelineConfig& cfg,
                            const std::vector<Pose>* ground_truth = nullptr) {
  using detail::Stopwatch;
  const Stopwatch total;
  RunResult out;
  RunReport& rep = out.report;
  rep.method = method.name;
  rep.frames = problem.frames.size();
  const bool do_pg = detail::uses_pose_graph(problem, cfg.mode);
  const bool do_ba = detail::uses_observations(problem, cfg.mode);
  if (!do_pg && !do_ba) throw InvalidArgument("nothing to optimize: no pose edges and no observations");

  std::vector<Pose> poses = poses_of(problem.frames);
  std::vector<Vec3> points = positions_of(problem.landmarks);

  {
    const Stopwatch sw;
    out.segmentation = segment_for_method(problem, method, cfg);
    rep.times.segmentation = sw.seconds();
  }
  const SegmentationResult& seg = out.segmentation;
  rep.segments = seg.segments.size();
  rep.buffer_fraction = seg.buffer_fraction();
  rep.kept_fraction = seg.kept_fraction();
  const bool pruned = method.strategy != Strategy::Full && seg.count(FrameLabel::Interior) > 0;

  if (do_pg) {
    const PoseGraph graph = problem.pose_graph();
    const std::vector<Pose> before = poses;
    if (!pruned) {
      const Stopwatch sw;
      PoseGraphSolution sol = optimize_pose_graph(graph, cfg.solver);
      rep.times.global_solve += sw.seconds();
      detail::absorb(rep, sol.report);
      poses = std::move(sol.poses);
    } else {
      Stopwatch sw;
      const ReducedPoseGraph red = reduce_pose_graph(graph, seg, cfg.reduction);
      rep.times.reduction += sw.seconds();
      detail::absorb(rep, red.stats);
      sw = Stopwatch();
      PoseGraphSolution sol = optimize_reduced(graph, red, cfg.solver);
      rep.times.global_solve += sw.seconds();
      detail::absorb(rep, sol.report);
      sw = Stopwatch();
      poses = std::move(sol.poses);
      std::vector<Vec3> unused;
      detail::update_pruned(BaProblem::from_pose_graph(graph), method.updater, kept_mask(seg), before, poses,
                            unused, cfg.solver);
      rep.times.interpolation += sw.seconds();
    }
    if (do_ba) {
      const Stopwatch sw;
      points = detail::carry_landmarks(problem, before, poses);
      rep.times.interpolation += pruned ? sw.seconds() : 0.0;
      if (!pruned) rep.times.global_solve += sw.seconds();
    }
  }

  if (do_ba) {
    const BaProblem current = detail::with_state(problem, poses, points);
    if (!pruned) {
      const detail::Stopwatch sw;
      BaSolution sol = optimize_ba(current, cfg.solver);
      rep.times.global_solve += sw.seconds();
      detail::absorb(rep, sol.report);
      poses = std::move(sol.poses);
      points = std::move(sol.landmarks);
    } else {
      detail::Stopwatch sw;
      const ConnectingOutcome conn = assign_connecting(CovisibilityIndex(current), seg, cfg.segmentation);
      rep.gap_fallbacks = conn.gap_fallbacks;
      rep.kept_fraction = conn.segmentation.kept_fraction();
      const ReducedBaProblem red = reduce_ba(current, conn.segmentation, cfg.reduction);
      rep.times.reduction += sw.seconds();
      detail::absorb(rep, red.stats);
      sw = Stopwatch();
      BaSolution sol = optimize_reduced(current, red, cfg.solver);
      rep.times.global_solve += sw.seconds();
      detail::absorb(rep, sol.report);
      sw = Stopwatch();
      const std::vector<Pose> before = poses;
      poses = std::move(sol.poses);
      points = std::move(sol.landmarks);
      std::vector<bool> optimized(points.size(), false);
      for (int l : red.kept_landmarks) optimized[l] = true;
      const std::vector<bool> anchored = kept_mask(conn.segmentation);
      detail::update_pruned(current, method.updater, anchored, before, poses, points, cfg.solver);
      if (method.updater != Updater::LocalSolve) {
        const LandmarkUpdate lu = update_landmarks(current, conn.segmentation, before, poses, optimized);
        for (std::size_t l = 0; l < points.size(); ++l) {
          if (!optimized[l]) points[l] = lu.positions[l];
        }
      }
      rep.times.interpolation += sw.seconds();
      out.segmentation = conn.segmentation;
    }
  }

  out.poses = std::move(poses);
  out.landmarks = std::move(points);
  if (ground_truth) {
    try {
      rep.ate_rmse = ate_rmse(out.poses, *ground_truth, cfg.align);
    } catch (const AlignmentError&) {
      double s = 0.0;
      for (std::size_t i = 0; i < out.poses.size(); ++i) {
        s += (out.poses[i].translation() - (*ground_truth)[i].translation()).squaredNorm();
      }
      rep.ate_rmse = std::sqrt(s / std::max<std::size_t>(1, out.poses.size()));
      rep.warnings.push_back("alignment degenerate; ATE computed without alignment");
    }
  }
  rep.times.total = total.seconds();
  return out;
}

inline RunResult run_method(const BaProblem& problem, const std::string& method, const PipelineConfig& cfg,
                            const std::vector<Pose>* ground_truth = nullptr) {
  return run_method(problem, find_method(method), cfg, ground_truth);
}

}  // namespace segopt
