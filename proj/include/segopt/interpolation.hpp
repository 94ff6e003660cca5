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

// Interior pose update from optimized anchors. Every pruned frame C between
// consecutive kept frames H and T is predicted from both sides through its
// pre-optimization relative pose and the two predictions are blended with a
// velocity-weighted factor.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/graph_model.hpp"
#include "segopt/segmentation.hpp"
#include "segopt/solver.hpp"

namespace segopt {

struct Anchor {
  int frame = 0;
  Pose pre;
  Pose post;
};

struct AnchorPair {
  Anchor head;
  Anchor tail;
};

struct InterpolationFactor {
  double alpha = 1.0;

  /// Blend weight of the tail prediction.
  double t() const { return alpha / (1.0 + alpha); }
};

enum class InterpolationMode { Blend, Linear };

/// alpha = sqrt(sum |v|^2 over (head, current]) / sqrt(sum |v|^2 over (current, tail]).
inline InterpolationFactor interpolation_factor(std::span<const FrameStats> stats, int head,
                                                int current, int tail) {
  if (!(head < current && current < tail) || tail >= static_cast<int>(stats.size()) || head < 0) {
    throw InvalidArgument("interpolation_factor: need head < current < tail within range");
  }
  double left = 0.0, right = 0.0;
  for (int i = head + 1; i <= current; ++i) left += stats[i].velocity.squaredNorm();
  for (int i = current + 1; i <= tail; ++i) right += stats[i].velocity.squaredNorm();
  left = std::sqrt(left);
  right = std::sqrt(right);
  constexpr double kTiny = 1e-12;
  if (left < kTiny && right < kTiny) {
    return {static_cast<double>(current - head) / static_cast<double>(tail - current)};
  }
  if (right < kTiny) return {1e6};
  return {left / right};
}

/// Scale of a similarity frame between two anchors.
inline double blend_scale(double s_head, double s_tail, double alpha) {
  return s_head / (alpha + 1.0) + alpha * s_tail / (alpha + 1.0);
}

/// Dual-prediction blend for one frame.
inline Pose interpolate_pose(const AnchorPair& a, const Pose& current_pre, double t) {
  const Pose from_head = a.head.post * relative(a.head.pre, current_pre);
  const Pose from_tail = a.tail.post * relative(a.tail.pre, current_pre);
  return Pose(slerp(from_head.rotation(), from_tail.rotation(), t),
              lerp(from_head.translation(), from_tail.translation(), t));
}

/// Similarity variant: the anchors carry post-optimization similarity poses.
inline SimPose interpolate_sim_pose(const Pose& head_pre, const SimPose& head_post,
                                    const Pose& tail_pre, const SimPose& tail_post,
                                    const Pose& current_pre, double alpha) {
  const double t = alpha / (1.0 + alpha);
  const SimPose from_head = head_post * SimPose(relative(head_pre, current_pre));
  const SimPose from_tail = tail_post * SimPose(relative(tail_pre, current_pre));
  return SimPose(slerp(from_head.rotation(), from_tail.rotation(), t),
                 lerp(from_head.translation(), from_tail.translation(), t),
                 blend_scale(head_post.scale(), tail_post.scale(), alpha));
}

/// Updates the frames strictly between the anchors of `pair` in `poses`.
inline void interpolate_span(const AnchorPair& pair, std::span<const Pose> pre,
                             std::span<const FrameStats> stats, InterpolationMode mode,
                             std::vector<Pose>& poses) {
  const int h = pair.head.frame;
  const int t = pair.tail.frame;
  if (!(h < t)) throw AnchoringError("head anchor must precede tail anchor");
  for (int c = h + 1; c < t; ++c) {
    if (mode == InterpolationMode::Linear) {
      const double f = static_cast<double>(c - h) / static_cast<double>(t - h);
      poses[c] = Pose(slerp(pair.head.post.rotation(), pair.tail.post.rotation(), f),
                      lerp(pair.head.post.translation(), pair.tail.post.translation(), f));
    } else {
      poses[c] = interpolate_pose(pair, pre[c], interpolation_factor(stats, h, c, t).t());
    }
  }
}

/// Anchor pairs around every maximal run of non-anchor frames.
inline std::vector<AnchorPair> anchor_pairs(const std::vector<bool>& anchored,
                                            std::span<const Pose> pre, std::span<const Pose> post) {
  const int n = static_cast<int>(anchored.size());
  std::vector<AnchorPair> out;
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    if (!anchored[i]) continue;
    if (prev >= 0 && i > prev + 1) {
      out.push_back({{prev, pre[prev], post[prev]}, {i, pre[i], post[i]}});
    } else if (prev < 0 && i > 0) {
      throw AnchoringError("frames 0.." + std::to_string(i - 1) + " have no head anchor");
    }
    prev = i;
  }
  if (prev < 0) throw AnchoringError("no anchored frame");
  if (prev < n - 1) {
    throw AnchoringError("frames " + std::to_string(prev + 1) + ".." + std::to_string(n - 1) +
                         " have no tail anchor");
  }
  return out;
}

/// Updates one segment's pruned frames. `anchored` marks kept frames; the
/// segment must start and end on anchors.
inline std::vector<Pose> interpolate_segment(const Range& segment, const std::vector<bool>& anchored,
                                             std::span<const Pose> pre, std::span<const Pose> post,
                                             std::span<const FrameStats> stats,
                                             InterpolationMode mode = InterpolationMode::Blend) {
  if (segment.first < 0 || segment.last >= static_cast<int>(anchored.size())) {
    throw InvalidArgument("segment out of range");
  }
  if (!anchored[segment.first] || !anchored[segment.last]) {
    throw AnchoringError("segment [" + std::to_string(segment.first) + ", " +
                         std::to_string(segment.last) + "] lacks a head or tail anchor");
  }
  std::vector<Pose> out(post.begin(), post.end());
  const std::vector<bool> sub(anchored.begin() + segment.first, anchored.begin() + segment.last + 1);
  for (AnchorPair p : anchor_pairs(sub, pre.subspan(segment.first, sub.size()),
                                   post.subspan(segment.first, sub.size()))) {
    p.head.frame += segment.first;
    p.tail.frame += segment.first;
    interpolate_span(p, pre, stats, mode, out);
  }
  return out;
}

/// Whole-trajectory update: every non-anchored frame is interpolated from its
/// neighbouring anchors; anchored frames keep their `post` value bit-exactly.
inline std::vector<Pose> interpolate_trajectory(const std::vector<bool>& anchored,
                                                std::span<const Pose> pre, std::span<const Pose> post,
                                                std::span<const FrameStats> stats,
                                                InterpolationMode mode = InterpolationMode::Blend) {
  std::vector<Pose> out(post.begin(), post.end());
  for (const AnchorPair& p : anchor_pairs(anchored, pre, post)) interpolate_span(p, pre, stats, mode, out);
  return out;
}

inline std::vector<bool> kept_mask(const SegmentationResult& seg) {
  std::vector<bool> m(seg.labels.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = seg.is_kept(static_cast<int>(i));
  return m;
}

// ---------------------------------------------------------------------------
// Landmarks

struct LandmarkUpdate {
  std::vector<Vec3> positions;
  std::vector<int> reference;  // reference frame per landmark, -1 if untouched
  std::size_t updated = 0;
  std::size_t skipped = 0;  // no observer at all
};

/// Carries every landmark not in `optimized` rigidly with a reference frame:
/// the kept observer with the most observations, or else the observer closest
/// in time to a kept frame.
inline LandmarkUpdate update_landmarks(const BaProblem& problem, const SegmentationResult& seg,
                                       std::span<const Pose> pre, std::span<const Pose> post,
                                       const std::vector<bool>& optimized) {
  const int n = static_cast<int>(problem.frames.size());
  const std::size_t m = problem.landmarks.size();
  std::vector<int> obs_count(n, 0);
  std::vector<std::vector<int>> observers(m);
  for (const Observation& o : problem.observations) {
    ++obs_count[o.frame];
    observers[o.landmark].push_back(o.frame);
  }
  // Distance (in frames) to the nearest kept frame.
  std::vector<int> dist(n, n + 1);
  int last = -(n + 1);
  for (int i = 0; i < n; ++i) {
    if (seg.is_kept(i)) last = i;
    dist[i] = i - last;
  }
  last = 2 * n + 1;
  for (int i = n - 1; i >= 0; --i) {
    if (seg.is_kept(i)) last = i;
    dist[i] = std::min(dist[i], last - i);
  }

  LandmarkUpdate out;
  out.positions = positions_of(problem.landmarks);
  out.reference.assign(m, -1);
  for (std::size_t l = 0; l < m; ++l) {
    if (l < optimized.size() && optimized[l]) continue;
    auto& obs = observers[l];
    if (obs.empty()) {
      ++out.skipped;
      continue;
    }
    std::sort(obs.begin(), obs.end());
    int ref = -1;
    for (int f : obs) {
      if (seg.is_kept(f) && (ref < 0 || obs_count[f] > obs_count[ref])) ref = f;
    }
    if (ref < 0) {
      for (int f : obs) {
        if (ref < 0 || dist[f] < dist[ref]) ref = f;
      }
    }
    out.reference[l] = ref;
    out.positions[l] = post[ref] * (pre[ref].inverse() * problem.landmarks[l].position);
    ++out.updated;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local optimization updater

struct LocalSolveStats {
  std::size_t spans = 0;
  std::size_t iterations = 0;
};

/// Alternative to interpolation: each run of pruned frames is re-optimized
/// with its two anchors held fixed, using the observations and pose edges
/// inside the span. Landmark positions come back through `landmarks`.
inline LocalSolveStats local_solve_update(const BaProblem& problem, const std::vector<bool>& anchored,
                                          std::span<const Pose> pre, std::vector<Pose>& poses,
                                          std::vector<Vec3>& landmarks, const SolverConfig& config) {
  const int n = static_cast<int>(problem.frames.size());
  LocalSolveStats stats;
  std::vector<std::vector<int>> obs_of_frame(n);
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    obs_of_frame[problem.observations[k].frame].push_back(static_cast<int>(k));
  }
  for (const AnchorPair& pair : anchor_pairs(anchored, pre, poses)) {
    const int h = pair.head.frame;
    const int t = pair.tail.frame;
    const int len = t - h + 1;
    std::vector<Pose> sub_poses(poses.begin() + h, poses.begin() + t + 1);
    // Seed the free frames from their anchors so the local problem starts close.
    for (int c = h + 1; c < t; ++c) sub_poses[c - h] = interpolate_pose(pair, pre[c], 0.0);
    std::vector<bool> fixed(len, false);
    fixed.front() = fixed.back() = true;

    std::vector<detail::WeightedEdge> edges;
    const bool has_obs = !problem.observations.empty();
    for (const PoseEdge& e : problem.edges) {
      if (e.from < h || e.from > t || e.to < h || e.to > t) continue;
      PoseEdge local = e;
      local.from -= h;
      local.to -= h;
      edges.push_back({local, has_obs ? config.ba_edge_weight : 1.0});
    }
    // Landmarks seen at least twice inside the span and by a free frame.
    std::vector<int> lm_local(problem.landmarks.size(), -1);
    std::vector<int> count(problem.landmarks.size(), 0);
    std::vector<char> by_free(problem.landmarks.size(), 0);
    for (int f = h; f <= t; ++f) {
      for (int k : obs_of_frame[f]) {
        const int l = problem.observations[k].landmark;
        ++count[l];
        if (f != h && f != t) by_free[l] = 1;
      }
    }
    std::vector<int> lm_global;
    std::vector<Vec3> sub_points;
    std::vector<Observation> sub_obs;
    for (int f = h; f <= t; ++f) {
      for (int k : obs_of_frame[f]) {
        Observation o = problem.observations[k];
        if (count[o.landmark] < 2 || !by_free[o.landmark]) continue;
        if (lm_local[o.landmark] < 0) {
          lm_local[o.landmark] = static_cast<int>(lm_global.size());
          lm_global.push_back(o.landmark);
          sub_points.push_back(landmarks[o.landmark]);
        }
        o.frame -= h;
        o.landmark = lm_local[o.landmark];
        sub_obs.push_back(o);
      }
    }
    detail::LmEngine engine(std::move(sub_poses), std::move(fixed), std::move(sub_points),
                            std::move(edges), std::move(sub_obs), problem.camera, config);
    const SolveReport rep = engine.run();
    ++stats.spans;
    stats.iterations += static_cast<std::size_t>(rep.iterations);
    for (int c = h + 1; c < t; ++c) poses[c] = engine.poses()[c - h];
    for (std::size_t i = 0; i < lm_global.size(); ++i) landmarks[lm_global[i]] = engine.points()[i];
  }
  return stats;
}

}  // namespace segopt
