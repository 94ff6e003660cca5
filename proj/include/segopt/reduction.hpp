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

// Reduced optimization problems. Interior frames leave the state; every
// pruned stretch between two kept frames is replaced by one synthesized edge
// whose measurement is the composition of the step measurements and whose
// covariance is the first-order propagation of the per-step covariances.

#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/graph_model.hpp"
#include "segopt/segmentation.hpp"

namespace segopt {

/// What happens to non-consecutive edges (loop closures) touching a pruned frame.
enum class LoopPolicy {
  Drop,      // remove and count
  Reanchor,  // move the pruned endpoint to the preceding kept frame
};

struct ReductionOptions {
  bool identity_information = false;  // synthesized edges get identity information
  LoopPolicy loop_policy = LoopPolicy::Reanchor;
  bool bridge_pruned_stretches = true;  // BA only; pose graphs always bridge
};

struct ReductionStats {
  std::size_t synthesized_edges = 0;
  std::size_t loops_total = 0;
  std::size_t loops_dropped = 0;
  std::size_t loops_reanchored = 0;
  std::size_t landmarks_dropped = 0;
  bool gauge_substituted = false;
  std::vector<std::string> warnings;
};

struct ReducedPoseGraph {
  PoseGraph graph;               // dense re-indexed
  std::vector<int> kept_frames;  // reduced index -> original frame id
  ReductionStats stats;
};

struct ReducedBaProblem {
  BaProblem problem;
  std::vector<int> kept_frames;
  std::vector<int> kept_landmarks;
  ReductionStats stats;
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

inline Mat6 symmetrize(const Mat6& m) { return 0.5 * (m + m.transpose()); }

/// Covariance of one step k -> k+1 expressed for the forward direction.
class StepCovariances {
 public:
  StepCovariances(const std::vector<PoseEdge>& edges, std::size_t n) : step_(n, -1), edges_(edges) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const int a = std::min(edges[e].from, edges[e].to);
      const int b = std::max(edges[e].from, edges[e].to);
      if (b != a + 1) continue;
      if (step_[a] < 0 || (edges[step_[a]].kind != EdgeKind::Odometry &&
                           edges[e].kind == EdgeKind::Odometry)) {
        step_[a] = static_cast<int>(e);
      }
    }
  }

  bool is_step_edge(std::size_t e) const {
    const int a = std::min(edges_[e].from, edges_[e].to);
    return step_[a] == static_cast<int>(e) &&
           std::max(edges_[e].from, edges_[e].to) == a + 1;
  }

  /// Measured relative pose k -> k+1, or the fallback when no step edge exists.
  Pose measurement(int k, const Pose& fallback) const {
    const int e = step_[k];
    if (e < 0) return fallback;
    const PoseEdge& edge = edges_[e];
    return edge.from == k ? edge.measurement : edge.measurement.inverse();
  }

  Mat6 covariance(int k) const {
    const int e = step_[k];
    if (e < 0) return Mat6::Identity();
    const PoseEdge& edge = edges_[e];
    const Mat6 cov = symmetrize(edge.information.inverse());
    if (edge.from == k) return cov;
    const Mat6 ad = adjoint(edge.measurement);
    return symmetrize(ad * cov * ad.transpose());
  }

 private:
  std::vector<int> step_;
  const std::vector<PoseEdge>& edges_;
};

/// Relative pose first -> last composed from the step measurements (current
/// poses where a step has no edge), and its propagated covariance
/// (right-perturbation convention).
inline std::pair<Pose, Mat6> compose_chain(const std::vector<Pose>& poses, int first, int last,
                                           const StepCovariances& steps) {
  Pose acc;
  Mat6 cov = Mat6::Zero();
  for (int k = first; k < last; ++k) {
    const Pose step = steps.measurement(k, relative(poses[k], poses[k + 1]));
    const Mat6 ad = adjoint(step.inverse());
    cov = symmetrize(ad * cov * ad.transpose() + steps.covariance(k));
    acc = acc * step;
  }
  return {acc, cov};
}

struct EdgeReduction {
  std::vector<PoseEdge> edges;  // original frame ids
  ReductionStats stats;
};

inline EdgeReduction reduce_edges(const std::vector<Frame>& frames,
                                  const std::vector<PoseEdge>& edges,
                                  const std::vector<bool>& kept, bool bridge,
                                  const ReductionOptions& opt) {
  const int n = static_cast<int>(frames.size());
  const std::vector<Pose> poses = poses_of(frames);
  const StepCovariances steps(edges, frames.size());
  EdgeReduction out;

  std::vector<int> prev_kept(n, -1);
  int last = -1;
  for (int f = 0; f < n; ++f) {
    if (kept[f]) last = f;
    prev_kept[f] = last;
  }

  for (std::size_t e = 0; e < edges.size(); ++e) {
    const PoseEdge& edge = edges[e];
    const bool is_step = steps.is_step_edge(e);
    if (!is_step) ++out.stats.loops_total;
    if (kept[edge.from] && kept[edge.to]) {
      out.edges.push_back(edge);
      continue;
    }
    if (is_step) continue;  // replaced by the stretch bridge
    if (opt.loop_policy == LoopPolicy::Drop) {
      ++out.stats.loops_dropped;
      continue;
    }
    PoseEdge moved = edge;
    Mat6 cov = symmetrize(edge.information.inverse());
    if (!kept[edge.from]) {
      const int k = prev_kept[edge.from];
      if (k < 0) {
        ++out.stats.loops_dropped;
        continue;
      }
      auto [chain, chain_cov] = compose_chain(poses, k, edge.from, steps);
      const Mat6 ad = adjoint(moved.measurement.inverse());
      cov = symmetrize(ad * chain_cov * ad.transpose() + cov);
      moved.measurement = chain * moved.measurement;
      moved.from = k;
    }
    if (!kept[edge.to]) {
      const int k = prev_kept[edge.to];
      if (k < 0) {
        ++out.stats.loops_dropped;
        continue;
      }
      auto [chain, chain_cov] = compose_chain(poses, k, edge.to, steps);
      const Mat6 ad = adjoint(chain);
      cov = symmetrize(ad * (cov + chain_cov) * ad.transpose());
      moved.measurement = moved.measurement * chain.inverse();
      moved.to = k;
    }
    if (moved.from == moved.to) {
      ++out.stats.loops_dropped;
      continue;
    }
    moved.information = symmetrize(cov.inverse());
    out.edges.push_back(moved);
    ++out.stats.loops_reanchored;
  }

  if (bridge) {
    int prev = -1;
    for (int f = 0; f < n; ++f) {
      if (!kept[f]) continue;
      if (prev >= 0 && f > prev + 1) {
        auto [meas, cov] = compose_chain(poses, prev, f, steps);
        PoseEdge s;
        s.from = prev;
        s.to = f;
        s.measurement = meas;
        s.information = opt.identity_information ? Mat6::Identity() : symmetrize(cov.inverse());
        s.kind = EdgeKind::Synthesized;
        out.edges.push_back(s);
        ++out.stats.synthesized_edges;
      }
      prev = f;
    }
  }

  if (out.stats.loops_total > 0 &&
      out.stats.loops_dropped * 10 > out.stats.loops_total) {
    out.stats.warnings.push_back(std::to_string(out.stats.loops_dropped) + " of " +
                                 std::to_string(out.stats.loops_total) +
                                 " loop-closure edges dropped by reduction");
  }
  return out;
}

inline std::string segment_name(const SegmentationResult& seg, int frame) {
  const int s = seg.segment_of(frame);
  if (s < 0) return "buffer around frame " + std::to_string(frame);
  return "segment " + std::to_string(s) + " [" + std::to_string(seg.segments[s].first) + ", " +
         std::to_string(seg.segments[s].last) + "]";
}

}  // namespace detail

inline ReducedPoseGraph reduce_pose_graph(const PoseGraph& graph, const SegmentationResult& seg,
                                          const ReductionOptions& opt = {}) {
  const int n = static_cast<int>(graph.frames.size());
  if (seg.labels.size() != graph.frames.size()) {
    throw InvalidArgument("segmentation does not match the graph's frame count");
  }
  std::vector<bool> kept(n);
  for (int f = 0; f < n; ++f) {
    const FrameLabel l = seg.labels[f];
    kept[f] = l == FrameLabel::Head || l == FrameLabel::Tail || l == FrameLabel::Buffer;
  }
  detail::EdgeReduction er = detail::reduce_edges(graph.frames, graph.edges, kept, true, opt);

  ReducedPoseGraph out;
  out.stats = std::move(er.stats);
  std::vector<int> to_reduced(n, -1);
  for (int f = 0; f < n; ++f) {
    if (!kept[f]) continue;
    to_reduced[f] = static_cast<int>(out.kept_frames.size());
    out.kept_frames.push_back(f);
    Frame fr = graph.frames[f];
    fr.id = to_reduced[f];
    out.graph.frames.push_back(fr);
  }
  const bool fixed_kept = std::any_of(out.graph.frames.begin(), out.graph.frames.end(),
                                      [](const Frame& f) { return f.is_fixed; });
  if (!fixed_kept && !out.graph.frames.empty()) {
    out.graph.frames.front().is_fixed = true;
    out.stats.gauge_substituted = true;
  }
  for (PoseEdge e : er.edges) {
    e.from = to_reduced[e.from];
    e.to = to_reduced[e.to];
    out.graph.edges.push_back(e);
  }

  detail::UnionFind uf(out.graph.frames.size());
  for (const PoseEdge& e : out.graph.edges) uf.unite(e.from, e.to);
  for (std::size_t i = 1; i < out.graph.frames.size(); ++i) {
    if (uf.find(static_cast<int>(i)) != uf.find(0)) {
      throw ReductionError("reduced pose graph is disconnected at " +
                           detail::segment_name(seg, out.kept_frames[i]));
    }
  }
  return out;
}

inline ReducedBaProblem reduce_ba(const BaProblem& problem, const SegmentationResult& seg,
                                  const ReductionOptions& opt = {}) {
  const int n = static_cast<int>(problem.frames.size());
  if (seg.labels.size() != problem.frames.size()) {
    throw InvalidArgument("segmentation does not match the problem's frame count");
  }
  std::vector<bool> kept(n);
  for (int f = 0; f < n; ++f) kept[f] = seg.labels[f] != FrameLabel::Interior;

  detail::EdgeReduction er =
      detail::reduce_edges(problem.frames, problem.edges, kept, opt.bridge_pruned_stretches, opt);

  ReducedBaProblem out;
  out.stats = std::move(er.stats);
  out.problem.camera = problem.camera;

  std::vector<int> to_reduced(n, -1);
  for (int f = 0; f < n; ++f) {
    if (!kept[f]) continue;
    to_reduced[f] = static_cast<int>(out.kept_frames.size());
    out.kept_frames.push_back(f);
    Frame fr = problem.frames[f];
    fr.id = to_reduced[f];
    out.problem.frames.push_back(fr);
  }
  const bool fixed_kept = std::any_of(out.problem.frames.begin(), out.problem.frames.end(),
                                      [](const Frame& f) { return f.is_fixed; });
  if (!fixed_kept && !out.problem.frames.empty()) {
    out.problem.frames.front().is_fixed = true;
    out.stats.gauge_substituted = true;
  }

  std::vector<int> kept_obs(problem.landmarks.size(), 0);
  for (const Observation& o : problem.observations) {
    if (kept[o.frame]) ++kept_obs[o.landmark];
  }
  std::vector<int> lm_to_reduced(problem.landmarks.size(), -1);
  for (std::size_t l = 0; l < problem.landmarks.size(); ++l) {
    if (kept_obs[l] < 2) {
      ++out.stats.landmarks_dropped;
      continue;
    }
    lm_to_reduced[l] = static_cast<int>(out.kept_landmarks.size());
    out.kept_landmarks.push_back(static_cast<int>(l));
    out.problem.landmarks.push_back({lm_to_reduced[l], problem.landmarks[l].position});
  }
  for (const Observation& o : problem.observations) {
    if (!kept[o.frame] || lm_to_reduced[o.landmark] < 0) continue;
    Observation r = o;
    r.frame = to_reduced[o.frame];
    r.landmark = lm_to_reduced[o.landmark];
    out.problem.observations.push_back(r);
  }
  for (PoseEdge e : er.edges) {
    e.from = to_reduced[e.from];
    e.to = to_reduced[e.to];
    out.problem.edges.push_back(e);
  }

  const std::size_t nk = out.problem.frames.size();
  detail::UnionFind uf(nk);
  for (const PoseEdge& e : out.problem.edges) uf.unite(e.from, e.to);
  std::vector<int> first_obs(out.problem.landmarks.size(), -1);
  for (const Observation& o : out.problem.observations) {
    if (first_obs[o.landmark] < 0) {
      first_obs[o.landmark] = o.frame;
    } else {
      uf.unite(first_obs[o.landmark], o.frame);
    }
  }
  for (std::size_t i = 1; i < nk; ++i) {
    if (uf.find(static_cast<int>(i)) != uf.find(0)) {
      throw ReductionError("reduced BA problem is disconnected at " +
                           detail::segment_name(seg, out.kept_frames[i]));
    }
  }
  return out;
}

}  // namespace segopt
