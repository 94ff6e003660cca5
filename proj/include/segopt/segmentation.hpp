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

// Trajectory segmentation.
//
// A sequential scan assigns frames to an open segment while the frame's
// velocity stays close to the running segment mean and its reprojection error
// stays low. A failing frame closes the segment and starts a buffer; the
// buffer lasts until a weighted stability score of velocity and reprojection
// deviation drops under a threshold, where a new segment opens. The score is
// taken against the closed segment's means, or against the trailing window
// when that segment is too short to be kept. Segments are then split into
// head / interior / tail.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/graph_model.hpp"

namespace segopt {

struct FrameStats {
  Twist velocity = Twist::Zero();  // per second
  double reproj = 0.0;             // mean pixel error; 0 when unobserved
  int observations = 0;            // in-front observations used for reproj
};

namespace detail {

inline std::vector<FrameStats> velocity_stats(const std::vector<Frame>& frames) {
  if (frames.size() < 2) {
    throw InvalidArgument("frame statistics need at least 2 frames");
  }
  std::vector<FrameStats> stats(frames.size());
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const double dt = frames[i].timestamp - frames[i - 1].timestamp;
    if (!(dt > 0.0)) {
      throw InvalidArgument("duplicate or decreasing timestamp at frame " +
                            std::to_string(i));
    }
    stats[i].velocity = se3_log(relative(frames[i - 1].pose, frames[i].pose)) / dt;
  }
  stats[0].velocity = stats[1].velocity;
  return stats;
}

}  // namespace detail

inline std::vector<FrameStats> compute_frame_stats(const PoseGraph& g) {
  return detail::velocity_stats(g.frames);
}

inline std::vector<FrameStats> compute_frame_stats(const BaProblem& p) {
  std::vector<FrameStats> stats = detail::velocity_stats(p.frames);
  std::vector<double> sum(p.frames.size(), 0.0);
  for (const Observation& o : p.observations) {
    const auto uv = project(p.camera, p.frames[o.frame].pose, p.landmarks[o.landmark].position);
    if (!uv) continue;
    sum[o.frame] += (o.pixel - *uv).norm();
    ++stats[o.frame].observations;
  }
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].observations > 0) stats[i].reproj = sum[i] / stats[i].observations;
  }
  return stats;
}

enum class FrameLabel { Head, Interior, Tail, Buffer, Connecting };

inline const char* to_string(FrameLabel l) {
  switch (l) {
    case FrameLabel::Head: return "head";
    case FrameLabel::Interior: return "interior";
    case FrameLabel::Tail: return "tail";
    case FrameLabel::Buffer: return "buffer";
    case FrameLabel::Connecting: return "connecting";
  }
  return "?";
}

/// Inclusive frame range.
struct Range {
  int first = 0;
  int last = -1;
  int size() const { return last - first + 1; }
  bool contains(int f) const { return f >= first && f <= last; }
  bool operator==(const Range&) const = default;
};

/// Which conditions open / keep a segment.
enum class SplitCriterion { Hybrid, VelocityOnly, ReprojOnly };

struct SegmentationParams {
  // Unset thresholds are resolved to median + 3 * (1.4826 * MAD) of the
  // respective statistic over the trajectory.
  std::optional<double> sigma_v;
  std::optional<double> sigma_r;
  double alpha = 0.2;
  double beta = 0.8;
  double eta_threshold = 0.5;
  int head_len = 2;
  int tail_len = 2;
  int min_segment_len = 8;
  int covis_threshold = 30;
  SplitCriterion criterion = SplitCriterion::Hybrid;
  bool use_buffer = true;
  int adaptive_window = 10;  // frames of history for the adaptive sigma_v statistic

  void validate() const {
    if (std::abs(alpha + beta - 1.0) > 1e-12 || alpha < 0.0 || beta < 0.0) {
      throw InvalidArgument("segmentation weights must be non-negative and sum to 1");
    }
    if (!(eta_threshold > 0.0)) throw InvalidArgument("eta_threshold must be > 0");
    if (sigma_v && !(*sigma_v > 0.0)) throw InvalidArgument("sigma_v must be > 0");
    if (sigma_r && !(*sigma_r > 0.0)) throw InvalidArgument("sigma_r must be > 0");
    if (head_len < 1 || tail_len < 1) throw InvalidArgument("head/tail length must be >= 1");
    if (min_segment_len < head_len + tail_len + 1) {
      throw InvalidArgument("min_segment_len must be >= head_len + tail_len + 1");
    }
    if (covis_threshold < 0) throw InvalidArgument("covis_threshold must be >= 0");
    if (adaptive_window < 1) throw InvalidArgument("adaptive_window must be >= 1");
  }
};

struct SegmentationResult {
  std::vector<FrameLabel> labels;
  std::vector<Range> segments;
  std::vector<Range> buffers;
  double sigma_v = 0.0;  // thresholds actually used
  double sigma_r = 0.0;
  std::size_t scanned_segments = 0;  // opened by the scan, before the length filter

  std::size_t frame_count() const { return labels.size(); }

  /// Index of the segment containing `frame`, or -1 for buffer frames.
  int segment_of(int frame) const {
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (segments[s].contains(frame)) return static_cast<int>(s);
    }
    return -1;
  }

  bool is_kept(int frame) const { return labels[frame] != FrameLabel::Interior; }

  std::size_t count(FrameLabel l) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
  }

  double buffer_fraction() const {
    return labels.empty() ? 0.0 : static_cast<double>(count(FrameLabel::Buffer)) / labels.size();
  }

  double kept_fraction() const {
    if (labels.empty()) return 0.0;
    return 1.0 - static_cast<double>(count(FrameLabel::Interior)) / labels.size();
  }

  /// Everything optimized, nothing interpolated.
  static SegmentationResult all_buffer(std::size_t n) {
    SegmentationResult r;
    r.labels.assign(n, FrameLabel::Buffer);
    if (n > 0) r.buffers.push_back({0, static_cast<int>(n) - 1});
    return r;
  }
};

// ---------------------------------------------------------------------------
// Thresholds

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

inline double robust_upper(const std::vector<double>& v) {
  const double med = median(v);
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  return med + 3.0 * 1.4826 * median(dev);
}

inline bool has_reprojection(std::span<const FrameStats> stats) {
  return std::any_of(stats.begin(), stats.end(),
                     [](const FrameStats& s) { return s.observations > 0; });
}

}  // namespace detail

/// Deviation of each frame's velocity from the mean of the preceding
/// `window` frames; frame 0 reports 0.
inline std::vector<double> velocity_deviation(std::span<const FrameStats> stats, int window) {
  std::vector<double> out(stats.size(), 0.0);
  for (std::size_t i = 1; i < stats.size(); ++i) {
    const std::size_t lo = i > static_cast<std::size_t>(window) ? i - window : 0;
    Twist mean = Twist::Zero();
    for (std::size_t k = lo; k < i; ++k) mean += stats[k].velocity;
    mean /= static_cast<double>(i - lo);
    out[i] = (stats[i].velocity - mean).norm();
  }
  return out;
}

inline double adaptive_sigma_v(std::span<const FrameStats> stats, int window) {
  std::vector<double> dev = velocity_deviation(stats, window);
  if (dev.size() > 1) dev.erase(dev.begin());
  return std::max(detail::robust_upper(dev), 1e-9);
}

inline double adaptive_sigma_r(std::span<const FrameStats> stats) {
  std::vector<double> r;
  for (const FrameStats& s : stats) {
    if (s.observations > 0) r.push_back(s.reproj);
  }
  if (r.empty()) return 0.0;
  return std::max(detail::robust_upper(r), 1e-9);
}

// ---------------------------------------------------------------------------
// Assembling a labeled result from raw segment ranges

/// Drops segments shorter than min_segment_len (they become buffer, or are
/// merged into the previous segment without buffers), collects buffers as
/// maximal runs of non-segment frames and assigns head/tail/interior labels.
inline SegmentationResult finalize_segments(std::size_t n, std::vector<Range> raw,
                                            const SegmentationParams& p) {
  SegmentationResult out;
  out.labels.assign(n, FrameLabel::Buffer);
  std::vector<Range> segs;
  if (p.use_buffer) {
    for (const Range& r : raw) {
      if (r.size() >= p.min_segment_len) segs.push_back(r);
    }
  } else {
    // Abutting segments: a short one is absorbed by its predecessor (or its
    // successor when it is the first).
    for (const Range& r : raw) {
      if (!segs.empty() && (r.size() < p.min_segment_len || segs.back().size() < p.min_segment_len)) {
        segs.back().last = r.last;
      } else {
        segs.push_back(r);
      }
    }
    if (!segs.empty() && segs.back().size() < p.min_segment_len) {
      if (segs.size() > 1) {
        const int last = segs.back().last;
        segs.pop_back();
        segs.back().last = last;
      } else {
        segs.clear();
      }
    }
  }
  for (const Range& s : segs) {
    for (int f = s.first; f <= s.last; ++f) out.labels[f] = FrameLabel::Interior;
    for (int k = 0; k < p.head_len; ++k) out.labels[s.first + k] = FrameLabel::Head;
    for (int k = 0; k < p.tail_len; ++k) out.labels[s.last - k] = FrameLabel::Tail;
  }
  out.segments = std::move(segs);
  for (std::size_t f = 0; f < n; ++f) {
    if (out.labels[f] != FrameLabel::Buffer) continue;
    if (!out.buffers.empty() && out.buffers.back().last == static_cast<int>(f) - 1) {
      out.buffers.back().last = static_cast<int>(f);
    } else {
      out.buffers.push_back({static_cast<int>(f), static_cast<int>(f)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Velocity / reprojection scan

inline SegmentationResult segment_by_stats(std::span<const FrameStats> stats,
                                           const SegmentationParams& params) {
  params.validate();
  const std::size_t n = stats.size();
  const bool use_reproj = params.criterion != SplitCriterion::VelocityOnly &&
                          detail::has_reprojection(stats);
  const bool use_velocity = params.criterion != SplitCriterion::ReprojOnly;
  const double sigma_v = params.sigma_v.value_or(adaptive_sigma_v(stats, params.adaptive_window));
  const double sigma_r = params.sigma_r.value_or(adaptive_sigma_r(stats));

  if (n < static_cast<std::size_t>(params.min_segment_len)) {
    SegmentationResult r = SegmentationResult::all_buffer(n);
    r.sigma_v = sigma_v;
    r.sigma_r = sigma_r;
    return r;
  }

  // Stability score weights; without reprojection data velocity carries it all.
  double wv = params.alpha, wr = params.beta;
  if (!use_reproj) {
    wv = 1.0;
    wr = 0.0;
  } else if (!use_velocity) {
    wv = 0.0;
    wr = 1.0;
  }

  // The adaptive sigma_v is calibrated against a window mean; while the open
  // segment is shorter, its mean is noisier and the threshold widens to match.
  const bool adaptive_v = !params.sigma_v.has_value();
  const double w = static_cast<double>(params.adaptive_window);
  auto velocity_threshold = [&](double m) {
    if (!adaptive_v || m >= w) return sigma_v;
    return sigma_v * std::sqrt((1.0 + 1.0 / m) / (1.0 + 1.0 / w));
  };

  auto accepts = [&](const FrameStats& s, const Twist& mean_v, double m) {
    if (use_velocity && !((s.velocity - mean_v).norm() < velocity_threshold(m))) return false;
    if (use_reproj && !(s.reproj < sigma_r)) return false;
    return true;
  };

  std::vector<Range> raw;
  bool in_segment = true;
  int open = 0;
  Twist sum_v = stats[0].velocity;
  double sum_r = stats[0].reproj;
  Twist ref_v = Twist::Zero();
  double ref_r = 0.0;
  bool rolling_ref = false;  // closed segment too short to serve as reference

  for (std::size_t i = 1; i < n; ++i) {
    const FrameStats& s = stats[i];
    const int fi = static_cast<int>(i);
    if (in_segment) {
      const double m = static_cast<double>(fi - open);
      const Twist mean_v = sum_v / m;
      if (accepts(s, mean_v, m)) {
        sum_v += s.velocity;
        sum_r += s.reproj;
        continue;
      }
      if (!params.use_buffer) {
        // The splitting frame stays with the earlier segment.
        raw.push_back({open, fi});
        open = fi + 1;
        if (i + 1 < n) {
          sum_v = stats[i + 1].velocity;
          sum_r = stats[i + 1].reproj;
          ++i;
        }
        continue;
      }
      raw.push_back({open, fi - 1});
      ref_v = sum_v / m;
      ref_r = sum_r / m;
      rolling_ref = m < params.min_segment_len;
      in_segment = false;
      continue;
    }
    if (rolling_ref) {
      const std::size_t lo = i > static_cast<std::size_t>(params.adaptive_window) ? i - params.adaptive_window : 0;
      ref_v.setZero();
      ref_r = 0.0;
      for (std::size_t k = lo; k < i; ++k) {
        ref_v += stats[k].velocity;
        ref_r += stats[k].reproj;
      }
      ref_v /= static_cast<double>(i - lo);
      ref_r /= static_cast<double>(i - lo);
    }
    const double ref_v_norm = ref_v.norm();
    const double dv = (s.velocity - ref_v).norm();
    const double eta_v = ref_v_norm > 1e-12 ? dv / ref_v_norm : (dv > 1e-12 ? 1e12 : 0.0);
    const double dr = std::abs(s.reproj - ref_r);
    const double eta_r = ref_r > 1e-12 ? dr / ref_r : (dr > 1e-12 ? 1e12 : 0.0);
    const double eta = wv * eta_v + wr * eta_r;
    if (eta < params.eta_threshold) {
      in_segment = true;
      open = fi;
      sum_v = s.velocity;
      sum_r = s.reproj;
    }
  }
  if (in_segment && open < static_cast<int>(n)) raw.push_back({open, static_cast<int>(n) - 1});

  const std::size_t scanned = raw.size();
  SegmentationResult r = finalize_segments(n, std::move(raw), params);
  r.scanned_segments = scanned;
  r.sigma_v = sigma_v;
  r.sigma_r = sigma_r;
  return r;
}

inline SegmentationResult segment_trajectory(const BaProblem& problem,
                                             const SegmentationParams& params) {
  const std::vector<FrameStats> stats = compute_frame_stats(problem);
  return segment_by_stats(stats, params);
}

inline SegmentationResult segment_trajectory(const PoseGraph& graph,
                                             const SegmentationParams& params) {
  const std::vector<FrameStats> stats = compute_frame_stats(graph);
  return segment_by_stats(stats, params);
}

// ---------------------------------------------------------------------------
// Baseline strategies

/// Equal-length segments separated by single-frame buffers.
inline SegmentationResult segment_fixed_length(std::size_t n, int num_segments,
                                               const SegmentationParams& params) {
  params.validate();
  if (num_segments < 1) throw InvalidArgument("fixed-length segmentation needs >= 1 segment");
  std::vector<Range> raw;
  const double len = static_cast<double>(n) / num_segments;
  int start = 0;
  for (int k = 1; k <= num_segments; ++k) {
    const int end = k == num_segments ? static_cast<int>(n) : static_cast<int>(std::lround(k * len));
    int last = end - 1;
    if (params.use_buffer && k < num_segments) --last;  // splitting frame
    if (last >= start) raw.push_back({start, last});
    start = end;
  }
  return finalize_segments(n, std::move(raw), params);
}

/// Splits when the covisibility with the first frame of the open segment
/// drops under `split_threshold`; the splitting frame becomes buffer.
inline SegmentationResult segment_by_covisibility(const CovisibilityIndex& covis,
                                                  const SegmentationParams& params,
                                                  int split_threshold) {
  params.validate();
  const int n = static_cast<int>(covis.frame_count());
  std::vector<Range> raw;
  int open = 0;
  for (int i = 1; i < n; ++i) {
    if (covis.covisibility(open, i) >= split_threshold) continue;
    if (params.use_buffer) {
      raw.push_back({open, i - 1});
      open = i + 1;
      ++i;
    } else {
      raw.push_back({open, i});
      open = i + 1;
    }
  }
  if (open < n) raw.push_back({open, n - 1});
  return finalize_segments(static_cast<std::size_t>(n), std::move(raw), params);
}

// ---------------------------------------------------------------------------
// Connecting frames

/// Greedy covisibility chain from the last head frame to the first tail
/// frame: each step jumps to the latest interior frame sharing more than
/// covis_threshold landmarks with the current one.
inline std::vector<int> select_connecting_frames(const CovisibilityIndex& covis, const Range& seg,
                                                 const SegmentationParams& params) {
  const int head_last = seg.first + params.head_len - 1;
  const int tail_first = seg.last - params.tail_len + 1;
  if (seg.size() < params.head_len + params.tail_len || head_last >= tail_first) {
    throw InvalidArgument("segment too short to hold head and tail");
  }
  std::vector<int> chain;
  int cur = head_last;
  while (covis.covisibility(cur, tail_first) <= params.covis_threshold) {
    int next = -1;
    for (int f = tail_first - 1; f > cur; --f) {
      if (covis.covisibility(cur, f) > params.covis_threshold) {
        next = f;
        break;
      }
    }
    if (next < 0) {
      throw GapError(cur, "covisibility gap after frame " + std::to_string(cur) +
                              " in segment [" + std::to_string(seg.first) + ", " +
                              std::to_string(seg.last) + "]");
    }
    chain.push_back(next);
    cur = next;
  }
  return chain;
}

inline std::vector<int> select_connecting_frames(const BaProblem& problem, const Range& seg,
                                                 const SegmentationParams& params) {
  return select_connecting_frames(CovisibilityIndex(problem), seg, params);
}

struct ConnectingOutcome {
  SegmentationResult segmentation;
  std::size_t gap_fallbacks = 0;  // segments whose interior was kept entirely
};

/// Labels connecting frames in every segment. A segment whose chain breaks
/// keeps its whole interior as Connecting.
inline ConnectingOutcome assign_connecting(const CovisibilityIndex& covis,
                                           const SegmentationResult& seg,
                                           const SegmentationParams& params) {
  ConnectingOutcome out{seg, 0};
  for (const Range& s : seg.segments) {
    try {
      for (int f : select_connecting_frames(covis, s, params)) {
        out.segmentation.labels[f] = FrameLabel::Connecting;
      }
    } catch (const GapError&) {
      ++out.gap_fallbacks;
      for (int f = s.first; f <= s.last; ++f) {
        if (out.segmentation.labels[f] == FrameLabel::Interior) {
          out.segmentation.labels[f] = FrameLabel::Connecting;
        }
      }
    }
  }
  return out;
}

/// Structural invariants of a labeling; throws InvalidArgument on violation.
inline void check_partition(const SegmentationResult& r, const SegmentationParams& p) {
  const int n = static_cast<int>(r.labels.size());
  std::vector<int> cover(n, 0);
  for (const Range& s : r.segments) {
    if (s.first < 0 || s.last >= n || s.size() < p.head_len + p.tail_len + 1) {
      throw InvalidArgument("bad segment range");
    }
    for (int f = s.first; f <= s.last; ++f) {
      ++cover[f];
      const int k = f - s.first;
      const int back = s.last - f;
      const FrameLabel l = r.labels[f];
      if (k < p.head_len) {
        if (l != FrameLabel::Head) throw InvalidArgument("head label expected");
      } else if (back < p.tail_len) {
        if (l != FrameLabel::Tail) throw InvalidArgument("tail label expected");
      } else if (l != FrameLabel::Interior && l != FrameLabel::Connecting) {
        throw InvalidArgument("interior label expected");
      }
    }
  }
  for (const Range& b : r.buffers) {
    for (int f = b.first; f <= b.last; ++f) {
      ++cover[f];
      if (r.labels[f] != FrameLabel::Buffer) throw InvalidArgument("buffer label expected");
    }
  }
  for (int f = 0; f < n; ++f) {
    if (cover[f] != 1) throw InvalidArgument("frame " + std::to_string(f) + " covered " +
                                             std::to_string(cover[f]) + " times");
  }
}

}  // namespace segopt
