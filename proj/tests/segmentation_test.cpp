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
#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <set>

#include "oracles/scan_replay.hpp"
#include "segopt/segmentation.hpp"
#include "segopt/synth.hpp"
#include "test_util.hpp"

namespace {

using namespace segopt;

std::string label_string(const SegmentationResult& r) {
  std::string s;
  for (FrameLabel l : r.labels) {
    switch (l) {
      case FrameLabel::Head: s += 'H'; break;
      case FrameLabel::Interior: s += 'I'; break;
      case FrameLabel::Tail: s += 'T'; break;
      case FrameLabel::Buffer: s += 'B'; break;
      case FrameLabel::Connecting: s += 'C'; break;
    }
  }
  return s;
}

// Noisy constant-velocity statistics with decaying spikes of 10 sigma_v.
std::vector<FrameStats> spiked_stats(int n, const std::vector<int>& spikes, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<FrameStats> st(n);
  for (int i = 0; i < n; ++i) {
    Twist v;
    v << 2.0, 0, 0, 0, 0, 0.1;
    for (int k = 0; k < 6; ++k) v[k] += 0.01 * nd(rng);
    for (int c : spikes) {
      if (i >= c && i < c + 6) v[0] += 10.0 * 0.1 * (1.0 - (i - c) / 6.0);
    }
    st[i].velocity = v;
    st[i].reproj = 1.0 + 0.05 * nd(rng);
    st[i].observations = 50;
  }
  return st;
}

oracle::ScanInput to_scan(const std::vector<FrameStats>& st, const SegmentationParams& p) {
  oracle::ScanInput in;
  for (const FrameStats& s : st) {
    in.velocity.push_back(s.velocity);
    in.reproj.push_back(s.reproj);
  }
  in.sigma_v = *p.sigma_v;
  in.sigma_r = *p.sigma_r;
  in.min_len = p.min_segment_len;
  return in;
}

SegmentationParams fixed_thresholds() {
  SegmentationParams p;
  p.sigma_v = 0.1;
  p.sigma_r = 1.5;
  return p;
}

TEST(FrameStats, ConstantVelocityAndZeroReproj) {
  const PoseGraph g = testutil::straight_chain(50, 0.5, 0.02);
  const auto st = compute_frame_stats(g);
  for (const FrameStats& s : st) {
    EXPECT_LT((s.velocity - st[1].velocity).norm(), 1e-9);
    EXPECT_EQ(s.reproj, 0.0);
  }
  const Pose inc(Rotation::about_axis(Vec3::UnitZ(), 0.02), Vec3(0.5, 0, 0));
  EXPECT_LT((st[1].velocity - se3_log(inc) / 0.1).norm(), 1e-9);
}

TEST(FrameStats, HandSummedPixelOffsets) {
  BaProblem p = testutil::small_ba(4, 30, 0.0, 0.0, 3);
  const double offsets[] = {1.0, 3.0, 2.0, 4.0, 0.5};
  std::vector<double> sum(p.frames.size(), 0.0);
  std::vector<int> cnt(p.frames.size(), 0);
  int k = 0;
  for (Observation& o : p.observations) {
    const auto uv = project(p.camera, p.frames[o.frame].pose, p.landmarks[o.landmark].position);
    if (!uv) continue;
    const double d = offsets[k++ % 5];
    o.pixel = *uv + Vec2(0.6 * d, 0.8 * d);
    sum[o.frame] += d;
    ++cnt[o.frame];
  }
  const auto st = compute_frame_stats(p);
  for (std::size_t f = 0; f < st.size(); ++f) {
    EXPECT_EQ(st[f].observations, cnt[f]);
    if (cnt[f] > 0) EXPECT_NEAR(st[f].reproj, sum[f] / cnt[f], 1e-12);
  }
}

TEST(FrameStats, DuplicateTimestampRejected) {
  PoseGraph g = testutil::straight_chain(5);
  g.frames[3].timestamp = g.frames[2].timestamp;
  EXPECT_THROW(compute_frame_stats(g), InvalidArgument);
}

TEST(Segmentation, ConstantVelocityIsOneSegment) {
  const PoseGraph g = testutil::straight_chain(100, 0.5, 0.01);
  const SegmentationResult r = segment_trajectory(g, SegmentationParams{});
  ASSERT_EQ(r.segments.size(), 1u);
  EXPECT_EQ(r.segments[0], (Range{0, 99}));
  EXPECT_TRUE(r.buffers.empty());
  EXPECT_EQ(r.count(FrameLabel::Head), 2u);
  EXPECT_EQ(r.count(FrameLabel::Tail), 2u);
}

TEST(Segmentation, SpikeMatchesReplayOracle) {
  const auto st = spiked_stats(100, {50}, 1);
  const SegmentationParams p = fixed_thresholds();
  const SegmentationResult r = segment_by_stats(st, p);
  EXPECT_EQ(label_string(r), oracle::replay_scan(to_scan(st, p)));
  ASSERT_GE(r.segments.size(), 2u);
  EXPECT_EQ(r.segments[0].last, 49);
  ASSERT_FALSE(r.buffers.empty());
  EXPECT_EQ(r.buffers[0].first, 50);
  EXPECT_GT(r.buffers[0].last, 50);
}

TEST(Segmentation, TwoSpikesGiveThreeSegments) {
  const auto st = spiked_stats(100, {30, 70}, 2);
  const SegmentationParams p = fixed_thresholds();
  const SegmentationResult r = segment_by_stats(st, p);
  EXPECT_EQ(label_string(r), oracle::replay_scan(to_scan(st, p)));
  EXPECT_EQ(r.segments.size(), 3u);
  EXPECT_EQ(r.buffers.size(), 2u);
  EXPECT_NO_THROW(check_partition(r, p));
}

TEST(Segmentation, ReplayOracleOnRandomStats) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> spikes;
    std::uniform_int_distribution<int> pos(5, 190);
    for (int k = 0; k < 4; ++k) spikes.push_back(pos(rng));
    const auto st = spiked_stats(200, spikes, 100 + trial);
    SegmentationParams p = fixed_thresholds();
    p.sigma_v = 0.05 + 0.01 * (trial % 5);
    EXPECT_EQ(label_string(segment_by_stats(st, p)), oracle::replay_scan(to_scan(st, p))) << trial;
  }
}

TEST(Segmentation, ShortInputIsSingleBuffer) {
  const PoseGraph g = testutil::straight_chain(5);
  const SegmentationResult r = segment_trajectory(g, SegmentationParams{});
  EXPECT_TRUE(r.segments.empty());
  ASSERT_EQ(r.buffers.size(), 1u);
  EXPECT_EQ(r.buffers[0], (Range{0, 4}));
}

TEST(Segmentation, ParamsValidated) {
  SegmentationParams p;
  p.alpha = 0.5;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = SegmentationParams{};
  p.min_segment_len = 4;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = SegmentationParams{};
  p.sigma_v = 0.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

WorldConfig event_world(unsigned seed) {
  WorldConfig c;
  c.frames = 200;
  c.shape = Shape::Circle;
  c.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pos(30, 160);
  c.events = {{EventKind::VelocitySpike, pos(rng), 6, 10.0}};
  return c;
}

TEST(Segmentation, PartitionDeterminismAndBufferSeparation) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const SyntheticWorld w = generate(event_world(seed));
    const SegmentationParams p;
    const SegmentationResult a = segment_trajectory(w.problem, p);
    const SegmentationResult b = segment_trajectory(w.problem, p);
    EXPECT_EQ(label_string(a), label_string(b));
    EXPECT_NO_THROW(check_partition(a, p));
    for (std::size_t s = 1; s < a.segments.size(); ++s) {
      EXPECT_GE(a.segments[s].first - a.segments[s - 1].last, 2) << "segments must not abut";
    }
  }
}

// Counted on the scan's segments: the length filter can turn one short
// segment into buffer at a low threshold and keep it at a higher one.
TEST(Segmentation, MonotoneInThresholds) {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    WorldConfig c = event_world(seed);
    c.events.push_back({EventKind::NoiseBurst, 100, 6, 4.0});
    const SyntheticWorld w = generate(c);
    const auto st = compute_frame_stats(w.problem);
    const double sv = adaptive_sigma_v(st, SegmentationParams{}.adaptive_window);
    const double sr = adaptive_sigma_r(st);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double m = 1.0; m <= 64.0; m *= 1.5) {
      SegmentationParams p;
      p.sigma_v = sv * m;
      p.sigma_r = sr * m;
      const std::size_t count = segment_by_stats(st, p).scanned_segments;
      EXPECT_LE(count, prev) << "seed " << seed << " scale " << m;
      prev = count;
    }
  }
}

TEST(Segmentation, SpikeRecallOnEventWorlds) {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const WorldConfig c = event_world(seed);
    const SyntheticWorld w = generate(c);
    const SegmentationParams p;
    const auto st = compute_frame_stats(w.problem);
    const int center = c.events[0].center;
    const double sv = adaptive_sigma_v(st, p.adaptive_window);
    ASSERT_GT(velocity_deviation(st, p.adaptive_window)[center], 5.0 * sv) << seed;
    const SegmentationResult r = segment_by_stats(st, p);
    bool hit = false;
    for (const Range& s : r.segments) {
      const int closing = s.last + 1;
      if (std::abs(closing - center) <= p.min_segment_len) hit = true;
    }
    EXPECT_TRUE(hit) << "seed " << seed << " center " << center;
  }
}

TEST(Segmentation, NoBufferSegmentsAbut) {
  auto st = spiked_stats(100, {}, 1);
  for (int i = 50; i < 100; ++i) st[i].velocity[0] += 1.0;  // lasting step
  SegmentationParams p = fixed_thresholds();
  p.use_buffer = false;
  const SegmentationResult r = segment_by_stats(st, p);
  EXPECT_TRUE(r.buffers.empty());
  ASSERT_EQ(r.segments.size(), 2u);
  EXPECT_EQ(r.segments[0], (Range{0, 50}));
  EXPECT_EQ(r.segments[1], (Range{51, 99}));
}

TEST(Segmentation, FixedLengthSplitsEvenly) {
  const SegmentationResult r = segment_fixed_length(100, 4, SegmentationParams{});
  ASSERT_EQ(r.segments.size(), 4u);
  EXPECT_EQ(r.segments[0], (Range{0, 23}));
  EXPECT_EQ(r.segments[3], (Range{75, 99}));
  EXPECT_EQ(r.buffers.size(), 3u);
  EXPECT_THROW(segment_fixed_length(100, 0, SegmentationParams{}), InvalidArgument);
}

// Frame i sees landmarks [step*i, step*i + width).
BaProblem corridor(int frames, int width, int step, int gap_at = -1) {
  BaProblem p;
  int offset = 0;
  for (int i = 0; i < frames; ++i) {
    p.frames.push_back({i, 0.1 * i, Pose(), i == 0});
    if (i == gap_at) offset += 1000;
    for (int k = 0; k < width; ++k) {
      p.observations.push_back({i, offset + step * i + k, Vec2::Zero(), Mat2::Identity()});
    }
  }
  int max_id = 0;
  for (const Observation& o : p.observations) max_id = std::max(max_id, o.landmark);
  for (int l = 0; l <= max_id; ++l) p.landmarks.push_back({l, Vec3::Zero()});
  return p;
}

std::vector<int> brute_force_chain(const BaProblem& p, const Range& seg, int head, int tail, int thr) {
  auto covis = [&](int a, int b) {
    std::set<int> la, lb;
    for (const Observation& o : p.observations) {
      if (o.frame == a) la.insert(o.landmark);
      if (o.frame == b) lb.insert(o.landmark);
    }
    int n = 0;
    for (int l : la) n += lb.count(l);
    return n;
  };
  std::vector<int> chain;
  int cur = seg.first + head - 1;
  const int tail_first = seg.last - tail + 1;
  while (covis(cur, tail_first) <= thr) {
    int best = -1;
    for (int f = cur + 1; f < tail_first; ++f) {
      if (covis(cur, f) > thr) best = f;
    }
    if (best < 0) return {-1};
    chain.push_back(best);
    cur = best;
  }
  return chain;
}

TEST(Connecting, EmptyChainWhenHeadSeesTail) {
  const BaProblem p = corridor(10, 100, 10);
  SegmentationParams params;
  const Range seg{0, 7};  // head end 1, tail start 6: share 50
  EXPECT_TRUE(select_connecting_frames(p, seg, params).empty());
}

TEST(Connecting, CorridorMatchesBruteForce) {
  const BaProblem p = corridor(60, 50, 5);  // neighbours 3 apart share 35
  SegmentationParams params;
  const Range seg{0, 59};
  const auto chain = select_connecting_frames(p, seg, params);
  EXPECT_EQ(chain, brute_force_chain(p, seg, params.head_len, params.tail_len, params.covis_threshold));
  ASSERT_FALSE(chain.empty());
  EXPECT_EQ(chain[0], 4);
  for (std::size_t k = 1; k < chain.size(); ++k) EXPECT_EQ(chain[k] - chain[k - 1], 3);
}

TEST(Connecting, GapRaisesAndFallsBack) {
  const BaProblem p = corridor(40, 50, 5, 20);
  SegmentationParams params;
  EXPECT_THROW(select_connecting_frames(p, Range{0, 39}, params), GapError);

  SegmentationResult seg = segment_fixed_length(40, 1, params);
  const ConnectingOutcome out = assign_connecting(CovisibilityIndex(p), seg, params);
  EXPECT_EQ(out.gap_fallbacks, 1u);
  EXPECT_EQ(out.segmentation.count(FrameLabel::Interior), 0u);
  EXPECT_EQ(out.segmentation.count(FrameLabel::Connecting), 36u);
  EXPECT_NO_THROW(check_partition(out.segmentation, params));
}

}  // namespace
