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

#include <algorithm>

#include "segopt/metrics.hpp"
#include "segopt/segmentation.hpp"
#include "segopt/solver.hpp"
#include "segopt/synth.hpp"

namespace {

using namespace segopt;

WorldConfig noiseless_circle() {
  WorldConfig c;
  c.frames = 100;
  c.odom_rot_sigma = c.odom_trans_sigma = c.pixel_sigma = 0.0;
  return c;
}

bool same_world(const SyntheticWorld& a, const SyntheticWorld& b) {
  if (a.problem.frames.size() != b.problem.frames.size() || a.problem.edges.size() != b.problem.edges.size() ||
      a.problem.landmarks.size() != b.problem.landmarks.size() ||
      a.problem.observations.size() != b.problem.observations.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.problem.frames.size(); ++i) {
    if (a.problem.frames[i].pose.matrix() != b.problem.frames[i].pose.matrix()) return false;
  }
  for (std::size_t i = 0; i < a.problem.edges.size(); ++i) {
    if (a.problem.edges[i].measurement.matrix() != b.problem.edges[i].measurement.matrix()) return false;
  }
  for (std::size_t i = 0; i < a.problem.landmarks.size(); ++i) {
    if (a.problem.landmarks[i].position != b.problem.landmarks[i].position) return false;
  }
  for (std::size_t i = 0; i < a.problem.observations.size(); ++i) {
    if (a.problem.observations[i].pixel != b.problem.observations[i].pixel) return false;
  }
  return true;
}

TEST(Synth, NoiselessWorldIsExact) {
  const SyntheticWorld w = generate(noiseless_circle());
  ASSERT_EQ(w.problem.frames.size(), 100u);
  for (int i = 0; i < 100; ++i) {
    EXPECT_LT(se3_log(w.problem.frames[i].pose.inverse() * w.ground_truth[i]).norm(), 1e-9) << i;
  }
  EXPECT_LT(total_cost_ba(w.problem).cost, 1e-12);
  EXPECT_LT(total_cost_pose_graph(w.graph), 1e-20);
  EXPECT_LT(ate_rmse(poses_of(w.problem.frames), w.ground_truth), 1e-9);
}

TEST(Synth, DeterministicBySeed) {
  WorldConfig c;
  c.frames = 120;
  c.seed = 11;
  EXPECT_TRUE(same_world(generate(c), generate(c)));
  WorldConfig d = c;
  d.seed = 12;
  EXPECT_FALSE(same_world(generate(c), generate(d)));
}

TEST(Synth, FramesStayInsideImage) {
  WorldConfig c;
  c.frames = 80;
  c.shape = Shape::FigureEight;
  const SyntheticWorld w = generate(c);
  for (const Observation& o : w.problem.observations) {
    const auto uv = project(c.camera, w.ground_truth[o.frame], w.true_landmarks[o.landmark]);
    ASSERT_TRUE(uv.has_value());
    EXPECT_GE(uv->x(), 0.0);
    EXPECT_LT(uv->x(), c.image_width);
    EXPECT_GE(uv->y(), 0.0);
    EXPECT_LT(uv->y(), c.image_height);
  }
}

TEST(Synth, DriftGrowsAndOptimizationHelps) {
  WorldConfig c;
  c.frames = 300;
  c.shape = Shape::FigureEight;
  c.auto_loops = 1;
  c.landmark_density = 0.0;
  const SyntheticWorld w = generate(c);
  ASSERT_GE(w.graph.edges.size(), 300u);
  const auto dead = poses_of(w.problem.frames);
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 50; ++i) early += (dead[i].translation() - w.ground_truth[i].translation()).norm();
  for (int i = 250; i < 300; ++i) late += (dead[i].translation() - w.ground_truth[i].translation()).norm();
  EXPECT_GT(late, early);
  const PoseGraphSolution sol = optimize_pose_graph(w.graph, SolverConfig{});
  EXPECT_LT(ate_rmse(sol.poses, w.ground_truth), ate_rmse(dead, w.ground_truth));
}

TEST(Synth, UnobservedFrameIsNamed) {
  WorldConfig c = noiseless_circle();
  c.max_depth = 0.6;
  try {
    generate(c);
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    EXPECT_NE(std::string(e.what()).find("frame "), std::string::npos);
  }
}

TEST(Synth, ConfigValidation) {
  WorldConfig c;
  c.frames = 1;
  EXPECT_THROW(generate(c), InvalidArgument);
  c = WorldConfig();
  c.pixel_sigma = -1.0;
  EXPECT_THROW(generate(c), InvalidArgument);
  c = WorldConfig();
  c.events = {{EventKind::NoiseBurst, 10, 0, 2.0}};
  EXPECT_THROW(generate(c), InvalidArgument);
  c.events = {{EventKind::NoiseBurst, 10, 3, 1.0}};
  EXPECT_THROW(generate(c), InvalidArgument);
}

TEST(InjectEvents, EmptyListIsIdentity) {
  WorldConfig c;
  c.frames = 60;
  const SyntheticWorld w = generate(c);
  EXPECT_TRUE(same_world(w, inject_events(w, {})));
}

TEST(InjectEvents, OutOfRangeFrame) {
  WorldConfig c;
  c.frames = 60;
  const SyntheticWorld w = generate(c);
  EXPECT_THROW(inject_events(w, {{EventKind::VelocitySpike, 60, 2, 3.0}}), InvalidArgument);
  EXPECT_THROW(inject_events(w, {{EventKind::VelocitySpike, -1, 2, 3.0}}), InvalidArgument);
}

TEST(InjectEvents, VelocitySpikeStandsOut) {
  WorldConfig c;
  c.frames = 100;
  const SyntheticWorld w = inject_events(generate(c), {{EventKind::VelocitySpike, 50, 1, 10.0}});
  const auto stats = compute_frame_stats(w.problem);
  std::vector<double> speed;
  for (const FrameStats& s : stats) speed.push_back(s.velocity.head<3>().norm());
  std::vector<double> sorted = speed;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  EXPECT_GT(speed[50] - median, 5.0 * median);
}

TEST(InjectEvents, NoiseBurstRaisesReprojection) {
  WorldConfig c;
  c.frames = 100;
  const SyntheticWorld w = inject_events(generate(c), {{EventKind::NoiseBurst, 30, 7, 6.0}});
  const auto stats = compute_frame_stats(w.problem);
  auto mean = [&](int a, int b) {
    double s = 0.0;
    for (int i = a; i < b; ++i) s += stats[i].reproj;
    return s / (b - a);
  };
  EXPECT_GT(mean(30, 37), mean(16, 23));
  EXPECT_GT(mean(30, 37), mean(44, 51));
}

TEST(InjectEvents, OnlyEventWindowChanges) {
  WorldConfig c;
  c.frames = 100;
  const SyntheticWorld base = generate(c);
  const SyntheticWorld w = inject_events(base, {{EventKind::NoiseBurst, 30, 7, 6.0},
                                                {EventKind::VelocitySpike, 70, 3, 4.0}});
  auto in_window = [](int f) { return (f >= 30 && f < 37) || (f >= 70 && f < 73); };
  ASSERT_EQ(base.problem.edges.size(), w.problem.edges.size());
  for (std::size_t k = 0; k < w.problem.edges.size(); ++k) {
    const bool same = base.problem.edges[k].measurement.matrix() == w.problem.edges[k].measurement.matrix();
    EXPECT_EQ(same, !in_window(w.problem.edges[k].to)) << k;
  }
  ASSERT_EQ(base.problem.observations.size(), w.problem.observations.size());
  for (std::size_t k = 0; k < w.problem.observations.size(); ++k) {
    const Observation& o = w.problem.observations[k];
    if (!in_window(o.frame)) EXPECT_EQ(o.pixel, base.problem.observations[k].pixel);
  }
  const auto sb = compute_frame_stats(base.graph);
  const auto sw = compute_frame_stats(w.graph);
  for (int f = 0; f < 100; ++f) {
    if (!in_window(f)) EXPECT_LT((sb[f].velocity - sw[f].velocity).norm(), 1e-9) << f;
  }
}

}  // namespace
