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
#include <random>

#include <gtest/gtest.h>

#include "oracles/dense_lm.hpp"
#include "segopt/reduction.hpp"
#include "segopt/segmentation.hpp"
#include "segopt/solver.hpp"
#include "test_util.hpp"

using namespace segopt;

namespace {

SolverConfig tight() {
  SolverConfig c;
  c.max_iterations = 200;
  c.cost_rel_tolerance = 1e-15;
  c.step_norm_tolerance = 1e-14;
  return c;
}

double pose_gap(const Pose& a, const Mat4& b) { return (a.matrix() - b).cwiseAbs().maxCoeff(); }

PoseGraph loop_triangle() {
  // Exact odometry 0->1, noisy 1->2, exact loop 0->2.
  PoseGraph g;
  const Pose step(Rotation::about_axis(Vec3::UnitZ(), 0.3), Vec3(1.0, 0.2, 0.0));
  g.frames.push_back({0, 0.0, Pose(), true});
  g.frames.push_back({1, 0.1, step, false});
  g.frames.push_back({2, 0.2, step * step, false});
  Twist noise;
  noise << 0.05, -0.03, 0.02, 0.01, -0.02, 0.03;
  g.edges.push_back({0, 1, step, Mat6::Identity(), EdgeKind::Odometry});
  g.edges.push_back({1, 2, step * se3_exp(noise), Mat6::Identity() * 2.0, EdgeKind::Odometry});
  g.edges.push_back({0, 2, step * step, Mat6::Identity() * 4.0, EdgeKind::LoopClosure});
  g.frames[2].pose = g.frames[1].pose * g.edges[1].measurement;
  return g;
}

TEST(Solver, ZeroResidualGraphStopsImmediately) {
  const PoseGraph g = testutil::straight_chain(10, 0.5, 0.05);
  const auto sol = optimize_pose_graph(g);
  EXPECT_LE(sol.report.iterations, 1);
  EXPECT_LT(sol.report.final_cost, 1e-20);
  for (std::size_t i = 0; i < g.frames.size(); ++i) {
    EXPECT_EQ(sol.poses[i].matrix(), g.frames[i].pose.matrix());
  }
}

TEST(Solver, PoseGraphMatchesDenseOracle) {
  const PoseGraph g = loop_triangle();
  const auto sol = optimize_pose_graph(g, tight());
  const oracle::Problem ref = oracle::solve(testutil::to_oracle(g));
  for (std::size_t i = 0; i < g.frames.size(); ++i) EXPECT_LT(pose_gap(sol.poses[i], ref.poses[i]), 1e-6);
  EXPECT_LE(sol.report.final_cost, sol.report.initial_cost);
  EXPECT_TRUE(sol.report.monotone());
}

TEST(Solver, BaMatchesDenseOracle) {
  const BaProblem p = testutil::small_ba(5, 20, 1.0, 0.02, 21);
  const SolverConfig cfg = tight();
  const auto sol = optimize_ba(p, cfg);
  const oracle::Problem ref = oracle::solve(testutil::to_oracle(p, cfg.ba_edge_weight));
  for (std::size_t i = 0; i < p.frames.size(); ++i) EXPECT_LT(pose_gap(sol.poses[i], ref.poses[i]), 1e-6);
  for (std::size_t l = 0; l < p.landmarks.size(); ++l) {
    EXPECT_LT((sol.landmarks[l] - ref.points[l]).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_NEAR(sol.report.final_cost, oracle::cost(ref), 1e-8 * oracle::cost(ref));
  EXPECT_TRUE(sol.report.monotone());
}

TEST(Solver, NoiselessBaStopsImmediately) {
  BaProblem p = testutil::small_ba(5, 20, 0.0, 0.0, 22);
  const auto sol = optimize_ba(p);
  EXPECT_LE(sol.report.iterations, 1);
  EXPECT_NEAR(sol.report.final_cost, 0.0, 1e-20);
}

TEST(Solver, SparseAndDensePathsAgree) {
  const BaProblem p = testutil::small_ba(40, 150, 1.0, 0.02, 23);
  SolverConfig dense = tight();
  dense.dense_block_threshold = 1000;
  SolverConfig sparse = tight();
  sparse.dense_block_threshold = 0;
  const auto a = optimize_ba(p, dense);
  const auto b = optimize_ba(p, sparse);
  EXPECT_TRUE(a.report.used_dense);
  EXPECT_FALSE(b.report.used_dense);
  for (std::size_t i = 0; i < p.frames.size(); ++i) {
    EXPECT_LT((a.poses[i].matrix() - b.poses[i].matrix()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Solver, GaugeInvariance) {
  PoseGraph g = loop_triangle();
  const double c0 = optimize_pose_graph(g, tight()).report.final_cost;
  std::mt19937_64 rng(24);
  const Pose x = testutil::random_pose(rng);
  for (Frame& f : g.frames) f.pose = x * f.pose;
  EXPECT_NEAR(optimize_pose_graph(g, tight()).report.final_cost, c0, 1e-8);
}

TEST(Solver, Deterministic) {
  const BaProblem p = testutil::small_ba(30, 100, 1.0, 0.02, 25);
  SolverConfig cfg;
  cfg.dense_block_threshold = 0;
  const auto a = optimize_ba(p, cfg);
  const auto b = optimize_ba(p, cfg);
  EXPECT_EQ(a.report.cost_trace, b.report.cost_trace);
  for (std::size_t i = 0; i < p.frames.size(); ++i) EXPECT_EQ(a.poses[i].matrix(), b.poses[i].matrix());
}

TEST(Solver, HuberKernelConverges) {
  BaProblem p = testutil::small_ba(8, 40, 1.0, 0.02, 26);
  p.observations[3].pixel += Vec2(80, -60);
  SolverConfig cfg;
  cfg.robust_kernel = RobustKernel::Huber;
  cfg.huber_delta = 2.0;
  const auto sol = optimize_ba(p, cfg);
  EXPECT_LT(sol.report.final_cost, sol.report.initial_cost);
  EXPECT_TRUE(sol.report.monotone());
}

TEST(Solver, ConfigValidation) {
  SolverConfig c;
  c.max_iterations = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SolverConfig{};
  c.cost_rel_tolerance = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Solver, ReducedSolveLeavesInteriorUntouched) {
  PoseGraph g = testutil::straight_chain(30, 0.5, 0.02);
  std::mt19937_64 rng(27);
  for (std::size_t i = 1; i < g.frames.size(); ++i) {
    g.frames[i].pose = g.frames[i].pose * se3_exp(testutil::random_twist(rng, 0.05, 0.01));
  }
  g.edges.push_back({0, 29, relative(testutil::straight_chain(30, 0.5, 0.02).frames[0].pose,
                                     testutil::straight_chain(30, 0.5, 0.02).frames[29].pose),
                     Mat6::Identity(), EdgeKind::LoopClosure});
  SegmentationParams sp;
  const SegmentationResult seg = finalize_segments(30, {{0, 13}, {15, 29}}, sp);
  const ReducedPoseGraph red = reduce_pose_graph(g, seg);
  const auto sol = optimize_reduced(g, red);
  for (int i = 0; i < 30; ++i) {
    if (seg.labels[i] == FrameLabel::Interior) {
      EXPECT_EQ(sol.poses[i].matrix(), g.frames[i].pose.matrix()) << i;
    }
  }
  const oracle::Problem ref = oracle::solve(testutil::to_oracle(red.graph));
  const auto tight_sol = optimize_reduced(g, red, tight());
  for (std::size_t k = 0; k < red.kept_frames.size(); ++k) {
    EXPECT_LT(pose_gap(tight_sol.poses[red.kept_frames[k]], ref.poses[k]), 1e-6);
  }
}

TEST(Solver, AllBufferReductionEqualsFullSolve) {
  const BaProblem p = testutil::small_ba(12, 60, 1.0, 0.02, 28);
  const auto full = optimize_ba(p);
  const ReducedBaProblem red = reduce_ba(p, SegmentationResult::all_buffer(p.frames.size()));
  const auto sub = optimize_reduced(p, red);
  EXPECT_EQ(full.report.cost_trace, sub.report.cost_trace);
  for (std::size_t i = 0; i < p.frames.size(); ++i) EXPECT_EQ(full.poses[i].matrix(), sub.poses[i].matrix());
}

}  // namespace
