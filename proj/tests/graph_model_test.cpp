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

#include "oracles/lie_oracle.hpp"
#include "segopt/graph_model.hpp"
#include "test_util.hpp"

using namespace segopt;

namespace {

Pose perturb(const Pose& p, const Twist& d) { return Pose::from_matrix(p.matrix() * oracle::exp4(d)); }

TEST(GraphModel, ConsistentEdgeHasZeroResidual) {
  std::mt19937_64 rng(10);
  const Pose ti = testutil::random_pose(rng);
  const Pose m = testutil::random_pose(rng);
  const PoseEdge e{0, 1, m, Mat6::Identity(), EdgeKind::Odometry};
  EXPECT_LT(pose_edge_residual(e, ti, ti * m).norm(), 1e-9);
  const PoseEdge id{0, 1, Pose(), Mat6::Identity(), EdgeKind::Odometry};
  EXPECT_LT(pose_edge_residual(id, ti, ti).norm(), 1e-12);
}

TEST(GraphModel, ResidualFirstOrder) {
  std::mt19937_64 rng(11);
  const Pose ti = testutil::random_pose(rng);
  const PoseEdge e{0, 1, Pose(), Mat6::Identity(), EdgeKind::Odometry};
  for (double s : {1e-2, 1e-3, 1e-4}) {
    const Twist d = s * testutil::random_twist(rng, 1.0, 1.0);
    EXPECT_LT((pose_edge_residual(e, ti, ti * se3_exp(d)) - d).norm(), 1e-12 + d.squaredNorm());
  }
}

TEST(GraphModel, PoseEdgeJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Pose ti = testutil::random_pose(rng);
    const Pose m = testutil::random_pose(rng);
    const Pose tj = ti * m * se3_exp(testutil::random_twist(rng, 0.5, 0.5));
    const PoseEdge e{0, 1, m, Mat6::Identity(), EdgeKind::Odometry};
    const auto lin = linearize_pose_edge(e, ti, tj);
    Mat6 fi, fj;
    for (int c = 0; c < 6; ++c) {
      Twist d = Twist::Zero();
      d[c] = 1e-6;
      fi.col(c) = (pose_edge_residual(e, perturb(ti, d), tj) - pose_edge_residual(e, perturb(ti, -d), tj)) / 2e-6;
      fj.col(c) = (pose_edge_residual(e, ti, perturb(tj, d)) - pose_edge_residual(e, ti, perturb(tj, -d))) / 2e-6;
    }
    worst = std::max({worst, testutil::max_rel_error(lin.d_from, fi), testutil::max_rel_error(lin.d_to, fj)});
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(GraphModel, ReprojectionJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(13);
  const Camera cam;
  double worst = 0.0;
  int tested = 0;
  while (tested < 100) {
    const Pose t = testutil::random_pose(rng);
    std::normal_distribution<double> n(0.0, 1.0);
    const Vec3 l = t * Vec3(n(rng), n(rng), 3.0 + std::abs(n(rng)) * 5.0);
    const Vec2 px(300, 200);
    const auto lin = linearize_reprojection(cam, t, l, px);
    if (!lin) continue;
    ++tested;
    Eigen::Matrix<double, 2, 6> fp;
    Eigen::Matrix<double, 2, 3> fl;
    for (int c = 0; c < 6; ++c) {
      Twist d = Twist::Zero();
      d[c] = 1e-6;
      fp.col(c) = (*project(cam, perturb(t, d), l) - *project(cam, perturb(t, -d), l)) / 2e-6;
    }
    for (int c = 0; c < 3; ++c) {
      Vec3 d = Vec3::Zero();
      d[c] = 1e-6;
      fl.col(c) = (*project(cam, t, l + d) - *project(cam, t, l - d)) / 2e-6;
    }
    worst = std::max({worst, testutil::max_rel_error(lin->d_pose, fp), testutil::max_rel_error(lin->d_point, fl)});
    EXPECT_LT((lin->residual - (*project(cam, t, l) - px)).norm(), 1e-12);
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(GraphModel, Projection) {
  const Camera cam{500, 500, 320, 320};
  EXPECT_TRUE(project(cam, Pose(), Vec3(0, 0, 5))->isApprox(Vec2(320, 320)));
  EXPECT_TRUE(project(cam, Pose(), Vec3(1, 0, 5))->isApprox(Vec2(420, 320)));
  EXPECT_FALSE(project(cam, Pose(), Vec3(0, 0, -1)).has_value());
  EXPECT_FALSE(project(cam, Pose(), Vec3(0, 0, 1e-7)).has_value());
}

BaProblem covis_problem() {
  BaProblem p;
  for (int i = 0; i < 3; ++i) p.frames.push_back({i, 0.1 * i, Pose(), i == 0});
  for (int l = 0; l < 40; ++l) p.landmarks.push_back({l, Vec3(0, 0, 5)});
  // frame 0 sees 0..29, frame 1 sees 13..39, frame 2 sees 30..39
  for (int l = 0; l < 30; ++l) p.observations.push_back({0, l, Vec2::Zero(), Mat2::Identity()});
  for (int l = 13; l < 40; ++l) p.observations.push_back({1, l, Vec2::Zero(), Mat2::Identity()});
  for (int l = 30; l < 40; ++l) p.observations.push_back({2, l, Vec2::Zero(), Mat2::Identity()});
  return p;
}

TEST(GraphModel, Covisibility) {
  const BaProblem p = covis_problem();
  EXPECT_EQ(covisibility(p, 0, 1), 17);
  EXPECT_EQ(covisibility(p, 1, 0), 17);
  EXPECT_EQ(covisibility(p, 0, 2), 0);
  EXPECT_EQ(covisibility(p, 1, 1), 27);
  EXPECT_THROW(covisibility(p, 0, 3), InvalidArgument);
  EXPECT_THROW(covisibility(p, -1, 0), InvalidArgument);
}

TEST(GraphModel, CostMatchesPerResidualSum) {
  const BaProblem p = testutil::small_ba(5, 20, 1.0, 0.05, 3);
  const oracle::Problem o = testutil::to_oracle(p, 0.0);
  EXPECT_NEAR(total_cost_ba(p).cost, oracle::cost(o), 1e-9 * oracle::cost(o));

  PoseGraph g = testutil::straight_chain(4);
  EXPECT_EQ(total_cost_pose_graph(g), 0.0);
  Twist d;
  d << 0.1, 0.0, 0.0, 0.0, 0.0, 0.0;
  g.frames[3].pose = g.frames[3].pose * se3_exp(d);
  EXPECT_NEAR(total_cost_pose_graph(g), 0.01, 1e-15);
}

TEST(GraphModel, CostCountsBehindCamera) {
  BaProblem p = covis_problem();
  p.frames[1].pose = Pose(Rotation::about_axis(Vec3::UnitX(), 3.0), Vec3::Zero());
  EXPECT_EQ(total_cost_ba(p).behind_camera, 27u);
}

TEST(GraphModel, CostInvariantUnderLandmarkRelabel) {
  BaProblem p = testutil::small_ba(5, 20, 1.0, 0.05, 4);
  const double c0 = total_cost_ba(p).cost;
  const int m = static_cast<int>(p.landmarks.size());
  std::reverse(p.landmarks.begin(), p.landmarks.end());
  for (int i = 0; i < m; ++i) p.landmarks[i].id = i;
  for (Observation& o : p.observations) o.landmark = m - 1 - o.landmark;
  EXPECT_NEAR(total_cost_ba(p).cost, c0, 1e-9 * c0);
}

TEST(GraphModel, Validation) {
  PoseGraph g = testutil::straight_chain(4);
  EXPECT_NO_THROW(validate(g));
  PoseGraph bad = g;
  bad.frames[2].timestamp = bad.frames[1].timestamp;
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = g;
  bad.edges[0].information(0, 1) = 1.0;
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = g;
  bad.edges[0].information(0, 0) = -1.0;
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = g;
  bad.edges[0].to = bad.edges[0].from;
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = g;
  bad.frames[1].is_fixed = true;
  EXPECT_THROW(validate(bad), InvalidArgument);

  BaProblem p = covis_problem();
  EXPECT_THROW(validate(p), InvalidArgument);  // landmarks 0..12 seen once
  BaProblem dup = testutil::small_ba(3, 5, 0.0, 0.0, 1);
  EXPECT_NO_THROW(validate(dup));
  dup.observations.push_back(dup.observations.front());
  EXPECT_THROW(validate(dup), InvalidArgument);
}

}  // namespace
