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

// Levenberg-Marquardt over SE(3) poses (right perturbation) and Euclidean
// landmarks. Landmarks are eliminated with the Schur complement; the reduced
// camera system is factorized with a sparse LDLT (AMD ordering) or a dense
// LDLT for small problems.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#ifdef SEGOPT_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/graph_model.hpp"
#include "segopt/reduction.hpp"

namespace segopt {

enum class RobustKernel { None, Huber };

struct SolverConfig {
  int max_iterations = 50;
  double cost_rel_tolerance = 1e-6;
  double step_norm_tolerance = 1e-8;
  double initial_lambda = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double max_lambda = 1e8;
  RobustKernel robust_kernel = RobustKernel::None;
  double huber_delta = 1.0;  // in whitened residual units
  // Scale on the information of relative-pose edges inside a BA solve.
  double ba_edge_weight = 0.01;
  // Below this many free pose blocks the reduced system is solved densely.
  int dense_block_threshold = 60;

  void validate() const {
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (!(cost_rel_tolerance > 0.0) || !(step_norm_tolerance > 0.0)) {
      throw InvalidArgument("solver tolerances must be > 0");
    }
    if (!(initial_lambda > 0.0) || !(lambda_up > 1.0) || !(lambda_down > 1.0)) {
      throw InvalidArgument("bad lambda schedule");
    }
    if (!(huber_delta > 0.0)) throw InvalidArgument("huber_delta must be > 0");
    if (!(ba_edge_weight >= 0.0)) throw InvalidArgument("ba_edge_weight must be >= 0");
  }
};

struct SolveReport {
  int iterations = 0;
  int rejected_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> cost_trace;  // initial cost, then each accepted step
  std::vector<double> lambda_trace;
  double wall_time = 0.0;    // seconds
  double linear_time = 0.0;  // seconds spent factorizing / solving
  std::string termination;
  std::size_t behind_camera = 0;     // observations dropped at the final state
  std::size_t frozen_landmarks = 0;  // landmarks without usable observations
  bool used_dense = false;

  bool monotone() const {
    for (std::size_t i = 1; i < cost_trace.size(); ++i) {
      if (!(cost_trace[i] < cost_trace[i - 1])) return false;
    }
    return true;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Residual weight and cost for a squared whitened norm.
inline std::pair<double, double> robustify(double s2, const SolverConfig& c) {
  if (c.robust_kernel == RobustKernel::None) return {1.0, s2};
  const double d = c.huber_delta;
  if (s2 <= d * d) return {1.0, s2};
  const double s = std::sqrt(s2);
  return {d / s, 2.0 * d * s - d * d};
}

/// Block-sparse symmetric matrix over 6x6 pose blocks, lower triangle only,
/// mirrored into a compressed Eigen matrix with a fixed pattern.
class PoseBlockSystem {
 public:
  explicit PoseBlockSystem(int num_blocks) : n_(num_blocks) { diag_index(num_blocks); }

  /// Registers block (row, col); returns its slot. Requires row >= col.
  int add_pattern(int row, int col) {
    const std::uint64_t key = (static_cast<std::uint64_t>(row) << 32) | static_cast<std::uint32_t>(col);
    auto [it, inserted] = slots_.try_emplace(key, static_cast<int>(coords_.size()));
    if (inserted) coords_.emplace_back(row, col);
    return it->second;
  }

  int slot(int row, int col) const {
    const std::uint64_t key = (static_cast<std::uint64_t>(row) << 32) | static_cast<std::uint32_t>(col);
    return slots_.at(key);
  }

  void finalize_pattern() {
    blocks_.assign(coords_.size(), Mat6::Zero());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(coords_.size() * 36);
    for (const auto& [r, c] : coords_) {
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          if (r == c && j > i) continue;
          trip.emplace_back(6 * r + i, 6 * c + j, 1.0);
        }
      }
    }
    matrix_.resize(6 * n_, 6 * n_);
    matrix_.setFromTriplets(trip.begin(), trip.end());
    matrix_.makeCompressed();
    offsets_.assign(coords_.size() * 36, -1);
    for (std::size_t b = 0; b < coords_.size(); ++b) {
      const auto [r, c] = coords_[b];
      for (int j = 0; j < 6; ++j) {
        const int col = 6 * c + j;
        for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, col); it; ++it) {
          const int row = static_cast<int>(it.row());
          if (row < 6 * r || row >= 6 * r + 6) continue;
          offsets_[b * 36 + (row - 6 * r) * 6 + j] =
              static_cast<int>(&it.valueRef() - matrix_.valuePtr());
        }
      }
    }
  }

  int num_blocks() const { return n_; }
  std::size_t num_slots() const { return coords_.size(); }
  Mat6& block(int slot) { return blocks_[slot]; }
  const Mat6& block(int slot) const { return blocks_[slot]; }
  std::pair<int, int> coords(int slot) const { return coords_[slot]; }
  void zero() {
    for (Mat6& b : blocks_) b.setZero();
  }

  /// Writes blocks (with damping added on the diagonal) into the sparse matrix.
  const Eigen::SparseMatrix<double>& sparse(const Eigen::VectorXd& damping) {
    double* v = matrix_.valuePtr();
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto [r, c] = coords_[b];
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          const int off = offsets_[b * 36 + i * 6 + j];
          if (off < 0) continue;
          double x = blocks_[b](i, j);
          if (r == c && i == j) x += damping[6 * r + i];
          v[off] = x;
        }
      }
    }
    return matrix_;
  }

  Eigen::MatrixXd dense(const Eigen::VectorXd& damping) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(6 * n_, 6 * n_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto [r, c] = coords_[b];
      m.block<6, 6>(6 * r, 6 * c) = blocks_[b];
      if (r != c) m.block<6, 6>(6 * c, 6 * r) = blocks_[b].transpose();
    }
    m.diagonal() += damping;
    return m;
  }

  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d(6 * n_);
    for (int r = 0; r < n_; ++r) d.segment<6>(6 * r) = blocks_[diag_[r]].diagonal();
    return d;
  }

 private:
  void diag_index(int n) {
    diag_.resize(n);
    for (int r = 0; r < n; ++r) diag_[r] = add_pattern(r, r);
  }

  int n_;
  std::vector<int> diag_;
  std::unordered_map<std::uint64_t, int> slots_;
  std::vector<std::pair<int, int>> coords_;
  std::vector<Mat6> blocks_;
  std::vector<int> offsets_;
  Eigen::SparseMatrix<double> matrix_;
};

// Sparse Cholesky of the damped camera system with a fixed AMD ordering. The
// symbolic analysis is done once, since the pattern never changes.
class SparseFactor {
 public:
  SparseFactor() {
#ifdef SEGOPT_HAVE_CHOLMOD
    cholmod_common& c = llt_.cholmod();
    c.nmethods = 1;
    c.method[0].ordering = CHOLMOD_AMD;
    c.postorder = 1;
    c.print = 0;  // an indefinite matrix is a rejected step, not a warning
#endif
  }

  bool factorize(const Eigen::SparseMatrix<double>& s) {
#ifdef SEGOPT_HAVE_CHOLMOD
    if (!analyzed_) llt_.analyzePattern(s);
    analyzed_ = true;
    llt_.factorize(s);
    return llt_.info() == Eigen::Success;
#else
    if (!analyzed_) ldlt_.analyzePattern(s);
    analyzed_ = true;
    ldlt_.factorize(s);
    return ldlt_.info() == Eigen::Success && (ldlt_.vectorD().array() > 0.0).all();
#endif
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
#ifdef SEGOPT_HAVE_CHOLMOD
    return llt_.solve(b);
#else
    return ldlt_.solve(b);
#endif
  }

 private:
#ifdef SEGOPT_HAVE_CHOLMOD
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt_;
#else
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
#endif
  bool analyzed_ = false;
};

struct WeightedEdge {
  PoseEdge edge;
  double weight = 1.0;
};

/// Generic LM engine shared by the pose-graph and BA entry points.
class LmEngine {
 public:
  LmEngine(std::vector<Pose> poses, std::vector<bool> fixed, std::vector<Vec3> points,
           std::vector<WeightedEdge> edges, std::vector<Observation> obs, Camera cam,
           const SolverConfig& config)
      : poses_(std::move(poses)),
        fixed_(std::move(fixed)),
        points_(std::move(points)),
        edges_(std::move(edges)),
        obs_(std::move(obs)),
        cam_(cam),
        cfg_(config) {
    cfg_.validate();
    build_structure();
  }

  const std::vector<Pose>& poses() const { return poses_; }
  const std::vector<Vec3>& points() const { return points_; }

  SolveReport run() {
    const auto t0 = Clock::now();
    SolveReport rep;
    double cost = evaluate(poses_, points_, nullptr);
    rep.initial_cost = cost;
    rep.cost_trace.push_back(cost);
    double lambda = cfg_.initial_lambda;

    if (num_free_ == 0 && num_free_points_ == 0) {
      rep.termination = "no_free_variables";
    } else if (cost == 0.0) {
      rep.termination = "zero_cost";
    } else {
      rep.termination = "max_iterations";
      for (int it = 0; it < cfg_.max_iterations; ++it) {
        ++rep.iterations;
        linearize();
        bool accepted = false;
        bool stop = false;
        while (!accepted) {
          const auto ts = Clock::now();
          const bool ok = solve(lambda);
          rep.linear_time += seconds_since(ts);
          if (!ok) {
            lambda *= cfg_.lambda_up;
            if (lambda > cfg_.max_lambda) {
              throw NumericalFailure("normal equations not positive-definite with lambda > " +
                                     std::to_string(cfg_.max_lambda) + " (" +
                                     std::to_string(num_free_) + " free poses, " +
                                     std::to_string(num_free_points_) + " free landmarks)");
            }
            continue;
          }
          if (step_norm() <= cfg_.step_norm_tolerance * (state_norm() + cfg_.step_norm_tolerance)) {
            rep.termination = "step_tolerance";
            stop = true;
            break;
          }
          std::vector<Pose> cand_poses = poses_;
          std::vector<Vec3> cand_points = points_;
          apply_step(cand_poses, cand_points);
          const double new_cost = evaluate(cand_poses, cand_points, nullptr);
          if (std::isfinite(new_cost) && new_cost < cost) {
            const double rel = (cost - new_cost) / cost;
            poses_ = std::move(cand_poses);
            points_ = std::move(cand_points);
            cost = new_cost;
            rep.cost_trace.push_back(cost);
            rep.lambda_trace.push_back(lambda);
            lambda = std::max(lambda / cfg_.lambda_down, 1e-12);
            accepted = true;
            if (rel < cfg_.cost_rel_tolerance) {
              rep.termination = "cost_tolerance";
              stop = true;
            } else if (cost == 0.0) {
              rep.termination = "zero_cost";
              stop = true;
            }
          } else {
            ++rep.rejected_steps;
            lambda *= cfg_.lambda_up;
            if (lambda > cfg_.max_lambda) {
              rep.termination = "lambda_limit";
              stop = true;
              break;
            }
          }
        }
        if (stop) break;
      }
    }
    std::size_t behind = 0;
    rep.final_cost = evaluate(poses_, points_, &behind);
    rep.behind_camera = behind;
    rep.frozen_landmarks = frozen_count_;
    rep.used_dense = use_dense_;
    rep.wall_time = seconds_since(t0);
    return rep;
  }

  double evaluate(const std::vector<Pose>& poses, const std::vector<Vec3>& points,
                  std::size_t* behind) const {
    double cost = 0.0;
    for (const WeightedEdge& we : edges_) {
      const Twist r = pose_edge_residual(we.edge, poses[we.edge.from], poses[we.edge.to]);
      cost += robustify(we.weight * r.dot(we.edge.information * r), cfg_).second;
    }
    std::size_t dropped = 0;
    for (const Observation& o : obs_) {
      const auto uv = project(cam_, poses[o.frame], points[o.landmark]);
      if (!uv) {
        ++dropped;
        continue;
      }
      const Vec2 r = *uv - o.pixel;
      cost += robustify(r.dot(o.information * r), cfg_).second;
    }
    if (behind) *behind = dropped;
    return cost;
  }

 private:
  void build_structure() {
    const int np = static_cast<int>(poses_.size());
    var_.assign(np, -1);
    for (int i = 0; i < np; ++i) {
      if (!fixed_[i]) var_[i] = num_free_++;
    }
    system_ = std::make_unique<PoseBlockSystem>(num_free_);
    use_dense_ = num_free_ < cfg_.dense_block_threshold;

    edge_slot_.resize(edges_.size(), -1);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const int a = var_[edges_[e].edge.from];
      const int b = var_[edges_[e].edge.to];
      if (a >= 0 && b >= 0) edge_slot_[e] = system_->add_pattern(std::max(a, b), std::min(a, b));
    }

    // Landmark -> observation lists; landmarks with no observation stay fixed.
    lm_obs_.assign(points_.size(), {});
    for (std::size_t k = 0; k < obs_.size(); ++k) lm_obs_[obs_[k].landmark].push_back(static_cast<int>(k));
    lm_pair_slots_.assign(points_.size(), {});
    for (std::size_t l = 0; l < points_.size(); ++l) {
      if (lm_obs_[l].empty()) continue;
      ++num_free_points_;
      const auto& ol = lm_obs_[l];
      auto& slots = lm_pair_slots_[l];
      for (std::size_t i = 0; i < ol.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          const int a = var_[obs_[ol[i]].frame];
          const int b = var_[obs_[ol[j]].frame];
          if (a < 0 || b < 0) {
            slots.push_back(-1);
          } else {
            slots.push_back(system_->add_pattern(std::max(a, b), std::min(a, b)));
          }
        }
      }
    }
    system_->finalize_pattern();

    obs_w_.resize(obs_.size());
    obs_valid_.assign(obs_.size(), 0);
    v_.resize(points_.size());
    bl_.resize(points_.size());
    vinv_.resize(points_.size());
    hll_diag_.assign(points_.size(), Vec3::Zero());
    lm_active_.assign(points_.size(), 0);
    bp_.resize(6 * num_free_);
    dp_.resize(6 * num_free_);
    dl_.assign(points_.size(), Vec3::Zero());
  }

  void linearize() {
    system_->zero();
    bp_.setZero();
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const WeightedEdge& we = edges_[e];
      const PoseEdgeLinearization lin =
          linearize_pose_edge(we.edge, poses_[we.edge.from], poses_[we.edge.to]);
      const double s2 = we.weight * lin.residual.dot(we.edge.information * lin.residual);
      const Mat6 info = robustify(s2, cfg_).first * we.weight * we.edge.information;
      const int a = var_[we.edge.from];
      const int b = var_[we.edge.to];
      if (a >= 0) {
        const Eigen::Matrix<double, 6, 6> jti = lin.d_from.transpose() * info;
        system_->block(system_->slot(a, a)) += jti * lin.d_from;
        bp_.segment<6>(6 * a) += jti * lin.residual;
      }
      if (b >= 0) {
        const Eigen::Matrix<double, 6, 6> jtj = lin.d_to.transpose() * info;
        system_->block(system_->slot(b, b)) += jtj * lin.d_to;
        bp_.segment<6>(6 * b) += jtj * lin.residual;
      }
      if (a >= 0 && b >= 0) {
        // Stored block is H(max, min).
        const Mat6 hab = lin.d_from.transpose() * info * lin.d_to;
        system_->block(edge_slot_[e]) += a > b ? Mat6(hab) : Mat6(hab.transpose());
      }
    }

    frozen_count_ = 0;
    for (std::size_t l = 0; l < points_.size(); ++l) {
      v_[l].setZero();
      bl_[l].setZero();
      lm_active_[l] = 0;
    }
    for (std::size_t k = 0; k < obs_.size(); ++k) {
      const Observation& o = obs_[k];
      const auto lin = linearize_reprojection(cam_, poses_[o.frame], points_[o.landmark], o.pixel);
      obs_valid_[k] = lin.has_value();
      if (!lin) continue;
      const double w = robustify(lin->residual.dot(o.information * lin->residual), cfg_).first;
      const Mat2 info = w * o.information;
      const Eigen::Matrix<double, 3, 2> jlt = lin->d_point.transpose() * info;
      v_[o.landmark] += jlt * lin->d_point;
      bl_[o.landmark] += jlt * lin->residual;
      lm_active_[o.landmark] = 1;
      const int a = var_[o.frame];
      if (a >= 0) {
        const Eigen::Matrix<double, 6, 2> jpt = lin->d_pose.transpose() * info;
        system_->block(system_->slot(a, a)) += jpt * lin->d_pose;
        bp_.segment<6>(6 * a) += jpt * lin->residual;
        obs_w_[k] = jpt * lin->d_point;
      }
    }
    for (std::size_t l = 0; l < points_.size(); ++l) {
      if (!lm_obs_[l].empty() && !lm_active_[l]) ++frozen_count_;
    }
    hpp_diag_ = system_->diagonal();
    for (std::size_t l = 0; l < points_.size(); ++l) hll_diag_[l] = v_[l].diagonal();
    base_blocks_.resize(system_->num_slots());
    for (std::size_t s = 0; s < system_->num_slots(); ++s) base_blocks_[s] = system_->block(static_cast<int>(s));
  }

  /// Builds and solves the damped Schur system; false if not positive-definite.
  bool solve(double lambda) {
    // Restore the undamped Hpp and subtract the landmark contributions.
    for (std::size_t s = 0; s < base_blocks_.size(); ++s) system_->block(static_cast<int>(s)) = base_blocks_[s];
    Eigen::VectorXd g = bp_;
    for (std::size_t l = 0; l < points_.size(); ++l) {
      if (!lm_active_[l]) continue;
      Mat3 vd = v_[l];
      for (int i = 0; i < 3; ++i) vd(i, i) += lambda * std::clamp(hll_diag_[l][i], 1e-6, 1e32);
      Eigen::LDLT<Mat3> ldlt(vd);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
        lm_active_[l] = 2;  // treated as frozen for this step
        continue;
      }
      vinv_[l] = ldlt.solve(Mat3::Identity());
      const auto& ol = lm_obs_[l];
      // U_i = W_i V^-1
      std::vector<int> fr;
      std::vector<Eigen::Matrix<double, 6, 3>> u;
      fr.reserve(ol.size());
      u.reserve(ol.size());
      std::vector<int> idx;
      idx.reserve(ol.size());
      for (std::size_t i = 0; i < ol.size(); ++i) {
        const int k = ol[i];
        const int a = var_[obs_[k].frame];
        if (!obs_valid_[k] || a < 0) {
          fr.push_back(-1);
          u.emplace_back(Eigen::Matrix<double, 6, 3>::Zero());
          continue;
        }
        fr.push_back(a);
        u.emplace_back(obs_w_[k] * vinv_[l]);
        g.segment<6>(6 * a) -= u.back() * bl_[l];
      }
      const auto& slots = lm_pair_slots_[l];
      std::size_t p = 0;
      for (std::size_t i = 0; i < ol.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++p) {
          if (fr[i] < 0 || fr[j] < 0) continue;
          const int a = fr[i], b = fr[j];
          // Stored block is S(max, min).
          if (a >= b) {
            system_->block(slots[p]).noalias() -= u[i] * obs_w_[ol[j]].transpose();
          } else {
            system_->block(slots[p]).noalias() -= u[j] * obs_w_[ol[i]].transpose();
          }
        }
      }
    }

    Eigen::VectorXd damping(6 * num_free_);
    for (int i = 0; i < 6 * num_free_; ++i) damping[i] = lambda * std::clamp(hpp_diag_[i], 1e-6, 1e32);

    if (num_free_ > 0) {
      if (use_dense_) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(system_->dense(damping));
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) return false;
        dp_ = ldlt.solve(-g);
      } else {
        const Eigen::SparseMatrix<double>& s = system_->sparse(damping);
        if (!factor_.factorize(s)) return false;
        dp_ = factor_.solve(-g);
      }
      if (!dp_.allFinite()) return false;
    }

    // Back-substitution for landmarks: dl = V^-1 (-bl - sum W_i^T dp_i).
    for (std::size_t l = 0; l < points_.size(); ++l) {
      if (lm_active_[l] != 1) {
        dl_[l].setZero();
        if (lm_active_[l] == 2) lm_active_[l] = 1;
        continue;
      }
      Vec3 rhs = -bl_[l];
      for (int k : lm_obs_[l]) {
        const int a = var_[obs_[k].frame];
        if (!obs_valid_[k] || a < 0) continue;
        rhs -= obs_w_[k].transpose() * dp_.segment<6>(6 * a);
      }
      dl_[l] = vinv_[l] * rhs;
    }
    return true;
  }

  double step_norm() const {
    double s = num_free_ > 0 ? dp_.squaredNorm() : 0.0;
    for (const Vec3& d : dl_) s += d.squaredNorm();
    return std::sqrt(s);
  }

  double state_norm() const {
    double s = 0.0;
    for (const Pose& p : poses_) s += p.translation().squaredNorm();
    for (const Vec3& x : points_) s += x.squaredNorm();
    return std::sqrt(s);
  }

  void apply_step(std::vector<Pose>& poses, std::vector<Vec3>& points) const {
    for (std::size_t i = 0; i < poses.size(); ++i) {
      if (var_[i] < 0) continue;
      poses[i] = poses[i] * se3_exp(dp_.segment<6>(6 * var_[i]));
    }
    for (std::size_t l = 0; l < points.size(); ++l) points[l] += dl_[l];
  }

  std::vector<Pose> poses_;
  std::vector<bool> fixed_;
  std::vector<Vec3> points_;
  std::vector<WeightedEdge> edges_;
  std::vector<Observation> obs_;
  Camera cam_;
  SolverConfig cfg_;

  std::vector<int> var_;
  int num_free_ = 0;
  int num_free_points_ = 0;
  bool use_dense_ = false;
  std::unique_ptr<PoseBlockSystem> system_;
  std::vector<int> edge_slot_;
  std::vector<std::vector<int>> lm_obs_;
  std::vector<std::vector<int>> lm_pair_slots_;

  std::vector<Eigen::Matrix<double, 6, 3>> obs_w_;
  std::vector<char> obs_valid_;
  std::vector<Mat3> v_, vinv_;
  std::vector<Vec3> bl_, hll_diag_;
  std::vector<char> lm_active_;
  std::vector<Mat6> base_blocks_;
  Eigen::VectorXd bp_, dp_, hpp_diag_;
  std::vector<Vec3> dl_;
  std::size_t frozen_count_ = 0;

  SparseFactor factor_;
};

inline std::vector<bool> fixed_mask(const std::vector<Frame>& frames) {
  std::vector<bool> m(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) m[i] = frames[i].is_fixed;
  return m;
}

}  // namespace detail

struct PoseGraphSolution {
  std::vector<Pose> poses;
  SolveReport report;
};

struct BaSolution {
  std::vector<Pose> poses;
  std::vector<Vec3> landmarks;
  SolveReport report;
};

/// Minimizes sum e^T * Info * e over all pose edges.
inline PoseGraphSolution optimize_pose_graph(const PoseGraph& graph, const SolverConfig& config = {}) {
  validate(graph);
  std::vector<detail::WeightedEdge> edges;
  edges.reserve(graph.edges.size());
  for (const PoseEdge& e : graph.edges) edges.push_back({e, 1.0});
  detail::LmEngine engine(poses_of(graph.frames), detail::fixed_mask(graph.frames), {},
                          std::move(edges), {}, Camera{}, config);
  PoseGraphSolution out;
  out.report = engine.run();
  out.poses = engine.poses();
  return out;
}

/// Minimizes reprojection error plus `ba_edge_weight` times the problem's
/// relative-pose edge terms.
inline BaSolution optimize_ba(const BaProblem& problem, const SolverConfig& config = {}) {
  validate(problem);
  std::vector<detail::WeightedEdge> edges;
  if (config.ba_edge_weight > 0.0) {
    edges.reserve(problem.edges.size());
    for (const PoseEdge& e : problem.edges) edges.push_back({e, config.ba_edge_weight});
  }
  detail::LmEngine engine(poses_of(problem.frames), detail::fixed_mask(problem.frames),
                          positions_of(problem.landmarks), std::move(edges), problem.observations,
                          problem.camera, config);
  BaSolution out;
  out.report = engine.run();
  out.poses = engine.poses();
  out.landmarks = engine.points();
  return out;
}

/// Solves the reduced graph and writes kept poses back into a copy of the
/// original trajectory; pruned frames are left untouched.
inline PoseGraphSolution optimize_reduced(const PoseGraph& original, const ReducedPoseGraph& reduced,
                                          const SolverConfig& config = {}) {
  PoseGraphSolution sub = optimize_pose_graph(reduced.graph, config);
  PoseGraphSolution out;
  out.report = std::move(sub.report);
  out.poses = poses_of(original.frames);
  for (std::size_t i = 0; i < reduced.kept_frames.size(); ++i) {
    out.poses[reduced.kept_frames[i]] = sub.poses[i];
  }
  return out;
}

inline BaSolution optimize_reduced(const BaProblem& original, const ReducedBaProblem& reduced,
                                   const SolverConfig& config = {}) {
  BaSolution sub = optimize_ba(reduced.problem, config);
  BaSolution out;
  out.report = std::move(sub.report);
  out.poses = poses_of(original.frames);
  out.landmarks = positions_of(original.landmarks);
  for (std::size_t i = 0; i < reduced.kept_frames.size(); ++i) {
    out.poses[reduced.kept_frames[i]] = sub.poses[i];
  }
  for (std::size_t i = 0; i < reduced.kept_landmarks.size(); ++i) {
    out.landmarks[reduced.kept_landmarks[i]] = sub.landmarks[i];
  }
  return out;
}

}  // namespace segopt
