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

// SE(3) / Sim(3) on unit quaternions.
//
// Twist layout is (rho, phi): translational part first, rotational second.
// All perturbations are applied on the right, T <- T * exp(delta).

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "segopt/errors.hpp"

namespace segopt {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat4 = Eigen::Matrix4d;

using Twist = Vec6;

inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}

  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) { canonicalize(); }

  static Rotation from_wxyz(double w, double x, double y, double z) {
    return Rotation(Eigen::Quaterniond(w, x, y, z));
  }

  static Rotation from_matrix(const Mat3& m) {
    return Rotation(Eigen::Quaterniond(m));
  }

  static Rotation about_axis(const Vec3& axis, double angle) {
    return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
  }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }

  Mat3 matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const { return Rotation(q_.conjugate()); }

  Rotation operator*(const Rotation& other) const {
    return Rotation(q_ * other.q_);
  }

  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  /// Rotation angle in [0, pi].
  double angle() const {
    return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w()));
  }

 private:
  void canonicalize() {
    // Already-unit input is kept as is so that parse/print round trips are exact.
    if (std::abs(q_.squaredNorm() - 1.0) > 4e-16) q_.normalize();
    if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
  }

  Eigen::Quaterniond q_;
};

class Pose {
 public:
  Pose() : t_(Vec3::Zero()) {}
  Pose(const Rotation& r, const Vec3& t) : r_(r), t_(t) {}

  static Pose identity() { return Pose(); }

  static Pose from_matrix(const Mat4& m) {
    return Pose(Rotation::from_matrix(m.topLeftCorner<3, 3>()),
                m.topRightCorner<3, 1>());
  }

  const Rotation& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }

  Pose operator*(const Pose& other) const {
    return Pose(r_ * other.r_, r_ * other.t_ + t_);
  }

  Vec3 operator*(const Vec3& p) const { return r_ * p + t_; }

  Pose inverse() const {
    const Rotation ri = r_.inverse();
    return Pose(ri, -(ri * t_));
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = r_.matrix();
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

 private:
  Rotation r_;
  Vec3 t_;
};

/// Similarity transform x -> s * R * x + t.
class SimPose {
 public:
  SimPose() : t_(Vec3::Zero()), s_(1.0) {}
  SimPose(const Rotation& r, const Vec3& t, double s) : r_(r), t_(t), s_(s) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidArgument("SimPose scale must be positive and finite");
    }
  }
  explicit SimPose(const Pose& p) : r_(p.rotation()), t_(p.translation()), s_(1.0) {}

  const Rotation& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }
  double scale() const { return s_; }

  SimPose operator*(const SimPose& o) const {
    return SimPose(r_ * o.r_, s_ * (r_ * o.t_) + t_, s_ * o.s_);
  }

  Vec3 operator*(const Vec3& p) const { return s_ * (r_ * p) + t_; }

  SimPose inverse() const {
    const Rotation ri = r_.inverse();
    return SimPose(ri, -(ri * t_) / s_, 1.0 / s_);
  }

  /// Drops the scale.
  Pose to_pose() const { return Pose(r_, t_); }

 private:
  Rotation r_;
  Vec3 t_;
  double s_;
};

inline Pose relative(const Pose& a, const Pose& b) { return a.inverse() * b; }

namespace detail {

// Coefficients of the SO(3) series below switch to their Taylor expansions
// when the closed form would cancel catastrophically.
constexpr double kSmallAngle = 1e-6;
constexpr double kSeriesAngle = 1e-3;

// (1 - cos t) / t^2
inline double coef_a(double t) {
  if (t < kSeriesAngle) return 0.5 - t * t / 24.0;
  return (1.0 - std::cos(t)) / (t * t);
}

// (t - sin t) / t^3
inline double coef_b(double t) {
  if (t < kSeriesAngle) return 1.0 / 6.0 - t * t / 120.0;
  return (t - std::sin(t)) / (t * t * t);
}

// 1/t^2 - (1 + cos t) / (2 t sin t)
inline double coef_inv(double t) {
  if (t < kSeriesAngle) return 1.0 / 12.0 + t * t / 720.0;
  return 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
}

}  // namespace detail

inline Rotation so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  double k;  // sin(theta/2) / theta
  if (theta < detail::kSmallAngle) {
    k = 0.5 - theta * theta / 48.0;
  } else {
    k = std::sin(0.5 * theta) / theta;
  }
  return Rotation(Eigen::Quaterniond(std::cos(0.5 * theta), k * phi.x(),
                                     k * phi.y(), k * phi.z()));
}

/// Principal log, |phi| <= pi.
inline Vec3 so3_log(const Rotation& r) {
  const Eigen::Quaterniond& q = r.quaternion();
  const double vn = q.vec().norm();
  const double w = q.w();  // >= 0 by canonicalization
  if (vn < detail::kSmallAngle * std::max(w, 1e-300)) {
    // atan2(vn, w) / vn ~ 1/w - vn^2 / (3 w^3)
    return (2.0 / w - 2.0 * vn * vn / (3.0 * w * w * w)) * q.vec();
  }
  const double theta = 2.0 * std::atan2(vn, w);
  return (theta / vn) * q.vec();
}

inline Mat3 so3_left_jacobian(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 h = hat(phi);
  return Mat3::Identity() + detail::coef_a(t) * h + detail::coef_b(t) * h * h;
}

inline Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 h = hat(phi);
  return Mat3::Identity() - 0.5 * h + detail::coef_inv(t) * h * h;
}

inline Pose se3_exp(const Twist& xi) {
  if (!xi.allFinite()) throw InvalidArgument("se3_exp: non-finite twist");
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  return Pose(so3_exp(phi), so3_left_jacobian(phi) * rho);
}

inline Twist se3_log(const Pose& pose) {
  const double angle = pose.rotation().angle();
  if (std::abs(angle - std::numbers::pi) < 1e-6) {
    throw BranchError("se3_log: rotation angle within 1e-6 of pi");
  }
  const Vec3 phi = so3_log(pose.rotation());
  Twist xi;
  xi.head<3>() = so3_left_jacobian_inverse(phi) * pose.translation();
  xi.tail<3>() = phi;
  return xi;
}

/// Adjoint in (rho, phi) layout: exp(Ad_T xi) = T exp(xi) T^-1.
inline Mat6 adjoint(const Pose& t) {
  const Mat3 r = t.rotation().matrix();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = hat(t.translation()) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

namespace detail {

// Coupling block of the SE(3) left Jacobian.
inline Mat3 se3_q(const Vec3& rho, const Vec3& phi) {
  const double t = phi.norm();
  const double t2 = t * t;
  double c1, c2, c3;
  if (t < 0.1) {
    const double t4 = t2 * t2;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0;
  } else {
    const double s = std::sin(t), c = std::cos(t);
    c1 = (t - s) / (t2 * t);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * t - 3.0 * s + t * c) / (2.0 * t2 * t2 * t);
  }
  const Mat3 p = hat(phi);
  const Mat3 r = hat(rho);
  const Mat3 pr = p * r;
  const Mat3 rp = r * p;
  const Mat3 prp = pr * p;
  return 0.5 * r + c1 * (pr + rp + prp) + c2 * (p * pr + rp * p - 3.0 * prp) +
         c3 * (prp * p + p * prp);
}

}  // namespace detail

inline Mat6 se3_left_jacobian_inverse(const Twist& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const Mat3 jinv = so3_left_jacobian_inverse(phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = jinv;
  out.topRightCorner<3, 3>() = -jinv * detail::se3_q(rho, phi) * jinv;
  out.bottomRightCorner<3, 3>() = jinv;
  return out;
}

/// d log(T exp(d)) / d d at d = 0, where xi = log(T).
inline Mat6 se3_right_jacobian_inverse(const Twist& xi) {
  return se3_left_jacobian_inverse(-xi);
}

/// Geodesic interpolation along the shorter arc; t in [0, 1].
inline Rotation slerp(const Rotation& a, const Rotation& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidArgument("slerp: t must lie in [0, 1]");
  }
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  // a^-1 b is canonical (w >= 0), so its log is the shorter arc.
  return a * so3_exp(t * so3_log(a.inverse() * b));
}

inline Vec3 lerp(const Vec3& a, const Vec3& b, double t) {
  return a + t * (b - a);
}

inline double angle_between(const Rotation& a, const Rotation& b) {
  return (a.inverse() * b).angle();
}

}  // namespace segopt
