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

// Deterministic synthetic worlds. Every random draw is keyed by (seed,
// stream, item) so changing one edge or observation never shifts the noise of
// another; events therefore stay local.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/graph_model.hpp"

namespace segopt {

enum class Shape { Line, Circle, FigureEight, RandomWalk };

inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::Line: return "line";
    case Shape::Circle: return "circle";
    case Shape::FigureEight: return "figure-eight";
    case Shape::RandomWalk: return "random-walk";
  }
  return "?";
}

inline Shape parse_shape(const std::string& s) {
  if (s == "line") return Shape::Line;
  if (s == "circle") return Shape::Circle;
  if (s == "figure-eight" || s == "figure8") return Shape::FigureEight;
  if (s == "random-walk") return Shape::RandomWalk;
  throw InvalidArgument("unknown trajectory shape '" + s + "'");
}

enum class EventKind { VelocitySpike, NoiseBurst };

inline const char* to_string(EventKind k) {
  return k == EventKind::VelocitySpike ? "velocity-spike" : "noise-burst";
}

inline EventKind parse_event_kind(const std::string& s) {
  if (s == "velocity-spike") return EventKind::VelocitySpike;
  if (s == "noise-burst") return EventKind::NoiseBurst;
  throw InvalidArgument("unknown event kind '" + s + "'");
}

/// A velocity spike scales the odometry translation of the frames in
/// [center, center + duration) by a factor decaying linearly from
/// `magnitude` towards 1; ground truth is unaffected. A noise burst scales
/// pixel and odometry noise over the same window.
struct Event {
  EventKind kind = EventKind::VelocitySpike;
  int center = 0;
  int duration = 1;
  double magnitude = 2.0;
};

struct LoopSpec {
  int a = 0;
  int b = 0;
  double rot_sigma = 0.002;    // rad
  double trans_sigma = 0.01;   // m
};

struct WorldConfig {
  int frames = 100;
  Shape shape = Shape::Circle;
  double speed = 2.0;             // m/s
  double rate = 5.0;              // Hz
  double landmark_density = 10.0; // per meter of path; 0 gives a pose-graph-only world
  Camera camera;
  int image_width = 640;
  int image_height = 480;
  double odom_rot_sigma = 0.002;   // rad
  double odom_trans_sigma = 0.01;  // m
  double pixel_sigma = 1.0;        // px
  std::vector<LoopSpec> loops;
  int auto_loops = 0;              // extra loops picked at revisited places
  double loop_rot_sigma = 0.002;
  double loop_trans_sigma = 0.01;
  std::vector<Event> events;
  std::uint64_t seed = 1;
  double lateral_min = 3.0;        // landmark offset from the path, m
  double lateral_max = 8.0;
  double height_min = -1.5;
  double height_max = 2.5;
  double max_depth = 15.0;

  void validate() const {
    if (frames < 2) throw InvalidArgument("world needs at least 2 frames");
    if (!(speed > 0.0) || !(rate > 0.0)) throw InvalidArgument("speed and rate must be > 0");
    if (landmark_density < 0.0) throw InvalidArgument("landmark density must be >= 0");
    if (odom_rot_sigma < 0.0 || odom_trans_sigma < 0.0 || pixel_sigma < 0.0 ||
        loop_rot_sigma < 0.0 || loop_trans_sigma < 0.0) {
      throw InvalidArgument("noise standard deviations must be >= 0");
    }
    if (!(camera.fx > 0.0 && camera.fy > 0.0)) throw InvalidArgument("camera focal lengths must be > 0");
    if (image_width <= 0 || image_height <= 0) throw InvalidArgument("image size must be > 0");
    if (auto_loops < 0) throw InvalidArgument("auto_loops must be >= 0");
    for (const LoopSpec& l : loops) {
      if (l.a < 0 || l.b < 0 || l.a >= frames || l.b >= frames || l.a == l.b) {
        throw InvalidArgument("loop closure frames out of range");
      }
      if (l.rot_sigma < 0.0 || l.trans_sigma < 0.0) throw InvalidArgument("loop noise must be >= 0");
    }
    for (const Event& e : events) {
      if (e.center < 0 || e.center >= frames) {
        throw InvalidArgument("event center frame " + std::to_string(e.center) + " out of range");
      }
      if (e.duration < 1) throw InvalidArgument("event duration must be >= 1");
      if (!(e.magnitude > 1.0)) throw InvalidArgument("event magnitude must be > 1");
    }
  }
};

struct SyntheticWorld {
  WorldConfig config;
  std::vector<Pose> ground_truth;
  std::vector<Vec3> true_landmarks;
  BaProblem problem;  // initial estimates from dead reckoning
  PoseGraph graph;    // same frames and edges, no landmarks

  std::vector<double> timestamps() const {
    std::vector<double> t;
    for (const Frame& f : problem.frames) t.push_back(f.timestamp);
    return t;
  }
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum Stream : std::uint64_t { kOdometry = 1, kLoop, kLandmark, kPixel, kShape };

inline std::mt19937_64 keyed_rng(std::uint64_t seed, Stream stream, std::uint64_t item) {
  return std::mt19937_64(splitmix(splitmix(seed ^ splitmix(stream)) + item));
}

inline Twist gaussian_twist(std::mt19937_64& rng, double trans, double rot) {
  std::normal_distribution<double> n(0.0, 1.0);
  Twist xi;
  for (int i = 0; i < 3; ++i) xi[i] = trans * n(rng);
  for (int i = 3; i < 6; ++i) xi[i] = rot * n(rng);
  return xi;
}

inline Mat6 twist_information(double trans, double rot) {
  Mat6 info = Mat6::Identity();
  if (trans > 0.0) info.topLeftCorner<3, 3>() *= 1.0 / (trans * trans);
  if (rot > 0.0) info.bottomRightCorner<3, 3>() *= 1.0 / (rot * rot);
  return info;
}

/// Dense polyline of the unscaled shape; z is up.
inline std::vector<Vec3> shape_polyline(const WorldConfig& c) {
  constexpr int kSamples = 20000;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<Vec3> pts;
  pts.reserve(kSamples + 1);
  if (c.shape == Shape::RandomWalk) {
    auto rng = keyed_rng(c.seed, kShape, 0);
    std::normal_distribution<double> n(0.0, 1.0);
    double heading = 0.0, curvature = 0.0;
    Vec3 p = Vec3::Zero();
    const double ds = 1.0 / kSamples;
    for (int i = 0; i <= kSamples; ++i) {
      pts.push_back(p);
      curvature = 0.999 * curvature + 0.4 * n(rng) * std::sqrt(ds);
      heading += 40.0 * curvature * ds;
      p += ds * Vec3(std::cos(heading), std::sin(heading), 0.0);
    }
    return pts;
  }
  for (int i = 0; i <= kSamples; ++i) {
    const double u = static_cast<double>(i) / kSamples;
    const double th = kTwoPi * u;
    switch (c.shape) {
      case Shape::Line: pts.emplace_back(u, 0.0, 0.0); break;
      case Shape::Circle: pts.emplace_back(std::sin(th), 1.0 - std::cos(th), 0.0); break;
      // Lemniscate of Gerono, started at the crossing point so the trajectory
      // returns to its start.
      case Shape::FigureEight: pts.emplace_back(std::sin(th), std::sin(th) * std::cos(th), 0.0); break;
      case Shape::RandomWalk: break;
    }
  }
  return pts;
}

/// Camera looking along the path tangent: z forward, x right, y down.
inline Rotation heading_rotation(const Vec3& tangent) {
  const Vec3 z = tangent.normalized();
  const Vec3 up = Vec3::UnitZ();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Rotation::from_matrix(r);
}

struct PathSampler {
  std::vector<Vec3> pts;
  std::vector<double> arc;  // cumulative length after scaling

  PathSampler(std::vector<Vec3> raw, double total_length) : pts(std::move(raw)) {
    arc.assign(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double k = total_length / arc.back();
    for (Vec3& p : pts) p *= k;
    for (double& a : arc) a *= k;
  }

  double length() const { return arc.back(); }

  // Position and unit tangent at arc length s, with a gentle vertical swell.
  std::pair<Vec3, Vec3> at(double s) const {
    s = std::clamp(s, 0.0, arc.back());
    auto it = std::upper_bound(arc.begin(), arc.end(), s);
    std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - arc.begin(), 1), pts.size() - 1);
    const double seg = arc[i] - arc[i - 1];
    const double f = seg > 0.0 ? (s - arc[i - 1]) / seg : 0.0;
    Vec3 p = pts[i - 1] + f * (pts[i] - pts[i - 1]);
    Vec3 t = pts[i] - pts[i - 1];
    constexpr double kWave = 60.0;
    constexpr double kAmp = 0.5;
    const double w = 2.0 * std::numbers::pi / kWave;
    p.z() += kAmp * std::sin(w * s);
    t = t.normalized();
    t.z() += kAmp * w * std::cos(w * s);
    return {p, t.normalized()};
  }
};

inline double spike_factor(const std::vector<Event>& events, int frame) {
  double f = 1.0;
  for (const Event& e : events) {
    if (e.kind != EventKind::VelocitySpike || frame < e.center || frame >= e.center + e.duration) continue;
    f *= 1.0 + (e.magnitude - 1.0) * (1.0 - static_cast<double>(frame - e.center) / e.duration);
  }
  return f;
}

inline double noise_factor(const std::vector<Event>& events, int frame) {
  double f = 1.0;
  for (const Event& e : events) {
    if (e.kind == EventKind::NoiseBurst && frame >= e.center && frame < e.center + e.duration) {
      f *= e.magnitude;
    }
  }
  return f;
}

/// Pairs revisiting a place: close in space, far apart in time. Candidate
/// pairs are clustered by place (both ends within half the minimum gap) and
/// the tightest pair of each cluster is a loop site.
inline std::vector<std::pair<int, int>> find_revisits(const std::vector<Pose>& gt, int count) {
  const int n = static_cast<int>(gt.size());
  const int min_gap = std::max(30, n / 5);
  struct Cand {
    int a, b;
    double d;
  };
  std::vector<Cand> sites;
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a + min_gap <= b; ++a) {
      const double d = (gt[a].translation() - gt[b].translation()).norm();
      if (d >= 2.0 || angle_between(gt[a].rotation(), gt[b].rotation()) >= 2.0) continue;
      bool merged = false;
      for (Cand& s : sites) {
        if (std::abs(s.a - a) < min_gap / 2 && std::abs(s.b - b) < min_gap / 2) {
          if (d < s.d) s = {a, b, d};
          merged = true;
          break;
        }
      }
      if (!merged) sites.push_back({a, b, d});
    }
  }
  std::sort(sites.begin(), sites.end(), [](const Cand& x, const Cand& y) {
    return x.b != y.b ? x.b < y.b : x.a < y.a;
  });
  std::vector<std::pair<int, int>> out;
  if (sites.empty() || count <= 0) return out;
  const int k = std::min<int>(count, static_cast<int>(sites.size()));
  for (int i = 0; i < k; ++i) {
    const std::size_t idx =
        k == 1 ? sites.size() - 1 : static_cast<std::size_t>(i) * (sites.size() - 1) / (k - 1);
    out.emplace_back(sites[idx].a, sites[idx].b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

inline SyntheticWorld generate(const WorldConfig& config) {
  config.validate();
  using namespace detail;
  const int n = config.frames;
  const double dt = 1.0 / config.rate;
  const double length = config.speed * dt * (n - 1);
  const PathSampler path(shape_polyline(config), length);

  SyntheticWorld w;
  w.config = config;
  w.ground_truth.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto [p, t] = path.at(config.speed * dt * i);
    w.ground_truth.emplace_back(heading_rotation(t), p);
  }

  BaProblem& prob = w.problem;
  prob.camera = config.camera;

  // Odometry.
  for (int i = 0; i + 1 < n; ++i) {
    const int to = i + 1;
    const double nf = noise_factor(config.events, to);
    auto rng = keyed_rng(config.seed, kOdometry, static_cast<std::uint64_t>(i));
    const Twist noise = gaussian_twist(rng, nf * config.odom_trans_sigma, nf * config.odom_rot_sigma);
    const Pose truth = relative(w.ground_truth[i], w.ground_truth[to]);
    Pose meas = truth * se3_exp(noise);
    const double sf = spike_factor(config.events, to);
    if (sf != 1.0) meas = Pose(meas.rotation(), sf * meas.translation());
    prob.edges.push_back({i, to, meas, twist_information(config.odom_trans_sigma, config.odom_rot_sigma),
                          EdgeKind::Odometry});
  }

  // Dead reckoning.
  std::vector<Pose> est(n);
  est[0] = w.ground_truth[0];
  for (int i = 0; i + 1 < n; ++i) est[i + 1] = est[i] * prob.edges[i].measurement;
  for (int i = 0; i < n; ++i) prob.frames.push_back({i, i * dt, est[i], i == 0});

  // Loop closures.
  std::vector<LoopSpec> loops = config.loops;
  for (const auto& [a, b] : find_revisits(w.ground_truth, config.auto_loops)) {
    loops.push_back({a, b, config.loop_rot_sigma, config.loop_trans_sigma});
  }
  for (std::size_t k = 0; k < loops.size(); ++k) {
    const LoopSpec& l = loops[k];
    auto rng = keyed_rng(config.seed, kLoop, (static_cast<std::uint64_t>(l.a) << 32) | static_cast<std::uint32_t>(l.b));
    const Pose meas = relative(w.ground_truth[l.a], w.ground_truth[l.b]) *
                      se3_exp(gaussian_twist(rng, l.trans_sigma, l.rot_sigma));
    prob.edges.push_back({l.a, l.b, meas, twist_information(l.trans_sigma, l.rot_sigma), EdgeKind::LoopClosure});
  }

  // Landmarks and observations.
  if (config.landmark_density > 0.0) {
    // The far end is padded by the viewing depth; the last frames look past it.
    const double lo = -5.0, hi = length + std::max(5.0, config.max_depth);
    const int count = static_cast<int>(std::lround(config.landmark_density * std::max(hi - lo, 1.0)));
    std::vector<int> seen(n, 0);
    for (int j = 0; j < count; ++j) {
      auto rng = keyed_rng(config.seed, kLandmark, static_cast<std::uint64_t>(j));
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      const double s = lo + (hi - lo) * u01(rng);
      const auto [p, t] = path.at(s);
      Vec3 side = t.cross(Vec3::UnitZ());
      if (side.norm() < 1e-9) side = Vec3::UnitY();
      side.normalize();
      const double lateral = config.lateral_min + (config.lateral_max - config.lateral_min) * u01(rng);
      const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
      const double height = config.height_min + (config.height_max - config.height_min) * u01(rng);
      const double along = s < 0.0 ? s : (s > length ? s - length : 0.0);
      const Vec3 x = p + along * t + sign * lateral * side + height * Vec3::UnitZ();

      std::vector<Observation> obs;
      int first = -1;
      for (int i = 0; i < n; ++i) {
        const Vec3 pc = w.ground_truth[i].inverse() * x;
        if (pc.z() < 0.5 || pc.z() > config.max_depth) continue;
        const auto uv = project(config.camera, w.ground_truth[i], x);
        if (!uv || uv->x() < 0.0 || uv->y() < 0.0 || uv->x() >= config.image_width ||
            uv->y() >= config.image_height) {
          continue;
        }
        if (first < 0) first = i;
        obs.push_back({i, 0, *uv, Mat2::Identity()});
      }
      if (obs.size() < 2) continue;
      const int id = static_cast<int>(prob.landmarks.size());
      for (Observation& o : obs) {
        const double sigma = config.pixel_sigma * noise_factor(config.events, o.frame);
        auto prng = keyed_rng(config.seed, kPixel,
                              (static_cast<std::uint64_t>(j) << 24) ^ static_cast<std::uint64_t>(o.frame));
        std::normal_distribution<double> nd(0.0, 1.0);
        o.pixel += sigma * Vec2(nd(prng), nd(prng));
        if (config.pixel_sigma > 0.0) o.information = Mat2::Identity() / (config.pixel_sigma * config.pixel_sigma);
        o.landmark = id;
        ++seen[o.frame];
        prob.observations.push_back(o);
      }
      w.true_landmarks.push_back(x);
      prob.landmarks.push_back({id, est[first] * (w.ground_truth[first].inverse() * x)});
    }
    for (int i = 0; i < n; ++i) {
      if (seen[i] == 0) {
        throw GenerationError("frame " + std::to_string(i) + " observes no landmark");
      }
    }
  }
  w.graph = prob.pose_graph();
  return w;
}

/// Regenerates the world with extra events; only edges and observations in
/// the event windows are re-drawn.
inline SyntheticWorld inject_events(const SyntheticWorld& world, const std::vector<Event>& events) {
  for (const Event& e : events) {
    if (e.center < 0 || e.center >= world.config.frames) {
      throw InvalidArgument("event center frame " + std::to_string(e.center) + " out of range");
    }
  }
  if (events.empty()) return world;
  WorldConfig c = world.config;
  c.events.insert(c.events.end(), events.begin(), events.end());
  return generate(c);
}

}  // namespace segopt
