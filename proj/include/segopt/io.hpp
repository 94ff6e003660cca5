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

// Text formats: g2o-style problem files and TUM / KITTI trajectories.
//
// Problem records (one per line, '#' starts a comment):
//   VERTEX_SE3:QUAT id tx ty tz qx qy qz qw
//   EDGE_SE3:QUAT i j tx ty tz qx qy qz qw <21 upper-triangular information entries>
//   VERTEX_TRACKXYZ id x y z
//   EDGE_PROJECT frame landmark u v <3 upper-triangular information entries>
//   PARAMS_CAM fx fy cx cy
//   FIX id
//   TS id t

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "segopt/errors.hpp"
#include "segopt/geometry.hpp"
#include "segopt/graph_model.hpp"
#include "segopt/segmentation.hpp"

namespace segopt {

struct GraphFile {
  BaProblem problem;
  std::size_t skipped_records = 0;  // unknown record types
  std::vector<std::string> warnings;

  bool has_landmarks() const { return !problem.landmarks.empty(); }
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_pose(std::ostream& os, const Pose& p) {
  const Vec3& t = p.translation();
  const Rotation& r = p.rotation();
  os << fmt17(t.x()) << ' ' << fmt17(t.y()) << ' ' << fmt17(t.z()) << ' ' << fmt17(r.x()) << ' '
     << fmt17(r.y()) << ' ' << fmt17(r.z()) << ' ' << fmt17(r.w());
}

class LineReader {
 public:
  LineReader(const std::string& text, std::size_t line) : is_(text), line_(line) {}

  double number(const char* what) {
    std::string tok;
    if (!(is_ >> tok)) throw ParseError(line_, std::string("missing ") + what);
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ParseError(line_, std::string("bad number for ") + what + ": '" + tok + "'");
    }
  }

  int integer(const char* what) {
    const double v = number(what);
    if (v != static_cast<double>(static_cast<int>(v))) {
      throw ParseError(line_, std::string("expected integer for ") + what);
    }
    return static_cast<int>(v);
  }

  Pose pose() {
    const double tx = number("tx"), ty = number("ty"), tz = number("tz");
    const double qx = number("qx"), qy = number("qy"), qz = number("qz"), qw = number("qw");
    const double n = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    if (!(n > 1e-9) || !std::isfinite(n)) throw ParseError(line_, "degenerate quaternion");
    return Pose(Rotation::from_wxyz(qw, qx, qy, qz), Vec3(tx, ty, tz));
  }

  void end() {
    std::string extra;
    if (is_ >> extra) throw ParseError(line_, "unexpected trailing field '" + extra + "'");
  }

 private:
  std::istringstream is_;
  std::size_t line_;
};

inline std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

}  // namespace detail

inline GraphFile read_graph(std::istream& in) {
  GraphFile out;
  std::map<int, Pose> vertices;
  std::map<int, double> stamps;
  std::map<int, Vec3> points;
  std::vector<int> fixed;
  BaProblem& p = out.problem;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = detail::strip_comment(raw);
    std::istringstream head(line);
    std::string tag;
    if (!(head >> tag)) continue;
    detail::LineReader r(line.substr(line.find(tag) + tag.size()), lineno);
    if (tag == "VERTEX_SE3:QUAT") {
      const int id = r.integer("id");
      const Pose pose = r.pose();
      r.end();
      if (!vertices.emplace(id, pose).second) throw ParseError(lineno, "duplicate vertex " + std::to_string(id));
    } else if (tag == "EDGE_SE3:QUAT") {
      PoseEdge e;
      e.from = r.integer("from");
      e.to = r.integer("to");
      e.measurement = r.pose();
      for (int i = 0; i < 6; ++i) {
        for (int j = i; j < 6; ++j) e.information(i, j) = e.information(j, i) = r.number("information");
      }
      r.end();
      e.kind = e.to == e.from + 1 ? EdgeKind::Odometry : EdgeKind::LoopClosure;
      p.edges.push_back(e);
    } else if (tag == "VERTEX_TRACKXYZ") {
      const int id = r.integer("id");
      Vec3 x;
      for (int i = 0; i < 3; ++i) x[i] = r.number("coordinate");
      r.end();
      if (!points.emplace(id, x).second) throw ParseError(lineno, "duplicate landmark " + std::to_string(id));
    } else if (tag == "EDGE_PROJECT") {
      Observation o;
      o.frame = r.integer("frame");
      o.landmark = r.integer("landmark");
      o.pixel.x() = r.number("u");
      o.pixel.y() = r.number("v");
      o.information(0, 0) = r.number("information");
      o.information(0, 1) = o.information(1, 0) = r.number("information");
      o.information(1, 1) = r.number("information");
      r.end();
      p.observations.push_back(o);
    } else if (tag == "PARAMS_CAM") {
      p.camera.fx = r.number("fx");
      p.camera.fy = r.number("fy");
      p.camera.cx = r.number("cx");
      p.camera.cy = r.number("cy");
      r.end();
    } else if (tag == "FIX") {
      fixed.push_back(r.integer("id"));
      r.end();
    } else if (tag == "TS") {
      const int id = r.integer("id");
      stamps[id] = r.number("timestamp");
      r.end();
    } else {
      ++out.skipped_records;
      out.warnings.push_back("line " + std::to_string(lineno) + ": unknown record '" + tag + "' skipped");
    }
  }

  int expect = 0;
  for (const auto& [id, pose] : vertices) {
    if (id != expect++) throw ParseError(0, "vertex ids must be dense 0..N-1; missing " + std::to_string(expect - 1));
    const auto ts = stamps.find(id);
    p.frames.push_back({id, ts != stamps.end() ? ts->second : 0.1 * id, pose, false});
  }
  expect = 0;
  for (const auto& [id, x] : points) {
    if (id != expect++) throw ParseError(0, "landmark ids must be dense 0..M-1; missing " + std::to_string(expect - 1));
    p.landmarks.push_back({id, x});
  }
  if (fixed.empty() && !p.frames.empty()) {
    fixed.push_back(0);
    out.warnings.push_back("no FIX record; fixing frame 0");
  }
  for (int f : fixed) {
    if (f < 0 || f >= static_cast<int>(p.frames.size())) throw ParseError(0, "FIX references unknown vertex");
    p.frames[f].is_fixed = true;
  }
  return out;
}

inline GraphFile read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_graph(in);
}

inline void write_graph(std::ostream& os, const BaProblem& p) {
  using detail::fmt17;
  os << "PARAMS_CAM " << fmt17(p.camera.fx) << ' ' << fmt17(p.camera.fy) << ' ' << fmt17(p.camera.cx) << ' '
     << fmt17(p.camera.cy) << '\n';
  for (const Frame& f : p.frames) {
    os << "VERTEX_SE3:QUAT " << f.id << ' ';
    detail::write_pose(os, f.pose);
    os << '\n';
  }
  for (const Frame& f : p.frames) os << "TS " << f.id << ' ' << fmt17(f.timestamp) << '\n';
  for (const Frame& f : p.frames) {
    if (f.is_fixed) os << "FIX " << f.id << '\n';
  }
  for (const PoseEdge& e : p.edges) {
    os << "EDGE_SE3:QUAT " << e.from << ' ' << e.to << ' ';
    detail::write_pose(os, e.measurement);
    for (int i = 0; i < 6; ++i) {
      for (int j = i; j < 6; ++j) os << ' ' << fmt17(e.information(i, j));
    }
    os << '\n';
  }
  for (const Landmark& l : p.landmarks) {
    os << "VERTEX_TRACKXYZ " << l.id << ' ' << fmt17(l.position.x()) << ' ' << fmt17(l.position.y()) << ' '
       << fmt17(l.position.z()) << '\n';
  }
  for (const Observation& o : p.observations) {
    os << "EDGE_PROJECT " << o.frame << ' ' << o.landmark << ' ' << fmt17(o.pixel.x()) << ' ' << fmt17(o.pixel.y())
       << ' ' << fmt17(o.information(0, 0)) << ' ' << fmt17(o.information(0, 1)) << ' '
       << fmt17(o.information(1, 1)) << '\n';
  }
}

inline void write_graph(std::ostream& os, const PoseGraph& g) { write_graph(os, BaProblem::from_pose_graph(g)); }

template <class Problem>
void write_graph_file(const std::string& path, const Problem& p) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_graph(out, p);
}

// ---------------------------------------------------------------------------
// Trajectories

enum class TrajectoryFormat { Tum, Kitti };

inline TrajectoryFormat parse_trajectory_format(const std::string& s) {
  if (s == "tum") return TrajectoryFormat::Tum;
  if (s == "kitti") return TrajectoryFormat::Kitti;
  throw InvalidArgument("unknown trajectory format '" + s + "' (expected tum or kitti)");
}

struct Trajectory {
  std::vector<double> timestamps;
  std::vector<Pose> poses;

  std::size_t size() const { return poses.size(); }
};

inline Trajectory make_trajectory(const std::vector<Frame>& frames) {
  Trajectory t;
  for (const Frame& f : frames) {
    t.timestamps.push_back(f.timestamp);
    t.poses.push_back(f.pose);
  }
  return t;
}

inline Trajectory make_trajectory(const std::vector<double>& stamps, const std::vector<Pose>& poses) {
  if (stamps.size() != poses.size()) throw InvalidArgument("timestamp / pose count mismatch");
  return Trajectory{stamps, poses};
}

inline Trajectory read_trajectory(std::istream& in, TrajectoryFormat format) {
  Trajectory t;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = detail::strip_comment(raw);
    std::istringstream probe(line);
    std::vector<std::string> fields;
    for (std::string f; probe >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    detail::LineReader r(line, lineno);
    if (format == TrajectoryFormat::Tum) {
      if (fields.size() != 8) {
        throw ParseError(lineno, "TUM line needs 8 fields, got " + std::to_string(fields.size()));
      }
      const double ts = r.number("timestamp");
      if (!t.timestamps.empty() && !(ts > t.timestamps.back())) {
        throw ParseError(lineno, "timestamps must be strictly increasing");
      }
      t.timestamps.push_back(ts);
      t.poses.push_back(r.pose());
    } else {
      if (fields.size() != 12) {
        throw ParseError(lineno, "KITTI line needs 12 fields, got " + std::to_string(fields.size()));
      }
      Mat4 m = Mat4::Identity();
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) m(i, j) = r.number("matrix entry");
      }
      const Mat3 rot = m.topLeftCorner<3, 3>();
      if ((rot.transpose() * rot - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 || rot.determinant() < 0.0) {
        throw ParseError(lineno, "rotation block is not orthonormal");
      }
      t.timestamps.push_back(0.1 * static_cast<double>(t.poses.size()));
      t.poses.push_back(Pose::from_matrix(m));
    }
  }
  return t;
}

inline Trajectory read_trajectory_file(const std::string& path, TrajectoryFormat format) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_trajectory(in, format);
}

inline void write_trajectory(std::ostream& os, const Trajectory& t, TrajectoryFormat format) {
  using detail::fmt17;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (format == TrajectoryFormat::Tum) {
      char ts[40];
      std::snprintf(ts, sizeof ts, "%.6f", t.timestamps[i]);
      os << ts << ' ';
      detail::write_pose(os, t.poses[i]);
    } else {
      const Mat4 m = t.poses[i].matrix();
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) os << (r || c ? " " : "") << fmt17(m(r, c));
      }
    }
    os << '\n';
  }
}

inline void write_trajectory_file(const std::string& path, const Trajectory& t, TrajectoryFormat format) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_trajectory(out, t, format);
}

// ---------------------------------------------------------------------------
// Labels

inline void write_labels(std::ostream& os, const SegmentationResult& seg) {
  for (std::size_t f = 0; f < seg.labels.size(); ++f) {
    os << f << ' ' << to_string(seg.labels[f]) << ' ' << seg.segment_of(static_cast<int>(f)) << '\n';
  }
}

}  // namespace segopt
