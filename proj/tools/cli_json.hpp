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
// JSON forms of the configuration and report types used by the CLI.

#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "segopt/pipeline.hpp"
#include "segopt/synth.hpp"

namespace segopt::cli {

using nlohmann::json;

/// Rejects keys outside `allowed` so that typos in config files surface.
inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw UsageError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw UsageError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void get_to(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw UsageError("'" + path + "': " + e.what());
  }
}

inline const char* shape_name(Shape s) { return to_string(s); }

// ---------------------------------------------------------------------------
// World

inline Event event_from_json(const json& j) {
  check_keys(j, "event", {"kind", "center", "duration", "magnitude"});
  Event e;
  std::string kind = to_string(e.kind);
  get_to(j, "kind", kind);
  e.kind = parse_event_kind(kind);
  get_to(j, "center", e.center);
  get_to(j, "duration", e.duration);
  get_to(j, "magnitude", e.magnitude);
  return e;
}

inline json to_json(const Event& e) {
  return {{"kind", to_string(e.kind)}, {"center", e.center}, {"duration", e.duration}, {"magnitude", e.magnitude}};
}

inline void apply_world(const json& j, WorldConfig& c) {
  check_keys(j, "world",
             {"frames", "shape", "speed", "rate", "landmark_density", "camera", "image_width", "image_height",
              "odom_rot_sigma", "odom_trans_sigma", "pixel_sigma", "loops", "auto_loops", "loop_rot_sigma",
              "loop_trans_sigma", "events", "seed", "lateral_min", "lateral_max", "height_min", "height_max",
              "max_depth"});
  get_to(j, "frames", c.frames);
  if (j.contains("shape")) c.shape = parse_shape(j.at("shape").get<std::string>());
  get_to(j, "speed", c.speed);
  get_to(j, "rate", c.rate);
  get_to(j, "landmark_density", c.landmark_density);
  if (j.contains("camera")) {
    const json& cam = j.at("camera");
    check_keys(cam, "camera", {"fx", "fy", "cx", "cy"});
    get_to(cam, "fx", c.camera.fx);
    get_to(cam, "fy", c.camera.fy);
    get_to(cam, "cx", c.camera.cx);
    get_to(cam, "cy", c.camera.cy);
  }
  get_to(j, "image_width", c.image_width);
  get_to(j, "image_height", c.image_height);
  get_to(j, "odom_rot_sigma", c.odom_rot_sigma);
  get_to(j, "odom_trans_sigma", c.odom_trans_sigma);
  get_to(j, "pixel_sigma", c.pixel_sigma);
  if (j.contains("loops")) {
    c.loops.clear();
    for (const json& l : j.at("loops")) {
      check_keys(l, "loop", {"a", "b", "rot_sigma", "trans_sigma"});
      LoopSpec s;
      get_to(l, "a", s.a);
      get_to(l, "b", s.b);
      get_to(l, "rot_sigma", s.rot_sigma);
      get_to(l, "trans_sigma", s.trans_sigma);
      c.loops.push_back(s);
    }
  }
  get_to(j, "auto_loops", c.auto_loops);
  get_to(j, "loop_rot_sigma", c.loop_rot_sigma);
  get_to(j, "loop_trans_sigma", c.loop_trans_sigma);
  if (j.contains("events")) {
    c.events.clear();
    for (const json& e : j.at("events")) c.events.push_back(event_from_json(e));
  }
  get_to(j, "seed", c.seed);
  get_to(j, "lateral_min", c.lateral_min);
  get_to(j, "lateral_max", c.lateral_max);
  get_to(j, "height_min", c.height_min);
  get_to(j, "height_max", c.height_max);
  get_to(j, "max_depth", c.max_depth);
}

inline json to_json(const WorldConfig& c) {
  json loops = json::array();
  for (const LoopSpec& l : c.loops) {
    loops.push_back({{"a", l.a}, {"b", l.b}, {"rot_sigma", l.rot_sigma}, {"trans_sigma", l.trans_sigma}});
  }
  json events = json::array();
  for (const Event& e : c.events) events.push_back(to_json(e));
  return {{"frames", c.frames},
          {"shape", shape_name(c.shape)},
          {"speed", c.speed},
          {"rate", c.rate},
          {"landmark_density", c.landmark_density},
          {"camera", {{"fx", c.camera.fx}, {"fy", c.camera.fy}, {"cx", c.camera.cx}, {"cy", c.camera.cy}}},
          {"image_width", c.image_width},
          {"image_height", c.image_height},
          {"odom_rot_sigma", c.odom_rot_sigma},
          {"odom_trans_sigma", c.odom_trans_sigma},
          {"pixel_sigma", c.pixel_sigma},
          {"loops", loops},
          {"auto_loops", c.auto_loops},
          {"loop_rot_sigma", c.loop_rot_sigma},
          {"loop_trans_sigma", c.loop_trans_sigma},
          {"events", events},
          {"seed", c.seed},
          {"lateral_min", c.lateral_min},
          {"lateral_max", c.lateral_max},
          {"height_min", c.height_min},
          {"height_max", c.height_max},
          {"max_depth", c.max_depth}};
}

// ---------------------------------------------------------------------------
// Pipeline

inline void apply_solver(const json& j, SolverConfig& s) {
  check_keys(j, "solver",
             {"max_iterations", "cost_rel_tolerance", "step_norm_tolerance", "initial_lambda", "lambda_up",
              "lambda_down", "max_lambda", "robust_kernel", "huber_delta", "ba_edge_weight",
              "dense_block_threshold"});
  get_to(j, "max_iterations", s.max_iterations);
  get_to(j, "cost_rel_tolerance", s.cost_rel_tolerance);
  get_to(j, "step_norm_tolerance", s.step_norm_tolerance);
  get_to(j, "initial_lambda", s.initial_lambda);
  get_to(j, "lambda_up", s.lambda_up);
  get_to(j, "lambda_down", s.lambda_down);
  get_to(j, "max_lambda", s.max_lambda);
  if (j.contains("robust_kernel")) {
    const std::string k = j.at("robust_kernel").get<std::string>();
    if (k == "none") s.robust_kernel = RobustKernel::None;
    else if (k == "huber") s.robust_kernel = RobustKernel::Huber;
    else throw UsageError("robust_kernel must be 'none' or 'huber'");
  }
  get_to(j, "huber_delta", s.huber_delta);
  get_to(j, "ba_edge_weight", s.ba_edge_weight);
  get_to(j, "dense_block_threshold", s.dense_block_threshold);
}

inline void apply_segmentation(const json& j, SegmentationParams& p) {
  check_keys(j, "segmentation",
             {"sigma_v", "sigma_r", "alpha", "beta", "eta_threshold", "head_len", "tail_len", "min_segment_len",
              "covis_threshold", "adaptive_window"});
  if (j.contains("sigma_v")) p.sigma_v = j.at("sigma_v").get<double>();
  if (j.contains("sigma_r")) p.sigma_r = j.at("sigma_r").get<double>();
  get_to(j, "alpha", p.alpha);
  get_to(j, "beta", p.beta);
  get_to(j, "eta_threshold", p.eta_threshold);
  get_to(j, "head_len", p.head_len);
  get_to(j, "tail_len", p.tail_len);
  get_to(j, "min_segment_len", p.min_segment_len);
  get_to(j, "covis_threshold", p.covis_threshold);
  get_to(j, "adaptive_window", p.adaptive_window);
}

inline void apply_pipeline(const json& j, PipelineConfig& c) {
  check_keys(j, "pipeline",
             {"solver", "segmentation", "mode", "fixed_segments", "covis_split", "align", "loop_policy",
              "bridge_pruned_stretches", "identity_information"});
  if (j.contains("solver")) apply_solver(j.at("solver"), c.solver);
  if (j.contains("segmentation")) apply_segmentation(j.at("segmentation"), c.segmentation);
  if (j.contains("mode")) c.mode = parse_optimize_mode(j.at("mode").get<std::string>());
  get_to(j, "fixed_segments", c.fixed_segments);
  get_to(j, "covis_split", c.covis_split);
  if (j.contains("align")) {
    const std::string a = j.at("align").get<std::string>();
    if (a == "se3") c.align = AlignMode::Se3;
    else if (a == "sim3") c.align = AlignMode::Sim3;
    else throw UsageError("align must be 'se3' or 'sim3'");
  }
  if (j.contains("loop_policy")) {
    const std::string lp = j.at("loop_policy").get<std::string>();
    if (lp == "drop") c.reduction.loop_policy = LoopPolicy::Drop;
    else if (lp == "reanchor") c.reduction.loop_policy = LoopPolicy::Reanchor;
    else throw UsageError("loop_policy must be 'drop' or 'reanchor'");
  }
  get_to(j, "bridge_pruned_stretches", c.reduction.bridge_pruned_stretches);
  get_to(j, "identity_information", c.reduction.identity_information);
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const Range& r) { return json::array({r.first, r.last}); }

inline json segmentation_summary(const SegmentationResult& s) {
  json segs = json::array(), bufs = json::array();
  for (const Range& r : s.segments) segs.push_back(to_json(r));
  for (const Range& r : s.buffers) bufs.push_back(to_json(r));
  return {{"frames", s.frame_count()},
          {"segments", s.segments.size()},
          {"buffers", s.buffers.size()},
          {"buffer_fraction", s.buffer_fraction()},
          {"kept_fraction", s.kept_fraction()},
          {"connecting_frames", s.count(FrameLabel::Connecting)},
          {"sigma_v", s.sigma_v},
          {"sigma_r", s.sigma_r},
          {"segment_extents", segs},
          {"buffer_extents", bufs}};
}

inline json to_json(const RunReport& r) {
  json j = {{"method", r.method},
            {"frames", r.frames},
            {"segments", r.segments},
            {"buffer_fraction", r.buffer_fraction},
            {"kept_fraction", r.kept_fraction},
            {"times",
             {{"segmentation", r.times.segmentation},
              {"reduction", r.times.reduction},
              {"global_solve", r.times.global_solve},
              {"interpolation", r.times.interpolation},
              {"total", r.times.total}}},
            {"iterations", r.iterations},
            {"initial_cost", r.initial_cost},
            {"final_cost", r.final_cost},
            {"monotone", r.monotone},
            {"ate_rmse", r.ate_rmse ? json(*r.ate_rmse) : json(nullptr)},
            {"synthesized_edges", r.synthesized_edges},
            {"loops_dropped", r.loops_dropped},
            {"loops_reanchored", r.loops_reanchored},
            {"landmarks_dropped", r.landmarks_dropped},
            {"gap_fallbacks", r.gap_fallbacks},
            {"behind_camera", r.behind_camera},
            {"frozen_landmarks", r.frozen_landmarks},
            {"warnings", r.warnings}};
  return j;
}

}  // namespace segopt::cli
