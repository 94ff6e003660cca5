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
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "bench.hpp"

namespace {

using namespace segopt;
using namespace segopt::cli;

struct Globals {
  std::uint64_t seed = 1;
  bool seed_set = false;
  int jobs = 1;
  bool json_out = false;
  bool trace = false;
};

void trace_line(const Globals& g, const std::string& s) {
  if (g.trace) std::cerr << "[trace] " << s << '\n';
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << body;
}

void require_finite(const json& j) {
  if (!all_finite(j)) throw NumericalFailure("report contains a non-finite value");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string config;
  std::string out = "world";
  std::string shape;
  int frames = -1;
  double speed = -1, rate = -1, density = -1, pixel = -1, odom_rot = -1, odom_trans = -1;
  int auto_loops = -1;
  std::vector<std::string> events;
};

Event parse_event_flag(const std::string& s) {
  // kind:center:duration:magnitude
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t p; (p = s.find(':', start)) != std::string::npos; start = p + 1) parts.push_back(s.substr(start, p - start));
  parts.push_back(s.substr(start));
  if (parts.size() != 4) throw UsageError("--event expects kind:center:duration:magnitude, got '" + s + "'");
  try {
    return {parse_event_kind(parts[0]), std::stoi(parts[1]), std::stoi(parts[2]), std::stod(parts[3])};
  } catch (const std::logic_error&) {
    throw UsageError("bad --event '" + s + "'");
  }
}

int cmd_synth(const SynthArgs& a, const Globals& g) {
  WorldConfig c;
  if (!a.config.empty()) apply_world(read_json_file(a.config), c);
  if (a.frames != -1) c.frames = a.frames;
  if (!a.shape.empty()) c.shape = parse_shape(a.shape);
  if (a.speed >= 0) c.speed = a.speed;
  if (a.rate >= 0) c.rate = a.rate;
  if (a.density >= 0) c.landmark_density = a.density;
  if (a.pixel >= 0) c.pixel_sigma = a.pixel;
  if (a.odom_rot >= 0) c.odom_rot_sigma = a.odom_rot;
  if (a.odom_trans >= 0) c.odom_trans_sigma = a.odom_trans;
  if (a.auto_loops >= 0) c.auto_loops = a.auto_loops;
  for (const std::string& e : a.events) c.events.push_back(parse_event_flag(e));
  if (g.seed_set) c.seed = g.seed;
  c.validate();

  const SyntheticWorld w = generate(c);
  trace_line(g, "generated " + std::to_string(w.problem.frames.size()) + " frames, " +
                    std::to_string(w.problem.landmarks.size()) + " landmarks, " +
                    std::to_string(w.problem.observations.size()) + " observations");
  write_graph_file(a.out + ".g2o", w.problem);
  std::vector<double> stamps;
  for (const Frame& f : w.problem.frames) stamps.push_back(f.timestamp);
  write_trajectory_file(a.out + "_gt.tum", make_trajectory(stamps, w.ground_truth), TrajectoryFormat::Tum);
  const json echo = to_json(c);
  write_text_file(a.out + ".json", echo.dump(2) + "\n");
  if (g.json_out) {
    print_json({{"graph", a.out + ".g2o"},
                {"ground_truth", a.out + "_gt.tum"},
                {"config", a.out + ".json"},
                {"frames", w.problem.frames.size()},
                {"edges", w.problem.edges.size()},
                {"landmarks", w.problem.landmarks.size()},
                {"observations", w.problem.observations.size()}});
  } else {
    std::cout << "wrote " << a.out << ".g2o, " << a.out << "_gt.tum, " << a.out << ".json\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// segment / optimize

struct PipelineArgs {
  std::string config;
  std::string method = "segmented";
  std::optional<double> sigma_v, sigma_r;
  std::optional<int> min_len, covis;
  std::optional<int> max_iter;
  std::optional<double> huber;
  std::string mode;
};

PipelineConfig pipeline_config(const PipelineArgs& a) {
  PipelineConfig c;
  if (!a.config.empty()) apply_pipeline(read_json_file(a.config), c);
  if (a.sigma_v) c.segmentation.sigma_v = *a.sigma_v;
  if (a.sigma_r) c.segmentation.sigma_r = *a.sigma_r;
  if (a.min_len) c.segmentation.min_segment_len = *a.min_len;
  if (a.covis) c.segmentation.covis_threshold = *a.covis;
  if (a.max_iter) c.solver.max_iterations = *a.max_iter;
  if (a.huber) {
    c.solver.robust_kernel = RobustKernel::Huber;
    c.solver.huber_delta = *a.huber;
  }
  if (!a.mode.empty()) c.mode = parse_optimize_mode(a.mode);
  c.segmentation.validate();
  c.solver.validate();
  return c;
}

GraphFile load_graph(const std::string& path, const Globals& g) {
  GraphFile f = read_graph_file(path);
  for (const std::string& w : f.warnings) std::cerr << "warning: " << path << ": " << w << '\n';
  trace_line(g, "read " + std::to_string(f.problem.frames.size()) + " frames, " +
                    std::to_string(f.problem.edges.size()) + " edges from " + path);
  return f;
}

int cmd_segment(const std::string& graph, const std::string& labels, const PipelineArgs& a, const Globals& g) {
  const PipelineConfig cfg = pipeline_config(a);
  const MethodSpec& m = find_method(a.method);
  const BaProblem p = load_graph(graph, g).problem;
  SegmentationResult seg = segment_for_method(p, m, cfg);
  std::size_t gaps = 0;
  if (!p.observations.empty() && m.strategy != Strategy::Full) {
    ConnectingOutcome conn = assign_connecting(CovisibilityIndex(p), seg, cfg.segmentation);
    seg = std::move(conn.segmentation);
    gaps = conn.gap_fallbacks;
  }
  std::ofstream out(labels);
  if (!out) throw UsageError("cannot write '" + labels + "'");
  write_labels(out, seg);
  json summary = segmentation_summary(seg);
  summary["method"] = m.name;
  summary["gap_fallbacks"] = gaps;
  require_finite(summary);
  if (g.json_out) {
    print_json(summary);
  } else {
    std::cout << seg.segments.size() << " segments, " << seg.buffers.size() << " buffers, kept fraction "
              << seg.kept_fraction() << "; labels in " << labels << '\n';
  }
  return 0;
}

int cmd_optimize(const std::string& graph, const std::string& out_path, const std::string& format,
                 const std::string& gt_path, const std::string& report_path, const PipelineArgs& a,
                 const Globals& g) {
  const PipelineConfig cfg = pipeline_config(a);
  const TrajectoryFormat fmt = parse_trajectory_format(format);
  const MethodSpec& m = find_method(a.method);
  const BaProblem p = load_graph(graph, g).problem;
  std::vector<Pose> gt;
  if (!gt_path.empty()) {
    gt = read_trajectory_file(gt_path, TrajectoryFormat::Tum).poses;
    if (gt.size() != p.frames.size()) throw UsageError("ground truth length differs from the graph");
  }
  const RunResult r = run_method(p, m, cfg, gt.empty() ? nullptr : &gt);
  if (g.trace) {
    for (std::size_t i = 0; i < r.report.cost_trace.size(); ++i) {
      trace_line(g, "iteration " + std::to_string(i) + " cost " + std::to_string(r.report.cost_trace[i]));
    }
  }
  std::vector<double> stamps;
  for (const Frame& f : p.frames) stamps.push_back(f.timestamp);
  write_trajectory_file(out_path, make_trajectory(stamps, r.poses), fmt);
  const json report = to_json(r.report);
  require_finite(report);
  if (!report_path.empty()) write_text_file(report_path, report.dump(2) + "\n");
  if (g.json_out) {
    print_json(report);
  } else {
    std::cout << m.name << ": " << r.report.iterations << " iterations, cost " << r.report.initial_cost << " -> "
              << r.report.final_cost << ", total " << r.report.times.total << " s";
    if (r.report.ate_rmse) std::cout << ", ATE " << *r.report.ate_rmse << " m";
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench / convert

int cmd_bench(const std::string& scenario, const std::string& csv, const std::string& out, const Globals& g) {
  Scenario sc = scenario_from_json(read_json_file(scenario));
  if (g.seed_set) sc.seed = g.seed;
  const BenchResult b = run_bench(sc, g.jobs, [&](const BenchRow& row) {
    trace_line(g, row.method + " rep " + std::to_string(row.repetition) + " total " +
                      std::to_string(row.report.times.total) + " s");
  });
  const json j = to_json(b);
  require_finite(j);
  if (!csv.empty()) {
    std::ofstream os(csv);
    if (!os) throw UsageError("cannot write '" + csv + "'");
    write_csv(os, b);
  }
  if (!out.empty()) write_text_file(out, j.dump(2) + "\n");
  if (g.json_out) {
    print_json(j["summary"]);
  } else {
    std::printf("%-14s %12s %12s %12s %8s %10s %10s\n", "method", "median_ate", "median_solve", "median_total",
                "kept", "time/full", "ate/full");
    for (const MethodSummary& s : b.summary) {
      std::printf("%-14s %12.6f %12.4f %12.4f %8.3f", s.method.c_str(), s.median_ate, s.median_solve,
                  s.median_total, s.median_kept_fraction);
      if (s.median_time_ratio) std::printf(" %10.3f", *s.median_time_ratio);
      if (s.median_ate_ratio) std::printf(" %10.3f", *s.median_ate_ratio);
      std::printf("\n");
    }
  }
  return 0;
}

int cmd_convert(const std::string& in, const std::string& out, const std::string& from, const std::string& to,
                const Globals& g) {
  const Trajectory t = read_trajectory_file(in, parse_trajectory_format(from));
  write_trajectory_file(out, t, parse_trajectory_format(to));
  trace_line(g, "converted " + std::to_string(t.size()) + " poses");
  if (g.json_out) print_json({{"poses", t.size()}, {"output", out}});
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Segment-based pose graph and bundle adjustment optimizer"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", g.jobs, "concurrent runs in bench")->check(CLI::PositiveNumber);
  app.add_flag("--json", g.json_out, "machine-readable output on stdout");
  app.add_flag("--trace", g.trace, "progress and solver trace on stderr");
  app.fallthrough();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic world");
  synth->add_option("--config", sa.config, "world config (JSON)");
  synth->add_option("--out", sa.out, "output prefix");
  synth->add_option("--shape", sa.shape, "line | circle | figure-eight | random-walk");
  synth->add_option("--frames", sa.frames, "frame count")->check(CLI::Range(2, 1000000));
  synth->add_option("--speed", sa.speed, "m/s");
  synth->add_option("--rate", sa.rate, "Hz");
  synth->add_option("--landmark-density", sa.density, "landmarks per meter of path");
  synth->add_option("--pixel-noise", sa.pixel, "px");
  synth->add_option("--odom-rot-noise", sa.odom_rot, "rad");
  synth->add_option("--odom-trans-noise", sa.odom_trans, "m");
  synth->add_option("--loops", sa.auto_loops, "loop closures picked at revisited places");
  synth->add_option("--event", sa.events, "kind:center:duration:magnitude (repeatable)");

  PipelineArgs pa;
  auto add_pipeline_flags = [&](CLI::App* sub) {
    sub->add_option("--config", pa.config, "pipeline config (JSON)");
    sub->add_option("--method", pa.method, "method name")->default_val("segmented");
    sub->add_option("--sigma-v", pa.sigma_v, "velocity threshold");
    sub->add_option("--sigma-r", pa.sigma_r, "reprojection threshold, px");
    sub->add_option("--min-segment-len", pa.min_len, "frames");
    sub->add_option("--covis-threshold", pa.covis, "shared landmarks for connecting frames");
  };

  std::string seg_graph, seg_labels = "labels.txt";
  auto* segment = app.add_subcommand("segment", "label frames");
  segment->add_option("graph", seg_graph, "graph file")->required();
  segment->add_option("--labels", seg_labels, "labels output");
  add_pipeline_flags(segment);

  std::string opt_graph, opt_out = "trajectory.tum", opt_format = "tum", opt_gt, opt_report;
  auto* optimize = app.add_subcommand("optimize", "optimize a graph");
  optimize->add_option("graph", opt_graph, "graph file")->required();
  optimize->add_option("--out", opt_out, "trajectory output");
  optimize->add_option("--format", opt_format, "tum | kitti");
  optimize->add_option("--ground-truth", opt_gt, "TUM ground truth for ATE");
  optimize->add_option("--report", opt_report, "JSON run report output");
  optimize->add_option("--max-iterations", pa.max_iter, "solver iteration cap");
  optimize->add_option("--huber", pa.huber, "Huber threshold in whitened units");
  optimize->add_option("--mode", pa.mode, "auto | pg | ba | both");
  add_pipeline_flags(optimize);

  std::string scenario, bench_csv, bench_out;
  auto* bench = app.add_subcommand("bench", "run a benchmark scenario");
  bench->add_option("scenario", scenario, "scenario file (JSON)")->required();
  bench->add_option("--csv", bench_csv, "per-run CSV output");
  bench->add_option("--out", bench_out, "JSON report output");

  std::string conv_in, conv_out, conv_from = "tum", conv_to = "kitti";
  auto* convert = app.add_subcommand("convert", "convert a trajectory file");
  convert->add_option("input", conv_in, "input trajectory")->required();
  convert->add_option("output", conv_out, "output trajectory")->required();
  convert->add_option("--from", conv_from, "tum | kitti");
  convert->add_option("--to", conv_to, "tum | kitti");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (synth->parsed()) return cmd_synth(sa, g);
    if (segment->parsed()) return cmd_segment(seg_graph, seg_labels, pa, g);
    if (optimize->parsed()) return cmd_optimize(opt_graph, opt_out, opt_format, opt_gt, opt_report, pa, g);
    if (bench->parsed()) return cmd_bench(scenario, bench_csv, bench_out, g);
    if (convert->parsed()) return cmd_convert(conv_in, conv_out, conv_from, conv_to, g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
