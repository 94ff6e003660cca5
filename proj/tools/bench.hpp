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
// Scenario runner behind `segopt bench`.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "cli_json.hpp"
#include "segopt/io.hpp"

namespace segopt::cli {

struct Scenario {
  std::optional<WorldConfig> world;
  std::string graph_path;
  std::string ground_truth_path;  // TUM, optional with graph input
  std::vector<std::string> methods = {"full", "segmented"};
  int repetitions = 1;
  std::uint64_t seed = 1;
  PipelineConfig pipeline;

  void validate() const {
    if (repetitions < 1) throw UsageError("repetitions must be >= 1");
    if (methods.empty()) throw UsageError("scenario lists no methods");
    for (const std::string& m : methods) find_method(m);
    if (!world && graph_path.empty()) throw UsageError("scenario needs either 'world' or 'graph'");
    if (world && !graph_path.empty()) throw UsageError("scenario takes 'world' or 'graph', not both");
    if (world) world->validate();
  }
};

inline Scenario scenario_from_json(const json& j) {
  check_keys(j, "scenario", {"world", "graph", "ground_truth", "methods", "repetitions", "seed", "pipeline"});
  Scenario s;
  if (j.contains("world")) {
    WorldConfig w;
    apply_world(j.at("world"), w);
    s.world = w;
  }
  get_to(j, "graph", s.graph_path);
  get_to(j, "ground_truth", s.ground_truth_path);
  get_to(j, "methods", s.methods);
  get_to(j, "repetitions", s.repetitions);
  get_to(j, "seed", s.seed);
  if (j.contains("pipeline")) apply_pipeline(j.at("pipeline"), s.pipeline);
  return s;
}

struct BenchRow {
  std::string method;
  int repetition = 0;
  std::uint64_t seed = 0;
  RunReport report;
};

struct MethodSummary {
  std::string method;
  double median_ate = std::nan("");
  double median_solve = 0.0;  // global solve + interpolation
  double median_total = 0.0;
  double median_kept_fraction = 0.0;
  // Paired against `full` on the same repetition, when present.
  std::optional<double> median_time_ratio;
  std::optional<double> median_ate_ratio;
};

struct BenchResult {
  std::vector<BenchRow> rows;  // ordered by (method, repetition)
  std::vector<MethodSummary> summary;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double solve_time(const RunReport& r) { return r.times.global_solve + r.times.interpolation; }

/// Runs `count` tasks on up to `jobs` threads; the first exception is rethrown.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& task) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        const std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(jobs, count));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

using ProgressFn = std::function<void(const BenchRow&)>;

inline BenchResult run_bench(const Scenario& sc, int jobs, const ProgressFn& progress = {}) {
  sc.validate();
  const int reps = sc.repetitions;
  std::vector<BaProblem> problems(reps);
  std::vector<std::vector<Pose>> truths(reps);
  std::vector<std::uint64_t> seeds(reps);
  if (sc.world) {
    parallel_for(reps, jobs, [&](int r) {
      WorldConfig c = *sc.world;
      c.seed = sc.seed + static_cast<std::uint64_t>(r);
      SyntheticWorld w = generate(c);
      problems[r] = std::move(w.problem);
      truths[r] = std::move(w.ground_truth);
      seeds[r] = c.seed;
    });
  } else {
    const BaProblem p = read_graph_file(sc.graph_path).problem;
    std::vector<Pose> gt;
    if (!sc.ground_truth_path.empty()) {
      gt = read_trajectory_file(sc.ground_truth_path, TrajectoryFormat::Tum).poses;
      if (gt.size() != p.frames.size()) throw UsageError("ground truth length differs from the graph");
    }
    for (int r = 0; r < reps; ++r) {
      problems[r] = p;
      truths[r] = gt;
      seeds[r] = sc.seed;
    }
  }

  const int m = static_cast<int>(sc.methods.size());
  BenchResult out;
  out.rows.resize(static_cast<std::size_t>(m) * reps);
  std::mutex mu;
  parallel_for(m * reps, jobs, [&](int k) {
    const int mi = k / reps, r = k % reps;
    BenchRow row{sc.methods[mi], r, seeds[r], {}};
    const std::vector<Pose>* gt = truths[r].empty() ? nullptr : &truths[r];
    row.report = run_method(problems[r], sc.methods[mi], sc.pipeline, gt).report;
    if (progress) {
      const std::lock_guard lock(mu);
      progress(row);
    }
    out.rows[k] = std::move(row);
  });

  std::map<int, const RunReport*> full;
  for (const BenchRow& row : out.rows) {
    if (row.method == "full") full[row.repetition] = &row.report;
  }
  for (int mi = 0; mi < m; ++mi) {
    MethodSummary s;
    s.method = sc.methods[mi];
    std::vector<double> ate, solve, total, kept, tr, ar;
    for (int r = 0; r < reps; ++r) {
      const RunReport& rep = out.rows[static_cast<std::size_t>(mi) * reps + r].report;
      if (rep.ate_rmse) ate.push_back(*rep.ate_rmse);
      solve.push_back(solve_time(rep));
      total.push_back(rep.times.total);
      kept.push_back(rep.kept_fraction);
      const auto f = full.find(r);
      if (f != full.end()) {
        tr.push_back(solve_time(rep) / f->second->times.global_solve);
        if (rep.ate_rmse && f->second->ate_rmse) ar.push_back(*rep.ate_rmse / *f->second->ate_rmse);
      }
    }
    s.median_ate = median(ate);
    s.median_solve = median(solve);
    s.median_total = median(total);
    s.median_kept_fraction = median(kept);
    if (!tr.empty()) s.median_time_ratio = median(tr);
    if (!ar.empty()) s.median_ate_ratio = median(ar);
    out.summary.push_back(s);
  }
  return out;
}

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "method",         "repetition",    "seed",          "frames",           "segments",
      "buffer_fraction", "kept_fraction", "t_segmentation", "t_reduction",     "t_global_solve",
      "t_interpolation", "t_total",       "iterations",    "initial_cost",     "final_cost",
      "monotone",       "ate_rmse",      "synthesized_edges", "loops_dropped", "loops_reanchored",
      "landmarks_dropped", "gap_fallbacks"};
  return cols;
}

inline void write_csv(std::ostream& os, const BenchResult& b) {
  for (std::size_t i = 0; i < csv_columns().size(); ++i) os << (i ? "," : "") << csv_columns()[i];
  os << '\n';
  for (const BenchRow& row : b.rows) {
    const RunReport& r = row.report;
    os << row.method << ',' << row.repetition << ',' << row.seed << ',' << r.frames << ',' << r.segments << ','
       << r.buffer_fraction << ',' << r.kept_fraction << ',' << r.times.segmentation << ',' << r.times.reduction
       << ',' << r.times.global_solve << ',' << r.times.interpolation << ',' << r.times.total << ','
       << r.iterations << ',' << r.initial_cost << ',' << r.final_cost << ',' << (r.monotone ? 1 : 0) << ','
       << (r.ate_rmse ? std::to_string(*r.ate_rmse) : "") << ',' << r.synthesized_edges << ','
       << r.loops_dropped << ',' << r.loops_reanchored << ',' << r.landmarks_dropped << ',' << r.gap_fallbacks
       << '\n';
  }
}

inline json to_json(const MethodSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"method", s.method},
          {"median_ate_rmse", std::isnan(s.median_ate) ? json(nullptr) : json(s.median_ate)},
          {"median_solve_time", s.median_solve},
          {"median_total_time", s.median_total},
          {"median_kept_fraction", s.median_kept_fraction},
          {"median_time_ratio_vs_full", opt(s.median_time_ratio)},
          {"median_ate_ratio_vs_full", opt(s.median_ate_ratio)}};
}

inline json to_json(const BenchResult& b) {
  json rows = json::array();
  for (const BenchRow& row : b.rows) {
    json j = to_json(row.report);
    j["repetition"] = row.repetition;
    j["seed"] = row.seed;
    rows.push_back(j);
  }
  json summary = json::array();
  for (const MethodSummary& s : b.summary) summary.push_back(to_json(s));
  return {{"rows", rows}, {"summary", summary}};
}

/// True when every number in `j` is finite.
inline bool all_finite(const json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const json& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

}  // namespace segopt::cli
