// Copyright 2026 the qsat authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Evaluation harness: median relative iteration reduction (MRIR) against
// the best of the restart/no-restart VSIDS baselines, decision-cap and
// data-efficiency sweeps, propagation statistics, and a forward-cost
// scaling probe.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsat/cnf.hpp"
#include "qsat/env.hpp"
#include "qsat/graph_net.hpp"
#include "qsat/rng.hpp"
#include "qsat/solver.hpp"

namespace qsat {

using Dataset = std::vector<std::pair<std::string, CnfFormula>>;

struct ProblemResult {
  std::string id;
  uint64_t baseline_iterations_no_restart = 0;
  uint64_t baseline_iterations_restart = 0;
  uint64_t agent_iterations = 0;
  uint64_t model_calls = 0;
  // (assignments made by propagation + the decision itself) per decision.
  double agent_propagations_per_step = 0.0;
  double baseline_propagations_per_step = 0.0;
  // Wall-clock components of the agent solve (not serialized into reports:
  // report files must be byte-deterministic).
  double total_seconds = 0.0;
  double inference_seconds = 0.0;
  double search_seconds = 0.0;
};

struct SeedAggregate {
  double average = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct MrirReport {
  std::vector<double> ratios;  // per problem, dataset order, exclusions removed
  double median = std::numeric_limits<double>::quiet_NaN();
  std::optional<SeedAggregate> across_seeds;  // filled by multi-seed aggregation
};

inline double median_of(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of an empty sequence");
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty sequence");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// ratio_i = min(no-restart, restart baseline iterations) / agent iterations;
// the report's median uses the mean of the central pair on even lengths.
inline MrirReport compute_mrir(const std::vector<ProblemResult>& results) {
  if (results.empty()) throw std::invalid_argument("compute_mrir on an empty result set");
  MrirReport report;
  report.ratios.reserve(results.size());
  for (const ProblemResult& r : results) {
    if (r.agent_iterations == 0)
      throw std::invalid_argument("zero agent iterations for '" + r.id +
                                  "': level-0-decided instances must be excluded upstream");
    const uint64_t best =
        std::min(r.baseline_iterations_no_restart, r.baseline_iterations_restart);
    report.ratios.push_back(static_cast<double>(best) / static_cast<double>(r.agent_iterations));
  }
  report.median = median_of(report.ratios);
  return report;
}

inline SeedAggregate aggregate_medians(const std::vector<double>& medians) {
  if (medians.empty()) throw std::invalid_argument("aggregate over zero seeds");
  SeedAggregate a;
  a.average = mean_of(medians);
  a.min = *std::min_element(medians.begin(), medians.end());
  a.max = *std::max_element(medians.begin(), medians.end());
  return a;
}

struct BaselineReport {
  std::vector<std::string> ids;
  std::vector<uint64_t> decisions;  // aligned with ids
  double median = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
};

// Pure-VSIDS solve of every instance; per-instance decision counts plus
// median and mean over the dataset (level-0 instances included with 0).
inline BaselineReport run_baseline(const Dataset& dataset, bool restarts) {
  BaselineReport report;
  SolverConfig config;
  config.restarts = restarts;
  std::vector<double> counts;
  for (const auto& [name, formula] : dataset) {
    const SolveResult r = solve_vsids(formula, config);
    report.ids.push_back(name);
    report.decisions.push_back(r.stats.decisions);
    counts.push_back(static_cast<double>(r.stats.decisions));
  }
  if (!counts.empty()) {
    report.median = median_of(counts);
    report.mean = mean_of(counts);
  }
  return report;
}

struct EvalOptions {
  std::optional<int> model_call_cap;  // nullopt = every decision model-driven
  bool agent_restarts = false;        // restarts stay off for the agent run
  // Cross-check all three verdicts against brute force when feasible.
  bool brute_force_check = true;
  int brute_force_max_vars = 20;
};

struct EvalReport {
  std::vector<ProblemResult> results;  // level-0-decided instances removed
  std::vector<std::string> excluded;   // their names, dataset order
  MrirReport mrir;
};

namespace detail {

inline double props_per_decision(const SolverStats& s) {
  return static_cast<double>(s.propagations + s.decisions) / static_cast<double>(s.decisions);
}

}  // namespace detail

// Runs both baselines and the hybrid agent on every instance. Instances
// decided at level 0 (zero decisions for baseline and agent alike) are
// excluded from the ratios and listed by name. Verdict agreement between
// agent, baselines, and (on small instances) brute force is a hard error.
inline EvalReport evaluate_dataset(const GraphNetParams& params, const Dataset& dataset,
                                   const EvalOptions& options = {}) {
  EvalReport report;
  SolverConfig no_restart;
  no_restart.restarts = false;
  SolverConfig with_restart;
  with_restart.restarts = true;
  SolverConfig agent_config;
  agent_config.restarts = options.agent_restarts;
  for (const auto& [name, formula] : dataset) {
    const SolveResult base_nr = solve_vsids(formula, no_restart);
    const SolveResult base_r = solve_vsids(formula, with_restart);
    const HybridResult agent =
        solve_hybrid(formula, params, options.model_call_cap, agent_config);
    if (!base_nr.verdict || !base_r.verdict || !agent.verdict)
      throw std::logic_error("unbounded solve returned no verdict on '" + name + "'");
    const bool sat = base_nr.verdict->sat;
    if (base_r.verdict->sat != sat || agent.verdict->sat != sat)
      throw std::logic_error("verdict mismatch between agent and baseline on '" + name + "'");
    if (options.brute_force_check && formula.num_vars <= options.brute_force_max_vars) {
      if (brute_force_solve(formula).sat != sat)
        throw std::logic_error("verdict disagrees with brute force on '" + name + "'");
    }
    if (base_nr.stats.decisions == 0) {
      report.excluded.push_back(name);
      continue;
    }
    ProblemResult r;
    r.id = name;
    r.baseline_iterations_no_restart = base_nr.stats.decisions;
    r.baseline_iterations_restart = base_r.stats.decisions;
    r.agent_iterations = agent.stats.decisions;
    r.model_calls = agent.model_calls;
    r.agent_propagations_per_step = detail::props_per_decision(agent.stats);
    r.baseline_propagations_per_step = detail::props_per_decision(base_nr.stats);
    r.total_seconds = agent.total_seconds;
    r.inference_seconds = agent.inference_seconds;
    r.search_seconds = agent.search_seconds;
    report.results.push_back(std::move(r));
  }
  if (!report.results.empty()) report.mrir = compute_mrir(report.results);
  return report;
}

struct CapSweepPoint {
  int cap = 0;
  MrirReport mrir;
  size_t problems = 0;
};

// MRIR at each model-call cap, aligned with the input order. Cap 0 is the
// pure-VSIDS degenerate point and must be present.
inline std::vector<CapSweepPoint> decision_cap_sweep(const GraphNetParams& params,
                                                     const Dataset& dataset,
                                                     const std::vector<int>& caps,
                                                     const EvalOptions& base_options = {}) {
  if (std::find(caps.begin(), caps.end(), 0) == caps.end())
    throw std::invalid_argument("cap sweep must include cap 0");
  std::vector<CapSweepPoint> out;
  for (int cap : caps) {
    if (cap < 0) throw std::invalid_argument("negative model-call cap");
    EvalOptions options = base_options;
    options.model_call_cap = cap;
    CapSweepPoint point;
    point.cap = cap;
    const EvalReport report = evaluate_dataset(params, dataset, options);
    point.mrir = report.mrir;
    point.problems = report.results.size();
    out.push_back(std::move(point));
  }
  return out;
}

struct DataEfficiencyPoint {
  int train_size = 0;
  std::vector<double> medians;  // one per seed
  SeedAggregate aggregate;
};

// Trains one model per (size, seed) on the first `size` problems of the
// canonical dataset order and evaluates each. The training procedure is
// injected so this harness stays independent of the trainer.
using TrainFn = std::function<GraphNetParams(const Dataset& train_subset, uint64_t seed)>;

inline std::vector<DataEfficiencyPoint> data_efficiency_sweep(
    const TrainFn& train_fn, const Dataset& train_set, const std::vector<int>& sizes,
    const std::vector<uint64_t>& seeds, const Dataset& eval_set,
    const EvalOptions& options = {}) {
  if (seeds.empty()) throw std::invalid_argument("data efficiency sweep needs seeds");
  std::vector<DataEfficiencyPoint> out;
  for (int size : sizes) {
    if (size < 1 || static_cast<size_t>(size) > train_set.size())
      throw std::invalid_argument("train size " + std::to_string(size) +
                                  " outside 1.." + std::to_string(train_set.size()));
    DataEfficiencyPoint point;
    point.train_size = size;
    const Dataset subset(train_set.begin(), train_set.begin() + size);
    for (uint64_t seed : seeds) {
      const GraphNetParams params = train_fn(subset, seed);
      const EvalReport report = evaluate_dataset(params, eval_set, options);
      point.medians.push_back(report.mrir.median);
    }
    point.aggregate = aggregate_medians(point.medians);
    out.push_back(std::move(point));
  }
  return out;
}

struct PropagationStats {
  std::vector<std::pair<std::string, double>> per_problem;
  std::vector<std::string> excluded;  // level-0-decided
  double mean = std::numeric_limits<double>::quiet_NaN();
};

// Mean assignments changed per decision: the decision itself plus the
// propagations it triggers. params = nullptr runs the VSIDS baseline.
inline PropagationStats propagation_stats(const Dataset& dataset,
                                          const GraphNetParams* params = nullptr,
                                          const EvalOptions& options = {}) {
  PropagationStats out;
  std::vector<double> values;
  SolverConfig config;
  config.restarts = options.agent_restarts;
  for (const auto& [name, formula] : dataset) {
    SolverStats stats;
    if (params) {
      stats = solve_hybrid(formula, *params, options.model_call_cap, config).stats;
    } else {
      stats = solve_vsids(formula, config).stats;
    }
    if (stats.decisions == 0) {
      out.excluded.push_back(name);
      continue;
    }
    const double v = detail::props_per_decision(stats);
    out.per_problem.emplace_back(name, v);
    values.push_back(v);
  }
  if (!values.empty()) out.mean = mean_of(values);
  return out;
}

struct ScalingPoint {
  int vertices = 0;
  int edges = 0;
  uint64_t macs = 0;
  double seconds = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  // Least-squares fit of MAC count against vertex count.
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Random bipartite graph in the state-graph layout: n variables, 4n
// clauses, each variable wired to 13 clause slots (duplicates allowed).
inline StateGraph make_scaling_graph(int num_vertices, Rng& rng) {
  if (num_vertices < 5 || num_vertices % 5 != 0)
    throw std::invalid_argument("scaling-probe sizes must be positive multiples of 5");
  const int n = num_vertices / 5;
  const int clauses = 4 * n;
  StateGraph g;
  g.num_var_vertices = n;
  g.num_vertices = n + clauses;
  g.var_ids.resize(n);
  for (int v = 0; v < n; ++v) g.var_ids[v] = v + 1;
  for (int v = 0; v < n; ++v) {
    for (int k = 0; k < 13; ++k) {
      const int c = n + static_cast<int>(rng.below(static_cast<uint64_t>(clauses)));
      const uint8_t neg = rng.flip() ? 1 : 0;
      g.edge_src.push_back(v);
      g.edge_dst.push_back(c);
      g.edge_negated.push_back(neg);
      g.edge_src.push_back(c);
      g.edge_dst.push_back(v);
      g.edge_negated.push_back(neg);
    }
  }
  return g;
}

}  // namespace detail

// Forward-pass cost as a function of graph size. MAC counts depend only on
// shapes, so the fit is deterministic; wall times are informational.
inline ScalingReport inference_scaling_probe(const GraphNetParams& params,
                                             const std::vector<int>& sizes,
                                             uint64_t seed = 2026) {
  ScalingReport report;
  Rng rng(seed);
  ForwardTape tape;
  for (int size : sizes) {
    const StateGraph g = detail::make_scaling_graph(size, rng);
    const auto t0 = std::chrono::steady_clock::now();
    forward(params, g, tape, /*keep_tape=*/false);
    const auto t1 = std::chrono::steady_clock::now();
    ScalingPoint point;
    point.vertices = g.num_vertices;
    point.edges = g.num_edges();
    point.macs = tape.macs;
    point.seconds = std::chrono::duration<double>(t1 - t0).count();
    report.points.push_back(point);
  }
  if (report.points.size() >= 2) {
    const size_t n = report.points.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const ScalingPoint& p : report.points) {
      const double x = p.vertices, y = static_cast<double>(p.macs);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    report.slope = (n * sxy - sx * sy) / denom;
    report.intercept = (sy - report.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ybar = sy / n;
    for (const ScalingPoint& p : report.points) {
      const double y = static_cast<double>(p.macs);
      const double fit = report.slope * p.vertices + report.intercept;
      ss_res += (y - fit) * (y - fit);
      ss_tot += (y - ybar) * (y - ybar);
    }
    report.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return report;
}

}  // namespace qsat
