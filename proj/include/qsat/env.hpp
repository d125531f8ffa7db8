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
// Episodic MDP over the CDCL solver: reset/step with a constant step
// penalty, decision caps with truncation, and hybrid solving where the
// first K decisions come from the model and the rest from VSIDS.

#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <variant>

#include "qsat/graph_net.hpp"
#include "qsat/solver.hpp"
#include "qsat/state_graph.hpp"

namespace qsat {

struct EnvConfig {
  double step_penalty = -0.1;
  int max_decisions_train = 500;
  // Effectively unlimited by default; evaluation runs to completion.
  int max_decisions_eval = std::numeric_limits<int>::max();
  std::optional<int> model_call_cap;  // nullopt = unlimited
  SolverConfig solver;
};

struct StepInfo {
  uint64_t propagations = 0;  // propagations caused by this step (first step
                              // includes the reset-time level-0 propagation)
  uint64_t decisions = 0;     // cumulative decisions this episode
};

struct StepResult {
  std::optional<StateGraph> state;  // nullopt on termination
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
  StepInfo info;
};

class SatEnv {
 public:
  explicit SatEnv(EnvConfig config = {}, bool training = true)
      : config_(config), training_(training) {}

  // Fresh solver, level-0 propagation, initial observation. If propagation
  // alone decides the instance, returns the verdict instead of a graph.
  std::variant<StateGraph, Verdict> reset(const CnfFormula& formula) {
    core_.emplace(formula, config_.solver);
    last_props_ = 0;
    active_ = false;
    if (core_->state() == StepOutcome::kUnsat) return Verdict::unsatisfiable();
    // Covers both full assignment (kSat) and an already-empty residual with
    // variables left over; either way the trail extends to a model.
    if (core_->state() == StepOutcome::kSat || core_->all_original_satisfied())
      return core_->extract_model();
    active_ = true;
    return build_state_graph(*core_);
  }

  StepResult step(Lit action) {
    if (!active_) throw std::logic_error("step on an inactive episode");
    const StepOutcome outcome = core_->step_decision(action);
    StepResult r;
    r.info.propagations = core_->stats().propagations - last_props_;
    r.info.decisions = core_->stats().decisions;
    last_props_ = core_->stats().propagations;
    if (outcome != StepOutcome::kContinue || core_->all_original_satisfied()) {
      active_ = false;
      r.reward = 0.0;
      r.done = true;
      return r;
    }
    r.reward = config_.step_penalty;
    r.state = build_state_graph(*core_);
    const int cap = training_ ? config_.max_decisions_train : config_.max_decisions_eval;
    if (core_->stats().decisions >= static_cast<uint64_t>(cap)) {
      active_ = false;
      r.truncated = true;
    }
    return r;
  }

  bool episode_active() const { return active_; }
  const SolverCore& core() const {
    if (!core_) throw std::logic_error("no episode was started");
    return *core_;
  }
  SolverStats stats() const { return core().stats(); }
  Verdict verdict() const {
    const SolverCore& c = core();
    if (c.state() == StepOutcome::kUnsat) return Verdict::unsatisfiable();
    if (c.state() == StepOutcome::kSat || c.all_original_satisfied()) return c.extract_model();
    throw std::logic_error("episode not terminal");
  }

 private:
  EnvConfig config_;
  bool training_;
  std::optional<SolverCore> core_;
  bool active_ = false;
  uint64_t last_props_ = 0;
};

struct HybridResult {
  std::optional<Verdict> verdict;  // nullopt if the decision limit stopped the solve
  SolverStats stats;
  uint64_t model_calls = 0;
  // Wall-clock decomposition: total covers the whole call, inference the
  // model forwards (graph build included), search the solver's
  // decide/propagate/analyze work. total >= inference + search; the
  // remainder is loop bookkeeping.
  double total_seconds = 0.0;
  double inference_seconds = 0.0;
  double search_seconds = 0.0;
};

// First min(K, needed) decisions follow the model's greedy argmax, the rest
// VSIDS. Conflict analysis keeps bumping activities throughout, so the VSIDS
// scores are warm when control is handed over. K = nullopt means every
// decision is model-driven; K = 0 reproduces pure VSIDS exactly.
inline HybridResult solve_hybrid(const CnfFormula& formula, const GraphNetParams& params,
                                 std::optional<int> model_call_cap,
                                 const SolverConfig& config = {}) {
  using Clock = std::chrono::steady_clock;
  const auto seconds_between = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };
  const auto start = Clock::now();
  SolverCore core(formula, config);
  ForwardTape tape;
  HybridResult out;
  while (core.state() == StepOutcome::kContinue) {
    if (config.decision_limit && core.stats().decisions >= *config.decision_limit) {
      out.stats = core.stats();
      out.total_seconds = seconds_between(start, Clock::now());
      return out;
    }
    Lit branch;
    // The model can only branch while a residual graph exists; once every
    // clause is satisfied the remaining trail-filling decisions fall back to
    // VSIDS (they cannot change the outcome).
    if ((!model_call_cap || out.model_calls < static_cast<uint64_t>(*model_call_cap)) &&
        !core.all_original_satisfied()) {
      const auto t0 = Clock::now();
      const StateGraph g = build_state_graph(core);
      const QOutput& q = forward(params, g, tape, /*keep_tape=*/false);
      const auto [row, col] = greedy_action(q);
      branch = decode_action(g, row, col);
      ++out.model_calls;
      out.inference_seconds += seconds_between(t0, Clock::now());
    } else {
      branch = core.vsids_pick();
    }
    const auto t1 = Clock::now();
    core.step_decision(branch);
    out.search_seconds += seconds_between(t1, Clock::now());
  }
  out.stats = core.stats();
  if (core.state() == StepOutcome::kSat)
    out.verdict = core.extract_model();
  else
    out.verdict = Verdict::unsatisfiable();
  out.total_seconds = seconds_between(start, Clock::now());
  return out;
}

}  // namespace qsat
