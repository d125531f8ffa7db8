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
// CDCL solver with two-watched-literal propagation, first-UIP learning,
// VSIDS branching, phase saving and Luby restarts. Branching is exposed as
// one decision per call so external policies can drive the search.

#pragma once

#include <cassert>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsat/cnf.hpp"

namespace qsat {

struct SolverStats {
  uint64_t decisions = 0;
  uint64_t propagations = 0;
  uint64_t conflicts = 0;
  uint64_t restarts = 0;

  bool operator==(const SolverStats&) const = default;

  std::map<std::string, uint64_t> to_map() const {
    return {{"decisions", decisions},
            {"propagations", propagations},
            {"conflicts", conflicts},
            {"restarts", restarts}};
  }
};

struct SolverConfig {
  bool restarts = false;
  uint64_t restart_unit = 100;  // Luby sequence unit, in conflicts
  uint64_t seed = 0;            // reserved; current heuristics are deterministic
  std::optional<uint64_t> decision_limit;
};

enum class StepOutcome { kContinue, kSat, kUnsat };

// Luby sequence, 1-based: 1, 1, 2, 1, 1, 2, 4, 1, 1, 2, ...
inline uint64_t luby(uint64_t i) {
  uint64_t size = 1, seq = 0;
  while (size < i) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != i - 1) {
    size = (size - 1) >> 1;
    --seq;
    i = 1 + (i - 1) % size;
  }
  return 1ull << seq;
}

// Internal literal encoding: 2*var0 + negated, var0 zero-based.
inline int make_ilit(int var0, bool neg) { return 2 * var0 + (neg ? 1 : 0); }
inline int ilit_var0(int l) { return l >> 1; }
inline bool ilit_neg(int l) { return (l & 1) != 0; }
inline int ilit_negate(int l) { return l ^ 1; }
inline Lit ilit_external(int l) { return Lit{ilit_var0(l) + 1, ilit_neg(l)}; }

class SolverCore {
 public:
  struct Cls {
    std::vector<int> lits;  // internal literals; lits[0..1] are the watches
    bool learned = false;
  };

  explicit SolverCore(const CnfFormula& formula, SolverConfig config = SolverConfig{})
      : nvars_(formula.num_vars), config_(config), formula_(formula) {
    value_.assign(nvars_, 0);
    phase_.assign(nvars_, 0);
    level_.assign(nvars_, 0);
    reason_.assign(nvars_, -1);
    activity_.assign(nvars_, 0.0);
    seen_.assign(nvars_, 0);
    watches_.assign(2 * static_cast<size_t>(nvars_), {});
    for (const Clause& c : formula.clauses) add_original(c);
    num_original_ = static_cast<int>(db_.size());
    if (ok_ && propagate() >= 0) ok_ = false;
    if (!ok_)
      state_ = StepOutcome::kUnsat;
    else if (trail_.size() == static_cast<size_t>(nvars_))
      state_ = StepOutcome::kSat;
  }

  int num_vars() const { return nvars_; }
  StepOutcome state() const { return state_; }
  const SolverStats& stats() const { return stats_; }
  const SolverConfig& config() const { return config_; }
  const CnfFormula& formula() const { return formula_; }
  int decision_level() const { return static_cast<int>(trail_lim_.size()); }

  const std::vector<Cls>& clause_db() const { return db_; }
  int num_original_clauses() const { return num_original_; }

  std::vector<Clause> learned_clauses() const {
    std::vector<Clause> out;
    for (size_t i = num_original_; i < db_.size(); ++i) {
      Clause c;
      for (int l : db_[i].lits) c.push_back(ilit_external(l));
      out.push_back(std::move(c));
    }
    return out;
  }

  bool is_assigned(int var) const { return value_[var - 1] != 0; }
  bool value_of(int var) const {
    assert(is_assigned(var));
    return value_[var - 1] > 0;
  }
  // -1 false, 0 unassigned, +1 true.
  int lit_value(int ilit) const {
    const int8_t v = value_[ilit_var0(ilit)];
    return ilit_neg(ilit) ? -v : v;
  }

  // One decision followed by the full propagate/analyze/backjump loop until
  // the trail is stable again or unsatisfiability is proven.
  StepOutcome step_decision(Lit decision) {
    if (state_ != StepOutcome::kContinue)
      throw std::logic_error("step_decision on a finished solver");
    if (decision.var < 1 || decision.var > nvars_)
      throw std::invalid_argument("decision variable out of range");
    if (is_assigned(decision.var))
      throw std::invalid_argument("decision variable already assigned");
    ++stats_.decisions;
    trail_lim_.push_back(static_cast<int>(trail_.size()));
    enqueue(make_ilit(decision.var - 1, decision.neg), -1, /*is_decision=*/true);
    return resolve_to_stable();
  }

  // Unassigned variable with maximal activity, ties to the lowest index;
  // polarity from the saved phase (initially false).
  Lit vsids_pick() const {
    int best = -1;
    double best_act = -1.0;
    for (int v = 0; v < nvars_; ++v) {
      if (value_[v] == 0 && activity_[v] > best_act) {
        best = v;
        best_act = activity_[v];
      }
    }
    if (best < 0) throw std::logic_error("vsids_pick: no unassigned variable");
    return Lit{best + 1, phase_[best] == 0};
  }

  double activity(int var) const { return activity_[var - 1]; }
  double activity_increment() const { return var_inc_; }

  // Activity bump for every variable involved in one conflict, followed by
  // one decay of the shared increment. Rescales everything by 1e-100 once a
  // value passes 1e100; the argmax ordering is unaffected.
  void bump_and_decay(const std::vector<int>& vars) {
    for (int v : vars) {
      activity_[v - 1] += var_inc_;
      if (activity_[v - 1] > 1e100) rescale_activities();
    }
    var_inc_ /= kActivityDecay;
    if (var_inc_ > 1e100) rescale_activities();
  }

  // Restart once the conflicts since the previous restart reach the current
  // Luby bound. Keeps learned clauses, drops all decisions.
  bool maybe_restart() {
    if (!config_.restarts) return false;
    const uint64_t bound = config_.restart_unit * luby(stats_.restarts + 1);
    if (conflicts_since_restart_ < bound) return false;
    conflicts_since_restart_ = 0;
    ++stats_.restarts;
    if (decision_level() > 0) backjump(0);
    return true;
  }

  void backjump(int level) {
    if (level < 0 || level >= decision_level())
      throw std::invalid_argument("backjump level must be in [0, current level)");
    for (int c = static_cast<int>(trail_.size()) - 1; c >= trail_lim_[level]; --c)
      value_[ilit_var0(trail_[c])] = 0;
    trail_.resize(trail_lim_[level]);
    trail_lim_.resize(level);
    qhead_ = trail_.size();
  }

  // True when every original clause holds a true literal. The search itself
  // runs until all variables are assigned (MiniSat semantics), but once this
  // holds the instance is effectively decided: any completion of the trail
  // is a model, so the residual graph is empty and an episode may stop here.
  bool all_original_satisfied() const {
    for (int ci = 0; ci < num_original_; ++ci) {
      bool sat = false;
      for (int l : db_[ci].lits) {
        if (lit_value(l) == 1) {
          sat = true;
          break;
        }
      }
      if (!sat) return false;
    }
    return true;
  }

  // Completes the current assignment with saved phases and verifies it.
  Verdict extract_model() const {
    if (!all_original_satisfied())
      throw std::logic_error("extract_model: some original clause is not satisfied yet");
    Assignment a;
    for (int v = 0; v < nvars_; ++v)
      a[v + 1] = value_[v] != 0 ? value_[v] > 0 : phase_[v] != 0;
    if (!evaluate_assignment(formula_, a))
      throw std::logic_error("internal error: SAT model failed verification");
    return Verdict::satisfiable(std::move(a));
  }

  // Full-scan check of the two-watched-literal invariant; test support.
  bool debug_check_watches() const {
    std::vector<int> count(db_.size(), 0);
    for (size_t l = 0; l < watches_.size(); ++l) {
      for (int ci : watches_[l]) {
        const Cls& c = db_[ci];
        if (c.lits.size() < 2) return false;
        const int w = ilit_negate(static_cast<int>(l));
        if (c.lits[0] != w && c.lits[1] != w) return false;
        ++count[ci];
      }
    }
    for (size_t ci = 0; ci < db_.size(); ++ci) {
      const Cls& c = db_[ci];
      if (c.lits.size() < 2) {
        if (count[ci] != 0) return false;
        continue;
      }
      if (count[ci] != 2) return false;
      if (state_ == StepOutcome::kContinue && qhead_ == trail_.size()) {
        // At a propagation fixpoint a clause may not have both watches false.
        if (lit_value(c.lits[0]) == -1 && lit_value(c.lits[1]) == -1) return false;
        // A single false watch forces the other one true.
        if (lit_value(c.lits[0]) == -1 && lit_value(c.lits[1]) != 1) return false;
        if (lit_value(c.lits[1]) == -1 && lit_value(c.lits[0]) != 1) return false;
      }
    }
    return true;
  }

 private:
  static constexpr double kActivityDecay = 0.95;

  void add_original(const Clause& clause) {
    Cls c;
    c.lits.reserve(clause.size());
    for (const Lit& l : clause) {
      assert(l.var >= 1 && l.var <= nvars_);
      c.lits.push_back(make_ilit(l.var - 1, l.neg));
    }
    const int ci = static_cast<int>(db_.size());
    db_.push_back(std::move(c));
    const Cls& stored = db_.back();
    if (stored.lits.empty()) {
      ok_ = false;
      return;
    }
    if (stored.lits.size() == 1) {
      if (!ok_) return;
      const int v = lit_value(stored.lits[0]);
      if (v == -1)
        ok_ = false;
      else if (v == 0)
        enqueue(stored.lits[0], ci);
      return;
    }
    watches_[ilit_negate(stored.lits[0])].push_back(ci);
    watches_[ilit_negate(stored.lits[1])].push_back(ci);
  }

  void enqueue(int ilit, int reason, bool is_decision = false) {
    const int v = ilit_var0(ilit);
    assert(value_[v] == 0);
    value_[v] = ilit_neg(ilit) ? -1 : 1;
    phase_[v] = value_[v] > 0 ? 1 : 0;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back(ilit);
    if (!is_decision) ++stats_.propagations;
  }

  // Unit propagation to fixpoint; returns the conflicting clause index or -1.
  int propagate() {
    while (qhead_ < trail_.size()) {
      const int p = trail_[qhead_++];  // p became true; clauses watching ~p wake up
      std::vector<int>& wl = watches_[p];
      size_t i = 0, j = 0;
      const int false_lit = ilit_negate(p);
      while (i < wl.size()) {
        const int ci = wl[i];
        Cls& c = db_[ci];
        if (c.lits[0] == false_lit) std::swap(c.lits[0], c.lits[1]);
        assert(c.lits[1] == false_lit);
        if (lit_value(c.lits[0]) == 1) {  // already satisfied
          wl[j++] = wl[i++];
          continue;
        }
        bool moved = false;
        for (size_t k = 2; k < c.lits.size(); ++k) {
          if (lit_value(c.lits[k]) != -1) {
            std::swap(c.lits[1], c.lits[k]);
            watches_[ilit_negate(c.lits[1])].push_back(ci);
            moved = true;
            break;
          }
        }
        if (moved) {
          ++i;  // clause left this watch list
          continue;
        }
        wl[j++] = wl[i++];
        if (lit_value(c.lits[0]) == -1) {  // conflict
          while (i < wl.size()) wl[j++] = wl[i++];
          wl.resize(j);
          qhead_ = trail_.size();
          return ci;
        }
        enqueue(c.lits[0], ci);
      }
      wl.resize(j);
    }
    return -1;
  }

  // First-UIP conflict analysis. The learned clause has its asserting literal
  // at position 0 and a literal of the backjump level at position 1; every
  // variable met during resolution is reported for an activity bump.
  void analyze(int confl, std::vector<int>& out_learnt, int* out_btlevel,
               std::vector<int>& out_bumped) {
    out_learnt.clear();
    out_learnt.push_back(-1);  // slot for the asserting literal
    out_bumped.clear();
    int path_count = 0;
    int p = -1;
    int index = static_cast<int>(trail_.size()) - 1;
    const int current = decision_level();
    do {
      assert(confl >= 0);
      const Cls& c = db_[confl];
      for (size_t j = (p == -1) ? 0 : 1; j < c.lits.size(); ++j) {
        const int q = c.lits[j];
        const int v = ilit_var0(q);
        if (!seen_[v] && level_[v] > 0) {
          seen_[v] = 1;
          out_bumped.push_back(v + 1);
          if (level_[v] >= current)
            ++path_count;
          else
            out_learnt.push_back(q);
        }
      }
      while (!seen_[ilit_var0(trail_[index--])]) {
      }
      p = trail_[index + 1];
      confl = reason_[ilit_var0(p)];
      seen_[ilit_var0(p)] = 0;
      --path_count;
    } while (path_count > 0);
    out_learnt[0] = ilit_negate(p);

    if (out_learnt.size() == 1) {
      *out_btlevel = 0;
    } else {
      size_t max_i = 1;
      for (size_t k = 2; k < out_learnt.size(); ++k)
        if (level_[ilit_var0(out_learnt[k])] > level_[ilit_var0(out_learnt[max_i])]) max_i = k;
      std::swap(out_learnt[1], out_learnt[max_i]);
      *out_btlevel = level_[ilit_var0(out_learnt[1])];
    }
    for (int v : out_bumped) seen_[v - 1] = 0;
  }

  int add_learned(const std::vector<int>& lits) {
    const int ci = static_cast<int>(db_.size());
    db_.push_back(Cls{lits, true});
    if (lits.size() >= 2) {
      watches_[ilit_negate(lits[0])].push_back(ci);
      watches_[ilit_negate(lits[1])].push_back(ci);
    }
    return ci;
  }

  StepOutcome resolve_to_stable() {
    std::vector<int> learnt;
    std::vector<int> bumped;
    for (;;) {
      const int confl = propagate();
      if (confl >= 0) {
        ++stats_.conflicts;
        ++conflicts_since_restart_;
        if (decision_level() == 0) {
          ok_ = false;
          state_ = StepOutcome::kUnsat;
          return state_;
        }
        int bt = 0;
        analyze(confl, learnt, &bt, bumped);
        bump_and_decay(bumped);
        backjump(bt);
        const int cref = add_learned(learnt);
        // A unit learned clause asserts a level-0 fact; wider clauses become
        // the reason of their asserting literal.
        enqueue(learnt[0], learnt.size() >= 2 ? cref : -1);
        continue;
      }
      if (trail_.size() == static_cast<size_t>(nvars_)) {
        state_ = StepOutcome::kSat;
        return state_;
      }
      maybe_restart();
      return StepOutcome::kContinue;
    }
  }

  void rescale_activities() {
    for (double& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }

  int nvars_;
  SolverConfig config_;
  CnfFormula formula_;
  std::vector<Cls> db_;  // originals first, learned clauses appended in creation order
  int num_original_ = 0;
  std::vector<std::vector<int>> watches_;  // indexed by the literal whose truth wakes the clause
  std::vector<int8_t> value_;
  std::vector<uint8_t> phase_;
  std::vector<int> level_;
  std::vector<int> reason_;
  std::vector<int> trail_;
  std::vector<int> trail_lim_;
  size_t qhead_ = 0;
  std::vector<double> activity_;
  double var_inc_ = 1.0;
  std::vector<uint8_t> seen_;
  SolverStats stats_;
  uint64_t conflicts_since_restart_ = 0;
  bool ok_ = true;
  StepOutcome state_ = StepOutcome::kContinue;
};

struct SolveResult {
  std::optional<Verdict> verdict;  // empty when the decision limit was reached
  SolverStats stats;
};

// Complete search driven by `branching`, one decision per callback.
template <typename Branching>
SolveResult solve(const CnfFormula& formula, Branching&& branching,
                  SolverConfig config = SolverConfig{}) {
  SolverCore core(formula, config);
  while (core.state() == StepOutcome::kContinue) {
    if (config.decision_limit && core.stats().decisions >= *config.decision_limit)
      return SolveResult{std::nullopt, core.stats()};
    core.step_decision(branching(core));
  }
  if (core.state() == StepOutcome::kSat)
    return SolveResult{core.extract_model(), core.stats()};
  return SolveResult{Verdict::unsatisfiable(), core.stats()};
}

inline SolveResult solve_vsids(const CnfFormula& formula, SolverConfig config = SolverConfig{}) {
  return solve(formula, [](const SolverCore& c) { return c.vsids_pick(); }, config);
}

}  // namespace qsat
