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
// Bipartite variable-clause graph of the residual problem: unassigned
// variables on one side, not-yet-satisfied clauses on the other, with edge
// labels carrying literal polarity.

#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsat/solver.hpp"

namespace qsat {

// Vertices are ordered canonically: variable vertices first (ascending
// variable id), then clause vertices (original clauses in input order,
// learned clauses in creation order). Each variable-clause incidence yields
// a pair of directed edges with identical features.
struct StateGraph {
  int num_var_vertices = 0;
  int num_vertices = 0;
  std::vector<int32_t> edge_src;
  std::vector<int32_t> edge_dst;
  std::vector<uint8_t> edge_negated;
  std::vector<int32_t> var_ids;  // row -> 1-based solver variable

  int num_edges() const { return static_cast<int>(edge_src.size()); }
  int num_clause_vertices() const { return num_vertices - num_var_vertices; }
  bool is_var_vertex(int v) const { return v < num_var_vertices; }

  // One-hot type feature: variables [1,0], clauses [0,1].
  std::array<double, 2> vertex_feature(int v) const {
    return is_var_vertex(v) ? std::array<double, 2>{1.0, 0.0} : std::array<double, 2>{0.0, 1.0};
  }
  // Polarity feature: [1,0] for a negated literal, [0,1] otherwise.
  std::array<double, 2> edge_feature(int e) const {
    return edge_negated[e] ? std::array<double, 2>{1.0, 0.0} : std::array<double, 2>{0.0, 1.0};
  }
  double global_feature() const { return 0.0; }

  bool operator==(const StateGraph&) const = default;
};

// Residual graph of a non-terminal solver: clauses with a true literal are
// dropped, assigned literals vanish from the remaining clauses, and
// variables left in no clause get no vertex.
inline StateGraph build_state_graph(const SolverCore& core) {
  if (core.state() != StepOutcome::kContinue)
    throw std::logic_error("build_state_graph: solver is in a terminal state");
  const auto& db = core.clause_db();

  std::vector<std::vector<int>> clause_vars;   // per kept clause, unassigned vars (1-based)
  std::vector<std::vector<uint8_t>> clause_neg;
  std::vector<uint8_t> var_used(core.num_vars() + 1, 0);
  for (const auto& c : db) {
    bool satisfied = false;
    for (int l : c.lits) {
      if (core.lit_value(l) == 1) {
        satisfied = true;
        break;
      }
    }
    if (satisfied) continue;
    std::vector<int> vars;
    std::vector<uint8_t> negs;
    for (int l : c.lits) {
      if (core.lit_value(l) == 0) {
        vars.push_back(ilit_var0(l) + 1);
        negs.push_back(ilit_neg(l) ? 1 : 0);
      }
    }
    // An unsatisfied clause with no unassigned literal is a conflict, which
    // cannot survive propagation in a non-terminal state.
    if (vars.empty()) throw std::logic_error("build_state_graph: falsified clause in stable state");
    // Sort edges of one clause by variable id.
    for (size_t a = 1; a < vars.size(); ++a) {
      for (size_t b = a; b > 0 && vars[b - 1] > vars[b]; --b) {
        std::swap(vars[b - 1], vars[b]);
        std::swap(negs[b - 1], negs[b]);
      }
    }
    for (int v : vars) var_used[v] = 1;
    clause_vars.push_back(std::move(vars));
    clause_neg.push_back(std::move(negs));
  }
  // Every clause satisfied: the instance is decided, the graph would be
  // empty, and there is no action to represent.
  if (clause_vars.empty())
    throw std::logic_error("build_state_graph: all clauses satisfied (terminal state)");

  StateGraph g;
  std::vector<int32_t> var_row(core.num_vars() + 1, -1);
  for (int v = 1; v <= core.num_vars(); ++v) {
    if (var_used[v]) {
      var_row[v] = static_cast<int32_t>(g.var_ids.size());
      g.var_ids.push_back(v);
    }
  }
  g.num_var_vertices = static_cast<int>(g.var_ids.size());
  g.num_vertices = g.num_var_vertices + static_cast<int>(clause_vars.size());
  for (size_t c = 0; c < clause_vars.size(); ++c) {
    const int32_t crow = static_cast<int32_t>(g.num_var_vertices + c);
    for (size_t k = 0; k < clause_vars[c].size(); ++k) {
      const int32_t vrow = var_row[clause_vars[c][k]];
      const uint8_t neg = clause_neg[c][k];
      g.edge_src.push_back(vrow);
      g.edge_dst.push_back(crow);
      g.edge_negated.push_back(neg);
      g.edge_src.push_back(crow);
      g.edge_dst.push_back(vrow);
      g.edge_negated.push_back(neg);
    }
  }
  return g;
}

// Column 0 selects "set variable true", column 1 "set variable false".
inline Lit decode_action(const StateGraph& g, int vertex, int column) {
  if (vertex < 0 || vertex >= g.num_var_vertices)
    throw std::invalid_argument("decode_action: not a variable vertex");
  if (column != 0 && column != 1) throw std::invalid_argument("decode_action: column must be 0 or 1");
  return Lit{g.var_ids[vertex], column == 1};
}

// Text adjacency dump; one vertex or edge per line, canonical order.
inline std::string dump_state_graph(const StateGraph& g) {
  std::ostringstream out;
  out << "p graph " << g.num_vertices << ' ' << g.num_edges() << '\n';
  for (int v = 0; v < g.num_vertices; ++v) {
    if (g.is_var_vertex(v))
      out << "v " << v << " var " << g.var_ids[v] << '\n';
    else
      out << "v " << v << " clause\n";
  }
  for (int e = 0; e < g.num_edges(); ++e) {
    out << "e " << g.edge_src[e] << ' ' << g.edge_dst[e] << ' '
        << (g.edge_negated[e] ? "neg" : "pos") << '\n';
  }
  return out.str();
}

}  // namespace qsat
