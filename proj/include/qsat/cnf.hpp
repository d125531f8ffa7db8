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
// CNF formulas: DIMACS I/O, random 3-SAT generation, assignment evaluation,
// and an exhaustive oracle for small instances.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsat/rng.hpp"

namespace qsat {

// A variable (1-based) or its negation.
struct Lit {
  int var = 0;
  bool neg = false;

  int to_dimacs() const { return neg ? -var : var; }
  static Lit from_dimacs(int v) { return Lit{std::abs(v), v < 0}; }
  bool operator==(const Lit&) const = default;
};

using Clause = std::vector<Lit>;

struct CnfFormula {
  int num_vars = 0;
  std::vector<Clause> clauses;
  bool operator==(const CnfFormula&) const = default;
};

// Total or partial truth assignment, keyed by 1-based variable index.
using Assignment = std::map<int, bool>;

struct Verdict {
  bool sat = false;
  Assignment model;  // total over 1..num_vars when sat

  static Verdict satisfiable(Assignment m) { return Verdict{true, std::move(m)}; }
  static Verdict unsatisfiable() { return Verdict{}; }
  bool operator==(const Verdict&) const = default;
};

struct ParseResult {
  CnfFormula formula;
  std::vector<std::string> warnings;
};

namespace detail {

// Drops duplicate literals (keeping first occurrence) and whole clauses that
// contain a variable in both polarities.
inline void append_clause(CnfFormula& f, const std::vector<Lit>& lits) {
  Clause out;
  for (const Lit& l : lits) {
    bool dup = false;
    for (const Lit& k : out) {
      if (k.var == l.var) {
        if (k.neg != l.neg) return;  // tautology
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(l);
  }
  f.clauses.push_back(std::move(out));
}

}  // namespace detail

// DIMACS CNF reader. Lines starting with 'c' are comments; one 'p cnf V C'
// header precedes the clauses; a '%' token ends the input (SATLIB footer).
// Clause-count mismatches are tolerated and reported through `warnings`.
inline ParseResult parse_dimacs(std::istream& in) {
  ParseResult res;
  CnfFormula& f = res.formula;
  bool have_header = false;
  long long declared_clauses = 0;
  long long clauses_read = 0;
  std::vector<Lit> cur;
  bool stop = false;
  std::string line;
  while (!stop && std::getline(in, line)) {
    const size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == 'c') continue;
    if (line[pos] == 'p') {
      if (have_header) throw std::runtime_error("duplicate DIMACS header");
      std::istringstream ls(line.substr(pos));
      std::string p, fmt;
      long long nv = -1, nc = -1;
      if (!(ls >> p >> fmt >> nv >> nc) || p != "p" || fmt != "cnf" || nv < 0 || nc < 0)
        throw std::runtime_error("malformed DIMACS header: " + line);
      f.num_vars = static_cast<int>(nv);
      declared_clauses = nc;
      have_header = true;
      continue;
    }
    std::istringstream ls(line.substr(pos));
    std::string tok;
    while (ls >> tok) {
      if (tok == "%") {
        stop = true;
        break;
      }
      long long v = 0;
      try {
        size_t used = 0;
        v = std::stoll(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw std::runtime_error("bad token in DIMACS input: " + tok);
      }
      if (!have_header) throw std::runtime_error("clause data before DIMACS header");
      if (v == 0) {
        detail::append_clause(f, cur);
        cur.clear();
        ++clauses_read;
      } else {
        if (std::llabs(v) > f.num_vars)
          throw std::runtime_error("variable index out of range: " + tok);
        cur.push_back(Lit::from_dimacs(static_cast<int>(v)));
      }
    }
  }
  if (!have_header) throw std::runtime_error("missing DIMACS header");
  if (!cur.empty()) throw std::runtime_error("clause not terminated by 0 at end of input");
  if (clauses_read != declared_clauses) {
    res.warnings.push_back("clause count mismatch: header declares " +
                           std::to_string(declared_clauses) + ", found " +
                           std::to_string(clauses_read));
  }
  return res;
}

inline ParseResult parse_dimacs(const std::string& text) {
  std::istringstream ss(text);
  return parse_dimacs(ss);
}

inline ParseResult parse_dimacs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return parse_dimacs(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline std::string serialize_dimacs(const CnfFormula& f) {
  std::ostringstream out;
  out << "p cnf " << f.num_vars << ' ' << f.clauses.size() << '\n';
  for (const Clause& c : f.clauses) {
    for (const Lit& l : c) out << l.to_dimacs() << ' ';
    out << "0\n";
  }
  return out.str();
}

// Uniform random 3-SAT: per clause, three distinct variables drawn uniformly,
// each polarity a fair coin. Duplicate clauses are permitted.
inline CnfFormula generate_random_3sat(int n_vars, int n_clauses, uint64_t seed) {
  if (n_vars < 3) throw std::invalid_argument("generate_random_3sat requires n_vars >= 3");
  if (n_clauses < 0) throw std::invalid_argument("negative clause count");
  Rng rng(seed);
  CnfFormula f;
  f.num_vars = n_vars;
  f.clauses.reserve(static_cast<size_t>(n_clauses));
  for (int i = 0; i < n_clauses; ++i) {
    int a = rng.range(1, n_vars);
    int b = a, c = a;
    while (b == a) b = rng.range(1, n_vars);
    while (c == a || c == b) c = rng.range(1, n_vars);
    Clause cl{Lit{a, rng.flip()}, Lit{b, rng.flip()}, Lit{c, rng.flip()}};
    f.clauses.push_back(std::move(cl));
  }
  return f;
}

// True iff every clause has at least one satisfied literal. The assignment
// must be total over 1..num_vars.
inline bool evaluate_assignment(const CnfFormula& f, const Assignment& a) {
  for (int v = 1; v <= f.num_vars; ++v)
    if (!a.count(v)) throw std::invalid_argument("partial assignment: variable " + std::to_string(v));
  for (const Clause& c : f.clauses) {
    bool sat = false;
    for (const Lit& l : c) {
      if (a.at(l.var) != l.neg) {
        sat = true;
        break;
      }
    }
    if (!sat) return false;
  }
  return true;
}

// Exhaustive enumeration over all 2^n assignments; capped at 25 variables.
inline Verdict brute_force_solve(const CnfFormula& f) {
  if (f.num_vars > 25)
    throw std::invalid_argument("brute_force_solve is limited to 25 variables");
  const int n = f.num_vars;
  const size_t m = f.clauses.size();
  std::vector<uint64_t> pos(m, 0), neg(m, 0);
  for (size_t i = 0; i < m; ++i) {
    for (const Lit& l : f.clauses[i]) {
      const uint64_t bit = 1ull << (l.var - 1);
      (l.neg ? neg[i] : pos[i]) |= bit;
    }
  }
  for (uint64_t bits = 0; bits < (1ull << n); ++bits) {
    bool ok = true;
    for (size_t i = 0; i < m; ++i) {
      if ((bits & pos[i]) == 0 && (~bits & neg[i]) == 0) {
        ok = false;
        break;
      }
    }
    if (ok) {
      Assignment a;
      for (int v = 1; v <= n; ++v) a[v] = (bits >> (v - 1)) & 1;
      return Verdict::satisfiable(std::move(a));
    }
  }
  return Verdict::unsatisfiable();
}

// Loads every *.cnf file in a directory, ordered lexicographically by file
// name so splits are reproducible.
inline std::vector<std::pair<std::string, CnfFormula>> load_cnf_directory(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".cnf")
      paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  std::vector<std::pair<std::string, CnfFormula>> out;
  out.reserve(paths.size());
  for (const auto& p : paths)
    out.emplace_back(p.filename().string(), parse_dimacs_file(p).formula);
  return out;
}

}  // namespace qsat
