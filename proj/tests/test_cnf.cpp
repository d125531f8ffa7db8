// Copyright 2026 the qsat authors
//
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

#include "qsat/cnf.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "qsat/rng.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using qsat::Assignment;
using qsat::CnfFormula;
using qsat::Lit;
using qsat_test::chain_formula;
using qsat_test::make_formula;

TEST(Lit, DimacsRoundTrip) {
  EXPECT_EQ(Lit::from_dimacs(3), (Lit{3, false}));
  EXPECT_EQ(Lit::from_dimacs(-7), (Lit{7, true}));
  EXPECT_EQ((Lit{5, true}).to_dimacs(), -5);
  EXPECT_EQ((Lit{5, false}).to_dimacs(), 5);
}

TEST(ParseDimacs, BasicTwoClauseFile) {
  const auto r = qsat::parse_dimacs("p cnf 2 2\n1 -2 0\n2 0\n");
  EXPECT_TRUE(r.warnings.empty());
  EXPECT_EQ(r.formula.num_vars, 2);
  ASSERT_EQ(r.formula.clauses.size(), 2u);
  EXPECT_EQ(r.formula.clauses[0], (qsat::Clause{{1, false}, {2, true}}));
  EXPECT_EQ(r.formula.clauses[1], (qsat::Clause{{2, false}}));
}

TEST(ParseDimacs, ChainExample) {
  const auto r = qsat::parse_dimacs("p cnf 3 2\n1 2 0\n-2 3 0\n");
  EXPECT_EQ(r.formula, chain_formula());
}

TEST(ParseDimacs, CommentsAndClausesAcrossLines) {
  const auto r = qsat::parse_dimacs(
      "c header comment\nc more\np cnf 3 2\n1\n2 0\nc inline\n-2 3 0\n");
  EXPECT_EQ(r.formula, chain_formula());
}

TEST(ParseDimacs, DropsTautologicalClause) {
  const auto r = qsat::parse_dimacs("p cnf 1 1\n1 -1 0\n");
  EXPECT_EQ(r.formula.num_vars, 1);
  EXPECT_TRUE(r.formula.clauses.empty());
  EXPECT_TRUE(r.warnings.empty());  // clause was read, merely dropped
}

TEST(ParseDimacs, DeduplicatesRepeatedLiterals) {
  const auto r = qsat::parse_dimacs("p cnf 2 1\n1 1 -2 1 0\n");
  ASSERT_EQ(r.formula.clauses.size(), 1u);
  EXPECT_EQ(r.formula.clauses[0], (qsat::Clause{{1, false}, {2, true}}));
}

TEST(ParseDimacs, PercentFooterStopsParsing) {
  const auto r = qsat::parse_dimacs("p cnf 2 1\n1 2 0\n%\n0\n\n");
  EXPECT_EQ(r.formula.num_vars, 2);
  EXPECT_EQ(r.formula.clauses.size(), 1u);
}

TEST(ParseDimacs, WarnsOnClauseCountMismatch) {
  const auto r = qsat::parse_dimacs("p cnf 2 3\n1 0\n");
  EXPECT_EQ(r.formula.clauses.size(), 1u);
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(ParseDimacs, Errors) {
  EXPECT_THROW(qsat::parse_dimacs("1 2 0\n"), std::runtime_error);  // no header
  EXPECT_THROW(qsat::parse_dimacs(""), std::runtime_error);
  EXPECT_THROW(qsat::parse_dimacs("p cnf 1 1\np cnf 1 1\n1 0\n"),
               std::runtime_error);  // duplicate header
  EXPECT_THROW(qsat::parse_dimacs("p cnf 1 1\nx 0\n"), std::runtime_error);
  EXPECT_THROW(qsat::parse_dimacs("p cnf 1 1\n2 0\n"), std::runtime_error);
  EXPECT_THROW(qsat::parse_dimacs("p cnf 1 1\n-2 0\n"), std::runtime_error);
  EXPECT_THROW(qsat::parse_dimacs("p cnf 2 1\n1 2\n"), std::runtime_error);
  EXPECT_THROW(qsat::parse_dimacs("p cnf a 1\n1 0\n"), std::runtime_error);
}

TEST(SerializeDimacs, EmptyAndSimple) {
  CnfFormula f;
  f.num_vars = 3;
  EXPECT_EQ(qsat::serialize_dimacs(f), "p cnf 3 0\n");
  EXPECT_EQ(qsat::serialize_dimacs(make_formula(3, {{-2, 3}})),
            "p cnf 3 1\n-2 3 0\n");
  EXPECT_EQ(qsat::serialize_dimacs(chain_formula()), "p cnf 3 2\n1 2 0\n-2 3 0\n");
}

TEST(SerializeDimacs, RoundTripRandomFormulas) {
  qsat::Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const CnfFormula f = qsat_test::random_instance(rng, 5, 30, 2.0, 6.0);
    const auto r = qsat::parse_dimacs(qsat::serialize_dimacs(f));
    EXPECT_EQ(r.formula, f);
    EXPECT_TRUE(r.warnings.empty());
  }
}

TEST(Generate, ClausesHaveThreeDistinctVars) {
  const CnfFormula f = qsat::generate_random_3sat(50, 218, 7);
  EXPECT_EQ(f.num_vars, 50);
  ASSERT_EQ(f.clauses.size(), 218u);
  for (const auto& c : f.clauses) {
    ASSERT_EQ(c.size(), 3u);
    std::set<int> vars;
    for (const Lit& l : c) {
      EXPECT_GE(l.var, 1);
      EXPECT_LE(l.var, 50);
      vars.insert(l.var);
    }
    EXPECT_EQ(vars.size(), 3u);
  }
}

TEST(Generate, DeterministicInSeed) {
  EXPECT_EQ(qsat::generate_random_3sat(20, 80, 3), qsat::generate_random_3sat(20, 80, 3));
  EXPECT_NE(qsat::generate_random_3sat(20, 80, 3), qsat::generate_random_3sat(20, 80, 4));
}

TEST(Generate, RejectsTinyVarCountAndNegativeClauses) {
  EXPECT_THROW(qsat::generate_random_3sat(2, 1, 0), std::invalid_argument);
  EXPECT_THROW(qsat::generate_random_3sat(3, -1, 0), std::invalid_argument);
  EXPECT_TRUE(qsat::generate_random_3sat(3, 0, 0).clauses.empty());
}

TEST(Evaluate, ChainFormula) {
  const CnfFormula f = chain_formula();
  EXPECT_TRUE(qsat::evaluate_assignment(f, {{1, true}, {2, false}, {3, false}}));
  EXPECT_TRUE(qsat::evaluate_assignment(f, {{1, false}, {2, true}, {3, true}}));
  EXPECT_FALSE(qsat::evaluate_assignment(f, {{1, false}, {2, false}, {3, true}}));
  EXPECT_FALSE(qsat::evaluate_assignment(f, {{1, true}, {2, true}, {3, false}}));
}

TEST(Evaluate, EmptyFormulaIsTrue) {
  CnfFormula f;
  f.num_vars = 0;
  EXPECT_TRUE(qsat::evaluate_assignment(f, {}));
}

TEST(Evaluate, PartialAssignmentThrows) {
  EXPECT_THROW(qsat::evaluate_assignment(chain_formula(), {{1, true}}),
               std::invalid_argument);
}

TEST(BruteForce, KnownVerdicts) {
  const auto sat = qsat::brute_force_solve(chain_formula());
  ASSERT_TRUE(sat.sat);
  EXPECT_TRUE(qsat::evaluate_assignment(chain_formula(), sat.model));

  const auto unsat = qsat::brute_force_solve(make_formula(1, {{1}, {-1}}));
  EXPECT_TRUE(!unsat.sat);

  CnfFormula empty;
  empty.num_vars = 0;
  EXPECT_TRUE(qsat::brute_force_solve(empty).sat);
}

TEST(BruteForce, ModelIsTotal) {
  qsat::Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const CnfFormula f = qsat_test::random_instance(rng, 5, 10, 2.0, 6.0);
    const auto v = qsat::brute_force_solve(f);
    if (v.sat) {
      EXPECT_EQ(v.model.size(), static_cast<size_t>(f.num_vars));
      EXPECT_TRUE(qsat::evaluate_assignment(f, v.model));
    }
  }
}

TEST(BruteForce, RejectsLargeInstances) {
  CnfFormula f;
  f.num_vars = 26;
  EXPECT_THROW(qsat::brute_force_solve(f), std::invalid_argument);
}

TEST(LoadDirectory, SortedByFilename) {
  const fs::path dir =
      fs::temp_directory_path() / ("qsat_cnf_dir_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "b.cnf") << "p cnf 1 1\n1 0\n";
  std::ofstream(dir / "a.cnf") << "p cnf 2 1\n1 2 0\n";
  std::ofstream(dir / "ignored.txt") << "not a cnf\n";

  const auto ds = qsat::load_cnf_directory(dir.string());
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].first, "a.cnf");
  EXPECT_EQ(ds[0].second.num_vars, 2);
  EXPECT_EQ(ds[1].first, "b.cnf");
  fs::remove_all(dir);

  EXPECT_THROW(qsat::load_cnf_directory((dir / "missing").string()),
               std::runtime_error);
}
