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
// Run-configuration parsing/validation and end-to-end tests of the `qsat`
// command-line binary (driven as a subprocess via QSAT_BIN_PATH).

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "json.hpp"
#include "qsat/cnf.hpp"
#include "qsat/config.hpp"
#include "qsat/dqn.hpp"
#include "qsat/graph_net.hpp"
#include "qsat/rng.hpp"
#include "qsat/solver.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using qsat::RunConfig;

namespace {

// ---------------------------------------------------------------------------
// Run-configuration files.
// ---------------------------------------------------------------------------

TEST(ConfigDefaults, MatchDocumentedValues) {
  const RunConfig c;
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.data_dir, "");
  EXPECT_EQ(c.out_dir, "run");
  EXPECT_EQ(c.train_split, 800);
  EXPECT_EQ(c.val_split, 100);
  EXPECT_EQ(c.test_split, 100);
  EXPECT_EQ(c.batch_updates, 50000u);
  EXPECT_DOUBLE_EQ(c.lr, 0.00002);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.buffer_capacity, 20000);
  EXPECT_DOUBLE_EQ(c.eps_start, 1.0);
  EXPECT_DOUBLE_EQ(c.eps_end, 0.01);
  EXPECT_EQ(c.eps_decay_steps, 30000u);
  EXPECT_EQ(c.warmup_env_steps, 5000u);
  EXPECT_DOUBLE_EQ(c.gamma, 0.99);
  EXPECT_EQ(c.update_every, 4);
  EXPECT_EQ(c.target_sync_every, 10);
  EXPECT_EQ(c.max_decisions_train, 500);
  EXPECT_EQ(c.max_decisions_eval, 500);
  EXPECT_DOUBLE_EQ(c.step_penalty, -0.1);
  EXPECT_DOUBLE_EQ(c.adam_beta1, 0.9);
  EXPECT_DOUBLE_EQ(c.adam_beta2, 0.999);
  EXPECT_DOUBLE_EQ(c.adam_eps, 1e-8);
  EXPECT_DOUBLE_EQ(c.grad_clip, 1.0);
  EXPECT_EQ(c.grad_clip_norm, "l2");
  EXPECT_EQ(c.validation_every, 1000);
  EXPECT_EQ(c.validation_cap, -1);
  EXPECT_EQ(c.mp_iterations, 4);
  EXPECT_EQ(c.core_hidden_layers, 1);
  EXPECT_EQ(c.core_hidden_units, 64);
  EXPECT_EQ(c.encoder_out, 32);
  EXPECT_EQ(c.core_out_vertex, 64);
  EXPECT_EQ(c.core_out_edge, 64);
  EXPECT_EQ(c.core_out_global, 32);
  EXPECT_EQ(c.decoder_out, 32);
  EXPECT_EQ(c.eval_caps, (std::vector<int>{0, 10, 50, 100, 300, 500, 1000}));
  EXPECT_NO_THROW(qsat::validate_config(c));
}

TEST(ConfigSerialize, RoundTripIsLosslessAndByteStable) {
  RunConfig c;
  c.seed = 9;
  c.data_dir = "/tmp/instances";
  c.out_dir = "runs/exp-1";
  c.lr = 0.000123;
  c.step_penalty = -0.25;
  c.eps_end = 0.05;
  c.eval_caps = {0, 3, 7};
  c.max_decisions_eval = -1;

  const std::string text = qsat::serialize_config(c);
  EXPECT_EQ(text.rfind("# qsat run configuration\n", 0), 0u);
  EXPECT_NE(text.find("seed = 9\n"), std::string::npos);
  EXPECT_NE(text.find("data_dir = /tmp/instances\n"), std::string::npos);
  EXPECT_NE(text.find("eval_caps = 0,3,7\n"), std::string::npos);

  const RunConfig parsed = qsat::parse_config(text);
  EXPECT_EQ(parsed, c);
  EXPECT_EQ(qsat::serialize_config(parsed), text);

  // Defaults survive the same trip.
  const RunConfig defaults;
  EXPECT_EQ(qsat::parse_config(qsat::serialize_config(defaults)), defaults);
}

TEST(ConfigParse, PartialInputKeepsDefaults) {
  const RunConfig c = qsat::parse_config(std::string("seed = 7\nlr = 0.001\n"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_DOUBLE_EQ(c.lr, 0.001);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.eval_caps, RunConfig{}.eval_caps);
}

TEST(ConfigParse, IgnoresCommentsBlanksAndPadding) {
  const std::string text =
      "# leading comment\n"
      "\n"
      "   \t\n"
      "  gamma   =  0.5  \n"
      "eval_caps = 0, 2 ,4\n"
      "out_dir = a=b\n";  // value keeps everything after the first '='
  const RunConfig c = qsat::parse_config(text);
  EXPECT_DOUBLE_EQ(c.gamma, 0.5);
  EXPECT_EQ(c.eval_caps, (std::vector<int>{0, 2, 4}));
  EXPECT_EQ(c.out_dir, "a=b");
}

void expect_parse_error(const std::string& text, const std::string& needle) {
  try {
    qsat::parse_config(text);
    FAIL() << "expected parse failure for: " << text;
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
        << "message '" << e.what() << "' lacks '" << needle << "'";
  }
}

TEST(ConfigParse, RejectsMalformedInput) {
  expect_parse_error("bogus = 1\n", "line 1");
  expect_parse_error("bogus = 1\n", "unknown key 'bogus'");
  expect_parse_error("# c\n\nbogus = 1\n", "line 3");  // comments count toward line numbers
  expect_parse_error("seed = 1\nseed = 2\n", "line 2");
  expect_parse_error("seed = 1\nseed = 2\n", "duplicate key 'seed'");
  expect_parse_error("seed 1\n", "expected key = value");
  expect_parse_error("batch_size = abc\n", "invalid integer");
  expect_parse_error("batch_size = 12x\n", "trailing characters");
  expect_parse_error("lr = zz\n", "invalid number");
  expect_parse_error("lr = 1.2.3\n", "trailing characters");
  expect_parse_error("seed = -4\n", "must be non-negative");
  expect_parse_error("eval_caps = 1,,2\n", "empty list element");
}

TEST(ConfigParse, MissingFileThrows) {
  EXPECT_THROW(qsat::parse_config_file("/nonexistent/qsat.cfg"), std::runtime_error);
}

TEST(ConfigValidate, RejectsOutOfRangeValues) {
  auto expect_invalid = [](void (*mutate)(RunConfig&), const std::string& needle) {
    RunConfig c;
    mutate(c);
    try {
      qsat::validate_config(c);
      FAIL() << "expected validation failure mentioning '" << needle << "'";
    } catch (const std::runtime_error& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
          << "message '" << e.what() << "' lacks '" << needle << "'";
    }
  };
  expect_invalid([](RunConfig& c) { c.lr = 0.0; }, "lr");
  expect_invalid([](RunConfig& c) { c.batch_size = 0; }, "batch_size");
  expect_invalid([](RunConfig& c) { c.buffer_capacity = 0; }, "buffer_capacity");
  expect_invalid([](RunConfig& c) { c.gamma = 1.0; }, "gamma");
  expect_invalid([](RunConfig& c) { c.gamma = -0.1; }, "gamma");
  expect_invalid([](RunConfig& c) { c.step_penalty = 0.0; }, "step_penalty");
  expect_invalid([](RunConfig& c) { c.eps_start = 1.5; }, "exploration");
  expect_invalid([](RunConfig& c) { c.eps_end = -0.1; }, "exploration");
  expect_invalid([](RunConfig& c) { c.update_every = 0; }, "update_every");
  expect_invalid([](RunConfig& c) { c.target_sync_every = 0; }, "target_sync_every");
  expect_invalid([](RunConfig& c) { c.validation_every = 0; }, "validation_every");
  expect_invalid([](RunConfig& c) { c.max_decisions_train = -1; }, "max_decisions_train");
  expect_invalid([](RunConfig& c) { c.max_decisions_eval = -2; }, "max_decisions_eval");
  expect_invalid([](RunConfig& c) { c.validation_cap = -2; }, "validation_cap");
  expect_invalid([](RunConfig& c) { c.grad_clip = 0.0; }, "grad_clip");
  expect_invalid([](RunConfig& c) { c.grad_clip_norm = "linf"; }, "grad_clip_norm");
  expect_invalid([](RunConfig& c) { c.train_split = -1; }, "splits");
  expect_invalid([](RunConfig& c) { c.core_hidden_layers = 2; }, "core_hidden_layers");
  expect_invalid([](RunConfig& c) { c.eval_caps = {0, -1}; }, "eval_caps");
  expect_invalid([](RunConfig& c) { c.encoder_out = 0; }, "dimensions");

  // parse_config validates before returning.
  EXPECT_THROW(qsat::parse_config(std::string("gamma = 1.0\n")), std::runtime_error);
}

TEST(ConfigMapping, ToGnDimsCopiesNetworkFields) {
  RunConfig c;
  c.mp_iterations = 2;
  c.core_hidden_units = 16;
  c.encoder_out = 8;
  c.core_out_vertex = 24;
  c.core_out_edge = 20;
  c.core_out_global = 12;
  c.decoder_out = 10;
  const qsat::GnDims d = qsat::to_gn_dims(c);
  EXPECT_EQ(d.iterations, 2);
  EXPECT_EQ(d.core_hidden, 16);
  EXPECT_EQ(d.encoder_out, 8);
  EXPECT_EQ(d.core_vertex_out, 24);
  EXPECT_EQ(d.core_edge_out, 20);
  EXPECT_EQ(d.core_global_out, 12);
  EXPECT_EQ(d.decoder_out, 10);
}

TEST(ConfigMapping, ToTrainerConfigCopiesEveryKnob) {
  RunConfig c;
  c.seed = 5;
  c.batch_updates = 77;
  c.batch_size = 3;
  c.warmup_env_steps = 9;
  c.update_every = 2;
  c.target_sync_every = 4;
  c.validation_every = 6;
  c.gamma = 0.9;
  c.grad_clip = 2.5;
  c.buffer_capacity = 33;
  c.lr = 0.5;
  c.adam_beta1 = 0.8;
  c.adam_beta2 = 0.98;
  c.adam_eps = 1e-7;
  c.eps_start = 0.9;
  c.eps_end = 0.2;
  c.eps_decay_steps = 11;
  c.step_penalty = -0.2;
  c.max_decisions_train = 123;
  c.validation_cap = -1;

  qsat::TrainerConfig t = qsat::to_trainer_config(c);
  EXPECT_EQ(t.seed, 5u);
  EXPECT_EQ(t.batch_updates_budget, 77u);
  EXPECT_EQ(t.batch_size, 3u);
  EXPECT_EQ(t.warmup_env_steps, 9u);
  EXPECT_EQ(t.update_every, 2u);
  EXPECT_EQ(t.target_sync_every, 4u);
  EXPECT_EQ(t.validation_every, 6u);
  EXPECT_DOUBLE_EQ(t.gamma, 0.9);
  EXPECT_DOUBLE_EQ(t.grad_clip, 2.5);
  EXPECT_EQ(t.buffer_capacity, 33u);
  EXPECT_DOUBLE_EQ(t.adam.lr, 0.5);
  EXPECT_DOUBLE_EQ(t.adam.beta1, 0.8);
  EXPECT_DOUBLE_EQ(t.adam.beta2, 0.98);
  EXPECT_DOUBLE_EQ(t.adam.eps, 1e-7);
  EXPECT_DOUBLE_EQ(t.epsilon.start, 0.9);
  EXPECT_DOUBLE_EQ(t.epsilon.end, 0.2);
  EXPECT_EQ(t.epsilon.decay_steps, 11u);
  EXPECT_DOUBLE_EQ(t.env.step_penalty, -0.2);
  EXPECT_EQ(t.env.max_decisions_train, 123);
  EXPECT_TRUE(t.dims == qsat::to_gn_dims(c));
  EXPECT_FALSE(t.validation_cap.has_value());

  c.validation_cap = 5;
  EXPECT_EQ(qsat::to_trainer_config(c).validation_cap, std::optional<int>(5));
}

// ---------------------------------------------------------------------------
// CLI subprocess harness.
// ---------------------------------------------------------------------------

const fs::path& scratch_dir() {
  static const fs::path dir = [] {
    const fs::path d =
        fs::temp_directory_path() / ("qsat-cli-" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct CmdResult {
  int status = -1;  // exit code, or -1 on abnormal termination
  std::string out;  // captured stdout
  std::string err;  // captured stderr
};

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path err_path = scratch_dir() / ("stderr-" + std::to_string(counter++) + ".txt");
  const std::string cmd =
      std::string(QSAT_BIN_PATH) + " " + args + " 2>" + err_path.string();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed for: " + cmd);
  CmdResult r;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int rc = ::pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream err_in(err_path);
  std::stringstream ss;
  ss << err_in.rdbuf();
  r.err = ss.str();
  return r;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  ASSERT_TRUE(out.good()) << "cannot write " << path;
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << "cannot read " << path;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t count_lines(const std::string& text) {
  size_t lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  return lines;
}

// Fresh per-test directory under the scratch root.
fs::path make_dir(const std::string& name) {
  const fs::path d = scratch_dir() / name;
  fs::create_directories(d);
  return d;
}

void make_dataset(const fs::path& dir, int count, int n_vars, int n_clauses, uint64_t seed) {
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    const qsat::CnfFormula f =
        qsat::generate_random_3sat(n_vars, n_clauses, qsat::derive_seed(seed, i));
    write_file(dir / ("inst-" + std::to_string(i) + ".cnf"), qsat::serialize_dimacs(f));
  }
}

fs::path make_checkpoint(const std::string& name, uint64_t seed) {
  const fs::path path = scratch_dir() / name;
  qsat::save_params(path.string(), qsat::init_params(seed));
  return path;
}

constexpr char kChainCnf[] = "p cnf 3 2\n1 2 0\n-2 3 0\n";

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

TEST(CliSolve, SatInstanceFollowsCompetitionConventions) {
  const fs::path file = scratch_dir() / "chain.cnf";
  write_file(file, kChainCnf);
  const CmdResult r = run_cli("solve " + file.string());
  EXPECT_EQ(r.status, 10);
  ASSERT_EQ(r.out.rfind("s SATISFIABLE\nv ", 0), 0u) << r.out;
  ASSERT_NE(r.out.find(" 0\n"), std::string::npos);

  // The v-line must list a model over all three variables that satisfies
  // the formula, terminated by a bare 0.
  std::istringstream vline(r.out.substr(r.out.find("\nv ") + 1));
  std::string tag;
  vline >> tag;
  ASSERT_EQ(tag, "v");
  qsat::Assignment model;
  int lit = 0;
  std::vector<int> lits;
  while (vline >> lit && lit != 0) lits.push_back(lit);
  EXPECT_EQ(lit, 0);
  for (int v : lits) model[std::abs(v)] = v > 0;
  EXPECT_EQ(model.size(), 3u);
  const qsat::CnfFormula chain = qsat::parse_dimacs_file(file).formula;
  EXPECT_TRUE(qsat::evaluate_assignment(chain, model));

  // Search statistics go to stderr; this instance solves with one decision
  // and two propagations.
  EXPECT_NE(r.err.find("decisions=1\n"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("propagations=2\n"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("conflicts=0\n"), std::string::npos);
  EXPECT_NE(r.err.find("restarts=0\n"), std::string::npos);
}

TEST(CliSolve, UnsatInstanceExitsTwenty) {
  const fs::path file = scratch_dir() / "unsat2.cnf";
  write_file(file, "p cnf 2 4\n1 2 0\n1 -2 0\n-1 2 0\n-1 -2 0\n");
  const CmdResult r = run_cli("solve " + file.string());
  EXPECT_EQ(r.status, 20);
  EXPECT_EQ(r.out, "s UNSATISFIABLE\n");
}

TEST(CliSolve, ErrorsExitOneWithMessage) {
  const fs::path bad = scratch_dir() / "bad.cnf";
  write_file(bad, "this is not dimacs\n");
  const CmdResult r = run_cli("solve " + bad.string());
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;

  const CmdResult missing = run_cli("solve /no/such/file.cnf");
  EXPECT_EQ(missing.status, 1);
  EXPECT_NE(missing.err.find("error: "), std::string::npos);
}

TEST(CliSolve, ModelWithZeroCapMatchesPureSolver) {
  const fs::path ckpt = make_checkpoint("solve-ckpt.bin", 7);
  const fs::path file = scratch_dir() / "rand10.cnf";
  write_file(file, qsat::serialize_dimacs(qsat::generate_random_3sat(10, 42, 99)));

  const CmdResult plain = run_cli("solve " + file.string());
  const CmdResult hybrid =
      run_cli("solve " + file.string() + " --model " + ckpt.string() + " --cap 0");
  EXPECT_TRUE(plain.status == 10 || plain.status == 20);
  EXPECT_EQ(hybrid.status, plain.status);
  EXPECT_EQ(hybrid.out, plain.out);
  // Identical statistics plus the hybrid-only model-call counter.
  EXPECT_EQ(hybrid.err, plain.err + "model_calls=0\n");
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

TEST(CliGen, DeterministicFilesAndNames) {
  const fs::path a = make_dir("gen-a");
  const fs::path b = make_dir("gen-b");
  const std::string flags = "gen --vars 20 --clauses 60 --count 3 --seed 5 --family rand3";
  EXPECT_EQ(run_cli(flags + " --out " + a.string()).status, 0);
  EXPECT_EQ(run_cli(flags + " --out " + b.string()).status, 0);
  for (int i = 0; i < 3; ++i) {
    const std::string name = "rand3-20-60-" + std::to_string(i) + ".cnf";
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name));
  }
  const qsat::CnfFormula f = qsat::parse_dimacs_file(a / "rand3-20-60-0.cnf").formula;
  EXPECT_EQ(f.num_vars, 20);
  EXPECT_EQ(f.clauses.size(), 60u);

  const fs::path empty = make_dir("gen-none");
  EXPECT_EQ(run_cli("gen --count 0 --out " + empty.string()).status, 0);
  EXPECT_TRUE(fs::is_empty(empty));
}

TEST(CliGen, FamilyControlsSatisfiabilityFilter) {
  const fs::path uf = make_dir("gen-uf");
  ASSERT_EQ(
      run_cli("gen --vars 10 --clauses 43 --count 2 --seed 1 --family uf --out " + uf.string())
          .status,
      0);
  const fs::path uuf = make_dir("gen-uuf");
  ASSERT_EQ(
      run_cli("gen --vars 10 --clauses 43 --count 2 --seed 1 --family uuf --out " + uuf.string())
          .status,
      0);
  for (int i = 0; i < 2; ++i) {
    const std::string name = std::to_string(i) + ".cnf";
    const qsat::CnfFormula sat =
        qsat::parse_dimacs_file(uf / ("uf-10-43-" + name)).formula;
    EXPECT_TRUE(qsat::solve_vsids(sat).verdict->sat);
    const qsat::CnfFormula unsat =
        qsat::parse_dimacs_file(uuf / ("uuf-10-43-" + name)).formula;
    EXPECT_FALSE(qsat::solve_vsids(unsat).verdict->sat);
  }
}

// ---------------------------------------------------------------------------
// graph-dump
// ---------------------------------------------------------------------------

TEST(CliGraphDump, PrintsResidualGraphDeterministically) {
  const fs::path file = scratch_dir() / "dump-chain.cnf";
  write_file(file, kChainCnf);
  const std::string want =
      "p graph 5 8\n"
      "v 0 var 1\n"
      "v 1 var 2\n"
      "v 2 var 3\n"
      "v 3 clause\n"
      "v 4 clause\n"
      "e 0 3 pos\n"
      "e 3 0 pos\n"
      "e 1 3 pos\n"
      "e 3 1 pos\n"
      "e 1 4 neg\n"
      "e 4 1 neg\n"
      "e 2 4 pos\n"
      "e 4 2 pos\n";
  const CmdResult r1 = run_cli("graph-dump " + file.string());
  EXPECT_EQ(r1.status, 0);
  EXPECT_EQ(r1.out, want);
  EXPECT_EQ(run_cli("graph-dump " + file.string()).out, want);
}

TEST(CliGraphDump, LevelZeroDecidedInstancesPrintNotice) {
  const fs::path sat_units = scratch_dir() / "dump-units.cnf";
  write_file(sat_units, "p cnf 2 2\n1 0\n-1 2 0\n");
  const CmdResult sat = run_cli("graph-dump " + sat_units.string());
  EXPECT_EQ(sat.status, 0);
  EXPECT_EQ(sat.out, "c empty graph: instance decided at level 0 (SATISFIABLE)\n");

  // A tautological clause is dropped at parse time, leaving no residual.
  const fs::path taut = scratch_dir() / "dump-taut.cnf";
  write_file(taut, "p cnf 2 1\n1 -1 2 0\n");
  const CmdResult empty = run_cli("graph-dump " + taut.string());
  EXPECT_EQ(empty.status, 0);
  EXPECT_EQ(empty.out, "c empty graph: instance decided at level 0 (SATISFIABLE)\n");

  const fs::path unsat = scratch_dir() / "dump-unsat.cnf";
  write_file(unsat, "p cnf 1 2\n1 0\n-1 0\n");
  const CmdResult u = run_cli("graph-dump " + unsat.string());
  EXPECT_EQ(u.status, 0);
  EXPECT_EQ(u.out, "c empty graph: instance decided at level 0 (UNSATISFIABLE)\n");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::string train_config_text(const fs::path& data, const fs::path& out,
                              uint64_t batch_updates) {
  std::ostringstream cfg;
  cfg << "seed = 4\n"
      << "data_dir = " << data.string() << "\n"
      << "out_dir = " << out.string() << "\n"
      << "train_split = 4\n"
      << "val_split = 2\n"
      << "test_split = 1\n"
      << "batch_updates = " << batch_updates << "\n"
      << "lr = 0.001\n"
      << "batch_size = 4\n"
      << "buffer_capacity = 64\n"
      << "eps_start = 1.0\n"
      << "eps_end = 0.1\n"
      << "eps_decay_steps = 40\n"
      << "warmup_env_steps = 10\n"
      << "gamma = 0.9\n"
      << "update_every = 2\n"
      << "target_sync_every = 2\n"
      << "max_decisions_train = 100\n"
      << "step_penalty = -0.1\n"
      << "validation_every = 1\n"
      << "validation_cap = 0\n"
      << "mp_iterations = 2\n"
      << "core_hidden_units = 16\n"
      << "encoder_out = 8\n"
      << "core_out_vertex = 16\n"
      << "core_out_edge = 16\n"
      << "core_out_global = 8\n"
      << "decoder_out = 8\n";
  return cfg.str();
}

qsat::GnDims train_test_dims() {
  qsat::GnDims d;
  d.iterations = 2;
  d.core_hidden = 16;
  d.encoder_out = 8;
  d.core_vertex_out = 16;
  d.core_edge_out = 16;
  d.core_global_out = 8;
  d.decoder_out = 8;
  return d;
}

TEST(CliTrain, WritesArtifactsThenResumeContinuesCounting) {
  const fs::path data = make_dir("train-data");
  make_dataset(data, 7, 10, 30, 3);
  const fs::path out = make_dir("train-out");
  const fs::path cfg = scratch_dir() / "train.cfg";
  write_file(cfg, train_config_text(data, out, 2));

  const CmdResult r = run_cli("train --config " + cfg.string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.err.find("trained for 2 updates"), std::string::npos) << r.err;
  for (const char* name :
       {"ckpt_last.bin", "ckpt_best.bin", "opt_state.bin", "log.jsonl", "config.resolved"})
    EXPECT_TRUE(fs::exists(out / name)) << name;

  // Checkpoints load back with the configured dimensions; the resolved config
  // snapshot is the canonical serialization of the parsed input.
  EXPECT_NO_THROW(qsat::load_params((out / "ckpt_last.bin").string(), train_test_dims()));
  EXPECT_NO_THROW(qsat::load_params((out / "ckpt_best.bin").string(), train_test_dims()));
  EXPECT_EQ(slurp(out / "config.resolved"),
            qsat::serialize_config(qsat::parse_config_file(cfg.string())));

  // Every log record is one JSON object per line.
  std::istringstream log(slurp(out / "log.jsonl"));
  std::string line;
  size_t records = 0;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    EXPECT_NO_THROW(json::parse(line)) << line;
    ++records;
  }
  EXPECT_GT(records, 0u);

  // Resuming with a larger budget picks up the saved counters and finishes
  // the remaining updates.
  const fs::path cfg2 = scratch_dir() / "train-resume.cfg";
  write_file(cfg2, train_config_text(data, out, 4));
  const CmdResult r2 = run_cli("train --config " + cfg2.string() + " --resume");
  ASSERT_EQ(r2.status, 0) << r2.err;
  EXPECT_NE(r2.err.find("resuming at env_steps="), std::string::npos) << r2.err;
  EXPECT_NE(r2.err.find("trained for 4 updates"), std::string::npos) << r2.err;
  EXPECT_NO_THROW(qsat::load_params((out / "ckpt_last.bin").string(), train_test_dims()));
}

TEST(CliTrain, ZeroBudgetWritesInitialParameters) {
  const fs::path data = make_dir("train0-data");
  make_dataset(data, 7, 10, 30, 3);
  const fs::path out = make_dir("train0-out");
  const fs::path cfg = scratch_dir() / "train0.cfg";
  write_file(cfg, train_config_text(data, out, 0));

  const CmdResult r = run_cli("train --config " + cfg.string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.err.find("trained for 0 updates"), std::string::npos) << r.err;
  const qsat::GraphNetParams written =
      qsat::load_params((out / "ckpt_last.bin").string(), train_test_dims());
  const qsat::GraphNetParams expected =
      qsat::init_params(qsat::derive_seed(4, qsat::detail::kRoleInit), train_test_dims());
  EXPECT_TRUE(qsat::params_equal(written, expected));
  EXPECT_EQ(slurp(out / "log.jsonl"), "");
}

// ---------------------------------------------------------------------------
// eval / sweep-caps / prop-stats / scaling-probe / sweep-data
// ---------------------------------------------------------------------------

TEST(CliEval, CapZeroScoresUnitRatiosAndIsDeterministic) {
  const fs::path data = make_dir("eval-data");
  make_dataset(data, 6, 8, 34, 11);
  const fs::path ckpt = make_checkpoint("eval-ckpt.bin", 3);
  const fs::path out = make_dir("eval-out");

  const std::string base =
      "eval --model " + ckpt.string() + " --data " + data.string() + " --cap 0 --out ";
  const CmdResult r = run_cli(base + out.string());
  ASSERT_EQ(r.status, 0) << r.err;

  const json report = json::parse(slurp(out / "eval.json"));
  EXPECT_EQ(report["cap"], 0);
  ASSERT_EQ(report["models"].size(), 1u);
  EXPECT_EQ(report["models"][0]["problems"], 6);
  EXPECT_DOUBLE_EQ(report["models"][0]["mrir"]["median"].get<double>(), 1.0);
  for (const auto& ratio : report["models"][0]["mrir"]["ratios"])
    EXPECT_DOUBLE_EQ(ratio.get<double>(), 1.0);
  EXPECT_FALSE(report.contains("aggregate"));

  const std::string csv = slurp(out / "eval.csv");
  EXPECT_EQ(csv.rfind("model,problem,baseline_no_restart,baseline_restart,agent,"
                      "model_calls,ratio\n",
                      0),
            0u);
  EXPECT_EQ(count_lines(csv), 7u);  // header + one row per problem

  const fs::path out2 = make_dir("eval-out2");
  ASSERT_EQ(run_cli(base + out2.string()).status, 0);
  EXPECT_EQ(slurp(out / "eval.json"), slurp(out2 / "eval.json"));
}

TEST(CliEval, MultipleModelsAggregateAcrossSeeds) {
  const fs::path data = make_dir("eval-agg-data");
  make_dataset(data, 4, 8, 34, 12);
  const fs::path c1 = make_checkpoint("eval-agg-1.bin", 3);
  const fs::path c2 = make_checkpoint("eval-agg-2.bin", 4);
  const fs::path out = make_dir("eval-agg-out");

  const CmdResult r = run_cli("eval --model " + c1.string() + " --model " + c2.string() +
                              " --data " + data.string() + " --cap 0 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.err;
  const json report = json::parse(slurp(out / "eval.json"));
  ASSERT_EQ(report["models"].size(), 2u);
  ASSERT_TRUE(report.contains("aggregate"));
  EXPECT_DOUBLE_EQ(report["aggregate"]["average"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["aggregate"]["min"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["aggregate"]["max"].get<double>(), 1.0);
}

TEST(CliSweepCaps, WritesJsonReportAndPlotData) {
  const fs::path data = make_dir("caps-data");
  make_dataset(data, 4, 8, 34, 13);
  const fs::path ckpt = make_checkpoint("caps-ckpt.bin", 3);
  const fs::path out = make_dir("caps-out");

  const CmdResult r = run_cli("sweep-caps --model " + ckpt.string() + " --data " +
                              data.string() + " --caps 0 2 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.err;
  const json report = json::parse(slurp(out / "caps_sweep.json"));
  ASSERT_EQ(report.size(), 2u);
  EXPECT_EQ(report[0]["cap"], 0);
  EXPECT_DOUBLE_EQ(report[0]["mrir"]["median"].get<double>(), 1.0);
  EXPECT_EQ(report[1]["cap"], 2);
  EXPECT_GT(report[1]["mrir"]["median"].get<double>(), 0.0);

  const std::string dat = slurp(out / "fig_caps.dat");
  EXPECT_EQ(dat.rfind("# cap median_mrir\n0 1\n", 0), 0u) << dat;
  EXPECT_EQ(count_lines(dat), 3u);

  // The sweep is anchored at cap zero; omitting it is an error.
  const CmdResult bad = run_cli("sweep-caps --model " + ckpt.string() + " --data " +
                                data.string() + " --caps 1 2 --out " + out.string());
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.err.find("error: "), std::string::npos);
}

TEST(CliScalingProbe, ReportsAffineMacFitDeterministically) {
  const fs::path p1 = scratch_dir() / "probe-1.json";
  const fs::path p2 = scratch_dir() / "probe-2.json";
  const std::string flags = "scaling-probe --sizes 100 200 400 --seed 1 --out ";
  const CmdResult r = run_cli(flags + p1.string());
  ASSERT_EQ(r.status, 0) << r.err;

  const json report = json::parse(r.out);
  ASSERT_EQ(report["points"].size(), 3u);
  EXPECT_EQ(report["points"][0]["vertices"], 100);
  EXPECT_EQ(report["points"][0]["edges"], 520);  // 26 edges per 5-vertex block
  EXPECT_EQ(report["points"][2]["vertices"], 400);
  EXPECT_EQ(report["points"][2]["edges"], 2080);
  EXPECT_GT(report["points"][2]["macs"].get<double>(),
            report["points"][0]["macs"].get<double>());
  EXPECT_GT(report["slope"].get<double>(), 0.0);
  EXPECT_GT(report["r_squared"].get<double>(), 0.99);

  ASSERT_EQ(run_cli(flags + p2.string()).status, 0);
  EXPECT_EQ(slurp(p1), slurp(p2));  // wall time goes to stderr only
}

TEST(CliPropStats, ReportsBaselineAndOptionalAgentMeans) {
  const fs::path data = make_dir("prop-data");
  make_dataset(data, 4, 8, 34, 14);
  const CmdResult base = run_cli("prop-stats --data " + data.string());
  ASSERT_EQ(base.status, 0) << base.err;
  const json jb = json::parse(base.out);
  EXPECT_GE(jb["baseline_mean"].get<double>(), 1.0);
  EXPECT_EQ(jb["baseline_per_problem"].size(), 4u);
  EXPECT_FALSE(jb.contains("agent_mean"));

  const fs::path ckpt = make_checkpoint("prop-ckpt.bin", 3);
  const CmdResult agent =
      run_cli("prop-stats --data " + data.string() + " --model " + ckpt.string() + " --cap 1");
  ASSERT_EQ(agent.status, 0) << agent.err;
  const json ja = json::parse(agent.out);
  EXPECT_GE(ja["agent_mean"].get<double>(), 1.0);
  EXPECT_EQ(ja["agent_per_problem"].size(), 4u);
  EXPECT_DOUBLE_EQ(ja["baseline_mean"].get<double>(), jb["baseline_mean"].get<double>());
}

TEST(CliSweepData, TrainsPrefixSubsetsPerSeed) {
  const fs::path data = make_dir("sweep-data-data");
  make_dataset(data, 7, 10, 30, 15);
  const fs::path out = make_dir("sweep-data-out");
  const fs::path cfg = scratch_dir() / "sweep-data.cfg";
  // Minimal budget; the test-set evaluation runs at cap zero so every
  // sweep point scores exactly one.
  std::string text = train_config_text(data, out / "unused-train-out", 1);
  const size_t warm = text.find("warmup_env_steps = 10\n");
  ASSERT_NE(warm, std::string::npos);
  text.replace(warm, std::string("warmup_env_steps = 10\n").size(), "warmup_env_steps = 2\n");
  const size_t upd = text.find("update_every = 2\n");
  ASSERT_NE(upd, std::string::npos);
  text.replace(upd, std::string("update_every = 2\n").size(), "update_every = 1\n");
  const size_t bsz = text.find("batch_size = 4\n");
  ASSERT_NE(bsz, std::string::npos);
  text.replace(bsz, std::string("batch_size = 4\n").size(), "batch_size = 2\n");
  text += "max_decisions_eval = 0\n";
  write_file(cfg, text);

  const CmdResult r = run_cli("sweep-data --config " + cfg.string() +
                              " --sizes 1 2 --seeds 7 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.err;
  const json report = json::parse(slurp(out / "data_sweep.json"));
  ASSERT_EQ(report.size(), 2u);
  EXPECT_EQ(report[0]["train_size"], 1);
  EXPECT_EQ(report[1]["train_size"], 2);
  ASSERT_EQ(report[0]["medians"].size(), 1u);
  EXPECT_DOUBLE_EQ(report[0]["medians"][0].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report[1]["average"].get<double>(), 1.0);

  const std::string dat = slurp(out / "fig_data.dat");
  EXPECT_EQ(dat.rfind("# train_size avg_mrir min_mrir max_mrir\n", 0), 0u);
  EXPECT_EQ(count_lines(dat), 3u);
}

TEST(CliUsage, UnknownSubcommandFails) {
  const CmdResult r = run_cli("frobnicate");
  EXPECT_NE(r.status, 0);
}

}  // namespace
