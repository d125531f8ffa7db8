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
// Command-line entry point: solve/generate/train/evaluate/sweep/dump.
// `solve` follows SAT-competition conventions (s/v lines, exit 10/20).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qsat/cnf.hpp"
#include "qsat/config.hpp"
#include "qsat/dqn.hpp"
#include "qsat/env.hpp"
#include "qsat/evaluation.hpp"
#include "qsat/graph_net.hpp"
#include "qsat/solver.hpp"
#include "qsat/state_graph.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitSat = 10;
constexpr int kExitUnsat = 20;
constexpr int kExitError = 1;

std::optional<int> cap_from_flag(int cap) {
  if (cap < 0) return std::nullopt;  // unlimited
  return cap;
}

void print_verdict(const qsat::Verdict& verdict, int num_vars) {
  if (!verdict.sat) {
    std::cout << "s UNSATISFIABLE\n";
    return;
  }
  std::cout << "s SATISFIABLE\n";
  std::cout << "v";
  for (int v = 1; v <= num_vars; ++v) {
    const auto it = verdict.model.find(v);
    const bool value = it != verdict.model.end() && it->second;
    std::cout << ' ' << (value ? v : -v);
  }
  std::cout << " 0\n";
}

void print_stats(const qsat::SolverStats& stats, uint64_t model_calls, bool hybrid) {
  std::cerr << "decisions=" << stats.decisions << "\n"
            << "propagations=" << stats.propagations << "\n"
            << "conflicts=" << stats.conflicts << "\n"
            << "restarts=" << stats.restarts << "\n";
  if (hybrid) std::cerr << "model_calls=" << model_calls << "\n";
}

int cmd_solve(const std::string& file, bool restarts, const std::string& model_path, int cap) {
  qsat::ParseResult parsed = qsat::parse_dimacs_file(file);
  for (const std::string& w : parsed.warnings) std::cerr << "c warning: " << w << "\n";
  qsat::SolverConfig config;
  config.restarts = restarts;
  qsat::Verdict verdict;
  if (!model_path.empty()) {
    const qsat::GraphNetParams params = qsat::load_params(model_path);
    const qsat::HybridResult r =
        qsat::solve_hybrid(parsed.formula, params, cap_from_flag(cap), config);
    verdict = *r.verdict;
    print_verdict(verdict, parsed.formula.num_vars);
    print_stats(r.stats, r.model_calls, true);
  } else {
    const qsat::SolveResult r = qsat::solve_vsids(parsed.formula, config);
    verdict = *r.verdict;
    print_verdict(verdict, parsed.formula.num_vars);
    print_stats(r.stats, 0, false);
  }
  if (verdict.sat && !qsat::evaluate_assignment(parsed.formula, verdict.model))
    throw std::logic_error("internal error: model does not satisfy the formula");
  return verdict.sat ? kExitSat : kExitUnsat;
}

int cmd_gen(int n_vars, int n_clauses, int count, uint64_t seed, const std::string& outdir,
            const std::string& family, std::string filter) {
  if (filter.empty()) {
    if (family == "uf")
      filter = "sat";
    else if (family == "uuf")
      filter = "unsat";
    else
      filter = "any";
  }
  if (filter != "sat" && filter != "unsat" && filter != "any")
    throw std::runtime_error("--filter must be sat, unsat, or any");
  fs::create_directories(outdir);
  uint64_t attempt = 0;
  for (int i = 0; i < count; ++i) {
    qsat::CnfFormula formula;
    while (true) {
      const uint64_t inst_seed = qsat::derive_seed(seed, attempt++);
      formula = qsat::generate_random_3sat(n_vars, n_clauses, inst_seed);
      if (filter == "any") break;
      const qsat::SolveResult r = qsat::solve_vsids(formula);
      if ((filter == "sat") == r.verdict->sat) break;
      if (attempt > 10000ull * static_cast<uint64_t>(count) + 10000)
        throw std::runtime_error("generation filter not satisfiable in a reasonable time");
    }
    const std::string name = family + "-" + std::to_string(n_vars) + "-" +
                             std::to_string(n_clauses) + "-" + std::to_string(i) + ".cnf";
    std::ofstream out(fs::path(outdir) / name, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + name);
    out << qsat::serialize_dimacs(formula);
  }
  std::cerr << "wrote " << count << " instances to " << outdir << "\n";
  return 0;
}

// Canonical dataset order is the sorted filename order from load_cnf_directory.
struct Splits {
  qsat::Dataset train, val, test;
};

Splits split_dataset(const qsat::Dataset& all, const qsat::RunConfig& config) {
  const size_t want = static_cast<size_t>(config.train_split) + config.val_split +
                      config.test_split;
  if (all.size() < want)
    throw std::runtime_error("dataset has " + std::to_string(all.size()) +
                             " instances, config wants " + std::to_string(want));
  Splits s;
  auto it = all.begin();
  s.train.assign(it, it + config.train_split);
  it += config.train_split;
  s.val.assign(it, it + config.val_split);
  it += config.val_split;
  s.test.assign(it, it + config.test_split);
  return s;
}

int cmd_train(const std::string& config_path, bool resume) {
  const qsat::RunConfig config = qsat::parse_config_file(config_path);
  if (config.data_dir.empty()) throw std::runtime_error("config: data_dir is required");
  fs::create_directories(config.out_dir);
  const qsat::Dataset all = qsat::load_cnf_directory(config.data_dir);
  const Splits splits = split_dataset(all, config);
  qsat::Trainer trainer(splits.train, splits.val, qsat::to_trainer_config(config));
  const fs::path out(config.out_dir);
  const std::string last_ckpt = (out / "ckpt_last.bin").string();
  const std::string best_ckpt = (out / "ckpt_best.bin").string();
  const std::string sidecar = (out / "opt_state.bin").string();
  const std::string log_path = (out / "log.jsonl").string();
  if (resume) {
    trainer.mutable_state().online = qsat::load_params(last_ckpt, qsat::to_gn_dims(config));
    trainer.load_sidecar(sidecar);
    std::cerr << "resuming at env_steps=" << trainer.state().env_steps
              << " batch_updates=" << trainer.state().batch_updates << "\n";
  }
  const auto t0 = std::chrono::steady_clock::now();
  const qsat::TrainResult result = trainer.run();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  qsat::save_params(last_ckpt, result.final);
  qsat::save_params(best_ckpt, result.best);
  trainer.save_sidecar(sidecar);
  {
    std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
    for (const std::string& line : result.log_lines) log << line << "\n";
  }
  {
    std::ofstream snap(out / "config.resolved");
    snap << qsat::serialize_config(config);
  }
  std::cerr << "trained for " << result.batch_updates << " updates / " << result.env_steps
            << " env steps in " << secs << "s; best validation mrir=" << result.best_validation
            << "\n";
  return 0;
}

json mrir_to_json(const qsat::MrirReport& mrir) {
  json j;
  j["median"] = mrir.median;
  j["ratios"] = mrir.ratios;
  return j;
}

int cmd_eval(const std::vector<std::string>& models, const std::string& data_dir, int cap,
             const std::string& out_dir, bool brute_force) {
  const qsat::Dataset dataset = qsat::load_cnf_directory(data_dir);
  qsat::EvalOptions options;
  options.model_call_cap = cap_from_flag(cap);
  options.brute_force_check = brute_force;
  fs::create_directories(out_dir);
  json report;
  report["cap"] = cap;
  report["models"] = json::array();
  std::vector<double> medians;
  std::ofstream csv(fs::path(out_dir) / "eval.csv");
  csv << "model,problem,baseline_no_restart,baseline_restart,agent,model_calls,ratio\n";
  for (const std::string& path : models) {
    const qsat::GraphNetParams params = qsat::load_params(path);
    const qsat::EvalReport r = qsat::evaluate_dataset(params, dataset, options);
    json jm;
    jm["checkpoint"] = path;
    jm["mrir"] = mrir_to_json(r.mrir);
    jm["problems"] = r.results.size();
    jm["excluded"] = r.excluded;
    report["models"].push_back(jm);
    medians.push_back(r.mrir.median);
    for (size_t i = 0; i < r.results.size(); ++i) {
      const qsat::ProblemResult& pr = r.results[i];
      csv << path << ',' << pr.id << ',' << pr.baseline_iterations_no_restart << ','
          << pr.baseline_iterations_restart << ',' << pr.agent_iterations << ','
          << pr.model_calls << ',' << r.mrir.ratios[i] << "\n";
    }
  }
  if (medians.size() > 1) {
    const qsat::SeedAggregate agg = qsat::aggregate_medians(medians);
    report["aggregate"] = {{"average", agg.average}, {"min", agg.min}, {"max", agg.max}};
  }
  std::ofstream out(fs::path(out_dir) / "eval.json");
  out << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_sweep_caps(const std::string& model, const std::string& data_dir,
                   std::vector<int> caps, const std::string& out_dir, bool brute_force) {
  if (caps.empty()) caps = qsat::RunConfig{}.eval_caps;
  const qsat::GraphNetParams params = qsat::load_params(model);
  const qsat::Dataset dataset = qsat::load_cnf_directory(data_dir);
  qsat::EvalOptions options;
  options.brute_force_check = brute_force;
  const auto points = qsat::decision_cap_sweep(params, dataset, caps, options);
  fs::create_directories(out_dir);
  json report = json::array();
  std::ofstream dat(fs::path(out_dir) / "fig_caps.dat");
  dat << "# cap median_mrir\n";
  for (const auto& p : points) {
    report.push_back({{"cap", p.cap}, {"mrir", mrir_to_json(p.mrir)}, {"problems", p.problems}});
    dat << p.cap << ' ' << p.mrir.median << "\n";
  }
  std::ofstream out(fs::path(out_dir) / "caps_sweep.json");
  out << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_sweep_data(const std::string& config_path, const std::vector<int>& sizes,
                   const std::vector<uint64_t>& seeds, const std::string& out_dir) {
  const qsat::RunConfig config = qsat::parse_config_file(config_path);
  if (config.data_dir.empty()) throw std::runtime_error("config: data_dir is required");
  const qsat::Dataset all = qsat::load_cnf_directory(config.data_dir);
  const Splits splits = split_dataset(all, config);
  qsat::EvalOptions options;
  options.model_call_cap = cap_from_flag(config.max_decisions_eval);
  options.brute_force_check = false;
  const qsat::TrainFn train_fn = [&](const qsat::Dataset& subset, uint64_t seed) {
    qsat::TrainerConfig tc = qsat::to_trainer_config(config);
    tc.seed = seed;
    return qsat::train(subset, splits.val, tc).best;
  };
  const auto points = qsat::data_efficiency_sweep(train_fn, splits.train, sizes, seeds,
                                                  splits.test, options);
  fs::create_directories(out_dir);
  json report = json::array();
  std::ofstream dat(fs::path(out_dir) / "fig_data.dat");
  dat << "# train_size avg_mrir min_mrir max_mrir\n";
  for (const auto& p : points) {
    report.push_back({{"train_size", p.train_size},
                      {"medians", p.medians},
                      {"average", p.aggregate.average},
                      {"min", p.aggregate.min},
                      {"max", p.aggregate.max}});
    dat << p.train_size << ' ' << p.aggregate.average << ' ' << p.aggregate.min << ' '
        << p.aggregate.max << "\n";
  }
  std::ofstream out(fs::path(out_dir) / "data_sweep.json");
  out << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_scaling_probe(std::vector<int> sizes, uint64_t seed, const std::string& out_path) {
  if (sizes.empty())
    for (int s = 100; s <= 12800; s *= 2) sizes.push_back(s);
  const qsat::GraphNetParams params = qsat::init_params(seed);
  const qsat::ScalingReport report = qsat::inference_scaling_probe(params, sizes);
  json j;
  j["points"] = json::array();
  for (const auto& p : report.points) {
    j["points"].push_back({{"vertices", p.vertices}, {"edges", p.edges}, {"macs", p.macs}});
    std::cerr << "vertices=" << p.vertices << " macs=" << p.macs << " seconds=" << p.seconds
              << "\n";
  }
  j["slope"] = report.slope;
  j["intercept"] = report.intercept;
  j["r_squared"] = report.r_squared;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << "\n";
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_prop_stats(const std::string& data_dir, const std::string& model, int cap) {
  const qsat::Dataset dataset = qsat::load_cnf_directory(data_dir);
  qsat::EvalOptions options;
  options.model_call_cap = cap_from_flag(cap);
  json j;
  const qsat::PropagationStats baseline = qsat::propagation_stats(dataset);
  j["baseline_mean"] = baseline.mean;
  if (!model.empty()) {
    const qsat::GraphNetParams params = qsat::load_params(model);
    const qsat::PropagationStats agent = qsat::propagation_stats(dataset, &params, options);
    j["agent_mean"] = agent.mean;
    j["agent_per_problem"] = json::array();
    for (const auto& [name, v] : agent.per_problem)
      j["agent_per_problem"].push_back({{"problem", name}, {"value", v}});
  }
  j["baseline_per_problem"] = json::array();
  for (const auto& [name, v] : baseline.per_problem)
    j["baseline_per_problem"].push_back({{"problem", name}, {"value", v}});
  j["excluded"] = baseline.excluded;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_graph_dump(const std::string& file) {
  qsat::ParseResult parsed = qsat::parse_dimacs_file(file);
  for (const std::string& w : parsed.warnings) std::cerr << "c warning: " << w << "\n";
  qsat::SolverCore core(parsed.formula, qsat::SolverConfig{});
  if (core.state() == qsat::StepOutcome::kUnsat) {
    std::cout << "c empty graph: instance decided at level 0 (UNSATISFIABLE)\n";
    return 0;
  }
  if (core.state() == qsat::StepOutcome::kSat || core.all_original_satisfied()) {
    std::cout << "c empty graph: instance decided at level 0 (SATISFIABLE)\n";
    return 0;
  }
  std::cout << qsat::dump_state_graph(qsat::build_state_graph(core));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-network guided CDCL SAT toolkit"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Solve a DIMACS file (exit 10 SAT / 20 UNSAT)");
  std::string solve_file, solve_model;
  bool solve_restarts = false;
  int solve_cap = -1;
  solve->add_option("file", solve_file, "DIMACS CNF file")->required();
  solve->add_flag("--restarts", solve_restarts, "enable Luby restarts");
  solve->add_option("--model", solve_model, "parameter checkpoint for model-guided branching");
  solve->add_option("--cap", solve_cap, "max model-driven decisions, -1 = unlimited");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate random 3-SAT DIMACS files");
  int gen_vars = 50, gen_clauses = 218, gen_count = 1;
  uint64_t gen_seed = 0;
  std::string gen_out = ".", gen_family = "rand3", gen_filter;
  gen->add_option("--vars", gen_vars, "variables per instance");
  gen->add_option("--clauses", gen_clauses, "clauses per instance");
  gen->add_option("--count", gen_count, "number of instances");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--family", gen_family, "name prefix: uf (sat), uuf (unsat), rand3 (any)");
  gen->add_option("--filter", gen_filter, "sat|unsat|any (default from family)");

  // train
  auto* train = app.add_subcommand("train", "Train the branching model from a config file");
  std::string train_config;
  bool train_resume = false;
  train->add_option("--config", train_config, "run configuration file")->required();
  train->add_flag("--resume", train_resume, "continue from out_dir checkpoints");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints on a dataset (MRIR report)");
  std::vector<std::string> eval_models;
  std::string eval_data, eval_out = "eval-out";
  int eval_cap = -1;
  bool eval_no_bf = false;
  eval->add_option("--model", eval_models, "checkpoint(s); repeat for seed aggregation")
      ->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--cap", eval_cap, "model-call cap, -1 = unlimited");
  eval->add_option("--out", eval_out, "report directory");
  eval->add_flag("--no-brute-force", eval_no_bf, "skip brute-force verdict cross-checks");

  // sweep-caps
  auto* sweep_caps = app.add_subcommand("sweep-caps", "MRIR across model-call caps");
  std::string sc_model, sc_data, sc_out = "sweep-caps-out";
  std::vector<int> sc_caps;
  bool sc_no_bf = false;
  sweep_caps->add_option("--model", sc_model, "checkpoint")->required();
  sweep_caps->add_option("--data", sc_data, "dataset directory")->required();
  sweep_caps->add_option("--caps", sc_caps, "cap list (default 0,10,50,100,300,500,1000)")->delimiter(',');
  sweep_caps->add_option("--out", sc_out, "report directory");
  sweep_caps->add_flag("--no-brute-force", sc_no_bf, "skip brute-force verdict cross-checks");

  // sweep-data
  auto* sweep_data = app.add_subcommand("sweep-data", "MRIR across training-set sizes");
  std::string sd_config, sd_out = "sweep-data-out";
  std::vector<int> sd_sizes;
  std::vector<uint64_t> sd_seeds;
  sweep_data->add_option("--config", sd_config, "run configuration file")->required();
  sweep_data->add_option("--sizes", sd_sizes, "training-set sizes")->required()->delimiter(',');
  sweep_data->add_option("--seeds", sd_seeds, "training seeds")->required()->delimiter(',');
  sweep_data->add_option("--out", sd_out, "report directory");

  // scaling-probe
  auto* probe = app.add_subcommand("scaling-probe", "Forward cost vs graph size");
  std::vector<int> probe_sizes;
  uint64_t probe_seed = 0;
  std::string probe_out;
  probe->add_option("--sizes", probe_sizes, "vertex counts (default 100..12800 doubling)")->delimiter(',');
  probe->add_option("--seed", probe_seed, "parameter seed (counts are seed-independent)");
  probe->add_option("--out", probe_out, "output JSON file");

  // prop-stats
  auto* prop = app.add_subcommand("prop-stats", "Assignments changed per decision");
  std::string pp_data, pp_model;
  int pp_cap = -1;
  prop->add_option("--data", pp_data, "dataset directory")->required();
  prop->add_option("--model", pp_model, "checkpoint (optional; baseline always reported)");
  prop->add_option("--cap", pp_cap, "model-call cap, -1 = unlimited");

  // graph-dump
  auto* dump = app.add_subcommand("graph-dump", "Dump the initial state graph of a formula");
  std::string dump_file;
  dump->add_option("file", dump_file, "DIMACS CNF file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(solve_file, solve_restarts, solve_model, solve_cap);
    if (*gen)
      return cmd_gen(gen_vars, gen_clauses, gen_count, gen_seed, gen_out, gen_family, gen_filter);
    if (*train) return cmd_train(train_config, train_resume);
    if (*eval) return cmd_eval(eval_models, eval_data, eval_cap, eval_out, !eval_no_bf);
    if (*sweep_caps) return cmd_sweep_caps(sc_model, sc_data, sc_caps, sc_out, !sc_no_bf);
    if (*sweep_data) return cmd_sweep_data(sd_config, sd_sizes, sd_seeds, sd_out);
    if (*probe) return cmd_scaling_probe(probe_sizes, probe_seed, probe_out);
    if (*prop) return cmd_prop_stats(pp_data, pp_model, pp_cap);
    if (*dump) return cmd_graph_dump(dump_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
