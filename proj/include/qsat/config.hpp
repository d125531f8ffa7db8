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
// Run configuration: every training/evaluation hyperparameter with its
// stock default, serialized as a flat key = value file. Unknown keys are
// rejected and the format round-trips exactly.

#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsat/dqn.hpp"

namespace qsat {

struct RunConfig {
  uint64_t seed = 0;
  std::string data_dir;       // directory of .cnf instances
  std::string out_dir = "run";
  int train_split = 800;
  int val_split = 100;
  int test_split = 100;

  uint64_t batch_updates = 50000;
  double lr = 0.00002;
  int batch_size = 64;
  int buffer_capacity = 20000;
  double eps_start = 1.0;
  double eps_end = 0.01;
  uint64_t eps_decay_steps = 30000;
  uint64_t warmup_env_steps = 5000;
  double gamma = 0.99;
  int update_every = 4;
  int target_sync_every = 10;
  int max_decisions_train = 500;
  int max_decisions_eval = 500;  // evaluation model-call cap; -1 = unlimited
  double step_penalty = -0.1;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  std::string grad_clip_norm = "l2";
  int validation_every = 1000;
  int validation_cap = -1;  // -1 = unlimited model calls during validation

  int mp_iterations = 4;
  int core_hidden_layers = 1;
  int core_hidden_units = 64;
  int encoder_out = 32;
  int core_out_vertex = 64;
  int core_out_edge = 64;
  int core_out_global = 32;
  int decoder_out = 32;

  std::vector<int> eval_caps = {0, 10, 50, 100, 300, 500, 1000};

  bool operator==(const RunConfig&) const = default;
};

struct ConfigField {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& s) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': invalid number '" + s + "'");
  }
  if (pos != s.size())
    throw std::runtime_error("config key '" + key + "': trailing characters in '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& s) {
  size_t pos = 0;
  long long v;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': invalid integer '" + s + "'");
  }
  if (pos != s.size())
    throw std::runtime_error("config key '" + key + "': trailing characters in '" + s + "'");
  return v;
}

inline std::string fmt_int_list(const std::vector<int>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    // tolerate surrounding spaces inside list items
    const size_t b = item.find_first_not_of(" \t");
    const size_t e = item.find_last_not_of(" \t");
    if (b == std::string::npos)
      throw std::runtime_error("config key '" + key + "': empty list element");
    out.push_back(static_cast<int>(parse_int(key, item.substr(b, e - b + 1))));
  }
  return out;
}

}  // namespace detail

// Schema: one entry per key, in serialization order.
inline const std::vector<ConfigField>& config_fields() {
  auto u64 = [](const std::string& key, uint64_t RunConfig::* f) {
    return ConfigField{
        key, [f](const RunConfig& c) { return std::to_string(c.*f); },
        [f, key](RunConfig& c, const std::string& s) {
          const long long v = detail::parse_int(key, s);
          if (v < 0) throw std::runtime_error("config key '" + key + "': must be non-negative");
          c.*f = static_cast<uint64_t>(v);
        }};
  };
  auto i32 = [](const std::string& key, int RunConfig::* f) {
    return ConfigField{
        key, [f](const RunConfig& c) { return std::to_string(c.*f); },
        [f, key](RunConfig& c, const std::string& s) {
          c.*f = static_cast<int>(detail::parse_int(key, s));
        }};
  };
  auto f64 = [](const std::string& key, double RunConfig::* f) {
    return ConfigField{
        key, [f](const RunConfig& c) { return detail::fmt_double(c.*f); },
        [f, key](RunConfig& c, const std::string& s) { c.*f = detail::parse_double(key, s); }};
  };
  auto str = [](const std::string& key, std::string RunConfig::* f) {
    return ConfigField{key, [f](const RunConfig& c) { return c.*f; },
                       [f](RunConfig& c, const std::string& s) { c.*f = s; }};
  };
  static const std::vector<ConfigField> fields = {
      u64("seed", &RunConfig::seed),
      str("data_dir", &RunConfig::data_dir),
      str("out_dir", &RunConfig::out_dir),
      i32("train_split", &RunConfig::train_split),
      i32("val_split", &RunConfig::val_split),
      i32("test_split", &RunConfig::test_split),
      u64("batch_updates", &RunConfig::batch_updates),
      f64("lr", &RunConfig::lr),
      i32("batch_size", &RunConfig::batch_size),
      i32("buffer_capacity", &RunConfig::buffer_capacity),
      f64("eps_start", &RunConfig::eps_start),
      f64("eps_end", &RunConfig::eps_end),
      u64("eps_decay_steps", &RunConfig::eps_decay_steps),
      u64("warmup_env_steps", &RunConfig::warmup_env_steps),
      f64("gamma", &RunConfig::gamma),
      i32("update_every", &RunConfig::update_every),
      i32("target_sync_every", &RunConfig::target_sync_every),
      i32("max_decisions_train", &RunConfig::max_decisions_train),
      i32("max_decisions_eval", &RunConfig::max_decisions_eval),
      f64("step_penalty", &RunConfig::step_penalty),
      f64("adam_beta1", &RunConfig::adam_beta1),
      f64("adam_beta2", &RunConfig::adam_beta2),
      f64("adam_eps", &RunConfig::adam_eps),
      f64("grad_clip", &RunConfig::grad_clip),
      str("grad_clip_norm", &RunConfig::grad_clip_norm),
      i32("validation_every", &RunConfig::validation_every),
      i32("validation_cap", &RunConfig::validation_cap),
      i32("mp_iterations", &RunConfig::mp_iterations),
      i32("core_hidden_layers", &RunConfig::core_hidden_layers),
      i32("core_hidden_units", &RunConfig::core_hidden_units),
      i32("encoder_out", &RunConfig::encoder_out),
      i32("core_out_vertex", &RunConfig::core_out_vertex),
      i32("core_out_edge", &RunConfig::core_out_edge),
      i32("core_out_global", &RunConfig::core_out_global),
      i32("decoder_out", &RunConfig::decoder_out),
      ConfigField{"eval_caps",
                  [](const RunConfig& c) { return detail::fmt_int_list(c.eval_caps); },
                  [](RunConfig& c, const std::string& s) {
                    c.eval_caps = detail::parse_int_list("eval_caps", s);
                  }},
  };
  return fields;
}

inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw std::runtime_error("invalid config: " + msg); };
  if (c.lr <= 0) fail("lr must be positive");
  if (c.batch_size <= 0) fail("batch_size must be positive");
  if (c.buffer_capacity <= 0) fail("buffer_capacity must be positive");
  if (c.gamma < 0 || c.gamma >= 1) fail("gamma must be in [0, 1)");
  if (c.step_penalty >= 0) fail("step_penalty must be negative");
  if (c.eps_start < 0 || c.eps_start > 1 || c.eps_end < 0 || c.eps_end > 1)
    fail("exploration rates must be in [0, 1]");
  if (c.update_every <= 0) fail("update_every must be positive");
  if (c.target_sync_every <= 0) fail("target_sync_every must be positive");
  if (c.validation_every <= 0) fail("validation_every must be positive");
  if (c.max_decisions_train < 0) fail("max_decisions_train must be non-negative");
  if (c.max_decisions_eval < -1) fail("max_decisions_eval must be -1 (unlimited) or >= 0");
  if (c.validation_cap < -1) fail("validation_cap must be -1 (unlimited) or >= 0");
  if (c.grad_clip <= 0) fail("grad_clip must be positive");
  if (c.grad_clip_norm != "l2") fail("grad_clip_norm: only 'l2' is supported");
  if (c.train_split < 0 || c.val_split < 0 || c.test_split < 0)
    fail("splits must be non-negative");
  if (c.core_hidden_layers != 1) fail("core_hidden_layers: only 1 is supported");
  for (int cap : c.eval_caps)
    if (cap < 0) fail("eval_caps entries must be non-negative");
  for (int d : {c.mp_iterations, c.core_hidden_units, c.encoder_out, c.core_out_vertex,
                c.core_out_edge, c.core_out_global, c.decoder_out})
    if (d <= 0) fail("network dimensions must be positive");
}

inline std::string serialize_config(const RunConfig& c) {
  std::string out = "# qsat run configuration\n";
  for (const ConfigField& f : config_fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

// Flat key = value, '#' lines are comments, unknown or repeated keys are
// errors. Values keep everything after the first '=' (trimmed).
inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::vector<bool> seen(config_fields().size(), false);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool matched = false;
    const auto& fields = config_fields();
    for (size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].key != key) continue;
      if (seen[i])
        throw std::runtime_error("config line " + std::to_string(lineno) + ": duplicate key '" +
                                 key + "'");
      seen[i] = true;
      fields[i].set(c, value);
      matched = true;
      break;
    }
    if (!matched)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": unknown key '" +
                               key + "'");
  }
  validate_config(c);
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream ss(text);
  return parse_config(ss);
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

inline GnDims to_gn_dims(const RunConfig& c) {
  GnDims d;
  d.encoder_out = c.encoder_out;
  d.core_edge_out = c.core_out_edge;
  d.core_vertex_out = c.core_out_vertex;
  d.core_global_out = c.core_out_global;
  d.core_hidden = c.core_hidden_units;
  d.decoder_out = c.decoder_out;
  d.iterations = c.mp_iterations;
  return d;
}

inline TrainerConfig to_trainer_config(const RunConfig& c) {
  TrainerConfig t;
  t.seed = c.seed;
  t.batch_updates_budget = c.batch_updates;
  t.batch_size = static_cast<size_t>(c.batch_size);
  t.warmup_env_steps = c.warmup_env_steps;
  t.update_every = static_cast<uint64_t>(c.update_every);
  t.target_sync_every = static_cast<uint64_t>(c.target_sync_every);
  t.validation_every = static_cast<uint64_t>(c.validation_every);
  t.gamma = c.gamma;
  t.grad_clip = c.grad_clip;
  t.buffer_capacity = static_cast<size_t>(c.buffer_capacity);
  t.adam = AdamConfig{c.lr, c.adam_beta1, c.adam_beta2, c.adam_eps};
  t.epsilon = EpsilonSchedule{c.eps_start, c.eps_end, c.eps_decay_steps};
  t.env.step_penalty = c.step_penalty;
  t.env.max_decisions_train = c.max_decisions_train;
  t.dims = to_gn_dims(c);
  t.validation_cap =
      c.validation_cap < 0 ? std::nullopt : std::optional<int>(c.validation_cap);
  return t;
}

}  // namespace qsat
