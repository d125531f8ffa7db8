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
// DQN training over the solver environment: epsilon-greedy action
// selection, uniform replay, target network, TD loss with exact gradients,
// global-norm clipping, Adam, and a deterministic single-threaded loop.

#pragma once

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qsat/cnf.hpp"
#include "qsat/env.hpp"
#include "qsat/evaluation.hpp"
#include "qsat/graph_net.hpp"
#include "qsat/rng.hpp"
#include "qsat/state_graph.hpp"

namespace qsat {

struct Transition {
  StateGraph state;
  Lit action;
  double reward = 0.0;
  std::optional<StateGraph> next_state;  // nullopt on termination
  bool done = false;
  bool truncated = false;  // cap hit; next_state is a valid graph to bootstrap from
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity = 20000) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  // Oldest entry evicted first once full.
  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  // Uniform with replacement over the current contents.
  std::vector<const Transition*> sample(Rng& rng, size_t batch) const {
    if (data_.empty()) throw std::logic_error("sampling from an empty replay buffer");
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (size_t i = 0; i < batch; ++i) out.push_back(&data_[rng.below(data_.size())]);
    return out;
  }

  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }

 private:
  size_t capacity_;
  size_t next_ = 0;
  std::vector<Transition> data_;
};

// Linear decay over environment steps, clamped at the end value.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  uint64_t decay_steps = 30000;

  double value(uint64_t env_steps) const {
    if (env_steps >= decay_steps) return end;
    return start + (end - start) * static_cast<double>(env_steps) /
                       static_cast<double>(decay_steps);
  }
};

struct AdamConfig {
  double lr = 0.00002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  uint64_t step = 0;
  GraphNetParams m, v;
};

inline OptimizerState make_optimizer(const GraphNetParams& params, AdamConfig config = {}) {
  OptimizerState opt;
  opt.config = config;
  opt.m = zeros_like(params);
  opt.v = zeros_like(params);
  return opt;
}

inline double global_l2_norm(const GraphNetParams& g) {
  double sq = 0.0;
  visit_blocks(g, [&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

inline void adam_step(GraphNetParams& params, OptimizerState& opt, const GraphNetParams& grads) {
  ++opt.step;
  const AdamConfig& c = opt.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  auto pb = block_ptrs(params);
  auto mb = block_ptrs(opt.m);
  auto vb = block_ptrs(opt.v);
  auto gb = block_ptrs(grads);
  for (size_t i = 0; i < pb.size(); ++i) {
    Matrix& m = *mb[i];
    Matrix& v = *vb[i];
    const Matrix& g = *gb[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    pb[i]->array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

// With probability epsilon a uniform draw over the 2n actions, otherwise the
// global Q argmax with ties to the lowest (vertex, column).
inline Lit select_action(const GraphNetParams& params, const StateGraph& g, double epsilon,
                         Rng& rng, ForwardTape& tape) {
  if (g.num_var_vertices == 0)
    throw std::invalid_argument("select_action on a graph without variable vertices");
  if (rng.next_double() < epsilon) {
    const uint64_t idx = rng.below(2ull * g.num_var_vertices);
    return decode_action(g, static_cast<int>(idx / 2), static_cast<int>(idx % 2));
  }
  const QOutput& q = forward(params, g, tape, /*keep_tape=*/false);
  const auto [row, col] = greedy_action(q);
  return decode_action(g, row, col);
}

inline Lit select_action(const GraphNetParams& params, const StateGraph& g, double epsilon,
                         Rng& rng) {
  ForwardTape tape;
  return select_action(params, g, epsilon, rng, tape);
}

namespace detail {

// Row of the action's variable in the graph's Q matrix (var_ids ascending).
inline int action_row(const StateGraph& g, const Lit& action) {
  const auto it = std::lower_bound(g.var_ids.begin(), g.var_ids.end(), action.var);
  if (it == g.var_ids.end() || *it != action.var)
    throw std::logic_error("transition action variable missing from its state graph");
  return static_cast<int>(it - g.var_ids.begin());
}

}  // namespace detail

struct TdWorkspace {
  ForwardTape online_tape;
  ForwardTape target_tape;
  BackwardScratch scratch;
  Matrix grad_q;
};

// Mean squared TD error over the batch. Targets: r for done transitions,
// r + gamma * max target-net Q(next) otherwise (truncated ones bootstrap).
// Gradients flow only through the online Q(s, a) term and are accumulated
// into grads_out (zeroed here).
inline double td_loss(const GraphNetParams& online, const GraphNetParams& target,
                      const std::vector<const Transition*>& batch, double gamma,
                      GraphNetParams& grads_out, TdWorkspace& ws) {
  if (batch.empty()) throw std::invalid_argument("td_loss on an empty batch");
  set_zero(grads_out);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const Transition* tr : batch) {
    const QOutput& q = forward(online, tr->state, ws.online_tape, /*keep_tape=*/true);
    const int row = detail::action_row(tr->state, tr->action);
    const int col = tr->action.neg ? 1 : 0;
    double y = tr->reward;
    if (!tr->done) {
      if (!tr->next_state)
        throw std::logic_error("non-terminal transition without a next state");
      const QOutput& qn = forward(target, *tr->next_state, ws.target_tape, /*keep_tape=*/false);
      y += gamma * qn.maxCoeff();
    }
    const double delta = q(row, col) - y;
    loss += delta * delta * scale;
    ws.grad_q.setZero(q.rows(), q.cols());
    ws.grad_q(row, col) = 2.0 * delta * scale;
    backward(online, tr->state, ws.online_tape, ws.grad_q, grads_out, ws.scratch);
  }
  return loss;
}

inline double td_loss(const GraphNetParams& online, const GraphNetParams& target,
                      const std::vector<const Transition*>& batch, double gamma,
                      GraphNetParams& grads_out) {
  TdWorkspace ws;
  return td_loss(online, target, batch, gamma, grads_out, ws);
}

struct TrainerState {
  GraphNetParams online;
  GraphNetParams target;
  OptimizerState opt;
  ReplayBuffer buffer{20000};
  EpsilonSchedule schedule;
  uint64_t env_steps = 0;
  uint64_t batch_updates = 0;
  double gamma = 0.99;
  double grad_clip = 1.0;
  uint64_t target_sync_every = 10;
};

// Clips the global L2 norm to grad_clip, takes one Adam step, and copies
// target <- online every target_sync_every updates. Returns the batch-update
// count where a sync happened, if any.
inline std::optional<uint64_t> apply_update(TrainerState& t, GraphNetParams& grads) {
  const double norm = global_l2_norm(grads);
  if (!std::isfinite(norm))
    throw std::runtime_error("non-finite gradient (global norm " + std::to_string(norm) + ")");
  if (norm > t.grad_clip && norm > 0.0) {
    const double s = t.grad_clip / norm;
    visit_blocks(grads, [&](const std::string&, Matrix& m) { m *= s; });
  }
  adam_step(t.online, t.opt, grads);
  ++t.batch_updates;
  if (t.batch_updates % t.target_sync_every == 0) {
    t.target = t.online;
    return t.batch_updates;
  }
  return std::nullopt;
}

struct TrainerConfig {
  uint64_t seed = 0;
  uint64_t batch_updates_budget = 50000;
  size_t batch_size = 64;
  uint64_t warmup_env_steps = 5000;
  uint64_t update_every = 4;
  uint64_t target_sync_every = 10;
  uint64_t validation_every = 1000;  // in batch updates
  double gamma = 0.99;
  double grad_clip = 1.0;
  size_t buffer_capacity = 20000;
  AdamConfig adam;
  EpsilonSchedule epsilon;
  EnvConfig env;
  GnDims dims;
  std::optional<int> validation_cap;  // nullopt: every decision model-driven
};

struct TrainResult {
  GraphNetParams best;   // best-validation snapshot (initial params if never improved)
  GraphNetParams final;  // online params at the end of the run
  double best_validation = std::numeric_limits<double>::quiet_NaN();
  uint64_t env_steps = 0;
  uint64_t batch_updates = 0;
  std::vector<std::string> log_lines;           // JSONL records
  std::vector<uint64_t> target_sync_points;     // batch-update counts at syncs
  std::vector<double> validation_history;       // validation MRIR medians
  bool all_losses_finite = true;
};

namespace detail {

enum RngRole : uint64_t { kRoleInit = 0, kRoleExplore = 1, kRoleSample = 2, kRoleProblem = 3 };

inline std::string format_double_json(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Single-threaded, fully seeded training loop:
//   pick a training problem uniformly, roll an epsilon-greedy episode pushing
//   every transition, and after the warm-up period do one batch update every
//   update_every env steps; every validation_every updates evaluate on the
//   validation set and snapshot on strictly better MRIR.
class Trainer {
 public:
  Trainer(Dataset train_set, Dataset val_set, TrainerConfig config)
      : config_(std::move(config)),
        train_set_(std::move(train_set)),
        val_set_(std::move(val_set)),
        explore_rng_(derive_seed(config_.seed, detail::kRoleExplore)),
        sample_rng_(derive_seed(config_.seed, detail::kRoleSample)),
        problem_rng_(derive_seed(config_.seed, detail::kRoleProblem)) {
    if (train_set_.empty()) throw std::invalid_argument("empty training set");
    if (val_set_.empty()) throw std::invalid_argument("empty validation set");
    state_.online = init_params(derive_seed(config_.seed, detail::kRoleInit), config_.dims);
    state_.target = state_.online;
    state_.opt = make_optimizer(state_.online, config_.adam);
    state_.buffer = ReplayBuffer(config_.buffer_capacity);
    state_.schedule = config_.epsilon;
    state_.gamma = config_.gamma;
    state_.grad_clip = config_.grad_clip;
    state_.target_sync_every = config_.target_sync_every;
    best_ = state_.online;
    grads_ = zeros_like(state_.online);
  }

  TrainResult run() {
    bool stop = false;
    uint64_t consecutive_skips = 0;
    while (!stop && state_.batch_updates < config_.batch_updates_budget) {
      const size_t pick = problem_rng_.below(train_set_.size());
      SatEnv env(config_.env, /*training=*/true);
      auto obs = env.reset(train_set_[pick].second);
      if (std::holds_alternative<Verdict>(obs)) {
        // Decided at level 0: no decisions to learn from.
        if (++consecutive_skips > 10 * train_set_.size())
          throw std::runtime_error("every sampled training instance is decided at level 0");
        continue;
      }
      consecutive_skips = 0;
      StateGraph state = std::move(std::get<StateGraph>(obs));
      double episode_return = 0.0;
      while (true) {
        const double eps = state_.schedule.value(state_.env_steps);
        const Lit action = select_action(state_.online, state, eps, explore_rng_, action_tape_);
        const StepResult sr = env.step(action);
        ++state_.env_steps;
        episode_return += sr.reward;
        Transition tr;
        tr.state = std::move(state);
        tr.action = action;
        tr.reward = sr.reward;
        tr.next_state = sr.state;
        tr.done = sr.done;
        tr.truncated = sr.truncated;
        state_.buffer.push(std::move(tr));
        if (sr.state && !sr.truncated) state = std::move(*sr.state);
        if (maybe_update(&stop)) break;  // budget exhausted mid-episode
        if (sr.done || sr.truncated) break;
      }
      log_episode(episode_return);
    }
    // A short run whose budget is not a validation multiple still deserves a
    // model-selection pass at the end.
    if (state_.batch_updates > 0 && state_.batch_updates % config_.validation_every != 0)
      run_validation();
    TrainResult out;
    out.best = best_;
    out.final = state_.online;
    out.best_validation = best_validation_;
    out.env_steps = state_.env_steps;
    out.batch_updates = state_.batch_updates;
    out.log_lines = log_lines_;
    out.target_sync_points = target_sync_points_;
    out.validation_history = validation_history_;
    out.all_losses_finite = all_losses_finite_;
    return out;
  }

  const TrainerState& state() const { return state_; }
  TrainerState& mutable_state() { return state_; }
  const GraphNetParams& best_params() const { return best_; }
  double best_validation() const { return best_validation_; }

  // ---- resume support: counters, optimizer, target/best params, RNGs ----

  static constexpr char kSidecarMagic[8] = {'Q', 'S', 'A', 'T', 'O', 'P', 'T', '1'};

  void save_sidecar(const std::string& path) const {
    std::string body;
    body.append(kSidecarMagic, sizeof(kSidecarMagic));
    detail::put_raw(body, static_cast<uint32_t>(1));
    detail::put_dims(body, state_.online.dims);
    detail::put_raw(body, state_.env_steps);
    detail::put_raw(body, state_.batch_updates);
    detail::put_raw(body, state_.opt.step);
    detail::put_raw(body, best_validation_);
    auto put_rng = [&](const Rng& rng) {
      std::ostringstream ss;
      ss << rng;
      detail::put_raw(body, static_cast<uint32_t>(ss.str().size()));
      body.append(ss.str());
    };
    put_rng(explore_rng_);
    put_rng(sample_rng_);
    put_rng(problem_rng_);
    detail::put_blocks(body, state_.opt.m);
    detail::put_blocks(body, state_.opt.v);
    detail::put_blocks(body, state_.target);
    detail::put_blocks(body, best_);
    detail::write_checksummed(path, body);
  }

  // Restores everything except the replay buffer (refilled by new episodes)
  // and the online params, which live in the regular checkpoint.
  void load_sidecar(const std::string& path) {
    const std::string body = detail::read_checksummed(path);
    detail::ByteReader r{body};
    const std::string magic = r.get_bytes(sizeof(kSidecarMagic));
    if (std::memcmp(magic.data(), kSidecarMagic, sizeof(kSidecarMagic)) != 0)
      throw std::runtime_error("not an optimizer sidecar: '" + path + "'");
    const uint32_t version = r.get<uint32_t>();
    if (version != 1)
      throw std::runtime_error("unsupported sidecar version " + std::to_string(version));
    const GnDims dims = detail::get_dims(r);
    if (!(dims == state_.online.dims))
      throw std::runtime_error("sidecar dimension mismatch: '" + path + "'");
    state_.env_steps = r.get<uint64_t>();
    state_.batch_updates = r.get<uint64_t>();
    state_.opt.step = r.get<uint64_t>();
    best_validation_ = r.get<double>();
    auto get_rng = [&](Rng& rng) {
      const uint32_t len = r.get<uint32_t>();
      std::istringstream ss(r.get_bytes(len));
      ss >> rng;
      if (!ss) throw std::runtime_error("corrupt RNG state in sidecar");
    };
    get_rng(explore_rng_);
    get_rng(sample_rng_);
    get_rng(problem_rng_);
    detail::get_blocks(r, state_.opt.m);
    detail::get_blocks(r, state_.opt.v);
    detail::get_blocks(r, state_.target);
    detail::get_blocks(r, best_);
    if (r.pos != body.size())
      throw std::runtime_error("trailing bytes in sidecar '" + path + "'");
  }

 private:
  // Performs a batch update when the cadence and warm-up allow. Returns true
  // when the budget is exhausted and the caller should stop.
  bool maybe_update(bool* stop) {
    if (state_.env_steps <= config_.warmup_env_steps) return false;
    if ((state_.env_steps - config_.warmup_env_steps) % config_.update_every != 0) return false;
    if (state_.buffer.size() < config_.batch_size) return false;
    if (state_.batch_updates >= config_.batch_updates_budget) {
      *stop = true;
      return true;
    }
    const auto batch = state_.buffer.sample(sample_rng_, config_.batch_size);
    last_loss_ = td_loss(state_.online, state_.target, batch, state_.gamma, grads_, td_ws_);
    if (!std::isfinite(last_loss_)) {
      // Abort this update; three in a row aborts the run.
      all_losses_finite_ = false;
      if (++nonfinite_streak_ >= 3) {
        log_lines_.push_back("{\"type\":\"abort\",\"reason\":\"non-finite loss streak\"}");
        throw std::runtime_error("aborting: 3 consecutive non-finite losses");
      }
      return false;
    }
    nonfinite_streak_ = 0;
    const auto synced = apply_update(state_, grads_);
    if (synced) target_sync_points_.push_back(*synced);
    if (state_.batch_updates % config_.validation_every == 0) run_validation();
    if (state_.batch_updates >= config_.batch_updates_budget) {
      *stop = true;
      return true;
    }
    return false;
  }

  void run_validation() {
    EvalOptions options;
    options.model_call_cap = config_.validation_cap;
    options.brute_force_check = false;  // verdict cross-checks still apply
    const EvalReport report = evaluate_dataset(state_.online, val_set_, options);
    const double median = report.mrir.median;
    validation_history_.push_back(median);
    if (std::isnan(best_validation_) ? !std::isnan(median) : median > best_validation_) {
      best_validation_ = median;
      best_ = state_.online;
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "{\"type\":\"validation\",\"env_steps\":%" PRIu64
                  ",\"batch_updates\":%" PRIu64
                  ",\"validation_mrir\":%s,\"best_validation\":%s}",
                  state_.env_steps, state_.batch_updates,
                  detail::format_double_json(median).c_str(),
                  detail::format_double_json(best_validation_).c_str());
    log_lines_.push_back(buf);
  }

  void log_episode(double episode_return) {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "{\"type\":\"episode\",\"env_steps\":%" PRIu64 ",\"batch_updates\":%" PRIu64
                  ",\"loss\":%s,\"epsilon\":%s,\"episode_return\":%s}",
                  state_.env_steps, state_.batch_updates,
                  detail::format_double_json(last_loss_).c_str(),
                  detail::format_double_json(state_.schedule.value(state_.env_steps)).c_str(),
                  detail::format_double_json(episode_return).c_str());
    log_lines_.push_back(buf);
  }

  TrainerConfig config_;
  Dataset train_set_;
  Dataset val_set_;
  TrainerState state_;
  Rng explore_rng_, sample_rng_, problem_rng_;
  GraphNetParams best_;
  double best_validation_ = std::numeric_limits<double>::quiet_NaN();
  GraphNetParams grads_;
  TdWorkspace td_ws_;
  ForwardTape action_tape_;
  double last_loss_ = std::numeric_limits<double>::quiet_NaN();
  uint64_t nonfinite_streak_ = 0;
  bool all_losses_finite_ = true;
  std::vector<std::string> log_lines_;
  std::vector<uint64_t> target_sync_points_;
  std::vector<double> validation_history_;
};

inline TrainResult train(const Dataset& train_set, const Dataset& val_set,
                         const TrainerConfig& config) {
  Trainer trainer(train_set, val_set, config);
  return trainer.run();
}

}  // namespace qsat
