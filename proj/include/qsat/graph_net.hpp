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
// Encode-process-decode graph network over the variable-clause state graph,
// producing two Q-values per variable vertex. Forward evaluation keeps a
// tape of intermediates; backward computes exact reverse-mode gradients of
// an arbitrary linear functional of the Q output.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsat/rng.hpp"
#include "qsat/state_graph.hpp"

namespace qsat {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using QOutput = Matrix;  // (num variable vertices) x 2

constexpr double kLayerNormEps = 1e-5;

struct GnDims {
  int vertex_in = 2;
  int edge_in = 2;
  int global_in = 1;
  int encoder_out = 32;
  int core_edge_out = 64;
  int core_vertex_out = 64;
  int core_global_out = 32;
  int core_hidden = 64;
  int decoder_out = 32;
  int q_out = 2;
  int iterations = 4;

  bool operator==(const GnDims&) const = default;

  // Core inputs concatenate the encoder output with the previous core output.
  int edge_cat() const { return encoder_out + core_edge_out; }
  int vertex_cat() const { return encoder_out + core_vertex_out; }
  int global_cat() const { return encoder_out + core_global_out; }
  int edge_mlp_in() const { return global_cat() + edge_cat() + 2 * vertex_cat(); }
  int vertex_mlp_in() const { return global_cat() + vertex_cat() + core_edge_out; }
  int global_mlp_in() const { return global_cat() + core_edge_out + core_vertex_out; }
};

// One GN updater: one or two linear layers, ReLU after each, then layer norm.
struct Updater {
  std::vector<Matrix> w;  // in x out
  std::vector<Matrix> b;  // 1 x out
  Matrix ln_gain;         // 1 x out
  Matrix ln_bias;         // 1 x out
};

struct GraphNetParams {
  GnDims dims;
  Updater enc_v, enc_e, enc_u;
  Updater core_e, core_v, core_u;
  Updater dec_v;
  Matrix out_w;  // decoder_out x q_out
  Matrix out_b;  // 1 x q_out
};

// Walks every parameter block in canonical order with its stable name.
template <typename Params, typename Fn>
void visit_blocks(Params& p, Fn&& fn) {
  auto upd = [&](auto& u, const char* prefix) {
    for (size_t i = 0; i < u.w.size(); ++i) {
      fn(std::string(prefix) + ".w" + std::to_string(i), u.w[i]);
      fn(std::string(prefix) + ".b" + std::to_string(i), u.b[i]);
    }
    fn(std::string(prefix) + ".ln_gain", u.ln_gain);
    fn(std::string(prefix) + ".ln_bias", u.ln_bias);
  };
  upd(p.enc_v, "enc_v");
  upd(p.enc_e, "enc_e");
  upd(p.enc_u, "enc_u");
  upd(p.core_e, "core_e");
  upd(p.core_v, "core_v");
  upd(p.core_u, "core_u");
  upd(p.dec_v, "dec_v");
  fn(std::string("out.w"), p.out_w);
  fn(std::string("out.b"), p.out_b);
}

inline std::vector<Matrix*> block_ptrs(GraphNetParams& p) {
  std::vector<Matrix*> out;
  visit_blocks(p, [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}
inline std::vector<const Matrix*> block_ptrs(const GraphNetParams& p) {
  std::vector<const Matrix*> out;
  visit_blocks(p, [&](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

inline size_t param_count(const GraphNetParams& p) {
  size_t n = 0;
  visit_blocks(p, [&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

inline void set_zero(GraphNetParams& p) {
  visit_blocks(p, [](const std::string&, Matrix& m) { m.setZero(); });
}

inline GraphNetParams zeros_like(const GraphNetParams& p) {
  GraphNetParams z = p;
  set_zero(z);
  return z;
}

inline bool params_equal(const GraphNetParams& a, const GraphNetParams& b) {
  if (!(a.dims == b.dims)) return false;
  auto pa = block_ptrs(a), pb = block_ptrs(b);
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->rows() != pb[i]->rows() || pa[i]->cols() != pb[i]->cols()) return false;
    if (std::memcmp(pa[i]->data(), pb[i]->data(), sizeof(double) * pa[i]->size()) != 0)
      return false;
  }
  return true;
}

// Zero-filled parameters with the block shapes implied by `d`.
inline GraphNetParams make_param_shapes(const GnDims& d) {
  GraphNetParams p;
  p.dims = d;
  auto linear = [](Updater& u, int in, int out) {
    u.w.push_back(Matrix::Zero(in, out));
    u.b.push_back(Matrix::Zero(1, out));
  };
  auto finish = [](Updater& u) {
    const int out = static_cast<int>(u.w.back().cols());
    u.ln_gain = Matrix::Ones(1, out);
    u.ln_bias = Matrix::Zero(1, out);
  };
  linear(p.enc_v, d.vertex_in, d.encoder_out);
  finish(p.enc_v);
  linear(p.enc_e, d.edge_in, d.encoder_out);
  finish(p.enc_e);
  linear(p.enc_u, d.global_in, d.encoder_out);
  finish(p.enc_u);
  linear(p.core_e, d.edge_mlp_in(), d.core_hidden);
  linear(p.core_e, d.core_hidden, d.core_edge_out);
  finish(p.core_e);
  linear(p.core_v, d.vertex_mlp_in(), d.core_hidden);
  linear(p.core_v, d.core_hidden, d.core_vertex_out);
  finish(p.core_v);
  linear(p.core_u, d.global_mlp_in(), d.core_hidden);
  linear(p.core_u, d.core_hidden, d.core_global_out);
  finish(p.core_u);
  linear(p.dec_v, d.core_vertex_out, d.decoder_out);
  finish(p.dec_v);
  p.out_w = Matrix::Zero(d.decoder_out, d.q_out);
  p.out_b = Matrix::Zero(1, d.q_out);
  return p;
}

// Weights from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, layer-norm
// gain one and bias zero. Deterministic per seed; blocks are filled row-major
// in canonical order.
inline GraphNetParams init_params(uint64_t seed, const GnDims& dims = GnDims{}) {
  GraphNetParams p = make_param_shapes(dims);
  Rng rng(seed);
  auto fill = [&](Matrix& w) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = (2.0 * rng.next_double() - 1.0) * scale;
  };
  for (Updater* u : {&p.enc_v, &p.enc_e, &p.enc_u, &p.core_e, &p.core_v, &p.core_u, &p.dec_v})
    for (Matrix& w : u->w) fill(w);
  fill(p.out_w);
  return p;
}

struct UpdaterTape {
  Matrix input;             // concatenated updater input
  Matrix hidden;            // post-ReLU hidden (two-layer updaters only)
  Matrix act;               // post-ReLU of the last linear, pre layer norm
  Matrix xhat;              // layer-norm normalized values
  Eigen::VectorXd inv_std;  // per row
  Matrix output;            // post layer norm
};

struct CoreTape {
  UpdaterTape edge, vertex, global;
};

struct ForwardTape {
  GnDims dims;
  int num_vertices = 0;
  int num_var_vertices = 0;
  int num_edges = 0;
  UpdaterTape enc_v, enc_e, enc_u;
  std::vector<CoreTape> core;
  UpdaterTape dec;
  Matrix q;
  uint64_t macs = 0;            // multiply-accumulate count of the forward pass
  double min_relu_pre = 0.0;    // smallest |pre-activation| seen at any ReLU
  uint64_t relu_active = 0;     // ReLU units with positive pre-activation
  bool full = false;            // per-iteration tapes retained (needed by backward)

  // scratch, not consumed by backward
  Matrix ucat, vcat, ecat, agg;
};

namespace detail {

inline void layer_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& bias,
                               Matrix& xhat, Eigen::VectorXd& inv_std, Matrix& out) {
  const Eigen::VectorXd mu = x.rowwise().mean();
  xhat = x;
  xhat.colwise() -= mu;
  const Eigen::VectorXd var = xhat.array().square().rowwise().mean();
  inv_std = (var.array() + kLayerNormEps).rsqrt();
  xhat.array().colwise() *= inv_std.array();
  out = xhat;
  out.array().rowwise() *= gain.row(0).array();
  out.array().rowwise() += bias.row(0).array();
}

// t.input must be filled; computes t.output.
inline void apply_updater(const Updater& u, UpdaterTape& t, uint64_t* macs, double* min_pre,
                          uint64_t* active) {
  const Matrix* x = &t.input;
  if (u.w.size() == 2) {
    t.hidden.noalias() = t.input * u.w[0];
    t.hidden.rowwise() += u.b[0].row(0);
    *macs += static_cast<uint64_t>(t.input.rows()) * u.w[0].rows() * u.w[0].cols();
    if (t.hidden.size() > 0) {
      *min_pre = std::min(*min_pre, t.hidden.cwiseAbs().minCoeff());
      *active += static_cast<uint64_t>((t.hidden.array() > 0.0).count());
    }
    t.hidden = t.hidden.cwiseMax(0.0);
    x = &t.hidden;
  }
  t.act.noalias() = (*x) * u.w.back();
  t.act.rowwise() += u.b.back().row(0);
  *macs += static_cast<uint64_t>(x->rows()) * u.w.back().rows() * u.w.back().cols();
  if (t.act.size() > 0) {
    *min_pre = std::min(*min_pre, t.act.cwiseAbs().minCoeff());
    *active += static_cast<uint64_t>((t.act.array() > 0.0).count());
  }
  t.act = t.act.cwiseMax(0.0);
  layer_norm_forward(t.act, u.ln_gain, u.ln_bias, t.xhat, t.inv_std, t.output);
}

}  // namespace detail

// Encoder, `iterations` core passes, decoder, linear output projection.
// With keep_tape=false only two core tapes are alternated, which is enough
// for inference but not for backward.
inline const QOutput& forward(const GraphNetParams& p, const StateGraph& g, ForwardTape& t,
                              bool keep_tape = true) {
  const GnDims& d = p.dims;
  const int nv = g.num_vertices;
  const int ne = g.num_edges();
  const int nvar = g.num_var_vertices;
  t.dims = d;
  t.num_vertices = nv;
  t.num_edges = ne;
  t.num_var_vertices = nvar;
  t.macs = 0;
  t.min_relu_pre = std::numeric_limits<double>::infinity();
  t.relu_active = 0;
  t.full = keep_tape;

  t.enc_v.input.resize(nv, d.vertex_in);
  for (int v = 0; v < nv; ++v) {
    const auto f = g.vertex_feature(v);
    t.enc_v.input(v, 0) = f[0];
    t.enc_v.input(v, 1) = f[1];
  }
  t.enc_e.input.resize(ne, d.edge_in);
  for (int e = 0; e < ne; ++e) {
    const auto f = g.edge_feature(e);
    t.enc_e.input(e, 0) = f[0];
    t.enc_e.input(e, 1) = f[1];
  }
  t.enc_u.input.resize(1, d.global_in);
  t.enc_u.input(0, 0) = g.global_feature();
  detail::apply_updater(p.enc_v, t.enc_v, &t.macs, &t.min_relu_pre, &t.relu_active);
  detail::apply_updater(p.enc_e, t.enc_e, &t.macs, &t.min_relu_pre, &t.relu_active);
  detail::apply_updater(p.enc_u, t.enc_u, &t.macs, &t.min_relu_pre, &t.relu_active);

  const int T = d.iterations;
  t.core.resize(keep_tape ? static_cast<size_t>(T) : std::min(T, 2));
  const CoreTape* prev = nullptr;
  for (int it = 0; it < T; ++it) {
    CoreTape& ct = t.core[keep_tape ? it : it % 2];
    // Concatenate encoder output with the previous core output (zeros on the
    // first pass).
    t.ucat.resize(1, d.global_cat());
    t.ucat.leftCols(d.encoder_out) = t.enc_u.output;
    t.vcat.resize(nv, d.vertex_cat());
    t.vcat.leftCols(d.encoder_out) = t.enc_v.output;
    t.ecat.resize(ne, d.edge_cat());
    t.ecat.leftCols(d.encoder_out) = t.enc_e.output;
    if (prev) {
      t.ucat.rightCols(d.core_global_out) = prev->global.output;
      t.vcat.rightCols(d.core_vertex_out) = prev->vertex.output;
      t.ecat.rightCols(d.core_edge_out) = prev->edge.output;
    } else {
      t.ucat.rightCols(d.core_global_out).setZero();
      t.vcat.rightCols(d.core_vertex_out).setZero();
      t.ecat.rightCols(d.core_edge_out).setZero();
    }

    // Edge update: phi_e(u, e, v_src, v_dst).
    Matrix& xe = ct.edge.input;
    xe.resize(ne, d.edge_mlp_in());
    const int uc = d.global_cat(), ec = d.edge_cat(), vc = d.vertex_cat();
    xe.leftCols(uc) = t.ucat.replicate(ne, 1);
    xe.middleCols(uc, ec) = t.ecat;
    for (int e = 0; e < ne; ++e) {
      xe.row(e).segment(uc + ec, vc) = t.vcat.row(g.edge_src[e]);
      xe.row(e).segment(uc + ec + vc, vc) = t.vcat.row(g.edge_dst[e]);
    }
    detail::apply_updater(p.core_e, ct.edge, &t.macs, &t.min_relu_pre, &t.relu_active);

    // Vertex update: phi_v(u, v, sum of incoming updated edges).
    t.agg.setZero(nv, d.core_edge_out);
    for (int e = 0; e < ne; ++e) t.agg.row(g.edge_dst[e]) += ct.edge.output.row(e);
    Matrix& xv = ct.vertex.input;
    xv.resize(nv, d.vertex_mlp_in());
    xv.leftCols(uc) = t.ucat.replicate(nv, 1);
    xv.middleCols(uc, vc) = t.vcat;
    xv.rightCols(d.core_edge_out) = t.agg;
    detail::apply_updater(p.core_v, ct.vertex, &t.macs, &t.min_relu_pre, &t.relu_active);

    // Global update: phi_u(u, mean of updated edges, mean of updated vertices).
    Matrix& xu = ct.global.input;
    xu.resize(1, d.global_mlp_in());
    xu.leftCols(uc) = t.ucat;
    if (ne > 0)
      xu.middleCols(uc, d.core_edge_out) = ct.edge.output.colwise().mean();
    else
      xu.middleCols(uc, d.core_edge_out).setZero();
    if (nv > 0)
      xu.rightCols(d.core_vertex_out) = ct.vertex.output.colwise().mean();
    else
      xu.rightCols(d.core_vertex_out).setZero();
    detail::apply_updater(p.core_u, ct.global, &t.macs, &t.min_relu_pre, &t.relu_active);
    prev = &ct;
  }

  t.dec.input = prev->vertex.output;
  detail::apply_updater(p.dec_v, t.dec, &t.macs, &t.min_relu_pre, &t.relu_active);
  t.q.noalias() = t.dec.output.topRows(nvar) * p.out_w;
  t.q.rowwise() += p.out_b.row(0);
  t.macs += static_cast<uint64_t>(nvar) * p.out_w.rows() * p.out_w.cols();
  return t.q;
}

struct BackwardScratch {
  Matrix d_ce, d_cv, d_cu;
  Matrix d_enc_v, d_enc_e, d_enc_u;
  Matrix d_dec_out, d_gin, d_vin, d_ein;
  Matrix d_ucat, d_vcat, d_ecat;
  Matrix dy_gain, d_act, d_hidden, d_input;  // updater backward temporaries
  Matrix d_unused;
};

namespace detail {

// Reverse of apply_updater. dY is the gradient at t.output; accumulates
// weight gradients into g and writes the input gradient into dx_out.
inline void backward_updater(const Updater& u, const UpdaterTape& t, const Matrix& dY,
                             Matrix& dx_out, Updater& g, BackwardScratch& s) {
  // Layer norm backward (biased variance, per row):
  // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
  s.dy_gain = dY;
  s.dy_gain.array().rowwise() *= u.ln_gain.row(0).array();
  g.ln_gain.noalias() += (dY.array() * t.xhat.array()).matrix().colwise().sum();
  g.ln_bias.noalias() += dY.colwise().sum();
  const Eigen::VectorXd m1 = s.dy_gain.rowwise().mean();
  const Eigen::VectorXd m2 = (s.dy_gain.array() * t.xhat.array()).rowwise().mean();
  s.d_act = s.dy_gain;
  s.d_act.colwise() -= m1;
  s.d_act -= (t.xhat.array().colwise() * m2.array()).matrix();
  s.d_act.array().colwise() *= t.inv_std.array();

  // ReLU of the last linear.
  s.d_act.array() *= (t.act.array() > 0.0).cast<double>();

  const Matrix& last_in = u.w.size() == 2 ? t.hidden : t.input;
  g.w.back().noalias() += last_in.transpose() * s.d_act;
  g.b.back().noalias() += s.d_act.colwise().sum();
  if (u.w.size() == 2) {
    s.d_hidden.noalias() = s.d_act * u.w[1].transpose();
    s.d_hidden.array() *= (t.hidden.array() > 0.0).cast<double>();
    g.w[0].noalias() += t.input.transpose() * s.d_hidden;
    g.b[0].noalias() += s.d_hidden.colwise().sum();
    dx_out.noalias() = s.d_hidden * u.w[0].transpose();
  } else {
    dx_out.noalias() = s.d_act * u.w[0].transpose();
  }
}

}  // namespace detail

// Gradients of <grad_q, Q> accumulated into `grads` (same shapes as params).
// Within one core iteration the reverse order is global, vertex, edge.
inline void backward(const GraphNetParams& p, const StateGraph& g, const ForwardTape& t,
                     const Matrix& grad_q, GraphNetParams& grads, BackwardScratch& s) {
  if (!t.full) throw std::logic_error("backward needs a tape kept by forward(..., keep_tape=true)");
  if (!(t.dims == p.dims)) throw std::logic_error("tape/params dimension mismatch");
  if (grad_q.rows() != t.num_var_vertices || grad_q.cols() != p.dims.q_out)
    throw std::invalid_argument("grad_q shape mismatch");
  const GnDims& d = p.dims;
  const int nv = t.num_vertices;
  const int ne = t.num_edges;
  const int nvar = t.num_var_vertices;
  const int uc = d.global_cat(), ec = d.edge_cat(), vc = d.vertex_cat();

  // Output projection.
  grads.out_w.noalias() += t.dec.output.topRows(nvar).transpose() * grad_q;
  grads.out_b.noalias() += grad_q.colwise().sum();
  s.d_dec_out.setZero(nv, d.decoder_out);
  s.d_dec_out.topRows(nvar).noalias() = grad_q * p.out_w.transpose();

  // Decoder (consumes the final core vertex output).
  detail::backward_updater(p.dec_v, t.dec, s.d_dec_out, s.d_cv, grads.dec_v, s);
  s.d_ce.setZero(ne, d.core_edge_out);
  s.d_cu.setZero(1, d.core_global_out);
  s.d_enc_u.setZero(1, d.encoder_out);
  s.d_enc_v.setZero(nv, d.encoder_out);
  s.d_enc_e.setZero(ne, d.encoder_out);

  for (int it = d.iterations - 1; it >= 0; --it) {
    const CoreTape& ct = t.core[it];
    s.d_ucat.setZero(1, uc);

    // Global updater.
    detail::backward_updater(p.core_u, ct.global, s.d_cu, s.d_gin, grads.core_u, s);
    s.d_ucat += s.d_gin.leftCols(uc);
    if (ne > 0)
      s.d_ce.rowwise() += s.d_gin.row(0).segment(uc, d.core_edge_out) / ne;
    if (nv > 0)
      s.d_cv.rowwise() += s.d_gin.row(0).segment(uc + d.core_edge_out, d.core_vertex_out) / nv;

    // Vertex updater.
    detail::backward_updater(p.core_v, ct.vertex, s.d_cv, s.d_vin, grads.core_v, s);
    s.d_ucat += s.d_vin.leftCols(uc).colwise().sum();
    s.d_vcat = s.d_vin.middleCols(uc, vc);
    for (int e = 0; e < ne; ++e)
      s.d_ce.row(e) += s.d_vin.row(g.edge_dst[e]).tail(d.core_edge_out);

    // Edge updater.
    detail::backward_updater(p.core_e, ct.edge, s.d_ce, s.d_ein, grads.core_e, s);
    s.d_ucat += s.d_ein.leftCols(uc).colwise().sum();
    s.d_ecat = s.d_ein.middleCols(uc, ec);
    for (int e = 0; e < ne; ++e) {
      s.d_vcat.row(g.edge_src[e]) += s.d_ein.row(e).segment(uc + ec, vc);
      s.d_vcat.row(g.edge_dst[e]) += s.d_ein.row(e).segment(uc + ec + vc, vc);
    }

    // Split the concatenations: the encoder share accumulates across
    // iterations, the core share is the previous iteration's output gradient
    // (dropped at it == 0 where the previous state was all zeros).
    s.d_enc_u += s.d_ucat.leftCols(d.encoder_out);
    s.d_enc_v += s.d_vcat.leftCols(d.encoder_out);
    s.d_enc_e += s.d_ecat.leftCols(d.encoder_out);
    if (it > 0) {
      s.d_cu = s.d_ucat.rightCols(d.core_global_out);
      s.d_cv = s.d_vcat.rightCols(d.core_vertex_out);
      s.d_ce = s.d_ecat.rightCols(d.core_edge_out);
    }
  }

  detail::backward_updater(p.enc_v, t.enc_v, s.d_enc_v, s.d_unused, grads.enc_v, s);
  detail::backward_updater(p.enc_e, t.enc_e, s.d_enc_e, s.d_unused, grads.enc_e, s);
  detail::backward_updater(p.enc_u, t.enc_u, s.d_enc_u, s.d_unused, grads.enc_u, s);
}

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary, named blocks, trailing FNV-1a checksum.
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kCkptMagic[8] = {'Q', 'S', 'A', 'T', 'G', 'N', 'N', '1'};
constexpr uint32_t kCkptVersion = 1;

inline uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put_raw(std::string& buf, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct ByteReader {
  const std::string& buf;
  size_t pos = 0;
  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos + sizeof(T) > buf.size()) throw std::runtime_error("truncated checkpoint");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_bytes(size_t n) {
    if (pos + n > buf.size()) throw std::runtime_error("truncated checkpoint");
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

inline void put_dims(std::string& buf, const GnDims& d) {
  for (int v : {d.vertex_in, d.edge_in, d.global_in, d.encoder_out, d.core_edge_out,
                d.core_vertex_out, d.core_global_out, d.core_hidden, d.decoder_out, d.q_out,
                d.iterations})
    put_raw(buf, static_cast<uint32_t>(v));
}

inline GnDims get_dims(ByteReader& r) {
  GnDims d;
  for (int* v : {&d.vertex_in, &d.edge_in, &d.global_in, &d.encoder_out, &d.core_edge_out,
                 &d.core_vertex_out, &d.core_global_out, &d.core_hidden, &d.decoder_out,
                 &d.q_out, &d.iterations})
    *v = static_cast<int>(r.get<uint32_t>());
  return d;
}

inline void put_blocks(std::string& buf, const GraphNetParams& p) {
  uint32_t count = 0;
  visit_blocks(p, [&](const std::string&, const Matrix&) { ++count; });
  put_raw(buf, count);
  visit_blocks(p, [&](const std::string& name, const Matrix& m) {
    put_raw(buf, static_cast<uint16_t>(name.size()));
    buf.append(name);
    put_raw(buf, static_cast<uint32_t>(m.rows()));
    put_raw(buf, static_cast<uint32_t>(m.cols()));
    buf.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size());
  });
}

// Fills an existing params structure whose shapes define the expectation.
inline void get_blocks(ByteReader& r, GraphNetParams& p) {
  const uint32_t count = r.get<uint32_t>();
  uint32_t expected = 0;
  visit_blocks(p, [&](const std::string&, const Matrix&) { ++expected; });
  if (count != expected) throw std::runtime_error("checkpoint block count mismatch");
  visit_blocks(p, [&](const std::string& name, Matrix& m) {
    const uint16_t len = r.get<uint16_t>();
    const std::string got = r.get_bytes(len);
    if (got != name)
      throw std::runtime_error("checkpoint block order mismatch: expected '" + name +
                               "', found '" + got + "'");
    const uint32_t rows = r.get<uint32_t>();
    const uint32_t cols = r.get<uint32_t>();
    if (rows != static_cast<uint32_t>(m.rows()) || cols != static_cast<uint32_t>(m.cols()))
      throw std::runtime_error("checkpoint shape mismatch in block '" + name + "'");
    const std::string data = r.get_bytes(sizeof(double) * rows * cols);
    std::memcpy(m.data(), data.data(), data.size());
  });
}

inline void write_checksummed(const std::string& path, const std::string& body) {
  std::string buf = body;
  put_raw(buf, fnv1a64(body));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed on '" + path + "'");
}

inline std::string read_checksummed(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8) throw std::runtime_error("truncated checkpoint: '" + path + "'");
  const std::string body = buf.substr(0, buf.size() - 8);
  uint64_t want;
  std::memcpy(&want, buf.data() + buf.size() - 8, 8);
  if (fnv1a64(body) != want)
    throw std::runtime_error("checkpoint checksum mismatch (corrupt or truncated): '" + path +
                             "'");
  return body;
}

}  // namespace detail

inline void save_params(const std::string& path, const GraphNetParams& p) {
  std::string body;
  body.append(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  detail::put_raw(body, detail::kCkptVersion);
  detail::put_dims(body, p.dims);
  detail::put_blocks(body, p);
  detail::write_checksummed(path, body);
}

// Loads a checkpoint with whatever dimensions its header declares. If
// `expected` is set, the header must match it exactly.
inline GraphNetParams load_params(const std::string& path,
                                  const std::optional<GnDims>& expected = std::nullopt) {
  const std::string body = detail::read_checksummed(path);
  detail::ByteReader r{body};
  const std::string magic = r.get_bytes(sizeof(detail::kCkptMagic));
  if (std::memcmp(magic.data(), detail::kCkptMagic, sizeof(detail::kCkptMagic)) != 0)
    throw std::runtime_error("not a parameter checkpoint: '" + path + "'");
  const uint32_t version = r.get<uint32_t>();
  if (version != detail::kCkptVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const GnDims dims = detail::get_dims(r);
  if (expected && !(dims == *expected))
    throw std::runtime_error("checkpoint dimension mismatch: '" + path +
                             "' was written with a different network configuration");
  GraphNetParams p = make_param_shapes(dims);
  detail::get_blocks(r, p);
  if (r.pos != body.size()) throw std::runtime_error("trailing bytes in checkpoint '" + path + "'");
  return p;
}

// Greedy argmax over the Q matrix, ties to the lowest (row, column).
inline std::pair<int, int> greedy_action(const QOutput& q) {
  if (q.rows() == 0) throw std::invalid_argument("greedy_action on an empty Q matrix");
  int br = 0, bc = 0;
  double best = q(0, 0);
  for (int r = 0; r < q.rows(); ++r) {
    for (int c = 0; c < q.cols(); ++c) {
      if (q(r, c) > best) {
        best = q(r, c);
        br = r;
        bc = c;
      }
    }
  }
  return {br, bc};
}

}  // namespace qsat
