#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/ops.hpp"
#include "tcinn/rng.hpp"
#include "tcinn/tape.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

// The invertible model: a stack of k blocks, each [actnorm ->] 1x1 channel
// mixing -> enhanced coupling. The coupling's three sub-networks are densely
// connected 3x3 conv blocks. Forward and inverse are exact analytic mirrors.
//
// Coupling evaluation order: the passive half is updated first and the
// scale/translation nets condition on the *updated* half,
//   n1 = m1 + r(m2);  n2 = m2 * exp(soft_clamp(s(n1))) + t(n1)
// which is the unique order whose inverse
//   m2 = (n2 - t(n1)) * exp(-soft_clamp(s(n1)));  m1 = n1 - r(m2)
// needs no sub-network inversion.

struct ModelConfig {
  int64_t channels = 3;   // C
  int64_t split = 1;      // d; default floor(C/2), set by normalize()
  int64_t blocks = 4;     // k
  int64_t layers = 8;     // L conv layers per dense block
  int64_t growth = 16;    // g channels added per dense layer
  double alpha = 2.0;     // soft-clamp bound on the scale exponent
  bool actnorm = false;

  void normalize() {
    if (split <= 0) split = channels / 2;
  }
  void validate() const {
    check(channels >= 2, ErrKind::argument, "model: C must be >= 2");
    check(split >= 1 && split < channels, ErrKind::argument, "model: split index out of range");
    check(blocks >= 0, ErrKind::argument, "model: block count must be >= 0");
    check(layers >= 1, ErrKind::argument, "model: dense block needs >= 1 layer");
    check(growth >= 1, ErrKind::argument, "model: growth must be >= 1");
    check(alpha > 0, ErrKind::argument, "model: alpha must be positive");
  }
  bool operator==(const ModelConfig&) const = default;
};

constexpr double kLeakySlope = 0.2;

template <class T>
struct DenseBlockParams {
  int64_t cin = 0, cout = 0;
  std::vector<Tensor<T>> w;  // layer l kernel: [outc_l, inc_l, 3, 3]
  std::vector<Tensor<T>> b;  // layer l bias: [outc_l]

  int64_t layer_in(int64_t l, int64_t g) const { return cin + l * g; }  // l is 0-based
};

template <class T>
struct CouplingParams {
  DenseBlockParams<T> s, t;  // d -> C-d
  DenseBlockParams<T> r;     // C-d -> d
};

template <class T>
struct Inv1x1Params {
  Tensor<T> w;  // C x C, stored as shape [C, C]
  // Cached inverse, refreshed whenever w changes (init and optimizer steps).
  std::vector<T> w_inv;
  double det = 0;

  void refresh(double det_floor = 1e-8, double cond_limit = 1e8) {
    const int64_t c = w.shape[0];
    const bool ok = lu_invert(c, w.v, w_inv, det);
    check(ok && std::fabs(det) > det_floor, ErrKind::numeric,
          "1x1 conv: channel matrix is singular (|det| <= 1e-8)");
    check(mat_norm_inf(c, w.v) * mat_norm_inf(c, w_inv) <= cond_limit, ErrKind::numeric,
          "1x1 conv: channel matrix condition estimate exceeds 1e8");
  }
};

template <class T>
struct ActnormParams {
  Tensor<T> scale, shift;  // per channel
  bool initialized = false;
};

template <class T>
struct Block {
  ActnormParams<T> norm;
  Inv1x1Params<T> mix;
  CouplingParams<T> coup;
};

template <class T>
struct Model {
  ModelConfig cfg;
  std::vector<Block<T>> blocks;

  // Deterministic walk over every parameter tensor with a stable name; the
  // optimizer, checkpoints, and gradient checks all key off this order.
  template <class F>
  void for_each_param(F&& fn) {
    auto dense = [&](const std::string& prefix, DenseBlockParams<T>& d) {
      for (size_t l = 0; l < d.w.size(); ++l) {
        fn(prefix + ".w" + std::to_string(l), d.w[l]);
        fn(prefix + ".b" + std::to_string(l), d.b[l]);
      }
    };
    for (size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i);
      if (cfg.actnorm) {
        fn(p + ".norm.scale", blocks[i].norm.scale);
        fn(p + ".norm.shift", blocks[i].norm.shift);
      }
      fn(p + ".mix.w", blocks[i].mix.w);
      dense(p + ".s", blocks[i].coup.s);
      dense(p + ".t", blocks[i].coup.t);
      dense(p + ".r", blocks[i].coup.r);
    }
  }
};

namespace detail {

template <class T>
DenseBlockParams<T> make_dense(int64_t cin, int64_t cout, const ModelConfig& cfg) {
  DenseBlockParams<T> d;
  d.cin = cin;
  d.cout = cout;
  for (int64_t l = 0; l < cfg.layers; ++l) {
    const int64_t inc = cin + l * cfg.growth;
    const int64_t outc = (l + 1 < cfg.layers) ? cfg.growth : cout;
    d.w.emplace_back(std::vector<int64_t>{outc, inc, 3, 3});
    d.b.emplace_back(std::vector<int64_t>{outc});
  }
  return d;
}

template <class T>
void he_fill(Tensor<T>& w, Rng& rng) {
  // fan-in = inc * kh * kw for a conv kernel [outc, inc, kh, kw]
  const double fan_in = static_cast<double>(w.shape[1] * w.shape[2] * w.shape[3]);
  const double std = std::sqrt(2.0 / fan_in);
  for (auto& v : w.v) v = static_cast<T>(rng.normal() * std);
}

// Hidden layers He-scaled, final layer zero: the block contributes nothing at
// initialization, so every coupling starts as the identity.
template <class T>
void init_dense(DenseBlockParams<T>& d, Rng& rng) {
  for (size_t l = 0; l + 1 < d.w.size(); ++l) he_fill(d.w[l], rng);
  // final layer weights and all biases stay zero
}

}  // namespace detail

// Orthogonal C x C matrix from the QR factorization of a seeded Gaussian
// matrix, sign-fixed so the factorization is unique (diag(R) > 0).
template <class T>
Tensor<T> random_orthogonal(int64_t c, Rng& rng) {
  std::vector<double> a(static_cast<size_t>(c * c));
  for (auto& v : a) v = rng.normal();
  // Modified Gram-Schmidt on columns, twice for orthogonality at double
  // precision; sizes here are channel counts, so cost is irrelevant.
  std::vector<double> q(a);
  std::vector<double> rdiag(static_cast<size_t>(c), 0.0);
  for (int pass = 0; pass < 2; ++pass)
    for (int64_t j = 0; j < c; ++j) {
      for (int64_t i = 0; i < j; ++i) {
        double dot = 0;
        for (int64_t k = 0; k < c; ++k)
          dot += q[static_cast<size_t>(k * c + i)] * q[static_cast<size_t>(k * c + j)];
        for (int64_t k = 0; k < c; ++k)
          q[static_cast<size_t>(k * c + j)] -= dot * q[static_cast<size_t>(k * c + i)];
      }
      double norm = 0;
      for (int64_t k = 0; k < c; ++k) {
        const double v = q[static_cast<size_t>(k * c + j)];
        norm += v * v;
      }
      norm = std::sqrt(norm);
      check(norm > 0, ErrKind::numeric, "orthogonal init: degenerate column");
      for (int64_t k = 0; k < c; ++k) q[static_cast<size_t>(k * c + j)] /= norm;
      if (pass == 1) {
        // sign fix: R_jj = original column j projected on q_j must be positive
        double rjj = 0;
        for (int64_t k = 0; k < c; ++k)
          rjj += q[static_cast<size_t>(k * c + j)] * a[static_cast<size_t>(k * c + j)];
        rdiag[static_cast<size_t>(j)] = rjj;
        if (rjj < 0)
          for (int64_t k = 0; k < c; ++k) q[static_cast<size_t>(k * c + j)] = -q[static_cast<size_t>(k * c + j)];
      }
    }
  Tensor<T> out({c, c});
  for (int64_t i = 0; i < c * c; ++i) out.v[i] = static_cast<T>(q[static_cast<size_t>(i)]);
  return out;
}

enum class WInit { identity, orthogonal };

// Deterministic model construction. The default keeps every layer an exact
// identity: zero coupling nets and W = I, so training starts from f(x) = x and
// the first loss is analytically checkable. Orthogonal W is available for
// callers that want mixed channels from step zero.
template <class T>
Model<T> init_model(uint64_t seed, ModelConfig cfg, WInit w_init = WInit::identity) {
  cfg.normalize();
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  Rng rng(seed, stream::model_init);
  const int64_t c = cfg.channels, d = cfg.split;
  for (int64_t b = 0; b < cfg.blocks; ++b) {
    Block<T> blk;
    blk.norm.scale = Tensor<T>({c});
    blk.norm.shift = Tensor<T>({c});
    for (auto& v : blk.norm.scale.v) v = T(1);
    blk.mix.w = (w_init == WInit::identity) ? Tensor<T>({c, c}) : random_orthogonal<T>(c, rng);
    if (w_init == WInit::identity)
      for (int64_t i = 0; i < c; ++i) blk.mix.w.v[i * c + i] = T(1);
    blk.mix.refresh();
    blk.coup.s = detail::make_dense<T>(d, c - d, cfg);
    blk.coup.t = detail::make_dense<T>(d, c - d, cfg);
    blk.coup.r = detail::make_dense<T>(c - d, d, cfg);
    detail::init_dense(blk.coup.s, rng);
    detail::init_dense(blk.coup.t, rng);
    detail::init_dense(blk.coup.r, rng);
    m.blocks.push_back(std::move(blk));
  }
  return m;
}

// Fully random model for round-trip and stress tests: orthogonal mixing plus
// small random final layers so couplings actually transform.
template <class T>
Model<T> random_model(uint64_t seed, ModelConfig cfg, double final_scale = 0.05) {
  Model<T> m = init_model<T>(seed, cfg, WInit::orthogonal);
  Rng rng(seed, stream::model_init + 7);
  m.for_each_param([&](const std::string& name, Tensor<T>& p) {
    if (name.find(".mix.w") != std::string::npos) return;
    if (name.find(".norm.") != std::string::npos) return;
    const bool is_bias = p.shape.size() == 1;
    for (auto& v : p.v)
      v = static_cast<T>(rng.normal() * (is_bias ? 0.01 : final_scale));
  });
  for (auto& blk : m.blocks) blk.mix.refresh();
  return m;
}

// ---- plain (inference) evaluation ----

template <class T>
Tensor<T> dense_block_apply(const Tensor<T>& x, const DenseBlockParams<T>& p) {
  check(x.shape.size() == 4 && x.shape[1] == p.cin, ErrKind::shape,
        "dense block: input has " + std::to_string(x.shape[1]) + " channels, expected " +
            std::to_string(p.cin));
  Tensor<T> feats = x;
  for (size_t l = 0; l < p.w.size(); ++l) {
    Tensor<T> out = conv2d(feats, p.w[l], p.b[l], 1, 1);
    if (l + 1 < p.w.size()) {
      out = leaky_relu(out, kLeakySlope);
      feats = channel_concat(feats, out);
    } else {
      return out;
    }
  }
  return feats;  // unreachable for layers >= 1
}

template <class T>
Tensor<T> coupling_forward(const Tensor<T>& m, const CouplingParams<T>& p, int64_t d,
                           double alpha) {
  auto [m1, m2] = channel_split(m, d);
  Tensor<T> n1 = pointwise(m1, dense_block_apply(m2, p.r), PwKind::add);
  Tensor<T> sc = soft_clamp(dense_block_apply(n1, p.s), alpha);
  Tensor<T> n2 = pointwise(pointwise(m2, exp_elementwise(sc), PwKind::hadamard),
                           dense_block_apply(n1, p.t), PwKind::add);
  Tensor<T> out = channel_concat(n1, n2);
  check(out.all_finite(), ErrKind::numeric,
        "coupling forward produced non-finite values; check clamp configuration");
  return out;
}

template <class T>
Tensor<T> coupling_inverse(const Tensor<T>& n, const CouplingParams<T>& p, int64_t d,
                           double alpha) {
  auto [n1, n2] = channel_split(n, d);
  Tensor<T> sc = soft_clamp(dense_block_apply(n1, p.s), alpha);
  for (auto& v : sc.v) v = -v;
  Tensor<T> m2 = pointwise(pointwise(n2, dense_block_apply(n1, p.t), PwKind::sub),
                           exp_elementwise(sc), PwKind::hadamard);
  Tensor<T> m1 = pointwise(n1, dense_block_apply(m2, p.r), PwKind::sub);
  Tensor<T> out = channel_concat(m1, m2);
  check(out.all_finite(), ErrKind::numeric,
        "coupling inverse produced non-finite values; check clamp configuration");
  return out;
}

template <class T>
Tensor<T> actnorm_forward(const Tensor<T>& x, const ActnormParams<T>& p) {
  const int64_t c = x.shape[1], hw = x.shape[2] * x.shape[3];
  Tensor<T> y(x.shape);
  for (int64_t n = 0; n < x.shape[0]; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T s = p.scale.v[ch], h = p.shift.v[ch];
      check(s != T(0), ErrKind::numeric, "actnorm: zero scale");
      const T* src = x.data() + (n * c + ch) * hw;
      T* dst = y.data() + (n * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = s * src[i] + h;
    }
  return y;
}

template <class T>
Tensor<T> actnorm_inverse(const Tensor<T>& y, const ActnormParams<T>& p) {
  const int64_t c = y.shape[1], hw = y.shape[2] * y.shape[3];
  Tensor<T> x(y.shape);
  for (int64_t n = 0; n < y.shape[0]; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T s = p.scale.v[ch], h = p.shift.v[ch];
      check(s != T(0), ErrKind::numeric, "actnorm: zero scale");
      const T* src = y.data() + (n * c + ch) * hw;
      T* dst = x.data() + (n * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = (src[i] - h) / s;
    }
  return x;
}

template <class T>
Tensor<T> inv1x1_forward(const Tensor<T>& x, const Inv1x1Params<T>& p) {
  return channel_mix(x, p.w.v);
}

template <class T>
Tensor<T> inv1x1_inverse(const Tensor<T>& y, const Inv1x1Params<T>& p) {
  check(!p.w_inv.empty(), ErrKind::numeric, "1x1 conv: inverse cache not refreshed");
  return channel_mix(y, p.w_inv);
}

template <class T>
Tensor<T> model_forward(const Tensor<T>& x, const Model<T>& m) {
  check(x.shape.size() == 4 && x.shape[1] == m.cfg.channels, ErrKind::shape,
        "model forward: input must have " + std::to_string(m.cfg.channels) + " channels");
  Tensor<T> cur = x;
  for (const auto& blk : m.blocks) {
    if (m.cfg.actnorm) cur = actnorm_forward(cur, blk.norm);
    cur = inv1x1_forward(cur, blk.mix);
    cur = coupling_forward(cur, blk.coup, m.cfg.split, m.cfg.alpha);
  }
  return cur;
}

template <class T>
Tensor<T> model_inverse(const Tensor<T>& y, const Model<T>& m) {
  check(y.shape.size() == 4 && y.shape[1] == m.cfg.channels, ErrKind::shape,
        "model inverse: input must have " + std::to_string(m.cfg.channels) + " channels");
  Tensor<T> cur = y;
  for (auto it = m.blocks.rbegin(); it != m.blocks.rend(); ++it) {
    cur = coupling_inverse(cur, it->coup, m.cfg.split, m.cfg.alpha);
    cur = inv1x1_inverse(cur, it->mix);
    if (m.cfg.actnorm) cur = actnorm_inverse(cur, it->norm);
  }
  return cur;
}

// Data-dependent actnorm initialization: walk blocks in order, set each
// uninitialized actnorm from the per-channel statistics of its own input
// (computed on this batch), then continue propagating through the block.
template <class T>
void actnorm_data_init(Model<T>& m, const Tensor<T>& batch) {
  if (!m.cfg.actnorm) return;
  Tensor<T> cur = batch;
  const int64_t c = m.cfg.channels;
  for (auto& blk : m.blocks) {
    if (!blk.norm.initialized) {
      const int64_t hw = cur.shape[2] * cur.shape[3];
      const int64_t per_ch = cur.shape[0] * hw;
      for (int64_t ch = 0; ch < c; ++ch) {
        double sum = 0, sum2 = 0;
        for (int64_t n = 0; n < cur.shape[0]; ++n) {
          const T* src = cur.data() + (n * c + ch) * hw;
          for (int64_t i = 0; i < hw; ++i) {
            const double v = static_cast<double>(src[i]);
            sum += v;
            sum2 += v * v;
          }
        }
        const double mean = sum / static_cast<double>(per_ch);
        const double var = sum2 / static_cast<double>(per_ch) - mean * mean;
        const double std = std::sqrt(std::max(var, 0.0));
        check(std > 0, ErrKind::numeric, "actnorm init: channel has zero variance");
        blk.norm.scale.v[ch] = static_cast<T>(1.0 / std);
        blk.norm.shift.v[ch] = static_cast<T>(-mean / std);
      }
      blk.norm.initialized = true;
    }
    cur = actnorm_forward(cur, blk.norm);
    cur = inv1x1_forward(cur, blk.mix);
    cur = coupling_forward(cur, blk.coup, m.cfg.split, m.cfg.alpha);
  }
}

// ---- taped evaluation (for training) ----

// Leaf ids of every parameter, in for_each_param order. Binding parameters
// once per tape means both loss directions share leaves, so their gradients
// accumulate into the same slots.
template <class T>
struct BoundModel {
  Model<T>* model = nullptr;
  std::vector<typename Tape<T>::Id> ids;
  std::vector<std::string> names;

  static BoundModel bind(Tape<T>& tape, Model<T>& m) {
    BoundModel bm;
    bm.model = &m;
    m.for_each_param([&](const std::string& name, Tensor<T>& p) {
      bm.names.push_back(name);
      bm.ids.push_back(tape.leaf(p, true));
    });
    return bm;
  }
};

namespace detail {

template <class T>
struct DenseIds {
  std::vector<typename Tape<T>::Id> w, b;
};

// Per-block parameter ids laid out in the same order for_each_param emits.
template <class T>
struct BlockIds {
  typename Tape<T>::Id norm_scale = -1, norm_shift = -1, mix_w = -1;
  DenseIds<T> s, t, r;
};

template <class T>
std::vector<BlockIds<T>> block_ids(const Model<T>& m, const std::vector<typename Tape<T>::Id>& ids) {
  std::vector<BlockIds<T>> out;
  size_t pos = 0;
  auto take = [&]() { return ids[pos++]; };
  for (const auto& blk : m.blocks) {
    BlockIds<T> bi;
    if (m.cfg.actnorm) {
      bi.norm_scale = take();
      bi.norm_shift = take();
    }
    bi.mix_w = take();
    for (auto* d : {&bi.s, &bi.t, &bi.r}) {
      const auto& src = (d == &bi.s) ? blk.coup.s : (d == &bi.t) ? blk.coup.t : blk.coup.r;
      for (size_t l = 0; l < src.w.size(); ++l) {
        d->w.push_back(take());
        d->b.push_back(take());
      }
    }
    out.push_back(bi);
  }
  check(pos == ids.size(), ErrKind::argument, "bound model: id walk out of sync");
  return out;
}

template <class T>
typename Tape<T>::Id taped_dense(Tape<T>& tape, typename Tape<T>::Id x, const DenseIds<T>& ids) {
  typename Tape<T>::Id feats = x;
  for (size_t l = 0; l < ids.w.size(); ++l) {
    typename Tape<T>::Id out = tape.conv2d_op(feats, ids.w[l], ids.b[l], 1, 1);
    if (l + 1 < ids.w.size()) {
      out = tape.leaky_relu_op(out, kLeakySlope);
      feats = tape.concat_op(feats, out);
    } else {
      return out;
    }
  }
  return feats;
}

template <class T>
typename Tape<T>::Id taped_coupling_fwd(Tape<T>& tape, typename Tape<T>::Id m,
                                        const BlockIds<T>& bi, int64_t d, double alpha) {
  auto [m1, m2] = tape.split_op(m, d);
  auto n1 = tape.add_op(m1, taped_dense(tape, m2, bi.r));
  auto sc = tape.soft_clamp_op(taped_dense(tape, n1, bi.s), alpha);
  auto n2 = tape.add_op(tape.mul_op(m2, tape.exp_op(sc)), taped_dense(tape, n1, bi.t));
  return tape.concat_op(n1, n2);
}

template <class T>
typename Tape<T>::Id taped_coupling_inv(Tape<T>& tape, typename Tape<T>::Id n,
                                        const BlockIds<T>& bi, int64_t d, double alpha) {
  auto [n1, n2] = tape.split_op(n, d);
  auto sc = tape.soft_clamp_op(taped_dense(tape, n1, bi.s), alpha);
  auto m2 = tape.mul_op(tape.sub_op(n2, taped_dense(tape, n1, bi.t)),
                        tape.exp_op(tape.scale_op(sc, -1.0)));
  auto m1 = tape.sub_op(n1, taped_dense(tape, m2, bi.r));
  return tape.concat_op(m1, m2);
}

}  // namespace detail

template <class T>
typename Tape<T>::Id taped_model_forward(Tape<T>& tape, typename Tape<T>::Id x,
                                         const BoundModel<T>& bm) {
  const auto& m = *bm.model;
  auto bids = detail::block_ids(m, bm.ids);
  typename Tape<T>::Id cur = x;
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    if (m.cfg.actnorm) cur = tape.actnorm_op(cur, bids[i].norm_scale, bids[i].norm_shift, false);
    cur = tape.mix_op(cur, bids[i].mix_w, false);
    cur = detail::taped_coupling_fwd(tape, cur, bids[i], m.cfg.split, m.cfg.alpha);
  }
  return cur;
}

template <class T>
typename Tape<T>::Id taped_model_inverse(Tape<T>& tape, typename Tape<T>::Id y,
                                         const BoundModel<T>& bm) {
  const auto& m = *bm.model;
  auto bids = detail::block_ids(m, bm.ids);
  typename Tape<T>::Id cur = y;
  for (size_t i = m.blocks.size(); i-- > 0;) {
    cur = detail::taped_coupling_inv(tape, cur, bids[i], m.cfg.split, m.cfg.alpha);
    cur = tape.mix_op(cur, bids[i].mix_w, true);
    if (m.cfg.actnorm) cur = tape.actnorm_op(cur, bids[i].norm_scale, bids[i].norm_shift, true);
  }
  return cur;
}

}  // namespace tcinn
