#pragma once

#include <array>
#include <utility>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/conv.hpp"
#include "tcinn/ops.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

// Reverse-mode autodiff over an explicit operation record. Each recorded op
// produces exactly one value; backward() replays the record in reverse and
// accumulates adjoints into per-value gradient slots. Values are immutable
// once recorded, so saved intermediates are just references into the record.
//
// Gradients for leaves the loss never touches stay zero (allocated on
// demand), which keeps the optimizer contract simple.
template <class T>
class Tape {
public:
  using Id = int32_t;

  enum class Op {
    leaf,
    conv,
    lrelu,
    sclamp,
    exp,
    add,
    sub,
    mul,
    split_lo,
    split_hi,
    concat,
    mse,
    axpy,
    scale,
    augment,
    collapse,
    mix,
    mix_inv,
    actnorm,
    actnorm_inv,
  };

  Id leaf(Tensor<T> v, bool requires_grad) {
    return push(Op::leaf, {-1, -1, -1}, std::move(v), requires_grad, 0, 0.0);
  }

  Id conv2d_op(Id x, Id k, Id b, int stride, int padding) {
    Tensor<T> out = conv2d(val(x), val(k), val(b), stride, padding);
    Id id = push(Op::conv, {x, k, b}, std::move(out), any_grad({x, k, b}), stride, 0.0);
    nodes_.back().i1 = padding;
    return id;
  }

  Id leaky_relu_op(Id x, double slope) {
    return push(Op::lrelu, {x, -1, -1}, leaky_relu(val(x), slope), needs(x), 0, slope);
  }

  Id soft_clamp_op(Id x, double alpha) {
    return push(Op::sclamp, {x, -1, -1}, soft_clamp(val(x), alpha), needs(x), 0, alpha);
  }

  Id exp_op(Id x) { return push(Op::exp, {x, -1, -1}, exp_elementwise(val(x)), needs(x), 0, 0.0); }

  Id add_op(Id a, Id b) {
    return push(Op::add, {a, b, -1}, pointwise(val(a), val(b), PwKind::add), any_grad({a, b}), 0, 0.0);
  }
  Id sub_op(Id a, Id b) {
    return push(Op::sub, {a, b, -1}, pointwise(val(a), val(b), PwKind::sub), any_grad({a, b}), 0, 0.0);
  }
  Id mul_op(Id a, Id b) {
    return push(Op::mul, {a, b, -1}, pointwise(val(a), val(b), PwKind::hadamard), any_grad({a, b}),
                0, 0.0);
  }

  std::pair<Id, Id> split_op(Id x, int64_t d) {
    auto parts = channel_split(val(x), d);
    Id lo = push(Op::split_lo, {x, -1, -1}, std::move(parts.first), needs(x), d, 0.0);
    Id hi = push(Op::split_hi, {x, -1, -1}, std::move(parts.second), needs(x), d, 0.0);
    return {lo, hi};
  }

  Id concat_op(Id a, Id b) {
    return push(Op::concat, {a, b, -1}, channel_concat(val(a), val(b)), any_grad({a, b}),
                val(a).shape[1], 0.0);
  }

  Id mse_op(Id a, Id b) {
    Tensor<T> s({1});
    s.v[0] = static_cast<T>(reduce_mse(val(a), val(b)));
    return push(Op::mse, {a, b, -1}, std::move(s), any_grad({a, b}), 0, 0.0);
  }

  // alpha * a + b on scalar values (loss combination).
  Id axpy_op(double alpha, Id a, Id b) {
    check(val(a).size() == 1 && val(b).size() == 1, ErrKind::shape, "axpy: scalars only");
    Tensor<T> s({1});
    s.v[0] = static_cast<T>(alpha * static_cast<double>(val(a).v[0]) +
                            static_cast<double>(val(b).v[0]));
    return push(Op::axpy, {a, b, -1}, std::move(s), any_grad({a, b}), 0, alpha);
  }

  Id scale_op(Id x, double alpha) {
    Tensor<T> out(val(x).shape);
    for (int64_t i = 0; i < out.size(); ++i)
      out.v[i] = static_cast<T>(alpha * static_cast<double>(val(x).v[i]));
    return push(Op::scale, {x, -1, -1}, std::move(out), needs(x), 0, alpha);
  }

  Id augment_op(Id img, int64_t c) {
    return push(Op::augment, {img, -1, -1}, augment_channels(val(img), c), needs(img), c, 0.0);
  }

  Id collapse_op(Id x) {
    return push(Op::collapse, {x, -1, -1}, collapse_channels(val(x)), needs(x), val(x).shape[1],
                0.0);
  }

  // Per-pixel channel mixing by W (invert=false) or W^-1 (invert=true). The
  // inverse path differentiates through the matrix inversion analytically:
  // with Z = W^-1,  dW = -Z^T dZ Z^T.
  Id mix_op(Id x, Id w, bool invert, double det_floor = 1e-8, double cond_limit = 1e8) {
    const int64_t c = val(x).shape[1];
    check(static_cast<int64_t>(val(w).size()) == c * c, ErrKind::shape,
          "mix: W must be C x C for C input channels");
    std::vector<T> mat(val(w).v.begin(), val(w).v.end());
    std::vector<T> inv;
    double det = 0.0;
    const bool ok = lu_invert(c, mat, inv, det);
    check(ok && std::fabs(det) > det_floor, ErrKind::numeric,
          "mix: channel matrix is singular (|det| <= 1e-8)");
    check(mat_norm_inf(c, mat) * mat_norm_inf(c, inv) <= cond_limit, ErrKind::numeric,
          "mix: channel matrix condition estimate exceeds 1e8");
    const std::vector<T>& applied = invert ? inv : mat;
    Id id = push(invert ? Op::mix_inv : Op::mix, {x, w, -1}, channel_mix(val(x), applied),
                 any_grad({x, w}), 0, 0.0);
    nodes_.back().aux = inv;
    return id;
  }

  // Per-channel affine: y = scale*x + shift, or its inverse x = (y-shift)/scale.
  Id actnorm_op(Id x, Id scl, Id shf, bool invert) {
    const Tensor<T>& xs = val(x);
    const int64_t c = xs.shape[1];
    check(val(scl).size() == c && val(shf).size() == c, ErrKind::shape,
          "actnorm: scale/shift must have one entry per channel");
    for (int64_t i = 0; i < c; ++i)
      check(val(scl).v[i] != T(0), ErrKind::numeric, "actnorm: zero scale");
    Tensor<T> out(xs.shape);
    const int64_t hw = xs.shape[2] * xs.shape[3];
    for (int64_t n = 0; n < xs.shape[0]; ++n)
      for (int64_t ch = 0; ch < c; ++ch) {
        const T s = val(scl).v[ch], h = val(shf).v[ch];
        const T* src = xs.data() + (n * c + ch) * hw;
        T* dst = out.data() + (n * c + ch) * hw;
        if (!invert)
          for (int64_t i = 0; i < hw; ++i) dst[i] = s * src[i] + h;
        else
          for (int64_t i = 0; i < hw; ++i) dst[i] = (src[i] - h) / s;
      }
    return push(invert ? Op::actnorm_inv : Op::actnorm, {x, scl, shf}, std::move(out),
                any_grad({x, scl, shf}), 0, 0.0);
  }

  const Tensor<T>& val(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

  bool needs(Id id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

  // Gradient slot for a value; allocates zeros on first access so untouched
  // parameters read back as zero gradients, even before any backward pass.
  Tensor<T>& grad(Id id) {
    if (grads_.size() != nodes_.size()) grads_.resize(nodes_.size());
    auto& g = grads_[static_cast<size_t>(id)];
    if (g.shape.empty()) g = Tensor<T>(nodes_[static_cast<size_t>(id)].value.shape);
    return g;
  }

  bool grad_present(Id id) const {
    return static_cast<size_t>(id) < grads_.size() &&
           !grads_[static_cast<size_t>(id)].shape.empty();
  }

  void backward(Id loss) {
    check(val(loss).size() == 1, ErrKind::argument, "backward: loss must be a scalar");
    grads_.assign(nodes_.size(), Tensor<T>());
    grad(loss).v[0] = T(1);
    for (int64_t ni = static_cast<int64_t>(nodes_.size()) - 1; ni >= 0; --ni) {
      Node& node = nodes_[static_cast<size_t>(ni)];
      if (!node.needs_grad || node.op == Op::leaf) continue;
      if (!grad_present(static_cast<Id>(ni))) continue;  // nothing flowed into this value
      const Tensor<T>& dout = grads_[static_cast<size_t>(ni)];
      dispatch_backward(node, static_cast<Id>(ni), dout);
    }
  }

private:
  struct Node {
    Op op;
    std::array<Id, 3> in;
    Tensor<T> value;
    bool needs_grad;
    int64_t i0 = 0;  // op-specific: split index, channel count, stride
    int64_t i1 = 0;  // conv padding
    double d0 = 0;   // slope / alpha
    std::vector<T> aux;  // mix: cached inverse matrix
  };

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;

  bool any_grad(std::initializer_list<Id> ids) const {
    for (Id id : ids)
      if (id >= 0 && needs(id)) return true;
    return false;
  }

  Id push(Op op, std::array<Id, 3> in, Tensor<T> value, bool needs_grad, int64_t i0, double d0) {
    nodes_.push_back(Node{op, in, std::move(value), needs_grad, i0, 0, d0, {}});
    return static_cast<Id>(nodes_.size() - 1);
  }

  Tensor<T>* in_grad(Id id) {
    if (id < 0 || !needs(id)) return nullptr;
    return &grad(id);
  }

  void dispatch_backward(Node& node, Id out_id, const Tensor<T>& dout) {
    const Id a = node.in[0], b = node.in[1], c3 = node.in[2];
    switch (node.op) {
      case Op::leaf:
        break;
      case Op::conv: {
        conv2d_backward(val(a), val(b), dout, static_cast<int>(node.i0),
                        static_cast<int>(node.i1), in_grad(a), in_grad(b), in_grad(c3));
        break;
      }
      case Op::lrelu:
        if (auto* g = in_grad(a)) leaky_relu_backward(val(a), node.d0, dout, *g);
        break;
      case Op::sclamp:
        if (auto* g = in_grad(a)) soft_clamp_backward(val(a), node.d0, dout, *g);
        break;
      case Op::exp:
        if (auto* g = in_grad(a)) exp_backward(val(out_id), dout, *g);
        break;
      case Op::add:
        pointwise_backward(val(a), val(b), PwKind::add, dout, in_grad(a), in_grad(b));
        break;
      case Op::sub:
        pointwise_backward(val(a), val(b), PwKind::sub, dout, in_grad(a), in_grad(b));
        break;
      case Op::mul:
        pointwise_backward(val(a), val(b), PwKind::hadamard, dout, in_grad(a), in_grad(b));
        break;
      case Op::split_lo:
        if (auto* g = in_grad(a)) add_channel_slice(*g, dout, 0);
        break;
      case Op::split_hi:
        if (auto* g = in_grad(a)) add_channel_slice(*g, dout, node.i0);
        break;
      case Op::concat:
        channel_concat_backward(node.i0, dout, in_grad(a), in_grad(b));
        break;
      case Op::mse:
        reduce_mse_backward(val(a), val(b), static_cast<double>(dout.v[0]), in_grad(a),
                            in_grad(b));
        break;
      case Op::axpy:
        if (auto* g = in_grad(a)) g->v[0] += static_cast<T>(node.d0 * static_cast<double>(dout.v[0]));
        if (auto* g = in_grad(b)) g->v[0] += dout.v[0];
        break;
      case Op::scale:
        if (auto* g = in_grad(a))
          for (int64_t i = 0; i < dout.size(); ++i)
            g->v[i] += static_cast<T>(node.d0 * static_cast<double>(dout.v[i]));
        break;
      case Op::augment:
        if (auto* g = in_grad(a)) augment_channels_backward(dout, *g);
        break;
      case Op::collapse:
        if (auto* g = in_grad(a)) collapse_channels_backward(node.i0, dout, *g);
        break;
      case Op::mix: {
        std::vector<T> mat(val(b).v.begin(), val(b).v.end());
        std::vector<T> dm;
        std::vector<T>* dmp = nullptr;
        const int64_t c = val(a).shape[1];
        if (needs(b)) {
          dm.assign(static_cast<size_t>(c * c), T(0));
          dmp = &dm;
        }
        channel_mix_backward(val(a), mat, dout, in_grad(a), dmp);
        if (dmp) {
          auto& gw = grad(b);
          for (int64_t i = 0; i < c * c; ++i) gw.v[i] += dm[static_cast<size_t>(i)];
        }
        break;
      }
      case Op::mix_inv: {
        const std::vector<T>& z = node.aux;  // applied matrix was Z = W^-1
        std::vector<T> dz;
        std::vector<T>* dzp = nullptr;
        const int64_t c = val(a).shape[1];
        if (needs(b)) {
          dz.assign(static_cast<size_t>(c * c), T(0));
          dzp = &dz;
        }
        channel_mix_backward(val(a), z, dout, in_grad(a), dzp);
        if (dzp) {
          // dW = -Z^T dZ Z^T
          auto& gw = grad(b);
          for (int64_t o = 0; o < c; ++o)
            for (int64_t i = 0; i < c; ++i) {
              double s = 0;
              for (int64_t r = 0; r < c; ++r) {
                const double zro = static_cast<double>(z[static_cast<size_t>(r * c + o)]);
                for (int64_t q = 0; q < c; ++q)
                  s += zro * static_cast<double>(dz[static_cast<size_t>(r * c + q)]) *
                       static_cast<double>(z[static_cast<size_t>(i * c + q)]);
              }
              gw.v[o * c + i] -= static_cast<T>(s);
            }
        }
        break;
      }
      case Op::actnorm: {
        const Tensor<T>& x = val(a);
        const Tensor<T>& scl = val(b);
        const int64_t c = x.shape[1];
        const int64_t hw = x.shape[2] * x.shape[3];
        Tensor<T>* gx = in_grad(a);
        Tensor<T>* gs = in_grad(b);
        Tensor<T>* gh = in_grad(c3);
        for (int64_t n = 0; n < x.shape[0]; ++n)
          for (int64_t ch = 0; ch < c; ++ch) {
            const T* d = dout.data() + (n * c + ch) * hw;
            const T* xp = x.data() + (n * c + ch) * hw;
            if (gx) {
              T* g = gx->data() + (n * c + ch) * hw;
              const T s = scl.v[ch];
              for (int64_t i = 0; i < hw; ++i) g[i] += d[i] * s;
            }
            if (gs) {
              double s = 0;
              for (int64_t i = 0; i < hw; ++i) s += static_cast<double>(d[i]) * static_cast<double>(xp[i]);
              gs->v[ch] += static_cast<T>(s);
            }
            if (gh) {
              double s = 0;
              for (int64_t i = 0; i < hw; ++i) s += static_cast<double>(d[i]);
              gh->v[ch] += static_cast<T>(s);
            }
          }
        break;
      }
      case Op::actnorm_inv: {
        // out = (x - shift) / scale
        const Tensor<T>& x = val(a);
        const Tensor<T>& scl = val(b);
        const Tensor<T>& out = val(out_id);
        const int64_t c = x.shape[1];
        const int64_t hw = x.shape[2] * x.shape[3];
        Tensor<T>* gx = in_grad(a);
        Tensor<T>* gs = in_grad(b);
        Tensor<T>* gh = in_grad(c3);
        for (int64_t n = 0; n < x.shape[0]; ++n)
          for (int64_t ch = 0; ch < c; ++ch) {
            const T* d = dout.data() + (n * c + ch) * hw;
            const T* op = out.data() + (n * c + ch) * hw;
            const T s = scl.v[ch];
            if (gx) {
              T* g = gx->data() + (n * c + ch) * hw;
              for (int64_t i = 0; i < hw; ++i) g[i] += d[i] / s;
            }
            if (gs) {
              double acc = 0;
              for (int64_t i = 0; i < hw; ++i)
                acc += static_cast<double>(d[i]) * static_cast<double>(op[i]);
              gs->v[ch] -= static_cast<T>(acc / static_cast<double>(s));
            }
            if (gh) {
              double acc = 0;
              for (int64_t i = 0; i < hw; ++i) acc += static_cast<double>(d[i]);
              gh->v[ch] -= static_cast<T>(acc / static_cast<double>(s));
            }
          }
        break;
      }
    }
  }

  // dx[:, off:off+douts_channels] += dout
  static void add_channel_slice(Tensor<T>& dx, const Tensor<T>& dout, int64_t off) {
    const int64_t c = dx.shape[1], cs = dout.shape[1];
    const int64_t hw = dx.shape[2] * dx.shape[3];
    for (int64_t n = 0; n < dx.shape[0]; ++n) {
      T* dst = dx.data() + (n * c + off) * hw;
      const T* src = dout.data() + n * cs * hw;
      for (int64_t i = 0; i < cs * hw; ++i) dst[i] += src[i];
    }
  }
};

}  // namespace tcinn
