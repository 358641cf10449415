#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

// Forward kernels and their adjoints for every non-convolution operation the
// model needs. Forwards are pure and allocate their output; adjoints
// accumulate (+=) into caller-owned gradient tensors so one parameter can
// receive contributions from several uses.

inline constexpr double kTwoOverPi = 0.63661977236758134307553505349006;

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope) {
  check(slope >= 0.0 && slope < 1.0, ErrKind::argument, "leaky_relu: slope must be in [0,1)");
  Tensor<T> y(x.shape);
  const T s = static_cast<T>(slope);
  for (int64_t i = 0; i < x.size(); ++i) {
    const T v = x.v[i];
    y.v[i] = v >= T(0) ? v : s * v;
  }
  return y;
}

template <class T>
void leaky_relu_backward(const Tensor<T>& x, double slope, const Tensor<T>& dy, Tensor<T>& dx) {
  const T s = static_cast<T>(slope);
  for (int64_t i = 0; i < x.size(); ++i) dx.v[i] += dy.v[i] * (x.v[i] >= T(0) ? T(1) : s);
}

// Smooth squashing of the scale exponent into (-alpha, alpha) so the coupling
// exp can never overflow: alpha * 2/pi * atan(x / alpha).
template <class T>
Tensor<T> soft_clamp(const Tensor<T>& x, double alpha) {
  check(alpha > 0.0, ErrKind::argument, "soft_clamp: alpha must be positive");
  Tensor<T> y(x.shape);
  const double a = alpha;
  for (int64_t i = 0; i < x.size(); ++i)
    y.v[i] = static_cast<T>(a * kTwoOverPi * std::atan(static_cast<double>(x.v[i]) / a));
  return y;
}

template <class T>
void soft_clamp_backward(const Tensor<T>& x, double alpha, const Tensor<T>& dy, Tensor<T>& dx) {
  for (int64_t i = 0; i < x.size(); ++i) {
    const double r = static_cast<double>(x.v[i]) / alpha;
    dx.v[i] += dy.v[i] * static_cast<T>(kTwoOverPi / (1.0 + r * r));
  }
}

template <class T>
Tensor<T> exp_elementwise(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (int64_t i = 0; i < x.size(); ++i) y.v[i] = std::exp(x.v[i]);
  return y;
}

template <class T>
void exp_backward(const Tensor<T>& y_saved, const Tensor<T>& dy, Tensor<T>& dx) {
  for (int64_t i = 0; i < y_saved.size(); ++i) dx.v[i] += dy.v[i] * y_saved.v[i];
}

enum class PwKind { add, sub, hadamard };

template <class T>
Tensor<T> pointwise(const Tensor<T>& x, const Tensor<T>& y, PwKind kind) {
  check_same_shape(x, y, "pointwise");
  Tensor<T> out(x.shape);
  switch (kind) {
    case PwKind::add:
      for (int64_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] + y.v[i];
      break;
    case PwKind::sub:
      for (int64_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] - y.v[i];
      break;
    case PwKind::hadamard:
      for (int64_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * y.v[i];
      break;
  }
  return out;
}

template <class T>
void pointwise_backward(const Tensor<T>& x, const Tensor<T>& y, PwKind kind, const Tensor<T>& dout,
                        Tensor<T>* dx, Tensor<T>* dy) {
  switch (kind) {
    case PwKind::add:
      if (dx)
        for (int64_t i = 0; i < x.size(); ++i) dx->v[i] += dout.v[i];
      if (dy)
        for (int64_t i = 0; i < x.size(); ++i) dy->v[i] += dout.v[i];
      break;
    case PwKind::sub:
      if (dx)
        for (int64_t i = 0; i < x.size(); ++i) dx->v[i] += dout.v[i];
      if (dy)
        for (int64_t i = 0; i < x.size(); ++i) dy->v[i] -= dout.v[i];
      break;
    case PwKind::hadamard:
      if (dx)
        for (int64_t i = 0; i < x.size(); ++i) dx->v[i] += dout.v[i] * y.v[i];
      if (dy)
        for (int64_t i = 0; i < x.size(); ++i) dy->v[i] += dout.v[i] * x.v[i];
      break;
  }
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> channel_split(const Tensor<T>& x, int64_t d) {
  check(x.shape.size() == 4, ErrKind::shape, "channel_split: input must be N x C x H x W");
  const int64_t c = x.shape[1];
  check(d >= 1 && d < c, ErrKind::argument,
        "channel_split: split index " + std::to_string(d) + " out of range for C=" +
            std::to_string(c));
  Tensor<T> a({x.shape[0], d, x.shape[2], x.shape[3]});
  Tensor<T> b({x.shape[0], c - d, x.shape[2], x.shape[3]});
  const int64_t hw = x.shape[2] * x.shape[3];
  for (int64_t n = 0; n < x.shape[0]; ++n) {
    const T* src = x.data() + n * c * hw;
    std::copy(src, src + d * hw, a.data() + n * d * hw);
    std::copy(src + d * hw, src + c * hw, b.data() + n * (c - d) * hw);
  }
  return {std::move(a), std::move(b)};
}

template <class T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape.size() == 4 && b.shape.size() == 4, ErrKind::shape,
        "channel_concat: inputs must be N x C x H x W");
  check(a.shape[0] == b.shape[0] && a.shape[2] == b.shape[2] && a.shape[3] == b.shape[3],
        ErrKind::shape, "channel_concat: non-channel dims must match");
  const int64_t ca = a.shape[1], cb = b.shape[1];
  Tensor<T> out({a.shape[0], ca + cb, a.shape[2], a.shape[3]});
  const int64_t hw = a.shape[2] * a.shape[3];
  for (int64_t n = 0; n < a.shape[0]; ++n) {
    std::copy(a.data() + n * ca * hw, a.data() + (n + 1) * ca * hw,
              out.data() + n * (ca + cb) * hw);
    std::copy(b.data() + n * cb * hw, b.data() + (n + 1) * cb * hw,
              out.data() + n * (ca + cb) * hw + ca * hw);
  }
  return out;
}

// Adjoint of concat is split of the gradient; adjoint of split is concat.
template <class T>
void channel_concat_backward(int64_t ca, const Tensor<T>& dout, Tensor<T>* da, Tensor<T>* db) {
  const int64_t c = dout.shape[1], cb = c - ca;
  const int64_t hw = dout.shape[2] * dout.shape[3];
  for (int64_t n = 0; n < dout.shape[0]; ++n) {
    const T* src = dout.data() + n * c * hw;
    if (da) {
      T* dst = da->data() + n * ca * hw;
      for (int64_t i = 0; i < ca * hw; ++i) dst[i] += src[i];
    }
    if (db) {
      T* dst = db->data() + n * cb * hw;
      for (int64_t i = 0; i < cb * hw; ++i) dst[i] += src[ca * hw + i];
    }
  }
}

template <class T>
double reduce_mse(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "reduce_mse");
  check(a.size() >= 1, ErrKind::shape, "reduce_mse: empty tensors");
  double s = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]);
    s += diff * diff;
  }
  return s / static_cast<double>(a.size());
}

template <class T>
void reduce_mse_backward(const Tensor<T>& a, const Tensor<T>& b, double dloss, Tensor<T>* da,
                         Tensor<T>* db) {
  const double scale = 2.0 * dloss / static_cast<double>(a.size());
  for (int64_t i = 0; i < a.size(); ++i) {
    const double g = scale * (static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]));
    if (da) da->v[i] += static_cast<T>(g);
    if (db) db->v[i] -= static_cast<T>(g);
  }
}

template <class T>
Tensor<T> augment_channels(const Tensor<T>& img, int64_t c) {
  check(img.shape.size() == 4 && img.shape[1] == 1, ErrKind::shape,
        "augment_channels: input must be N x 1 x H x W");
  check(c >= 2, ErrKind::argument, "augment_channels: need C >= 2 for a coupling split");
  Tensor<T> out({img.shape[0], c, img.shape[2], img.shape[3]});
  const int64_t hw = img.shape[2] * img.shape[3];
  for (int64_t n = 0; n < img.shape[0]; ++n)
    for (int64_t ch = 0; ch < c; ++ch)
      std::copy(img.data() + n * hw, img.data() + (n + 1) * hw,
                out.data() + (n * c + ch) * hw);
  return out;
}

template <class T>
void augment_channels_backward(const Tensor<T>& dout, Tensor<T>& dimg) {
  const int64_t c = dout.shape[1];
  const int64_t hw = dout.shape[2] * dout.shape[3];
  for (int64_t n = 0; n < dout.shape[0]; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* src = dout.data() + (n * c + ch) * hw;
      T* dst = dimg.data() + n * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] += src[i];
    }
}

template <class T>
Tensor<T> collapse_channels(const Tensor<T>& x) {
  check(x.shape.size() == 4, ErrKind::shape, "collapse_channels: input must be N x C x H x W");
  const int64_t c = x.shape[1];
  Tensor<T> out({x.shape[0], 1, x.shape[2], x.shape[3]});
  const int64_t hw = x.shape[2] * x.shape[3];
  const double inv = 1.0 / static_cast<double>(c);
  for (int64_t n = 0; n < x.shape[0]; ++n)
    for (int64_t i = 0; i < hw; ++i) {
      double s = 0;
      for (int64_t ch = 0; ch < c; ++ch) s += static_cast<double>(x.v[(n * c + ch) * hw + i]);
      out.v[n * hw + i] = static_cast<T>(s * inv);
    }
  return out;
}

template <class T>
void collapse_channels_backward(int64_t c, const Tensor<T>& dout, Tensor<T>& dx) {
  const int64_t hw = dout.shape[2] * dout.shape[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(c));
  for (int64_t n = 0; n < dout.shape[0]; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* src = dout.data() + n * hw;
      T* dst = dx.data() + (n * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] += src[i] * inv;
    }
}

// ---- small square matrices (channel mixing) ----

// LU factorization with partial pivoting on a C x C matrix; C is a channel
// count so these stay tiny. Returns false when a pivot collapses.
template <class T>
bool lu_invert(int64_t n, const std::vector<T>& a_in, std::vector<T>& inv_out, double& det_out) {
  std::vector<double> a(a_in.begin(), a_in.end());
  std::vector<int64_t> piv(static_cast<size_t>(n));
  double det = 1.0;
  for (int64_t i = 0; i < n; ++i) piv[static_cast<size_t>(i)] = i;
  for (int64_t col = 0; col < n; ++col) {
    int64_t best = col;
    double mag = std::fabs(a[static_cast<size_t>(col * n + col)]);
    for (int64_t r = col + 1; r < n; ++r) {
      const double m = std::fabs(a[static_cast<size_t>(r * n + col)]);
      if (m > mag) {
        mag = m;
        best = r;
      }
    }
    if (mag == 0.0) return false;
    if (best != col) {
      for (int64_t j = 0; j < n; ++j)
        std::swap(a[static_cast<size_t>(col * n + j)], a[static_cast<size_t>(best * n + j)]);
      std::swap(piv[static_cast<size_t>(col)], piv[static_cast<size_t>(best)]);
      det = -det;
    }
    det *= a[static_cast<size_t>(col * n + col)];
    const double pivinv = 1.0 / a[static_cast<size_t>(col * n + col)];
    for (int64_t r = col + 1; r < n; ++r) {
      const double f = a[static_cast<size_t>(r * n + col)] * pivinv;
      a[static_cast<size_t>(r * n + col)] = f;
      for (int64_t j = col + 1; j < n; ++j)
        a[static_cast<size_t>(r * n + j)] -= f * a[static_cast<size_t>(col * n + j)];
    }
  }
  det_out = det;
  // Solve A X = I column by column through the stored LU factors.
  inv_out.assign(static_cast<size_t>(n * n), T(0));
  std::vector<double> x(static_cast<size_t>(n));
  for (int64_t e = 0; e < n; ++e) {
    for (int64_t i = 0; i < n; ++i)
      x[static_cast<size_t>(i)] = (piv[static_cast<size_t>(i)] == e) ? 1.0 : 0.0;
    for (int64_t i = 1; i < n; ++i)
      for (int64_t j = 0; j < i; ++j)
        x[static_cast<size_t>(i)] -= a[static_cast<size_t>(i * n + j)] * x[static_cast<size_t>(j)];
    for (int64_t i = n - 1; i >= 0; --i) {
      for (int64_t j = i + 1; j < n; ++j)
        x[static_cast<size_t>(i)] -= a[static_cast<size_t>(i * n + j)] * x[static_cast<size_t>(j)];
      x[static_cast<size_t>(i)] /= a[static_cast<size_t>(i * n + i)];
    }
    for (int64_t i = 0; i < n; ++i)
      inv_out[static_cast<size_t>(i * n + e)] = static_cast<T>(x[static_cast<size_t>(i)]);
  }
  return true;
}

template <class T>
double mat_norm_inf(int64_t n, const std::vector<T>& a) {
  double best = 0;
  for (int64_t r = 0; r < n; ++r) {
    double s = 0;
    for (int64_t c = 0; c < n; ++c) s += std::fabs(static_cast<double>(a[static_cast<size_t>(r * n + c)]));
    best = std::max(best, s);
  }
  return best;
}

// y[n, :, p] = M x[n, :, p] for every pixel: per-pixel channel mixing.
template <class T>
Tensor<T> channel_mix(const Tensor<T>& x, const std::vector<T>& m) {
  check(x.shape.size() == 4, ErrKind::shape, "channel_mix: input must be N x C x H x W");
  const int64_t c = x.shape[1];
  check(static_cast<int64_t>(m.size()) == c * c, ErrKind::shape,
        "channel_mix: matrix must be C x C");
  Tensor<T> y(x.shape);
  const int64_t hw = x.shape[2] * x.shape[3];
  for (int64_t n = 0; n < x.shape[0]; ++n) {
    const T* xn = x.data() + n * c * hw;
    T* yn = y.data() + n * c * hw;
    for (int64_t o = 0; o < c; ++o) {
      T* row = yn + o * hw;
      for (int64_t i = 0; i < c; ++i) {
        const T f = m[static_cast<size_t>(o * c + i)];
        if (f == T(0)) continue;
        const T* src = xn + i * hw;
        for (int64_t p = 0; p < hw; ++p) row[p] += f * src[p];
      }
    }
  }
  return y;
}

// Adjoints of y = M x: dx += M^T dy ; dm[o][i] += sum over pixels dy_o * x_i.
template <class T>
void channel_mix_backward(const Tensor<T>& x, const std::vector<T>& m, const Tensor<T>& dy,
                          Tensor<T>* dx, std::vector<T>* dm) {
  const int64_t c = x.shape[1];
  const int64_t hw = x.shape[2] * x.shape[3];
  for (int64_t n = 0; n < x.shape[0]; ++n) {
    const T* xn = x.data() + n * c * hw;
    const T* dyn = dy.data() + n * c * hw;
    if (dx) {
      T* dxn = dx->data() + n * c * hw;
      for (int64_t i = 0; i < c; ++i) {
        T* row = dxn + i * hw;
        for (int64_t o = 0; o < c; ++o) {
          const T f = m[static_cast<size_t>(o * c + i)];
          if (f == T(0)) continue;
          const T* src = dyn + o * hw;
          for (int64_t p = 0; p < hw; ++p) row[p] += f * src[p];
        }
      }
    }
    if (dm) {
      for (int64_t o = 0; o < c; ++o)
        for (int64_t i = 0; i < c; ++i) {
          const T* g = dyn + o * hw;
          const T* src = xn + i * hw;
          double s = 0;
          for (int64_t p = 0; p < hw; ++p) s += static_cast<double>(g[p]) * static_cast<double>(src[p]);
          (*dm)[static_cast<size_t>(o * c + i)] += static_cast<T>(s);
        }
    }
  }
}

}  // namespace tcinn
