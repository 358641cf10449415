#pragma once

#include <cblas.h>

#include <cstring>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/conv_kernels.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

// 2D convolution with cross-correlation semantics (no kernel flip), the
// deep-learning convention. Two implementations sit behind one interface:
//  - a generic im2col + GEMM path for any odd kernel/stride/padding and both
//    precisions, backed by BLAS;
//  - fused AVX-512 kernels for the model's hot shape (3x3, stride 1, pad 1,
//    32-bit) that skip the im2col buffer entirely.
// Both are exercised against a straight-line reference in the test suite.

namespace detail {

inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                 const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// Reusable per-thread scratch so the training loop does not thrash the
// allocator with multi-megabyte buffers on every conv call.
template <class T>
inline std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> pool[6];
  return pool[slot];
}

struct ConvDims {
  int64_t n, cin, h, w, cout, kh, kw, ho, wo;
};

template <class T>
inline ConvDims conv_check(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>* b, int stride,
                           int padding) {
  check(x.shape.size() == 4, ErrKind::shape, "conv2d: input must be N x C x H x W");
  check(k.shape.size() == 4, ErrKind::shape, "conv2d: kernel must be Cout x Cin x kh x kw");
  ConvDims d{};
  d.n = x.shape[0];
  d.cin = x.shape[1];
  d.h = x.shape[2];
  d.w = x.shape[3];
  d.cout = k.shape[0];
  d.kh = k.shape[2];
  d.kw = k.shape[3];
  check(k.shape[1] == d.cin, ErrKind::shape,
        "conv2d: kernel expects " + std::to_string(k.shape[1]) + " input channels, input has " +
            std::to_string(d.cin));
  check(d.kh % 2 == 1 && d.kw % 2 == 1, ErrKind::argument, "conv2d: kernel extents must be odd");
  check(stride >= 1, ErrKind::argument, "conv2d: stride must be >= 1");
  check(padding >= 0, ErrKind::argument, "conv2d: padding must be >= 0");
  check(d.h + 2 * padding >= d.kh && d.w + 2 * padding >= d.kw, ErrKind::argument,
        "conv2d: kernel larger than padded input");
  if (b) {
    check(b->shape.size() == 1 && b->shape[0] == d.cout, ErrKind::shape,
          "conv2d: bias must have one entry per output channel");
  }
  d.ho = (d.h + 2 * padding - d.kh) / stride + 1;
  d.wo = (d.w + 2 * padding - d.kw) / stride + 1;
  return d;
}

template <class T>
inline void im2col(const T* xn, const ConvDims& d, int stride, int padding, T* cols) {
  const int64_t np = d.ho * d.wo;
  int64_t kidx = 0;
  for (int64_t c = 0; c < d.cin; ++c)
    for (int64_t ky = 0; ky < d.kh; ++ky)
      for (int64_t kx = 0; kx < d.kw; ++kx, ++kidx) {
        T* row = cols + kidx * np;
        for (int64_t oy = 0; oy < d.ho; ++oy) {
          const int64_t iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= d.h) {
            std::memset(row + oy * d.wo, 0, sizeof(T) * static_cast<size_t>(d.wo));
            continue;
          }
          const T* src = xn + (c * d.h + iy) * d.w;
          for (int64_t ox = 0; ox < d.wo; ++ox) {
            const int64_t ix = ox * stride - padding + kx;
            row[oy * d.wo + ox] = (ix >= 0 && ix < d.w) ? src[ix] : T(0);
          }
        }
      }
}

template <class T>
inline void col2im_add(const T* cols, const ConvDims& d, int stride, int padding, T* dxn) {
  const int64_t np = d.ho * d.wo;
  int64_t kidx = 0;
  for (int64_t c = 0; c < d.cin; ++c)
    for (int64_t ky = 0; ky < d.kh; ++ky)
      for (int64_t kx = 0; kx < d.kw; ++kx, ++kidx) {
        const T* row = cols + kidx * np;
        for (int64_t oy = 0; oy < d.ho; ++oy) {
          const int64_t iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= d.h) continue;
          T* dst = dxn + (c * d.h + iy) * d.w;
          for (int64_t ox = 0; ox < d.wo; ++ox) {
            const int64_t ix = ox * stride - padding + kx;
            if (ix >= 0 && ix < d.w) dst[ix] += row[oy * d.wo + ox];
          }
        }
      }
}

inline bool fast_path(const ConvDims& d, int stride, int padding, float) {
  return stride == 1 && padding == 1 && d.kh == 3 && d.kw == 3 && kern::kernels_available();
}
inline bool fast_path(const ConvDims&, int, int, double) { return false; }

// Zero-padded per-channel planes for the fused kernels.
inline void build_pad_planes(const float* xn, int64_t cin, int64_t h, int64_t w, float* pad) {
  const int64_t pw = w + 2;
  const size_t plane = static_cast<size_t>(h + 2) * pw;
  std::memset(pad, 0, sizeof(float) * plane * cin);
  for (int64_t c = 0; c < cin; ++c)
    for (int64_t y = 0; y < h; ++y)
      std::memcpy(pad + c * plane + (y + 1) * pw + 1, xn + (c * h + y) * w,
                  sizeof(float) * static_cast<size_t>(w));
}

}  // namespace detail

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& b, int stride,
                 int padding) {
  using namespace detail;
  const ConvDims d = conv_check(x, k, &b, stride, padding);
  Tensor<T> out({d.n, d.cout, d.ho, d.wo});
  const int64_t np = d.ho * d.wo;

  if constexpr (std::is_same_v<T, float>) {
    if (fast_path(d, stride, padding, T(0))) {
      auto& pad = scratch<float>(0);
      pad.resize(static_cast<size_t>(d.cin) * (d.h + 2) * (d.w + 2));
      for (int64_t n = 0; n < d.n; ++n) {
        build_pad_planes(x.data() + n * d.cin * np, d.cin, d.h, d.w, pad.data());
        kern::conv3x3_fwd_nchw(pad.data(), d.cin, d.h, d.w, k.data(), b.data(),
                               out.data() + n * d.cout * np, d.cout, false);
      }
      return out;
    }
  }

  const int64_t kk = d.cin * d.kh * d.kw;
  auto& cols = scratch<T>(0);
  cols.resize(static_cast<size_t>(kk) * np);
  for (int64_t n = 0; n < d.n; ++n) {
    im2col(x.data() + n * d.cin * d.h * d.w, d, stride, padding, cols.data());
    T* out_n = out.data() + n * d.cout * np;
    gemm(false, false, static_cast<int>(d.cout), static_cast<int>(np), static_cast<int>(kk), T(1),
         k.data(), static_cast<int>(kk), cols.data(), static_cast<int>(np), T(0), out_n,
         static_cast<int>(np));
    for (int64_t m = 0; m < d.cout; ++m) {
      const T bm = b.v[static_cast<size_t>(m)];
      T* row = out_n + m * np;
      for (int64_t p = 0; p < np; ++p) row[p] += bm;
    }
  }
  return out;
}

// Gradients accumulate (+=) into any non-null output tensor, which must be
// pre-sized to match x / k / bias respectively.
template <class T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& dy, int stride,
                     int padding, Tensor<T>* dx, Tensor<T>* dk, Tensor<T>* db) {
  using namespace detail;
  const ConvDims d = conv_check(x, k, static_cast<const Tensor<T>*>(nullptr), stride, padding);
  check(dy.shape == std::vector<int64_t>({d.n, d.cout, d.ho, d.wo}), ErrKind::shape,
        "conv2d_backward: dy shape mismatch");
  if (dx) check(dx->same_shape(x), ErrKind::shape, "conv2d_backward: dx shape mismatch");
  if (dk) check(dk->same_shape(k), ErrKind::shape, "conv2d_backward: dk shape mismatch");
  if (db)
    check(db->shape.size() == 1 && db->shape[0] == d.cout, ErrKind::shape,
          "conv2d_backward: db shape mismatch");
  const int64_t np = d.ho * d.wo;

  if (db) {
    for (int64_t n = 0; n < d.n; ++n)
      for (int64_t m = 0; m < d.cout; ++m) {
        const T* row = dy.data() + (n * d.cout + m) * np;
        double s = 0;
        for (int64_t p = 0; p < np; ++p) s += static_cast<double>(row[p]);
        db->v[static_cast<size_t>(m)] += static_cast<T>(s);
      }
  }

  if constexpr (std::is_same_v<T, float>) {
    if (fast_path(d, stride, padding, T(0))) {
      auto& pad = scratch<float>(0);
      auto& ktr = scratch<float>(1);
      auto& pm = scratch<float>(2);
      auto& acc = scratch<float>(3);
      if (dx) {
        // dL/dx is itself a 3x3/s1/p1 convolution: of dy, with the kernel
        // transposed across in/out channels and point-reflected in space.
        ktr.resize(static_cast<size_t>(d.cin) * d.cout * 9);
        for (int64_t j = 0; j < d.cin; ++j)
          for (int64_t m = 0; m < d.cout; ++m)
            for (int tap = 0; tap < 9; ++tap)
              ktr[static_cast<size_t>((j * d.cout + m) * 9 + tap)] =
                  k.v[static_cast<size_t>((m * d.cin + j) * 9 + (8 - tap))];
      }
      for (int64_t n = 0; n < d.n; ++n) {
        const float* dyn = dy.data() + n * d.cout * np;
        if (dx) {
          pad.resize(static_cast<size_t>(d.cout) * (d.h + 2) * (d.w + 2));
          build_pad_planes(dyn, d.cout, d.h, d.w, pad.data());
          kern::conv3x3_fwd_nchw(pad.data(), d.cout, d.h, d.w, ktr.data(), nullptr,
                                 dx->data() + n * d.cin * np, d.cin, true);
        }
        if (dk) {
          pad.resize(static_cast<size_t>(d.cin) * (d.h + 2) * (d.w + 2));
          build_pad_planes(x.data() + n * d.cin * np, d.cin, d.h, d.w, pad.data());
          if (d.cout < 8) {
            kern::conv3x3_dw_small(pad.data(), d.cin, d.h, d.w, dyn, d.cout, dk->data());
          } else {
            pm.resize(static_cast<size_t>(np) * 16);
            acc.resize(static_cast<size_t>(d.cin) * 9 * 16);
            for (int64_t g0 = 0; g0 < d.cout; g0 += 16) {
              const int64_t mg = std::min<int64_t>(16, d.cout - g0);
              for (int64_t p = 0; p < np; ++p) {
                float* dst = pm.data() + p * 16;
                for (int64_t j = 0; j < 16; ++j)
                  dst[j] = (j < mg) ? dyn[(g0 + j) * np + p] : 0.0f;
              }
              std::fill(acc.begin(), acc.end(), 0.0f);
              kern::conv3x3_dw_pm(pad.data(), static_cast<int>(d.cin), static_cast<int>(d.h),
                                  static_cast<int>(d.w), pm.data(), acc.data());
              for (int64_t j = 0; j < mg; ++j)
                for (int64_t c = 0; c < d.cin; ++c)
                  for (int tap = 0; tap < 9; ++tap)
                    dk->v[static_cast<size_t>(((g0 + j) * d.cin + c) * 9 + tap)] +=
                        acc[static_cast<size_t>(c * 9 + tap) * 16 + j];
            }
          }
        }
      }
      return;
    }
  }

  const int64_t kk = d.cin * d.kh * d.kw;
  auto& cols = scratch<T>(0);
  auto& dcols = scratch<T>(1);
  cols.resize(static_cast<size_t>(kk) * np);
  for (int64_t n = 0; n < d.n; ++n) {
    const T* dyn = dy.data() + n * d.cout * np;
    if (dk) {
      im2col(x.data() + n * d.cin * d.h * d.w, d, stride, padding, cols.data());
      gemm(false, true, static_cast<int>(d.cout), static_cast<int>(kk), static_cast<int>(np), T(1),
           dyn, static_cast<int>(np), cols.data(), static_cast<int>(np), T(1), dk->data(),
           static_cast<int>(kk));
    }
    if (dx) {
      dcols.resize(static_cast<size_t>(kk) * np);
      gemm(true, false, static_cast<int>(kk), static_cast<int>(np), static_cast<int>(d.cout), T(1),
           k.data(), static_cast<int>(kk), dyn, static_cast<int>(np), T(0), dcols.data(),
           static_cast<int>(np));
      col2im_add(dcols.data(), d, stride, padding, dx->data() + n * d.cin * d.h * d.w);
    }
  }
}

}  // namespace tcinn
