#include "tcinn/conv_kernels.hpp"

#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#endif

// The accumulators below are deliberately spelled out as named locals. gcc
// keeps named __m512 locals in registers but spills arrays of them to the
// stack, which costs a factor of two on these loops.

namespace tcinn::kern {

bool kernels_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx512f") != 0;
#else
  return false;
#endif
}

#if defined(__x86_64__) || defined(_M_X64)

namespace {

inline __mmask16 lane_mask(int64_t rem) {
  if (rem >= 16) return static_cast<__mmask16>(0xFFFF);
  if (rem <= 0) return static_cast<__mmask16>(0);
  return static_cast<__mmask16>((1u << rem) - 1u);
}

// Eight output channels x 32 pixels per pass. Per (cin, tap): two pixel-vector
// loads and eight weight broadcasts feed sixteen FMAs, so the loop is bound by
// the FMA ports rather than by loads.
__attribute__((target("avx512f"))) void fwd_block8(const float* pad, int64_t cin, int64_t h,
                                                   int64_t w, const float* k, const float* bias,
                                                   float* out, int64_t m0, bool accumulate) {
  const int64_t pw = w + 2;
  const size_t plane = static_cast<size_t>(h + 2) * pw;
  const size_t hw = static_cast<size_t>(h) * w;
  const int64_t cin9 = cin * 9;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x0 = 0; x0 < w; x0 += 32) {
      const int64_t rem = w - x0;
      const __mmask16 q0 = lane_mask(rem);
      const __mmask16 q1 = lane_mask(rem - 16);
      float* o0 = out + (m0 + 0) * hw + static_cast<size_t>(y) * w + x0;
      float* o1 = out + (m0 + 1) * hw + static_cast<size_t>(y) * w + x0;
      float* o2 = out + (m0 + 2) * hw + static_cast<size_t>(y) * w + x0;
      float* o3 = out + (m0 + 3) * hw + static_cast<size_t>(y) * w + x0;
      float* o4 = out + (m0 + 4) * hw + static_cast<size_t>(y) * w + x0;
      float* o5 = out + (m0 + 5) * hw + static_cast<size_t>(y) * w + x0;
      float* o6 = out + (m0 + 6) * hw + static_cast<size_t>(y) * w + x0;
      float* o7 = out + (m0 + 7) * hw + static_cast<size_t>(y) * w + x0;
      __m512 a0, a1, a2, a3, a4, a5, a6, a7, b0, b1, b2, b3, b4, b5, b6, b7;
      if (accumulate) {
        a0 = _mm512_maskz_loadu_ps(q0, o0);
        b0 = _mm512_maskz_loadu_ps(q1, o0 + 16);
        a1 = _mm512_maskz_loadu_ps(q0, o1);
        b1 = _mm512_maskz_loadu_ps(q1, o1 + 16);
        a2 = _mm512_maskz_loadu_ps(q0, o2);
        b2 = _mm512_maskz_loadu_ps(q1, o2 + 16);
        a3 = _mm512_maskz_loadu_ps(q0, o3);
        b3 = _mm512_maskz_loadu_ps(q1, o3 + 16);
        a4 = _mm512_maskz_loadu_ps(q0, o4);
        b4 = _mm512_maskz_loadu_ps(q1, o4 + 16);
        a5 = _mm512_maskz_loadu_ps(q0, o5);
        b5 = _mm512_maskz_loadu_ps(q1, o5 + 16);
        a6 = _mm512_maskz_loadu_ps(q0, o6);
        b6 = _mm512_maskz_loadu_ps(q1, o6 + 16);
        a7 = _mm512_maskz_loadu_ps(q0, o7);
        b7 = _mm512_maskz_loadu_ps(q1, o7 + 16);
      } else {
        a0 = bias ? _mm512_set1_ps(bias[m0 + 0]) : _mm512_setzero_ps();
        a1 = bias ? _mm512_set1_ps(bias[m0 + 1]) : _mm512_setzero_ps();
        a2 = bias ? _mm512_set1_ps(bias[m0 + 2]) : _mm512_setzero_ps();
        a3 = bias ? _mm512_set1_ps(bias[m0 + 3]) : _mm512_setzero_ps();
        a4 = bias ? _mm512_set1_ps(bias[m0 + 4]) : _mm512_setzero_ps();
        a5 = bias ? _mm512_set1_ps(bias[m0 + 5]) : _mm512_setzero_ps();
        a6 = bias ? _mm512_set1_ps(bias[m0 + 6]) : _mm512_setzero_ps();
        a7 = bias ? _mm512_set1_ps(bias[m0 + 7]) : _mm512_setzero_ps();
        b0 = a0;
        b1 = a1;
        b2 = a2;
        b3 = a3;
        b4 = a4;
        b5 = a5;
        b6 = a6;
        b7 = a7;
      }
      const float* kc = k + (m0 * cin) * 9;
      for (int64_t c = 0; c < cin; ++c, kc += 9) {
        const float* base = pad + c * plane + static_cast<size_t>(y) * pw + x0;
        for (int tap = 0; tap < 9; ++tap) {
          const float* r = base + static_cast<size_t>(tap / 3) * pw + tap % 3;
          const __m512 xv0 = _mm512_maskz_loadu_ps(q0, r);
          const __m512 xv1 = _mm512_maskz_loadu_ps(q1, r + 16);
          const float* kp = kc + tap;
          __m512 wb = _mm512_set1_ps(kp[0 * cin9]);
          a0 = _mm512_fmadd_ps(wb, xv0, a0);
          b0 = _mm512_fmadd_ps(wb, xv1, b0);
          wb = _mm512_set1_ps(kp[1 * cin9]);
          a1 = _mm512_fmadd_ps(wb, xv0, a1);
          b1 = _mm512_fmadd_ps(wb, xv1, b1);
          wb = _mm512_set1_ps(kp[2 * cin9]);
          a2 = _mm512_fmadd_ps(wb, xv0, a2);
          b2 = _mm512_fmadd_ps(wb, xv1, b2);
          wb = _mm512_set1_ps(kp[3 * cin9]);
          a3 = _mm512_fmadd_ps(wb, xv0, a3);
          b3 = _mm512_fmadd_ps(wb, xv1, b3);
          wb = _mm512_set1_ps(kp[4 * cin9]);
          a4 = _mm512_fmadd_ps(wb, xv0, a4);
          b4 = _mm512_fmadd_ps(wb, xv1, b4);
          wb = _mm512_set1_ps(kp[5 * cin9]);
          a5 = _mm512_fmadd_ps(wb, xv0, a5);
          b5 = _mm512_fmadd_ps(wb, xv1, b5);
          wb = _mm512_set1_ps(kp[6 * cin9]);
          a6 = _mm512_fmadd_ps(wb, xv0, a6);
          b6 = _mm512_fmadd_ps(wb, xv1, b6);
          wb = _mm512_set1_ps(kp[7 * cin9]);
          a7 = _mm512_fmadd_ps(wb, xv0, a7);
          b7 = _mm512_fmadd_ps(wb, xv1, b7);
        }
      }
      _mm512_mask_storeu_ps(o0, q0, a0);
      _mm512_mask_storeu_ps(o0 + 16, q1, b0);
      _mm512_mask_storeu_ps(o1, q0, a1);
      _mm512_mask_storeu_ps(o1 + 16, q1, b1);
      _mm512_mask_storeu_ps(o2, q0, a2);
      _mm512_mask_storeu_ps(o2 + 16, q1, b2);
      _mm512_mask_storeu_ps(o3, q0, a3);
      _mm512_mask_storeu_ps(o3 + 16, q1, b3);
      _mm512_mask_storeu_ps(o4, q0, a4);
      _mm512_mask_storeu_ps(o4 + 16, q1, b4);
      _mm512_mask_storeu_ps(o5, q0, a5);
      _mm512_mask_storeu_ps(o5 + 16, q1, b5);
      _mm512_mask_storeu_ps(o6, q0, a6);
      _mm512_mask_storeu_ps(o6 + 16, q1, b6);
      _mm512_mask_storeu_ps(o7, q0, a7);
      _mm512_mask_storeu_ps(o7 + 16, q1, b7);
    }
  }
}

// Two output channels x 64 pixels per pass, for the narrow layers that map
// the dense features back to a channel half.
__attribute__((target("avx512f"))) void fwd_block2(const float* pad, int64_t cin, int64_t h,
                                                   int64_t w, const float* k, const float* bias,
                                                   float* out, int64_t m0, bool accumulate) {
  const int64_t pw = w + 2;
  const size_t plane = static_cast<size_t>(h + 2) * pw;
  const size_t hw = static_cast<size_t>(h) * w;
  const int64_t cin9 = cin * 9;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x0 = 0; x0 < w; x0 += 64) {
      const int64_t rem = w - x0;
      const __mmask16 q0 = lane_mask(rem);
      const __mmask16 q1 = lane_mask(rem - 16);
      const __mmask16 q2 = lane_mask(rem - 32);
      const __mmask16 q3 = lane_mask(rem - 48);
      float* o0 = out + (m0 + 0) * hw + static_cast<size_t>(y) * w + x0;
      float* o1 = out + (m0 + 1) * hw + static_cast<size_t>(y) * w + x0;
      __m512 a0, a1, a2, a3, b0, b1, b2, b3;
      if (accumulate) {
        a0 = _mm512_maskz_loadu_ps(q0, o0);
        a1 = _mm512_maskz_loadu_ps(q1, o0 + 16);
        a2 = _mm512_maskz_loadu_ps(q2, o0 + 32);
        a3 = _mm512_maskz_loadu_ps(q3, o0 + 48);
        b0 = _mm512_maskz_loadu_ps(q0, o1);
        b1 = _mm512_maskz_loadu_ps(q1, o1 + 16);
        b2 = _mm512_maskz_loadu_ps(q2, o1 + 32);
        b3 = _mm512_maskz_loadu_ps(q3, o1 + 48);
      } else {
        a0 = bias ? _mm512_set1_ps(bias[m0 + 0]) : _mm512_setzero_ps();
        b0 = bias ? _mm512_set1_ps(bias[m0 + 1]) : _mm512_setzero_ps();
        a1 = a0;
        a2 = a0;
        a3 = a0;
        b1 = b0;
        b2 = b0;
        b3 = b0;
      }
      const float* kc = k + (m0 * cin) * 9;
      for (int64_t c = 0; c < cin; ++c, kc += 9) {
        const float* base = pad + c * plane + static_cast<size_t>(y) * pw + x0;
        for (int tap = 0; tap < 9; ++tap) {
          const float* r = base + static_cast<size_t>(tap / 3) * pw + tap % 3;
          const __m512 xv0 = _mm512_maskz_loadu_ps(q0, r);
          const __m512 xv1 = _mm512_maskz_loadu_ps(q1, r + 16);
          const __m512 xv2 = _mm512_maskz_loadu_ps(q2, r + 32);
          const __m512 xv3 = _mm512_maskz_loadu_ps(q3, r + 48);
          const float* kp = kc + tap;
          __m512 wb = _mm512_set1_ps(kp[0 * cin9]);
          a0 = _mm512_fmadd_ps(wb, xv0, a0);
          a1 = _mm512_fmadd_ps(wb, xv1, a1);
          a2 = _mm512_fmadd_ps(wb, xv2, a2);
          a3 = _mm512_fmadd_ps(wb, xv3, a3);
          wb = _mm512_set1_ps(kp[1 * cin9]);
          b0 = _mm512_fmadd_ps(wb, xv0, b0);
          b1 = _mm512_fmadd_ps(wb, xv1, b1);
          b2 = _mm512_fmadd_ps(wb, xv2, b2);
          b3 = _mm512_fmadd_ps(wb, xv3, b3);
        }
      }
      _mm512_mask_storeu_ps(o0, q0, a0);
      _mm512_mask_storeu_ps(o0 + 16, q1, a1);
      _mm512_mask_storeu_ps(o0 + 32, q2, a2);
      _mm512_mask_storeu_ps(o0 + 48, q3, a3);
      _mm512_mask_storeu_ps(o1, q0, b0);
      _mm512_mask_storeu_ps(o1 + 16, q1, b1);
      _mm512_mask_storeu_ps(o1 + 32, q2, b2);
      _mm512_mask_storeu_ps(o1 + 48, q3, b3);
    }
  }
}

__attribute__((target("avx512f"))) void fwd_block1(const float* pad, int64_t cin, int64_t h,
                                                   int64_t w, const float* k, const float* bias,
                                                   float* out, int64_t m0, bool accumulate) {
  const int64_t pw = w + 2;
  const size_t plane = static_cast<size_t>(h + 2) * pw;
  const size_t hw = static_cast<size_t>(h) * w;
  const int64_t cin9 = cin * 9;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x0 = 0; x0 < w; x0 += 64) {
      const int64_t rem = w - x0;
      const __mmask16 q0 = lane_mask(rem);
      const __mmask16 q1 = lane_mask(rem - 16);
      const __mmask16 q2 = lane_mask(rem - 32);
      const __mmask16 q3 = lane_mask(rem - 48);
      float* o0 = out + m0 * hw + static_cast<size_t>(y) * w + x0;
      __m512 a0, a1, a2, a3;
      if (accumulate) {
        a0 = _mm512_maskz_loadu_ps(q0, o0);
        a1 = _mm512_maskz_loadu_ps(q1, o0 + 16);
        a2 = _mm512_maskz_loadu_ps(q2, o0 + 32);
        a3 = _mm512_maskz_loadu_ps(q3, o0 + 48);
      } else {
        a0 = bias ? _mm512_set1_ps(bias[m0]) : _mm512_setzero_ps();
        a1 = a0;
        a2 = a0;
        a3 = a0;
      }
      const float* kc = k + (m0 * cin) * 9;
      for (int64_t c = 0; c < cin; ++c, kc += 9) {
        const float* base = pad + c * plane + static_cast<size_t>(y) * pw + x0;
        for (int tap = 0; tap < 9; ++tap) {
          const float* r = base + static_cast<size_t>(tap / 3) * pw + tap % 3;
          const __m512 wb = _mm512_set1_ps(kc[tap]);
          a0 = _mm512_fmadd_ps(wb, _mm512_maskz_loadu_ps(q0, r), a0);
          a1 = _mm512_fmadd_ps(wb, _mm512_maskz_loadu_ps(q1, r + 16), a1);
          a2 = _mm512_fmadd_ps(wb, _mm512_maskz_loadu_ps(q2, r + 32), a2);
          a3 = _mm512_fmadd_ps(wb, _mm512_maskz_loadu_ps(q3, r + 48), a3);
        }
      }
      _mm512_mask_storeu_ps(o0, q0, a0);
      _mm512_mask_storeu_ps(o0 + 16, q1, a1);
      _mm512_mask_storeu_ps(o0 + 32, q2, a2);
      _mm512_mask_storeu_ps(o0 + 48, q3, a3);
    }
  }
}

}  // namespace

__attribute__((target("avx512f"))) void conv3x3_fwd_nchw(const float* pad, int64_t cin, int64_t h,
                                                         int64_t w, const float* k,
                                                         const float* bias, float* out,
                                                         int64_t cout, bool accumulate) {
  int64_t m0 = 0;
  for (; m0 + 8 <= cout; m0 += 8) fwd_block8(pad, cin, h, w, k, bias, out, m0, accumulate);
  for (; m0 + 2 <= cout; m0 += 2) fwd_block2(pad, cin, h, w, k, bias, out, m0, accumulate);
  for (; m0 < cout; ++m0) fwd_block1(pad, cin, h, w, k, bias, out, m0, accumulate);
}

__attribute__((target("avx512f"))) void conv3x3_dw_small(const float* pad, int64_t cin, int64_t h,
                                                         int64_t w, const float* dy, int64_t cout,
                                                         float* dk) {
  const int64_t pw = w + 2;
  const size_t plane = static_cast<size_t>(h + 2) * pw;
  const size_t hw = static_cast<size_t>(h) * w;
  for (int64_t m = 0; m < cout; ++m) {
    for (int64_t c = 0; c < cin; ++c) {
      // One accumulator per tap, kept across the whole image pass; taps are
      // reduced to scalars only once at the end.
      __m512 t0 = _mm512_setzero_ps(), t1 = t0, t2 = t0, t3 = t0, t4 = t0, t5 = t0, t6 = t0,
             t7 = t0, t8 = t0;
      for (int64_t y = 0; y < h; ++y) {
        const float* g = dy + m * hw + static_cast<size_t>(y) * w;
        const float* r0 = pad + c * plane + static_cast<size_t>(y) * pw;
        const float* r1 = r0 + pw;
        const float* r2 = r1 + pw;
        for (int64_t x0 = 0; x0 < w; x0 += 16) {
          const __mmask16 q = lane_mask(w - x0);
          const __m512 gv = _mm512_maskz_loadu_ps(q, g + x0);
          t0 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r0 + x0), t0);
          t1 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r0 + x0 + 1), t1);
          t2 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r0 + x0 + 2), t2);
          t3 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r1 + x0), t3);
          t4 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r1 + x0 + 1), t4);
          t5 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r1 + x0 + 2), t5);
          t6 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r2 + x0), t6);
          t7 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r2 + x0 + 1), t7);
          t8 = _mm512_fmadd_ps(gv, _mm512_maskz_loadu_ps(q, r2 + x0 + 2), t8);
        }
      }
      float* o = dk + (m * cin + c) * 9;
      o[0] += _mm512_reduce_add_ps(t0);
      o[1] += _mm512_reduce_add_ps(t1);
      o[2] += _mm512_reduce_add_ps(t2);
      o[3] += _mm512_reduce_add_ps(t3);
      o[4] += _mm512_reduce_add_ps(t4);
      o[5] += _mm512_reduce_add_ps(t5);
      o[6] += _mm512_reduce_add_ps(t6);
      o[7] += _mm512_reduce_add_ps(t7);
      o[8] += _mm512_reduce_add_ps(t8);
    }
  }
}

__attribute__((target("avx512f"))) void conv3x3_dw_pm(const float* pad, int cin, int h, int w,
                                                      const float* dy_pm, float* dwt) {
  const int pw = w + 2;
  const size_t plane = static_cast<size_t>(h + 2) * pw;
  const int kk = cin * 9;
  auto stream_at = [&](int k, int y) -> const float* {
    const int c = k / 9, tap = k % 9;
    return pad + c * plane + static_cast<size_t>(y + tap / 3) * pw + tap % 3;
  };
  int k0 = 0;
  // 16 kernel rows at a time, their partial sums live in 16 registers across
  // a full pass over the image.
  for (; k0 + 16 <= kk; k0 += 16) {
    __m512 a0 = _mm512_setzero_ps(), a1 = a0, a2 = a0, a3 = a0, a4 = a0, a5 = a0, a6 = a0, a7 = a0,
           a8 = a0, a9 = a0, aa = a0, ab = a0, ac = a0, ad = a0, ae = a0, af = a0;
    for (int y = 0; y < h; ++y) {
      const float* s0 = stream_at(k0 + 0, y);
      const float* s1 = stream_at(k0 + 1, y);
      const float* s2 = stream_at(k0 + 2, y);
      const float* s3 = stream_at(k0 + 3, y);
      const float* s4 = stream_at(k0 + 4, y);
      const float* s5 = stream_at(k0 + 5, y);
      const float* s6 = stream_at(k0 + 6, y);
      const float* s7 = stream_at(k0 + 7, y);
      const float* s8 = stream_at(k0 + 8, y);
      const float* s9 = stream_at(k0 + 9, y);
      const float* sa = stream_at(k0 + 10, y);
      const float* sb = stream_at(k0 + 11, y);
      const float* sc = stream_at(k0 + 12, y);
      const float* sd = stream_at(k0 + 13, y);
      const float* se = stream_at(k0 + 14, y);
      const float* sf = stream_at(k0 + 15, y);
      const float* g = dy_pm + static_cast<size_t>(y) * w * 16;
      for (int x = 0; x < w; ++x, g += 16) {
        const __m512 gv = _mm512_loadu_ps(g);
        a0 = _mm512_fmadd_ps(_mm512_set1_ps(s0[x]), gv, a0);
        a1 = _mm512_fmadd_ps(_mm512_set1_ps(s1[x]), gv, a1);
        a2 = _mm512_fmadd_ps(_mm512_set1_ps(s2[x]), gv, a2);
        a3 = _mm512_fmadd_ps(_mm512_set1_ps(s3[x]), gv, a3);
        a4 = _mm512_fmadd_ps(_mm512_set1_ps(s4[x]), gv, a4);
        a5 = _mm512_fmadd_ps(_mm512_set1_ps(s5[x]), gv, a5);
        a6 = _mm512_fmadd_ps(_mm512_set1_ps(s6[x]), gv, a6);
        a7 = _mm512_fmadd_ps(_mm512_set1_ps(s7[x]), gv, a7);
        a8 = _mm512_fmadd_ps(_mm512_set1_ps(s8[x]), gv, a8);
        a9 = _mm512_fmadd_ps(_mm512_set1_ps(s9[x]), gv, a9);
        aa = _mm512_fmadd_ps(_mm512_set1_ps(sa[x]), gv, aa);
        ab = _mm512_fmadd_ps(_mm512_set1_ps(sb[x]), gv, ab);
        ac = _mm512_fmadd_ps(_mm512_set1_ps(sc[x]), gv, ac);
        ad = _mm512_fmadd_ps(_mm512_set1_ps(sd[x]), gv, ad);
        ae = _mm512_fmadd_ps(_mm512_set1_ps(se[x]), gv, ae);
        af = _mm512_fmadd_ps(_mm512_set1_ps(sf[x]), gv, af);
      }
    }
    float* o = dwt + static_cast<size_t>(k0) * 16;
    _mm512_storeu_ps(o + 0, _mm512_add_ps(_mm512_loadu_ps(o + 0), a0));
    _mm512_storeu_ps(o + 16, _mm512_add_ps(_mm512_loadu_ps(o + 16), a1));
    _mm512_storeu_ps(o + 32, _mm512_add_ps(_mm512_loadu_ps(o + 32), a2));
    _mm512_storeu_ps(o + 48, _mm512_add_ps(_mm512_loadu_ps(o + 48), a3));
    _mm512_storeu_ps(o + 64, _mm512_add_ps(_mm512_loadu_ps(o + 64), a4));
    _mm512_storeu_ps(o + 80, _mm512_add_ps(_mm512_loadu_ps(o + 80), a5));
    _mm512_storeu_ps(o + 96, _mm512_add_ps(_mm512_loadu_ps(o + 96), a6));
    _mm512_storeu_ps(o + 112, _mm512_add_ps(_mm512_loadu_ps(o + 112), a7));
    _mm512_storeu_ps(o + 128, _mm512_add_ps(_mm512_loadu_ps(o + 128), a8));
    _mm512_storeu_ps(o + 144, _mm512_add_ps(_mm512_loadu_ps(o + 144), a9));
    _mm512_storeu_ps(o + 160, _mm512_add_ps(_mm512_loadu_ps(o + 160), aa));
    _mm512_storeu_ps(o + 176, _mm512_add_ps(_mm512_loadu_ps(o + 176), ab));
    _mm512_storeu_ps(o + 192, _mm512_add_ps(_mm512_loadu_ps(o + 192), ac));
    _mm512_storeu_ps(o + 208, _mm512_add_ps(_mm512_loadu_ps(o + 208), ad));
    _mm512_storeu_ps(o + 224, _mm512_add_ps(_mm512_loadu_ps(o + 224), ae));
    _mm512_storeu_ps(o + 240, _mm512_add_ps(_mm512_loadu_ps(o + 240), af));
  }
  for (; k0 < kk; ++k0) {
    __m512 acc = _mm512_setzero_ps();
    for (int y = 0; y < h; ++y) {
      const float* s = stream_at(k0, y);
      const float* g = dy_pm + static_cast<size_t>(y) * w * 16;
      for (int x = 0; x < w; ++x, g += 16)
        acc = _mm512_fmadd_ps(_mm512_set1_ps(s[x]), _mm512_loadu_ps(g), acc);
    }
    float* o = dwt + static_cast<size_t>(k0) * 16;
    _mm512_storeu_ps(o, _mm512_add_ps(_mm512_loadu_ps(o), acc));
  }
}

#else

void conv3x3_fwd_nchw(const float*, int64_t, int64_t, int64_t, const float*, const float*, float*,
                      int64_t, bool) {}
void conv3x3_dw_small(const float*, int64_t, int64_t, int64_t, const float*, int64_t, float*) {}
void conv3x3_dw_pm(const float*, int, int, int, const float*, float*) {}

#endif

}  // namespace tcinn::kern
