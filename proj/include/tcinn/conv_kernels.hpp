#pragma once

#include <cstdint>

// Fast single-precision kernels for the one convolution shape the model uses
// everywhere: 3x3, stride 1, padding 1. All kernels read zero-padded input
// planes; the forward kernel writes plain NCHW planes directly, with weights
// broadcast from their natural [cout, cin, 3, 3] layout, so no repacking or
// scatter pass is needed around it.
//
// Layouts:
//   pad - Cin planes of (H+2) x (W+2) floats, zero border, image centered
//   k   - k[(m*cin + c)*9 + tap], tap = ty*3 + tx (the model's kernel layout)
//   out - Cout contiguous H x W planes
//
// The functions are compiled for AVX-512 via target attributes and must only
// be called when kernels_available() is true; the generic conv path in
// conv.hpp handles every other case.

namespace tcinn::kern {

bool kernels_available();

// out = conv(pad, k) + bias, or out += conv(pad, k) when accumulate is set
// (bias must be null then). Works for any cout; output channels are processed
// in register-blocked groups.
void conv3x3_fwd_nchw(const float* pad, int64_t cin, int64_t h, int64_t w, const float* k,
                      const float* bias, float* out, int64_t cout, bool accumulate);

// dk += correlation of padded input planes with NCHW dy planes; layout of dk
// matches k above. Intended for small cout where the pixels-major variant
// would waste most of its 16 lanes.
void conv3x3_dw_small(const float* pad, int64_t cin, int64_t h, int64_t w, const float* dy,
                      int64_t cout, float* dk);

// dwt += correlation of padded input planes with a pixels-major dy block of
// 16 output channels; dwt rows are (c*9 + tap), 16 columns.
void conv3x3_dw_pm(const float* pad, int cin, int h, int w, const float* dy_pm, float* dwt);

}  // namespace tcinn::kern
