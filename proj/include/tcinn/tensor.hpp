#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "tcinn/common.hpp"

namespace tcinn {

// Dense row-major tensor. Shapes use the canonical image layout N x C x H x W
// where four dims are involved, but any rank from 1 to 4 is legal (images on
// disk are [1,H,W], metric inputs may be flat vectors).
template <class T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> v;

  Tensor() = default;

  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(count(shape)), T(0));
  }

  Tensor(std::vector<int64_t> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
    check(static_cast<int64_t>(v.size()) == count(shape), ErrKind::shape,
          "tensor data length does not match shape");
  }

  static int64_t count(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      check(d > 0, ErrKind::shape, "tensor extents must be positive");
      n *= d;
    }
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(v.size()); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // NCHW accessors for the 4-d case.
  int64_t n() const { return shape.at(0); }
  int64_t c() const { return shape.at(1); }
  int64_t h() const { return shape.at(2); }
  int64_t w() const { return shape.at(3); }

  T& at4(int64_t n_, int64_t c_, int64_t h_, int64_t w_) {
    return v[static_cast<size_t>(((n_ * shape[1] + c_) * shape[2] + h_) * shape[3] + w_)];
  }
  T at4(int64_t n_, int64_t c_, int64_t h_, int64_t w_) const {
    return v[static_cast<size_t>(((n_ * shape[1] + c_) * shape[2] + h_) * shape[3] + w_)];
  }

  bool all_finite() const {
    for (const T& x : v)
      if (!is_finite(x)) return false;
    return true;
  }
};

inline std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  check(a.same_shape(b), ErrKind::shape,
        std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace tcinn
