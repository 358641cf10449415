#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/io.hpp"
#include "tcinn/rng.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

// Synthetic paired dataset: a source image made of random Gaussian blobs over
// a low background, and a target produced by a fixed analytic intensity
// remapping that is stronger near the image center. Everything is a pure
// function of (seed, pair index), so a dataset can be regenerated bit-for-bit.

struct PhantomConfig {
  uint64_t seed = 1;
  int64_t size = 64;   // square images, >= 16
  int64_t pairs = 100; // >= 1

  void validate() const {
    check(size >= 16, ErrKind::argument, "phantom: size must be >= 16");
    check(pairs >= 1, ErrKind::argument, "phantom: need at least one pair");
  }
};

struct PhantomPair {
  Tensor<double> source;  // [1, H, W], values in [0, 1]
  Tensor<double> target;  // [1, H, W]
};

inline PhantomPair make_phantom_pair(const PhantomConfig& cfg, int64_t index) {
  cfg.validate();
  check(index >= 0 && index < cfg.pairs, ErrKind::argument, "phantom: pair index out of range");
  const int64_t h = cfg.size, w = cfg.size;
  // Independent substream per pair, so pair k never depends on how many pairs
  // were generated before it.
  Rng rng(cfg.seed, stream::phantom_base + static_cast<uint64_t>(index));

  struct Blob {
    double cx, cy, sigma, amp;
  };
  const int64_t count = 3 + static_cast<int64_t>(rng.uniform_index(6));  // 3..8
  std::vector<Blob> blobs;
  blobs.reserve(static_cast<size_t>(count));
  for (int64_t b = 0; b < count; ++b) {
    Blob bl;
    bl.cx = rng.uniform(0.0, static_cast<double>(w));
    bl.cy = rng.uniform(0.0, static_cast<double>(h));
    bl.sigma = rng.uniform(static_cast<double>(h) / 16.0, static_cast<double>(h) / 8.0);
    bl.amp = rng.uniform(0.3, 0.9);
    blobs.push_back(bl);
  }

  PhantomPair out{Tensor<double>({1, h, w}), Tensor<double>({1, h, w})};
  const double ccx = (static_cast<double>(w) - 1.0) / 2.0;
  const double ccy = (static_cast<double>(h) - 1.0) / 2.0;
  const double sig_m = static_cast<double>(h) / 6.0;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double v = 0.05;
      for (const Blob& bl : blobs) {
        const double dx = static_cast<double>(x) - bl.cx;
        const double dy = static_cast<double>(y) - bl.cy;
        v += bl.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * bl.sigma * bl.sigma));
      }
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      const double dxc = static_cast<double>(x) - ccx;
      const double dyc = static_cast<double>(y) - ccy;
      const double m = std::exp(-(dxc * dxc + dyc * dyc) / (2.0 * sig_m * sig_m));
      out.source.v[y * w + x] = v;
      out.target.v[y * w + x] = m * std::sqrt(v) + (1.0 - m) * 0.8 * v;
    }
  }
  return out;
}

// Writes pair_%04lld_{src,tgt}.tcit files plus manifest.txt into out_dir.
// Returns the manifest path.
inline std::string generate_phantom_dataset(const PhantomConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  std::vector<std::array<std::string, 2>> rel;
  for (int64_t i = 0; i < cfg.pairs; ++i) {
    const PhantomPair p = make_phantom_pair(cfg, i);
    char src_name[64], tgt_name[64];
    std::snprintf(src_name, sizeof(src_name), "pair_%04lld_src.tcit", static_cast<long long>(i));
    std::snprintf(tgt_name, sizeof(tgt_name), "pair_%04lld_tgt.tcit", static_cast<long long>(i));
    write_tensor_file(p.source, out_dir + "/" + src_name);
    write_tensor_file(p.target, out_dir + "/" + tgt_name);
    rel.push_back({src_name, tgt_name});
  }
  const std::string manifest = out_dir + "/manifest.txt";
  write_manifest(rel, manifest);
  return manifest;
}

}  // namespace tcinn
