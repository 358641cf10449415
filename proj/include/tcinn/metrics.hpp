#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/io.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

// Image-quality metrics. Everything here is computed in double regardless of
// the engine precision, and all functions are pure.

namespace detail {

inline void metrics_same_shape(const Tensor<double>& a, const Tensor<double>& b,
                               const char* what) {
  check(a.same_shape(b), ErrKind::shape,
        std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  check(a.size() > 0, ErrKind::argument, std::string(what) + ": empty input");
}

inline double mean_sq_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a.v[i] - b.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace detail

// 20*log10(max_val / RMSE). Identical images yield the infinite sentinel,
// which serializes as the literal "inf" and is excluded from aggregation.
inline double psnr(const Tensor<double>& y_ref, const Tensor<double>& y_hat, double max_val) {
  detail::metrics_same_shape(y_ref, y_hat, "psnr");
  check(max_val > 0.0, ErrKind::argument, "psnr: max_val must be positive");
  const double mse = detail::mean_sq_diff(y_ref, y_hat);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(max_val / std::sqrt(mse));
}

inline double rmse_percent(const Tensor<double>& y_ref, const Tensor<double>& y_hat) {
  detail::metrics_same_shape(y_ref, y_hat, "rmse_percent");
  return 100.0 * std::sqrt(detail::mean_sq_diff(y_ref, y_hat));
}

struct MaeResult {
  double value = 0.0;              // percent, relative to the reference pixel
  double excluded_fraction = 0.0;  // share of pixels under the epsilon mask
};

// Relative MAE over pixels whose reference value is at least eps; the division
// is undefined near zero, so those pixels are masked out and counted.
inline MaeResult mae_percent(const Tensor<double>& y_ref, const Tensor<double>& y_hat,
                             double eps = 0.01) {
  detail::metrics_same_shape(y_ref, y_hat, "mae_percent");
  check(eps > 0.0, ErrKind::argument, "mae_percent: eps must be positive");
  double acc = 0.0;
  int64_t kept = 0;
  for (int64_t i = 0; i < y_ref.size(); ++i) {
    if (y_ref.v[i] >= eps) {
      acc += std::abs(y_ref.v[i] - y_hat.v[i]) / y_ref.v[i];
      ++kept;
    }
  }
  check(kept > 0, ErrKind::empty_support, "mae_percent: no reference pixel reaches eps");
  MaeResult r;
  r.value = 100.0 * acc / static_cast<double>(kept);
  r.excluded_fraction =
      static_cast<double>(y_ref.size() - kept) / static_cast<double>(y_ref.size());
  return r;
}

enum class SsimMode { windowed, global };

namespace detail {

constexpr int kSsimWindow = 11;

inline const double* ssim_kernel() {
  static double w[kSsimWindow * kSsimWindow];
  static bool built = false;
  if (!built) {
    const double sigma = 1.5;
    double sum = 0.0;
    for (int y = 0; y < kSsimWindow; ++y)
      for (int x = 0; x < kSsimWindow; ++x) {
        const double dy = y - (kSsimWindow - 1) / 2.0;
        const double dx = x - (kSsimWindow - 1) / 2.0;
        w[y * kSsimWindow + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        sum += w[y * kSsimWindow + x];
      }
    for (double& v : w) v /= sum;
    built = true;
  }
  return w;
}

// One structural-similarity evaluation from weighted first/second moments.
// Both inputs identical lands on exactly 1: every numerator term is then
// bitwise equal to its denominator counterpart.
inline double ssim_from_stats(double mx, double my, double vx, double vy, double cov) {
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
  const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
  return num / den;
}

}  // namespace detail

// Mean structural similarity. Windowed mode slides a normalized 11x11
// Gaussian (sigma 1.5) over the valid region of each trailing H x W plane;
// global mode uses whole-image statistics in a single evaluation.
inline double ssim(const Tensor<double>& y_ref, const Tensor<double>& y_hat,
                   SsimMode mode = SsimMode::windowed) {
  detail::metrics_same_shape(y_ref, y_hat, "ssim");
  if (mode == SsimMode::global) {
    const double n = static_cast<double>(y_ref.size());
    double mx = 0.0, my = 0.0;
    for (int64_t i = 0; i < y_ref.size(); ++i) {
      mx += y_ref.v[i];
      my += y_hat.v[i];
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (int64_t i = 0; i < y_ref.size(); ++i) {
      const double a = y_ref.v[i] - mx;
      const double b = y_hat.v[i] - my;
      vx += a * a;
      vy += b * b;
      cov += a * b;
    }
    return detail::ssim_from_stats(mx, my, vx / n, vy / n, cov / n);
  }

  check(y_ref.shape.size() >= 2, ErrKind::shape, "ssim: need at least H x W");
  const int64_t h = y_ref.shape[y_ref.shape.size() - 2];
  const int64_t w = y_ref.shape[y_ref.shape.size() - 1];
  const int64_t win = detail::kSsimWindow;
  check(h >= win && w >= win, ErrKind::argument,
        "ssim: image smaller than the 11x11 window; use global statistics mode");
  int64_t planes = 1;
  for (size_t i = 0; i + 2 < y_ref.shape.size(); ++i) planes *= y_ref.shape[i];
  const double* kern = detail::ssim_kernel();

  double total = 0.0;
  int64_t windows = 0;
  for (int64_t p = 0; p < planes; ++p) {
    const double* X = y_ref.data() + p * h * w;
    const double* Y = y_hat.data() + p * h * w;
    for (int64_t wy = 0; wy + win <= h; ++wy) {
      for (int64_t wx = 0; wx + win <= w; ++wx) {
        double mx = 0.0, my = 0.0;
        for (int64_t ky = 0; ky < win; ++ky)
          for (int64_t kx = 0; kx < win; ++kx) {
            const double g = kern[ky * win + kx];
            mx += g * X[(wy + ky) * w + wx + kx];
            my += g * Y[(wy + ky) * w + wx + kx];
          }
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (int64_t ky = 0; ky < win; ++ky)
          for (int64_t kx = 0; kx < win; ++kx) {
            const double g = kern[ky * win + kx];
            const double a = X[(wy + ky) * w + wx + kx] - mx;
            const double b = Y[(wy + ky) * w + wx + kx] - my;
            vx += g * a * a;
            vy += g * b * b;
            cov += g * a * b;
          }
        total += detail::ssim_from_stats(mx, my, vx, vy, cov);
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

// ---- standardized uptake value ----

struct VOIMask {
  Tensor<uint8_t> active;         // nonzero = inside the volume of interest
  double voxel_volume_ml = 1.0;   // per pixel-slice element

  int64_t active_count() const {
    int64_t n = 0;
    for (uint8_t v : active.v) n += (v != 0);
    return n;
  }
};

struct SUVParams {
  double injected_dose_mci = 0.0;
  double body_weight_kg = 0.0;
};

// Mean activity concentration over the mask, normalized by injected dose per
// body mass: SUV = mean_A[uCi/mL] * (W_kg * 1000 g) / (ID_mCi * 1000 uCi),
// with tissue density taken as 1 g/mL.
inline double suv_mean(const Tensor<double>& activity_img, const VOIMask& mask,
                       const SUVParams& p) {
  check(p.injected_dose_mci > 0.0, ErrKind::argument, "suv_mean: injected dose must be positive");
  check(p.body_weight_kg > 0.0, ErrKind::argument, "suv_mean: body weight must be positive");
  check(mask.active.size() == activity_img.size(), ErrKind::shape,
        "suv_mean: mask and image element counts differ");
  double acc = 0.0;
  int64_t n = 0;
  for (int64_t i = 0; i < activity_img.size(); ++i) {
    if (mask.active.v[i] != 0) {
      acc += activity_img.v[i];
      ++n;
    }
  }
  check(n > 0, ErrKind::empty_support, "suv_mean: mask has no active element");
  const double mean_activity = acc / static_cast<double>(n);
  return mean_activity * (p.body_weight_kg * 1000.0) / (p.injected_dose_mci * 1000.0);
}

// ---- batch evaluation ----

struct PairMetrics {
  int64_t pair_id = 0;
  bool ok = false;
  std::string error;  // set when !ok
  double psnr_db = 0.0;
  double ssim_v = 0.0;
  double rmse_pct = 0.0;
  double mae_pct = 0.0;
  double mae_excluded_fraction = 0.0;
  bool has_suv = false;
  double suv_ref = 0.0;
  double suv_hat = 0.0;
};

struct EvalOptions {
  SsimMode ssim_mode = SsimMode::windowed;
  double mae_eps = 0.01;
  double psnr_max_val = 1.0;
  const VOIMask* voi = nullptr;  // with suv: both must be set to fill SUV columns
  const SUVParams* suv = nullptr;
};

// Metrics for one reference/prediction pair on [0,1] data. SUV columns are
// computed on physically rescaled copies when a mask and dose parameters are
// supplied; ref_scale restores the reference units for both images.
inline PairMetrics evaluate_pair(int64_t pair_id, const Tensor<double>& ref01,
                                 const Tensor<double>& pred01, const ScaleRecord& ref_scale,
                                 const EvalOptions& opt) {
  PairMetrics m;
  m.pair_id = pair_id;
  try {
    m.psnr_db = psnr(ref01, pred01, opt.psnr_max_val);
    m.ssim_v = ssim(ref01, pred01, opt.ssim_mode);
    m.rmse_pct = rmse_percent(ref01, pred01);
    const MaeResult mae = mae_percent(ref01, pred01, opt.mae_eps);
    m.mae_pct = mae.value;
    m.mae_excluded_fraction = mae.excluded_fraction;
    if (opt.voi != nullptr && opt.suv != nullptr) {
      m.suv_ref = suv_mean(denormalize(ref01, ref_scale), *opt.voi, *opt.suv);
      m.suv_hat = suv_mean(denormalize(pred01, ref_scale), *opt.voi, *opt.suv);
      m.has_suv = true;
    }
    m.ok = true;
  } catch (const TcError& e) {
    m.ok = false;
    m.error = e.what();
  }
  return m;
}

struct MetricAggregate {
  // One slot per report column; a slot is NaN when no value contributed.
  double psnr_db = 0.0, ssim_v = 0.0, rmse_pct = 0.0, mae_pct = 0.0;
  double suv_ref = 0.0, suv_hat = 0.0;
  int64_t psnr_n = 0;         // finite PSNR values only
  int64_t n = 0;              // successful pairs
  int64_t suv_n = 0;          // pairs with SUV columns
  bool psnr_all_infinite = false;
};

struct MetricsReport {
  std::vector<PairMetrics> pairs;
  MetricAggregate mean;
  MetricAggregate stdev;  // population standard deviation
};

// Mean and population std over successful pairs, computed in manifest order.
// The infinite-PSNR sentinel never enters the sums: it is excluded, and the
// mean degrades to the sentinel only when every successful pair hit it.
inline MetricsReport aggregate_report(std::vector<PairMetrics> pairs) {
  MetricsReport rep;
  rep.pairs = std::move(pairs);
  auto& mean = rep.mean;
  for (const PairMetrics& m : rep.pairs) {
    if (!m.ok) continue;
    ++mean.n;
    if (std::isfinite(m.psnr_db)) {
      mean.psnr_db += m.psnr_db;
      ++mean.psnr_n;
    }
    mean.ssim_v += m.ssim_v;
    mean.rmse_pct += m.rmse_pct;
    mean.mae_pct += m.mae_pct;
    if (m.has_suv) {
      mean.suv_ref += m.suv_ref;
      mean.suv_hat += m.suv_hat;
      ++mean.suv_n;
    }
  }
  if (mean.n > 0) {
    const double n = static_cast<double>(mean.n);
    if (mean.psnr_n > 0)
      mean.psnr_db /= static_cast<double>(mean.psnr_n);
    else
      mean.psnr_all_infinite = true;
    mean.ssim_v /= n;
    mean.rmse_pct /= n;
    mean.mae_pct /= n;
    if (mean.suv_n > 0) {
      mean.suv_ref /= static_cast<double>(mean.suv_n);
      mean.suv_hat /= static_cast<double>(mean.suv_n);
    }
  }
  auto& sd = rep.stdev;
  sd.n = mean.n;
  sd.psnr_n = mean.psnr_n;
  sd.suv_n = mean.suv_n;
  sd.psnr_all_infinite = mean.psnr_all_infinite;
  for (const PairMetrics& m : rep.pairs) {
    if (!m.ok) continue;
    if (std::isfinite(m.psnr_db)) {
      const double d = m.psnr_db - mean.psnr_db;
      sd.psnr_db += d * d;
    }
    const double ds = m.ssim_v - mean.ssim_v;
    const double dr = m.rmse_pct - mean.rmse_pct;
    const double dm = m.mae_pct - mean.mae_pct;
    sd.ssim_v += ds * ds;
    sd.rmse_pct += dr * dr;
    sd.mae_pct += dm * dm;
    if (m.has_suv) {
      const double d0 = m.suv_ref - mean.suv_ref;
      const double d1 = m.suv_hat - mean.suv_hat;
      sd.suv_ref += d0 * d0;
      sd.suv_hat += d1 * d1;
    }
  }
  if (sd.n > 0) {
    const double n = static_cast<double>(sd.n);
    sd.psnr_db = sd.psnr_n > 0 ? std::sqrt(sd.psnr_db / static_cast<double>(sd.psnr_n)) : 0.0;
    sd.ssim_v = std::sqrt(sd.ssim_v / n);
    sd.rmse_pct = std::sqrt(sd.rmse_pct / n);
    sd.mae_pct = std::sqrt(sd.mae_pct / n);
    if (sd.suv_n > 0) {
      sd.suv_ref = std::sqrt(sd.suv_ref / static_cast<double>(sd.suv_n));
      sd.suv_hat = std::sqrt(sd.suv_hat / static_cast<double>(sd.suv_n));
    }
  }
  return rep;
}

namespace detail {

inline std::string metric_cell(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void report_row(std::ostream& os, const std::string& head, const MetricAggregate& a) {
  os << head << ",";
  if (a.n == 0) {
    os << ",,,,,\n";
    return;
  }
  os << (a.psnr_all_infinite ? std::string("inf") : metric_cell(a.psnr_db)) << ","
     << metric_cell(a.ssim_v) << "," << metric_cell(a.rmse_pct) << "," << metric_cell(a.mae_pct)
     << ",";
  if (a.suv_n > 0) os << metric_cell(a.suv_ref);
  os << ",";
  if (a.suv_n > 0) os << metric_cell(a.suv_hat);
  os << "\n";
}

}  // namespace detail

// CSV serialization: header, one row per pair in order, then mean/std summary
// rows. Failed pairs keep their row with empty metric cells.
inline void write_report_csv(const MetricsReport& rep, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), ErrKind::io, "cannot write report: " + path);
  f << "pair_id,psnr_db,ssim,rmse_pct,mae_pct,suv_ref,suv_hat\n";
  for (const PairMetrics& m : rep.pairs) {
    f << m.pair_id << ",";
    if (!m.ok) {
      f << ",,,,,\n";
      continue;
    }
    f << detail::metric_cell(m.psnr_db) << "," << detail::metric_cell(m.ssim_v) << ","
      << detail::metric_cell(m.rmse_pct) << "," << detail::metric_cell(m.mae_pct) << ",";
    if (m.has_suv) f << detail::metric_cell(m.suv_ref);
    f << ",";
    if (m.has_suv) f << detail::metric_cell(m.suv_hat);
    f << "\n";
  }
  detail::report_row(f, "mean", rep.mean);
  detail::report_row(f, "std", rep.stdev);
  f.flush();
  check(f.good(), ErrKind::io, "report write failed: " + path);
}

}  // namespace tcinn
