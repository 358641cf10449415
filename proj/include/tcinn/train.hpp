#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/io.hpp"
#include "tcinn/model.hpp"
#include "tcinn/ops.hpp"
#include "tcinn/rng.hpp"
#include "tcinn/tape.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

struct TrainConfig {
  int64_t epochs = 300;
  double initial_lr = 1e-4;
  int64_t halving_period = 50;  // epochs per halving of the learning rate
  double lambda = 1.0;          // forward-term weight in the bidirectional loss
  int64_t batch_size = 4;
  uint64_t seed = 1;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  ModelConfig model;

  void validate() const {
    model.validate();
    // epochs == 0 is a validation dry run: initial checkpoint, empty curve.
    check(epochs >= 0, ErrKind::argument, "train: epochs must be >= 0");
    check(initial_lr > 0.0, ErrKind::argument, "train: initial_lr must be positive");
    check(halving_period >= 1, ErrKind::argument, "train: halving_period must be >= 1");
    check(lambda >= 0.0, ErrKind::argument, "train: lambda must be >= 0");
    check(batch_size >= 1, ErrKind::argument, "train: batch_size must be >= 1");
    check(grad_clip >= 0.0, ErrKind::argument, "train: grad_clip must be >= 0");
  }
};

// Stepwise-halved schedule: initial_lr * 0.5^floor(e / halving_period).
// Halving a binary float is exact, so the values at 0/50/120 epochs are the
// literal 1e-4 / 5e-5 / 2.5e-5 doubles.
inline double lr_at_epoch(int64_t e, const TrainConfig& cfg) {
  check(e >= 0 && (cfg.epochs == 0 || e < cfg.epochs), ErrKind::argument,
        "lr_at_epoch: epoch index out of range");
  return cfg.initial_lr * std::pow(0.5, static_cast<double>(e / cfg.halving_period));
}

struct LossParts {
  double total = 0.0;
  double forward = 0.0;  // MSE(model_forward(x), y)
  double inverse = 0.0;  // MSE(model_inverse(y), x)
};

// Bidirectional objective lambda*MSE(f(x),y) + MSE(f_inv(y),x), evaluated
// without gradients. x and y carry C channels already.
template <class T>
LossParts loss_hold_eval(const Model<T>& m, const Tensor<T>& x, const Tensor<T>& y,
                         double lambda) {
  check_same_shape(x, y, "loss_hold");
  LossParts parts;
  parts.forward = reduce_mse(model_forward(x, m), y);
  parts.inverse = reduce_mse(model_inverse(y, m), x);
  parts.total = lambda * parts.forward + parts.inverse;
  return parts;
}

// Same objective on a tape: builds both directions against one set of bound
// parameters so a single backward pass accumulates the full gradient.
template <class T>
typename Tape<T>::Id loss_hold_taped(Tape<T>& tape, const BoundModel<T>& bm,
                                     typename Tape<T>::Id x, typename Tape<T>::Id y,
                                     double lambda, LossParts* parts = nullptr) {
  const auto yhat = taped_model_forward(tape, x, bm);
  const auto l_fwd = tape.mse_op(yhat, y);
  const auto xhat = taped_model_inverse(tape, y, bm);
  const auto l_inv = tape.mse_op(xhat, x);
  const auto total = tape.axpy_op(lambda, l_fwd, l_inv);
  if (parts != nullptr) {
    parts->forward = static_cast<double>(tape.val(l_fwd).v[0]);
    parts->inverse = static_cast<double>(tape.val(l_inv).v[0]);
    parts->total = static_cast<double>(tape.val(total).v[0]);
  }
  return total;
}

template <class T>
struct AdamState {
  std::vector<std::vector<T>> m, v;  // one entry per parameter, flat
  uint64_t t = 0;

  void init_like(Model<T>& model) {
    m.clear();
    v.clear();
    model.for_each_param([&](const std::string&, Tensor<T>& p) {
      m.emplace_back(p.v.size(), T(0));
      v.emplace_back(p.v.size(), T(0));
    });
    t = 0;
  }
};

// Bias-corrected Adam update over every model parameter. `grads` is aligned
// with the model's parameter enumeration order; null entries mean zero
// gradient (parameter untouched by the loss) and are skipped.
template <class T>
void adam_step(Model<T>& model, const std::vector<const Tensor<T>*>& grads, AdamState<T>& st,
               double lr, double beta1, double beta2, double eps) {
  check(lr > 0.0, ErrKind::argument, "adam_step: lr must be positive");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  size_t i = 0;
  model.for_each_param([&](const std::string& name, Tensor<T>& param) {
    std::vector<T>& p = param.v;
    check(i < grads.size() && i < st.m.size(), ErrKind::argument,
          "adam_step: gradient list does not match parameter count");
    const Tensor<T>* g = grads[i];
    if (g != nullptr) {
      check(static_cast<size_t>(g->size()) == p.size(), ErrKind::shape,
            "adam_step: gradient shape mismatch for " + name);
      std::vector<T>& m = st.m[i];
      std::vector<T>& v = st.v[i];
      for (size_t j = 0; j < p.size(); ++j) {
        const double gj = static_cast<double>(g->v[static_cast<int64_t>(j)]);
        check(std::isfinite(gj), ErrKind::numeric, "adam_step: non-finite gradient in " + name);
        const double mj = beta1 * static_cast<double>(m[j]) + (1.0 - beta1) * gj;
        const double vj = beta2 * static_cast<double>(v[j]) + (1.0 - beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps);
        p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
      }
    }
    ++i;
  });
  check(i == grads.size(), ErrKind::argument, "adam_step: gradient list longer than parameters");
  // Mixing weights moved: their cached inverses must be recomputed, and the
  // conditioning guards re-applied, before the next use.
  for (auto& blk : model.blocks) blk.mix.refresh();
}

struct LossRow {
  int64_t epoch = 0;  // 1-based in reports
  double total = 0.0, forward = 0.0, inverse = 0.0, lr = 0.0;
};

inline void write_loss_csv(const std::vector<LossRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), ErrKind::io, "cannot write loss curve: " + path);
  f << "epoch,loss_total,loss_forward,loss_inverse,lr\n";
  char buf[200];
  for (const LossRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.12g,%.12g,%.12g,%.12g\n",
                  static_cast<long long>(r.epoch), r.total, r.forward, r.inverse, r.lr);
    f << buf;
  }
  f.flush();
  check(f.good(), ErrKind::io, "loss curve write failed: " + path);
}

template <class T>
struct TrainResult {
  Model<T> model;
  AdamState<T> adam;
  std::vector<LossRow> curve;
  std::array<uint64_t, 4> rng_state{};  // shuffle stream at completion
};

namespace detail {

// Stacks per-pair single-channel images into an [N, C, H, W] batch with the
// channel-replication augmentation applied.
template <class T>
Tensor<T> assemble_batch(const std::vector<Tensor<T>>& images, const std::vector<int64_t>& order,
                         size_t first, size_t count, int64_t channels) {
  const int64_t h = images[static_cast<size_t>(order[first])].shape[1];
  const int64_t w = images[static_cast<size_t>(order[first])].shape[2];
  Tensor<T> out({static_cast<int64_t>(count), channels, h, w});
  for (size_t b = 0; b < count; ++b) {
    const Tensor<T>& img = images[static_cast<size_t>(order[first + b])];
    for (int64_t c = 0; c < channels; ++c)
      std::memcpy(out.data() + (static_cast<int64_t>(b) * channels + c) * h * w, img.data(),
                  sizeof(T) * static_cast<size_t>(h * w));
  }
  return out;
}

template <class T>
void roundtrip_spot_check(const Model<T>& m, const Tensor<T>& x, int64_t epoch) {
  const Tensor<T> back = model_inverse(model_forward(x, m), m);
  double worst = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(static_cast<double>(back.v[i]) - static_cast<double>(x.v[i]));
    if (d > worst) worst = d;
  }
  const double bound = sizeof(T) == 4 ? 1e-4 : 1e-10;
  check(worst <= bound, ErrKind::numeric,
        "invertibility degraded after epoch " + std::to_string(epoch) + ": round-trip error " +
            std::to_string(worst));
}

}  // namespace detail

// Full training loop over pre-loaded single-channel image pairs. Deterministic
// for a fixed config: shuffling uses its own seeded stream, and batch order is
// consumed sequentially. The per-epoch callback (optional) sees each completed
// LossRow, e.g. to stream the loss curve to disk.
template <class T>
TrainResult<T> train(const std::vector<Tensor<T>>& sources, const std::vector<Tensor<T>>& targets,
                     const TrainConfig& cfg,
                     const std::function<void(const LossRow&)>& on_epoch = nullptr) {
  cfg.validate();
  check(!sources.empty() && sources.size() == targets.size(), ErrKind::argument,
        "train: need a non-empty, aligned pair list");
  for (size_t i = 0; i < sources.size(); ++i) {
    check(sources[i].shape.size() == 3 && sources[i].shape[0] == 1, ErrKind::shape,
          "train: images must be [1, H, W]");
    check_same_shape(sources[i], sources[0], "train images");
    check_same_shape(targets[i], sources[0], "train images");
  }

  TrainResult<T> res;
  res.model = init_model<T>(cfg.seed, cfg.model);
  res.adam.init_like(res.model);
  Rng shuffle_rng(cfg.seed, stream::shuffle);

  const int64_t npairs = static_cast<int64_t>(sources.size());
  std::vector<int64_t> order(static_cast<size_t>(npairs));
  for (int64_t i = 0; i < npairs; ++i) order[static_cast<size_t>(i)] = i;

  if (cfg.model.actnorm && cfg.epochs > 0) {
    // Data-dependent normalizer init from the first (unshuffled) batch.
    const size_t n0 = static_cast<size_t>(std::min<int64_t>(cfg.batch_size, npairs));
    actnorm_data_init(res.model,
                      detail::assemble_batch(sources, order, 0, n0, cfg.model.channels));
  }

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, cfg);
    shuffle_rng.shuffle(order);
    double sum_total = 0.0, sum_fwd = 0.0, sum_inv = 0.0;
    int64_t batches = 0;
    Tensor<T> first_batch_x;  // kept for the post-epoch invertibility check

    for (int64_t start = 0; start < npairs; start += cfg.batch_size) {
      const size_t count =
          static_cast<size_t>(std::min<int64_t>(cfg.batch_size, npairs - start));
      Tensor<T> xb = detail::assemble_batch(sources, order, static_cast<size_t>(start), count,
                                            cfg.model.channels);
      Tensor<T> yb = detail::assemble_batch(targets, order, static_cast<size_t>(start), count,
                                            cfg.model.channels);
      if (batches == 0) first_batch_x = xb;

      Tape<T> tape;
      BoundModel<T> bm = BoundModel<T>::bind(tape, res.model);
      const auto x = tape.leaf(std::move(xb), false);
      const auto y = tape.leaf(std::move(yb), false);
      LossParts parts;
      const auto loss = loss_hold_taped(tape, bm, x, y, cfg.lambda, &parts);
      if (!std::isfinite(parts.total))
        fail(ErrKind::numeric, "train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   ", batch " + std::to_string(batches + 1));
      tape.backward(loss);

      std::vector<const Tensor<T>*> grads;
      grads.reserve(bm.ids.size());
      for (const auto id : bm.ids) grads.push_back(&tape.grad(id));

      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (const Tensor<T>* g : grads)
          for (const T& gv : g->v) sq += static_cast<double>(gv) * static_cast<double>(gv);
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          const T scale = static_cast<T>(cfg.grad_clip / norm);
          for (const Tensor<T>* g : grads)
            for (T& gv : const_cast<Tensor<T>*>(g)->v) gv *= scale;
        }
      }

      adam_step(res.model, grads, res.adam, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      sum_total += parts.total;
      sum_fwd += parts.forward;
      sum_inv += parts.inverse;
      ++batches;
    }

    detail::roundtrip_spot_check(res.model, first_batch_x, epoch + 1);

    LossRow row;
    row.epoch = epoch + 1;
    row.total = sum_total / static_cast<double>(batches);
    row.forward = sum_fwd / static_cast<double>(batches);
    row.inverse = sum_inv / static_cast<double>(batches);
    row.lr = lr;
    res.curve.push_back(row);
    if (on_epoch) on_epoch(row);
  }

  res.rng_state = shuffle_rng.state();
  return res;
}

}  // namespace tcinn
