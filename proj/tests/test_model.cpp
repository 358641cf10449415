#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "helpers.hpp"
#include "tcinn/common.hpp"
#include "tcinn/model.hpp"
#include "tcinn/rng.hpp"
#include "tcinn/tape.hpp"
#include "tcinn/tensor.hpp"

using tcinn::ModelConfig;
using tcinn::Tensor;

namespace {

template <class T>
Tensor<T> rand_img(std::vector<int64_t> shape, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  tcinn::Rng rng(seed, 0);
  Tensor<T> t(std::move(shape));
  testutil::rand_fill(t, rng, lo, hi);
  return t;
}

ModelConfig small_cfg(int64_t channels, int64_t blocks) {
  ModelConfig cfg;
  cfg.channels = channels;
  cfg.blocks = blocks;
  cfg.layers = 3;
  cfg.growth = 6;
  cfg.normalize();
  return cfg;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("coupling with identity nets and zero scale: hand-evaluated case") {
  // One block, single-layer nets, C=2. The r and t nets get a centered unit
  // tap (per-pixel identity), s stays zero. With m=(2,3):
  //   n1 = 2 + 3 = 5, n2 = 3 * exp(0) + 5 = 8, and back again.
  ModelConfig cfg;
  cfg.channels = 2;
  cfg.split = 1;
  cfg.blocks = 1;
  cfg.layers = 1;
  cfg.growth = 1;
  auto m = tcinn::init_model<double>(0, cfg);
  m.blocks[0].coup.r.w[0].at4(0, 0, 1, 1) = 1.0;
  m.blocks[0].coup.t.w[0].at4(0, 0, 1, 1) = 1.0;

  Tensor<double> x({1, 2, 1, 1}, {2.0, 3.0});
  auto n = tcinn::coupling_forward(x, m.blocks[0].coup, 1, cfg.alpha);
  CHECK(n.v == std::vector<double>{5.0, 8.0});

  auto back = tcinn::coupling_inverse(n, m.blocks[0].coup, 1, cfg.alpha);
  CHECK(back.v == std::vector<double>{2.0, 3.0});

  // Same wiring on full planes: the centered tap acts per pixel.
  Tensor<double> planes({1, 2, 3, 3});
  for (int i = 0; i < 9; ++i) {
    planes.v[static_cast<size_t>(i)] = 2.0;
    planes.v[static_cast<size_t>(9 + i)] = 3.0;
  }
  auto np = tcinn::coupling_forward(planes, m.blocks[0].coup, 1, cfg.alpha);
  for (int i = 0; i < 9; ++i) {
    CHECK(np.v[static_cast<size_t>(i)] == 5.0);
    CHECK(np.v[static_cast<size_t>(9 + i)] == 8.0);
  }
  auto bp = tcinn::coupling_inverse(np, m.blocks[0].coup, 1, cfg.alpha);
  CHECK(bp.v == planes.v);
}

TEST_CASE_TEMPLATE("coupling round trip on random nets", T, float, double) {
  const double tol = sizeof(T) == 4 ? 1e-5 : 1e-10;
  auto model = tcinn::random_model<T>(3, small_cfg(3, 1));
  auto x = rand_img<T>({2, 3, 8, 8}, 4);
  auto n = tcinn::coupling_forward(x, model.blocks[0].coup, 1, 2.0);
  auto back = tcinn::coupling_inverse(n, model.blocks[0].coup, 1, 2.0);
  CHECK(testutil::max_abs_diff(back, x) < tol);
}

TEST_CASE("identity-initialized model is the identity map") {
  ModelConfig cfg;  // defaults: C=3, k=4, L=8, g=16
  cfg.normalize();
  auto m = tcinn::init_model<float>(7, cfg);
  auto x = rand_img<float>({2, 3, 8, 8}, 5);
  auto y = tcinn::model_forward(x, m);
  CHECK(testutil::max_abs_diff(y, x) <= 1e-6);
  auto xb = tcinn::model_inverse(x, m);
  CHECK(testutil::max_abs_diff(xb, x) <= 1e-6);
}

TEST_CASE("same seed builds bit-identical models") {
  auto cfg = small_cfg(3, 2);
  auto a = tcinn::init_model<double>(11, cfg);
  auto b = tcinn::init_model<double>(11, cfg);
  auto ra = tcinn::random_model<float>(12, cfg);
  auto rb = tcinn::random_model<float>(12, cfg);
  bool same_init = true, same_rand = true;
  std::vector<Tensor<double>*> pa;
  a.for_each_param([&](const std::string&, Tensor<double>& p) { pa.push_back(&p); });
  size_t i = 0;
  b.for_each_param([&](const std::string&, Tensor<double>& p) {
    same_init = same_init && (p.v == pa[i++]->v);
  });
  std::vector<Tensor<float>*> pra;
  ra.for_each_param([&](const std::string&, Tensor<float>& p) { pra.push_back(&p); });
  i = 0;
  rb.for_each_param([&](const std::string&, Tensor<float>& p) {
    same_rand = same_rand && (p.v == pra[i++]->v);
  });
  CHECK(same_init);
  CHECK(same_rand);

  // and a different seed actually changes the random model
  auto rc = tcinn::random_model<float>(13, cfg);
  CHECK(testutil::max_abs_diff(rc.blocks[0].coup.s.w[0], ra.blocks[0].coup.s.w[0]) > 0.0);
}

TEST_CASE("random orthogonal matrices satisfy W^T W = I") {
  tcinn::Rng rng(21, 0);
  for (int64_t c : {2, 3, 6, 9}) {
    auto w = tcinn::random_orthogonal<double>(c, rng);
    for (int64_t i = 0; i < c; ++i)
      for (int64_t j = 0; j < c; ++j) {
        double acc = 0.0;
        for (int64_t k = 0; k < c; ++k)
          acc += w.v[static_cast<size_t>(k * c + i)] * w.v[static_cast<size_t>(k * c + j)];
        CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
      }
  }
  // through the model path in 32-bit
  auto m = tcinn::random_model<float>(22, small_cfg(6, 1));
  const auto& w = m.blocks[0].mix.w;
  for (int64_t i = 0; i < 6; ++i)
    for (int64_t j = 0; j < 6; ++j) {
      double acc = 0.0;
      for (int64_t k = 0; k < 6; ++k)
        acc += static_cast<double>(w.v[static_cast<size_t>(k * 6 + i)]) *
               static_cast<double>(w.v[static_cast<size_t>(k * 6 + j)]);
      CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-6);
    }
}

TEST_CASE("1x1 mixing: channel swap and single-channel scaling") {
  tcinn::Inv1x1Params<double> swap;
  swap.w = Tensor<double>({2, 2}, {0, 1, 1, 0});
  swap.refresh();
  CHECK(swap.det == doctest::Approx(-1.0));
  Tensor<double> x({1, 2, 1, 2}, {1, 2, 10, 20});
  auto y = tcinn::inv1x1_forward(x, swap);
  CHECK(y.v == std::vector<double>{10, 20, 1, 2});
  CHECK(tcinn::inv1x1_inverse(y, swap).v == x.v);

  tcinn::Inv1x1Params<double> scale2;
  scale2.w = Tensor<double>({1, 1}, {2.0});
  scale2.refresh();
  Tensor<double> s({1, 1, 1, 2}, {3.0, 4.5});
  auto sy = tcinn::inv1x1_forward(s, scale2);
  CHECK(sy.v == std::vector<double>{6.0, 9.0});
  CHECK(tcinn::inv1x1_inverse(sy, scale2).v == s.v);
}

TEST_CASE("singular or ill-conditioned mixing matrices are rejected") {
  tcinn::Inv1x1Params<double> p;
  p.w = Tensor<double>({2, 2}, {1, 2, 2, 4});
  CHECK_THROWS_AS(p.refresh(), tcinn::TcError);
  try {
    p.refresh();
  } catch (const tcinn::TcError& e) {
    CHECK(e.kind() == tcinn::ErrKind::numeric);
  }
  // near-singular but not exactly: determinant floor
  p.w = Tensor<double>({2, 2}, {1.0, 1.0, 1.0, 1.0 + 1e-12});
  CHECK_THROWS_AS(p.refresh(), tcinn::TcError);

  // comfortably nonzero determinant but terrible conditioning
  p.w = Tensor<double>({2, 2}, {1e5, 0.0, 0.0, 1e-4});
  CHECK_THROWS_AS(p.refresh(), tcinn::TcError);
}

TEST_CASE_TEMPLATE("full model round trip across sizes", T, float, double) {
  const double tol = sizeof(T) == 4 ? 1e-4 : 1e-10;
  for (int64_t c : {3, 6}) {
    for (int64_t k : {1, 2}) {
      auto m = tcinn::random_model<T>(31 + static_cast<uint64_t>(c * 10 + k), small_cfg(c, k));
      auto x = rand_img<T>({2, c, 16, 16}, 32 + static_cast<uint64_t>(k));
      auto y = tcinn::model_forward(x, m);
      auto back = tcinn::model_inverse(y, m);
      CHECK_MESSAGE(testutil::max_abs_diff(back, x) < tol, "C=" << c << " k=" << k);
      CHECK(y.all_finite());
    }
  }
}

TEST_CASE("clamped scale keeps the multiplier inside (e^-a, e^a)") {
  // Crank the s-net weights, zero the t-net, feed ones through the active
  // half: the coupling multiplier exp(soft_clamp(s)) must stay inside the
  // clamp bounds no matter how large s gets.
  auto cfg = small_cfg(3, 1);
  auto m = tcinn::random_model<double>(41, cfg, 3.0);
  auto& t_net = m.blocks[0].coup.t;
  for (auto& v : t_net.w.back().v) v = 0.0;
  for (auto& v : t_net.b.back().v) v = 0.0;

  Tensor<double> x({1, 3, 6, 6});
  tcinn::Rng rng(42, 0);
  for (int64_t i = 0; i < x.size(); ++i)
    x.v[i] = (i < 12 * 3) ? rng.uniform(-2.0, 2.0) : 1.0;  // m2 planes = 1

  auto n = tcinn::coupling_forward(x, m.blocks[0].coup, 1, cfg.alpha);
  const double lo = std::exp(-cfg.alpha), hi = std::exp(cfg.alpha);
  for (int64_t i = 1 * 36; i < 3 * 36; ++i) {  // n2 = 1 * exp(clamped s)
    CHECK(n.v[i] > lo);
    CHECK(n.v[i] < hi);
  }
}

TEST_CASE("actnorm applies scale and shift invertibly") {
  tcinn::ActnormParams<double> p;
  p.scale = Tensor<double>({1}, {2.0});
  p.shift = Tensor<double>({1}, {1.0});
  Tensor<double> x({1, 1, 1, 1}, {3.0});
  auto y = tcinn::actnorm_forward(x, p);
  CHECK(y.v[0] == 7.0);
  CHECK(tcinn::actnorm_inverse(y, p).v[0] == 3.0);

  p.scale.v[0] = 0.0;
  CHECK_THROWS_AS((void)tcinn::actnorm_forward(x, p), tcinn::TcError);
}

TEST_CASE("actnorm data initialization normalizes its block input") {
  auto cfg = small_cfg(3, 2);
  cfg.actnorm = true;
  auto m = tcinn::init_model<double>(51, cfg);
  tcinn::Rng rng(52, 0);
  Tensor<double> batch({4, 3, 6, 6});
  for (auto& v : batch.v) v = 3.0 + 2.0 * rng.normal();

  tcinn::actnorm_data_init(m, batch);
  for (const auto& blk : m.blocks) CHECK(blk.norm.initialized);

  auto out0 = tcinn::actnorm_forward(batch, m.blocks[0].norm);
  const int64_t hw = 36, per_ch = 4 * hw;
  for (int64_t ch = 0; ch < 3; ++ch) {
    double sum = 0, sum2 = 0;
    for (int64_t n = 0; n < 4; ++n)
      for (int64_t i = 0; i < hw; ++i) {
        const double v = out0.at4(n, ch, i / 6, i % 6);
        sum += v;
        sum2 += v * v;
      }
    const double mean = sum / per_ch;
    const double var = sum2 / per_ch - mean * mean;
    CHECK(std::abs(mean) < 1e-4);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }

  // the full model still round-trips with actnorm in the stack
  auto y = tcinn::model_forward(batch, m);
  auto back = tcinn::model_inverse(y, m);
  CHECK(testutil::max_abs_diff(back, batch) < 1e-10);
}

TEST_CASE("taped evaluation matches plain evaluation") {
  auto m = tcinn::random_model<double>(61, small_cfg(3, 2));
  auto x = rand_img<double>({2, 3, 6, 6}, 62);

  tcinn::Tape<double> tape;
  auto bm = tcinn::BoundModel<double>::bind(tape, m);
  auto xi = tape.leaf(x, false);
  auto fwd = tcinn::taped_model_forward(tape, xi, bm);
  auto plain = tcinn::model_forward(x, m);
  CHECK(testutil::max_abs_diff(tape.val(fwd), plain) == 0.0);

  auto inv = tcinn::taped_model_inverse(tape, xi, bm);
  auto plain_inv = tcinn::model_inverse(x, m);
  CHECK(testutil::max_abs_diff(tape.val(inv), plain_inv) == 0.0);
}

TEST_CASE("finite differences validate gradients through the whole model") {
  ModelConfig cfg;
  cfg.channels = 3;
  cfg.blocks = 1;
  cfg.layers = 2;
  cfg.growth = 3;
  cfg.normalize();
  auto m = tcinn::random_model<double>(71, cfg, 0.2);
  auto x = rand_img<double>({1, 3, 6, 6}, 72);
  auto y = rand_img<double>({1, 3, 6, 6}, 73);

  auto eval = [&]() {
    tcinn::Tape<double> tape;
    auto bm = tcinn::BoundModel<double>::bind(tape, m);
    auto xi = tape.leaf(x, false);
    auto yi = tape.leaf(y, false);
    auto loss = tape.mse_op(tcinn::taped_model_forward(tape, xi, bm), yi);
    return static_cast<double>(tape.val(loss).v[0]);
  };

  // analytic gradients, one backward pass
  std::vector<Tensor<double>> analytic;
  {
    tcinn::Tape<double> tape;
    auto bm = tcinn::BoundModel<double>::bind(tape, m);
    auto xi = tape.leaf(x, false);
    auto yi = tape.leaf(y, false);
    auto loss = tape.mse_op(tcinn::taped_model_forward(tape, xi, bm), yi);
    tape.backward(loss);
    for (auto id : bm.ids) analytic.push_back(tape.grad(id));
  }

  std::vector<Tensor<double>*> params;
  std::vector<std::string> names;
  m.for_each_param([&](const std::string& n, Tensor<double>& p) {
    params.push_back(&p);
    names.push_back(n);
  });
  REQUIRE(params.size() == analytic.size());

  for (size_t pi = 0; pi < params.size(); ++pi) {
    double worst = 0.0;
    int64_t at = -1;
    for (int64_t j = 0; j < params[pi]->size(); ++j) {
      const double fd = fdcheck::central_diff_at(params[pi]->v[j], eval, 1e-5);
      const double e = fdcheck::scaled_err(analytic[pi].v[j], fd);
      if (e > worst) {
        worst = e;
        at = j;
      }
    }
    CHECK_MESSAGE(worst <= 1e-6, names[pi] << " element " << at << " scaled error " << worst);
  }
}

TEST_CASE("configuration validation rejects bad setups") {
  ModelConfig cfg;
  cfg.channels = 1;
  CHECK_THROWS_AS((void)tcinn::init_model<double>(0, cfg), tcinn::TcError);
  cfg = ModelConfig{};
  cfg.split = 3;  // == channels
  CHECK_THROWS_AS((void)tcinn::init_model<double>(0, cfg), tcinn::TcError);
  cfg = ModelConfig{};
  cfg.alpha = 0.0;
  CHECK_THROWS_AS((void)tcinn::init_model<double>(0, cfg), tcinn::TcError);

  auto m = tcinn::init_model<double>(0, ModelConfig{});
  Tensor<double> wrong({1, 4, 4, 4});
  CHECK_THROWS_AS((void)tcinn::model_forward(wrong, m), tcinn::TcError);
}

TEST_CASE("parameter walk order is stable and fully named") {
  ModelConfig cfg;
  cfg.channels = 3;
  cfg.blocks = 2;
  cfg.layers = 2;
  cfg.growth = 4;
  cfg.actnorm = true;
  cfg.normalize();
  auto m = tcinn::init_model<double>(0, cfg);
  std::vector<std::string> names;
  m.for_each_param([&](const std::string& n, Tensor<double>&) { names.push_back(n); });
  // per block: scale, shift, mix, then (w,b) x layers for s, t, r
  REQUIRE(names.size() == 2 * (2 + 1 + 3 * 2 * 2));
  CHECK(names[0] == "block0.norm.scale");
  CHECK(names[1] == "block0.norm.shift");
  CHECK(names[2] == "block0.mix.w");
  CHECK(names[3] == "block0.s.w0");
  CHECK(names[4] == "block0.s.b0");
  CHECK(names[5] == "block0.s.w1");
  CHECK(names[6] == "block0.s.b1");
  CHECK(names[7] == "block0.t.w0");
  CHECK(names[11] == "block0.r.w0");
  CHECK(names[15] == "block1.norm.scale");
}

}  // TEST_SUITE
