#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "reference_impls.hpp"
#include "tcinn/common.hpp"
#include "tcinn/io.hpp"
#include "tcinn/phantom.hpp"
#include "tcinn/rng.hpp"
#include "tcinn/tensor.hpp"

using tcinn::ErrKind;
using tcinn::TcError;
using tcinn::Tensor;

namespace {

// Run fn and report which error kind it raised (or nullopt-ish sentinel).
template <class Fn>
bool raises_kind(Fn&& fn, ErrKind want) {
  try {
    fn();
  } catch (const TcError& e) {
    if (e.kind() == want) return true;
    MESSAGE("wrong error kind: got \"" << e.what() << "\"");
    return false;
  }
  MESSAGE("no error raised");
  return false;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("crc64 matches the published check value and a bit-level oracle") {
  const char* s = "123456789";
  CHECK(tcinn::crc64(s, 9) == 0x995DC9BBDF1939FAull);
  CHECK(oracle::crc64(s, 9) == 0x995DC9BBDF1939FAull);

  tcinn::Rng rng(1, 0);
  for (size_t len : {0, 1, 2, 7, 8, 63, 256, 1000}) {
    std::vector<uint8_t> data(len);
    for (auto& b : data) b = static_cast<uint8_t>(rng.uniform_index(256));
    CHECK(tcinn::crc64(data.data(), len) == oracle::crc64(data.data(), len));
  }
}

TEST_CASE("golden 48-byte file for a [2,3] float tensor") {
  // Header (16): magic, version 1, kind 0, dtype 0, ndim 2, dims {2,3} LE.
  // Payload (24): six floats 1..6 LE. Trailer (8): CRC-64 of the first 40.
  std::vector<uint8_t> want = {'T', 'C', 'I', 'T', 1, 0, 0, 2,
                               2, 0, 0, 0, 3, 0, 0, 0};
  for (int i = 1; i <= 6; ++i) {
    const float f = static_cast<float>(i);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) want.push_back(static_cast<uint8_t>((bits >> (8 * b)) & 0xFF));
  }
  const uint64_t crc = oracle::crc64(want.data(), want.size());
  for (int b = 0; b < 8; ++b) want.push_back(static_cast<uint8_t>((crc >> (8 * b)) & 0xFF));
  REQUIRE(want.size() == 48);

  testutil::TempDir tmp("golden");
  const std::string path = tmp.file("golden.tcit");
  tcinn::write_tensor_file(Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6}), path);
  const auto got = testutil::read_bytes(path);
  REQUIRE(got.size() == 48);
  CHECK(got == want);
}

TEST_CASE("tensor files round trip bit-exactly for both dtypes and ranks 1-4") {
  testutil::TempDir tmp("roundtrip");
  tcinn::Rng rng(3, 0);
  const std::vector<std::vector<int64_t>> shapes = {{7}, {3, 5}, {2, 3, 4}, {2, 3, 2, 2}};
  for (const auto& shape : shapes) {
    Tensor<float> tf(shape);
    testutil::rand_fill(tf, rng, -10.0, 10.0);
    const std::string pf = tmp.file("f32.tcit");
    tcinn::write_tensor_file(tf, pf);
    const auto rf = tcinn::read_tensor_file<float>(pf);
    CHECK(rf.shape == shape);
    CHECK(rf.v == tf.v);

    Tensor<double> td(shape);
    testutil::rand_fill(td, rng, -10.0, 10.0);
    const std::string pd = tmp.file("f64.tcit");
    tcinn::write_tensor_file(td, pd);
    const auto rd = tcinn::read_tensor_file<double>(pd);
    CHECK(rd.shape == shape);
    CHECK(rd.v == td.v);
  }
}

TEST_CASE("reading converts the stored precision when asked") {
  testutil::TempDir tmp("convert");
  Tensor<float> tf({3}, {1.5f, -2.25f, 100.125f});
  tcinn::write_tensor_file(tf, tmp.file("a.tcit"));
  const auto as_double = tcinn::read_tensor_file<double>(tmp.file("a.tcit"));
  for (int i = 0; i < 3; ++i)
    CHECK(as_double.v[static_cast<size_t>(i)] == static_cast<double>(tf.v[static_cast<size_t>(i)]));

  Tensor<double> td({2}, {1.0 / 3.0, 7.0});
  tcinn::write_tensor_file(td, tmp.file("b.tcit"));
  const auto as_float = tcinn::read_tensor_file<float>(tmp.file("b.tcit"));
  for (int i = 0; i < 2; ++i)
    CHECK(as_float.v[static_cast<size_t>(i)] == static_cast<float>(td.v[static_cast<size_t>(i)]));
}

TEST_CASE("decode failures carry distinct error kinds") {
  testutil::TempDir tmp("decode");
  const std::string path = tmp.file("t.tcit");
  tcinn::write_tensor_file(Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6}), path);
  const auto good = testutil::read_bytes(path);

  auto read_back = [&](const std::vector<uint8_t>& bytes) {
    testutil::write_bytes(path, bytes);
    (void)tcinn::read_tensor_file<float>(path);
  };

  // wrong magic
  auto bad = good;
  bad[0] = 'X';
  CHECK(raises_kind([&] { read_back(bad); }, ErrKind::bad_magic));

  // header cut short
  bad = good;
  bad.resize(10);
  CHECK(raises_kind([&] { read_back(bad); }, ErrKind::payload_mismatch));

  // future version wins over the (now stale) checksum
  bad = good;
  bad[4] = 2;
  CHECK(raises_kind([&] { read_back(bad); }, ErrKind::bad_version));

  // single flipped payload byte
  bad = good;
  bad[20] ^= 0x40;
  CHECK(raises_kind([&] { read_back(bad); }, ErrKind::checksum));

  // flipped checksum byte is also a checksum failure
  bad = good;
  bad.back() ^= 0x01;
  CHECK(raises_kind([&] { read_back(bad); }, ErrKind::checksum));

  // valid checksum but payload length disagrees with dims
  {
    std::vector<unsigned char> short_payload(20, 0);
    const auto enc = tcinn::encode_record(tcinn::kKindTensor, 0, {2, 3}, short_payload);
    CHECK(raises_kind([&] { read_back({enc.begin(), enc.end()}); }, ErrKind::payload_mismatch));
  }

  // valid checksum, dtype code from the future
  {
    std::vector<unsigned char> payload(4, 0);
    const auto enc = tcinn::encode_record(tcinn::kKindTensor, 7, {1}, payload);
    CHECK(raises_kind([&] { read_back({enc.begin(), enc.end()}); }, ErrKind::payload_mismatch));
  }

  // hand-built record with a zero extent and a correct checksum
  {
    std::vector<uint8_t> z = {'T', 'C', 'I', 'T', 1, 0, 0, 1, 0, 0, 0, 0};
    const uint64_t crc = oracle::crc64(z.data(), z.size());
    for (int b = 0; b < 8; ++b) z.push_back(static_cast<uint8_t>((crc >> (8 * b)) & 0xFF));
    CHECK(raises_kind([&] { read_back(z); }, ErrKind::payload_mismatch));
  }

  // checkpoint record read as a tensor
  {
    std::vector<unsigned char> payload(8, 0);
    const auto enc = tcinn::encode_record(tcinn::kKindCheckpoint, 0, {2}, payload);
    CHECK(raises_kind([&] { read_back({enc.begin(), enc.end()}); }, ErrKind::payload_mismatch));
  }

  // missing file
  CHECK(raises_kind([&] { (void)tcinn::read_tensor_file<float>(tmp.file("absent.tcit")); },
                    ErrKind::io));
}

TEST_CASE("scale sidecars: write, read, defaults, and failure modes") {
  testutil::TempDir tmp("scale");
  const std::string img = tmp.file("img.tcit");

  CHECK_FALSE(tcinn::scale_record_exists(img));
  const auto identity = tcinn::read_scale_record(img);  // missing -> identity
  CHECK(identity.min == 0.0);
  CHECK(identity.max == 1.0);

  tcinn::write_scale_record({2.5, 7.25}, img);
  CHECK(tcinn::scale_record_exists(img));
  CHECK(testutil::read_text(img + ".scale") == "2.5,7.25\n");
  const auto rec = tcinn::read_scale_record(img);
  CHECK(rec.min == 2.5);
  CHECK(rec.max == 7.25);

  // 12 significant digits survive the text round trip
  tcinn::write_scale_record({0.0, 1.0 / 3.0}, img);
  const auto third = tcinn::read_scale_record(img);
  CHECK(std::abs(third.max - 1.0 / 3.0) < 1e-12);

  CHECK(raises_kind([&] { tcinn::write_scale_record({5.0, 5.0}, img); }, ErrKind::argument));

  testutil::write_bytes(img + ".scale", {'j', 'u', 'n', 'k', '\n'});
  CHECK(raises_kind([&] { (void)tcinn::read_scale_record(img); }, ErrKind::io));

  testutil::write_bytes(img + ".scale", {'5', ',', '5', '\n'});
  CHECK(raises_kind([&] { (void)tcinn::read_scale_record(img); }, ErrKind::argument));
}

TEST_CASE("center_crop windows are centered with bottom-right bias") {
  Tensor<double> big({1, 256, 256});
  for (int64_t y = 0; y < 256; ++y)
    for (int64_t x = 0; x < 256; ++x) big.v[y * 256 + x] = static_cast<double>(y * 1000 + x);
  auto c = tcinn::center_crop(big, 200);
  REQUIRE(c.shape == std::vector<int64_t>{1, 200, 200});
  CHECK(c.v[0] == 28.0 * 1000 + 28);            // top-left lands on row/col 28
  CHECK(c.v[200 * 200 - 1] == 227.0 * 1000 + 227);  // bottom-right on 227

  Tensor<double> four({4, 4});
  for (int64_t i = 0; i < 16; ++i) four.v[i] = static_cast<double>(i);
  auto three = tcinn::center_crop(four, 3);
  REQUIRE(three.shape == std::vector<int64_t>{3, 3});
  // odd remainder drops the bottom/right line: rows and cols 0..2 survive
  CHECK(three.v == std::vector<double>{0, 1, 2, 4, 5, 6, 8, 9, 10});

  // identity when the size already matches
  auto same = tcinn::center_crop(four, 4);
  CHECK(same.v == four.v);

  // leading dims are preserved plane by plane
  Tensor<double> two({2, 1, 4, 4});
  for (int64_t i = 0; i < 32; ++i) two.v[i] = static_cast<double>(i);
  auto tc = tcinn::center_crop(two, 2);
  REQUIRE(tc.shape == std::vector<int64_t>{2, 1, 2, 2});
  CHECK(tc.v == std::vector<double>{5, 6, 9, 10, 21, 22, 25, 26});

  CHECK(raises_kind([&] { (void)tcinn::center_crop(four, 5); }, ErrKind::argument));
}

TEST_CASE("normalize_minmax maps extremes to exactly 0 and 1") {
  Tensor<double> t({3}, {0.0, 2.0, 4.0});
  auto [out, rec] = tcinn::normalize_minmax(t);
  CHECK(out.v == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(rec.min == 0.0);
  CHECK(rec.max == 4.0);

  // already-unit data is unchanged
  Tensor<double> unit({4}, {0.0, 0.25, 0.75, 1.0});
  auto [same, r2] = tcinn::normalize_minmax(unit);
  CHECK(same.v == unit.v);
  CHECK(r2.min == 0.0);
  CHECK(r2.max == 1.0);

  // round trip within 1e-6 relative
  tcinn::Rng rng(5, 0);
  Tensor<double> img({1, 8, 8});
  testutil::rand_fill(img, rng, 5.0, 9.0);
  auto [n01, r3] = tcinn::normalize_minmax(img);
  auto back = tcinn::denormalize(n01, r3);
  for (int64_t i = 0; i < img.size(); ++i)
    CHECK(std::abs(back.v[i] - img.v[i]) <= 1e-6 * std::abs(img.v[i]));
  double lo = 1e300, hi = -1e300;
  for (double v : n01.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);

  Tensor<double> flat({5}, {3.0, 3.0, 3.0, 3.0, 3.0});
  CHECK(raises_kind([&] { (void)tcinn::normalize_minmax(flat); }, ErrKind::argument));
  Tensor<double> single({1}, {3.0});
  CHECK(raises_kind([&] { (void)tcinn::normalize_minmax(single); }, ErrKind::argument));
}

TEST_CASE("denormalize applies the recorded linear map") {
  Tensor<double> t({3}, {0.0, 0.5, 1.0});
  auto out = tcinn::denormalize(t, {0.0, 4.0});
  CHECK(out.v == std::vector<double>{0.0, 2.0, 4.0});
  auto same = tcinn::denormalize(t, {0.0, 1.0});
  CHECK(same.v == t.v);
}

TEST_CASE("manifests parse comments, masks, and CRLF endings") {
  testutil::TempDir tmp("manifest");
  const std::string path = tmp.file("manifest.txt");
  testutil::write_bytes(path, []{
    const std::string text =
        "# paired dataset\n"
        "a_src.tcit,a_tgt.tcit\n"
        "\n"
        "b_src.tcit,b_tgt.tcit,b_mask.tcit\r\n"
        "/abs/c_src.tcit,/abs/c_tgt.tcit\n";
    return std::vector<uint8_t>(text.begin(), text.end());
  }());

  const auto m = tcinn::read_manifest(path);
  REQUIRE(m.pairs.size() == 3);
  CHECK(m.pairs[0].source == tmp.file("a_src.tcit"));
  CHECK(m.pairs[0].target == tmp.file("a_tgt.tcit"));
  CHECK(m.pairs[0].mask.empty());
  CHECK(m.pairs[1].mask == tmp.file("b_mask.tcit"));
  CHECK(m.pairs[2].source == "/abs/c_src.tcit");  // absolute paths pass through

  testutil::write_bytes(path, {'n', 'o', 'c', 'o', 'm', 'm', 'a', '\n'});
  CHECK(raises_kind([&] { (void)tcinn::read_manifest(path); }, ErrKind::io));
  CHECK(raises_kind([&] { (void)tcinn::read_manifest(tmp.file("missing.txt")); }, ErrKind::io));
}

TEST_CASE("write_manifest emits one source,target line per pair") {
  testutil::TempDir tmp("wmanifest");
  const std::string path = tmp.file("m.txt");
  tcinn::write_manifest({{"s0.tcit", "t0.tcit"}, {"s1.tcit", "t1.tcit"}}, path);
  CHECK(testutil::read_text(path) == "s0.tcit,t0.tcit\ns1.tcit,t1.tcit\n");
}

TEST_CASE("phantom pairs are deterministic functions of seed and index") {
  tcinn::PhantomConfig cfg;
  cfg.seed = 9;
  cfg.size = 32;
  cfg.pairs = 4;
  const auto a = tcinn::make_phantom_pair(cfg, 2);
  const auto b = tcinn::make_phantom_pair(cfg, 2);
  CHECK(a.source.v == b.source.v);
  CHECK(a.target.v == b.target.v);
  REQUIRE(a.source.shape == std::vector<int64_t>{1, 32, 32});

  const auto c = tcinn::make_phantom_pair(cfg, 3);
  CHECK(c.source.v != a.source.v);

  tcinn::PhantomConfig other = cfg;
  other.seed = 10;
  CHECK(tcinn::make_phantom_pair(other, 2).source.v != a.source.v);

  CHECK(raises_kind([&] { (void)tcinn::make_phantom_pair(cfg, 4); }, ErrKind::argument));
  tcinn::PhantomConfig tiny = cfg;
  tiny.size = 8;
  CHECK(raises_kind([&] { (void)tcinn::make_phantom_pair(tiny, 0); }, ErrKind::argument));
}

TEST_CASE("phantom target is the analytic remap of its source") {
  tcinn::PhantomConfig cfg;
  cfg.seed = 4;
  cfg.size = 64;
  cfg.pairs = 2;
  const auto p = tcinn::make_phantom_pair(cfg, 1);
  const int64_t hw = 64;
  const double cc = (hw - 1.0) / 2.0;
  const double sig_m = hw / 6.0;
  double worst = 0.0;
  for (int64_t y = 0; y < hw; ++y)
    for (int64_t x = 0; x < hw; ++x) {
      const double v = p.source.v[y * hw + x];
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      const double m =
          std::exp(-((x - cc) * (x - cc) + (y - cc) * (y - cc)) / (2.0 * sig_m * sig_m));
      const double want = m * std::sqrt(v) + (1.0 - m) * 0.8 * v;
      worst = std::max(worst, std::abs(p.target.v[y * hw + x] - want));
    }
  CHECK(worst <= 1e-7);

  // near the center the sqrt branch dominates; far away the 0.8x branch does
  const int64_t mid = 32;
  const double vc = p.source.v[mid * hw + mid];
  CHECK(std::abs(p.target.v[mid * hw + mid] - std::sqrt(vc)) < 2e-3);
  const double v0 = p.source.v[0];
  CHECK(std::abs(p.target.v[0] - 0.8 * v0) < 1e-3);
}

TEST_CASE("phantom datasets regenerate byte-identically") {
  tcinn::PhantomConfig cfg;
  cfg.seed = 21;
  cfg.size = 16;
  cfg.pairs = 3;
  testutil::TempDir tmp1("phantom1"), tmp2("phantom2");
  const std::string m1 = tcinn::generate_phantom_dataset(cfg, tmp1.str());
  const std::string m2 = tcinn::generate_phantom_dataset(cfg, tmp2.str());

  CHECK(testutil::read_text(m1) == testutil::read_text(m2));
  const auto manifest = tcinn::read_manifest(m1);
  REQUIRE(manifest.pairs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    char src[32], tgt[32];
    std::snprintf(src, sizeof(src), "pair_%04d_src.tcit", i);
    std::snprintf(tgt, sizeof(tgt), "pair_%04d_tgt.tcit", i);
    CHECK(testutil::read_bytes(tmp1.file(src)) == testutil::read_bytes(tmp2.file(src)));
    CHECK(testutil::read_bytes(tmp1.file(tgt)) == testutil::read_bytes(tmp2.file(tgt)));

    const auto img = tcinn::read_tensor_file<double>(manifest.pairs[static_cast<size_t>(i)].source);
    REQUIRE(img.shape == std::vector<int64_t>{1, 16, 16});
    const auto direct = tcinn::make_phantom_pair(cfg, i);
    CHECK(img.v == direct.source.v);
  }
}

}  // TEST_SUITE
