#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/io.hpp"
#include "tcinn/model.hpp"
#include "tcinn/train.hpp"

namespace tcinn {

// Checkpoint = container record of kind "checkpoint bundle". The payload is a
// little-endian byte stream: bundle version, model config, epoch counter,
// optimizer step, RNG state, then named parameter records each carrying the
// parameter values and both Adam moments. Round trips are bit-exact.

constexpr uint32_t kCheckpointBundleVersion = 1;

template <class T>
struct CheckpointData {
  ModelConfig cfg;
  int64_t epoch = 0;  // completed epochs
  std::array<uint64_t, 4> rng_state{};
  uint64_t adam_t = 0;
  std::vector<std::string> names;
  std::vector<std::vector<T>> values;
  std::vector<std::vector<T>> adam_m, adam_v;
};

struct CheckpointInfo {
  ModelConfig cfg;
  uint8_t dtype = 0;  // 0 f32, 1 f64
  int64_t epoch = 0;
};

namespace detail {

template <class T>
constexpr uint8_t dtype_code() {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  return sizeof(T) == 4 ? 0 : 1;
}

struct ByteCursor {
  const unsigned char* p;
  size_t len, off = 0;
  std::string ctx;

  void need(size_t n) const {
    check(off + n <= len, ErrKind::payload_mismatch, ctx + ": checkpoint bundle truncated");
  }
  uint8_t u8() {
    need(1);
    return p[off++];
  }
  uint32_t u32() {
    need(4);
    const uint32_t v = get_u32(p + off);
    off += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    const uint64_t v = get_u64(p + off);
    off += 8;
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const size_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p + off), n);
    off += n;
    return s;
  }
  template <class T>
  std::vector<T> values(size_t n) {
    need(n * sizeof(T));
    std::vector<T> out(n);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), p + off, n * sizeof(T));
      off += n * sizeof(T);
    } else {
      for (size_t i = 0; i < n; ++i) {
        uint64_t bits = 0;
        for (size_t b = 0; b < sizeof(T); ++b)
          bits |= static_cast<uint64_t>(p[off + b]) << (8 * b);
        std::memcpy(&out[i], &bits, sizeof(T));
        off += sizeof(T);
      }
    }
    return out;
  }
};

inline void put_f64(std::vector<unsigned char>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline void put_str(std::vector<unsigned char>& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

inline void put_config(std::vector<unsigned char>& out, const ModelConfig& cfg) {
  put_u32(out, static_cast<uint32_t>(cfg.channels));
  put_u32(out, static_cast<uint32_t>(cfg.split));
  put_u32(out, static_cast<uint32_t>(cfg.blocks));
  put_u32(out, static_cast<uint32_t>(cfg.layers));
  put_u32(out, static_cast<uint32_t>(cfg.growth));
  put_f64(out, cfg.alpha);
  out.push_back(cfg.actnorm ? 1 : 0);
}

inline ModelConfig get_config(ByteCursor& c) {
  ModelConfig cfg;
  cfg.channels = c.u32();
  cfg.split = c.u32();
  cfg.blocks = c.u32();
  cfg.layers = c.u32();
  cfg.growth = c.u32();
  cfg.alpha = c.f64();
  cfg.actnorm = c.u8() != 0;
  return cfg;
}

}  // namespace detail

template <class T>
void save_checkpoint(const Model<T>& model, const AdamState<T>& adam, int64_t epoch,
                     const std::array<uint64_t, 4>& rng_state, const std::string& path) {
  std::vector<unsigned char> b;
  detail::put_u32(b, kCheckpointBundleVersion);
  detail::put_config(b, model.cfg);
  b.push_back(detail::dtype_code<T>());
  detail::put_u64(b, static_cast<uint64_t>(epoch));
  detail::put_u64(b, adam.t);
  for (uint64_t s : rng_state) detail::put_u64(b, s);

  std::vector<std::pair<std::string, const std::vector<T>*>> params;
  const_cast<Model<T>&>(model).for_each_param(
      [&](const std::string& name, Tensor<T>& p) { params.emplace_back(name, &p.v); });
  check(adam.m.size() == params.size() && adam.v.size() == params.size(), ErrKind::argument,
        "save_checkpoint: optimizer state does not match parameter count");
  detail::put_u32(b, static_cast<uint32_t>(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    detail::put_str(b, params[i].first);
    detail::put_u64(b, params[i].second->size());
    check(adam.m[i].size() == params[i].second->size() &&
              adam.v[i].size() == params[i].second->size(),
          ErrKind::argument, "save_checkpoint: moment size mismatch for " + params[i].first);
    detail::put_values_le(b, params[i].second->data(), params[i].second->size());
    detail::put_values_le(b, adam.m[i].data(), adam.m[i].size());
    detail::put_values_le(b, adam.v[i].data(), adam.v[i].size());
  }

  // The container payload is addressed in 4-byte elements; pad deterministically.
  while (b.size() % 4 != 0) b.push_back(0);
  detail::write_all_bytes(
      path, encode_record(kKindCheckpoint, 0, {static_cast<int64_t>(b.size() / 4)}, b));
}

namespace detail {

inline RecordView read_checkpoint_record(const std::string& path) {
  RecordView r = decode_record(read_all_bytes(path), path);
  check(r.kind == kKindCheckpoint, ErrKind::payload_mismatch, path + ": record is not a checkpoint");
  return r;
}

inline ByteCursor bundle_cursor(const RecordView& r, const std::string& path) {
  ByteCursor c{r.payload.data(), r.payload.size(), 0, path};
  const uint32_t ver = c.u32();
  check(ver == kCheckpointBundleVersion, ErrKind::bad_version,
        path + ": unsupported checkpoint bundle version " + std::to_string(ver));
  return c;
}

}  // namespace detail

// Header-only read: enough to pick the right precision before a full load.
inline CheckpointInfo read_checkpoint_info(const std::string& path) {
  const RecordView r = detail::read_checkpoint_record(path);
  detail::ByteCursor c = detail::bundle_cursor(r, path);
  CheckpointInfo info;
  info.cfg = detail::get_config(c);
  info.dtype = c.u8();
  info.epoch = static_cast<int64_t>(c.u64());
  return info;
}

template <class T>
CheckpointData<T> load_checkpoint(const std::string& path) {
  const RecordView r = detail::read_checkpoint_record(path);
  detail::ByteCursor c = detail::bundle_cursor(r, path);
  CheckpointData<T> ck;
  ck.cfg = detail::get_config(c);
  ck.cfg.validate();
  const uint8_t dtype = c.u8();
  check(dtype == detail::dtype_code<T>(), ErrKind::config_mismatch,
        path + ": checkpoint precision does not match the requested engine precision");
  ck.epoch = static_cast<int64_t>(c.u64());
  ck.adam_t = c.u64();
  for (uint64_t& s : ck.rng_state) s = c.u64();
  const uint32_t nparams = c.u32();
  for (uint32_t i = 0; i < nparams; ++i) {
    ck.names.push_back(c.str());
    const size_t n = c.u64();
    ck.values.push_back(c.template values<T>(n));
    ck.adam_m.push_back(c.template values<T>(n));
    ck.adam_v.push_back(c.template values<T>(n));
  }
  return ck;
}

// Copies checkpoint parameters into a model of the same configuration, then
// recomputes the cached mixing inverses (they are derived, not serialized).
template <class T>
void apply_checkpoint(const CheckpointData<T>& ck, Model<T>& model) {
  check(model.cfg == ck.cfg, ErrKind::config_mismatch,
        "checkpoint configuration does not match the model (channels/split/blocks/layers/"
        "growth/alpha/actnorm must all agree)");
  size_t i = 0;
  model.for_each_param([&](const std::string& name, Tensor<T>& p) {
    check(i < ck.names.size(), ErrKind::payload_mismatch,
          "checkpoint has too few parameter records");
    check(ck.names[i] == name, ErrKind::payload_mismatch,
          "checkpoint parameter order mismatch: expected " + name + ", found " + ck.names[i]);
    check(ck.values[i].size() == p.v.size(), ErrKind::payload_mismatch,
          "checkpoint parameter size mismatch for " + name);
    p.v = ck.values[i];
    ++i;
  });
  check(i == ck.names.size(), ErrKind::payload_mismatch,
        "checkpoint has extra parameter records");
  for (auto& blk : model.blocks) blk.mix.refresh();
}

template <class T>
Model<T> model_from_checkpoint(const CheckpointData<T>& ck) {
  Model<T> m = init_model<T>(0, ck.cfg);
  apply_checkpoint(ck, m);
  return m;
}

template <class T>
AdamState<T> adam_from_checkpoint(const CheckpointData<T>& ck) {
  AdamState<T> st;
  st.t = ck.adam_t;
  st.m = ck.adam_m;
  st.v = ck.adam_v;
  return st;
}

}  // namespace tcinn
