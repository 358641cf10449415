#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tcinn/common.hpp"
#include "tcinn/tensor.hpp"

namespace tcinn {

// ---- CRC-64/XZ ----
// Polynomial 0x42F0E1EBA9EA3693, bit-reflected, initial value and final xor
// all ones. Table-driven over the reflected polynomial.

namespace detail {
inline const uint64_t* crc64_table() {
  static uint64_t table[256];
  static bool built = false;
  if (!built) {
    const uint64_t poly = 0xC96C5795D7870F42ULL;  // 0x42F0E1EBA9EA3693 reflected
    for (uint64_t i = 0; i < 256; ++i) {
      uint64_t crc = i;
      for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ ((crc & 1) ? poly : 0);
      table[i] = crc;
    }
    built = true;
  }
  return table;
}
}  // namespace detail

inline uint64_t crc64_update(uint64_t crc, const void* data, size_t len) {
  const uint64_t* table = detail::crc64_table();
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) crc = (crc >> 8) ^ table[(crc ^ p[i]) & 0xFF];
  return crc;
}

inline uint64_t crc64(const void* data, size_t len) {
  return crc64_update(0xFFFFFFFFFFFFFFFFULL, data, len) ^ 0xFFFFFFFFFFFFFFFFULL;
}

// ---- TensorFile container ----
// magic "TCIT" | version u8 | kind u8 (0 tensor, 1 checkpoint bundle) |
// dtype u8 (0 f32, 1 f64) | ndim u8 | ndim x u32 dims LE | payload LE |
// CRC-64 over all preceding bytes, LE.

constexpr uint8_t kTensorFileVersion = 1;
constexpr uint8_t kKindTensor = 0;
constexpr uint8_t kKindCheckpoint = 1;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

inline void put_u64(std::vector<unsigned char>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

inline uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

// Payload values are little-endian on disk; on a little-endian host that is a
// straight copy.
template <class T>
inline void put_values_le(std::vector<unsigned char>& out, const T* v, size_t n) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  const size_t start = out.size();
  out.resize(start + n * sizeof(T));
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + start, v, n * sizeof(T));
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint64_t bits = 0;
      std::memcpy(&bits, v + i, sizeof(T));
      for (size_t b = 0; b < sizeof(T); ++b)
        out[start + i * sizeof(T) + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
    }
  }
}

inline std::vector<unsigned char> read_all_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), ErrKind::io, "cannot open for read: " + path);
  f.seekg(0, std::ios::end);
  const auto len = f.tellg();
  f.seekg(0);
  std::vector<unsigned char> bytes(static_cast<size_t>(len));
  if (len > 0) f.read(reinterpret_cast<char*>(bytes.data()), len);
  check(f.good(), ErrKind::io, "read failed: " + path);
  return bytes;
}

inline void write_all_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(f.good(), ErrKind::io, "cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  f.flush();
  check(f.good(), ErrKind::io, "write failed: " + path);
}

}  // namespace detail

// Serialize a container record (header + payload + checksum) to bytes.
inline std::vector<unsigned char> encode_record(uint8_t kind, uint8_t dtype,
                                                const std::vector<int64_t>& dims,
                                                const std::vector<unsigned char>& payload) {
  std::vector<unsigned char> out;
  out.reserve(16 + dims.size() * 4 + payload.size() + 8);
  out.insert(out.end(), {'T', 'C', 'I', 'T'});
  out.push_back(kTensorFileVersion);
  out.push_back(kind);
  out.push_back(dtype);
  check(dims.size() <= 255, ErrKind::argument, "tensor file: too many dims");
  out.push_back(static_cast<uint8_t>(dims.size()));
  for (int64_t d : dims) {
    check(d > 0 && d <= 0xFFFFFFFFLL, ErrKind::argument, "tensor file: dim out of u32 range");
    detail::put_u32(out, static_cast<uint32_t>(d));
  }
  out.insert(out.end(), payload.begin(), payload.end());
  detail::put_u64(out, crc64(out.data(), out.size()));
  return out;
}

struct RecordView {
  uint8_t kind = 0;
  uint8_t dtype = 0;
  std::vector<int64_t> dims;
  std::vector<unsigned char> payload;
};

// Parse and fully validate a container record. Error kinds are distinct per
// failure mode so tests and callers can tell corruption from misuse.
inline RecordView decode_record(const std::vector<unsigned char>& bytes, const std::string& ctx) {
  check(bytes.size() >= 4 && std::memcmp(bytes.data(), "TCIT", 4) == 0, ErrKind::bad_magic,
        ctx + ": not a TCIT container");
  check(bytes.size() >= 8 + 8, ErrKind::payload_mismatch, ctx + ": truncated header");
  const uint8_t version = bytes[4];
  check(version == kTensorFileVersion, ErrKind::bad_version,
        ctx + ": unsupported container version " + std::to_string(version));
  // checksum covers everything before the trailing 8 bytes
  const size_t body = bytes.size() - 8;
  const uint64_t want = detail::get_u64(bytes.data() + body);
  const uint64_t got = crc64(bytes.data(), body);
  check(got == want, ErrKind::checksum, ctx + ": checksum mismatch (corrupt file)");
  RecordView r;
  r.kind = bytes[5];
  r.dtype = bytes[6];
  const uint8_t ndim = bytes[7];
  check(bytes.size() >= 8 + static_cast<size_t>(ndim) * 4 + 8, ErrKind::payload_mismatch,
        ctx + ": truncated dims");
  int64_t count = 1;
  for (uint8_t i = 0; i < ndim; ++i) {
    const uint32_t d = detail::get_u32(bytes.data() + 8 + i * 4);
    check(d > 0, ErrKind::payload_mismatch, ctx + ": zero extent");
    r.dims.push_back(static_cast<int64_t>(d));
    count *= d;
  }
  const size_t payload_off = 8 + static_cast<size_t>(ndim) * 4;
  const size_t payload_len = body - payload_off;
  check(r.dtype == 0 || r.dtype == 1, ErrKind::payload_mismatch,
        ctx + ": unknown dtype code " + std::to_string(r.dtype));
  const size_t elem = r.dtype == 0 ? 4 : 8;
  check(payload_len == static_cast<size_t>(count) * elem, ErrKind::payload_mismatch,
        ctx + ": payload length disagrees with dims");
  r.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(payload_off),
                   bytes.begin() + static_cast<std::ptrdiff_t>(body));
  return r;
}

template <class T>
void write_tensor_file(const Tensor<T>& t, const std::string& path) {
  std::vector<unsigned char> payload;
  detail::put_values_le(payload, t.data(), static_cast<size_t>(t.size()));
  const uint8_t dtype = sizeof(T) == 4 ? 0 : 1;
  detail::write_all_bytes(path, encode_record(kKindTensor, dtype, t.shape, payload));
}

namespace detail {
template <class Dst, class Src>
inline void convert_payload(const std::vector<unsigned char>& payload, std::vector<Dst>& out) {
  const size_t n = payload.size() / sizeof(Src);
  out.resize(n);
  for (size_t i = 0; i < n; ++i) {
    Src v;
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(&v, payload.data() + i * sizeof(Src), sizeof(Src));
    } else {
      uint64_t bits = 0;
      for (size_t b = 0; b < sizeof(Src); ++b)
        bits |= static_cast<uint64_t>(payload[i * sizeof(Src) + b]) << (8 * b);
      std::memcpy(&v, &bits, sizeof(Src));
    }
    out[i] = static_cast<Dst>(v);
  }
}
}  // namespace detail

// Reads a tensor record, converting the stored precision to T if they differ.
template <class T>
Tensor<T> read_tensor_file(const std::string& path) {
  const RecordView r = decode_record(detail::read_all_bytes(path), path);
  check(r.kind == kKindTensor, ErrKind::payload_mismatch, path + ": record is not a tensor");
  Tensor<T> t;
  t.shape = r.dims;
  if (r.dtype == 0)
    detail::convert_payload<T, float>(r.payload, t.v);
  else
    detail::convert_payload<T, double>(r.payload, t.v);
  return t;
}

// ---- ScaleRecord sidecar ----
// Original physical min/max of an image, stored beside it as "<path>.scale"
// holding a single "min,max" line, so [0,1] data can be restored to units.

struct ScaleRecord {
  double min = 0.0;
  double max = 1.0;
};

inline std::string scale_sidecar_path(const std::string& tensor_path) {
  return tensor_path + ".scale";
}

inline void write_scale_record(const ScaleRecord& rec, const std::string& tensor_path) {
  check(rec.max > rec.min, ErrKind::argument, "scale record: max must exceed min");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", rec.min, rec.max);
  std::ofstream f(scale_sidecar_path(tensor_path), std::ios::trunc);
  check(f.good(), ErrKind::io, "cannot write scale record for " + tensor_path);
  f << buf;
}

inline bool scale_record_exists(const std::string& tensor_path) {
  return std::filesystem::exists(scale_sidecar_path(tensor_path));
}

// Missing sidecar means the image is already in physical units: identity scale.
inline ScaleRecord read_scale_record(const std::string& tensor_path) {
  const std::string p = scale_sidecar_path(tensor_path);
  if (!std::filesystem::exists(p)) return ScaleRecord{0.0, 1.0};
  std::ifstream f(p);
  check(f.good(), ErrKind::io, "cannot read scale record " + p);
  std::string line;
  std::getline(f, line);
  ScaleRecord rec;
  if (std::sscanf(line.c_str(), "%lf,%lf", &rec.min, &rec.max) != 2)
    fail(ErrKind::io, "malformed scale record " + p);
  check(rec.max > rec.min, ErrKind::argument, "scale record " + p + ": max must exceed min");
  return rec;
}

// ---- preprocessing ----

// Centered square crop of the trailing H x W dims; odd remainders drop the
// extra row/column from the bottom/right.
template <class T>
Tensor<T> center_crop(const Tensor<T>& img, int64_t size) {
  check(img.shape.size() >= 2, ErrKind::shape, "center_crop: need at least H x W");
  const int64_t h = img.shape[img.shape.size() - 2];
  const int64_t w = img.shape[img.shape.size() - 1];
  check(size >= 1 && size <= h && size <= w, ErrKind::argument,
        "center_crop: size " + std::to_string(size) + " does not fit " + std::to_string(h) + "x" +
            std::to_string(w));
  const int64_t top = (h - size) / 2;
  const int64_t left = (w - size) / 2;
  int64_t lead = 1;
  std::vector<int64_t> out_shape(img.shape);
  for (size_t i = 0; i + 2 < img.shape.size(); ++i) lead *= img.shape[i];
  out_shape[img.shape.size() - 2] = size;
  out_shape[img.shape.size() - 1] = size;
  Tensor<T> out(out_shape);
  for (int64_t n = 0; n < lead; ++n)
    for (int64_t y = 0; y < size; ++y)
      std::memcpy(out.data() + (n * size + y) * size,
                  img.data() + (n * h + top + y) * w + left,
                  sizeof(T) * static_cast<size_t>(size));
  return out;
}

template <class T>
std::pair<Tensor<T>, ScaleRecord> normalize_minmax(const Tensor<T>& img) {
  check(img.size() >= 2, ErrKind::argument, "normalize: need at least two values");
  T lo = img.v[0], hi = img.v[0];
  for (const T& v : img.v) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  check(hi > lo, ErrKind::argument, "normalize: constant image has no valid scale");
  Tensor<T> out(img.shape);
  const T range = hi - lo;
  // Dividing (rather than multiplying by a reciprocal) makes the extremes land
  // on exactly 0 and 1.
  for (int64_t i = 0; i < img.size(); ++i) out.v[i] = (img.v[i] - lo) / range;
  return {std::move(out), ScaleRecord{static_cast<double>(lo), static_cast<double>(hi)}};
}

template <class T>
Tensor<T> denormalize(const Tensor<T>& img01, const ScaleRecord& rec) {
  Tensor<T> out(img01.shape);
  const T lo = static_cast<T>(rec.min);
  const T range = static_cast<T>(rec.max - rec.min);
  for (int64_t i = 0; i < img01.size(); ++i) out.v[i] = img01.v[i] * range + lo;
  return out;
}

// ---- dataset manifest ----
// One pair per line: source,target[,mask]; paths relative to the manifest's
// directory; lines starting with '#' are comments.

struct PairEntry {
  std::string source, target, mask;  // resolved paths; mask may be empty
};

struct DatasetManifest {
  std::string dir;  // directory the manifest lives in
  std::vector<PairEntry> pairs;
};

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), ErrKind::io, "cannot open manifest: " + path);
  DatasetManifest m;
  m.dir = std::filesystem::path(path).parent_path().string();
  auto resolve = [&](const std::string& rel) {
    if (rel.empty() || rel.front() == '/') return rel;
    return m.dir.empty() ? rel : m.dir + "/" + rel;
  };
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    PairEntry e;
    const size_t c1 = line.find(',');
    check(c1 != std::string::npos, ErrKind::io,
          path + ":" + std::to_string(lineno) + ": expected source,target");
    const size_t c2 = line.find(',', c1 + 1);
    e.source = resolve(line.substr(0, c1));
    if (c2 == std::string::npos) {
      e.target = resolve(line.substr(c1 + 1));
    } else {
      e.target = resolve(line.substr(c1 + 1, c2 - c1 - 1));
      e.mask = resolve(line.substr(c2 + 1));
    }
    check(!e.source.empty() && !e.target.empty(), ErrKind::io,
          path + ":" + std::to_string(lineno) + ": empty path");
    m.pairs.push_back(std::move(e));
  }
  return m;
}

inline void write_manifest(const std::vector<std::array<std::string, 2>>& rel_pairs,
                           const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), ErrKind::io, "cannot write manifest: " + path);
  for (const auto& p : rel_pairs) f << p[0] << "," << p[1] << "\n";
  f.flush();
  check(f.good(), ErrKind::io, "manifest write failed: " + path);
}

}  // namespace tcinn
