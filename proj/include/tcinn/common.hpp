#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tcinn {

// Error taxonomy. Every failure the engine can signal carries one of these
// kinds so callers (and the CLI exit-code mapping) can tell I/O trouble from
// shape bugs from numerical blowups without parsing message strings.
enum class ErrKind {
  shape,            // tensor/parameter shape disagreement
  argument,         // invalid configuration or argument value
  io,               // file system failure (open/read/write)
  bad_magic,        // container file does not start with the expected magic
  bad_version,      // container version not supported
  checksum,         // container checksum mismatch (corruption)
  payload_mismatch, // container dims/payload length disagree
  config_mismatch,  // checkpoint config incompatible with requested model
  numeric,          // non-finite value, singular matrix, divergence
  empty_support,    // a masked reduction has nothing to reduce over
};

inline const char* err_kind_name(ErrKind k) {
  switch (k) {
    case ErrKind::shape: return "shape";
    case ErrKind::argument: return "argument";
    case ErrKind::io: return "io";
    case ErrKind::bad_magic: return "bad_magic";
    case ErrKind::bad_version: return "bad_version";
    case ErrKind::checksum: return "checksum";
    case ErrKind::payload_mismatch: return "payload_mismatch";
    case ErrKind::config_mismatch: return "config_mismatch";
    case ErrKind::numeric: return "numeric";
    case ErrKind::empty_support: return "empty_support";
  }
  return "unknown";
}

class TcError : public std::runtime_error {
public:
  TcError(ErrKind kind, const std::string& msg)
      : std::runtime_error(std::string(err_kind_name(kind)) + ": " + msg), kind_(kind) {}
  ErrKind kind() const { return kind_; }

private:
  ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& msg) { throw TcError(kind, msg); }

inline void check(bool cond, ErrKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

template <class T>
inline bool is_finite(T v) {
  return std::isfinite(static_cast<double>(v));
}

}  // namespace tcinn
