#pragma once

// Shared utilities for the test suites: scratch directories, subprocess
// invocation of the CLI binary, file slurping, and random tensor fills.

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tcinn/rng.hpp"
#include "tcinn/tensor.hpp"

namespace testutil {

// Scratch directory that cleans up after itself. Unique per instance so
// test cases cannot trample each other's artifacts.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tcinn_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

// Run a shell command, capturing combined output and the exit code.
inline CmdResult run_cmd(const std::string& cmd) {
  CmdResult r;
  std::string full = cmd + " 2>&1";
  FILE* p = ::popen(full.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), p)) > 0) r.output.append(buf, n);
  int status = ::pclose(p);
  if (status >= 0 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  return r;
}

inline std::string tcinn_bin() { return std::string(TCINN_BIN); }

inline std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

inline void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

template <class T>
void rand_fill(tcinn::Tensor<T>& t, tcinn::Rng& rng, double lo = 0.0, double hi = 1.0) {
  for (auto& v : t.v) v = static_cast<T>(rng.uniform(lo, hi));
}

template <class T>
double max_abs_diff(const tcinn::Tensor<T>& a, const tcinn::Tensor<T>& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]));
    if (d > m) m = d;
  }
  return m;
}

template <class T>
double max_abs(const tcinn::Tensor<T>& a) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a.v[i])));
  return m;
}

// Split a CSV line on commas; no quoting rules needed for our files.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(line);
  return lines;
}

}  // namespace testutil
