#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace smoa {

// Shape mismatch between tensors fed to an op.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument value (negative size, out-of-range index, empty input).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Internal invariant violated; indicates a bug, not bad input.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN or Inf surfaced where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unparseable or invalid run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed serialized file. Carries the byte offset of the problem.
struct FormatError : std::runtime_error {
  uint64_t offset;
  FormatError(const std::string& msg, uint64_t byte_offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
};

inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

// splitmix64 finalizer; used to derive independent seeds from (seed, label) pairs.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, std::string_view label) {
  return mix64(seed ^ fnv1a64(label));
}

// Plain row-major matrix with no autograd attached. Used for routing
// snapshots, analysis outputs, and test oracles.
struct Matrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int64_t r, int64_t c) : rows(r), cols(c), v(static_cast<size_t>(r * c), 0.0) {}

  double& at(int64_t r, int64_t c) { return v[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * cols + c)]; }
};

}  // namespace smoa
