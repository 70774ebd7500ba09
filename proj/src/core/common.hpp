#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace s3 {

// Error hierarchy. Every failure surfaced across the C API maps to one of
// these; the code() values are stable and mirrored in include/s3nas/s3nas.h.
class Error : public std::runtime_error {
 public:
  Error(int code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(2, "config: " + m) {}
};
struct ParseError : Error {
  ParseError(std::size_t pos, const std::string& m)
      : Error(4, "parse error at " + std::to_string(pos) + ": " + m), position(pos) {}
  std::size_t position;
};
struct SamplingExhausted : Error {
  explicit SamplingExhausted(const std::string& m) : Error(5, "sampling exhausted: " + m) {}
};
struct ConstraintInfeasible : Error {
  explicit ConstraintInfeasible(const std::string& m) : Error(3, "constraint infeasible: " + m) {}
};
struct InvalidArchitecture : Error {
  explicit InvalidArchitecture(const std::string& m) : Error(6, "invalid architecture: " + m) {}
};
struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& m) : Error(7, "shape mismatch: " + m) {}
};
struct GraphConsumed : Error {
  explicit GraphConsumed(const std::string& m) : Error(8, "graph consumed: " + m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& field) : Error(9, "format error: " + field) {}
};
struct OutOfBounds : Error {
  explicit OutOfBounds(const std::string& m) : Error(10, "out of bounds: " + m) {}
};
struct WindowMismatch : Error {
  explicit WindowMismatch(const std::string& m) : Error(11, "window mismatch: " + m) {}
};
struct EmptySample : Error {
  explicit EmptySample(const std::string& m) : Error(12, "empty sample: " + m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(13, "io: " + m) {}
};

// splitmix64, used for deriving labeled substreams from the master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Labeled substream derivation: every consumer of randomness gets its own
// stream from (master seed, label) so adding a consumer never perturbs others.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return splitmix64(master ^ fnv1a64(label));
}

}  // namespace s3
