#pragma once

#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace embedlab {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Carries the 1-based line number of the offending line.
struct ParseError : Error {
  ParseError(const std::string& file, std::size_t line_no, const std::string& msg)
      : Error(file + ":" + std::to_string(line_no) + ": " + msg),
        file(file),
        line(line_no) {}
  std::string file;
  std::size_t line;
};

struct OovError : Error {
  explicit OovError(const std::string& w)
      : Error("word not in vocabulary: '" + w + "'"), word(w) {}
  std::string word;
};

struct DegenerateVectorError : Error {
  explicit DegenerateVectorError(const std::string& w)
      : Error("vector for '" + w + "' is all-zero"), word(w) {}
  std::string word;
};

struct TrainError : Error {
  explicit TrainError(const std::string& msg) : Error(msg) {}
};

// splitmix64. Bounded draws use the multiply-shift reduction, so the
// stream depends only on the seed, not on the platform's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // uniform in [0, n)
  std::uint32_t below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<std::uint64_t>(next_u32()) * n) >> 32);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  float next_float() { return static_cast<float>(next_double()); }

  // stream-splitting helper for (seed, worker, epoch) style derivation
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Dense row-major matrix; rows are contiguous.
template <class Real>
struct Mat {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<Real> data;

  Mat() = default;
  Mat(std::uint32_t r, std::uint32_t c) : rows(r), cols(c), data(std::size_t(r) * c, Real(0)) {}

  Real* row(std::uint32_t r) { return data.data() + std::size_t(r) * cols; }
  const Real* row(std::uint32_t r) const { return data.data() + std::size_t(r) * cols; }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

inline std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

}  // namespace embedlab
