#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace unsee {

// Named random stream. One 64-bit run seed fans out into independent streams
// ("corpus", "shuffle", "dropout-view-1", ...) keyed by the stream name, so
// adding draws to one stream never perturbs another.
//
// The engine is std::mt19937_64 (exactly specified by the standard); the
// real-valued conversions below are done by hand so streams are bitwise
// reproducible across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);
  explicit RngStream(std::uint64_t raw_seed) : engine_(raw_seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, n), n > 0, rejection sampled (no modulo bias).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  void discard(unsigned long long n) { engine_.discard(n); }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::mt19937_64 engine_;
};

std::uint64_t stream_seed(std::uint64_t seed, std::string_view name);

}  // namespace unsee
