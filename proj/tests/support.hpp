#pragma once

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "unsee/error.hpp"
#include "unsee/log.hpp"
#include "unsee/numerics/matrix.hpp"
#include "unsee/rng.hpp"

namespace unsee::test {

// ctest sets UNSEE_LOG=error; a bare run of the binary logs at info.
inline const bool logging_ready = (init_logging(), true);

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double scale = 1.0) {
  // std::mt19937_64 + hand-rolled Box-Muller keeps the fixtures independent of
  // the library's own stream code.
  std::mt19937_64 gen(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) {
    const double u1 = (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    v = scale * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  return m;
}

inline ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an unsee::Error");
  return ErrorKind::InvalidArgument;
}

// Fresh directory under the build tree's temp area, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("unsee-test-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace unsee::test
