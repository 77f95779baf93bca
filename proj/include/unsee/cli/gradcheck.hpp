#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace unsee {

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 21;  // per target, cycling through the (B, d) grid
  std::vector<std::size_t> batch_sizes = {3, 4, 8};
  std::vector<std::size_t> dims = {2, 3, 8};
  // Test hook: adds this to every analytic gradient entry before comparing.
  double perturb = 0.0;
};

struct GradcheckCase {
  std::string target;  // barlow_twins, vicreg, corinfomax, byol, encoder, projector, model
  std::string tensor;
  std::size_t batch = 0;
  std::size_t dim = 0;
  std::uint64_t instance = 0;
  double rel_error = 0.0;
  bool passed() const { return rel_error < kGradcheckTolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  bool passed() const;
  // Worst case per target, in first-seen order.
  std::vector<GradcheckCase> worst_per_target() const;
};

GradcheckReport run_gradcheck(const GradcheckOptions& opts);

}  // namespace unsee
