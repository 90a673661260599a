#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dtrack {

struct SuiteCase {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

inline constexpr double kPrimitiveTolerance = 1e-4;
inline constexpr double kModelTolerance = 1e-3;

// Every primitive over `trials` random shapes and values. One entry per
// primitive holding the worst trial.
std::vector<SuiteCase> primitive_suite(std::uint64_t seed, int trials = 10);

// Total loss of every architecture at hidden size 4 and windows of 6 steps.
std::vector<SuiteCase> model_suite(std::uint64_t seed);

}  // namespace dtrack
