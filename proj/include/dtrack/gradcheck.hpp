#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dtrack/tape.hpp"

namespace dtrack {

// Builds a graph from gradient-requiring leaves (one per input tensor).
using GraphFn = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
};

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// How a non-scalar graph output becomes the checked scalar.
enum class Reduction {
  Projection,  // dot product with fixed pseudo-random weights in (-1, 1)
  Sum,         // plain sum, accumulated in extended precision
};

// Compares tape gradients with central differences (f(x+eps) - f(x-eps)) / 2eps
// for every coordinate of every input.
GradCheckResult grad_check(const GraphFn& fn, const std::vector<Tensor>& inputs, double eps = 1e-5,
                           std::uint64_t projection_seed = 0x9E3779B97F4A7C15ULL,
                           Reduction reduction = Reduction::Projection);

}  // namespace dtrack
