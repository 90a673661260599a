#pragma once

#include <cstdint>
#include <vector>

#include "dtrack/layers.hpp"

namespace dtrack {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  explicit AdamState(const ParameterSet& params);
};

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state,
               const AdamOptions& options);

// p <- p - lr * g
void sgd_step(ParameterSet& params, const Gradients& grads, double lr);

double global_norm(const Gradients& grads);

// Rescales grads so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(Gradients& grads, double max_norm);

}  // namespace dtrack
