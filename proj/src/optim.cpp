#include "dtrack/optim.hpp"

#include <cmath>

#include "dtrack/error.hpp"

namespace dtrack {

namespace {

void check_shapes(const ParameterSet& params, const Gradients& grads) {
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient count " + std::to_string(grads.size()) +
                                              " != parameter count " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params.value(i).shape()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient for " + params.name(i) + " has shape " +
                                                shape_string(grads[i].shape()));
    }
  }
}

}  // namespace

AdamState::AdamState(const ParameterSet& params) {
  m = zero_gradients(params);
  v = zero_gradients(params);
}

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state,
               const AdamOptions& options) {
  check_shapes(params, grads);
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params.value(i).data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = options.beta1 * m[k] + (1.0 - options.beta1) * g[k];
      v[k] = options.beta2 * v[k] + (1.0 - options.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

void sgd_step(ParameterSet& params, const Gradients& grads, double lr) {
  check_shapes(params, grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params.value(i).data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) sq += v * v;
  return std::sqrt(sq);
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.data()) v *= factor;
  }
  return norm;
}

}  // namespace dtrack
