#include "dtrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dtrack/ops.hpp"
#include "dtrack/rng.hpp"

namespace dtrack {

namespace {

struct Evaluation {
  long double value = 0.0L;
  std::vector<Tensor> grads;
};

Evaluation evaluate(const GraphFn& fn, const std::vector<Tensor>& inputs, bool want_grads,
                    std::uint64_t projection_seed, Reduction reduction) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  ad::Var out = fn(tape, leaves);
  Evaluation e;
  if (out.value().numel() != 1 && reduction == Reduction::Sum) {
    for (double v : out.value().data()) e.value += v;
    out = ad::sum(out);
  } else if (out.value().numel() != 1) {
    Rng rng(projection_seed);
    Tensor weights(out.value().shape());
    for (double& w : weights.data()) w = rng.uniform(-1.0, 1.0);
    out = ad::sum(ad::mul(out, tape.constant(std::move(weights))));
    e.value = out.value()[0];
  } else {
    e.value = out.value()[0];
  }
  if (want_grads) {
    tape.backward(out);
    for (const ad::Var& v : leaves) e.grads.push_back(tape.grad(v));
  }
  return e;
}

}  // namespace

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

GradCheckResult grad_check(const GraphFn& fn, const std::vector<Tensor>& inputs, double eps,
                           std::uint64_t projection_seed, Reduction reduction) {
  const Evaluation base = evaluate(fn, inputs, true, projection_seed, reduction);
  GradCheckResult result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (std::size_t k = 0; k < probe[i].numel(); ++k) {
      const double saved = probe[i][k];
      probe[i][k] = saved + eps;
      const long double plus = evaluate(fn, probe, false, projection_seed, reduction).value;
      probe[i][k] = saved - eps;
      const long double minus = evaluate(fn, probe, false, projection_seed, reduction).value;
      probe[i][k] = saved;
      const auto numeric = static_cast<double>((plus - minus) / (2.0L * eps));
      const double analytic = base.grads[i][k];
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic, numeric));
      result.max_abs_error = std::max(result.max_abs_error, std::abs(analytic - numeric));
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace dtrack
