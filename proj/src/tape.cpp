#include "dtrack/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dtrack/error.hpp"

namespace dtrack {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                              " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

namespace ad {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::NonFiniteValue, "leaf of shape " + shape_string(value.shape()));
  }
  nodes_.push_back({std::move(value), std::nullopt, nullptr, requires_grad});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::NonFiniteValue, "op output of shape " + shape_string(value.shape()));
  }
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [this](const Var& p) { return nodes_[p.id].requires_grad; });
  nodes_.push_back({std::move(value), std::nullopt, needs ? std::move(backward) : nullptr, needs});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad) n.grad.emplace(n.value.shape(), 0.0);
  return *n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  return n.grad ? *n.grad : Tensor(n.value.shape(), 0.0);
}

void Tape::backward(Var root) {
  if (backward_done_) {
    throw Error(ErrorCode::TapeState, "backward already ran on this recording");
  }
  if (nodes_[root.id].value.numel() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward root must hold a single value, got " +
                                              shape_string(nodes_[root.id].value.shape()));
  }
  backward_done_ = true;
  grad_buffer(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad) n.backward(*this, i);
  }
}

void Tape::clear() {
  nodes_.clear();
  backward_done_ = false;
}

}  // namespace ad
}  // namespace dtrack
