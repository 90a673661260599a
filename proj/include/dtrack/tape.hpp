#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dtrack/tensor.hpp"

namespace dtrack::ad {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Append-only record of a forward computation. Backward walks the nodes in
// exact reverse order of recording. A tape is single-threaded; use one tape
// per thread.
class Tape {
 public:
  // Called during backward with the node's own gradient already complete.
  using BackwardFn = std::function<void(Tape& tape, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Records an op result. The backward function is dropped when no parent
  // requires a gradient. Throws NonFiniteValue if value has NaN/Inf.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Gradient buffer of a node, zero-allocated on first access.
  Tensor& grad_buffer(std::size_t id);
  // Gradient after backward; zeros if nothing flowed into the node.
  Tensor grad(Var v) const;

  // Seeds d(root)/d(root) = 1 for a single-element root and propagates.
  // Throws TapeState if called twice on the same recording.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace dtrack::ad
