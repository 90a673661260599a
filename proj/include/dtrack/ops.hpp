#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtrack/tape.hpp"

// Differentiable primitives. Every op checks shapes (ShapeMismatch) and
// records a backward function that accumulates exact analytic gradients into
// its parents.
namespace dtrack::ad {

enum class Padding { Valid, Same };

// Rank-2 x rank-2, rank-2 x rank-1 (matrix-vector), rank-1 x rank-2
// (vector-matrix) and rank-1 x rank-1 (dot, result shape [1]).
Var matmul(Var a, Var b);

// Same-shape sum, or rank-2 [m,n] plus rank-1 [n] broadcast over rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise product of same-shape operands.
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

// Concatenation along an axis; all other dims must agree.
Var concat(std::span<const Var> parts, std::size_t axis = 0);
// Rank-1 vectors of equal length stacked into rank-2 rows.
Var stack_rows(std::span<const Var> rows);
Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length);
// Row i of a rank-2 tensor as a rank-1 tensor.
Var row(Var a, std::size_t i);
Var reshape(Var a, Shape shape);

// Total of all elements, shape [1].
Var sum(Var a);

Var softmax(Var a, std::size_t axis);

// Row `index` of a [V, E] table.
Var embedding_lookup(Var table, std::size_t index);

// Single-channel 1-D convolution of a tensor along `axis` with a rank-1
// kernel shared by every line. Valid: length L-k+1. Same: length L with
// (k-1)/2 zeros on the left and the rest on the right.
Var conv1d(Var signal, Var kernel, std::size_t axis, Padding padding);

// Mean squared error against a constant target.
Var mse_loss(Var prediction, const Tensor& target);
// -log softmax(logits)[target] for rank-1 logits.
Var cross_entropy_loss(Var logits, std::size_t target);
// Sum over elements of the binary cross entropy between sigmoid(logits) and
// targets in [0, 1]; computed from logits for numerical stability.
Var binary_cross_entropy_loss(Var logits, const Tensor& targets);
// Per-element BCE-with-logits, same shape as logits; sums to the loss above.
Var binary_cross_entropy_terms(Var logits, const Tensor& targets);

// LSTM recurrence pieces.
struct LstmParams {
  Var w_input, w_forget, w_cell, w_output;  // each [H, D + H]
  Var b_input, b_forget, b_cell, b_output;  // each [H]

  std::size_t hidden_size() const { return w_input.shape()[0]; }
  std::size_t input_size() const { return w_input.shape()[1] - hidden_size(); }
};

struct LstmState {
  Var h;
  Var c;
};

// i, f, o = sigmoid(W [x; h] + b), g = tanh(W [x; h] + b),
// c' = f * c + i * g, h' = o * tanh(c').
LstmState lstm_cell_step(Var x, const LstmState& state, const LstmParams& params);

// Dot-product attention: softmax over enc_outputs[t] . dec_state, then the
// weighted sum of encoder rows.
Var attention(Var dec_state, Var enc_outputs);

// W x + b with W of shape [out, in].
Var linear(Var x, Var weight, Var bias);

}  // namespace dtrack::ad
