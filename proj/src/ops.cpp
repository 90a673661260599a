#include "dtrack/ops.hpp"

#include <algorithm>
#include <cmath>

#include "dtrack/error.hpp"
#include "dtrack/kernels.hpp"

namespace dtrack::ad {

namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw Error(ErrorCode::ShapeMismatch, op + ": " + detail);
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) shape_error(op, "operands live on different tapes");
  return *a.tape;
}

// Splits a shape at `axis` into (outer, mid, inner) extents.
struct AxisView {
  std::size_t outer = 1, mid = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    shape_error(op, "axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.mid = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = fwd(x[i]);
  const Var parents[] = {a};
  return tape.record(std::move(y), parents, [ia = a.id, deriv](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    Tensor& dx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 1 || av.rank() > 2 || bv.rank() < 1 || bv.rank() > 2) {
    shape_error("matmul", "operands must be rank 1 or 2");
  }
  kernels::GemmDims d{};
  d.m = av.rank() == 2 ? av.dim(0) : 1;
  d.k = av.rank() == 2 ? av.dim(1) : av.dim(0);
  const std::size_t bk = bv.dim(0);
  d.n = bv.rank() == 2 ? bv.dim(1) : 1;
  if (d.k != bk) {
    shape_error("matmul", shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Shape out_shape;
  if (av.rank() == 2 && bv.rank() == 2) out_shape = {d.m, d.n};
  else if (av.rank() == 2) out_shape = {d.m};
  else if (bv.rank() == 2) out_shape = {d.n};
  else out_shape = {1};

  Tensor out(out_shape);
  kernels::gemm(d, av.data(), bv.data(), out.data());
  const Var parents[] = {a, b};
  return tape.record(std::move(out), parents, [ia = a.id, ib = b.id, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) {
      kernels::gemm_nt_acc(d, g.data(), t.value(ib).data(), t.grad_buffer(ia).data());
    }
    if (t.requires_grad(ib)) {
      kernels::gemm_tn_acc(d, t.value(ia).data(), g.data(), t.grad_buffer(ib).data());
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Var parents[] = {a, b};
  if (av.shape() == bv.shape()) {
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
    return tape.record(std::move(out), parents, [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
      const Tensor& g = t.grad_buffer(self);
      if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
      if (t.requires_grad(ib)) accumulate(t.grad_buffer(ib), g);
    });
  }
  if (av.rank() == 2 && bv.rank() == 1 && av.dim(1) == bv.dim(0)) {
    const std::size_t rows = av.dim(0), cols = av.dim(1);
    Tensor out(av.shape());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = av[r * cols + c] + bv[c];
    return tape.record(std::move(out), parents,
                       [ia = a.id, ib = b.id, rows, cols](Tape& t, std::size_t self) {
                         const Tensor& g = t.grad_buffer(self);
                         if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
                         if (t.requires_grad(ib)) {
                           Tensor& db = t.grad_buffer(ib);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < cols; ++c) db[c] += g[r * cols + c];
                         }
                       });
  }
  shape_error("add", shape_string(av.shape()) + " + " + shape_string(bv.shape()));
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    shape_error("sub", shape_string(av.shape()) + " - " + shape_string(bv.shape()));
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  const Var parents[] = {a, b};
  return tape.record(std::move(out), parents, [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
    if (t.requires_grad(ib)) {
      Tensor& db = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) db[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    shape_error("mul", shape_string(av.shape()) + " * " + shape_string(bv.shape()));
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  const Var parents[] = {a, b};
  return tape.record(std::move(out), parents, [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) {
      Tensor& da = t.grad_buffer(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& db = t.grad_buffer(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) db[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "no operands");
  Tape& tape = *parts[0].tape;
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  out_shape.at(axis) = 0;
  std::vector<std::size_t> mids;
  for (const Var& p : parts) {
    if (p.tape != &tape) shape_error("concat", "operands live on different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) shape_error("concat", shape_string(s) + " vs " + shape_string(first));
    mids.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisView view = axis_view(out_shape, axis, "concat");
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& src = parts[k].value();
    const std::size_t block = mids[k] * view.inner;
    for (std::size_t o = 0; o < view.outer; ++o) {
      std::copy_n(src.data().begin() + o * block, block,
                  out.data().begin() + o * view.mid * view.inner + offset);
    }
    offset += block;
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  return tape.record(std::move(out), parts, [ids, mids, view](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t block = mids[k] * view.inner;
      if (t.requires_grad(ids[k])) {
        Tensor& dp = t.grad_buffer(ids[k]);
        for (std::size_t o = 0; o < view.outer; ++o) {
          const double* src = g.data().data() + o * view.mid * view.inner + offset;
          double* dst = dp.data().data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += block;
    }
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) shape_error("stack_rows", "no operands");
  const std::size_t n = rows[0].shape().at(0);
  for (const Var& r : rows) {
    if (r.shape().size() != 1 || r.shape()[0] != n) {
      shape_error("stack_rows", "expected rank-1 length " + std::to_string(n) + ", got " +
                                    shape_string(r.shape()));
    }
  }
  Tape& tape = *rows[0].tape;
  Tensor out({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].tape != &tape) shape_error("stack_rows", "operands live on different tapes");
    std::copy_n(rows[r].value().data().begin(), n, out.data().begin() + r * n);
  }
  std::vector<std::size_t> ids;
  for (const Var& r : rows) ids.push_back(r.id);
  return tape.record(std::move(out), rows, [ids, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!t.requires_grad(ids[r])) continue;
      Tensor& dr = t.grad_buffer(ids[r]);
      for (std::size_t i = 0; i < n; ++i) dr[i] += g[r * n + i];
    }
  });
}

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& in_shape = a.shape();
  const AxisView view = axis_view(in_shape, axis, "slice");
  if (start + length > view.mid || length == 0) {
    shape_error("slice", "range [" + std::to_string(start) + ", " +
                             std::to_string(start + length) + ") of " + shape_string(in_shape));
  }
  Shape out_shape = in_shape;
  out_shape[axis] = length;
  Tensor out(out_shape);
  const Tensor& x = a.value();
  const std::size_t block = length * view.inner;
  for (std::size_t o = 0; o < view.outer; ++o) {
    std::copy_n(x.data().begin() + (o * view.mid + start) * view.inner, block,
                out.data().begin() + o * block);
  }
  const Var parents[] = {a};
  return a.tape->record(std::move(out), parents,
                        [ia = a.id, view, start, block](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad_buffer(self);
                          Tensor& dx = t.grad_buffer(ia);
                          for (std::size_t o = 0; o < view.outer; ++o) {
                            double* dst = dx.data().data() + (o * view.mid + start) * view.inner;
                            const double* src = g.data().data() + o * block;
                            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                          }
                        });
}

Var row(Var a, std::size_t i) {
  const Shape& s = a.shape();
  if (s.size() != 2 || i >= s[0]) {
    shape_error("row", "row " + std::to_string(i) + " of " + shape_string(s));
  }
  const std::size_t n = s[1];
  Tensor out({n});
  std::copy_n(a.value().data().begin() + i * n, n, out.data().begin());
  const Var parents[] = {a};
  return a.tape->record(std::move(out), parents, [ia = a.id, i, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& dx = t.grad_buffer(ia);
    for (std::size_t k = 0; k < n; ++k) dx[i * n + k] += g[k];
  });
}

Var reshape(Var a, Shape shape) {
  if (shape_numel(shape) != a.value().numel()) {
    shape_error("reshape", shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(a.value().data().begin(), a.value().data().end()));
  const Var parents[] = {a};
  return a.tape->record(std::move(out), parents, [ia = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& dx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i];
  });
}

Var sum(Var a) {
  long double total = 0.0L;
  for (double v : a.value().data()) total += v;
  const Var parents[] = {a};
  return a.tape->record(Tensor::scalar(static_cast<double>(total)), parents, [ia = a.id](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    for (double& d : t.grad_buffer(ia).data()) d += g;
  });
}

Var softmax(Var a, std::size_t axis) {
  const AxisView view = axis_view(a.shape(), axis, "softmax");
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t o = 0; o < view.outer; ++o) {
    for (std::size_t i = 0; i < view.inner; ++i) {
      const std::size_t base = o * view.mid * view.inner + i;
      double mx = x[base];
      for (std::size_t m = 1; m < view.mid; ++m) mx = std::max(mx, x[base + m * view.inner]);
      double total = 0.0;
      for (std::size_t m = 0; m < view.mid; ++m) {
        const double e = std::exp(x[base + m * view.inner] - mx);
        y[base + m * view.inner] = e;
        total += e;
      }
      for (std::size_t m = 0; m < view.mid; ++m) y[base + m * view.inner] /= total;
    }
  }
  const Var parents[] = {a};
  return a.tape->record(std::move(y), parents, [ia = a.id, view](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& y = t.value(self);
    Tensor& dx = t.grad_buffer(ia);
    for (std::size_t o = 0; o < view.outer; ++o) {
      for (std::size_t i = 0; i < view.inner; ++i) {
        const std::size_t base = o * view.mid * view.inner + i;
        double dot = 0.0;
        for (std::size_t m = 0; m < view.mid; ++m) {
          const std::size_t k = base + m * view.inner;
          dot += g[k] * y[k];
        }
        for (std::size_t m = 0; m < view.mid; ++m) {
          const std::size_t k = base + m * view.inner;
          dx[k] += y[k] * (g[k] - dot);
        }
      }
    }
  });
}

Var embedding_lookup(Var table, std::size_t index) {
  const Shape& s = table.shape();
  if (s.size() != 2) shape_error("embedding_lookup", "table must be rank 2");
  if (index >= s[0]) {
    shape_error("embedding_lookup", "index " + std::to_string(index) + " >= vocabulary " +
                                        std::to_string(s[0]));
  }
  return row(table, index);
}

Var conv1d(Var signal, Var kernel, std::size_t axis, Padding padding) {
  Tape& tape = same_tape(signal, kernel, "conv1d");
  const Tensor& x = signal.value();
  const Tensor& k = kernel.value();
  if (k.rank() != 1 || k.numel() == 0) shape_error("conv1d", "kernel must be a non-empty vector");
  const AxisView view = axis_view(x.shape(), axis, "conv1d");
  kernels::ConvDims d{};
  d.outer = view.outer;
  d.length = view.mid;
  d.inner = view.inner;
  d.taps = k.numel();
  if (padding == Padding::Valid) {
    if (d.length < d.taps) {
      shape_error("conv1d", "signal length " + std::to_string(d.length) + " shorter than kernel " +
                                std::to_string(d.taps));
    }
    d.out_length = d.length - d.taps + 1;
    d.pad_left = 0;
  } else {
    d.out_length = d.length;
    d.pad_left = (d.taps - 1) / 2;
  }
  Shape out_shape = x.shape();
  out_shape[axis] = d.out_length;
  Tensor y(out_shape);
  kernels::conv1d(d, x.data(), k.data(), y.data());
  const Var parents[] = {signal, kernel};
  return tape.record(std::move(y), parents,
                     [is = signal.id, ik = kernel.id, d](Tape& t, std::size_t self) {
                       const Tensor& g = t.grad_buffer(self);
                       if (t.requires_grad(is)) {
                         kernels::conv1d_backward_input(d, g.data(), t.value(ik).data(),
                                                        t.grad_buffer(is).data());
                       }
                       if (t.requires_grad(ik)) {
                         kernels::conv1d_backward_kernel(d, g.data(), t.value(is).data(),
                                                         t.grad_buffer(ik).data());
                       }
                     });
}

Var mse_loss(Var prediction, const Tensor& target) {
  const Tensor& p = prediction.value();
  if (p.shape() != target.shape()) {
    shape_error("mse_loss", shape_string(p.shape()) + " vs " + shape_string(target.shape()));
  }
  const double n = static_cast<double>(p.numel());
  long double total = 0.0L;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double diff = p[i] - target[i];
    total += static_cast<long double>(diff) * diff;
  }
  const Var parents[] = {prediction};
  return prediction.tape->record(
      Tensor::scalar(static_cast<double>(total / n)), parents, [ip = prediction.id, target, n](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0];
        const Tensor& p = t.value(ip);
        Tensor& dp = t.grad_buffer(ip);
        for (std::size_t i = 0; i < p.numel(); ++i) dp[i] += g * 2.0 * (p[i] - target[i]) / n;
      });
}

Var cross_entropy_loss(Var logits, std::size_t target) {
  const Tensor& x = logits.value();
  if (x.rank() != 1 || target >= x.numel()) {
    shape_error("cross_entropy_loss", "target " + std::to_string(target) + " for logits " +
                                          shape_string(x.shape()));
  }
  double mx = x[0];
  for (double v : x.data()) mx = std::max(mx, v);
  long double total = 0.0L;
  for (double v : x.data()) total += std::exp(v - mx);
  const double log_z = mx + static_cast<double>(std::log(total));
  const Var parents[] = {logits};
  return logits.tape->record(
      Tensor::scalar(log_z - x[target]), parents,
      [il = logits.id, target, log_z](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0];
        const Tensor& x = t.value(il);
        Tensor& dx = t.grad_buffer(il);
        for (std::size_t i = 0; i < x.numel(); ++i) {
          dx[i] += g * (std::exp(x[i] - log_z) - (i == target ? 1.0 : 0.0));
        }
      });
}

Var binary_cross_entropy_loss(Var logits, const Tensor& targets) {
  const Tensor& x = logits.value();
  if (x.shape() != targets.shape()) {
    shape_error("binary_cross_entropy_loss",
                shape_string(x.shape()) + " vs " + shape_string(targets.shape()));
  }
  // Long double accumulation keeps the per-frame sum well conditioned.
  long double total = 0.0L;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    total += static_cast<long double>(std::max(v, 0.0) - v * targets[i]) +
             std::log1p(std::exp(-std::abs(v)));
  }
  const Var parents[] = {logits};
  return logits.tape->record(
      Tensor::scalar(static_cast<double>(total)), parents, [il = logits.id, targets](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0];
        const Tensor& x = t.value(il);
        Tensor& dx = t.grad_buffer(il);
        for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += g * (stable_sigmoid(x[i]) - targets[i]);
      });
}

Var binary_cross_entropy_terms(Var logits, const Tensor& targets) {
  const Tensor& x = logits.value();
  if (x.shape() != targets.shape()) {
    shape_error("binary_cross_entropy_terms",
                shape_string(x.shape()) + " vs " + shape_string(targets.shape()));
  }
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    y[i] = std::max(v, 0.0) - v * targets[i] + std::log1p(std::exp(-std::abs(v)));
  }
  const Var parents[] = {logits};
  return logits.tape->record(std::move(y), parents, [il = logits.id, targets](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.value(il);
    Tensor& dx = t.grad_buffer(il);
    for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += g[i] * (stable_sigmoid(x[i]) - targets[i]);
  });
}

LstmState lstm_cell_step(Var x, const LstmState& state, const LstmParams& params) {
  const std::size_t hidden = params.hidden_size();
  if (x.shape().size() != 1 || x.shape()[0] != params.input_size() ||
      state.h.shape() != Shape{hidden} || state.c.shape() != Shape{hidden}) {
    shape_error("lstm_cell_step", "x " + shape_string(x.shape()) + ", h " +
                                      shape_string(state.h.shape()) + " for D=" +
                                      std::to_string(params.input_size()) +
                                      " H=" + std::to_string(hidden));
  }
  const Var parts[] = {x, state.h};
  const Var xh = concat(parts);
  const Var i = sigmoid(linear(xh, params.w_input, params.b_input));
  const Var f = sigmoid(linear(xh, params.w_forget, params.b_forget));
  const Var g = tanh(linear(xh, params.w_cell, params.b_cell));
  const Var o = sigmoid(linear(xh, params.w_output, params.b_output));
  const Var c = add(mul(f, state.c), mul(i, g));
  const Var h = mul(o, tanh(c));
  return {h, c};
}

Var attention(Var dec_state, Var enc_outputs) {
  const Shape& e = enc_outputs.shape();
  if (e.size() != 2 || dec_state.shape() != Shape{e[1]}) {
    shape_error("attention", "state " + shape_string(dec_state.shape()) + " vs encoder " +
                                 shape_string(e));
  }
  const Var scores = matmul(enc_outputs, dec_state);
  const Var weights = softmax(scores, 0);
  return matmul(weights, enc_outputs);
}

Var linear(Var x, Var weight, Var bias) { return add(matmul(weight, x), bias); }

}  // namespace dtrack::ad
