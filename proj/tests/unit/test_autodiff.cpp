#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dtrack/checkpoint.hpp"
#include "dtrack/error.hpp"
#include "dtrack/grad_suite.hpp"
#include "dtrack/gradcheck.hpp"
#include "dtrack/layers.hpp"
#include "dtrack/ops.hpp"
#include "dtrack/optim.hpp"
#include "dtrack/tape.hpp"
#include "test_support.hpp"

using namespace dtrack;
using namespace dtrack::ad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Format;
}

LstmParams lstm_from(Tape& tape, const std::vector<Tensor>& w) {
  return {tape.leaf(w[0]), tape.leaf(w[1]), tape.leaf(w[2]), tape.leaf(w[3]),
          tape.leaf(w[4]), tape.leaf(w[5]), tape.leaf(w[6]), tape.leaf(w[7])};
}

}  // namespace

TEST(Softmax, UniformOnEqualInputs) {
  Tape tape;
  const Var s = softmax(tape.constant(Tensor::vector({0, 0, 0})), 0);
  for (double v : s.value().data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Tape tape;
    const std::size_t r = 1 + rng.index(6), c = 1 + rng.index(9);
    const Tensor x = random_tensor({r, c}, rng, -30, 30);
    for (std::size_t axis : {0u, 1u}) {
      const Tensor& s = softmax(tape.constant(x), axis).value();
      const std::size_t lines = axis == 1 ? r : c, len = axis == 1 ? c : r;
      for (std::size_t l = 0; l < lines; ++l) {
        double total = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          const double v = axis == 1 ? s.at(l, i) : s.at(i, l);
          EXPECT_GE(v, 0.0);
          total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
  }
}

TEST(Conv1d, OnesKernelOverOnes) {
  Tape tape;
  const Var y = conv1d(tape.constant(Tensor({10}, 1.0)), tape.constant(Tensor({10}, 1.0)), 0, Padding::Valid);
  ASSERT_EQ(y.shape(), Shape{1});
  EXPECT_EQ(y.value()[0], 10.0);
}

TEST(Conv1d, OutputLengths) {
  Rng rng(5);
  for (std::size_t len : {11u, 20u, 128u, 288u}) {
    Tape tape;
    const Var x = tape.constant(random_tensor({len, 128}, rng));
    const Var k10 = tape.constant(random_tensor({10}, rng));
    const Var k11 = tape.constant(random_tensor({11}, rng));
    EXPECT_EQ(conv1d(x, k10, 0, Padding::Valid).shape(), (Shape{len - 9, 128}));
    EXPECT_EQ(conv1d(x, k10, 0, Padding::Same).shape(), (Shape{len, 128}));
    EXPECT_EQ(conv1d(x, k11, 1, Padding::Valid).shape(), (Shape{len, 118}));
    EXPECT_EQ(conv1d(x, k11, 1, Padding::Same).shape(), (Shape{len, 128}));
  }
}

TEST(Conv1d, SameMatchesDirectSum) {
  Rng rng(7);
  const Tensor x = random_tensor({13}, rng), k = random_tensor({4}, rng);
  Tape tape;
  const Tensor& y = conv1d(tape.constant(x), tape.constant(k), 0, Padding::Same).value();
  const int pad = (4 - 1) / 2;
  for (int t = 0; t < 13; ++t) {
    double ref = 0.0;
    for (int j = 0; j < 4; ++j) {
      const int i = t + j - pad;
      if (i >= 0 && i < 13) ref += x[i] * k[j];
    }
    EXPECT_NEAR(y[t], ref, 1e-14);
  }
}

TEST(Ops, ShapeMismatchIsTyped) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}));
  const Var b = tape.constant(Tensor({2, 3}));
  EXPECT_EQ(code_of([&] { matmul(a, b); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { add(a, tape.constant(Tensor({4}))); }), ErrorCode::ShapeMismatch);
}

TEST(Ops, NonFiniteValueIsTyped) {
  Tape tape;
  EXPECT_EQ(code_of([&] { tape.leaf(Tensor::vector({1.0, NAN})); }), ErrorCode::NonFiniteValue);
  const Var big = tape.constant(Tensor::vector({1e308}));
  EXPECT_EQ(code_of([&] { scale(big, 10.0); }), ErrorCode::NonFiniteValue);
}

TEST(Ops, LossValues) {
  Tape tape;
  const Var logits = tape.constant(Tensor::vector({1.0, 2.0, 3.0}));
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  EXPECT_NEAR(cross_entropy_loss(logits, 0).value()[0], lse - 1.0, 1e-14);
  const Tensor t = Tensor::vector({1.0, 0.0, 1.0});
  double bce = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(i + 1.0)));
    bce -= t[i] * std::log(p) + (1 - t[i]) * std::log(1 - p);
  }
  EXPECT_NEAR(binary_cross_entropy_loss(logits, t).value()[0], bce, 1e-13);
  EXPECT_NEAR(mse_loss(logits, t).value()[0], (0.0 + 4.0 + 4.0) / 3.0, 1e-14);
}

TEST(Lstm, ZeroWeightsGiveZeroState) {
  Rng rng(9);
  Tape tape;
  std::vector<Tensor> w(8);
  for (int g = 0; g < 4; ++g) {
    w[g] = Tensor({3, 5});
    w[4 + g] = Tensor({3});
  }
  const LstmParams p = lstm_from(tape, w);
  const LstmState s = lstm_cell_step(tape.constant(random_tensor({2}, rng)),
                                     {tape.constant(Tensor({3})), tape.constant(Tensor({3}))}, p);
  for (double v : s.h.value().data()) EXPECT_EQ(v, 0.0);
  for (double v : s.c.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, CellStateGrowsByAtMostOne) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Tape tape;
    std::vector<Tensor> w(8);
    for (int g = 0; g < 4; ++g) {
      w[g] = random_tensor({4, 7}, rng, -5, 5);
      w[4 + g] = random_tensor({4}, rng, -5, 5);
    }
    const Tensor c = random_tensor({4}, rng, -3, 3);
    const LstmState s = lstm_cell_step(tape.constant(random_tensor({3}, rng, -5, 5)),
                                       {tape.constant(random_tensor({4}, rng)), tape.constant(c)},
                                       lstm_from(tape, w));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LE(std::abs(s.c.value()[i]), std::abs(c[i]) + 1.0);
  }
}

TEST(Lstm, SumOfHiddenGradientMatchesDifferences) {
  Rng rng(13);
  std::vector<Tensor> inputs = {random_tensor({3}, rng), random_tensor({4}, rng), random_tensor({4}, rng)};
  for (int g = 0; g < 4; ++g) inputs.push_back(random_tensor({4, 7}, rng));
  for (int g = 0; g < 4; ++g) inputs.push_back(random_tensor({4}, rng));
  const auto r = grad_check(
      [](Tape&, std::span<const Var> v) {
        const LstmParams p{v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
        return sum(lstm_cell_step(v[0], {v[1], v[2]}, p).h);
      },
      inputs);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Attention, SingleEncoderRowIsTheContext) {
  Rng rng(15);
  Tape tape;
  const Tensor enc = random_tensor({1, 5}, rng);
  const Var ctx = attention(tape.constant(random_tensor({5}, rng, -10, 10)), tape.constant(enc));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(ctx.value()[i], enc[i]);
}

TEST(Attention, IdenticalRowsGiveThatRow) {
  Rng rng(17);
  const Tensor row = random_tensor({6}, rng);
  Tensor enc({4, 6});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < 6; ++i) enc.at(t, i) = row[i];
  Tape tape;
  const Var ctx = attention(tape.constant(random_tensor({6}, rng)), tape.constant(enc));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(ctx.value()[i], row[i], 1e-15);
}

TEST(Optim, ZeroGradientLeavesAdamParamsUnchanged) {
  Rng rng(19);
  ParameterSet p;
  p.add("w", random_tensor({3, 3}, rng));
  const ParameterSet before = p;
  AdamState state(p);
  for (int i = 0; i < 5; ++i) adam_step(p, zero_gradients(p), state, {});
  EXPECT_EQ(p, before);
}

TEST(Optim, SgdIsExact) {
  ParameterSet p;
  p.add("w", Tensor::vector({1.0, -2.0, 0.5}));
  Gradients g = {Tensor::vector({0.25, 1.0, -4.0})};
  sgd_step(p, g, 0.1);
  EXPECT_EQ(p["w"][0], 1.0 - 0.1 * 0.25);
  EXPECT_EQ(p["w"][1], -2.0 - 0.1 * 1.0);
  EXPECT_EQ(p["w"][2], 0.5 - 0.1 * -4.0);
}

TEST(Optim, AdamMinimizesSquare) {
  ParameterSet p;
  p.add("x", Tensor::vector({5.0}));
  AdamState state(p);
  for (int i = 0; i < 500; ++i) {
    Gradients g = {Tensor::vector({2.0 * p["x"][0]})};
    adam_step(p, g, state, AdamOptions{.lr = 0.1});
  }
  EXPECT_LT(std::abs(p["x"][0]), 0.1);
}

TEST(Optim, AdamFirstStepMatchesHandComputation) {
  ParameterSet p;
  p.add("x", Tensor::vector({1.0, 2.0}));
  AdamState state(p);
  adam_step(p, {Tensor::vector({0.5, -3.0})}, state, AdamOptions{.lr = 0.01});
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(p["x"][0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p["x"][1], 2.0 + 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(Optim, ClipByGlobalNorm) {
  Gradients g = {Tensor::vector({3.0}), Tensor::vector({4.0})};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
}

TEST(GradCheck, LinearOpIsExact) {
  Rng rng(21);
  const auto r = grad_check(
      [](Tape&, std::span<const Var> v) { return linear(v[0], v[1], v[2]); },
      {random_tensor({5}, rng), random_tensor({3, 5}, rng), random_tensor({3}, rng)});
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(GradCheck, SigmoidChain) {
  Rng rng(23);
  const auto r = grad_check(
      [](Tape&, std::span<const Var> v) { return sigmoid(sigmoid(sigmoid(mul(v[0], v[1])))); },
      {random_tensor({6}, rng, -2, 2), random_tensor({6}, rng, -2, 2)});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(GradCheck, DetectsCorruptedBackward) {
  Rng rng(25);
  // tanh with its analytic gradient inflated by 10%.
  const GraphFn corrupted = [](Tape& tape, std::span<const Var> v) {
    const Var x = v[0];
    Tensor y = x.value();
    for (auto& e : y.data()) e = std::tanh(e);
    const Var parents[] = {x};
    return tape.record(y, parents, [x](Tape& t, std::size_t self) {
      const Tensor g = t.grad_buffer(self);
      const Tensor& out = t.value(self);
      Tensor& gx = t.grad_buffer(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += 1.1 * g[i] * (1 - out[i] * out[i]);
    });
  };
  EXPECT_GT(grad_check(corrupted, {random_tensor({5}, rng)}).max_rel_error, 1e-2);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-12, 0.0), 1e-12 / 1e-8);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

TEST(Tape, SecondBackwardIsRejected) {
  Tape tape;
  const Var x = tape.leaf(Tensor::vector({2.0}));
  const Var y = sum(mul(x, x));
  tape.backward(y);
  EXPECT_EQ(tape.grad(x)[0], 4.0);
  EXPECT_EQ(code_of([&] { tape.backward(y); }), ErrorCode::TapeState);
}

TEST(Tape, BackwardKeepsForwardValues) {
  Rng rng(27);
  Tape tape;
  const Var x = tape.leaf(random_tensor({4, 4}, rng));
  const Var h = tanh(matmul(x, x));
  const Tensor before = h.value();
  tape.backward(sum(softmax(h, 1)));
  EXPECT_EQ(h.value(), before);
}

TEST(GradSuite, EveryPrimitiveWithinTolerance) {
  const auto cases = primitive_suite(1, 10);
  EXPECT_GE(cases.size(), 20u);
  for (const auto& c : cases) EXPECT_TRUE(c.passed()) << c.name << " " << c.max_rel_error;
}

TEST(Checkpoint, RoundTripIsBitwise) {
  Rng rng(29);
  ParameterSet p;
  p.add("a.w", random_tensor({3, 4}, rng));
  p.add("b", random_tensor({7}, rng, -1e300, 1e300));
  p.add("c", Tensor::vector({-0.0, 5e-324}));
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(p)), p);
  const auto path = dtrack::testing::scratch_dir("ckpt") / "p.dtck";
  save_checkpoint(path, p);
  EXPECT_EQ(load_checkpoint(path), p);
}

TEST(Checkpoint, BadInputIsFormatError) {
  ParameterSet p;
  p.add("w", Tensor::vector({1.0, 2.0}));
  auto bytes = encode_checkpoint(p);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_checkpoint(bad); }), ErrorCode::Format);
  bytes.pop_back();
  EXPECT_EQ(code_of([&] { decode_checkpoint(bytes); }), ErrorCode::Format);
}

TEST(Parameters, DuplicateNameAndChecksum) {
  ParameterSet p;
  p.add("w", Tensor::vector({1.0}));
  EXPECT_EQ(code_of([&] { p.add("w", Tensor::vector({2.0})); }), ErrorCode::InvalidConfig);
  const auto before = p.checksum();
  p["w"][0] = std::nextafter(1.0, 2.0);
  EXPECT_NE(p.checksum(), before);
}
