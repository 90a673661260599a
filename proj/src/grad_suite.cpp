#include "dtrack/grad_suite.hpp"

#include <algorithm>
#include <functional>

#include "dtrack/gradcheck.hpp"
#include "dtrack/layers.hpp"
#include "dtrack/models.hpp"
#include "dtrack/ops.hpp"
#include "dtrack/rng.hpp"

namespace dtrack {

namespace {

using ad::Var;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so relu's kink stays out of reach of eps.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    const double m = rng.uniform(0.1, 1.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.index(hi - lo + 1));
}

struct Trial {
  GraphFn fn;
  std::vector<Tensor> inputs;
};

using TrialMaker = std::function<Trial(Rng&)>;

std::vector<std::pair<std::string, TrialMaker>> primitives() {
  std::vector<std::pair<std::string, TrialMaker>> out;
  auto add = [&](std::string name, TrialMaker make) { out.emplace_back(std::move(name), std::move(make)); };

  add("matmul", [](Rng& r) {
    const auto m = dim(r, 1, 5), k = dim(r, 1, 5), n = dim(r, 1, 5);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::matmul(v[0], v[1]); },
                 {random_tensor({m, k}, r), random_tensor({k, n}, r)}};
  });
  add("matvec", [](Rng& r) {
    const auto m = dim(r, 1, 5), k = dim(r, 1, 5);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::matmul(v[0], v[1]); },
                 {random_tensor({m, k}, r), random_tensor({k}, r)}};
  });
  add("add", [](Rng& r) {
    const auto m = dim(r, 1, 4), n = dim(r, 1, 4);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::add(v[0], v[1]); },
                 {random_tensor({m, n}, r), random_tensor({m, n}, r)}};
  });
  add("add_broadcast", [](Rng& r) {
    const auto m = dim(r, 1, 4), n = dim(r, 1, 4);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::add(v[0], v[1]); },
                 {random_tensor({m, n}, r), random_tensor({n}, r)}};
  });
  add("sub", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::sub(v[0], v[1]); },
                 {random_tensor({n}, r), random_tensor({n}, r)}};
  });
  add("mul", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::mul(v[0], v[1]); },
                 {random_tensor({n}, r), random_tensor({n}, r)}};
  });
  add("scale", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    const double f = r.uniform(-2.0, 2.0);
    return Trial{[f](ad::Tape&, std::span<const Var> v) { return ad::scale(v[0], f); },
                 {random_tensor({n}, r)}};
  });
  add("sigmoid", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::sigmoid(v[0]); },
                 {random_tensor({n}, r, -3.0, 3.0)}};
  });
  add("tanh", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::tanh(v[0]); },
                 {random_tensor({n}, r, -2.0, 2.0)}};
  });
  add("relu", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::relu(v[0]); },
                 {away_from_zero({n}, r)}};
  });
  add("concat", [](Rng& r) {
    const auto m = dim(r, 1, 3), a = dim(r, 1, 3), b = dim(r, 1, 3);
    const std::size_t axis = r.index(2);
    Shape sa = axis == 0 ? Shape{a, m} : Shape{m, a};
    Shape sb = axis == 0 ? Shape{b, m} : Shape{m, b};
    return Trial{[axis](ad::Tape&, std::span<const Var> v) {
                   const Var parts[] = {v[0], v[1]};
                   return ad::concat(parts, axis);
                 },
                 {random_tensor(sa, r), random_tensor(sb, r)}};
  });
  add("stack_rows", [](Rng& r) {
    const auto n = dim(r, 1, 5);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::stack_rows(v); },
                 {random_tensor({n}, r), random_tensor({n}, r), random_tensor({n}, r)}};
  });
  add("slice", [](Rng& r) {
    const auto m = dim(r, 2, 5), n = dim(r, 2, 5);
    const std::size_t axis = r.index(2);
    const std::size_t len = axis == 0 ? m : n;
    const std::size_t start = r.index(len - 1);
    const std::size_t count = 1 + r.index(len - start);
    return Trial{[=](ad::Tape&, std::span<const Var> v) { return ad::slice(v[0], axis, start, count); },
                 {random_tensor({m, n}, r)}};
  });
  add("reshape", [](Rng& r) {
    const auto m = dim(r, 1, 4), n = dim(r, 1, 4);
    return Trial{[=](ad::Tape&, std::span<const Var> v) { return ad::reshape(v[0], {n * m}); },
                 {random_tensor({m, n}, r)}};
  });
  add("sum", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::sum(v[0]); }, {random_tensor({n}, r)}};
  });
  add("softmax", [](Rng& r) {
    const auto m = dim(r, 1, 4), n = dim(r, 2, 5);
    const std::size_t axis = r.index(2);
    return Trial{[axis](ad::Tape&, std::span<const Var> v) { return ad::softmax(v[0], axis); },
                 {random_tensor({m, n}, r, -2.0, 2.0)}};
  });
  add("embedding_lookup", [](Rng& r) {
    const auto rows = dim(r, 2, 6), width = dim(r, 1, 5);
    const std::size_t idx = r.index(rows);
    return Trial{[idx](ad::Tape&, std::span<const Var> v) { return ad::embedding_lookup(v[0], idx); },
                 {random_tensor({rows, width}, r)}};
  });
  for (const auto padding : {ad::Padding::Valid, ad::Padding::Same}) {
    const std::string suffix = padding == ad::Padding::Valid ? "valid" : "same";
    add("conv1d_time_" + suffix, [padding](Rng& r) {
      const auto k = dim(r, 1, 5), len = k + dim(r, 0, 6), width = dim(r, 1, 4);
      return Trial{[padding](ad::Tape&, std::span<const Var> v) { return ad::conv1d(v[0], v[1], 0, padding); },
                   {random_tensor({len, width}, r), random_tensor({k}, r)}};
    });
    add("conv1d_pitch_" + suffix, [padding](Rng& r) {
      const auto k = dim(r, 1, 5), len = k + dim(r, 0, 6), rows = dim(r, 1, 4);
      return Trial{[padding](ad::Tape&, std::span<const Var> v) { return ad::conv1d(v[0], v[1], 1, padding); },
                   {random_tensor({rows, len}, r), random_tensor({k}, r)}};
    });
  }
  add("binary_cross_entropy_terms", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    Tensor target({n});
    for (double& x : target.data()) x = r.uniform() < 0.5 ? 0.0 : 1.0;
    return Trial{[target](ad::Tape&, std::span<const Var> v) {
                   return ad::binary_cross_entropy_terms(v[0], target);
                 },
                 {random_tensor({n}, r, -3.0, 3.0)}};
  });
  add("mse_loss", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    Tensor target = random_tensor({n}, r);
    return Trial{[target](ad::Tape&, std::span<const Var> v) { return ad::mse_loss(v[0], target); },
                 {random_tensor({n}, r)}};
  });
  add("cross_entropy_loss", [](Rng& r) {
    const auto n = dim(r, 2, 8);
    const std::size_t t = r.index(n);
    return Trial{[t](ad::Tape&, std::span<const Var> v) { return ad::cross_entropy_loss(v[0], t); },
                 {random_tensor({n}, r, -2.0, 2.0)}};
  });
  add("binary_cross_entropy_loss", [](Rng& r) {
    const auto n = dim(r, 1, 8);
    Tensor target({n});
    for (double& x : target.data()) x = r.uniform() < 0.5 ? 0.0 : 1.0;
    return Trial{[target](ad::Tape&, std::span<const Var> v) {
                   return ad::binary_cross_entropy_loss(v[0], target);
                 },
                 {random_tensor({n}, r, -3.0, 3.0)}};
  });
  add("lstm_cell_step", [](Rng& r) {
    const auto d = dim(r, 1, 4), h = dim(r, 1, 4);
    std::vector<Tensor> in = {random_tensor({d}, r), random_tensor({h}, r), random_tensor({h}, r)};
    for (int g = 0; g < 4; ++g) in.push_back(random_tensor({h, d + h}, r));
    for (int g = 0; g < 4; ++g) in.push_back(random_tensor({h}, r));
    return Trial{[](ad::Tape&, std::span<const Var> v) {
                   const ad::LstmParams p{v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
                   const auto next = ad::lstm_cell_step(v[0], {v[1], v[2]}, p);
                   const Var parts[] = {next.h, next.c};
                   return ad::concat(parts);
                 },
                 std::move(in)};
  });
  add("attention", [](Rng& r) {
    const auto t = dim(r, 1, 5), h = dim(r, 1, 4);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::attention(v[0], v[1]); },
                 {random_tensor({h}, r), random_tensor({t, h}, r)}};
  });
  add("linear", [](Rng& r) {
    const auto in = dim(r, 1, 5), o = dim(r, 1, 5);
    return Trial{[](ad::Tape&, std::span<const Var> v) { return ad::linear(v[0], v[1], v[2]); },
                 {random_tensor({in}, r), random_tensor({o, in}, r), random_tensor({o}, r)}};
  });
  return out;
}

repr::Sequence random_sequence(const models::ModelConfig& c, std::size_t len, Rng& rng) {
  if (c.repr == repr::Representation::Embedding) {
    std::vector<int> chords(len);
    for (int& x : chords) x = static_cast<int>(rng.index(c.corpus_size));
    return repr::Sequence::of_chords(std::move(chords));
  }
  std::vector<repr::Frame> frames(len);
  for (auto& f : frames)
    for (auto& cell : f) cell = rng.uniform() < 0.2 ? 1 : 0;
  return repr::Sequence::of_frames(std::move(frames));
}

void bce_terms(Var logits, const repr::Frame& target, double weight, std::vector<Var>& out) {
  out.push_back(ad::scale(ad::binary_cross_entropy_terms(logits, models::frame_tensor(target)), weight));
}

SuiteCase check_model(const std::string& name, const models::ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const auto model = models::Model::build(config, seed);
  const auto input = random_sequence(config, config.in_len, rng);
  const auto target = random_sequence(config, config.out_len, rng);
  // Mixed mask exercises the free-running feedback path as well.
  auto mask = std::make_unique<bool[]>(config.out_len);
  for (std::size_t t = 0; t < config.out_len; ++t) mask[t] = t % 2 == 1;
  const std::span<const bool> tf_mask(mask.get(), config.out_len);

  std::vector<repr::Frame> rights, lefts;
  if (model.is_dual_track()) {
    models::ModelConfig pr = config;
    pr.repr = repr::Representation::Pianoroll;
    rights = random_sequence(pr, 3, rng).frames;
    lefts = random_sequence(pr, 3, rng).frames;
  }

  const ParameterSet& gen = model.generator_params();
  const ParameterSet& mlp = model.mlp_params();
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < gen.size(); ++i) inputs.push_back(gen.value(i));
  for (std::size_t i = 0; i < mlp.size(); ++i) inputs.push_back(mlp.value(i));

  // The total loss as separate per-cell terms, so the harness can add them
  // in extended precision.
  const double step_weight = 1.0 / static_cast<double>(config.out_len);
  const GraphFn fn = [&](ad::Tape& tape, std::span<const Var> v) {
    const BoundParameters g(gen, {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(gen.size())});
    const auto logits = model.forward(tape, g, input, target, tf_mask);
    std::vector<Var> terms;
    for (std::size_t t = 0; t < logits.size(); ++t) {
      if (config.repr == repr::Representation::Embedding) {
        terms.push_back(ad::scale(
            ad::cross_entropy_loss(logits[t], static_cast<std::size_t>(target.chords[t])), step_weight));
      } else {
        bce_terms(logits[t], target.frames[t], step_weight, terms);
      }
    }
    if (model.is_dual_track()) {
      const BoundParameters m(mlp, {v.begin() + static_cast<std::ptrdiff_t>(gen.size()), v.end()});
      for (std::size_t i = 0; i < rights.size(); ++i) {
        bce_terms(model.left_hand_logits(tape, m, rights[i]), lefts[i], 1.0, terms);
      }
    }
    return ad::concat(terms);
  };
  const auto r = grad_check(fn, inputs, 1e-5, 0, Reduction::Sum);
  return {name, r.max_rel_error, kModelTolerance, r.coordinates};
}

}  // namespace

std::vector<SuiteCase> primitive_suite(std::uint64_t seed, int trials) {
  std::vector<SuiteCase> cases;
  Rng rng(seed);
  for (const auto& [name, make] : primitives()) {
    SuiteCase c{name, 0.0, kPrimitiveTolerance, 0};
    for (int t = 0; t < trials; ++t) {
      const Trial trial = make(rng);
      const auto r = grad_check(trial.fn, trial.inputs, 1e-5, rng.next_u64());
      c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
      c.coordinates += r.coordinates;
    }
    cases.push_back(c);
  }
  return cases;
}

std::vector<SuiteCase> model_suite(std::uint64_t seed) {
  using models::Arch;
  using repr::Representation;
  models::ModelConfig tiny;
  tiny.hidden_size = 4;
  tiny.embedding_size = 4;
  tiny.corpus_size = 7;
  tiny.in_len = 6;
  tiny.out_len = 6;
  tiny.mlp_hidden = 4;

  struct Spec {
    const char* name;
    Arch arch;
    Arch generator;
    Representation repr;
  };
  const Spec specs[] = {
      {"simple-lstm/embedding", Arch::SimpleLstm, Arch::SimpleLstm, Representation::Embedding},
      {"simple-lstm/pianoroll", Arch::SimpleLstm, Arch::SimpleLstm, Representation::Pianoroll},
      {"enc-dec/embedding", Arch::EncDec, Arch::EncDec, Representation::Embedding},
      {"attn-enc-dec/embedding", Arch::AttnEncDec, Arch::AttnEncDec, Representation::Embedding},
      {"attn-enc-dec/pianoroll", Arch::AttnEncDec, Arch::AttnEncDec, Representation::Pianoroll},
      {"cnn-attn-enc-dec/pianoroll", Arch::CnnAttnEncDec, Arch::CnnAttnEncDec, Representation::Pianoroll},
      {"dual-track/pianoroll", Arch::DualTrack, Arch::EncDec, Representation::Pianoroll},
  };
  std::vector<SuiteCase> cases;
  for (const Spec& s : specs) {
    models::ModelConfig c = tiny;
    c.arch = s.arch;
    c.generator_arch = s.generator;
    c.repr = s.repr;
    cases.push_back(check_model(s.name, c, seed));
  }
  return cases;
}

}  // namespace dtrack
