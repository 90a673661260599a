#include "dtrack/models.hpp"

#include <algorithm>
#include <cmath>

#include "dtrack/error.hpp"

namespace dtrack::models {

namespace {

bool uses_attention(Arch a) { return a == Arch::AttnEncDec || a == Arch::CnnAttnEncDec; }

std::string lstm_prefix(std::size_t layer) { return "lstm" + std::to_string(layer); }

void add_generator_parameters(ParameterSet& params, const ModelConfig& config, Rng& rng) {
  const Arch arch = config.generator();
  const std::size_t hidden = config.hidden_size;
  const std::size_t width = config.input_width();
  if (config.repr == Representation::Embedding) {
    // Embedding rows are a lookup, not a dot product: fan-in of 1.
    params.add("embedding", uniform_init({config.corpus_size, config.embedding_size}, 1, rng));
  }
  if (arch == Arch::CnnAttnEncDec) {
    params.add("conv_time.kernel",
               uniform_init({config.conv_time_kernel}, config.conv_time_kernel, rng));
    params.add("conv_pitch.kernel",
               uniform_init({config.conv_pitch_kernel}, config.conv_pitch_kernel, rng));
  }
  if (arch == Arch::SimpleLstm) {
    for (std::size_t l = 0; l < config.num_lstm_layers; ++l) {
      add_lstm_parameters(params, lstm_prefix(l), l == 0 ? width : hidden, hidden, rng);
    }
  } else {
    add_lstm_parameters(params, "enc", width, hidden, rng);
    add_lstm_parameters(params, "dec", uses_attention(arch) ? width + hidden : width, hidden, rng);
  }
  add_linear_parameters(params, "head", hidden, config.output_width(), rng);
}

void add_mlp_parameters(ParameterSet& params, const ModelConfig& config, Rng& rng) {
  add_linear_parameters(params, "hidden", repr::kPitches, config.mlp_hidden, rng);
  add_linear_parameters(params, "out", config.mlp_hidden, repr::kPitches, rng);
}

void check_same_layout(const ParameterSet& expected, const ParameterSet& tensors,
                       const std::string& prefix, std::size_t& used) {
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const std::string name = prefix + expected.name(i);
    if (!tensors.contains(name)) {
      throw Error(ErrorCode::InvalidConfig, "checkpoint lacks tensor " + name);
    }
    const Tensor& t = tensors[name];
    if (t.shape() != expected.value(i).shape()) {
      throw Error(ErrorCode::InvalidConfig, "tensor " + name + " has shape " +
                                                shape_string(t.shape()) + ", config implies " +
                                                shape_string(expected.value(i).shape()));
    }
    ++used;
  }
}

}  // namespace

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::SimpleLstm: return "simple-lstm";
    case Arch::EncDec: return "enc-dec";
    case Arch::AttnEncDec: return "attn-enc-dec";
    case Arch::CnnAttnEncDec: return "cnn-attn-enc-dec";
    case Arch::DualTrack: return "dual-track";
  }
  return "unknown";
}

Arch arch_from_string(const std::string& s) {
  std::string key;
  for (char ch : s) {
    if (ch != '-' && ch != '_') key.push_back(static_cast<char>(std::tolower(ch)));
  }
  if (key == "simplelstm" || key == "lstm") return Arch::SimpleLstm;
  if (key == "encdec") return Arch::EncDec;
  if (key == "attnencdec") return Arch::AttnEncDec;
  if (key == "cnnattnencdec") return Arch::CnnAttnEncDec;
  if (key == "dualtrack") return Arch::DualTrack;
  throw Error(ErrorCode::InvalidConfig, "unknown architecture '" + s + "'");
}

void validate(const ModelConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (config.arch == Arch::DualTrack && config.generator_arch == Arch::DualTrack) {
    fail("a dual-track generator cannot itself be dual-track");
  }
  if (config.generator() == Arch::CnnAttnEncDec && config.repr == Representation::Embedding) {
    fail("the CNN front-end needs the pianoroll representation");
  }
  if (config.repr == Representation::Embedding) {
    if (config.corpus_size < 2) fail("embedding models need corpus_size >= 2");
    if (config.embedding_size == 0) fail("embedding_size must be positive");
  }
  if (config.hidden_size == 0) fail("hidden_size must be positive");
  if (config.in_len == 0 || config.out_len == 0) fail("window lengths must be positive");
  if (config.generator() == Arch::SimpleLstm && config.num_lstm_layers == 0) {
    fail("num_lstm_layers must be positive");
  }
  if (config.conv_time_kernel == 0 || config.conv_pitch_kernel == 0) {
    fail("convolution kernels must be positive");
  }
  if (config.arch == Arch::DualTrack && config.mlp_hidden == 0) fail("mlp_hidden must be positive");
}

Token token_at(const repr::Sequence& seq, std::size_t t) {
  if (seq.repr == Representation::Embedding) return seq.chords.at(t);
  return seq.frames.at(t);
}

Tensor frame_tensor(const repr::Frame& frame) {
  Tensor t({repr::kPitches});
  for (int p = 0; p < repr::kPitches; ++p) t[p] = frame[p];
  return t;
}

SequenceGraph::SequenceGraph(ad::Tape& tape, const Model& model, const BoundParameters& params)
    : tape_(tape), model_(model), params_(params) {}

ad::Var SequenceGraph::zeros(std::size_t n) { return tape_.constant(Tensor({n}, 0.0)); }

ad::Var SequenceGraph::embed(const Token& token) {
  const ModelConfig& c = model_.config();
  if (c.repr == Representation::Embedding) {
    const int* chord = std::get_if<int>(&token);
    if (!chord) throw Error(ErrorCode::ShapeMismatch, "embedding model fed a pianoroll frame");
    if (*chord < 0 || static_cast<std::size_t>(*chord) >= c.corpus_size) {
      throw Error(ErrorCode::ShapeMismatch, "chord index " + std::to_string(*chord) +
                                                " outside corpus of " +
                                                std::to_string(c.corpus_size));
    }
    return ad::embedding_lookup(params_["embedding"], static_cast<std::size_t>(*chord));
  }
  const repr::Frame* frame = std::get_if<repr::Frame>(&token);
  if (!frame) throw Error(ErrorCode::ShapeMismatch, "pianoroll model fed a chord index");
  return tape_.constant(frame_tensor(*frame));
}

DecoderState SequenceGraph::encode(const repr::Sequence& input) {
  const ModelConfig& c = model_.config();
  const Arch arch = c.generator();
  if (input.repr != c.repr || input.size() != c.in_len) {
    throw Error(ErrorCode::ShapeMismatch,
                "input window of " + std::to_string(input.size()) + " " +
                    repr::to_string(input.repr) + " steps, model expects " +
                    std::to_string(c.in_len) + " " + repr::to_string(c.repr));
  }
  const std::size_t hidden = c.hidden_size;
  DecoderState state;

  if (arch == Arch::SimpleLstm) {
    std::vector<ad::LstmParams> stack;
    for (std::size_t l = 0; l < c.num_lstm_layers; ++l) {
      stack.push_back(bind_lstm(params_, lstm_prefix(l)));
      state.layers.push_back({zeros(hidden), zeros(hidden)});
    }
    // The last input token is fed by the first decode step.
    for (std::size_t t = 0; t + 1 < input.size(); ++t) {
      ad::Var x = embed(token_at(input, t));
      for (std::size_t l = 0; l < stack.size(); ++l) {
        state.layers[l] = ad::lstm_cell_step(x, state.layers[l], stack[l]);
        x = state.layers[l].h;
      }
    }
    return state;
  }

  std::vector<ad::Var> rows;
  if (arch == Arch::CnnAttnEncDec) {
    Tensor window({input.size(), static_cast<std::size_t>(repr::kPitches)});
    for (std::size_t t = 0; t < input.size(); ++t)
      for (int p = 0; p < repr::kPitches; ++p) window.at(t, p) = input.frames[t][p];
    ad::Var x = tape_.constant(std::move(window));
    x = ad::tanh(ad::conv1d(x, params_["conv_time.kernel"], 0, ad::Padding::Same));
    x = ad::tanh(ad::conv1d(x, params_["conv_pitch.kernel"], 1, ad::Padding::Same));
    for (std::size_t t = 0; t < input.size(); ++t) rows.push_back(ad::row(x, t));
  } else {
    for (std::size_t t = 0; t < input.size(); ++t) rows.push_back(embed(token_at(input, t)));
  }

  const ad::LstmParams enc = bind_lstm(params_, "enc");
  ad::LstmState s{zeros(hidden), zeros(hidden)};
  std::vector<ad::Var> outputs;
  outputs.reserve(rows.size());
  for (const ad::Var& x : rows) {
    s = ad::lstm_cell_step(x, s, enc);
    outputs.push_back(s.h);
  }
  state.layers.push_back(s);
  if (uses_attention(arch)) state.encoder_outputs = ad::stack_rows(outputs);
  return state;
}

ad::Var SequenceGraph::step(DecoderState& state, const Token& prev) {
  const ModelConfig& c = model_.config();
  const Arch arch = c.generator();
  ad::Var x = embed(prev);
  if (arch == Arch::SimpleLstm) {
    for (std::size_t l = 0; l < state.layers.size(); ++l) {
      state.layers[l] = ad::lstm_cell_step(x, state.layers[l], bind_lstm(params_, lstm_prefix(l)));
      x = state.layers[l].h;
    }
  } else {
    if (uses_attention(arch)) {
      const ad::Var context = ad::attention(state.layers[0].h, *state.encoder_outputs);
      const ad::Var parts[] = {x, context};
      x = ad::concat(parts);
    }
    state.layers[0] = ad::lstm_cell_step(x, state.layers[0], bind_lstm(params_, "dec"));
  }
  return ad::linear(state.layers.back().h, params_["head.W"], params_["head.b"]);
}

Token feedback_token(const ad::Var& logits, Representation repr) {
  const Tensor& v = logits.value();
  if (repr == Representation::Embedding) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.numel(); ++i)
      if (v[i] > v[best]) best = i;
    return static_cast<int>(best);
  }
  return threshold_frame(v);
}

repr::Frame threshold_frame(const Tensor& logits, double threshold) {
  // sigmoid(x) >= threshold  <=>  x >= logit(threshold)
  const double cut = std::log(threshold / (1.0 - threshold));
  repr::Frame frame{};
  for (int p = 0; p < repr::kPitches; ++p) frame[p] = logits[p] >= cut ? 1 : 0;
  return frame;
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  Model model(config);
  Rng rng(seed);
  add_generator_parameters(model.generator_, config, rng);
  if (config.arch == Arch::DualTrack) add_mlp_parameters(model.mlp_, config, rng);
  return model;
}

Model Model::from_tensors(const ModelConfig& config, const ParameterSet& tensors) {
  Model model = build(config, 0);
  std::size_t used = 0;
  check_same_layout(model.generator_, tensors, "", used);
  check_same_layout(model.mlp_, tensors, "mlp.", used);
  if (used != tensors.size()) {
    throw Error(ErrorCode::InvalidConfig, "checkpoint holds tensors the config does not describe");
  }
  for (std::size_t i = 0; i < model.generator_.size(); ++i) {
    model.generator_.value(i) = tensors[model.generator_.name(i)];
  }
  for (std::size_t i = 0; i < model.mlp_.size(); ++i) {
    model.mlp_.value(i) = tensors["mlp." + model.mlp_.name(i)];
  }
  return model;
}

ParameterSet Model::all_tensors() const {
  ParameterSet all;
  for (std::size_t i = 0; i < generator_.size(); ++i) all.add(generator_.name(i), generator_.value(i));
  for (std::size_t i = 0; i < mlp_.size(); ++i) all.add("mlp." + mlp_.name(i), mlp_.value(i));
  return all;
}

std::vector<ad::Var> Model::forward(ad::Tape& tape, const BoundParameters& params,
                                    const repr::Sequence& input, const repr::Sequence& target,
                                    std::span<const bool> tf_mask) const {
  if (target.repr != config_.repr || target.size() != config_.out_len ||
      tf_mask.size() != config_.out_len) {
    throw Error(ErrorCode::ShapeMismatch,
                "target of " + std::to_string(target.size()) + " steps and mask of " +
                    std::to_string(tf_mask.size()) + ", model expects " +
                    std::to_string(config_.out_len));
  }
  SequenceGraph graph(tape, *this, params);
  DecoderState state = graph.encode(input);
  std::vector<ad::Var> logits;
  logits.reserve(target.size());
  Token prev = token_at(input, input.size() - 1);
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (t > 0) {
      prev = tf_mask[t] ? feedback_token(logits.back(), config_.repr) : token_at(target, t - 1);
    }
    logits.push_back(graph.step(state, prev));
  }
  return logits;
}

ad::Var Model::left_hand_logits(ad::Tape& tape, const BoundParameters& mlp,
                                const repr::Frame& right) const {
  if (!is_dual_track()) throw Error(ErrorCode::InvalidConfig, "model has no left-hand MLP");
  const ad::Var x = tape.constant(frame_tensor(right));
  const ad::Var h = ad::tanh(ad::linear(x, mlp["hidden.W"], mlp["hidden.b"]));
  return ad::linear(h, mlp["out.W"], mlp["out.b"]);
}

ad::Var sequence_loss(std::span<const ad::Var> logits, const repr::Sequence& target) {
  if (logits.size() != target.size() || logits.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "loss over " + std::to_string(logits.size()) +
                                              " logits for " + std::to_string(target.size()) +
                                              " targets");
  }
  std::vector<ad::Var> steps;
  steps.reserve(logits.size());
  for (std::size_t t = 0; t < logits.size(); ++t) {
    if (target.repr == Representation::Embedding) {
      steps.push_back(ad::cross_entropy_loss(logits[t], static_cast<std::size_t>(target.chords[t])));
    } else {
      steps.push_back(ad::binary_cross_entropy_loss(logits[t], frame_tensor(target.frames[t])));
    }
  }
  return ad::scale(ad::sum(ad::concat(steps)), 1.0 / static_cast<double>(steps.size()));
}

}  // namespace dtrack::models
