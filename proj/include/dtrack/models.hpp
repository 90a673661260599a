#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dtrack/layers.hpp"
#include "dtrack/repr.hpp"

namespace dtrack::models {

using repr::Representation;

enum class Arch { SimpleLstm, EncDec, AttnEncDec, CnnAttnEncDec, DualTrack };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& s);

struct ModelConfig {
  Arch arch = Arch::AttnEncDec;
  // Right-hand generator of a DualTrack model.
  Arch generator_arch = Arch::AttnEncDec;
  Representation repr = Representation::Pianoroll;
  std::size_t hidden_size = 256;
  std::size_t embedding_size = 200;
  std::size_t num_lstm_layers = 2;  // SimpleLstm only
  std::size_t conv_time_kernel = 10;
  std::size_t conv_pitch_kernel = 11;
  std::size_t corpus_size = 0;  // Embedding only
  std::size_t in_len = 288;
  std::size_t out_len = 288;
  std::size_t mlp_hidden = 256;

  Arch generator() const { return arch == Arch::DualTrack ? generator_arch : arch; }
  std::size_t input_width() const {
    return repr == Representation::Embedding ? embedding_size : repr::kPitches;
  }
  std::size_t output_width() const {
    return repr == Representation::Embedding ? corpus_size : repr::kPitches;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws InvalidConfig for inconsistent settings, e.g. the CNN front-end with
// the Embedding representation.
void validate(const ModelConfig& config);

// One decoder input: a chord index or a pianoroll frame.
using Token = std::variant<int, repr::Frame>;

Token token_at(const repr::Sequence& seq, std::size_t t);

struct DecoderState {
  std::vector<ad::LstmState> layers;
  std::optional<ad::Var> encoder_outputs;  // [in_len, H], attention models
};

class Model;

// Graph construction for one model on one tape.
class SequenceGraph {
 public:
  SequenceGraph(ad::Tape& tape, const Model& model, const BoundParameters& params);

  // Consumes the input window; the returned state is ready for the first
  // decode step, whose input is the last input token.
  DecoderState encode(const repr::Sequence& input);
  // Feeds one token and returns the step's output logits.
  ad::Var step(DecoderState& state, const Token& prev);

 private:
  ad::Var embed(const Token& token);
  ad::Var zeros(std::size_t n);

  ad::Tape& tape_;
  const Model& model_;
  const BoundParameters& params_;
};

// Token fed back in free-running mode: argmax chord (lowest index on ties) or
// the frame with pitches whose logit is >= 0 (sigmoid >= 0.5).
Token feedback_token(const ad::Var& logits, Representation repr);

class Model {
 public:
  // Deterministic per seed.
  static Model build(const ModelConfig& config, std::uint64_t seed);
  // Restores from a flat tensor set (generator names plus "mlp.*"); throws
  // InvalidConfig when names or shapes differ from what config implies.
  static Model from_tensors(const ModelConfig& config, const ParameterSet& tensors);

  const ModelConfig& config() const { return config_; }
  ParameterSet& generator_params() { return generator_; }
  const ParameterSet& generator_params() const { return generator_; }
  ParameterSet& mlp_params() { return mlp_; }
  const ParameterSet& mlp_params() const { return mlp_; }
  bool is_dual_track() const { return config_.arch == Arch::DualTrack; }

  ParameterSet all_tensors() const;

  // Chord vocabulary for Embedding models; needed to decode generated chords.
  std::optional<repr::ChordCorpus> corpus;

  // Logits for every target step. tf_mask[t] = true feeds the model's own
  // step t-1 prediction at decode step t instead of target[t-1]; tf_mask[0]
  // is unused because step 0 always reads the last input token.
  std::vector<ad::Var> forward(ad::Tape& tape, const BoundParameters& params,
                               const repr::Sequence& input, const repr::Sequence& target,
                               std::span<const bool> tf_mask) const;

  // Left-hand logits [128] for one right-hand frame (DualTrack only).
  ad::Var left_hand_logits(ad::Tape& tape, const BoundParameters& mlp,
                           const repr::Frame& right) const;

 private:
  explicit Model(ModelConfig config) : config_(std::move(config)) {}

  ModelConfig config_;
  ParameterSet generator_;
  ParameterSet mlp_;
};

Tensor frame_tensor(const repr::Frame& frame);

// Mean over steps of the per-step loss: cross entropy against the target
// chord (Embedding) or the summed per-pitch binary cross entropy against the
// target frame (Pianoroll).
ad::Var sequence_loss(std::span<const ad::Var> logits, const repr::Sequence& target);

// Left-hand frame from MLP logits: on where sigmoid >= 0.5.
repr::Frame threshold_frame(const Tensor& logits, double threshold = 0.5);

}  // namespace dtrack::models
