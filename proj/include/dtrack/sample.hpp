#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "dtrack/models.hpp"
#include "dtrack/repr.hpp"
#include "dtrack/rng.hpp"

namespace dtrack::sample {

enum class Strategy { Greedy, TopK, Gumbel };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SampleConfig {
  Strategy strategy = Strategy::Gumbel;
  std::size_t k = 5;
  double gumbel_scale = 1.0;
  std::size_t length = 288;
  double pianoroll_threshold = 0.5;
  std::uint64_t seed = 0;
  // Consecutive rest steps after which generation is declared saturated
  // (two bars at the default grid). 0 disables the cutoff.
  std::size_t rest_cutoff = 144;
};

// Throws InvalidK for k == 0 and InvalidConfig for a negative scale or a
// threshold outside (0, 1).
void validate(const SampleConfig& config);

// argmax, lowest index on ties. Throws EmptyLogits / NonFiniteValue.
std::size_t greedy_pick(std::span<const double> logits);

// Samples from softmax restricted to the k largest logits. Throws InvalidK
// unless 1 <= k <= logits.size().
std::size_t top_k_pick(std::span<const double> logits, std::size_t k, Rng& rng);

// argmax_i(logits_i + scale * g_i) with g_i i.i.d. standard Gumbel.
std::size_t gumbel_pick(std::span<const double> logits, double scale, Rng& rng);

// Multi-hot frame from 128 per-pitch logits: each pitch is an independent
// on/off decision, perturbed per the strategy and then thresholded.
repr::Frame pick_frame(std::span<const double> logits, const SampleConfig& config, Rng& rng);

struct Generation {
  repr::Sequence output;  // exactly config.length steps
  bool saturated = false;
  std::size_t saturated_at = 0;  // step where the rest run reached the cutoff
};

// Encodes seed_window, then decodes config.length steps feeding back each
// picked token. After saturation the remaining steps are rests.
Generation generate(const models::Model& model, const repr::Sequence& seed_window,
                    const SampleConfig& config);

// Pianoroll view of a generated sequence; chord sequences decode through the
// model's corpus.
repr::Pianoroll to_roll(const models::Model& model, const repr::Sequence& seq,
                        const repr::GridConfig& grid = {});

// left[t] = threshold(MLP(right[t]), 0.5), frame by frame.
repr::Pianoroll left_hand_for(const models::Model& model, const repr::Pianoroll& right);

// Elementwise OR of two equally long rolls.
repr::Pianoroll merge_rolls(const repr::Pianoroll& a, const repr::Pianoroll& b);

struct DualTrackOutput {
  repr::Pianoroll right;
  repr::Pianoroll left;
  repr::Pianoroll merged;
  bool saturated = false;
};

DualTrackOutput dual_track_generate(const models::Model& model, const repr::Sequence& seed_window,
                                    const SampleConfig& config, const repr::GridConfig& grid = {});

}  // namespace dtrack::sample
