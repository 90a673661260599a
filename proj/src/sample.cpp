#include "dtrack/sample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dtrack/error.hpp"

namespace dtrack::sample {

namespace {

using repr::Representation;

void check_logits(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorCode::EmptyLogits, "no logits to pick from");
  for (double v : logits) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite logit");
  }
}

// Indices of the k largest logits, ties to the lower index.
std::vector<std::size_t> top_indices(std::span<const double> logits, std::size_t k) {
  std::vector<std::size_t> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

double logistic_noise(Rng& rng) { return rng.gumbel() - rng.gumbel(); }

bool is_rest(const models::Token& token) {
  if (const int* chord = std::get_if<int>(&token)) {
    return *chord == repr::ChordCorpus::kRest || *chord == repr::ChordCorpus::kUnk;
  }
  const auto& frame = std::get<repr::Frame>(token);
  return std::none_of(frame.begin(), frame.end(), [](std::uint8_t v) { return v != 0; });
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::TopK: return "topk";
    case Strategy::Gumbel: return "gumbel";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& s) {
  std::string key;
  for (char ch : s) {
    if (ch != '-' && ch != '_') key.push_back(static_cast<char>(std::tolower(ch)));
  }
  if (key == "greedy") return Strategy::Greedy;
  if (key == "topk") return Strategy::TopK;
  if (key == "gumbel") return Strategy::Gumbel;
  throw Error(ErrorCode::InvalidConfig, "unknown sampling strategy '" + s + "'");
}

void validate(const SampleConfig& config) {
  if (config.k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  if (!(config.gumbel_scale >= 0.0) || !std::isfinite(config.gumbel_scale)) {
    throw Error(ErrorCode::InvalidConfig, "gumbel_scale must be finite and >= 0");
  }
  if (!(config.pianoroll_threshold > 0.0 && config.pianoroll_threshold < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "pianoroll_threshold must lie in (0, 1)");
  }
}

std::size_t greedy_pick(std::span<const double> logits) {
  check_logits(logits);
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

std::size_t top_k_pick(std::span<const double> logits, std::size_t k, Rng& rng) {
  check_logits(logits);
  if (k < 1 || k > logits.size()) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " for " +
                                         std::to_string(logits.size()) + " logits");
  }
  const auto top = top_indices(logits, k);
  if (k == 1) return top[0];
  const double mx = logits[top[0]];
  std::vector<double> weights(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    weights[i] = std::exp(logits[top[i]] - mx);
    total += weights[i];
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += weights[i];
    if (u < acc) return top[i];
  }
  return top[k - 1];
}

std::size_t gumbel_pick(std::span<const double> logits, double scale, Rng& rng) {
  check_logits(logits);
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double score = logits[i] + scale * rng.gumbel();
    if (i == 0 || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

repr::Frame pick_frame(std::span<const double> logits, const SampleConfig& config, Rng& rng) {
  check_logits(logits);
  if (logits.size() != static_cast<std::size_t>(repr::kPitches)) {
    throw Error(ErrorCode::ShapeMismatch, "pianoroll logits need 128 entries");
  }
  const double cut = std::log(config.pianoroll_threshold / (1.0 - config.pianoroll_threshold));
  repr::Frame frame{};
  switch (config.strategy) {
    case Strategy::Greedy:
      for (int p = 0; p < repr::kPitches; ++p) frame[p] = logits[p] >= cut;
      break;
    case Strategy::Gumbel:
      // Binary Gumbel-max per pitch: on vs off logits (x, 0) each get Gumbel
      // noise; their difference is logistic.
      for (int p = 0; p < repr::kPitches; ++p) {
        frame[p] = logits[p] + config.gumbel_scale * logistic_noise(rng) >= cut;
      }
      break;
    case Strategy::TopK: {
      if (config.k > logits.size()) {
        throw Error(ErrorCode::InvalidK, "k exceeds the pitch count");
      }
      for (std::size_t p : top_indices(logits, config.k)) {
        frame[p] = logits[p] + logistic_noise(rng) >= cut;
      }
      break;
    }
  }
  return frame;
}

Generation generate(const models::Model& model, const repr::Sequence& seed_window,
                    const SampleConfig& config) {
  validate(config);
  const Representation rep = model.config().repr;
  Generation gen;
  gen.output.repr = rep;
  if (config.length == 0) return gen;

  Rng rng(config.seed);
  ad::Tape tape;
  BoundParameters params(tape, model.generator_params(), false);
  models::SequenceGraph graph(tape, model, params);
  models::DecoderState state = graph.encode(seed_window);
  models::Token prev = models::token_at(seed_window, seed_window.size() - 1);

  std::size_t rest_run = 0;
  for (std::size_t t = 0; t < config.length; ++t) {
    const ad::Var logits = graph.step(state, prev);
    const auto values = logits.value().data();
    if (rep == Representation::Embedding) {
      std::size_t pick = 0;
      switch (config.strategy) {
        case Strategy::Greedy: pick = greedy_pick(values); break;
        case Strategy::TopK: pick = top_k_pick(values, std::min(config.k, values.size()), rng); break;
        case Strategy::Gumbel: pick = gumbel_pick(values, config.gumbel_scale, rng); break;
      }
      prev = static_cast<int>(pick);
      gen.output.chords.push_back(static_cast<int>(pick));
    } else {
      const repr::Frame frame = pick_frame(values, config, rng);
      prev = frame;
      gen.output.frames.push_back(frame);
    }

    rest_run = is_rest(prev) ? rest_run + 1 : 0;
    if (config.rest_cutoff > 0 && rest_run >= config.rest_cutoff) {
      gen.saturated = true;
      gen.saturated_at = t;
      const std::size_t remaining = config.length - t - 1;
      if (rep == Representation::Embedding) {
        gen.output.chords.insert(gen.output.chords.end(), remaining, repr::ChordCorpus::kRest);
      } else {
        gen.output.frames.insert(gen.output.frames.end(), remaining, repr::Frame{});
      }
      break;
    }
  }
  return gen;
}

repr::Pianoroll to_roll(const models::Model& model, const repr::Sequence& seq,
                        const repr::GridConfig& grid) {
  if (seq.repr == Representation::Embedding) {
    if (!model.corpus) {
      throw Error(ErrorCode::InvalidConfig, "embedding model carries no chord corpus");
    }
    return repr::decode_chords(seq.chords, *model.corpus, grid);
  }
  repr::Pianoroll roll;
  roll.steps_per_beat = grid.steps_per_beat;
  roll.beats_per_bar = grid.beats_per_bar;
  roll.grid = seq.frames;
  return roll;
}

repr::Pianoroll left_hand_for(const models::Model& model, const repr::Pianoroll& right) {
  repr::Pianoroll left = right;
  ad::Tape tape;
  const BoundParameters mlp(tape, model.mlp_params(), false);
  for (std::size_t t = 0; t < right.grid.size(); ++t) {
    const ad::Var logits = model.left_hand_logits(tape, mlp, right.grid[t]);
    left.grid[t] = models::threshold_frame(logits.value(), 0.5);
  }
  return left;
}

repr::Pianoroll merge_rolls(const repr::Pianoroll& a, const repr::Pianoroll& b) {
  if (a.grid.size() != b.grid.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot merge rolls of different lengths");
  }
  repr::Pianoroll merged = a;
  for (std::size_t t = 0; t < a.grid.size(); ++t)
    for (int p = 0; p < repr::kPitches; ++p) merged.grid[t][p] = a.grid[t][p] | b.grid[t][p];
  return merged;
}

DualTrackOutput dual_track_generate(const models::Model& model, const repr::Sequence& seed_window,
                                    const SampleConfig& config, const repr::GridConfig& grid) {
  if (!model.is_dual_track()) {
    throw Error(ErrorCode::InvalidConfig, "dual_track_generate needs a dual-track model");
  }
  const Generation gen = generate(model, seed_window, config);
  DualTrackOutput out;
  out.saturated = gen.saturated;
  out.right = to_roll(model, gen.output, grid);
  out.left = left_hand_for(model, out.right);
  out.merged = merge_rolls(out.right, out.left);
  return out;
}

}  // namespace dtrack::sample
