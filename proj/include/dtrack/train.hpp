#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtrack/models.hpp"
#include "dtrack/repr.hpp"
#include "dtrack/rng.hpp"

namespace dtrack::train {

// (epoch_start, p) pairs with strictly increasing epoch_start.
using TfSchedule = std::vector<std::pair<int, double>>;

enum class LossKind { CrossEntropy, BinaryCrossEntropy };
enum class DualTrackMode { Sequential, Joint };

std::string to_string(LossKind k);
std::string to_string(DualTrackMode m);
LossKind loss_from_string(const std::string& s);
DualTrackMode dual_track_mode_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  std::size_t batch_size = 4;
  TfSchedule tf_schedule;  // empty: default_schedule(epochs)
  std::optional<LossKind> loss;  // empty: chosen from the representation
  std::optional<double> clip_norm;
  std::uint64_t seed = 0;
  DualTrackMode dual_track_mode = DualTrackMode::Sequential;
  std::size_t mlp_batch_size = 64;
};

// Throws InvalidRate / InvalidConfig.
void validate(const TrainConfig& config);

// [(0, 0.0), (E/2, 0.2), (3E/4, 0.5)], with entries that would not strictly
// increase dropped for very small E.
TfSchedule default_schedule(int epochs);

// p of the last entry whose start is <= epoch.
double tf_rate_at(const TfSchedule& schedule, int epoch);

// True (feed the model's own previous output) with probability p. Always
// draws exactly one uniform from rng. Throws InvalidRate outside [0, 1].
bool tf_decide(double p, Rng& rng);

struct FramePair {
  repr::Frame right;
  repr::Frame left;
};

struct TrainData {
  std::vector<repr::WindowPair> windows;
  // Per-timestamp hand pairs for the dual-track MLP.
  std::vector<FramePair> hand_pairs;
};

struct TrainReport {
  std::vector<double> epoch_loss;      // generator
  std::vector<double> mlp_epoch_loss;  // DualTrack only
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  // Generator checksum around the MLP phase of sequential dual-track training.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> generator_checksum_around_mlp;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

// Adam over mini-batches. Per batch: draw teacher-forcing masks with the
// epoch's scheduled p, forward every window, average the per-window losses,
// backpropagate, clip if configured, update. Sequential dual-track training
// then freezes the generator and fits the left-hand MLP on hand_pairs.
// Throws EmptyDataset, NonFiniteLoss.
TrainReport train(models::Model& model, const TrainData& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Fraction of target steps whose argmax chord matches under full teacher
// forcing (Embedding models).
double teacher_forced_accuracy(const models::Model& model, const std::vector<repr::WindowPair>& windows);

// Mean sequence loss over windows with an all-false mask; no update.
double evaluate_loss(const models::Model& model, const std::vector<repr::WindowPair>& windows);

}  // namespace dtrack::train
