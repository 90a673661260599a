#include "dtrack/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <numeric>

#include <spdlog/spdlog.h>

#include "dtrack/error.hpp"
#include "dtrack/optim.hpp"

namespace dtrack::train {

namespace {

using models::Model;
using repr::Representation;

struct ItemResult {
  double loss = 0.0;
  Gradients grads;
};

[[noreturn]] void non_finite(const std::string& phase, int epoch, std::size_t step,
                             const std::string& detail) {
  throw Error(ErrorCode::NonFiniteLoss, phase + " epoch " + std::to_string(epoch) + " step " +
                                            std::to_string(step) + ": " + detail);
}

// Runs `count` independent items on separate tapes and returns their results
// in item order. Work is spread over OpenMP threads; the caller reduces
// sequentially so results do not depend on the thread count.
template <typename Fn>
std::vector<ItemResult> run_items(std::size_t count, Fn&& fn) {
  std::vector<ItemResult> results(count);
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

// Averages item gradients into `total` and returns the mean loss.
double reduce_items(const std::vector<ItemResult>& items, Gradients& total) {
  for (Tensor& g : total) g.fill(0.0);
  double loss = 0.0;
  for (const ItemResult& item : items) {
    loss += item.loss;
    for (std::size_t p = 0; p < total.size(); ++p) {
      auto dst = total[p].data();
      auto src = item.grads[p].data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(items.size());
  for (Tensor& g : total)
    for (double& v : g.data()) v *= inv;
  return loss * inv;
}

using Mask = std::unique_ptr<bool[]>;

ItemResult window_item(const Model& model, const repr::WindowPair& pair, const Mask& mask) {
  ad::Tape tape;
  BoundParameters bound(tape, model.generator_params());
  const auto logits = model.forward(tape, bound, pair.input, pair.target,
                                    std::span<const bool>(mask.get(), model.config().out_len));
  const ad::Var loss = models::sequence_loss(logits, pair.target);
  tape.backward(loss);
  ItemResult r;
  r.loss = loss.value()[0];
  r.grads = zero_gradients(model.generator_params());
  bound.accumulate_into(r.grads);
  return r;
}

ItemResult mlp_item(const Model& model, const FramePair& pair) {
  ad::Tape tape;
  BoundParameters bound(tape, model.mlp_params());
  const ad::Var logits = model.left_hand_logits(tape, bound, pair.right);
  const ad::Var loss = ad::binary_cross_entropy_loss(logits, models::frame_tensor(pair.left));
  tape.backward(loss);
  ItemResult r;
  r.loss = loss.value()[0];
  r.grads = zero_gradients(model.mlp_params());
  bound.accumulate_into(r.grads);
  return r;
}

void apply_update(ParameterSet& params, Gradients& grads, AdamState& state,
                  const TrainConfig& config) {
  if (config.clip_norm) clip_grad_norm(grads, *config.clip_norm);
  adam_step(params, grads, state, AdamOptions{config.lr});
}

class Trainer {
 public:
  Trainer(Model& model, const TrainData& data, const TrainConfig& config)
      : model_(model),
        data_(data),
        config_(config),
        rng_(config.seed),
        schedule_(config.tf_schedule.empty() ? default_schedule(config.epochs) : config.tf_schedule),
        gen_state_(model.generator_params()),
        gen_grads_(zero_gradients(model.generator_params())),
        mlp_state_(model.mlp_params()),
        mlp_grads_(zero_gradients(model.mlp_params())) {}

  double generator_epoch(int epoch) {
    const double p = tf_rate_at(schedule_, epoch);
    std::vector<std::size_t> order(data_.windows.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(std::span<std::size_t>(order));

    double total = 0.0;
    std::size_t step = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), begin + config_.batch_size);
      // Masks are drawn before the parallel region so RNG consumption is
      // ordered by a single stream.
      const std::size_t out_len = model_.config().out_len;
      std::vector<Mask> masks;
      for (std::size_t i = begin; i < end; ++i) {
        Mask mask(new bool[out_len]);
        for (std::size_t t = 0; t < out_len; ++t) mask[t] = tf_decide(p, rng_);
        masks.push_back(std::move(mask));
      }
      std::vector<ItemResult> items;
      try {
        items = run_items(end - begin, [&](std::size_t k) {
          return window_item(model_, data_.windows[order[begin + k]], masks[k]);
        });
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteValue) non_finite("generator", epoch, step, e.what());
        throw;
      }
      const double loss = reduce_items(items, gen_grads_);
      if (!std::isfinite(loss)) non_finite("generator", epoch, step, "loss is not finite");
      apply_update(model_.generator_params(), gen_grads_, gen_state_, config_);
      total += loss * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(order.size());
  }

  double mlp_epoch(int epoch) {
    std::vector<std::size_t> order(data_.hand_pairs.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t step = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config_.mlp_batch_size, ++step) {
      const std::size_t end = std::min(order.size(), begin + config_.mlp_batch_size);
      std::vector<ItemResult> items;
      try {
        items = run_items(end - begin, [&](std::size_t k) {
          return mlp_item(model_, data_.hand_pairs[order[begin + k]]);
        });
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteValue) non_finite("mlp", epoch, step, e.what());
        throw;
      }
      const double loss = reduce_items(items, mlp_grads_);
      if (!std::isfinite(loss)) non_finite("mlp", epoch, step, "loss is not finite");
      apply_update(model_.mlp_params(), mlp_grads_, mlp_state_, config_);
      total += loss * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(order.size());
  }

 private:
  Model& model_;
  const TrainData& data_;
  const TrainConfig& config_;
  Rng rng_;
  TfSchedule schedule_;
  AdamState gen_state_;
  Gradients gen_grads_;
  AdamState mlp_state_;
  Gradients mlp_grads_;
};

void check_data(const Model& model, const TrainData& data) {
  if (data.windows.empty()) throw Error(ErrorCode::EmptyDataset, "no training windows");
  const auto& c = model.config();
  for (const auto& w : data.windows) {
    if (w.input.repr != c.repr || w.target.repr != c.repr) {
      throw Error(ErrorCode::InvalidConfig, "dataset is " + repr::to_string(w.input.repr) +
                                                ", model expects " + repr::to_string(c.repr));
    }
    if (w.input.size() != c.in_len || w.target.size() != c.out_len) {
      throw Error(ErrorCode::ShapeMismatch, "window lengths differ from the model config");
    }
  }
  if (model.is_dual_track() && data.hand_pairs.empty()) {
    throw Error(ErrorCode::EmptyDataset, "dual-track training needs hand pairs");
  }
}

}  // namespace

std::string to_string(LossKind k) {
  return k == LossKind::CrossEntropy ? "cross-entropy" : "binary-cross-entropy";
}

std::string to_string(DualTrackMode m) {
  return m == DualTrackMode::Sequential ? "sequential" : "joint";
}

LossKind loss_from_string(const std::string& s) {
  if (s == "cross-entropy" || s == "CrossEntropy") return LossKind::CrossEntropy;
  if (s == "binary-cross-entropy" || s == "BinaryCrossEntropy") return LossKind::BinaryCrossEntropy;
  throw Error(ErrorCode::InvalidConfig, "unknown loss '" + s + "'");
}

DualTrackMode dual_track_mode_from_string(const std::string& s) {
  if (s == "sequential") return DualTrackMode::Sequential;
  if (s == "joint") return DualTrackMode::Joint;
  throw Error(ErrorCode::InvalidConfig, "unknown dual-track mode '" + s + "'");
}

void validate(const TrainConfig& config) {
  if (config.epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
  if (config.batch_size == 0 || config.mlp_batch_size == 0) {
    throw Error(ErrorCode::InvalidConfig, "batch sizes must be positive");
  }
  if (!(config.lr >= 0.0) || !std::isfinite(config.lr)) {
    throw Error(ErrorCode::InvalidConfig, "learning rate must be finite and >= 0");
  }
  if (config.clip_norm && !(*config.clip_norm > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "clip_norm must be positive");
  }
  for (std::size_t i = 0; i < config.tf_schedule.size(); ++i) {
    const auto [start, p] = config.tf_schedule[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::InvalidRate, "teacher-forcing rate " + std::to_string(p));
    }
    if (i > 0 && start <= config.tf_schedule[i - 1].first) {
      throw Error(ErrorCode::InvalidConfig, "schedule epochs must strictly increase");
    }
  }
}

TfSchedule default_schedule(int epochs) {
  const TfSchedule wanted = {{0, 0.0}, {epochs / 2, 0.2}, {3 * epochs / 4, 0.5}};
  TfSchedule schedule;
  for (const auto& entry : wanted) {
    if (schedule.empty() || entry.first > schedule.back().first) schedule.push_back(entry);
  }
  return schedule;
}

double tf_rate_at(const TfSchedule& schedule, int epoch) {
  double p = 0.0;
  for (const auto& [start, rate] : schedule) {
    if (start <= epoch) p = rate;
  }
  return p;
}

bool tf_decide(double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidRate, "teacher-forcing rate " + std::to_string(p));
  }
  return rng.uniform() < p;
}

TrainReport train(Model& model, const TrainData& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  validate(config);
  check_data(model, data);
  const auto& mc = model.config();
  const LossKind expected = mc.repr == Representation::Embedding ? LossKind::CrossEntropy
                                                                 : LossKind::BinaryCrossEntropy;
  if (config.loss && *config.loss != expected) {
    throw Error(ErrorCode::InvalidConfig, to_string(*config.loss) + " does not fit the " +
                                              repr::to_string(mc.repr) + " representation");
  }

  const auto started = std::chrono::steady_clock::now();
  Trainer trainer(model, data, config);
  TrainReport report;
  const bool dual = model.is_dual_track();
  const bool joint = dual && config.dual_track_mode == DualTrackMode::Joint;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = trainer.generator_epoch(epoch);
    report.epoch_loss.push_back(loss);
    spdlog::debug("epoch {} loss {:.6f}", epoch, loss);
    if (joint) report.mlp_epoch_loss.push_back(trainer.mlp_epoch(epoch));
    if (on_epoch) on_epoch(epoch, loss);
  }

  if (dual && !joint) {
    const std::uint64_t before = model.generator_params().checksum();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      report.mlp_epoch_loss.push_back(trainer.mlp_epoch(epoch));
      spdlog::debug("mlp epoch {} loss {:.6f}", epoch, report.mlp_epoch_loss.back());
    }
    const std::uint64_t after = model.generator_params().checksum();
    report.generator_checksum_around_mlp = std::make_pair(before, after);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

double teacher_forced_accuracy(const Model& model, const std::vector<repr::WindowPair>& windows) {
  if (model.config().repr != Representation::Embedding) {
    throw Error(ErrorCode::InvalidConfig, "chord accuracy needs an embedding model");
  }
  std::size_t hits = 0, total = 0;
  const std::unique_ptr<bool[]> mask(new bool[model.config().out_len]());
  for (const auto& w : windows) {
    ad::Tape tape;
    BoundParameters bound(tape, model.generator_params());
    const auto logits = model.forward(tape, bound, w.input, w.target,
                                      std::span<const bool>(mask.get(), model.config().out_len));
    for (std::size_t t = 0; t < logits.size(); ++t) {
      const auto pick = std::get<int>(models::feedback_token(logits[t], Representation::Embedding));
      hits += pick == w.target.chords[t];
      ++total;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

double evaluate_loss(const Model& model, const std::vector<repr::WindowPair>& windows) {
  if (windows.empty()) throw Error(ErrorCode::EmptyDataset, "no windows to evaluate");
  const std::unique_ptr<bool[]> mask(new bool[model.config().out_len]());
  double total = 0.0;
  for (const auto& w : windows) {
    ad::Tape tape;
    BoundParameters bound(tape, model.generator_params());
    const auto logits = model.forward(tape, bound, w.input, w.target,
                                      std::span<const bool>(mask.get(), model.config().out_len));
    total += models::sequence_loss(logits, w.target).value()[0];
  }
  return total / static_cast<double>(windows.size());
}

}  // namespace dtrack::train
