#include "dtrack/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dtrack/checkpoint.hpp"
#include "dtrack/error.hpp"

namespace dtrack::io {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw Error(ErrorCode::InvalidConfig, std::string("unknown ") + what + " key '" + key + "'");
    }
  }
}

template <class T>
void get_if(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

Json to_json(const models::ModelConfig& c) {
  return {
      {"arch", models::to_string(c.arch)},
      {"generator_arch", models::to_string(c.generator_arch)},
      {"repr", repr::to_string(c.repr)},
      {"hidden_size", c.hidden_size},
      {"embedding_size", c.embedding_size},
      {"num_lstm_layers", c.num_lstm_layers},
      {"conv_time_kernel", c.conv_time_kernel},
      {"conv_pitch_kernel", c.conv_pitch_kernel},
      {"corpus_size", c.corpus_size},
      {"in_len", c.in_len},
      {"out_len", c.out_len},
      {"mlp_hidden", c.mlp_hidden},
  };
}

models::ModelConfig model_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"arch", "generator_arch", "repr", "hidden_size", "embedding_size", "num_lstm_layers",
                  "conv_time_kernel", "conv_pitch_kernel", "corpus_size", "in_len", "out_len",
                  "mlp_hidden"},
                 "model config");
  models::ModelConfig c;
  std::string s;
  if (j.contains("arch")) {
    get_if(j, "arch", s);
    c.arch = models::arch_from_string(s);
  }
  if (j.contains("generator_arch")) {
    get_if(j, "generator_arch", s);
    c.generator_arch = models::arch_from_string(s);
  }
  if (j.contains("repr")) {
    get_if(j, "repr", s);
    c.repr = repr::representation_from_string(s);
  }
  get_if(j, "hidden_size", c.hidden_size);
  get_if(j, "embedding_size", c.embedding_size);
  get_if(j, "num_lstm_layers", c.num_lstm_layers);
  get_if(j, "conv_time_kernel", c.conv_time_kernel);
  get_if(j, "conv_pitch_kernel", c.conv_pitch_kernel);
  get_if(j, "corpus_size", c.corpus_size);
  get_if(j, "in_len", c.in_len);
  get_if(j, "out_len", c.out_len);
  get_if(j, "mlp_hidden", c.mlp_hidden);
  return c;
}

Json to_json(const train::TrainConfig& c) {
  Json schedule = Json::array();
  for (const auto& [epoch, p] : c.tf_schedule) schedule.push_back({epoch, p});
  Json j = {
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"tf_schedule", schedule},
      {"seed", c.seed},
      {"dual_track_mode", train::to_string(c.dual_track_mode)},
      {"mlp_batch_size", c.mlp_batch_size},
  };
  j["loss"] = c.loss ? Json(train::to_string(*c.loss)) : Json(nullptr);
  j["clip_norm"] = c.clip_norm ? Json(*c.clip_norm) : Json(nullptr);
  return j;
}

train::TrainConfig train_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"epochs", "lr", "batch_size", "tf_schedule", "loss", "clip_norm", "seed",
                  "dual_track_mode", "mlp_batch_size"},
                 "train config");
  train::TrainConfig c;
  get_if(j, "epochs", c.epochs);
  get_if(j, "lr", c.lr);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "seed", c.seed);
  get_if(j, "mlp_batch_size", c.mlp_batch_size);
  get_if(j, "tf_schedule", c.tf_schedule);
  if (j.contains("loss") && !j["loss"].is_null()) {
    std::string s;
    get_if(j, "loss", s);
    c.loss = train::loss_from_string(s);
  }
  if (j.contains("clip_norm") && !j["clip_norm"].is_null()) {
    double v = 0.0;
    get_if(j, "clip_norm", v);
    c.clip_norm = v;
  }
  if (j.contains("dual_track_mode")) {
    std::string s;
    get_if(j, "dual_track_mode", s);
    c.dual_track_mode = train::dual_track_mode_from_string(s);
  }
  return c;
}

Json to_json(const sample::SampleConfig& c) {
  return {
      {"strategy", sample::to_string(c.strategy)},
      {"k", c.k},
      {"gumbel_scale", c.gumbel_scale},
      {"length", c.length},
      {"pianoroll_threshold", c.pianoroll_threshold},
      {"seed", c.seed},
      {"rest_cutoff", c.rest_cutoff},
  };
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

void save_model(const std::filesystem::path& checkpoint, const models::Model& model, const Json& extra) {
  save_checkpoint(checkpoint, model.all_tensors());
  Json side = extra.is_object() ? extra : Json::object();
  side["format"] = "dtrack-model";
  side["version"] = 1;
  side["model"] = to_json(model.config());
  side["corpus"] = model.corpus ? Json::parse(repr::corpus_to_json(*model.corpus)) : Json(nullptr);
  write_text_file(sidecar_path(checkpoint), side.dump(2) + "\n");
}

Json read_sidecar(const std::filesystem::path& checkpoint) {
  Json side = read_json_file(sidecar_path(checkpoint));
  if (!side.is_object() || side.value("format", "") != "dtrack-model" || !side.contains("model")) {
    throw Error(ErrorCode::Format, sidecar_path(checkpoint).string() + " is not a model sidecar");
  }
  return side;
}

models::Model load_model(const std::filesystem::path& checkpoint) {
  const Json side = read_sidecar(checkpoint);
  const auto config = model_config_from_json(side["model"]);
  auto model = models::Model::from_tensors(config, load_checkpoint(checkpoint));
  if (side.contains("corpus") && !side["corpus"].is_null()) {
    model.corpus = repr::corpus_from_json(side["corpus"].dump());
    if (model.corpus->size() != config.corpus_size) {
      throw Error(ErrorCode::InvalidConfig, "corpus size in sidecar disagrees with the model config");
    }
  }
  return model;
}

}  // namespace dtrack::io
