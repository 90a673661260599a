#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dtrack/models.hpp"
#include "dtrack/sample.hpp"
#include "dtrack/train.hpp"

namespace dtrack::io {

using Json = nlohmann::json;

Json to_json(const models::ModelConfig& config);
Json to_json(const train::TrainConfig& config);
Json to_json(const sample::SampleConfig& config);

// Missing keys keep their defaults; unknown keys and wrong types throw
// InvalidConfig.
models::ModelConfig model_config_from_json(const Json& j);
train::TrainConfig train_config_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// 16 hex digits of FNV-1a over the compact dump.
std::string config_hash(const Json& j);

// Checkpoint plus "<path>.json" sidecar holding the model config and, for
// Embedding models, the chord corpus.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);
// `extra` keys are merged into the sidecar.
void save_model(const std::filesystem::path& checkpoint, const models::Model& model,
                const Json& extra = Json::object());
Json read_sidecar(const std::filesystem::path& checkpoint);
models::Model load_model(const std::filesystem::path& checkpoint);

}  // namespace dtrack::io
