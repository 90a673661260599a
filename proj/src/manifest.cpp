#include "dtrack/manifest.hpp"

#include <algorithm>
#include <fstream>

#include "dtrack/error.hpp"

namespace dtrack {

void ProjectManifest::record(ArtifactRecord artifact) {
  auto it = std::find_if(artifacts.begin(), artifacts.end(),
                         [&](const ArtifactRecord& a) { return a.path == artifact.path; });
  if (it != artifacts.end()) {
    *it = std::move(artifact);
  } else {
    artifacts.push_back(std::move(artifact));
  }
}

const ArtifactRecord* ProjectManifest::find(const std::string& path) const {
  for (const auto& a : artifacts)
    if (a.path == path) return &a;
  return nullptr;
}

nlohmann::json ProjectManifest::to_json() const {
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& a : artifacts) {
    arts.push_back({{"kind", a.kind}, {"path", a.path}, {"config_hash", a.config_hash}, {"inputs", a.inputs}});
  }
  return {{"format", "dtrack-manifest"},
          {"version", 1},
          {"corpus_paths", corpus_paths},
          {"representation", representation},
          {"artifacts", arts}};
}

ProjectManifest ProjectManifest::from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "dtrack-manifest") throw Error(ErrorCode::Format, "not a dtrack manifest");
    ProjectManifest m;
    m.corpus_paths = j.value("corpus_paths", std::vector<std::string>{});
    m.representation = j.value("representation", "");
    for (const auto& a : j.value("artifacts", nlohmann::json::array())) {
      m.artifacts.push_back({a.at("kind").get<std::string>(), a.at("path").get<std::string>(),
                             a.at("config_hash").get<std::string>(),
                             a.value("inputs", std::vector<std::string>{})});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("manifest: ") + e.what());
  }
}

ProjectManifest ProjectManifest::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
  return from_json(j);
}

void ProjectManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json().dump(2) << "\n";
}

}  // namespace dtrack
