#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace dtrack {

struct ArtifactRecord {
  std::string kind;  // corpus, checkpoint, loss-csv, midi, report, image
  std::string path;
  std::string config_hash;
  std::vector<std::string> inputs;

  friend bool operator==(const ArtifactRecord&, const ArtifactRecord&) = default;
};

// Index of a project's inputs and derived artifacts. Each artifact carries
// the hash of the configuration that produced it.
struct ProjectManifest {
  std::vector<std::string> corpus_paths;
  std::string representation;
  std::vector<ArtifactRecord> artifacts;

  // Replaces any record with the same path.
  void record(ArtifactRecord artifact);
  const ArtifactRecord* find(const std::string& path) const;

  nlohmann::json to_json() const;
  static ProjectManifest from_json(const nlohmann::json& j);

  // Missing file yields an empty manifest.
  static ProjectManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const ProjectManifest&, const ProjectManifest&) = default;
};

}  // namespace dtrack
