#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "redcert/input.hpp"
#include "redcert/model.hpp"
#include "redcert/oracle.hpp"
#include "redcert/segmentation.hpp"

// Case bundles: a directory holding meta.json, the input tensor, the
// segmentation, optional per-label attribution maps and a model endpoint.
namespace redcert::bundle {

inline constexpr const char* kMetaFile = "meta.json";

struct FileRef {
  std::string path;    // relative to the bundle directory
  std::string sha256;
};

struct ModelEndpoint {
  enum class Type { planted, bridge };
  Type type = Type::planted;
  std::optional<PlantedModelSpec> planted;
  std::vector<std::string> command;  // bridge over the spawned process's stdio
  std::string socket;                // or bridge over a unix socket
};

struct BundleMeta {
  std::string schema_version = "1";
  std::string model_id;
  std::size_t n = 0;
  std::size_t m = 0;
  std::optional<Geometry> geometry;
  std::string preprocessing = "none";
  FileRef input;
  FileRef segmentation;
  std::map<std::uint32_t, FileRef> attributions;
  std::map<std::uint32_t, std::string> label_names;
  std::map<std::uint32_t, double> baseline;
  ModelEndpoint model;
  std::vector<std::string> warnings;
};

struct CaseBundle {
  std::filesystem::path dir;
  BundleMeta meta;
  InputVector input;
  Segmentation seg;
  std::map<std::uint32_t, AttributionMap> attributions;
  ModelHandle model;

  [[nodiscard]] LabelId label(std::uint32_t index) const;
};

// Parses meta.json, checks n, geometry and every file digest, and connects the
// model. Throws FormatError for any inconsistency.
CaseBundle load_bundle(const std::filesystem::path& dir);

std::string encode_meta(const BundleMeta& meta);
BundleMeta decode_meta(const std::string& text);

// Writes a self-contained bundle for a planted fixture (model spec embedded),
// with baselines for the pair and optionally occlusion attributions for both labels.
void write_fixture_bundle(const oracle::Fixture& fixture, const std::filesystem::path& dir,
                          bool with_attributions = false);

}  // namespace redcert::bundle
