#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "celt/dialogue.hpp"
#include "celt/model.hpp"
#include "celt/tokenizer.hpp"
#include "celt/training.hpp"

namespace celt {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointHashError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointShapeError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointSizeError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct TensorIndexEntry {
  std::string name;
  std::size_t offset = 0;  // in elements from the start of the binary
  Shape shape;
  std::string dtype = "float32";
  friend bool operator==(const TensorIndexEntry&, const TensorIndexEntry&) = default;
};

struct CheckpointManifest {
  int format_version = kCheckpointFormatVersion;
  ModelLineage lineage;
  ModelConfig config;
  LabelSpace labels;
  std::string vocab_file;  // relative to the manifest
  std::string vocab_hash;
  std::vector<TensorIndexEntry> tensors;
  std::string content_hash;  // SHA-256 of the binary
  std::string created;       // ISO-8601 UTC
  double threshold = 0.5;
  /// Effective run configuration echoed from the command line.
  std::string run_config = "{}";
};

struct Checkpoint {
  ModelParameters<float> params;
  CheckpointManifest manifest;
  Vocab vocab;
};

/// Paths of the three files for a prefix: <prefix>.json, <prefix>.bin and
/// <prefix>.vocab.txt. A trailing ".json" on the prefix is stripped.
struct CheckpointPaths {
  std::filesystem::path manifest, binary, vocab;
};
CheckpointPaths checkpoint_paths(const std::filesystem::path& prefix);

/// Writes the manifest, the flat little-endian float32 binary in index
/// order and a copy of the vocabulary. The tensor index, hashes and
/// (when empty) the timestamp are filled in. Throws IoError when a file
/// cannot be written.
CheckpointManifest save_checkpoint(const ModelParameters<float>& params,
                                   CheckpointManifest manifest, const Vocab& vocab,
                                   const std::filesystem::path& prefix);

/// Loads and validates a checkpoint. With `expected`, tensor shapes are
/// checked against that architecture instead of the stored one.
Checkpoint load_checkpoint(const std::filesystem::path& prefix,
                           const ModelConfig* expected = nullptr);

std::string manifest_to_json(const CheckpointManifest& manifest);
CheckpointManifest manifest_from_json(const std::string& json);

}  // namespace celt
