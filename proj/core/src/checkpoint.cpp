#include "celt/checkpoint.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "celt/hash.hpp"

namespace celt {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ojson labels_to_json(const LabelSpace& l) {
  ojson j;
  j["intents"] = l.intents;
  j["user_acts"] = l.user_acts;
  j["slots"] = l.slots;
  j["system_acts"] = l.system_acts;
  return j;
}

LabelSpace labels_from_json(const nlohmann::json& j) {
  LabelSpace l;
  l.intents = j.at("intents").get<std::vector<std::string>>();
  l.user_acts = j.at("user_acts").get<std::vector<std::string>>();
  l.slots = j.at("slots").get<std::vector<std::string>>();
  l.system_acts = j.at("system_acts").get<std::vector<std::string>>();
  return l;
}

}  // namespace

CheckpointPaths checkpoint_paths(const fs::path& prefix) {
  std::string base = prefix.string();
  if (prefix.extension() == ".json") base = (prefix.parent_path() / prefix.stem()).string();
  return {base + ".json", base + ".bin", base + ".vocab.txt"};
}

std::string manifest_to_json(const CheckpointManifest& m) {
  ojson j;
  j["format_version"] = m.format_version;
  j["created"] = m.created;
  ojson lineage;
  lineage["tag"] = lineage_tag_name(m.lineage.tag);
  lineage["parent"] = lineage_tag_name(m.lineage.parent);
  lineage["history"] = m.lineage.history;
  j["lineage"] = std::move(lineage);
  j["config"] = ojson::parse(model_config_to_json(m.config));
  j["labels"] = labels_to_json(m.labels);
  j["vocab_file"] = m.vocab_file;
  j["vocab_hash"] = m.vocab_hash;
  j["threshold"] = m.threshold;
  j["run_config"] = ojson::parse(m.run_config);
  j["content_hash"] = m.content_hash;
  auto index = ojson::array();
  for (const auto& t : m.tensors) {
    ojson e;
    e["name"] = t.name;
    e["offset"] = t.offset;
    e["shape"] = t.shape;
    e["dtype"] = t.dtype;
    index.push_back(std::move(e));
  }
  j["tensors"] = std::move(index);
  return j.dump(2) + "\n";
}

CheckpointManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  CheckpointManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kCheckpointFormatVersion) {
      throw CheckpointVersionError("checkpoint format_version " +
                                   std::to_string(m.format_version) + " is not supported (" +
                                   std::to_string(kCheckpointFormatVersion) + " expected)");
    }
    m.created = j.value("created", "");
    const auto& lin = j.at("lineage");
    m.lineage.tag = lineage_tag_from_name(lin.at("tag").get<std::string>());
    m.lineage.parent = lineage_tag_from_name(lin.at("parent").get<std::string>());
    m.lineage.history = lin.at("history").get<std::vector<std::string>>();
    m.config = model_config_from_json(j.at("config").dump(), ModelConfig{});
    m.labels = labels_from_json(j.at("labels"));
    m.vocab_file = j.at("vocab_file").get<std::string>();
    m.vocab_hash = j.at("vocab_hash").get<std::string>();
    m.threshold = j.value("threshold", 0.5);
    m.run_config = j.contains("run_config") ? j.at("run_config").dump() : "{}";
    m.content_hash = j.at("content_hash").get<std::string>();
    for (const auto& e : j.at("tensors")) {
      TensorIndexEntry t;
      t.name = e.at("name").get<std::string>();
      t.offset = e.at("offset").get<std::size_t>();
      t.shape = e.at("shape").get<Shape>();
      t.dtype = e.at("dtype").get<std::string>();
      if (t.dtype != "float32") {
        throw CheckpointError("tensor '" + t.name + "' has unsupported dtype " + t.dtype);
      }
      m.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest: ") + e.what());
  }
  return m;
}

CheckpointManifest save_checkpoint(const ModelParameters<float>& params,
                                   CheckpointManifest manifest, const Vocab& vocab,
                                   const fs::path& prefix) {
  const auto paths = checkpoint_paths(prefix);
  std::string binary;
  manifest.tensors.clear();
  std::size_t offset = 0;
  for (const auto& nt : params.named_tensors()) {
    manifest.tensors.push_back({nt.name, offset, nt.tensor.shape(), "float32"});
    for (float v : nt.tensor.data()) {
      const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
      char bytes[4];
      std::memcpy(bytes, &bits, 4);
      binary.append(bytes, 4);
    }
    offset += nt.tensor.numel();
  }
  const std::string vocab_text = vocab.serialize();
  manifest.format_version = kCheckpointFormatVersion;
  manifest.content_hash = sha256_hex(binary);
  manifest.vocab_hash = sha256_hex(vocab_text);
  manifest.vocab_file = paths.vocab.filename().string();
  if (manifest.created.empty()) manifest.created = utc_now();
  if (paths.manifest.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(paths.manifest.parent_path(), ec);
  }
  write_file(paths.binary, binary);
  write_file(paths.vocab, vocab_text);
  write_file(paths.manifest, manifest_to_json(manifest));
  return manifest;
}

Checkpoint load_checkpoint(const fs::path& prefix, const ModelConfig* expected) {
  const auto paths = checkpoint_paths(prefix);
  Checkpoint ck;
  ck.manifest = manifest_from_json(read_file(paths.manifest));
  const auto& m = ck.manifest;

  const std::string binary = read_file(paths.binary);
  std::size_t total = 0;
  for (const auto& t : m.tensors) total = std::max(total, t.offset + shape_numel(t.shape));
  if (binary.size() != total * 4) {
    throw CheckpointSizeError("checkpoint binary " + paths.binary.string() + " holds " +
                              std::to_string(binary.size()) + " bytes, manifest expects " +
                              std::to_string(total * 4));
  }
  if (sha256_hex(binary) != m.content_hash) {
    throw CheckpointHashError("checkpoint binary " + paths.binary.string() +
                              " does not match the manifest content hash");
  }
  const fs::path vocab_path = paths.manifest.parent_path() / m.vocab_file;
  const std::string vocab_text = read_file(vocab_path);
  if (sha256_hex(vocab_text) != m.vocab_hash) {
    throw CheckpointHashError("vocabulary " + vocab_path.string() +
                              " does not match the manifest vocab hash");
  }
  ck.vocab = Vocab::load(vocab_path);

  ModelConfig config = m.config;
  if (expected) {
    // Keep the stored ablation switches, check the architecture.
    config = *expected;
  }
  Rng rng(0);
  ck.params = init_parameters<float>(config, rng);
  std::map<std::string, const TensorIndexEntry*> index;
  for (const auto& t : m.tensors) {
    if (!index.emplace(t.name, &t).second) {
      throw CheckpointError("tensor '" + t.name + "' appears twice in the manifest");
    }
  }
  const auto named = ck.params.named_tensors();
  if (named.size() != index.size()) {
    throw CheckpointShapeError("checkpoint has " + std::to_string(index.size()) +
                               " tensors, the model expects " + std::to_string(named.size()));
  }
  for (const auto& nt : named) {
    const auto it = index.find(nt.name);
    if (it == index.end()) {
      throw CheckpointShapeError("tensor '" + nt.name + "' is missing from the checkpoint");
    }
    const auto& entry = *it->second;
    if (entry.shape != nt.tensor.shape()) {
      throw CheckpointShapeError("tensor '" + nt.name + "' has shape " +
                                 shape_str(entry.shape) + " in the checkpoint, expected " +
                                 shape_str(nt.tensor.shape()));
    }
    Tensor<float> t = nt.tensor;
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, binary.data() + (entry.offset + i) * 4, 4);
      data[i] = std::bit_cast<float>(to_little(bits));
    }
  }
  if (expected) ck.manifest.config = *expected;
  return ck;
}

}  // namespace celt
