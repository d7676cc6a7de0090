#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "celt/error.hpp"

namespace celt {

enum class Speaker { kUser, kSystem };

struct SystemAct {
  std::string act_type;
  std::optional<std::string> slot;

  /// Vocabulary key: "act(slot)" or "act".
  std::string key() const;
  friend bool operator==(const SystemAct&, const SystemAct&) = default;
};

struct SlotSpan {
  std::string slot;
  std::size_t start_word = 0;
  std::size_t end_word = 0;  // exclusive

  friend auto operator<=>(const SlotSpan&, const SlotSpan&) = default;
};

struct SemanticFrame {
  /// A single intent. Multi-intent samples (supervised adaptive training
  /// corpora only) join atomic intents with '+'.
  std::string intent;
  std::set<std::string> user_acts;
  std::vector<SlotSpan> slots;

  friend bool operator==(const SemanticFrame&, const SemanticFrame&) = default;
};

struct Turn {
  Speaker speaker = Speaker::kUser;
  std::string utterance;
  std::vector<SystemAct> system_acts;
  std::optional<SemanticFrame> labels;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// Sorted label inventories. Slot tags are "O", then "B-x", "I-x" for
/// every slot x in sorted order.
struct LabelSpace {
  std::vector<std::string> intents;
  std::vector<std::string> user_acts;
  std::vector<std::string> slots;
  std::vector<std::string> system_acts;

  std::vector<std::string> slot_tags() const;
  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  LabelSpace labels;

  std::size_t user_turn_count() const;
  std::size_t labeled_turn_count() const;
  /// True when some labeled turn carries a nonempty user-act set.
  bool has_user_acts() const;
  bool has_multi_intent() const;
};

// --- errors ---------------------------------------------------------------

class CorpusError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class CorpusParseError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};
class CorpusSchemaError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};
class SpanOverlapError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};
class SpanRangeError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

// --- corpus I/O -----------------------------------------------------------

Corpus parse_corpus(std::string_view json_text);
Corpus load_corpus(const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Rebuilds the sorted label vocabularies from the dialogues.
LabelSpace collect_labels(const std::vector<Dialogue>& dialogues);
/// Checks turn invariants and span validity; throws the matching
/// CorpusError subclass naming the dialogue id and turn index.
void validate_dialogue(const Dialogue& dialogue);

std::vector<std::string> intent_parts(std::string_view intent);

// --- BIO ------------------------------------------------------------------

std::vector<std::string> bio_encode(const std::vector<SlotSpan>& spans,
                                    std::size_t word_count);
/// Lenient decoding: an I- tag without a matching open span starts a new
/// span of its type; unknown tag shapes are treated as O.
std::vector<SlotSpan> bio_decode(const std::vector<std::string>& tags);

// --- splitting ------------------------------------------------------------

struct CorpusSplit {
  Corpus train;
  Corpus validation;
  Corpus test;
};

/// Dialogue-level partition, deterministic by seed. All three parts keep
/// the full corpus label space.
CorpusSplit split_corpus(const Corpus& corpus,
                         const std::array<double, 3>& fractions,
                         std::uint64_t seed);

}  // namespace celt
