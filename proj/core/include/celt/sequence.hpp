#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "celt/dialogue.hpp"
#include "celt/tokenizer.hpp"

namespace celt {

inline constexpr std::int32_t kSpeakerUser = 0;
inline constexpr std::int32_t kSpeakerSystem = 1;
inline constexpr std::int32_t kSpeakerSpecial = 2;
inline constexpr std::int32_t kSegmentHistory = 0;
inline constexpr std::int32_t kSegmentQuery = 1;

struct InputConfig {
  std::size_t max_sequence_length = 128;
  /// When false, previous turns are left out entirely (no-context ablation).
  bool include_history = true;
};

struct Targets {
  /// One id for ordinary samples; several for multi-intent samples.
  std::vector<std::int32_t> intents;
  std::vector<std::uint8_t> user_acts;  // n-hot over LabelSpace::user_acts
  std::vector<std::int32_t> slot_tags;  // one per query word
};

/// One encoder input. Layout:
///   [CLS] h1 [EOU] h2 [EOU] ... [SEP] q1 .. qn [SEP]
/// With no history the middle separator is omitted: [CLS] q1 .. qn [SEP].
/// [CLS] and history (including the separator) are segment 0; the query
/// and the final [SEP] are segment 1.
struct ModelInput {
  std::vector<TokenId> token_ids;
  std::vector<std::int32_t> position_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> speaker_ids;
  std::vector<std::uint8_t> system_act_nhot;
  /// Absolute positions of each query word's first subtoken.
  std::vector<std::int32_t> word_starts;
  std::size_t query_start = 0;
  std::size_t query_end = 0;  // exclusive, excludes the final [SEP]
  std::vector<std::uint8_t> attention_mask;
  std::optional<Targets> targets;

  std::size_t length() const { return token_ids.size(); }
  std::size_t word_count() const { return word_starts.size(); }
};

/// Assembles the encoder input for the USER turn at turn_index. Oldest
/// history turns are dropped whole until the sequence fits. Throws
/// ContractError for a non-user turn and ValidationError when the query
/// alone does not fit. Targets are attached when the turn is labeled and
/// `with_targets` is set.
ModelInput build_input_sequence(const Dialogue& dialogue, std::size_t turn_index,
                                const Vocab& vocab, const LabelSpace& labels,
                                const InputConfig& config,
                                bool with_targets = true);

/// Builds inputs for every labeled user turn of the corpus.
std::vector<ModelInput> build_corpus_inputs(const Corpus& corpus,
                                            const Vocab& vocab,
                                            const LabelSpace& labels,
                                            const InputConfig& config);

/// Appends [PAD] positions (mask 0) up to `length`.
ModelInput pad_input(const ModelInput& input, std::size_t length);

Targets make_targets(const SemanticFrame& frame, std::size_t word_count,
                     const LabelSpace& labels);

}  // namespace celt
