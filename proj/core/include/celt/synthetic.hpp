#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "celt/dialogue.hpp"

namespace celt {

struct SyntheticConfig {
  std::size_t dialogues = 100;
  /// Probability that a user answers a system request with the bare value.
  double bare_answer_probability = 0.8;
  /// Probability of the confirm / closing exchanges after slot requests.
  double confirm_probability = 0.6;
  double closing_probability = 0.5;
  /// Emit labels on user turns. Unlabeled corpora feed the MLM/NSP stages.
  bool labeled = true;
  std::string id_prefix = "syn";
};

/// Two-domain (restaurant, movie) template grammar with a multi-turn
/// flow: opening request, system slot requests answered by (often bare)
/// values, optional confirmation and closing. A bare number answer is
/// ambiguous between a count slot and a time slot unless the preceding
/// system request is known. Deterministic in (seed, config).
Corpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticConfig& config);

/// A user turn whose utterance is a lone number, i.e. its slot type is
/// only recoverable from context.
bool is_context_ambiguous(const Dialogue& dialogue, std::size_t turn_index);
std::size_t count_context_ambiguous(const Corpus& corpus);

/// Generic plain-text sentences for the pretraining stage, grouped into
/// short documents (consecutive sentences form NSP positives).
std::vector<std::vector<std::string>> generate_plain_text(std::uint64_t seed,
                                                          std::size_t documents);

}  // namespace celt
