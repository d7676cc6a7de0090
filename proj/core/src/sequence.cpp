#include "celt/sequence.hpp"

#include <algorithm>
#include <unordered_map>

namespace celt {

namespace {

std::int32_t index_of(const std::vector<std::string>& space,
                      const std::string& label, const char* kind) {
  auto it = std::lower_bound(space.begin(), space.end(), label);
  if (it == space.end() || *it != label) {
    throw ValidationError(std::string("unknown ") + kind + " label '" + label + "'");
  }
  return static_cast<std::int32_t>(it - space.begin());
}

}  // namespace

Targets make_targets(const SemanticFrame& frame, std::size_t word_count,
                     const LabelSpace& labels) {
  Targets t;
  for (const auto& part : intent_parts(frame.intent)) {
    t.intents.push_back(index_of(labels.intents, part, "intent"));
  }
  t.user_acts.assign(labels.user_acts.size(), 0);
  for (const auto& act : frame.user_acts) {
    t.user_acts[static_cast<std::size_t>(index_of(labels.user_acts, act, "user act"))] = 1;
  }
  const auto tag_space = labels.slot_tags();
  std::unordered_map<std::string, std::int32_t> tag_ids;
  for (std::size_t i = 0; i < tag_space.size(); ++i)
    tag_ids.emplace(tag_space[i], static_cast<std::int32_t>(i));
  for (const auto& tag : bio_encode(frame.slots, word_count)) {
    auto it = tag_ids.find(tag);
    if (it == tag_ids.end()) throw ValidationError("unknown slot tag '" + tag + "'");
    t.slot_tags.push_back(it->second);
  }
  return t;
}

ModelInput build_input_sequence(const Dialogue& dialogue, std::size_t turn_index,
                                const Vocab& vocab, const LabelSpace& labels,
                                const InputConfig& config, bool with_targets) {
  if (turn_index >= dialogue.turns.size()) {
    throw IndexError("turn index " + std::to_string(turn_index) +
                     " out of range for dialogue '" + dialogue.id + "'");
  }
  const Turn& current = dialogue.turns[turn_index];
  if (current.speaker != Speaker::kUser) {
    throw ContractError("dialogue '" + dialogue.id + "' turn " +
                        std::to_string(turn_index) + " is not a user turn");
  }

  const TokenizedUtterance query = encode_utterance(current.utterance, vocab);
  const std::size_t query_cost = query.ids.size() + 2;  // [CLS] ... [SEP]
  if (query_cost > config.max_sequence_length) {
    throw ValidationError("dialogue '" + dialogue.id + "' turn " +
                          std::to_string(turn_index) + ": query needs " +
                          std::to_string(query_cost) +
                          " positions, maximum is " +
                          std::to_string(config.max_sequence_length));
  }

  std::vector<TokenizedUtterance> history;
  std::vector<Speaker> history_speakers;
  if (config.include_history) {
    for (std::size_t i = 0; i < turn_index; ++i) {
      history.push_back(encode_utterance(dialogue.turns[i].utterance, vocab));
      history_speakers.push_back(dialogue.turns[i].speaker);
    }
  }
  // Drop whole oldest turns until everything fits.
  std::size_t first = 0;
  auto history_cost = [&](std::size_t from) {
    if (from >= history.size()) return std::size_t{0};
    std::size_t n = 1;  // separator [SEP]
    for (std::size_t i = from; i < history.size(); ++i) n += history[i].ids.size() + 1;
    return n;
  };
  while (first < history.size() &&
         query_cost + history_cost(first) > config.max_sequence_length) {
    ++first;
  }

  ModelInput in;
  auto push = [&](TokenId id, std::int32_t segment, std::int32_t speaker) {
    in.token_ids.push_back(id);
    in.segment_ids.push_back(segment);
    in.speaker_ids.push_back(speaker);
  };
  push(Vocab::cls_id(), kSegmentHistory, kSpeakerSpecial);
  if (first < history.size()) {
    for (std::size_t i = first; i < history.size(); ++i) {
      const std::int32_t spk =
          history_speakers[i] == Speaker::kUser ? kSpeakerUser : kSpeakerSystem;
      for (TokenId id : history[i].ids) push(id, kSegmentHistory, spk);
      push(Vocab::eou_id(), kSegmentHistory, kSpeakerSpecial);
    }
    push(Vocab::sep_id(), kSegmentHistory, kSpeakerSpecial);
  }
  in.query_start = in.token_ids.size();
  for (std::size_t ws : query.word_starts) {
    in.word_starts.push_back(static_cast<std::int32_t>(in.query_start + ws));
  }
  for (TokenId id : query.ids) push(id, kSegmentQuery, kSpeakerUser);
  in.query_end = in.token_ids.size();
  push(Vocab::sep_id(), kSegmentQuery, kSpeakerSpecial);

  for (std::size_t i = 0; i < in.token_ids.size(); ++i) {
    in.position_ids.push_back(static_cast<std::int32_t>(i));
  }
  in.attention_mask.assign(in.token_ids.size(), 1);

  // System acts of the most recent system turn before the query.
  in.system_act_nhot.assign(labels.system_acts.size(), 0);
  for (std::size_t i = turn_index; i-- > 0;) {
    if (dialogue.turns[i].speaker != Speaker::kSystem) continue;
    for (const auto& act : dialogue.turns[i].system_acts) {
      const std::string key = act.key();
      auto it = std::lower_bound(labels.system_acts.begin(),
                                 labels.system_acts.end(), key);
      if (it != labels.system_acts.end() && *it == key) {
        in.system_act_nhot[static_cast<std::size_t>(it - labels.system_acts.begin())] = 1;
      }
    }
    break;
  }

  if (with_targets && current.labels) {
    in.targets = make_targets(*current.labels, query.word_starts.size(), labels);
  }
  return in;
}

std::vector<ModelInput> build_corpus_inputs(const Corpus& corpus,
                                            const Vocab& vocab,
                                            const LabelSpace& labels,
                                            const InputConfig& config) {
  std::vector<ModelInput> inputs;
  for (const auto& d : corpus.dialogues) {
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      if (d.turns[i].labels) {
        inputs.push_back(build_input_sequence(d, i, vocab, labels, config));
      }
    }
  }
  return inputs;
}

ModelInput pad_input(const ModelInput& input, std::size_t length) {
  ModelInput out = input;
  for (std::size_t i = input.length(); i < length; ++i) {
    out.token_ids.push_back(Vocab::pad_id());
    out.position_ids.push_back(static_cast<std::int32_t>(i));
    out.segment_ids.push_back(kSegmentQuery);
    out.speaker_ids.push_back(kSpeakerSpecial);
    out.attention_mask.push_back(0);
  }
  return out;
}

}  // namespace celt
