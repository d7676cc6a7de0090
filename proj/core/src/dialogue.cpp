#include "celt/dialogue.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "celt/rng.hpp"
#include "celt/tokenizer.hpp"

namespace celt {

using nlohmann::ordered_json;

namespace {

std::string where(const std::string& id, std::size_t turn) {
  return "dialogue '" + id + "' turn " + std::to_string(turn);
}

const ordered_json& require_field(const ordered_json& obj, const char* key,
                                  const std::string& context) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw CorpusSchemaError(context + ": missing field '" + key + "'");
  }
  return *it;
}

std::string require_string(const ordered_json& obj, const char* key,
                           const std::string& context) {
  const auto& v = require_field(obj, key, context);
  if (!v.is_string()) {
    throw CorpusSchemaError(context + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::size_t require_index(const ordered_json& obj, const char* key,
                          const std::string& context) {
  const auto& v = require_field(obj, key, context);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw CorpusSchemaError(context + ": field '" + key +
                            "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

SemanticFrame parse_frame(const ordered_json& j, const std::string& ctx) {
  if (!j.is_object()) throw CorpusSchemaError(ctx + ": labels must be an object");
  SemanticFrame frame;
  frame.intent = require_string(j, "intent", ctx);
  const auto& acts = require_field(j, "user_acts", ctx);
  if (!acts.is_array()) throw CorpusSchemaError(ctx + ": user_acts must be an array");
  for (const auto& a : acts) {
    if (!a.is_string()) throw CorpusSchemaError(ctx + ": user act must be a string");
    frame.user_acts.insert(a.get<std::string>());
  }
  const auto& slots = require_field(j, "slots", ctx);
  if (!slots.is_array()) throw CorpusSchemaError(ctx + ": slots must be an array");
  for (const auto& s : slots) {
    if (!s.is_object()) throw CorpusSchemaError(ctx + ": slot span must be an object");
    frame.slots.push_back({require_string(s, "slot", ctx),
                           require_index(s, "start_word", ctx),
                           require_index(s, "end_word", ctx)});
  }
  return frame;
}

Turn parse_turn(const ordered_json& j, const std::string& ctx) {
  if (!j.is_object()) throw CorpusSchemaError(ctx + ": turn must be an object");
  Turn turn;
  const std::string speaker = require_string(j, "speaker", ctx);
  if (speaker == "user") {
    turn.speaker = Speaker::kUser;
  } else if (speaker == "system") {
    turn.speaker = Speaker::kSystem;
  } else {
    throw CorpusSchemaError(ctx + ": unknown speaker '" + speaker + "'");
  }
  turn.utterance = require_string(j, "utterance", ctx);
  if (auto it = j.find("system_acts"); it != j.end()) {
    if (turn.speaker == Speaker::kUser) {
      throw CorpusSchemaError(ctx + ": user turn carries system_acts");
    }
    if (!it->is_array()) throw CorpusSchemaError(ctx + ": system_acts must be an array");
    for (const auto& a : *it) {
      if (!a.is_object()) throw CorpusSchemaError(ctx + ": system act must be an object");
      SystemAct act;
      act.act_type = require_string(a, "act", ctx);
      if (act.act_type.empty()) throw CorpusSchemaError(ctx + ": empty system act type");
      if (auto s = a.find("slot"); s != a.end() && !s->is_null()) {
        if (!s->is_string()) throw CorpusSchemaError(ctx + ": system act slot must be a string or null");
        act.slot = s->get<std::string>();
      }
      turn.system_acts.push_back(std::move(act));
    }
  }
  if (auto it = j.find("labels"); it != j.end()) {
    if (turn.speaker == Speaker::kSystem) {
      throw CorpusSchemaError(ctx + ": system turn carries labels");
    }
    turn.labels = parse_frame(*it, ctx);
  }
  return turn;
}

}  // namespace

std::string SystemAct::key() const {
  return slot ? act_type + "(" + *slot + ")" : act_type;
}

std::vector<std::string> LabelSpace::slot_tags() const {
  std::vector<std::string> tags{"O"};
  for (const auto& s : slots) {
    tags.push_back("B-" + s);
    tags.push_back("I-" + s);
  }
  return tags;
}

std::size_t Corpus::user_turn_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogues)
    for (const auto& t : d.turns) n += t.speaker == Speaker::kUser;
  return n;
}

std::size_t Corpus::labeled_turn_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogues)
    for (const auto& t : d.turns) n += t.labels.has_value();
  return n;
}

bool Corpus::has_user_acts() const {
  for (const auto& d : dialogues)
    for (const auto& t : d.turns)
      if (t.labels && !t.labels->user_acts.empty()) return true;
  return false;
}

bool Corpus::has_multi_intent() const {
  for (const auto& d : dialogues)
    for (const auto& t : d.turns)
      if (t.labels && intent_parts(t.labels->intent).size() > 1) return true;
  return false;
}

std::vector<std::string> intent_parts(std::string_view intent) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = intent.find('+', start);
    parts.emplace_back(intent.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

void validate_dialogue(const Dialogue& dialogue) {
  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
    const auto& turn = dialogue.turns[i];
    const std::string ctx = where(dialogue.id, i);
    if (turn.speaker == Speaker::kUser && !turn.system_acts.empty()) {
      throw CorpusSchemaError(ctx + ": user turn carries system_acts");
    }
    if (turn.speaker == Speaker::kSystem && turn.labels) {
      throw CorpusSchemaError(ctx + ": system turn carries labels");
    }
    if (!turn.labels) continue;
    if (turn.labels->intent.empty()) {
      throw CorpusSchemaError(ctx + ": empty intent");
    }
    const std::size_t words = split_words(turn.utterance).size();
    std::vector<SlotSpan> spans = turn.labels->slots;
    for (const auto& s : spans) {
      if (s.start_word >= s.end_word || s.end_word > words) {
        throw SpanRangeError(ctx + ": span " + s.slot + " [" +
                             std::to_string(s.start_word) + ", " +
                             std::to_string(s.end_word) +
                             ") out of range for " + std::to_string(words) +
                             " words");
      }
    }
    std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) {
      return a.start_word < b.start_word;
    });
    for (std::size_t k = 1; k < spans.size(); ++k) {
      if (spans[k].start_word < spans[k - 1].end_word) {
        throw SpanOverlapError(ctx + ": spans " + spans[k - 1].slot + " and " +
                               spans[k].slot + " overlap");
      }
    }
  }
}

LabelSpace collect_labels(const std::vector<Dialogue>& dialogues) {
  std::set<std::string> intents, acts, slots, system_acts;
  for (const auto& d : dialogues) {
    for (const auto& t : d.turns) {
      for (const auto& a : t.system_acts) system_acts.insert(a.key());
      if (!t.labels) continue;
      for (auto& part : intent_parts(t.labels->intent)) intents.insert(part);
      acts.insert(t.labels->user_acts.begin(), t.labels->user_acts.end());
      for (const auto& s : t.labels->slots) slots.insert(s.slot);
    }
  }
  return {{intents.begin(), intents.end()},
          {acts.begin(), acts.end()},
          {slots.begin(), slots.end()},
          {system_acts.begin(), system_acts.end()}};
}

Corpus parse_corpus(std::string_view json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusParseError(std::string("malformed corpus JSON: ") + e.what());
  }
  if (!root.is_object()) throw CorpusSchemaError("corpus root must be an object");
  const auto& dialogues = require_field(root, "dialogues", "corpus");
  if (!dialogues.is_array()) throw CorpusSchemaError("'dialogues' must be an array");

  Corpus corpus;
  for (std::size_t di = 0; di < dialogues.size(); ++di) {
    const auto& dj = dialogues[di];
    const std::string dctx = "dialogue #" + std::to_string(di);
    if (!dj.is_object()) throw CorpusSchemaError(dctx + ": must be an object");
    Dialogue dialogue;
    dialogue.id = require_string(dj, "id", dctx);
    const auto& turns = require_field(dj, "turns", "dialogue '" + dialogue.id + "'");
    if (!turns.is_array()) {
      throw CorpusSchemaError("dialogue '" + dialogue.id + "': turns must be an array");
    }
    for (std::size_t ti = 0; ti < turns.size(); ++ti) {
      dialogue.turns.push_back(parse_turn(turns[ti], where(dialogue.id, ti)));
    }
    validate_dialogue(dialogue);
    corpus.dialogues.push_back(std::move(dialogue));
  }
  corpus.labels = collect_labels(corpus.dialogues);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

std::string serialize_corpus(const Corpus& corpus) {
  ordered_json root;
  root["dialogues"] = ordered_json::array();
  for (const auto& d : corpus.dialogues) {
    ordered_json dj;
    dj["id"] = d.id;
    dj["turns"] = ordered_json::array();
    for (const auto& t : d.turns) {
      ordered_json tj;
      tj["speaker"] = t.speaker == Speaker::kUser ? "user" : "system";
      tj["utterance"] = t.utterance;
      if (t.speaker == Speaker::kSystem) {
        tj["system_acts"] = ordered_json::array();
        for (const auto& a : t.system_acts) {
          ordered_json aj;
          aj["act"] = a.act_type;
          aj["slot"] = a.slot ? ordered_json(*a.slot) : ordered_json(nullptr);
          tj["system_acts"].push_back(std::move(aj));
        }
      }
      if (t.labels) {
        ordered_json lj;
        lj["intent"] = t.labels->intent;
        lj["user_acts"] = ordered_json::array();
        for (const auto& a : t.labels->user_acts) lj["user_acts"].push_back(a);
        lj["slots"] = ordered_json::array();
        for (const auto& s : t.labels->slots) {
          ordered_json sj;
          sj["slot"] = s.slot;
          sj["start_word"] = s.start_word;
          sj["end_word"] = s.end_word;
          lj["slots"].push_back(std::move(sj));
        }
        tj["labels"] = std::move(lj);
      }
      dj["turns"].push_back(std::move(tj));
    }
    root["dialogues"].push_back(std::move(dj));
  }
  return root.dump(1) + "\n";
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  out << serialize_corpus(corpus);
  if (!out) throw IoError("failed writing corpus file " + path.string());
}

std::vector<std::string> bio_encode(const std::vector<SlotSpan>& spans,
                                    std::size_t word_count) {
  std::vector<std::string> tags(word_count, "O");
  std::vector<bool> used(word_count, false);
  for (const auto& s : spans) {
    if (s.start_word >= s.end_word || s.end_word > word_count) {
      throw SpanRangeError("bio_encode: span " + s.slot + " [" +
                           std::to_string(s.start_word) + ", " +
                           std::to_string(s.end_word) + ") out of range for " +
                           std::to_string(word_count) + " words");
    }
    for (std::size_t w = s.start_word; w < s.end_word; ++w) {
      if (used[w]) {
        throw SpanOverlapError("bio_encode: overlapping spans at word " +
                               std::to_string(w));
      }
      used[w] = true;
      tags[w] = (w == s.start_word ? "B-" : "I-") + s.slot;
    }
  }
  return tags;
}

std::vector<SlotSpan> bio_decode(const std::vector<std::string>& tags) {
  std::vector<SlotSpan> spans;
  std::optional<SlotSpan> open;
  auto close = [&](std::size_t end) {
    if (open) {
      open->end_word = end;
      spans.push_back(*open);
      open.reset();
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& tag = tags[i];
    const bool begin = tag.rfind("B-", 0) == 0 && tag.size() > 2;
    const bool inside = tag.rfind("I-", 0) == 0 && tag.size() > 2;
    if (!begin && !inside) {
      close(i);
      continue;
    }
    const std::string slot = tag.substr(2);
    if (inside && open && open->slot == slot) continue;
    close(i);
    open = SlotSpan{slot, i, i};
  }
  close(tags.size());
  return spans;
}

CorpusSplit split_corpus(const Corpus& corpus,
                         const std::array<double, 3>& fractions,
                         std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f > 0.0)) throw ValidationError("split fractions must be positive");
  }
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
  const std::size_t n = corpus.dialogues.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
  const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * n));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw ValidationError("split of " + std::to_string(n) +
                          " dialogues leaves an empty partition");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  CorpusSplit split;
  for (auto* part : {&split.train, &split.validation, &split.test}) {
    part->labels = corpus.labels;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Corpus& dst = i < n_train ? split.train
                  : i < n_train + n_val ? split.validation
                                        : split.test;
    dst.dialogues.push_back(corpus.dialogues[order[i]]);
  }
  return split;
}

}  // namespace celt
