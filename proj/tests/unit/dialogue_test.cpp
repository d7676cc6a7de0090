#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "celt/dialogue.hpp"
#include "celt/synthetic.hpp"
#include "support/oracles.hpp"

using namespace celt;

namespace {

const char* kMinimal = R"({"dialogues": [{"id": "d1", "turns": [
  {"speaker": "user", "utterance": "table for 5 at sakoon",
   "labels": {"intent": "reserve_restaurant", "user_acts": ["inform"],
              "slots": [{"slot": "num_people", "start_word": 2, "end_word": 3},
                        {"slot": "restaurant_name", "start_word": 4, "end_word": 5}]}}]}]})";

std::string with_turns(const std::string& turns) {
  return R"({"dialogues": [{"id": "bad", "turns": [)" + turns + "]}]}";
}

}  // namespace

TEST(Corpus, ParsesMinimalFile) {
  const auto path = std::filesystem::temp_directory_path() / "celt-minimal-corpus.json";
  std::ofstream(path) << kMinimal;
  const Corpus c = load_corpus(path);
  std::filesystem::remove(path);
  ASSERT_EQ(c.dialogues.size(), 1u);
  const auto& t = c.dialogues[0].turns[0];
  ASSERT_TRUE(t.labels.has_value());
  EXPECT_EQ(t.labels->intent, "reserve_restaurant");
  EXPECT_EQ(t.labels->slots.size(), 2u);
  EXPECT_EQ(c.labels.intents, (std::vector<std::string>{"reserve_restaurant"}));
  EXPECT_EQ(c.labels.slot_tags(),
            (std::vector<std::string>{"O", "B-num_people", "I-num_people", "B-restaurant_name",
                                      "I-restaurant_name"}));
}

TEST(Corpus, MissingFileIsIoError) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.json"), IoError);
}

TEST(Corpus, SpanPastLastWordIsRangeErrorNamingTurn) {
  try {
    parse_corpus(with_turns(R"({"speaker": "user", "utterance": "at 7",
        "labels": {"intent": "x", "user_acts": [],
                   "slots": [{"slot": "time", "start_word": 1, "end_word": 3}]}})"));
    FAIL() << "expected SpanRangeError";
  } catch (const SpanRangeError& e) {
    EXPECT_NE(std::string(e.what()).find("turn 0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
}

TEST(Corpus, UserTurnWithSystemActsIsSchemaError) {
  EXPECT_THROW(parse_corpus(with_turns(R"({"speaker": "user", "utterance": "hi",
      "system_acts": [{"act": "greet"}]})")),
               CorpusSchemaError);
}

TEST(Corpus, OtherValidationErrors) {
  EXPECT_THROW(parse_corpus("{not json"), CorpusParseError);
  EXPECT_THROW(parse_corpus(R"({"turns": []})"), CorpusSchemaError);
  EXPECT_THROW(parse_corpus(with_turns(R"({"speaker": "robot", "utterance": "x"})")),
               CorpusSchemaError);
  EXPECT_THROW(parse_corpus(with_turns(R"({"speaker": "system", "utterance": "x",
      "labels": {"intent": "a", "user_acts": [], "slots": []}})")),
               CorpusSchemaError);
  EXPECT_THROW(parse_corpus(with_turns(R"({"speaker": "user", "utterance": "a b c",
      "labels": {"intent": "x", "user_acts": [],
                 "slots": [{"slot": "p", "start_word": 0, "end_word": 2},
                           {"slot": "q", "start_word": 1, "end_word": 3}]}})")),
               SpanOverlapError);
}

TEST(Corpus, SerializeRoundTrip) {
  SyntheticConfig cfg;
  cfg.dialogues = 30;
  const Corpus c = generate_synthetic_corpus(5, cfg);
  const Corpus back = parse_corpus(serialize_corpus(c));
  EXPECT_EQ(back.dialogues, c.dialogues);
  EXPECT_EQ(back.labels, c.labels);
  EXPECT_EQ(serialize_corpus(back), serialize_corpus(c));
}

TEST(Corpus, MultiIntentPartsFeedTheIntentInventory) {
  const Corpus c = parse_corpus(with_turns(R"({"speaker": "user", "utterance": "x",
      "labels": {"intent": "b+a", "user_acts": [], "slots": []}})"));
  EXPECT_EQ(c.labels.intents, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(c.has_multi_intent());
  EXPECT_EQ(intent_parts("b+a"), (std::vector<std::string>{"b", "a"}));
}

TEST(Bio, EncodeExamples) {
  EXPECT_EQ(bio_encode({}, 3), (std::vector<std::string>{"O", "O", "O"}));
  EXPECT_EQ(bio_encode({{"people", 0, 1}}, 3),
            (std::vector<std::string>{"B-people", "O", "O"}));
  EXPECT_EQ(bio_encode({{"time", 1, 3}}, 4),
            (std::vector<std::string>{"O", "B-time", "I-time", "O"}));
}

TEST(Bio, LenientDecoding) {
  EXPECT_EQ(bio_decode({"O", "I-time"}), (std::vector<SlotSpan>{{"time", 1, 2}}));
  EXPECT_EQ(bio_decode({"B-a", "B-a"}), (std::vector<SlotSpan>{{"a", 0, 1}, {"a", 1, 2}}));
  EXPECT_EQ(bio_decode({"B-a", "I-b"}), (std::vector<SlotSpan>{{"a", 0, 1}, {"b", 1, 2}}));
  EXPECT_EQ(bio_decode({"B-a", "I-a", "weird", "I-a"}),
            (std::vector<SlotSpan>{{"a", 0, 2}, {"a", 3, 4}}));
}

TEST(Bio, RoundTripOverRandomSpans) {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const std::size_t words = rng.below(10);
    const auto spans = oracle::random_spans(rng, words, {"a", "b", "c"});
    EXPECT_EQ(bio_decode(bio_encode(spans, words)), spans);
  }
}

TEST(Split, ArithmeticAndPartition) {
  SyntheticConfig cfg;
  cfg.dialogues = 10;
  const Corpus c = generate_synthetic_corpus(1, cfg);
  const auto s = split_corpus(c, {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(s.train.dialogues.size(), 8u);
  EXPECT_EQ(s.validation.dialogues.size(), 1u);
  EXPECT_EQ(s.test.dialogues.size(), 1u);
  std::vector<std::string> ids;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    EXPECT_EQ(part->labels, c.labels);
    for (const auto& d : part->dialogues) ids.push_back(d.id);
  }
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
  std::vector<std::string> all;
  for (const auto& d : c.dialogues) all.push_back(d.id);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(ids, all);
}

TEST(Split, DeterministicBySeed) {
  SyntheticConfig cfg;
  cfg.dialogues = 40;
  const Corpus c = generate_synthetic_corpus(1, cfg);
  EXPECT_EQ(split_corpus(c, {0.5, 0.25, 0.25}, 7).test.dialogues,
            split_corpus(c, {0.5, 0.25, 0.25}, 7).test.dialogues);
  EXPECT_NE(split_corpus(c, {0.5, 0.25, 0.25}, 7).test.dialogues,
            split_corpus(c, {0.5, 0.25, 0.25}, 8).test.dialogues);
}

TEST(Split, RejectsEmptyPartitions) {
  SyntheticConfig cfg;
  cfg.dialogues = 10;
  const Corpus c = generate_synthetic_corpus(1, cfg);
  EXPECT_THROW(split_corpus(c, {1.0, 0.0, 0.0}, 1), ValidationError);
  EXPECT_THROW(split_corpus(c, {0.5, 0.2, 0.2}, 1), ValidationError);
}

TEST(Synthetic, SameSeedSameBytes) {
  SyntheticConfig cfg;
  cfg.dialogues = 50;
  EXPECT_EQ(serialize_corpus(generate_synthetic_corpus(77, cfg)),
            serialize_corpus(generate_synthetic_corpus(77, cfg)));
  EXPECT_NE(serialize_corpus(generate_synthetic_corpus(77, cfg)),
            serialize_corpus(generate_synthetic_corpus(78, cfg)));
}

TEST(Synthetic, HundredDialoguesHaveTwentyAmbiguousTurns) {
  SyntheticConfig cfg;
  cfg.dialogues = 100;
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    EXPECT_GE(count_context_ambiguous(generate_synthetic_corpus(seed, cfg)), 20u);
  }
}

TEST(Synthetic, AmbiguousTurnsAreBareNumbers) {
  SyntheticConfig cfg;
  cfg.dialogues = 40;
  const Corpus c = generate_synthetic_corpus(3, cfg);
  for (const auto& d : c.dialogues) {
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      if (!is_context_ambiguous(d, i)) continue;
      const auto words = split_words(d.turns[i].utterance);
      ASSERT_EQ(words.size(), 1u);
      EXPECT_TRUE(std::all_of(words[0].begin(), words[0].end(), ::isdigit));
      EXPECT_GT(i, 0u);
      EXPECT_EQ(d.turns[i - 1].speaker, Speaker::kSystem);
    }
  }
}

TEST(Synthetic, UnlabeledCorpusCarriesNoLabels) {
  SyntheticConfig cfg;
  cfg.dialogues = 20;
  cfg.labeled = false;
  const Corpus c = generate_synthetic_corpus(3, cfg);
  EXPECT_EQ(c.labeled_turn_count(), 0u);
  EXPECT_GT(c.user_turn_count(), 0u);
}

TEST(Synthetic, PlainTextIsDeterministic) {
  EXPECT_EQ(generate_plain_text(4, 10), generate_plain_text(4, 10));
  EXPECT_EQ(generate_plain_text(4, 10).size(), 10u);
}
