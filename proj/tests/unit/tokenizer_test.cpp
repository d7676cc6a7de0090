#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "celt/error.hpp"
#include "celt/tokenizer.hpp"

using namespace celt;

namespace {

Vocab with_tokens(std::vector<std::string> extra) {
  Vocab v;
  for (auto& t : extra) v.add(std::move(t));
  return v;
}

std::vector<std::string> pieces(const std::vector<TokenId>& ids, const Vocab& v) {
  std::vector<std::string> out;
  for (TokenId id : ids) out.push_back(v.token(id));
  return out;
}

}  // namespace

TEST(Vocab, SpecialsComeFirstInFixedOrder) {
  const Vocab v;
  ASSERT_EQ(v.size(), kNumSpecialTokens);
  EXPECT_EQ(v.token(Vocab::pad_id()), kPadToken);
  EXPECT_EQ(v.token(Vocab::unk_id()), kUnkToken);
  EXPECT_EQ(v.token(Vocab::cls_id()), kClsToken);
  EXPECT_EQ(v.token(Vocab::sep_id()), kSepToken);
  EXPECT_EQ(v.token(Vocab::eou_id()), kEouToken);
  EXPECT_EQ(v.token(Vocab::mask_id()), kMaskToken);
  EXPECT_EQ(v.id("nonexistent"), Vocab::unk_id());
}

TEST(Vocab, RejectsDuplicatesAndMissingSpecials) {
  EXPECT_THROW(Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[EOU]", "[MASK]", "a", "a"}),
               ValidationError);
  EXPECT_THROW(Vocab({"a", "b"}), ValidationError);
}

TEST(Vocab, SaveLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "celt-vocab-test.txt";
  const Vocab v = with_tokens({"play", "##ing", "x"});
  v.save(path);
  const Vocab back = Vocab::load(path);
  EXPECT_EQ(back.tokens(), v.tokens());
  std::filesystem::remove(path);
  EXPECT_THROW(Vocab::load(path), IoError);
}

TEST(BuildVocab, SingleSymbolCorpus) {
  const Vocab v = build_vocab("a a a", 10);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_EQ(v.token(Vocab::cls_id()), kClsToken);
  EXPECT_EQ(v.token(Vocab::mask_id()), kMaskToken);
  EXPECT_LE(v.size(), 10u);
}

TEST(BuildVocab, MergesMostFrequentPair) {
  const Vocab v = build_vocab("abab abab abab", 12);
  EXPECT_TRUE(v.contains("ab") || v.contains("##ab"));
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("##a"));
  EXPECT_TRUE(v.contains("##b"));
}

TEST(BuildVocab, FirstMergeMatchesPairCountOracle) {
  const std::string text = "low low low lower lowest newest newest";
  // Count adjacent symbol pairs by hand over the initial segmentation.
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& w : split_words(text)) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      const std::string l = i == 0 ? std::string(1, w[i]) : "##" + std::string(1, w[i]);
      counts[{l, "##" + std::string(1, w[i + 1])}]++;
    }
  }
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  const std::string left = best->first.first;
  const std::string merged = left + best->first.second.substr(2);
  std::set<std::string> alphabet;
  for (const auto& w : split_words(text)) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      alphabet.insert(i == 0 ? std::string(1, w[i]) : "##" + std::string(1, w[i]));
    }
  }
  const Vocab one_merge = build_vocab(text, kNumSpecialTokens + alphabet.size() + 1);
  EXPECT_EQ(one_merge.tokens().back(), merged);
}

TEST(BuildVocab, Errors) {
  EXPECT_THROW(build_vocab("", 100), ValidationError);
  EXPECT_THROW(build_vocab("abc", 8), ValidationError);  // 6 specials + 3 symbols
}

TEST(TokenizeWord, WholeWordMatch) {
  const Vocab v = with_tokens({"sakoon"});
  EXPECT_EQ(pieces(tokenize_word("sakoon", v), v), (std::vector<std::string>{"sakoon"}));
}

TEST(TokenizeWord, GreedyLongestMatchFirst) {
  Vocab v = with_tokens({"play", "##ing", "p", "##l", "##a", "##y", "##i", "##n", "##g"});
  EXPECT_EQ(pieces(tokenize_word("playing", v), v), (std::vector<std::string>{"play", "##ing"}));
}

TEST(TokenizeWord, UnmatchableWordCollapsesToUnk) {
  const Vocab v = with_tokens({"play", "##ing"});
  EXPECT_EQ(tokenize_word("playxng", v), (std::vector<TokenId>{Vocab::unk_id()}));
  EXPECT_EQ(tokenize_word(std::string(kMaxWordChars + 1, 'p'), v),
            (std::vector<TokenId>{Vocab::unk_id()}));
}

TEST(EncodeUtterance, OneToOneWordsAlignTrivially) {
  const Vocab v = with_tokens({"5", "at", "sakoon"});
  const auto u = encode_utterance("5 at sakoon", v);
  EXPECT_EQ(u.ids.size(), 3u);
  EXPECT_EQ(u.word_starts, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(EncodeUtterance, SplitWordShiftsLaterStarts) {
  const Vocab v = with_tokens({"play", "##ing", "now"});
  const auto u = encode_utterance("Playing now", v);
  EXPECT_EQ(pieces(u.ids, v), (std::vector<std::string>{"play", "##ing", "now"}));
  EXPECT_EQ(u.word_starts, (std::vector<std::size_t>{0, 2}));
}

TEST(EncodeUtterance, EmptyText) {
  const auto u = encode_utterance("", Vocab());
  EXPECT_TRUE(u.ids.empty());
  EXPECT_TRUE(u.word_starts.empty());
}
