#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace celt {

using TokenId = std::int32_t;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kEouToken = "[EOU]";
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::size_t kNumSpecialTokens = 6;
inline constexpr std::size_t kMaxWordChars = 64;

/// Bijective token <-> id map. Ids 0..5 are always the special tokens in
/// the order PAD, UNK, CLS, SEP, EOU, MASK.
class Vocab {
 public:
  Vocab();
  /// Tokens in id order; the first six must be the specials.
  explicit Vocab(std::vector<std::string> tokens);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  /// The plain-text file contents (one token per line).
  std::string serialize() const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// Returns the UNK id for unknown tokens.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// Appends if absent; returns the id either way.
  TokenId add(std::string token);

  static constexpr TokenId pad_id() { return 0; }
  static constexpr TokenId unk_id() { return 1; }
  static constexpr TokenId cls_id() { return 2; }
  static constexpr TokenId sep_id() { return 3; }
  static constexpr TokenId eou_id() { return 4; }
  static constexpr TokenId mask_id() { return 5; }
  static bool is_special(TokenId id) {
    return id >= 0 && static_cast<std::size_t>(id) < kNumSpecialTokens;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenizedUtterance {
  std::vector<TokenId> ids;
  /// Index of each whitespace word's first subtoken within `ids`.
  std::vector<std::size_t> word_starts;
};

std::string to_lower(std::string_view text);
std::vector<std::string> split_words(std::string_view text);

/// Learns a WordPiece-format vocabulary by repeatedly merging the most
/// frequent adjacent symbol pair (ties broken lexicographically).
Vocab build_vocab(std::string_view corpus_text, std::size_t target_size);

/// Greedy longest-match-first segmentation. A word with any unmatched
/// segment, or longer than kMaxWordChars, becomes a single [UNK].
std::vector<TokenId> tokenize_word(std::string_view word, const Vocab& vocab);

TokenizedUtterance encode_utterance(std::string_view text, const Vocab& vocab);

}  // namespace celt
