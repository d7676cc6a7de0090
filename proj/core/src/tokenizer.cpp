#include "celt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "celt/error.hpp"

namespace celt {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {
      std::string(kPadToken), std::string(kUnkToken), std::string(kClsToken),
      std::string(kSepToken), std::string(kEouToken), std::string(kMaskToken)};
  return specials;
}

// A word as a sequence of pieces in WordPiece form ("pl", "##ay", ...).
using Symbols = std::vector<std::string>;

std::string merge_pieces(const std::string& left, const std::string& right) {
  // The right piece is always a continuation, so drop its "##".
  return left + right.substr(2);
}

}  // namespace

Vocab::Vocab() : Vocab(special_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw ValidationError(
        "vocabulary must start with [PAD] [UNK] [CLS] [SEP] [EOU] [MASK]");
  }
  for (auto& t : tokens) {
    if (index_.count(t)) {
      throw ValidationError("duplicate vocabulary token '" + t + "'");
    }
    index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(t));
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file " + path.string());
  out << serialize();
  if (!out) throw IoError("failed writing vocabulary file " + path.string());
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::add(std::string token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
  return id;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  return words;
}

Vocab build_vocab(std::string_view corpus_text, std::size_t target_size) {
  std::map<std::string, std::size_t> word_counts;
  for (auto& w : split_words(to_lower(corpus_text))) {
    if (w.size() <= kMaxWordChars) ++word_counts[w];
  }
  if (word_counts.empty()) throw ValidationError("build_vocab: empty corpus");

  std::vector<std::pair<Symbols, std::size_t>> words;
  std::set<std::string> alphabet;
  for (const auto& [w, count] : word_counts) {
    Symbols symbols;
    for (std::size_t i = 0; i < w.size(); ++i) {
      std::string piece = i == 0 ? std::string(1, w[i]) : "##" + std::string(1, w[i]);
      alphabet.insert(piece);
      symbols.push_back(std::move(piece));
    }
    words.emplace_back(std::move(symbols), count);
  }
  if (target_size <= kNumSpecialTokens + alphabet.size()) {
    throw ValidationError("build_vocab: target size " +
                          std::to_string(target_size) +
                          " must exceed specials + alphabet (" +
                          std::to_string(kNumSpecialTokens + alphabet.size()) +
                          ")");
  }

  Vocab vocab;
  for (const auto& piece : alphabet) vocab.add(piece);

  while (vocab.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pair_counts;
    for (const auto& [symbols, count] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        pair_counts[{symbols[i], symbols[i + 1]}] += count;
      }
    }
    if (pair_counts.empty()) break;
    // Highest count wins; std::map order makes ties lexicographic.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = merge_pieces(left, right);
    for (auto& [symbols, count] : words) {
      Symbols next;
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    vocab.add(merged);
  }
  return vocab;
}

std::vector<TokenId> tokenize_word(std::string_view word, const Vocab& vocab) {
  if (word.empty() || word.size() > kMaxWordChars) return {Vocab::unk_id()};
  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    TokenId found = -1;
    while (start < end) {
      std::string candidate(word.substr(start, end - start));
      if (start > 0) candidate = "##" + candidate;
      if (vocab.contains(candidate)) {
        found = vocab.id(candidate);
        break;
      }
      --end;
    }
    if (found < 0) return {Vocab::unk_id()};
    pieces.push_back(found);
    start = end;
  }
  return pieces;
}

TokenizedUtterance encode_utterance(std::string_view text, const Vocab& vocab) {
  TokenizedUtterance out;
  for (const auto& word : split_words(to_lower(text))) {
    out.word_starts.push_back(out.ids.size());
    auto pieces = tokenize_word(word, vocab);
    out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
  }
  return out;
}

}  // namespace celt
