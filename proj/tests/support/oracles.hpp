#pragma once

// Reference implementations used only by the tests. They are written
// from the definitions, with plain loops and no code shared with the
// library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "celt/dialogue.hpp"
#include "celt/metrics.hpp"
#include "celt/rng.hpp"
#include "celt/sequence.hpp"
#include "celt/tokenizer.hpp"

namespace celt::oracle {

// --- linear-chain CRF by enumeration ----------------------------------------

struct CrfInstance {
  std::size_t length = 0;
  std::size_t tags = 0;
  std::vector<double> emissions;    // [length x tags]
  std::vector<double> transitions;  // [tags x tags]
  std::vector<double> start;
  std::vector<double> end;
};

inline CrfInstance random_crf(Rng& rng, std::size_t max_len, std::size_t max_tags) {
  CrfInstance c;
  c.length = 1 + rng.below(max_len);
  c.tags = 1 + rng.below(max_tags);
  auto draw = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = 3.0 * rng.normal();
    return v;
  };
  c.emissions = draw(c.length * c.tags);
  c.transitions = draw(c.tags * c.tags);
  c.start = draw(c.tags);
  c.end = draw(c.tags);
  return c;
}

inline double path_score(const CrfInstance& c, const std::vector<std::int32_t>& path) {
  double s = c.start[path[0]] + c.end[path.back()];
  for (std::size_t t = 0; t < c.length; ++t) s += c.emissions[t * c.tags + path[t]];
  for (std::size_t t = 1; t < c.length; ++t) s += c.transitions[path[t - 1] * c.tags + path[t]];
  return s;
}

/// Calls fn on every tag path, in lexicographic order.
template <typename Fn>
void for_each_path(const CrfInstance& c, Fn&& fn) {
  std::vector<std::int32_t> path(c.length, 0);
  while (true) {
    fn(path);
    std::size_t t = c.length;
    while (t > 0) {
      --t;
      if (static_cast<std::size_t>(++path[t]) < c.tags) break;
      path[t] = 0;
      if (t == 0) return;
    }
  }
}

inline double brute_log_partition(const CrfInstance& c) {
  std::vector<double> scores;
  for_each_path(c, [&](const std::vector<std::int32_t>& p) { scores.push_back(path_score(c, p)); });
  const double m = *std::max_element(scores.begin(), scores.end());
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - m);
  return m + std::log(acc);
}

/// Highest-scoring path; the first one found wins exact ties, which with
/// lexicographic enumeration is the path with the smallest tags.
inline std::vector<std::int32_t> brute_argmax(const CrfInstance& c) {
  std::vector<std::int32_t> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for_each_path(c, [&](const std::vector<std::int32_t>& p) {
    const double s = path_score(c, p);
    if (s > best_score) {
      best_score = s;
      best = p;
    }
  });
  return best;
}

// --- span and act matching -----------------------------------------------------

/// Matches each predicted span against unused gold spans of one example.
inline PrfCounts match_spans(const std::vector<SlotSpan>& predicted,
                             const std::vector<SlotSpan>& gold) {
  PrfCounts c;
  std::vector<bool> used(gold.size(), false);
  for (const auto& p : predicted) {
    bool hit = false;
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (used[g]) continue;
      if (gold[g].slot == p.slot && gold[g].start_word == p.start_word &&
          gold[g].end_word == p.end_word) {
        used[g] = true;
        hit = true;
        break;
      }
    }
    if (hit) {
      ++c.true_positives;
    } else {
      ++c.false_positives;
    }
  }
  for (bool u : used) c.false_negatives += u ? 0 : 1;
  return c;
}

inline PrfCounts brute_slot_counts(const std::vector<SemanticFrame>& predicted,
                                   const std::vector<SemanticFrame>& gold) {
  PrfCounts total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto c = match_spans(predicted[i].slots, gold[i].slots);
    total.true_positives += c.true_positives;
    total.false_positives += c.false_positives;
    total.false_negatives += c.false_negatives;
  }
  return total;
}

inline PrfCounts brute_act_counts(const std::vector<std::set<std::string>>& predicted,
                                  const std::vector<std::set<std::string>>& gold,
                                  const std::vector<std::string>& inventory) {
  PrfCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const auto& act : inventory) {
      const bool p = predicted[i].count(act) > 0;
      const bool g = gold[i].count(act) > 0;
      if (p && g) ++c.true_positives;
      if (p && !g) ++c.false_positives;
      if (!p && g) ++c.false_negatives;
    }
  }
  return c;
}

/// Harmonic mean of precision and recall, as 2TP / (2TP + FP + FN) so the
/// value is exact in floating point.
inline double f1_from_counts(const PrfCounts& c) {
  const std::size_t den = 2 * c.true_positives + c.false_positives + c.false_negatives;
  return den == 0 ? 0.0 : static_cast<double>(2 * c.true_positives) / static_cast<double>(den);
}

/// The textbook form, for tolerance checks against the above.
inline double harmonic_f1(const PrfCounts& c) {
  const double tp = static_cast<double>(c.true_positives);
  const double p = tp + c.false_positives == 0 ? 0.0 : tp / (tp + c.false_positives);
  const double r = tp + c.false_negatives == 0 ? 0.0 : tp / (tp + c.false_negatives);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

/// Random non-overlapping spans over `words` words.
inline std::vector<SlotSpan> random_spans(Rng& rng, std::size_t words,
                                          const std::vector<std::string>& slots) {
  std::vector<SlotSpan> out;
  std::size_t w = 0;
  while (w < words) {
    if (rng.bernoulli(0.4)) {
      const std::size_t len = 1 + rng.below(std::min<std::size_t>(3, words - w));
      out.push_back({slots[rng.below(slots.size())], w, w + len});
      w += len;
    } else {
      ++w;
    }
  }
  return out;
}

// --- input layout --------------------------------------------------------------

/// Rebuilds the expected encoder input from the definition of the layout
/// and returns an empty string when `in` matches, or the first mismatch.
inline std::string check_layout(const ModelInput& in, const Dialogue& d, std::size_t turn,
                                const Vocab& vocab, const LabelSpace& labels,
                                std::size_t max_len, bool include_history) {
  const auto query = encode_utterance(d.turns[turn].utterance, vocab);
  std::vector<std::vector<TokenId>> hist;
  std::vector<Speaker> speakers;
  if (include_history) {
    for (std::size_t i = 0; i < turn; ++i) {
      hist.push_back(encode_utterance(d.turns[i].utterance, vocab).ids);
      speakers.push_back(d.turns[i].speaker);
    }
  }
  // Longest suffix of history that fits next to the query.
  std::size_t kept = 0;
  for (std::size_t k = 1; k <= hist.size(); ++k) {
    std::size_t need = query.ids.size() + 2 + 1;
    for (std::size_t i = hist.size() - k; i < hist.size(); ++i) need += hist[i].size() + 1;
    if (need <= max_len) kept = k;
  }

  std::vector<TokenId> ids{Vocab::cls_id()};
  std::vector<std::int32_t> seg{0}, spk{kSpeakerSpecial};
  for (std::size_t i = hist.size() - kept; i < hist.size(); ++i) {
    for (TokenId t : hist[i]) {
      ids.push_back(t);
      seg.push_back(0);
      spk.push_back(speakers[i] == Speaker::kUser ? kSpeakerUser : kSpeakerSystem);
    }
    ids.push_back(Vocab::eou_id());
    seg.push_back(0);
    spk.push_back(kSpeakerSpecial);
  }
  if (kept > 0) {
    ids.push_back(Vocab::sep_id());
    seg.push_back(0);
    spk.push_back(kSpeakerSpecial);
  }
  const std::size_t qstart = ids.size();
  for (TokenId t : query.ids) {
    ids.push_back(t);
    seg.push_back(1);
    spk.push_back(kSpeakerUser);
  }
  ids.push_back(Vocab::sep_id());
  seg.push_back(1);
  spk.push_back(kSpeakerSpecial);

  if (in.token_ids != ids) return "token ids";
  if (in.segment_ids != seg) return "segment ids";
  if (in.speaker_ids != spk) return "speaker ids";
  if (in.length() > max_len) return "length";
  if (in.query_start != qstart || in.query_end != qstart + query.ids.size()) return "query range";
  for (std::size_t i = 0; i < in.length(); ++i) {
    if (in.position_ids[i] != static_cast<std::int32_t>(i)) return "position ids";
    if (in.attention_mask[i] != 1) return "attention mask";
  }
  if (in.word_starts.size() != query.word_starts.size()) return "word count";
  for (std::size_t w = 0; w < query.word_starts.size(); ++w) {
    if (in.word_starts[w] != static_cast<std::int32_t>(qstart + query.word_starts[w])) {
      return "word starts";
    }
  }
  std::vector<std::uint8_t> acts(labels.system_acts.size(), 0);
  for (std::size_t i = turn; i-- > 0;) {
    if (d.turns[i].speaker != Speaker::kSystem) continue;
    for (const auto& a : d.turns[i].system_acts) {
      for (std::size_t k = 0; k < labels.system_acts.size(); ++k) {
        if (labels.system_acts[k] == a.key()) acts[k] = 1;
      }
    }
    break;
  }
  if (in.system_act_nhot != acts) return "system acts";
  return {};
}

}  // namespace celt::oracle
