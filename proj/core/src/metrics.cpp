#include "celt/metrics.hpp"

#include <algorithm>
#include <iterator>
#include <tuple>

#include <json.hpp>

namespace celt {

namespace {

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ValidationError(std::string(what) + ": " + std::to_string(a) +
                          " predictions for " + std::to_string(b) + " gold examples");
  }
}

using SpanKey = std::tuple<std::string, std::size_t, std::size_t>;

std::set<SpanKey> span_set(const SemanticFrame& frame) {
  std::set<SpanKey> out;
  for (const auto& s : frame.slots) out.emplace(s.slot, s.start_word, s.end_word);
  return out;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

Prf to_prf(const PrfCounts& c) { return {c.precision(), c.recall(), c.f1()}; }

}  // namespace

double PrfCounts::precision() const {
  return ratio(true_positives, true_positives + false_positives);
}

double PrfCounts::recall() const {
  return ratio(true_positives, true_positives + false_negatives);
}

double PrfCounts::f1() const {
  // 2TP / (2TP + FP + FN) equals the harmonic mean of P and R.
  return ratio(2 * true_positives, 2 * true_positives + false_positives + false_negatives);
}

PrfCounts& PrfCounts::operator+=(const PrfCounts& o) {
  true_positives += o.true_positives;
  false_positives += o.false_positives;
  false_negatives += o.false_negatives;
  return *this;
}

double intent_accuracy(const std::vector<std::string>& predicted,
                       const std::vector<std::string>& gold) {
  check_aligned(predicted.size(), gold.size(), "intent_accuracy");
  if (gold.empty()) throw ValidationError("intent_accuracy: no examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return ratio(hits, gold.size());
}

PrfCounts slot_counts(const std::vector<SemanticFrame>& predicted,
                      const std::vector<SemanticFrame>& gold) {
  PrfCounts total;
  for (const auto& [slot, counts] : slot_counts_by_label(predicted, gold)) total += counts;
  return total;
}

std::map<std::string, PrfCounts> slot_counts_by_label(
    const std::vector<SemanticFrame>& predicted, const std::vector<SemanticFrame>& gold) {
  check_aligned(predicted.size(), gold.size(), "slot_f1");
  std::map<std::string, PrfCounts> rows;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto p = span_set(predicted[i]);
    const auto g = span_set(gold[i]);
    for (const auto& span : p) {
      auto& row = rows[std::get<0>(span)];
      if (g.count(span)) {
        ++row.true_positives;
      } else {
        ++row.false_positives;
      }
    }
    for (const auto& span : g) {
      if (!p.count(span)) ++rows[std::get<0>(span)].false_negatives;
    }
  }
  return rows;
}

Prf slot_f1(const std::vector<SemanticFrame>& predicted,
            const std::vector<SemanticFrame>& gold) {
  return to_prf(slot_counts(predicted, gold));
}

PrfCounts user_act_counts(const std::vector<std::set<std::string>>& predicted,
                          const std::vector<std::set<std::string>>& gold) {
  check_aligned(predicted.size(), gold.size(), "user_act_f1");
  PrfCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<std::string> common;
    std::set_intersection(predicted[i].begin(), predicted[i].end(), gold[i].begin(),
                          gold[i].end(), std::back_inserter(common));
    c.true_positives += common.size();
    c.false_positives += predicted[i].size() - common.size();
    c.false_negatives += gold[i].size() - common.size();
  }
  return c;
}

Prf user_act_f1(const std::vector<std::set<std::string>>& predicted,
                const std::vector<std::set<std::string>>& gold) {
  return to_prf(user_act_counts(predicted, gold));
}

double frame_accuracy(const std::vector<SemanticFrame>& predicted,
                      const std::vector<SemanticFrame>& gold, bool include_acts) {
  check_aligned(predicted.size(), gold.size(), "frame_accuracy");
  if (gold.empty()) throw ValidationError("frame_accuracy: no examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& p = predicted[i];
    const auto& g = gold[i];
    bool ok = p.intent == g.intent && span_set(p) == span_set(g);
    if (include_acts) ok = ok && p.user_acts == g.user_acts;
    hits += ok;
  }
  return ratio(hits, gold.size());
}

MetricsReport build_report(const std::vector<SemanticFrame>& predicted,
                           const std::vector<SemanticFrame>& gold, bool include_acts) {
  check_aligned(predicted.size(), gold.size(), "build_report");
  if (gold.empty()) throw ValidationError("build_report: no examples");
  MetricsReport r;
  r.example_count = gold.size();
  r.include_acts = include_acts;

  std::vector<std::string> pi, gi;
  std::vector<std::set<std::string>> pa, ga;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    pi.push_back(predicted[i].intent);
    gi.push_back(gold[i].intent);
    pa.push_back(predicted[i].user_acts);
    ga.push_back(gold[i].user_acts);
  }
  r.intent_accuracy = intent_accuracy(pi, gi);
  const Prf acts = user_act_f1(pa, ga);
  r.user_act_precision = acts.precision;
  r.user_act_recall = acts.recall;
  r.user_act_f1 = acts.f1;
  const auto by_label = slot_counts_by_label(predicted, gold);
  PrfCounts slots;
  for (const auto& [name, counts] : by_label) {
    r.per_slot.push_back({name, counts});
    slots += counts;
  }
  r.slot_precision = slots.precision();
  r.slot_recall = slots.recall();
  r.slot_f1 = slots.f1();
  r.frame_accuracy = frame_accuracy(predicted, gold, include_acts);
  return r;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["example_count"] = r.example_count;
  j["include_acts"] = r.include_acts;
  j["intent_accuracy"] = r.intent_accuracy;
  j["user_act_precision"] = r.user_act_precision;
  j["user_act_recall"] = r.user_act_recall;
  j["user_act_f1"] = r.user_act_f1;
  j["slot_precision"] = r.slot_precision;
  j["slot_recall"] = r.slot_recall;
  j["slot_f1"] = r.slot_f1;
  j["frame_accuracy"] = r.frame_accuracy;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.per_slot) {
    nlohmann::ordered_json o;
    o["slot"] = row.slot;
    o["true_positives"] = row.counts.true_positives;
    o["false_positives"] = row.counts.false_positives;
    o["false_negatives"] = row.counts.false_negatives;
    o["precision"] = row.counts.precision();
    o["recall"] = row.counts.recall();
    o["f1"] = row.counts.f1();
    rows.push_back(std::move(o));
  }
  j["per_slot"] = std::move(rows);
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.example_count = j.at("example_count").get<std::size_t>();
    r.include_acts = j.at("include_acts").get<bool>();
    r.intent_accuracy = j.at("intent_accuracy").get<double>();
    r.user_act_precision = j.at("user_act_precision").get<double>();
    r.user_act_recall = j.at("user_act_recall").get<double>();
    r.user_act_f1 = j.at("user_act_f1").get<double>();
    r.slot_precision = j.at("slot_precision").get<double>();
    r.slot_recall = j.at("slot_recall").get<double>();
    r.slot_f1 = j.at("slot_f1").get<double>();
    r.frame_accuracy = j.at("frame_accuracy").get<double>();
    for (const auto& o : j.at("per_slot")) {
      SlotLabelRow row;
      row.slot = o.at("slot").get<std::string>();
      row.counts.true_positives = o.at("true_positives").get<std::size_t>();
      row.counts.false_positives = o.at("false_positives").get<std::size_t>();
      row.counts.false_negatives = o.at("false_negatives").get<std::size_t>();
      r.per_slot.push_back(std::move(row));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("metrics report: ") + e.what());
  }
}

}  // namespace celt
