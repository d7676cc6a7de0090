#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "celt/dialogue.hpp"

namespace celt {

struct PrfCounts {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  double precision() const;
  double recall() const;
  /// Harmonic mean of precision and recall; 0 when both are 0.
  double f1() const;
  PrfCounts& operator+=(const PrfCounts& other);
  friend bool operator==(const PrfCounts&, const PrfCounts&) = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct SlotLabelRow {
  std::string slot;
  PrfCounts counts;
  friend bool operator==(const SlotLabelRow&, const SlotLabelRow&) = default;
};

struct MetricsReport {
  std::size_t example_count = 0;
  bool include_acts = true;
  double intent_accuracy = 0.0;
  double user_act_precision = 0.0;
  double user_act_recall = 0.0;
  double user_act_f1 = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  double frame_accuracy = 0.0;
  std::vector<SlotLabelRow> per_slot;  // sorted by slot name

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Exact-match fraction. Throws ValidationError on empty or unequal input.
double intent_accuracy(const std::vector<std::string>& predicted,
                       const std::vector<std::string>& gold);

/// Span-exact micro counts: a prediction matches when slot name, start
/// and end all agree with a gold span.
PrfCounts slot_counts(const std::vector<SemanticFrame>& predicted,
                      const std::vector<SemanticFrame>& gold);
Prf slot_f1(const std::vector<SemanticFrame>& predicted,
            const std::vector<SemanticFrame>& gold);
/// Counts broken down by slot name.
std::map<std::string, PrfCounts> slot_counts_by_label(
    const std::vector<SemanticFrame>& predicted, const std::vector<SemanticFrame>& gold);

/// Micro-averaged over (example, act) instances.
PrfCounts user_act_counts(const std::vector<std::set<std::string>>& predicted,
                          const std::vector<std::set<std::string>>& gold);
Prf user_act_f1(const std::vector<std::set<std::string>>& predicted,
                const std::vector<std::set<std::string>>& gold);

/// Fraction of examples whose intent and slot span set match exactly,
/// and (with include_acts) whose act set matches as well.
double frame_accuracy(const std::vector<SemanticFrame>& predicted,
                      const std::vector<SemanticFrame>& gold, bool include_acts);

MetricsReport build_report(const std::vector<SemanticFrame>& predicted,
                           const std::vector<SemanticFrame>& gold, bool include_acts);

/// Flat JSON object in a fixed key order.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& json);

}  // namespace celt
