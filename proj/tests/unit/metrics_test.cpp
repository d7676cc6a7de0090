#include <gtest/gtest.h>

#include <algorithm>

#include "celt/metrics.hpp"
#include "support/oracles.hpp"

using namespace celt;

namespace {

SemanticFrame frame(std::string intent, std::set<std::string> acts, std::vector<SlotSpan> slots) {
  return {std::move(intent), std::move(acts), std::move(slots)};
}

std::vector<SemanticFrame> random_frames(Rng& rng, std::size_t n) {
  const std::vector<std::string> intents = {"find", "reserve"};
  const std::vector<std::string> acts = {"inform", "affirm", "negate"};
  std::vector<SemanticFrame> out;
  for (std::size_t i = 0; i < n; ++i) {
    SemanticFrame f;
    f.intent = intents[rng.below(intents.size())];
    for (const auto& a : acts) {
      if (rng.bernoulli(0.4)) f.user_acts.insert(a);
    }
    f.slots = oracle::random_spans(rng, 6, {"time", "date", "people"});
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST(SlotF1, ThreeOfFourSpansMatch) {
  const std::vector<SemanticFrame> gold = {
      frame("x", {}, {{"a", 0, 1}, {"b", 1, 2}}), frame("x", {}, {{"a", 0, 2}, {"c", 3, 4}})};
  const std::vector<SemanticFrame> pred = {
      frame("x", {}, {{"a", 0, 1}, {"b", 1, 2}}), frame("x", {}, {{"a", 0, 2}, {"c", 2, 4}})};
  const auto c = slot_counts(pred, gold);
  EXPECT_EQ(c, (PrfCounts{3, 1, 1}));
  EXPECT_DOUBLE_EQ(slot_f1(pred, gold).f1, 0.75);
}

TEST(SlotF1, BoundaryMismatchIsNotAMatch) {
  const std::vector<SemanticFrame> gold = {frame("x", {}, {{"time", 1, 3}})};
  const std::vector<SemanticFrame> pred = {frame("x", {}, {{"time", 1, 2}})};
  EXPECT_EQ(slot_counts(pred, gold), (PrfCounts{0, 1, 1}));
  EXPECT_DOUBLE_EQ(slot_f1(pred, gold).f1, 0.0);
}

TEST(SlotF1, PerfectPrecisionHalfRecall) {
  const std::vector<SemanticFrame> gold = {frame("x", {}, {{"a", 0, 1}, {"b", 2, 3}})};
  const std::vector<SemanticFrame> pred = {frame("x", {}, {{"a", 0, 1}})};
  const auto p = slot_f1(pred, gold);
  EXPECT_DOUBLE_EQ(p.precision, 1.0);
  EXPECT_DOUBLE_EQ(p.recall, 0.5);
  EXPECT_NEAR(p.f1, 2.0 / 3.0, 1e-15);
}

TEST(SlotF1, NothingPredictedNothingGold) {
  const std::vector<SemanticFrame> empty = {frame("x", {}, {})};
  const auto p = slot_f1(empty, empty);
  EXPECT_DOUBLE_EQ(p.f1, 0.0);
  EXPECT_DOUBLE_EQ(PrfCounts{}.precision(), 0.0);
}

TEST(UserActF1, OverlappingSets) {
  const auto p = user_act_f1({{"a", "b"}}, {{"b", "c"}});
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 0.5);
  EXPECT_DOUBLE_EQ(p.f1, 0.5);
}

TEST(IntentAccuracy, ExactMatchFraction) {
  EXPECT_DOUBLE_EQ(intent_accuracy({"a", "b", "a+b", "c"}, {"a", "b", "a", "c"}), 0.75);
  EXPECT_THROW(intent_accuracy({}, {}), ValidationError);
  EXPECT_THROW(intent_accuracy({"a"}, {"a", "b"}), ValidationError);
}

TEST(FrameAccuracy, AllComponentsMustMatch) {
  const std::vector<SemanticFrame> gold = {frame("find", {"inform"}, {{"time", 0, 1}}),
                                           frame("find", {"inform"}, {{"time", 0, 1}})};
  const std::vector<SemanticFrame> pred = {frame("find", {"inform"}, {{"time", 0, 1}}),
                                           frame("find", {}, {{"time", 0, 1}})};
  EXPECT_DOUBLE_EQ(frame_accuracy(pred, gold, true), 0.5);
  EXPECT_DOUBLE_EQ(frame_accuracy(pred, gold, false), 1.0);
}

TEST(Report, JsonRoundTrip) {
  Rng rng(5);
  const auto gold = random_frames(rng, 30);
  const auto pred = random_frames(rng, 30);
  const auto report = build_report(pred, gold, true);
  EXPECT_EQ(report.example_count, 30u);
  EXPECT_EQ(report_from_json(report_to_json(report)), report);
}

TEST(Report, PropertiesOverRandomFrames) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const auto gold = random_frames(rng, n);
    auto pred = random_frames(rng, n);
    // Copy some gold frames so matches occur.
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.3)) pred[i] = gold[i];
    }
    const auto report = build_report(pred, gold, true);

    PrfCounts summed;
    for (const auto& row : report.per_slot) summed += row.counts;
    EXPECT_EQ(summed, slot_counts(pred, gold));
    EXPECT_TRUE(std::is_sorted(report.per_slot.begin(), report.per_slot.end(),
                               [](const auto& a, const auto& b) { return a.slot < b.slot; }));

    EXPECT_LE(report.slot_f1, std::max(report.slot_precision, report.slot_recall) + 1e-15);
    EXPECT_LE(report.user_act_f1,
              std::max(report.user_act_precision, report.user_act_recall) + 1e-15);
    EXPECT_LE(report.frame_accuracy, report.intent_accuracy);

    // Reordering examples does not change any micro-averaged score.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<SemanticFrame> gp, pp;
    for (auto i : order) {
      gp.push_back(gold[i]);
      pp.push_back(pred[i]);
    }
    EXPECT_EQ(build_report(pp, gp, true), report);
  }
}

TEST(Report, PredictedSpansOrderIrrelevant) {
  const std::vector<SemanticFrame> gold = {frame("x", {}, {{"a", 0, 1}, {"b", 2, 3}})};
  const std::vector<SemanticFrame> pred = {frame("x", {}, {{"b", 2, 3}, {"a", 0, 1}})};
  EXPECT_EQ(slot_counts(pred, gold), (PrfCounts{2, 0, 0}));
  EXPECT_DOUBLE_EQ(frame_accuracy(pred, gold, false), 1.0);
}
