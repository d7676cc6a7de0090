#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "celt/synthetic.hpp"
#include "celt/training.hpp"

using namespace celt;

namespace {

struct Fixture {
  Corpus corpus;
  Vocab vocab;
  ModelConfig config;
  std::vector<ModelInput> inputs;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    SyntheticConfig cfg;
    cfg.dialogues = 12;
    f.corpus = generate_synthetic_corpus(41, cfg);
    std::string text;
    for (const auto& d : f.corpus.dialogues) {
      for (const auto& t : d.turns) text += t.utterance + "\n";
    }
    f.vocab = build_vocab(text, 150);
    ModelConfig c;
    c.num_layers = 1;
    c.hidden_size = 8;
    c.ff_size = 12;
    c.num_heads = 2;
    c.max_sequence_length = 64;
    c.dropout = 0.0;
    f.config = with_label_space(c, f.corpus.labels, f.vocab.size());
    f.inputs = build_corpus_inputs(f.corpus, f.vocab, f.corpus.labels, f.config.input_config());
    return f;
  }();
  return f;
}

ModelParameters<float> fresh(const ModelConfig& config, std::uint64_t seed = 5) {
  Rng rng(seed);
  return init_parameters<float>(config, rng);
}

bool same_bits(const Tensor32& a, const Tensor32& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

bool same_params(const ModelParameters<float>& a, const ModelParameters<float>& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!same_bits(ta[i], tb[i])) return false;
  }
  return true;
}

std::vector<TokenId> plain_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = static_cast<TokenId>(kNumSpecialTokens + rng.below(vocab - kNumSpecialTokens));
  return ids;
}

std::vector<ModelInput> first_inputs(std::size_t n) {
  const auto& all = fixture().inputs;
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(n, all.size()))};
}

}  // namespace

TEST(StageSpec, DefaultsAndValidation) {
  EXPECT_DOUBLE_EQ(StageSpec::defaults(Stage::kPretrain).learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(StageSpec::defaults(Stage::kUnsupAdapt).learning_rate, 2e-5);
  EXPECT_DOUBLE_EQ(StageSpec::defaults(Stage::kSupAdapt).learning_rate, 5e-5);
  EXPECT_DOUBLE_EQ(StageSpec::defaults(Stage::kFinetune).learning_rate, 5e-5);
  for (Stage s : {Stage::kPretrain, Stage::kUnsupAdapt, Stage::kSupAdapt, Stage::kFinetune}) {
    EXPECT_NO_THROW(StageSpec::defaults(s).validate());
    EXPECT_EQ(stage_from_name(stage_name(s)), s);
  }
  auto bad = StageSpec::defaults(Stage::kSupAdapt);
  bad.flags.uac = true;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = StageSpec::defaults(Stage::kFinetune);
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = StageSpec::defaults(Stage::kFinetune);
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(StageSpec, FinetuneFlagsAreSupAdaptPlusUserActs) {
  const auto sup = StageSpec::defaults(Stage::kSupAdapt).flags;
  const auto fin = StageSpec::defaults(Stage::kFinetune).flags;
  EXPECT_EQ(fin.ic, sup.ic);
  EXPECT_EQ(fin.sf, sup.sf);
  EXPECT_FALSE(sup.uac);
  EXPECT_TRUE(fin.uac);
  const auto pre = StageSpec::defaults(Stage::kPretrain).flags;
  EXPECT_EQ(pre, StageSpec::defaults(Stage::kUnsupAdapt).flags);
  EXPECT_TRUE(pre.mlm && pre.nsp && !pre.ic && !pre.sf && !pre.uac);
}

TEST(StageSpec, JsonRoundTripAndDigest) {
  auto s = StageSpec::defaults(Stage::kFinetune);
  s.epochs = 7;
  s.seed = 99;
  s.corpus = "train.json";
  s.ic_mode = IcMode::kSigmoid;
  EXPECT_EQ(stage_spec_from_json(stage_spec_to_json(s), StageSpec{}), s);
  EXPECT_EQ(stage_digest(s), stage_digest(s));
  EXPECT_EQ(stage_digest(s).size(), 64u);
  auto t = s;
  t.seed = 100;
  EXPECT_NE(stage_digest(s), stage_digest(t));
  const auto overlaid = stage_spec_from_json(R"({"epochs": 3})", s);
  EXPECT_EQ(overlaid.epochs, 3u);
  EXPECT_EQ(overlaid.seed, 99u);
  EXPECT_THROW(stage_spec_from_json("[1]", s), ConfigError);
  EXPECT_THROW(stage_spec_from_json(R"({"ic_mode": "maybe"})", s), ConfigError);
}

TEST(Lineage, OnlyForwardMoves) {
  const LineageTag order[] = {LineageTag::kNone, LineageTag::kThetaA, LineageTag::kThetaB,
                              LineageTag::kThetaC, LineageTag::kFinal};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(lineage_tag_from_name(lineage_tag_name(order[i])), order[i]);
    for (int j = 0; j < 5; ++j) {
      EXPECT_EQ(legal_transition(order[i], order[j]), j > i) << i << "->" << j;
    }
  }
  EXPECT_THROW(lineage_tag_from_name("THETA_Z"), ValidationError);
  EXPECT_EQ(stage_result_tag(Stage::kPretrain), LineageTag::kThetaA);
  EXPECT_EQ(stage_result_tag(Stage::kFinetune), LineageTag::kFinal);
}

TEST(Masking, ValidateRejectsBadFractions) {
  MaskingConfig m;
  EXPECT_NO_THROW(m.validate());
  m.mask_probability = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = MaskingConfig{};
  m.keep_fraction = 0.2;
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Masking, TinyProbabilitySelectsNothing) {
  Rng rng(1);
  MaskingConfig m;
  m.mask_probability = 1e-12;
  const auto ids = plain_ids(2000, 100, rng);
  const auto ex = make_mlm_example(ids, m, 100, rng);
  EXPECT_TRUE(ex.positions.empty());
  EXPECT_EQ(ex.corrupted, ids);
}

TEST(Masking, SpecialsAreNeverSelected) {
  Rng rng(2);
  std::vector<TokenId> ids;
  for (int i = 0; i < 500; ++i) {
    ids.push_back(Vocab::cls_id());
    ids.push_back(Vocab::sep_id());
    ids.push_back(Vocab::eou_id());
    ids.push_back(Vocab::pad_id());
  }
  MaskingConfig m;
  m.mask_probability = 0.9;
  const auto ex = make_mlm_example(ids, m, 50, rng);
  EXPECT_TRUE(ex.positions.empty());
}

TEST(Masking, SelectionRateAndReplacementMixWithinThreeSigma) {
  Rng rng(3);
  const std::size_t n = 10000, vocab = 200;
  const auto ids = plain_ids(n, vocab, rng);
  const auto ex = make_mlm_example(ids, MaskingConfig{}, vocab, rng);
  const double k = static_cast<double>(ex.positions.size());
  EXPECT_NEAR(k, 1500.0, 3.0 * std::sqrt(n * 0.15 * 0.85));

  std::size_t masked = 0;
  std::vector<bool> selected(n, false);
  for (std::size_t j = 0; j < ex.positions.size(); ++j) {
    const auto p = static_cast<std::size_t>(ex.positions[j]);
    selected[p] = true;
    EXPECT_EQ(ex.originals[j], ids[p]);
    if (ex.corrupted[p] == Vocab::mask_id()) ++masked;
    EXPECT_FALSE(Vocab::is_special(ex.corrupted[p]) && ex.corrupted[p] != Vocab::mask_id());
  }
  EXPECT_NEAR(masked, 0.8 * k, 3.0 * std::sqrt(k * 0.8 * 0.2));
  for (std::size_t i = 0; i < n; ++i) {
    if (!selected[i]) {
      EXPECT_EQ(ex.corrupted[i], ids[i]) << i;
    }
  }
}

TEST(Nsp, NeedsTwoDocuments) {
  Document one = {{{10, 11}, kSpeakerUser}, {{12}, kSpeakerSystem}};
  Rng rng(1);
  EXPECT_THROW(make_nsp_pairs({one}, rng), ValidationError);
  Document single = {{{13}, kSpeakerUser}};
  EXPECT_THROW(make_nsp_pairs({single, single}, rng), ValidationError);
  EXPECT_NO_THROW(make_nsp_pairs({one, single}, rng));
}

TEST(Nsp, BalancedAndPositivesAreAdjacent) {
  std::vector<Document> docs;
  TokenId next = 100;
  for (int d = 0; d < 100; ++d) {
    Document doc;
    for (int s = 0; s < 101; ++s) doc.push_back({{next++}, kSpeakerSpecial});
    docs.push_back(std::move(doc));
  }
  Rng rng(4);
  const auto pairs = make_nsp_pairs(docs, rng);
  ASSERT_EQ(pairs.size(), 10000u);
  std::size_t positives = 0;
  for (const auto& p : pairs) {
    // Every segment carries a unique id, so adjacency is id + 1 within a document.
    const bool adjacent = p.b.ids[0] == p.a.ids[0] + 1 && (p.a.ids[0] - 100) % 101 != 100;
    if (p.is_next) {
      ++positives;
      EXPECT_TRUE(adjacent);
    } else {
      EXPECT_NE((p.a.ids[0] - 100) / 101, (p.b.ids[0] - 100) / 101);
    }
  }
  EXPECT_NEAR(positives, 5000.0, 3.0 * std::sqrt(10000 * 0.25));
}

TEST(Nsp, PairInputLayout) {
  NspPair pair{{{10, 11, 12}, kSpeakerUser}, {{13, 14}, kSpeakerSystem}, true};
  const auto in = nsp_pair_input(pair, 64, 3);
  EXPECT_EQ(in.token_ids,
            (std::vector<TokenId>{Vocab::cls_id(), 10, 11, 12, Vocab::sep_id(), 13, 14,
                                  Vocab::sep_id()}));
  EXPECT_EQ(in.segment_ids, (std::vector<std::int32_t>{0, 0, 0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(in.query_start, 5u);
  const auto cut = nsp_pair_input(pair, 6, 3);
  EXPECT_EQ(cut.length(), 6u);
  EXPECT_THROW(nsp_pair_input(pair, 2, 3), ValidationError);
}

TEST(PretrainLoss, IsMlmPlusNsp) {
  const auto& f = fixture();
  Rng rng(6);
  const auto params = init_parameters<double>(f.config, rng);
  const auto& in = f.inputs[0];
  MaskingConfig m;
  m.mask_probability = 0.5;
  const auto ex = make_mlm_example(in.token_ids, m, f.config.token_vocab_size, rng);
  ASSERT_FALSE(ex.positions.empty());
  ModelInput corrupted = in;
  corrupted.token_ids = ex.corrupted;
  const auto hidden = forward(corrupted, params, f.config).hidden;
  const auto parts = pretrain_losses(hidden, params, ex, true);
  EXPECT_NEAR(pretrain_loss(hidden, params, ex, true).item(),
              parts.mlm.item() + parts.nsp.item(), 1e-12);

  const MlmExample none;
  const auto nsp_only = pretrain_loss(hidden, params, none, false).item();
  EXPECT_NEAR(nsp_only, pretrain_losses(hidden, params, none, false).nsp.item(), 1e-15);
  EXPECT_FALSE(pretrain_losses(hidden, params, none, false).mlm.defined());
}

TEST(SupervisedAdaptiveLoss, IgnoresUserActs) {
  const auto& f = fixture();
  Rng rng(7);
  const auto params = init_parameters<double>(f.config, rng);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& in = f.inputs[i];
    const auto out = forward(in, params, f.config);
    LossFlags no_acts;
    no_acts.user_acts = false;
    const double expected = joint_loss(out, *in.targets, params, f.config, no_acts).item();
    EXPECT_NEAR(supervised_adaptive_loss(out, *in.targets, params, f.config, IcMode::kSoftmax)
                    .item(),
                expected, 1e-12);
    const auto parts = head_losses(out, *in.targets, params, f.config, LossFlags{});
    EXPECT_NEAR(joint_loss(out, *in.targets, params, f.config).item() - expected,
                parts.user_acts.item(), 1e-12);
  }
}

TEST(SupervisedAdaptiveLoss, MultiIntentNeedsSigmoid) {
  const auto& f = fixture();
  Rng rng(8);
  const auto params = init_parameters<double>(f.config, rng);
  const auto& in = f.inputs[0];
  Targets t = *in.targets;
  ASSERT_GE(f.config.num_intents, 2u);
  t.intents = {0, 1};
  const auto out = forward(in, params, f.config);
  EXPECT_THROW(supervised_adaptive_loss(out, t, params, f.config, IcMode::kSoftmax),
               ContractError);
  EXPECT_NO_THROW(supervised_adaptive_loss(out, t, params, f.config, IcMode::kSigmoid));
}

TEST(Transfer, CopiesEncoderAndReinitializesHeads) {
  const auto& f = fixture();
  const auto source = fresh(f.config, 11);
  ModelConfig target = f.config;
  target.num_intents = f.config.num_intents + 2;
  Rng rng(12);
  const auto moved = transfer_weights(source, f.config, target, rng);
  EXPECT_TRUE(same_bits(moved.token_embedding, source.token_embedding));
  EXPECT_TRUE(same_bits(moved.position_embedding, source.position_embedding));
  EXPECT_TRUE(same_bits(moved.system_act_embedding, source.system_act_embedding));
  for (std::size_t l = 0; l < source.layers.size(); ++l) {
    EXPECT_TRUE(same_bits(moved.layers[l].output, source.layers[l].output));
    EXPECT_TRUE(same_bits(moved.layers[l].ff_in_weight, source.layers[l].ff_in_weight));
    EXPECT_TRUE(same_bits(moved.layers[l].query[0], source.layers[l].query[0]));
  }
  EXPECT_EQ(moved.intent.out_weight.shape(),
            (Shape{f.config.hidden_size, target.num_intents}));
  EXPECT_FALSE(same_bits(moved.slot.hidden_weight, source.slot.hidden_weight));

  // With zero training epochs the encoder output is unchanged.
  const auto& in = f.inputs[0];
  EXPECT_TRUE(same_bits(forward(in, moved, target).hidden, forward(in, source, f.config).hidden));
}

TEST(Transfer, NewSystemActInventoryIsFreshlyInitialized) {
  const auto& f = fixture();
  const auto source = fresh(f.config, 13);
  ModelConfig target = f.config;
  target.num_system_acts = f.config.num_system_acts + 1;
  Rng rng(14);
  const auto moved = transfer_weights(source, f.config, target, rng);
  EXPECT_EQ(moved.system_act_embedding.shape()[0], target.num_system_acts);
  EXPECT_TRUE(same_bits(moved.token_embedding, source.token_embedding));
}

TEST(Transfer, ArchitectureMismatchNamesEveryDimension) {
  const auto& f = fixture();
  const auto source = fresh(f.config);
  ModelConfig target = f.config;
  target.hidden_size = 12;
  target.num_layers = 2;
  Rng rng(1);
  try {
    transfer_weights(source, f.config, target, rng);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("hidden_size"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("num_layers"), std::string::npos);
  }
}

TEST(RunStage, ZeroEpochsLeavesParametersAndExtendsLineage) {
  const auto& f = fixture();
  const auto params = fresh(f.config);
  auto spec = StageSpec::defaults(Stage::kFinetune);
  spec.epochs = 0;
  StageData data;
  data.train = first_inputs(4);
  ModelLineage parent{LineageTag::kThetaB, LineageTag::kThetaA, {"a", "b"}};
  const auto result = run_stage(params, f.config, parent, spec, data);
  EXPECT_TRUE(same_params(result.params, params));
  EXPECT_EQ(result.lineage.tag, LineageTag::kFinal);
  EXPECT_EQ(result.lineage.parent, LineageTag::kThetaB);
  EXPECT_EQ(result.lineage.history,
            (std::vector<std::string>{"a", "b", stage_digest(spec)}));
}

TEST(RunStage, RejectsBackwardLineageAndEmptyData) {
  const auto& f = fixture();
  auto spec = StageSpec::defaults(Stage::kSupAdapt);
  StageData data;
  data.train = first_inputs(2);
  EXPECT_THROW(run_stage(fresh(f.config), f.config, {LineageTag::kThetaC, {}, {}}, spec, data),
               ContractError);
  EXPECT_THROW(run_stage(fresh(f.config), f.config, {}, spec, StageData{}), ValidationError);
  EXPECT_THROW(run_stage(fresh(f.config), f.config, {}, StageSpec::defaults(Stage::kPretrain),
                         StageData{}),
               ValidationError);
}

TEST(RunStage, SameInputsGiveBitIdenticalParameters) {
  const auto& f = fixture();
  auto spec = StageSpec::defaults(Stage::kFinetune);
  spec.epochs = 2;
  spec.batch_size = 3;
  spec.learning_rate = 1e-3;
  spec.seed = 17;
  StageData data;
  data.train = first_inputs(8);
  const auto a = run_stage(fresh(f.config), f.config, {}, spec, data);
  const auto b = run_stage(fresh(f.config), f.config, {}, spec, data);
  EXPECT_TRUE(same_params(a.params, b.params));
  EXPECT_EQ(a.lineage, b.lineage);
}

TEST(RunStage, PretrainingContinuesFromGivenParameters) {
  const auto& f = fixture();
  auto spec = StageSpec::defaults(Stage::kPretrain);
  spec.learning_rate = 1e-3;
  StageData data;
  data.documents = dialogue_documents(f.corpus, f.vocab);
  const auto r = run_stage(fresh(f.config), f.config, {}, spec, data);
  EXPECT_EQ(r.lineage.tag, LineageTag::kThetaA);
  ASSERT_EQ(r.epochs.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.epochs[0].train_loss));
  EXPECT_FALSE(same_params(r.params, fresh(f.config)));
}

TEST(FitSupervised, LossDecreasesOnTenExamples) {
  const auto& f = fixture();
  auto params = fresh(f.config, 21);
  FitOptions opts;
  opts.epochs = 30;
  opts.batch_size = 5;
  opts.learning_rate = 1e-2;
  opts.seed = 3;
  const auto metrics = fit_supervised(params, f.config, first_inputs(10), opts);
  ASSERT_EQ(metrics.size(), 30u);
  EXPECT_LT(metrics.back().train_loss, 0.5 * metrics.front().train_loss);
}

TEST(Threshold, SelectionPrefersLargestOnTies) {
  EXPECT_DOUBLE_EQ(select_threshold({0.5, 0.5, 0.5}), 0.5);
  EXPECT_DOUBLE_EQ(select_threshold({0.2, 0.9, 0.3}), 0.4);
  EXPECT_DOUBLE_EQ(select_threshold({0.9, 0.2, 0.3}), 0.3);
  EXPECT_DOUBLE_EQ(select_threshold({0.9, 0.9, 0.3}), 0.4);
}

TEST(Threshold, TunedValueIsOnTheGrid) {
  const auto& f = fixture();
  const auto params = fresh(f.config, 23);
  const double t = tune_threshold(params, f.config, f.inputs, f.corpus.labels);
  EXPECT_TRUE(t == 0.3 || t == 0.4 || t == 0.5) << t;

  std::vector<ModelInput> no_acts;
  for (const auto& in : f.inputs) {
    if (gold_frame(in, f.corpus.labels).user_acts.empty()) no_acts.push_back(in);
  }
  if (!no_acts.empty()) {
    EXPECT_THROW(tune_threshold(params, f.config, no_acts, f.corpus.labels), ValidationError);
  }
}

TEST(Evaluate, GoldFramesScorePerfectly) {
  const auto& f = fixture();
  std::vector<SemanticFrame> gold;
  for (const auto& in : f.inputs) gold.push_back(gold_frame(in, f.corpus.labels));
  const auto report = build_report(gold, gold, true);
  EXPECT_DOUBLE_EQ(report.frame_accuracy, 1.0);
  ModelInput bare = f.inputs[0];
  bare.targets.reset();
  EXPECT_THROW(gold_frame(bare, f.corpus.labels), ValidationError);
}

TEST(Ablation, FiveCumulativeRows) {
  const auto& f = fixture();
  const auto split = split_corpus(f.corpus, {0.5, 0.25, 0.25}, 1);
  AblationSuite suite;
  suite.base = f.config;
  suite.train = split.train;
  suite.validation = split.validation;
  suite.test = split.test;
  suite.vocab = f.vocab;
  suite.finetune.epochs = 1;
  EXPECT_THROW(run_ablation(suite), ValidationError);
  suite.pretrained = fresh(f.config);
  suite.pretrained_config = f.config;
  const auto rows = run_ablation(suite);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_TRUE(rows[0].pretrained);
  EXPECT_FALSE(rows[1].pretrained);
  EXPECT_FALSE(rows[2].config.enable_speaker_embeddings);
  EXPECT_TRUE(rows[2].config.enable_context);
  EXPECT_FALSE(rows[3].config.enable_context);
  EXPECT_TRUE(rows[3].config.enable_system_act_embeddings);
  EXPECT_FALSE(rows[4].config.enable_system_act_embeddings);
  EXPECT_FALSE(rows[4].config.enable_speaker_embeddings);
  for (const auto& r : rows) EXPECT_EQ(r.report.example_count, rows[0].report.example_count);
  const auto json = ablation_to_json(rows);
  EXPECT_NE(json.find("- context utterances"), std::string::npos);

  // The no-context variant sees no history tokens.
  const auto inputs =
      build_corpus_inputs(split.test, f.vocab, f.corpus.labels, rows[3].config.input_config());
  for (const auto& in : inputs) EXPECT_EQ(in.query_start, 1u);
}
