#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "celt/dialogue.hpp"
#include "celt/metrics.hpp"
#include "celt/model.hpp"
#include "celt/sequence.hpp"
#include "celt/tokenizer.hpp"

namespace celt {

enum class Stage { kPretrain, kUnsupAdapt, kSupAdapt, kFinetune };

std::string stage_name(Stage stage);  // "PRETRAIN", "UNSUP_ADAPT", ...
Stage stage_from_name(const std::string& name);

struct StageLossFlags {
  bool mlm = false;
  bool nsp = false;
  bool ic = false;
  bool sf = false;
  bool uac = false;
  friend bool operator==(const StageLossFlags&, const StageLossFlags&) = default;
};

struct StageSpec {
  Stage stage = Stage::kFinetune;
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  double learning_rate = 5e-5;
  std::uint64_t seed = 0;
  std::string corpus;  // reference recorded in the digest
  StageLossFlags flags;
  IcMode ic_mode = IcMode::kSoftmax;

  /// Flags and learning rate for the stage: 1e-4 for PRETRAIN, 2e-5 for
  /// UNSUP_ADAPT, 5e-5 otherwise.
  static StageSpec defaults(Stage stage);
  /// PRETRAIN/UNSUP_ADAPT use exactly {mlm, nsp}; SUP_ADAPT {ic, sf};
  /// FINETUNE {ic, sf, uac}. Throws ConfigError otherwise.
  void validate() const;
  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

/// Canonical JSON (sorted keys, no whitespace).
std::string stage_spec_to_json(const StageSpec& spec);
/// Overlays the fields present in `json` onto `base`.
StageSpec stage_spec_from_json(const std::string& json, StageSpec base);
/// SHA-256 of the canonical JSON.
std::string stage_digest(const StageSpec& spec);

enum class LineageTag { kNone, kThetaA, kThetaB, kThetaC, kFinal };

std::string lineage_tag_name(LineageTag tag);  // "NONE", "THETA_A", ...
LineageTag lineage_tag_from_name(const std::string& name);
LineageTag stage_result_tag(Stage stage);
/// Forward moves along NONE -> A -> B -> C -> FINAL, skips included.
bool legal_transition(LineageTag from, LineageTag to);

struct ModelLineage {
  LineageTag tag = LineageTag::kNone;
  LineageTag parent = LineageTag::kNone;
  std::vector<std::string> history;  // stage digests, oldest first
  friend bool operator==(const ModelLineage&, const ModelLineage&) = default;
};

struct MaskingConfig {
  double mask_probability = 0.15;
  double mask_token_fraction = 0.8;
  double random_token_fraction = 0.1;
  double keep_fraction = 0.1;
  void validate() const;
};

struct MlmExample {
  std::vector<TokenId> corrupted;
  std::vector<std::int32_t> positions;
  std::vector<TokenId> originals;
};

/// Selects each non-special position with mask_probability, then
/// replaces it by [MASK], a random non-special token or itself.
MlmExample make_mlm_example(std::span<const TokenId> token_ids, const MaskingConfig& masking,
                            std::size_t vocab_size, Rng& rng);

/// One tokenized sentence or dialogue turn of a pretraining document.
struct Segment {
  std::vector<TokenId> ids;
  std::int32_t speaker = kSpeakerSpecial;
};
using Document = std::vector<Segment>;

/// Turns of each dialogue, with speaker ids.
std::vector<Document> dialogue_documents(const Corpus& corpus, const Vocab& vocab);
std::vector<Document> text_documents(const std::vector<std::vector<std::string>>& documents,
                                     const Vocab& vocab);

struct NspPair {
  Segment a;
  Segment b;
  bool is_next = false;
};

/// For each adjacent segment pair, a positive with probability 1/2, or a
/// negative whose B is a uniform segment from another document. Throws
/// ValidationError when fewer than two documents have segments or no
/// document has two.
std::vector<NspPair> make_nsp_pairs(const std::vector<Document>& documents, Rng& rng);

/// [CLS] A [SEP] B [SEP] with segments 0/1, truncated to fit.
ModelInput nsp_pair_input(const NspPair& pair, std::size_t max_length,
                          std::size_t num_system_acts);

template <typename T>
struct PretrainLosses {
  Tensor<T> mlm;  // undefined without masked positions
  Tensor<T> nsp;  // undefined without an NSP target
  Tensor<T> total() const;
};

/// MLM logits [positions x V] from the tied token embedding plus bias.
template <typename T>
Tensor<T> mlm_logits(const Tensor<T>& hidden, std::span<const std::int32_t> positions,
                     const ModelParameters<T>& params);
template <typename T>
Tensor<T> nsp_logit(const Tensor<T>& hidden, const ModelParameters<T>& params);

template <typename T>
PretrainLosses<T> pretrain_losses(const Tensor<T>& hidden, const ModelParameters<T>& params,
                                  const MlmExample& mlm, std::optional<bool> is_next);
template <typename T>
Tensor<T> pretrain_loss(const Tensor<T>& hidden, const ModelParameters<T>& params,
                        const MlmExample& mlm, std::optional<bool> is_next);

/// IC plus SF terms; user acts are ignored.
template <typename T>
Tensor<T> supervised_adaptive_loss(const ModelOutputs<T>& outputs, const Targets& targets,
                                   const ModelParameters<T>& params, const ModelConfig& config,
                                   IcMode ic_mode);

/// Copies the embedding tables and encoder layers; heads (and the CRF)
/// are freshly initialized for the target label space. The system-act
/// table is copied only when its size is unchanged. Throws ConfigError
/// naming every differing architecture dimension.
ModelParameters<float> transfer_weights(const ModelParameters<float>& source,
                                        const ModelConfig& source_config,
                                        const ModelConfig& target_config, Rng& rng);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per example
  std::optional<double> validation_frame_accuracy;
};

struct StageData {
  /// PRETRAIN / UNSUP_ADAPT inputs.
  std::vector<Document> documents;
  MaskingConfig masking;
  /// SUP_ADAPT / FINETUNE inputs, built with the model's input config.
  std::vector<ModelInput> train;
  std::vector<ModelInput> validation;
  const LabelSpace* labels = nullptr;  // needed for validation metrics
  double threshold = 0.5;
  bool include_acts = true;
};

struct StageResult {
  ModelParameters<float> params;
  ModelLineage lineage;
  std::vector<EpochMetrics> epochs;
};

/// Shuffled mini-batch Adam on the stage's loss. Gradients of a batch are
/// averaged over its examples; the last partial batch is kept. The
/// result is a pure function of (params, data, spec).
StageResult run_stage(ModelParameters<float> params, const ModelConfig& config,
                      ModelLineage lineage, const StageSpec& spec, const StageData& data);

/// Lower-level supervised loop with arbitrary head flags.
struct FitOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  double learning_rate = 5e-5;
  std::uint64_t seed = 0;
  LossFlags flags;
};
std::vector<EpochMetrics> fit_supervised(ModelParameters<float>& params,
                                         const ModelConfig& config,
                                         const std::vector<ModelInput>& train,
                                         const FitOptions& options,
                                         const StageData* validation = nullptr);

/// Gold frame of an input with targets.
SemanticFrame gold_frame(const ModelInput& input, const LabelSpace& labels);

std::vector<SemanticFrame> predict_frames(const std::vector<ModelInput>& inputs,
                                          const ModelParameters<float>& params,
                                          const ModelConfig& config, const LabelSpace& labels,
                                          double threshold);

MetricsReport evaluate_inputs(const std::vector<ModelInput>& inputs,
                              const ModelParameters<float>& params, const ModelConfig& config,
                              const LabelSpace& labels, double threshold, bool include_acts);

inline constexpr std::array<double, 3> kThresholdGrid = {0.3, 0.4, 0.5};

/// The grid value with the best F1; ties go to the largest threshold.
double select_threshold(const std::array<double, 3>& f1_per_threshold);

/// Picks t_u from kThresholdGrid by user-act F1 on the validation inputs.
/// Throws ValidationError when no validation example carries user acts.
double tune_threshold(const ModelParameters<float>& params, const ModelConfig& config,
                      const std::vector<ModelInput>& validation, const LabelSpace& labels);

struct AblationSuite {
  ModelConfig base;  // label sizes filled from the corpus
  Corpus train;
  Corpus validation;
  Corpus test;
  Vocab vocab;
  /// Encoder source for the pretrained variants. Must match `base`.
  std::optional<ModelParameters<float>> pretrained;
  ModelConfig pretrained_config;
  StageSpec finetune = StageSpec::defaults(Stage::kFinetune);
  bool tune_threshold = true;
};

struct AblationRow {
  std::string name;
  ModelConfig config;
  bool pretrained = false;
  double threshold = 0.5;
  MetricsReport report;
};

/// Baseline, then the cumulative removals of pretraining, speaker
/// embeddings, context utterances and system-act embeddings.
std::vector<AblationRow> run_ablation(const AblationSuite& suite);
std::string ablation_to_json(const std::vector<AblationRow>& rows);

}  // namespace celt
