#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "celt/crf.hpp"
#include "celt/dialogue.hpp"
#include "celt/rng.hpp"
#include "celt/sequence.hpp"
#include "celt/tensor.hpp"

namespace celt {

enum class SystemActScope { kAllPositions, kQueryOnly };

/// Architecture and head sizes. Defaults are the desk-scale model; BERT-Base
/// sizes are 12 layers, H=768, ff=3072, 12 heads.
struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 64;
  std::size_t ff_size = 256;
  std::size_t num_heads = 4;
  std::size_t max_sequence_length = 128;

  std::size_t token_vocab_size = 0;
  std::size_t num_system_acts = 1;
  std::size_t num_intents = 1;
  std::size_t num_user_acts = 1;
  std::size_t num_slot_tags = 1;

  double dropout = 0.1;
  double layer_norm_epsilon = 1e-12;
  double init_stddev = 0.02;
  bool use_crf = false;
  bool enable_speaker_embeddings = true;
  bool enable_system_act_embeddings = true;
  /// Include previous turns in the input sequence.
  bool enable_context = true;
  SystemActScope system_act_scope = SystemActScope::kAllPositions;

  static constexpr std::size_t kSegmentVocab = 2;
  static constexpr std::size_t kSpeakerVocab = 3;

  /// Throws ConfigError on a zero size or hidden_size % num_heads != 0.
  void validate() const;
  std::size_t head_dim() const { return hidden_size / num_heads; }
  InputConfig input_config() const {
    return {max_sequence_length, enable_context};
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Sizes the label-dependent fields from a corpus label space (empty
/// inventories map to a single placeholder class).
ModelConfig with_label_space(ModelConfig config, const LabelSpace& labels,
                             std::size_t token_vocab_size);

std::string model_config_to_json(const ModelConfig& config);
/// Overlays the fields present in `json` onto `base`.
ModelConfig model_config_from_json(const std::string& json, ModelConfig base);

template <typename T>
struct EncoderLayer {
  // Per-head projections [H x H/h], without biases.
  std::vector<Tensor<T>> query, key, value;
  Tensor<T> output;  // W^O, [H x H]
  Tensor<T> ff_in_weight, ff_in_bias, ff_out_weight, ff_out_bias;
  Tensor<T> attention_norm_gamma, attention_norm_beta;
  Tensor<T> ff_norm_gamma, ff_norm_beta;
};

/// out = W_out * act(W_hidden * h + b_hidden) + b_out
template <typename T>
struct ClassifierHead {
  Tensor<T> hidden_weight, hidden_bias, out_weight, out_bias;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct ModelParameters {
  Tensor<T> token_embedding;     // [V x H]
  Tensor<T> position_embedding;  // [max_len x H]
  Tensor<T> segment_embedding;   // [2 x H]
  Tensor<T> speaker_embedding;   // [3 x H]
  Tensor<T> system_act_embedding;  // E^a stored as [|A| x H]
  std::vector<EncoderLayer<T>> layers;
  ClassifierHead<T> intent;    // tanh hidden layer
  ClassifierHead<T> user_act;  // tanh hidden layer
  ClassifierHead<T> slot;      // GELU hidden layer
  std::optional<CrfParams<T>> crf;
  // Pretraining heads. The MLM decoder is tied to token_embedding.
  Tensor<T> mlm_bias;      // [V]
  ClassifierHead<T> nsp;   // tanh hidden layer, one logit

  /// Every tensor, in the fixed order used by checkpoints and the optimizer.
  std::vector<NamedTensor<T>> named_tensors() const;
  std::vector<Tensor<T>> tensors() const;
  void zero_grad();

  template <typename U>
  ModelParameters<U> cast() const;
};

/// Truncated-normal(0.02) weights, zero biases, unit layer-norm gains.
template <typename T>
ModelParameters<T> init_parameters(const ModelConfig& config, Rng& rng);

/// Initializes only the classifier heads, CRF and pretraining heads.
template <typename T>
void init_heads(ModelParameters<T>& params, const ModelConfig& config, Rng& rng);

/// Softmax probabilities of every attention head, recorded per layer.
template <typename T>
struct AttentionTrace {
  std::vector<std::vector<Tensor<T>>> layers;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

template <typename T>
Tensor<T> embed_input(const ModelInput& input, const ModelParameters<T>& params,
                      const ModelConfig& config, const ForwardOptions& options = {});

/// Additive attention mask [1 x T]: 0 for real keys, -1e9 for padding.
template <typename T>
Tensor<T> attention_mask_row(const ModelInput& input);

/// softmax(Q K^T / sqrt(d_k) + mask) V. `mask` may be undefined.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, const Tensor<T>& mask,
                               std::vector<Tensor<T>>* trace = nullptr);

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const EncoderLayer<T>& layer,
                               const Tensor<T>& mask,
                               std::vector<Tensor<T>>* trace = nullptr);

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& b1,
                       const Tensor<T>& w2, const Tensor<T>& b2);

template <typename T>
struct EncoderOutput {
  Tensor<T> hidden;  // [T x H]; row 0 is [CLS]
};

/// Post-norm blocks: x = LN(x + Dropout(MHA(x))); x = LN(x + Dropout(FFN(x))).
template <typename T>
EncoderOutput<T> encode(const Tensor<T>& embedded, const ModelParameters<T>& params,
                        const ModelConfig& config, const Tensor<T>& mask,
                        const ForwardOptions& options = {},
                        AttentionTrace<T>* trace = nullptr);

template <typename T>
Tensor<T> intent_logits(const Tensor<T>& h_cls, const ModelParameters<T>& params);
template <typename T>
Tensor<T> user_act_logits(const Tensor<T>& h_cls, const ModelParameters<T>& params);
/// Emission scores [words x tags] from each word's first-subtoken state.
template <typename T>
Tensor<T> slot_logits(const Tensor<T>& hidden, std::span<const std::int32_t> word_starts,
                      const ModelParameters<T>& params);

/// p^i: softmax over intents.
template <typename T>
Tensor<T> predict_intent(const Tensor<T>& h_cls, const ModelParameters<T>& params);

template <typename T>
struct UserActPrediction {
  Tensor<T> probabilities;
  std::vector<std::int32_t> acts;  // ids with p > threshold
};

/// p^a: independent sigmoids; act k is predicted iff p^a(k) > threshold.
template <typename T>
UserActPrediction<T> predict_user_acts(const Tensor<T>& h_cls,
                                       const ModelParameters<T>& params,
                                       double threshold);

/// p^s: per-word softmax over slot tags.
template <typename T>
Tensor<T> predict_slots(const Tensor<T>& hidden, std::span<const std::int32_t> word_starts,
                        const ModelParameters<T>& params);

template <typename T>
struct ModelOutputs {
  Tensor<T> hidden;
  Tensor<T> intent_logits;
  Tensor<T> user_act_logits;
  Tensor<T> slot_logits;
};

/// Embed, encode and run all three heads.
template <typename T>
ModelOutputs<T> forward(const ModelInput& input, const ModelParameters<T>& params,
                        const ModelConfig& config, const ForwardOptions& options = {},
                        AttentionTrace<T>* trace = nullptr);

enum class IcMode { kSoftmax, kSigmoid };

struct LossFlags {
  bool intent = true;
  bool slots = true;
  bool user_acts = true;
  IcMode ic_mode = IcMode::kSoftmax;
};

template <typename T>
struct HeadLosses {
  Tensor<T> intent;     // undefined when disabled
  Tensor<T> slots;
  Tensor<T> user_acts;

  Tensor<T> total() const;
};

/// Per-head losses: softmax (or sigmoid) cross-entropy for intents, the
/// CRF NLL or per-word softmax cross-entropy for slots, sigmoid
/// cross-entropy for user acts. Throws ContractError when an enabled head
/// lacks targets, or for multi-intent targets under IcMode::kSoftmax.
template <typename T>
HeadLosses<T> head_losses(const ModelOutputs<T>& outputs, const Targets& targets,
                          const ModelParameters<T>& params, const ModelConfig& config,
                          const LossFlags& flags);

template <typename T>
Tensor<T> joint_loss(const ModelOutputs<T>& outputs, const Targets& targets,
                     const ModelParameters<T>& params, const ModelConfig& config,
                     const LossFlags& flags = {});

struct FramePrediction {
  std::int32_t intent = 0;
  std::vector<std::int32_t> user_acts;
  std::vector<std::int32_t> slot_tags;
};

/// Greedy (or Viterbi, with a CRF) decoding of one input, no dropout.
template <typename T>
FramePrediction predict_ids(const ModelInput& input, const ModelParameters<T>& params,
                            const ModelConfig& config, double threshold);

/// Full inference: ids mapped back to labels and BIO tags decoded to spans.
template <typename T>
SemanticFrame predict_frame(const ModelInput& input, const ModelParameters<T>& params,
                            const ModelConfig& config, const LabelSpace& labels,
                            double threshold);

SemanticFrame frame_from_ids(const FramePrediction& ids, const LabelSpace& labels);

}  // namespace celt
