#include "celt/model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace celt {

namespace {

constexpr double kMaskValue = -1e9;

template <typename T>
Tensor<T> random_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::vector<T> data(rows * cols);
  for (auto& v : data) v = static_cast<T>(rng.truncated_normal(stddev));
  return Tensor<T>::from({rows, cols}, std::move(data), true);
}

template <typename T>
Tensor<T> zeros_vec(std::size_t n) {
  return Tensor<T>::zeros({n}, true);
}

template <typename T>
Tensor<T> ones_vec(std::size_t n) {
  return Tensor<T>::full({n}, T(1), true);
}

template <typename T>
ClassifierHead<T> make_head(std::size_t hidden, std::size_t out, double stddev, Rng& rng) {
  return {random_matrix<T>(hidden, hidden, stddev, rng), zeros_vec<T>(hidden),
          random_matrix<T>(hidden, out, stddev, rng), zeros_vec<T>(out)};
}

template <typename T>
void append_head(std::vector<NamedTensor<T>>& out, const std::string& prefix,
                 const ClassifierHead<T>& head) {
  out.push_back({prefix + ".hidden.weight", head.hidden_weight});
  out.push_back({prefix + ".hidden.bias", head.hidden_bias});
  out.push_back({prefix + ".out.weight", head.out_weight});
  out.push_back({prefix + ".out.bias", head.out_bias});
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add_row(matmul(x, w), b);
}

template <typename U, typename T>
ClassifierHead<U> cast_head(const ClassifierHead<T>& h) {
  return {h.hidden_weight.template cast<U>(true), h.hidden_bias.template cast<U>(true),
          h.out_weight.template cast<U>(true), h.out_bias.template cast<U>(true)};
}

}  // namespace

// --- config -----------------------------------------------------------------

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
  };
  positive(hidden_size, "hidden_size");
  positive(ff_size, "ff_size");
  positive(num_heads, "num_heads");
  positive(max_sequence_length, "max_sequence_length");
  positive(token_vocab_size, "token_vocab_size");
  positive(num_system_acts, "num_system_acts");
  positive(num_intents, "num_intents");
  positive(num_user_acts, "num_user_acts");
  positive(num_slot_tags, "num_slot_tags");
  if (hidden_size % num_heads != 0) {
    throw ConfigError("model config: hidden_size " + std::to_string(hidden_size) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("model config: dropout must lie in [0, 1)");
  }
}

ModelConfig with_label_space(ModelConfig config, const LabelSpace& labels,
                             std::size_t token_vocab_size) {
  config.token_vocab_size = token_vocab_size;
  config.num_system_acts = std::max<std::size_t>(1, labels.system_acts.size());
  config.num_intents = std::max<std::size_t>(1, labels.intents.size());
  config.num_user_acts = std::max<std::size_t>(1, labels.user_acts.size());
  config.num_slot_tags = labels.slot_tags().size();
  return config;
}

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["num_layers"] = c.num_layers;
  j["hidden_size"] = c.hidden_size;
  j["ff_size"] = c.ff_size;
  j["num_heads"] = c.num_heads;
  j["max_sequence_length"] = c.max_sequence_length;
  j["token_vocab_size"] = c.token_vocab_size;
  j["num_system_acts"] = c.num_system_acts;
  j["num_intents"] = c.num_intents;
  j["num_user_acts"] = c.num_user_acts;
  j["num_slot_tags"] = c.num_slot_tags;
  j["dropout"] = c.dropout;
  j["layer_norm_epsilon"] = c.layer_norm_epsilon;
  j["init_stddev"] = c.init_stddev;
  j["use_crf"] = c.use_crf;
  j["enable_speaker_embeddings"] = c.enable_speaker_embeddings;
  j["enable_system_act_embeddings"] = c.enable_system_act_embeddings;
  j["enable_context"] = c.enable_context;
  j["system_act_scope"] =
      c.system_act_scope == SystemActScope::kAllPositions ? "all" : "query";
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text, ModelConfig c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("num_layers", c.num_layers);
    get("hidden_size", c.hidden_size);
    get("ff_size", c.ff_size);
    get("num_heads", c.num_heads);
    get("max_sequence_length", c.max_sequence_length);
    get("token_vocab_size", c.token_vocab_size);
    get("num_system_acts", c.num_system_acts);
    get("num_intents", c.num_intents);
    get("num_user_acts", c.num_user_acts);
    get("num_slot_tags", c.num_slot_tags);
    get("dropout", c.dropout);
    get("layer_norm_epsilon", c.layer_norm_epsilon);
    get("init_stddev", c.init_stddev);
    get("use_crf", c.use_crf);
    get("enable_speaker_embeddings", c.enable_speaker_embeddings);
    get("enable_system_act_embeddings", c.enable_system_act_embeddings);
    get("enable_context", c.enable_context);
    if (j.contains("system_act_scope")) {
      const auto scope = j.at("system_act_scope").get<std::string>();
      if (scope == "all") {
        c.system_act_scope = SystemActScope::kAllPositions;
      } else if (scope == "query") {
        c.system_act_scope = SystemActScope::kQueryOnly;
      } else {
        throw ConfigError("model config: system_act_scope must be 'all' or 'query'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

// --- parameters -------------------------------------------------------------

template <typename T>
std::vector<NamedTensor<T>> ModelParameters<T>::named_tensors() const {
  std::vector<NamedTensor<T>> out;
  out.push_back({"embeddings.token", token_embedding});
  out.push_back({"embeddings.position", position_embedding});
  out.push_back({"embeddings.segment", segment_embedding});
  out.push_back({"embeddings.speaker", speaker_embedding});
  out.push_back({"embeddings.system_act", system_act_embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string p = "encoder.layer" + std::to_string(l);
    for (std::size_t h = 0; h < layer.query.size(); ++h) {
      const std::string hp = p + ".attention.head" + std::to_string(h);
      out.push_back({hp + ".query", layer.query[h]});
      out.push_back({hp + ".key", layer.key[h]});
      out.push_back({hp + ".value", layer.value[h]});
    }
    out.push_back({p + ".attention.output", layer.output});
    out.push_back({p + ".attention.norm.gamma", layer.attention_norm_gamma});
    out.push_back({p + ".attention.norm.beta", layer.attention_norm_beta});
    out.push_back({p + ".ffn.in.weight", layer.ff_in_weight});
    out.push_back({p + ".ffn.in.bias", layer.ff_in_bias});
    out.push_back({p + ".ffn.out.weight", layer.ff_out_weight});
    out.push_back({p + ".ffn.out.bias", layer.ff_out_bias});
    out.push_back({p + ".ffn.norm.gamma", layer.ff_norm_gamma});
    out.push_back({p + ".ffn.norm.beta", layer.ff_norm_beta});
  }
  append_head(out, "heads.intent", intent);
  append_head(out, "heads.user_act", user_act);
  append_head(out, "heads.slot", slot);
  if (crf) {
    out.push_back({"heads.crf.transitions", crf->transitions});
    out.push_back({"heads.crf.start", crf->start});
    out.push_back({"heads.crf.end", crf->end});
  }
  out.push_back({"pretrain.mlm.bias", mlm_bias});
  append_head(out, "pretrain.nsp", nsp);
  return out;
}

template <typename T>
std::vector<Tensor<T>> ModelParameters<T>::tensors() const {
  std::vector<Tensor<T>> out;
  for (auto& nt : named_tensors()) out.push_back(nt.tensor);
  return out;
}

template <typename T>
void ModelParameters<T>::zero_grad() {
  for (auto& t : tensors()) t.zero_grad();
}

template <typename T>
template <typename U>
ModelParameters<U> ModelParameters<T>::cast() const {
  ModelParameters<U> out;
  auto c = [](const Tensor<T>& t) { return t.template cast<U>(true); };
  out.token_embedding = c(token_embedding);
  out.position_embedding = c(position_embedding);
  out.segment_embedding = c(segment_embedding);
  out.speaker_embedding = c(speaker_embedding);
  out.system_act_embedding = c(system_act_embedding);
  for (const auto& layer : layers) {
    EncoderLayer<U> l;
    for (const auto& t : layer.query) l.query.push_back(c(t));
    for (const auto& t : layer.key) l.key.push_back(c(t));
    for (const auto& t : layer.value) l.value.push_back(c(t));
    l.output = c(layer.output);
    l.ff_in_weight = c(layer.ff_in_weight);
    l.ff_in_bias = c(layer.ff_in_bias);
    l.ff_out_weight = c(layer.ff_out_weight);
    l.ff_out_bias = c(layer.ff_out_bias);
    l.attention_norm_gamma = c(layer.attention_norm_gamma);
    l.attention_norm_beta = c(layer.attention_norm_beta);
    l.ff_norm_gamma = c(layer.ff_norm_gamma);
    l.ff_norm_beta = c(layer.ff_norm_beta);
    out.layers.push_back(std::move(l));
  }
  out.intent = cast_head<U>(intent);
  out.user_act = cast_head<U>(user_act);
  out.slot = cast_head<U>(slot);
  if (crf) out.crf = CrfParams<U>{c(crf->transitions), c(crf->start), c(crf->end)};
  out.mlm_bias = c(mlm_bias);
  out.nsp = cast_head<U>(nsp);
  return out;
}

template <typename T>
void init_heads(ModelParameters<T>& p, const ModelConfig& config, Rng& rng) {
  const std::size_t H = config.hidden_size;
  const double sd = config.init_stddev;
  p.intent = make_head<T>(H, config.num_intents, sd, rng);
  p.user_act = make_head<T>(H, config.num_user_acts, sd, rng);
  p.slot = make_head<T>(H, config.num_slot_tags, sd, rng);
  if (config.use_crf) {
    const std::size_t L = config.num_slot_tags;
    p.crf = CrfParams<T>{random_matrix<T>(L, L, sd, rng), zeros_vec<T>(L), zeros_vec<T>(L)};
  } else {
    p.crf.reset();
  }
  p.mlm_bias = zeros_vec<T>(config.token_vocab_size);
  p.nsp = make_head<T>(H, 1, sd, rng);
}

template <typename T>
ModelParameters<T> init_parameters(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t H = config.hidden_size;
  const std::size_t d = config.head_dim();
  const double sd = config.init_stddev;
  ModelParameters<T> p;
  p.token_embedding = random_matrix<T>(config.token_vocab_size, H, sd, rng);
  p.position_embedding = random_matrix<T>(config.max_sequence_length, H, sd, rng);
  p.segment_embedding = random_matrix<T>(ModelConfig::kSegmentVocab, H, sd, rng);
  p.speaker_embedding = random_matrix<T>(ModelConfig::kSpeakerVocab, H, sd, rng);
  p.system_act_embedding = random_matrix<T>(config.num_system_acts, H, sd, rng);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    EncoderLayer<T> layer;
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      layer.query.push_back(random_matrix<T>(H, d, sd, rng));
      layer.key.push_back(random_matrix<T>(H, d, sd, rng));
      layer.value.push_back(random_matrix<T>(H, d, sd, rng));
    }
    layer.output = random_matrix<T>(H, H, sd, rng);
    layer.ff_in_weight = random_matrix<T>(H, config.ff_size, sd, rng);
    layer.ff_in_bias = zeros_vec<T>(config.ff_size);
    layer.ff_out_weight = random_matrix<T>(config.ff_size, H, sd, rng);
    layer.ff_out_bias = zeros_vec<T>(H);
    layer.attention_norm_gamma = ones_vec<T>(H);
    layer.attention_norm_beta = zeros_vec<T>(H);
    layer.ff_norm_gamma = ones_vec<T>(H);
    layer.ff_norm_beta = zeros_vec<T>(H);
    p.layers.push_back(std::move(layer));
  }
  init_heads(p, config, rng);
  return p;
}

// --- forward ----------------------------------------------------------------

template <typename T>
Tensor<T> embed_input(const ModelInput& input, const ModelParameters<T>& params,
                      const ModelConfig& config, const ForwardOptions& options) {
  const std::size_t len = input.length();
  if (len > params.position_embedding.rows()) {
    throw ValidationError("input of length " + std::to_string(len) +
                          " exceeds the position table (" +
                          std::to_string(params.position_embedding.rows()) + ")");
  }
  Tensor<T> x = embedding_lookup(params.token_embedding, std::span(input.token_ids));
  x = add(x, embedding_lookup(params.position_embedding, std::span(input.position_ids)));
  x = add(x, embedding_lookup(params.segment_embedding, std::span(input.segment_ids)));
  if (config.enable_speaker_embeddings) {
    x = add(x, embedding_lookup(params.speaker_embedding, std::span(input.speaker_ids)));
  }
  if (config.enable_system_act_embeddings) {
    const std::size_t n_acts = params.system_act_embedding.rows();
    if (input.system_act_nhot.size() != n_acts) {
      throw DimensionError("system-act vector of length " +
                           std::to_string(input.system_act_nhot.size()) +
                           " does not match " + std::to_string(n_acts) + " system acts");
    }
    std::vector<T> a(input.system_act_nhot.begin(), input.system_act_nhot.end());
    // e^a = E^a a, as a [1 x H] row.
    auto e_a = matmul(Tensor<T>::from({1, n_acts}, std::move(a)), params.system_act_embedding);
    std::vector<std::uint8_t> rows;
    if (config.system_act_scope == SystemActScope::kQueryOnly) {
      rows.assign(len, 0);
      for (std::size_t i = input.query_start; i < input.query_end; ++i) rows[i] = 1;
    }
    x = add_row(x, e_a, std::span<const std::uint8_t>(rows));
  }
  if (options.training && config.dropout > 0.0) {
    if (!options.rng) throw ContractError("training forward pass needs an rng");
    x = dropout(x, config.dropout, true, *options.rng);
  }
  return x;
}

template <typename T>
Tensor<T> attention_mask_row(const ModelInput& input) {
  const std::size_t len = input.length();
  bool padded = false;
  std::vector<T> row(len, T(0));
  for (std::size_t i = 0; i < len; ++i) {
    if (i < input.attention_mask.size() && input.attention_mask[i] == 0) {
      row[i] = static_cast<T>(kMaskValue);
      padded = true;
    }
  }
  if (!padded) return Tensor<T>();
  return Tensor<T>::from({1, len}, std::move(row));
}

template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const Tensor<T>& mask, std::vector<Tensor<T>>* trace) {
  if (q.dim() != 2 || k.dim() != 2 || v.dim() != 2 || q.cols() != k.cols() ||
      k.rows() != v.rows()) {
    throw DimensionError("attention: incompatible Q " + shape_str(q.shape()) + ", K " +
                         shape_str(k.shape()) + ", V " + shape_str(v.shape()));
  }
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(k.cols()));
  Tensor<T> scores = scale(matmul_nt(q, k), inv_sqrt_dk);
  if (mask.defined()) scores = add_row(scores, mask);
  Tensor<T> weights = softmax(scores, 1);
  if (trace) trace->push_back(weights);
  return matmul(weights, v);
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const EncoderLayer<T>& layer,
                               const Tensor<T>& mask, std::vector<Tensor<T>>* trace) {
  if (layer.query.empty() || x.cols() % layer.query.size() != 0) {
    throw DimensionError("multi-head attention: hidden size " + std::to_string(x.cols()) +
                         " not divisible by " + std::to_string(layer.query.size()) +
                         " heads");
  }
  std::vector<Tensor<T>> heads;
  heads.reserve(layer.query.size());
  for (std::size_t h = 0; h < layer.query.size(); ++h) {
    heads.push_back(scaled_dot_attention(matmul(x, layer.query[h]), matmul(x, layer.key[h]),
                                         matmul(x, layer.value[h]), mask, trace));
  }
  Tensor<T> concat = heads.size() == 1 ? heads.front() : concat_cols(heads);
  return matmul(concat, layer.output);
}

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& b1,
                       const Tensor<T>& w2, const Tensor<T>& b2) {
  return linear(gelu(linear(x, w1, b1)), w2, b2);
}

template <typename T>
EncoderOutput<T> encode(const Tensor<T>& embedded, const ModelParameters<T>& params,
                        const ModelConfig& config, const Tensor<T>& mask,
                        const ForwardOptions& options, AttentionTrace<T>* trace) {
  const bool drop = options.training && config.dropout > 0.0;
  if (drop && !options.rng) throw ContractError("training forward pass needs an rng");
  const T eps = static_cast<T>(config.layer_norm_epsilon);
  Tensor<T> x = embedded;
  for (const auto& layer : params.layers) {
    std::vector<Tensor<T>>* layer_trace = nullptr;
    if (trace) layer_trace = &trace->layers.emplace_back();
    Tensor<T> attended = multi_head_attention(x, layer, mask, layer_trace);
    if (drop) attended = dropout(attended, config.dropout, true, *options.rng);
    x = layer_norm(add(x, attended), layer.attention_norm_gamma, layer.attention_norm_beta, eps);
    Tensor<T> ff = feed_forward(x, layer.ff_in_weight, layer.ff_in_bias, layer.ff_out_weight,
                                layer.ff_out_bias);
    if (drop) ff = dropout(ff, config.dropout, true, *options.rng);
    x = layer_norm(add(x, ff), layer.ff_norm_gamma, layer.ff_norm_beta, eps);
  }
  return {x};
}

template <typename T>
Tensor<T> intent_logits(const Tensor<T>& h_cls, const ModelParameters<T>& params) {
  const auto& head = params.intent;
  return linear(tanh(linear(h_cls, head.hidden_weight, head.hidden_bias)), head.out_weight,
                head.out_bias);
}

template <typename T>
Tensor<T> user_act_logits(const Tensor<T>& h_cls, const ModelParameters<T>& params) {
  const auto& head = params.user_act;
  return linear(tanh(linear(h_cls, head.hidden_weight, head.hidden_bias)), head.out_weight,
                head.out_bias);
}

template <typename T>
Tensor<T> slot_logits(const Tensor<T>& hidden, std::span<const std::int32_t> word_starts,
                      const ModelParameters<T>& params) {
  const auto& head = params.slot;
  Tensor<T> words = gather_rows(hidden, word_starts);
  return linear(gelu(linear(words, head.hidden_weight, head.hidden_bias)), head.out_weight,
                head.out_bias);
}

template <typename T>
Tensor<T> predict_intent(const Tensor<T>& h_cls, const ModelParameters<T>& params) {
  return softmax(intent_logits(h_cls, params), 1);
}

template <typename T>
UserActPrediction<T> predict_user_acts(const Tensor<T>& h_cls, const ModelParameters<T>& params,
                                       double threshold) {
  UserActPrediction<T> out;
  out.probabilities = sigmoid(user_act_logits(h_cls, params));
  const auto p = out.probabilities.data();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (static_cast<double>(p[k]) > threshold) out.acts.push_back(static_cast<std::int32_t>(k));
  }
  return out;
}

template <typename T>
Tensor<T> predict_slots(const Tensor<T>& hidden, std::span<const std::int32_t> word_starts,
                        const ModelParameters<T>& params) {
  return softmax(slot_logits(hidden, word_starts, params), 1);
}

template <typename T>
ModelOutputs<T> forward(const ModelInput& input, const ModelParameters<T>& params,
                        const ModelConfig& config, const ForwardOptions& options,
                        AttentionTrace<T>* trace) {
  Tensor<T> embedded = embed_input(input, params, config, options);
  Tensor<T> mask = attention_mask_row<T>(input);
  EncoderOutput<T> enc = encode(embedded, params, config, mask, options, trace);
  const std::int32_t cls_row = 0;
  Tensor<T> h_cls = gather_rows(enc.hidden, std::span<const std::int32_t>(&cls_row, 1));
  ModelOutputs<T> out;
  out.hidden = enc.hidden;
  out.intent_logits = intent_logits(h_cls, params);
  out.user_act_logits = user_act_logits(h_cls, params);
  out.slot_logits = slot_logits(enc.hidden, std::span(input.word_starts), params);
  return out;
}

template <typename T>
Tensor<T> HeadLosses<T>::total() const {
  Tensor<T> acc;
  for (const auto* t : {&intent, &slots, &user_acts}) {
    if (!t->defined()) continue;
    acc = acc.defined() ? add(acc, *t) : *t;
  }
  return acc.defined() ? acc : Tensor<T>::scalar(T(0));
}

template <typename T>
HeadLosses<T> head_losses(const ModelOutputs<T>& outputs, const Targets& targets,
                          const ModelParameters<T>& params, const ModelConfig& config,
                          const LossFlags& flags) {
  HeadLosses<T> out;
  if (flags.intent) {
    if (targets.intents.empty()) throw ContractError("intent head enabled without a target");
    if (flags.ic_mode == IcMode::kSoftmax) {
      if (targets.intents.size() > 1) {
        throw ContractError("multi-intent target requires sigmoid intent loss");
      }
      out.intent = softmax_cross_entropy(outputs.intent_logits, std::span(targets.intents));
    } else {
      std::vector<T> nhot(outputs.intent_logits.numel(), T(0));
      for (auto id : targets.intents) nhot.at(static_cast<std::size_t>(id)) = T(1);
      out.intent = sigmoid_cross_entropy(outputs.intent_logits, std::span<const T>(nhot));
    }
  }
  if (flags.slots) {
    if (targets.slot_tags.size() != outputs.slot_logits.rows()) {
      throw ContractError("slot head enabled without one tag per query word");
    }
    if (config.use_crf) {
      if (!params.crf) throw ContractError("use_crf set but the model has no CRF parameters");
      out.slots = crf_negative_log_likelihood(outputs.slot_logits, std::span(targets.slot_tags),
                                              *params.crf);
    } else if (!targets.slot_tags.empty()) {
      out.slots = softmax_cross_entropy(outputs.slot_logits, std::span(targets.slot_tags));
    }
  }
  if (flags.user_acts) {
    if (targets.user_acts.size() != outputs.user_act_logits.numel()) {
      throw ContractError("user-act head enabled without an n-hot target of matching size");
    }
    std::vector<T> y(targets.user_acts.begin(), targets.user_acts.end());
    out.user_acts = sigmoid_cross_entropy(outputs.user_act_logits, std::span<const T>(y));
  }
  return out;
}

template <typename T>
Tensor<T> joint_loss(const ModelOutputs<T>& outputs, const Targets& targets,
                     const ModelParameters<T>& params, const ModelConfig& config,
                     const LossFlags& flags) {
  return head_losses(outputs, targets, params, config, flags).total();
}

template <typename T>
FramePrediction predict_ids(const ModelInput& input, const ModelParameters<T>& params,
                            const ModelConfig& config, double threshold) {
  NoGradGuard no_grad;
  const ModelOutputs<T> out = forward(input, params, config);
  FramePrediction pred;
  const auto il = out.intent_logits.data();
  pred.intent = static_cast<std::int32_t>(std::max_element(il.begin(), il.end()) - il.begin());
  const auto al = out.user_act_logits.data();
  for (std::size_t k = 0; k < al.size(); ++k) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(al[k])));
    if (p > threshold) pred.user_acts.push_back(static_cast<std::int32_t>(k));
  }
  const std::size_t L = out.slot_logits.cols();
  const auto sl = out.slot_logits.data();
  if (config.use_crf && params.crf) {
    pred.slot_tags = crf_decode(sl, L, *params.crf);
  } else {
    for (std::size_t w = 0; w < out.slot_logits.rows(); ++w) {
      auto row = sl.subspan(w * L, L);
      pred.slot_tags.push_back(
          static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return pred;
}

SemanticFrame frame_from_ids(const FramePrediction& ids, const LabelSpace& labels) {
  SemanticFrame frame;
  if (static_cast<std::size_t>(ids.intent) < labels.intents.size()) {
    frame.intent = labels.intents[static_cast<std::size_t>(ids.intent)];
  }
  for (auto a : ids.user_acts) {
    if (static_cast<std::size_t>(a) < labels.user_acts.size()) {
      frame.user_acts.insert(labels.user_acts[static_cast<std::size_t>(a)]);
    }
  }
  const auto tag_space = labels.slot_tags();
  std::vector<std::string> tags;
  for (auto t : ids.slot_tags) {
    tags.push_back(static_cast<std::size_t>(t) < tag_space.size()
                       ? tag_space[static_cast<std::size_t>(t)]
                       : "O");
  }
  frame.slots = bio_decode(tags);
  return frame;
}

template <typename T>
SemanticFrame predict_frame(const ModelInput& input, const ModelParameters<T>& params,
                            const ModelConfig& config, const LabelSpace& labels,
                            double threshold) {
  return frame_from_ids(predict_ids(input, params, config, threshold), labels);
}

#define CELT_INSTANTIATE(T)                                                                  \
  template struct ModelParameters<T>;                                                        \
  template ModelParameters<T> init_parameters<T>(const ModelConfig&, Rng&);                  \
  template void init_heads<T>(ModelParameters<T>&, const ModelConfig&, Rng&);                \
  template Tensor<T> embed_input<T>(const ModelInput&, const ModelParameters<T>&,            \
                                    const ModelConfig&, const ForwardOptions&);              \
  template Tensor<T> attention_mask_row<T>(const ModelInput&);                               \
  template Tensor<T> scaled_dot_attention<T>(const Tensor<T>&, const Tensor<T>&,             \
                                             const Tensor<T>&, const Tensor<T>&,             \
                                             std::vector<Tensor<T>>*);                       \
  template Tensor<T> multi_head_attention<T>(const Tensor<T>&, const EncoderLayer<T>&,       \
                                             const Tensor<T>&, std::vector<Tensor<T>>*);     \
  template Tensor<T> feed_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                     const Tensor<T>&, const Tensor<T>&);                    \
  template EncoderOutput<T> encode<T>(const Tensor<T>&, const ModelParameters<T>&,           \
                                      const ModelConfig&, const Tensor<T>&,                  \
                                      const ForwardOptions&, AttentionTrace<T>*);            \
  template Tensor<T> intent_logits<T>(const Tensor<T>&, const ModelParameters<T>&);          \
  template Tensor<T> user_act_logits<T>(const Tensor<T>&, const ModelParameters<T>&);        \
  template Tensor<T> slot_logits<T>(const Tensor<T>&, std::span<const std::int32_t>,         \
                                    const ModelParameters<T>&);                              \
  template Tensor<T> predict_intent<T>(const Tensor<T>&, const ModelParameters<T>&);         \
  template UserActPrediction<T> predict_user_acts<T>(const Tensor<T>&,                       \
                                                     const ModelParameters<T>&, double);     \
  template Tensor<T> predict_slots<T>(const Tensor<T>&, std::span<const std::int32_t>,       \
                                      const ModelParameters<T>&);                            \
  template ModelOutputs<T> forward<T>(const ModelInput&, const ModelParameters<T>&,          \
                                      const ModelConfig&, const ForwardOptions&,             \
                                      AttentionTrace<T>*);                                   \
  template struct HeadLosses<T>;                                                             \
  template HeadLosses<T> head_losses<T>(const ModelOutputs<T>&, const Targets&,              \
                                        const ModelParameters<T>&, const ModelConfig&,       \
                                        const LossFlags&);                                   \
  template Tensor<T> joint_loss<T>(const ModelOutputs<T>&, const Targets&,                   \
                                   const ModelParameters<T>&, const ModelConfig&,            \
                                   const LossFlags&);                                        \
  template FramePrediction predict_ids<T>(const ModelInput&, const ModelParameters<T>&,      \
                                          const ModelConfig&, double);                       \
  template SemanticFrame predict_frame<T>(const ModelInput&, const ModelParameters<T>&,      \
                                          const ModelConfig&, const LabelSpace&, double);

CELT_INSTANTIATE(float)
CELT_INSTANTIATE(double)

template ModelParameters<double> ModelParameters<float>::cast<double>() const;
template ModelParameters<float> ModelParameters<double>::cast<float>() const;
template ModelParameters<float> ModelParameters<float>::cast<float>() const;
template ModelParameters<double> ModelParameters<double>::cast<double>() const;

#undef CELT_INSTANTIATE

}  // namespace celt
