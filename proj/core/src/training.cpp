#include "celt/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "celt/hash.hpp"
#include "celt/optim.hpp"

namespace celt {

namespace {

template <typename T>
Tensor<T> sum_defined(std::initializer_list<const Tensor<T>*> parts) {
  Tensor<T> acc;
  for (const auto* t : parts) {
    if (!t->defined()) continue;
    acc = acc.defined() ? add(acc, *t) : *t;
  }
  return acc.defined() ? acc : Tensor<T>::scalar(T(0));
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add_row(matmul(x, w), b);
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  return order;
}

// Runs `step(index, rng, batch_scale)` for every example in shuffled
// mini-batches, with one Adam update after each batch. Returns the mean
// per-example loss.
template <typename StepFn>
double run_epoch(std::size_t count, std::size_t batch_size, const SeedStreams& streams,
                 std::size_t epoch, std::vector<Tensor<float>>& tensors,
                 AdamState<float>& adam, StepFn&& step) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  const auto order = shuffled_order(count, streams.stream("shuffle", epoch));
  Rng dropout_rng = streams.stream("dropout", epoch);
  double total = 0.0;
  for (std::size_t begin = 0; begin < count; begin += batch_size) {
    const std::size_t end = std::min(count, begin + batch_size);
    const float batch_scale = 1.0f / static_cast<float>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      total += step(order[i], dropout_rng, batch_scale);
    }
    adam_step(tensors, adam);
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double fit_pretrain(ModelParameters<float>& params, const ModelConfig& config,
                    const std::vector<Document>& documents, const MaskingConfig& masking,
                    const StageSpec& spec, std::vector<EpochMetrics>& metrics) {
  masking.validate();
  const SeedStreams streams(spec.seed);
  auto tensors = params.tensors();
  AdamState<float> adam;
  adam.learning_rate = spec.learning_rate;
  double last = 0.0;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    Rng pair_rng = streams.stream("nsp", epoch);
    const auto pairs = make_nsp_pairs(documents, pair_rng);
    Rng mask_rng = streams.stream("mask", epoch);
    std::vector<ModelInput> inputs;
    std::vector<MlmExample> masks;
    inputs.reserve(pairs.size());
    for (const auto& pair : pairs) {
      auto input = nsp_pair_input(pair, config.max_sequence_length, config.num_system_acts);
      auto mlm = spec.flags.mlm
                     ? make_mlm_example(input.token_ids, masking, config.token_vocab_size,
                                        mask_rng)
                     : MlmExample{input.token_ids, {}, {}};
      input.token_ids = mlm.corrupted;
      inputs.push_back(std::move(input));
      masks.push_back(std::move(mlm));
    }
    last = run_epoch(
        inputs.size(), spec.batch_size, streams, epoch, tensors, adam,
        [&](std::size_t i, Rng& rng, float batch_scale) {
          const ForwardOptions opts{true, &rng};
          auto embedded = embed_input(inputs[i], params, config, opts);
          auto enc = encode(embedded, params, config, attention_mask_row<float>(inputs[i]), opts);
          std::optional<bool> is_next;
          if (spec.flags.nsp) is_next = pairs[i].is_next;
          auto loss = pretrain_loss(enc.hidden, params, masks[i], is_next);
          const double value = loss.item();
          backward(scale(loss, batch_scale));
          return value;
        });
    metrics.push_back({epoch + 1, last, std::nullopt});
  }
  return last;
}

std::string join_intents(const std::vector<std::int32_t>& ids, const LabelSpace& labels) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += '+';
    out += labels.intents.at(static_cast<std::size_t>(id));
  }
  return out;
}

}  // namespace

// --- stage specs ------------------------------------------------------------

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return "PRETRAIN";
    case Stage::kUnsupAdapt: return "UNSUP_ADAPT";
    case Stage::kSupAdapt: return "SUP_ADAPT";
    case Stage::kFinetune: return "FINETUNE";
  }
  return "FINETUNE";
}

Stage stage_from_name(const std::string& name) {
  for (Stage s : {Stage::kPretrain, Stage::kUnsupAdapt, Stage::kSupAdapt, Stage::kFinetune}) {
    if (stage_name(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + name + "'");
}

StageSpec StageSpec::defaults(Stage stage) {
  StageSpec s;
  s.stage = stage;
  switch (stage) {
    case Stage::kPretrain:
      s.flags = {true, true, false, false, false};
      s.learning_rate = 1e-4;
      break;
    case Stage::kUnsupAdapt:
      s.flags = {true, true, false, false, false};
      s.learning_rate = 2e-5;
      break;
    case Stage::kSupAdapt:
      s.flags = {false, false, true, true, false};
      s.learning_rate = 5e-5;
      break;
    case Stage::kFinetune:
      s.flags = {false, false, true, true, true};
      s.learning_rate = 5e-5;
      break;
  }
  return s;
}

void StageSpec::validate() const {
  if (flags != defaults(stage).flags) {
    throw ConfigError("stage " + stage_name(stage) + " has loss flags that do not match " +
                      "its definition");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
}

std::string stage_spec_to_json(const StageSpec& s) {
  nlohmann::json j;  // std::map keys: sorted
  j["stage"] = stage_name(s.stage);
  j["epochs"] = s.epochs;
  j["batch_size"] = s.batch_size;
  j["learning_rate"] = s.learning_rate;
  j["seed"] = s.seed;
  j["corpus"] = s.corpus;
  j["flags"] = {{"mlm", s.flags.mlm},
                {"nsp", s.flags.nsp},
                {"ic", s.flags.ic},
                {"sf", s.flags.sf},
                {"uac", s.flags.uac}};
  j["ic_mode"] = s.ic_mode == IcMode::kSoftmax ? "SOFTMAX" : "SIGMOID";
  return j.dump();
}

StageSpec stage_spec_from_json(const std::string& text, StageSpec s) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ConfigError("stage config must be a JSON object");
    if (j.contains("stage")) {
      const Stage stage = stage_from_name(j.at("stage").get<std::string>());
      if (stage != s.stage) {
        const auto d = StageSpec::defaults(stage);
        s.stage = stage;
        s.flags = d.flags;
        s.learning_rate = d.learning_rate;
      }
    }
    if (j.contains("epochs")) s.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) s.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("learning_rate")) s.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("corpus")) s.corpus = j.at("corpus").get<std::string>();
    if (j.contains("flags")) {
      const auto& f = j.at("flags");
      if (f.contains("mlm")) s.flags.mlm = f.at("mlm").get<bool>();
      if (f.contains("nsp")) s.flags.nsp = f.at("nsp").get<bool>();
      if (f.contains("ic")) s.flags.ic = f.at("ic").get<bool>();
      if (f.contains("sf")) s.flags.sf = f.at("sf").get<bool>();
      if (f.contains("uac")) s.flags.uac = f.at("uac").get<bool>();
    }
    if (j.contains("ic_mode")) {
      const auto mode = j.at("ic_mode").get<std::string>();
      if (mode == "SOFTMAX") {
        s.ic_mode = IcMode::kSoftmax;
      } else if (mode == "SIGMOID") {
        s.ic_mode = IcMode::kSigmoid;
      } else {
        throw ConfigError("ic_mode must be SOFTMAX or SIGMOID");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("stage config: ") + e.what());
  }
  return s;
}

std::string stage_digest(const StageSpec& spec) {
  return sha256_hex(stage_spec_to_json(spec));
}

// --- lineage ----------------------------------------------------------------

std::string lineage_tag_name(LineageTag tag) {
  switch (tag) {
    case LineageTag::kNone: return "NONE";
    case LineageTag::kThetaA: return "THETA_A";
    case LineageTag::kThetaB: return "THETA_B";
    case LineageTag::kThetaC: return "THETA_C";
    case LineageTag::kFinal: return "FINAL";
  }
  return "NONE";
}

LineageTag lineage_tag_from_name(const std::string& name) {
  for (LineageTag t : {LineageTag::kNone, LineageTag::kThetaA, LineageTag::kThetaB,
                       LineageTag::kThetaC, LineageTag::kFinal}) {
    if (lineage_tag_name(t) == name) return t;
  }
  throw ValidationError("unknown lineage tag '" + name + "'");
}

LineageTag stage_result_tag(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return LineageTag::kThetaA;
    case Stage::kUnsupAdapt: return LineageTag::kThetaB;
    case Stage::kSupAdapt: return LineageTag::kThetaC;
    case Stage::kFinetune: return LineageTag::kFinal;
  }
  return LineageTag::kFinal;
}

bool legal_transition(LineageTag from, LineageTag to) {
  return static_cast<int>(to) > static_cast<int>(from);
}

// --- masking and NSP ----------------------------------------------------------

void MaskingConfig::validate() const {
  if (!(mask_probability > 0.0 && mask_probability < 1.0)) {
    throw ConfigError("mask_probability must lie in (0, 1)");
  }
  for (double f : {mask_token_fraction, random_token_fraction, keep_fraction}) {
    if (f < 0.0) throw ConfigError("masking fractions must be non-negative");
  }
  if (std::abs(mask_token_fraction + random_token_fraction + keep_fraction - 1.0) > 1e-9) {
    throw ConfigError("masking fractions must sum to 1");
  }
}

MlmExample make_mlm_example(std::span<const TokenId> ids, const MaskingConfig& masking,
                            std::size_t vocab_size, Rng& rng) {
  MlmExample ex;
  ex.corrupted.assign(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (Vocab::is_special(ids[i])) continue;
    if (!rng.bernoulli(masking.mask_probability)) continue;
    ex.positions.push_back(static_cast<std::int32_t>(i));
    ex.originals.push_back(ids[i]);
    const double r = rng.uniform();
    if (r < masking.mask_token_fraction) {
      ex.corrupted[i] = Vocab::mask_id();
    } else if (r < masking.mask_token_fraction + masking.random_token_fraction) {
      if (vocab_size > kNumSpecialTokens) {
        ex.corrupted[i] = static_cast<TokenId>(
            kNumSpecialTokens + rng.below(vocab_size - kNumSpecialTokens));
      } else {
        ex.corrupted[i] = Vocab::mask_id();
      }
    }
  }
  return ex;
}

std::vector<Document> dialogue_documents(const Corpus& corpus, const Vocab& vocab) {
  std::vector<Document> docs;
  docs.reserve(corpus.dialogues.size());
  for (const auto& d : corpus.dialogues) {
    Document doc;
    for (const auto& turn : d.turns) {
      Segment seg;
      seg.ids = encode_utterance(turn.utterance, vocab).ids;
      seg.speaker = turn.speaker == Speaker::kUser ? kSpeakerUser : kSpeakerSystem;
      if (!seg.ids.empty()) doc.push_back(std::move(seg));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> text_documents(const std::vector<std::vector<std::string>>& documents,
                                     const Vocab& vocab) {
  std::vector<Document> docs;
  for (const auto& sentences : documents) {
    Document doc;
    for (const auto& s : sentences) {
      Segment seg{encode_utterance(s, vocab).ids, kSpeakerSpecial};
      if (!seg.ids.empty()) doc.push_back(std::move(seg));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<NspPair> make_nsp_pairs(const std::vector<Document>& documents, Rng& rng) {
  std::vector<std::size_t> nonempty;
  std::size_t adjacent = 0;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    if (!documents[d].empty()) nonempty.push_back(d);
    if (documents[d].size() >= 2) adjacent += documents[d].size() - 1;
  }
  if (nonempty.size() < 2 || adjacent == 0) {
    throw ValidationError("NSP needs at least two nonempty documents and one with two "
                          "segments to form positive and negative pairs");
  }
  std::vector<NspPair> pairs;
  pairs.reserve(adjacent);
  for (std::size_t d = 0; d < documents.size(); ++d) {
    const auto& doc = documents[d];
    for (std::size_t i = 0; i + 1 < doc.size(); ++i) {
      NspPair pair;
      pair.a = doc[i];
      if (rng.bernoulli(0.5)) {
        pair.b = doc[i + 1];
        pair.is_next = true;
      } else {
        // Uniform over the other nonempty documents, then over its segments.
        const auto self = static_cast<std::size_t>(
            std::lower_bound(nonempty.begin(), nonempty.end(), d) - nonempty.begin());
        std::size_t k = rng.below(nonempty.size() - 1);
        if (k >= self) ++k;
        const std::size_t pick = nonempty[k];
        const auto& other = documents[pick];
        pair.b = other[rng.below(other.size())];
        pair.is_next = false;
      }
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

ModelInput nsp_pair_input(const NspPair& pair, std::size_t max_length,
                          std::size_t num_system_acts) {
  if (max_length < 3) throw ValidationError("max_sequence_length too small for a pair");
  std::vector<TokenId> a = pair.a.ids;
  std::vector<TokenId> b = pair.b.ids;
  while (a.size() + b.size() + 3 > max_length) {
    if (a.size() >= b.size()) {
      a.erase(a.begin());
    } else {
      b.pop_back();
    }
  }
  ModelInput in;
  auto push = [&](TokenId id, std::int32_t segment, std::int32_t speaker) {
    in.position_ids.push_back(static_cast<std::int32_t>(in.token_ids.size()));
    in.token_ids.push_back(id);
    in.segment_ids.push_back(segment);
    in.speaker_ids.push_back(speaker);
    in.attention_mask.push_back(1);
  };
  push(Vocab::cls_id(), kSegmentHistory, kSpeakerSpecial);
  for (auto id : a) push(id, kSegmentHistory, pair.a.speaker);
  push(Vocab::sep_id(), kSegmentHistory, kSpeakerSpecial);
  in.query_start = in.token_ids.size();
  for (auto id : b) push(id, kSegmentQuery, pair.b.speaker);
  in.query_end = in.token_ids.size();
  push(Vocab::sep_id(), kSegmentQuery, kSpeakerSpecial);
  in.system_act_nhot.assign(num_system_acts, 0);
  return in;
}

// --- losses -----------------------------------------------------------------

template <typename T>
Tensor<T> PretrainLosses<T>::total() const {
  return sum_defined<T>({&mlm, &nsp});
}

template <typename T>
Tensor<T> mlm_logits(const Tensor<T>& hidden, std::span<const std::int32_t> positions,
                     const ModelParameters<T>& params) {
  return add_row(matmul_nt(gather_rows(hidden, positions), params.token_embedding),
                 params.mlm_bias);
}

template <typename T>
Tensor<T> nsp_logit(const Tensor<T>& hidden, const ModelParameters<T>& params) {
  const std::int32_t cls = 0;
  auto h = gather_rows(hidden, std::span<const std::int32_t>(&cls, 1));
  const auto& head = params.nsp;
  return linear(tanh(linear(h, head.hidden_weight, head.hidden_bias)), head.out_weight,
                head.out_bias);
}

template <typename T>
PretrainLosses<T> pretrain_losses(const Tensor<T>& hidden, const ModelParameters<T>& params,
                                  const MlmExample& mlm, std::optional<bool> is_next) {
  PretrainLosses<T> out;
  if (!mlm.positions.empty()) {
    out.mlm = softmax_cross_entropy(mlm_logits(hidden, std::span(mlm.positions), params),
                                    std::span(mlm.originals));
  }
  if (is_next) {
    const T target = *is_next ? T(1) : T(0);
    out.nsp = sigmoid_cross_entropy(nsp_logit(hidden, params), std::span<const T>(&target, 1));
  }
  return out;
}

template <typename T>
Tensor<T> pretrain_loss(const Tensor<T>& hidden, const ModelParameters<T>& params,
                        const MlmExample& mlm, std::optional<bool> is_next) {
  return pretrain_losses(hidden, params, mlm, is_next).total();
}

template <typename T>
Tensor<T> supervised_adaptive_loss(const ModelOutputs<T>& outputs, const Targets& targets,
                                   const ModelParameters<T>& params, const ModelConfig& config,
                                   IcMode ic_mode) {
  LossFlags flags;
  flags.user_acts = false;
  flags.ic_mode = ic_mode;
  return joint_loss(outputs, targets, params, config, flags);
}

// --- transfer -----------------------------------------------------------------

ModelParameters<float> transfer_weights(const ModelParameters<float>& source,
                                        const ModelConfig& from, const ModelConfig& to,
                                        Rng& rng) {
  std::vector<std::string> diffs;
  auto cmp = [&](const char* name, std::size_t a, std::size_t b) {
    if (a != b) diffs.push_back(std::string(name) + " " + std::to_string(a) + " vs " +
                                std::to_string(b));
  };
  cmp("num_layers", from.num_layers, to.num_layers);
  cmp("hidden_size", from.hidden_size, to.hidden_size);
  cmp("num_heads", from.num_heads, to.num_heads);
  cmp("ff_size", from.ff_size, to.ff_size);
  cmp("token_vocab_size", from.token_vocab_size, to.token_vocab_size);
  cmp("max_sequence_length", from.max_sequence_length, to.max_sequence_length);
  cmp("source layers", source.layers.size(), from.num_layers);
  if (!diffs.empty()) {
    std::string msg = "cannot transfer weights:";
    for (const auto& d : diffs) msg += " " + d + ";";
    throw ConfigError(msg);
  }
  ModelParameters<float> out = init_parameters<float>(to, rng);
  out.token_embedding = source.token_embedding.clone(true);
  out.position_embedding = source.position_embedding.clone(true);
  out.segment_embedding = source.segment_embedding.clone(true);
  out.speaker_embedding = source.speaker_embedding.clone(true);
  if (source.system_act_embedding.rows() == to.num_system_acts) {
    out.system_act_embedding = source.system_act_embedding.clone(true);
  }
  for (std::size_t l = 0; l < to.num_layers; ++l) {
    const auto& s = source.layers[l];
    auto& d = out.layers[l];
    for (std::size_t h = 0; h < to.num_heads; ++h) {
      d.query[h] = s.query[h].clone(true);
      d.key[h] = s.key[h].clone(true);
      d.value[h] = s.value[h].clone(true);
    }
    d.output = s.output.clone(true);
    d.ff_in_weight = s.ff_in_weight.clone(true);
    d.ff_in_bias = s.ff_in_bias.clone(true);
    d.ff_out_weight = s.ff_out_weight.clone(true);
    d.ff_out_bias = s.ff_out_bias.clone(true);
    d.attention_norm_gamma = s.attention_norm_gamma.clone(true);
    d.attention_norm_beta = s.attention_norm_beta.clone(true);
    d.ff_norm_gamma = s.ff_norm_gamma.clone(true);
    d.ff_norm_beta = s.ff_norm_beta.clone(true);
  }
  return out;
}

// --- training loops ---------------------------------------------------------------

std::vector<EpochMetrics> fit_supervised(ModelParameters<float>& params,
                                         const ModelConfig& config,
                                         const std::vector<ModelInput>& train,
                                         const FitOptions& options,
                                         const StageData* validation) {
  for (const auto& in : train) {
    if (!in.targets) throw ValidationError("supervised training input without targets");
  }
  const SeedStreams streams(options.seed);
  auto tensors = params.tensors();
  AdamState<float> adam;
  adam.learning_rate = options.learning_rate;
  std::vector<EpochMetrics> metrics;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const double mean = run_epoch(
        train.size(), options.batch_size, streams, epoch, tensors, adam,
        [&](std::size_t i, Rng& rng, float batch_scale) {
          const auto out = forward(train[i], params, config, ForwardOptions{true, &rng});
          auto loss = joint_loss(out, *train[i].targets, params, config, options.flags);
          const double value = loss.item();
          backward(scale(loss, batch_scale));
          return value;
        });
    EpochMetrics m{epoch + 1, mean, std::nullopt};
    if (validation && validation->labels && !validation->validation.empty()) {
      m.validation_frame_accuracy =
          evaluate_inputs(validation->validation, params, config, *validation->labels,
                          validation->threshold, validation->include_acts)
              .frame_accuracy;
    }
    metrics.push_back(m);
  }
  return metrics;
}

StageResult run_stage(ModelParameters<float> params, const ModelConfig& config,
                      ModelLineage lineage, const StageSpec& spec, const StageData& data) {
  spec.validate();
  const LineageTag next = stage_result_tag(spec.stage);
  if (!legal_transition(lineage.tag, next)) {
    throw ContractError("illegal lineage transition " + lineage_tag_name(lineage.tag) +
                        " -> " + lineage_tag_name(next) + " for stage " +
                        stage_name(spec.stage));
  }
  StageResult result;
  const bool pretraining = spec.stage == Stage::kPretrain || spec.stage == Stage::kUnsupAdapt;
  if (pretraining) {
    if (data.documents.empty()) throw ValidationError("stage corpus is empty");
    fit_pretrain(params, config, data.documents, data.masking, spec, result.epochs);
  } else {
    if (data.train.empty()) throw ValidationError("stage corpus is empty");
    FitOptions opts;
    opts.epochs = spec.epochs;
    opts.batch_size = spec.batch_size;
    opts.learning_rate = spec.learning_rate;
    opts.seed = spec.seed;
    opts.flags.intent = spec.flags.ic;
    opts.flags.slots = spec.flags.sf;
    opts.flags.user_acts = spec.flags.uac;
    opts.flags.ic_mode = spec.ic_mode;
    result.epochs = fit_supervised(params, config, data.train, opts, &data);
  }
  result.params = std::move(params);
  result.lineage.parent = lineage.tag;
  result.lineage.tag = next;
  result.lineage.history = std::move(lineage.history);
  result.lineage.history.push_back(stage_digest(spec));
  return result;
}

// --- evaluation helpers -----------------------------------------------------------

SemanticFrame gold_frame(const ModelInput& input, const LabelSpace& labels) {
  if (!input.targets) throw ValidationError("input has no targets");
  const Targets& t = *input.targets;
  SemanticFrame f;
  f.intent = join_intents(t.intents, labels);
  for (std::size_t k = 0; k < t.user_acts.size() && k < labels.user_acts.size(); ++k) {
    if (t.user_acts[k]) f.user_acts.insert(labels.user_acts[k]);
  }
  const auto tags = labels.slot_tags();
  std::vector<std::string> names;
  for (auto id : t.slot_tags) names.push_back(tags.at(static_cast<std::size_t>(id)));
  f.slots = bio_decode(names);
  return f;
}

std::vector<SemanticFrame> predict_frames(const std::vector<ModelInput>& inputs,
                                          const ModelParameters<float>& params,
                                          const ModelConfig& config, const LabelSpace& labels,
                                          double threshold) {
  std::vector<SemanticFrame> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(predict_frame(in, params, config, labels, threshold));
  return out;
}

MetricsReport evaluate_inputs(const std::vector<ModelInput>& inputs,
                              const ModelParameters<float>& params, const ModelConfig& config,
                              const LabelSpace& labels, double threshold, bool include_acts) {
  std::vector<SemanticFrame> gold;
  gold.reserve(inputs.size());
  for (const auto& in : inputs) gold.push_back(gold_frame(in, labels));
  return build_report(predict_frames(inputs, params, config, labels, threshold), gold,
                      include_acts);
}

double select_threshold(const std::array<double, 3>& f1) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < f1.size(); ++i) {
    if (f1[i] >= f1[best]) best = i;
  }
  return kThresholdGrid[best];
}

double tune_threshold(const ModelParameters<float>& params, const ModelConfig& config,
                      const std::vector<ModelInput>& validation, const LabelSpace& labels) {
  std::vector<std::set<std::string>> gold;
  bool any = false;
  for (const auto& in : validation) {
    gold.push_back(gold_frame(in, labels).user_acts);
    any = any || !gold.back().empty();
  }
  if (!any) throw ValidationError("threshold tuning needs validation turns with user acts");
  std::vector<std::vector<double>> probs;
  {
    NoGradGuard no_grad;
    for (const auto& in : validation) {
      const auto out = forward(in, params, config);
      std::vector<double> p;
      for (float v : out.user_act_logits.data()) p.push_back(1.0 / (1.0 + std::exp(-double(v))));
      probs.push_back(std::move(p));
    }
  }
  std::array<double, 3> f1{};
  for (std::size_t g = 0; g < kThresholdGrid.size(); ++g) {
    std::vector<std::set<std::string>> pred;
    for (const auto& p : probs) {
      std::set<std::string> acts;
      for (std::size_t k = 0; k < p.size() && k < labels.user_acts.size(); ++k) {
        if (p[k] > kThresholdGrid[g]) acts.insert(labels.user_acts[k]);
      }
      pred.push_back(std::move(acts));
    }
    f1[g] = user_act_f1(pred, gold).f1;
  }
  return select_threshold(f1);
}

// --- ablation -----------------------------------------------------------------------

std::vector<AblationRow> run_ablation(const AblationSuite& suite) {
  const ModelConfig base =
      with_label_space(suite.base, suite.train.labels, suite.vocab.size());
  struct Variant {
    const char* name;
    bool pretrained, speaker, context, system_acts;
  };
  const Variant variants[] = {
      {"CELT", true, true, true, true},
      {"- pretrain", false, true, true, true},
      {"- speaker embeddings", false, false, true, true},
      {"- context utterances", false, false, false, true},
      {"- system act embeddings", false, false, false, false},
  };
  if (!suite.pretrained) {
    throw ValidationError("ablation needs a pretrained encoder for the baseline row");
  }
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow row;
    row.name = v.name;
    row.pretrained = v.pretrained;
    row.config = base;
    row.config.enable_speaker_embeddings = base.enable_speaker_embeddings && v.speaker;
    row.config.enable_context = base.enable_context && v.context;
    row.config.enable_system_act_embeddings = base.enable_system_act_embeddings && v.system_acts;
    const auto icfg = row.config.input_config();
    const auto train = build_corpus_inputs(suite.train, suite.vocab, suite.train.labels, icfg);
    const auto val =
        build_corpus_inputs(suite.validation, suite.vocab, suite.train.labels, icfg);
    const auto test = build_corpus_inputs(suite.test, suite.vocab, suite.train.labels, icfg);
    Rng init = SeedStreams(suite.finetune.seed).stream("init");
    ModelParameters<float> params =
        v.pretrained ? transfer_weights(*suite.pretrained, suite.pretrained_config, row.config,
                                        init)
                     : init_parameters<float>(row.config, init);
    FitOptions opts;
    opts.epochs = suite.finetune.epochs;
    opts.batch_size = suite.finetune.batch_size;
    opts.learning_rate = suite.finetune.learning_rate;
    opts.seed = suite.finetune.seed;
    opts.flags.user_acts = suite.train.has_user_acts();
    fit_supervised(params, row.config, train, opts);
    row.threshold = 0.5;
    if (suite.tune_threshold && suite.validation.has_user_acts() && !val.empty()) {
      row.threshold = tune_threshold(params, row.config, val, suite.train.labels);
    }
    row.report = evaluate_inputs(test, params, row.config, suite.train.labels, row.threshold,
                                 suite.test.has_user_acts());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["variant"] = r.name;
    o["pretrained"] = r.pretrained;
    o["speaker_embeddings"] = r.config.enable_speaker_embeddings;
    o["context_utterances"] = r.config.enable_context;
    o["system_act_embeddings"] = r.config.enable_system_act_embeddings;
    o["threshold"] = r.threshold;
    o["metrics"] = nlohmann::ordered_json::parse(report_to_json(r.report));
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

#define CELT_INSTANTIATE(T)                                                                \
  template struct PretrainLosses<T>;                                                       \
  template Tensor<T> mlm_logits<T>(const Tensor<T>&, std::span<const std::int32_t>,        \
                                   const ModelParameters<T>&);                             \
  template Tensor<T> nsp_logit<T>(const Tensor<T>&, const ModelParameters<T>&);            \
  template PretrainLosses<T> pretrain_losses<T>(const Tensor<T>&, const ModelParameters<T>&, \
                                                const MlmExample&, std::optional<bool>);   \
  template Tensor<T> pretrain_loss<T>(const Tensor<T>&, const ModelParameters<T>&,         \
                                      const MlmExample&, std::optional<bool>);             \
  template Tensor<T> supervised_adaptive_loss<T>(const ModelOutputs<T>&, const Targets&,   \
                                                 const ModelParameters<T>&,                \
                                                 const ModelConfig&, IcMode);

CELT_INSTANTIATE(float)
CELT_INSTANTIATE(double)

#undef CELT_INSTANTIATE

}  // namespace celt
