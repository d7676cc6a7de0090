#include "celt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "celt/crf.hpp"
#include "celt/training.hpp"

namespace celt {

namespace {

using T64 = Tensor<double>;

T64 random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = rng.normal() * scale;
  return T64::from(std::move(shape), std::move(data), true);
}

// Contracts an arbitrary output with fixed random weights so every output
// entry gets a distinct upstream gradient.
T64 project(const T64& out, const std::vector<double>& weights) {
  return sum(mul(out, T64::from(out.shape(), std::vector<double>(
                                                 weights.begin(),
                                                 weights.begin() +
                                                     static_cast<std::ptrdiff_t>(out.numel())))));
}

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradCheckReport::worst_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.relative_error);
  return worst;
}

GradCheckReport check_gradients(const std::function<T64()>& loss_fn,
                                const std::vector<NamedTensor<double>>& inputs,
                                const GradCheckOptions& options) {
  for (const auto& in : inputs) {
    if (!in.tensor.requires_grad()) {
      throw ContractError("gradient check input '" + in.name + "' does not require grad");
    }
    T64 t = in.tensor;
    t.zero_grad();
  }
  backward(loss_fn());
  GradCheckReport report;
  for (const auto& in : inputs) {
    T64 t = in.tensor;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(t.numel());
    {
      NoGradGuard no_grad;
      auto data = t.mutable_data();
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + options.step;
        const double plus = loss_fn().item();
        data[i] = saved - options.step;
        const double minus = loss_fn().item();
        data[i] = saved;
        numeric[i] = (plus - minus) / (2.0 * options.step);
      }
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    diff = std::sqrt(diff);
    na = std::sqrt(na);
    nn = std::sqrt(nn);
    GradCheckEntry e;
    e.name = in.name;
    e.entries = numeric.size();
    e.analytic_norm = na;
    const double denom = std::max(na, nn);
    e.relative_error = denom < options.zero_floor ? 0.0 : diff / denom;
    e.passed = e.relative_error < options.tolerance;
    report.entries.push_back(std::move(e));
  }
  return report;
}

GradCheckReport check_tensor_ops(std::uint64_t seed, const GradCheckOptions& options) {
  Rng rng(seed);
  std::vector<double> weights(256);
  for (auto& w : weights) w = rng.normal();
  GradCheckReport all;
  auto run = [&](const std::string& op, const std::function<T64()>& fn,
                 std::vector<NamedTensor<double>> inputs) {
    for (auto& in : inputs) in.name = op + "." + in.name;
    auto r = check_gradients(fn, inputs, options);
    all.entries.insert(all.entries.end(), r.entries.begin(), r.entries.end());
  };

  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    run("matmul", [&] { return project(matmul(a, b), weights); }, {{"a", a}, {"b", b}});
  }
  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({5, 4}, rng);
    run("matmul_nt", [&] { return project(matmul_nt(a, b), weights); }, {{"a", a}, {"b", b}});
  }
  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    run("add", [&] { return project(add(a, b), weights); }, {{"a", a}, {"b", b}});
    run("mul", [&] { return project(mul(a, b), weights); }, {{"a", a}, {"b", b}});
    run("scale", [&] { return project(scale(a, 0.37), weights); }, {{"x", a}});
  }
  {
    auto x = random_tensor({4, 3}, rng), row = random_tensor({3}, rng);
    const std::vector<std::uint8_t> mask{1, 0, 1, 1};
    run("add_row", [&] { return project(add_row(x, row), weights); }, {{"x", x}, {"row", row}});
    run("add_row_masked",
        [&] { return project(add_row(x, row, std::span<const std::uint8_t>(mask)), weights); },
        {{"x", x}, {"row", row}});
  }
  {
    auto x = random_tensor({3, 4}, rng);
    run("tanh", [&] { return project(tanh(x), weights); }, {{"x", x}});
    run("sigmoid", [&] { return project(sigmoid(x), weights); }, {{"x", x}});
    run("gelu", [&] { return project(gelu(x), weights); }, {{"x", x}});
    run("softmax_rows", [&] { return project(softmax(x, 1), weights); }, {{"x", x}});
    run("softmax_cols", [&] { return project(softmax(x, 0), weights); }, {{"x", x}});
    run("sum", [&] { return scale(sum(x), 1.3); }, {{"x", x}});
  }
  {
    auto x = random_tensor({2, 3, 4}, rng);
    run("softmax_3d", [&] { return project(softmax(x, 1), weights); }, {{"x", x}});
  }
  {
    auto x = random_tensor({3, 5}, rng);
    auto gamma = random_tensor({5}, rng), beta = random_tensor({5}, rng);
    run("layer_norm", [&] { return project(layer_norm(x, gamma, beta, 1e-12), weights); },
        {{"x", x}, {"gamma", gamma}, {"beta", beta}});
  }
  {
    auto table = random_tensor({6, 3}, rng);
    const std::vector<std::int32_t> ids{4, 0, 4, 2};
    run("embedding_lookup",
        [&] { return project(embedding_lookup(table, std::span(ids)), weights); },
        {{"table", table}});
    run("gather_rows", [&] { return project(gather_rows(table, std::span(ids)), weights); },
        {{"x", table}});
  }
  {
    auto a = random_tensor({3, 2}, rng), b = random_tensor({3, 4}, rng);
    run("concat_cols", [&] { return project(concat_cols<double>({a, b}), weights); },
        {{"a", a}, {"b", b}});
  }
  {
    auto x = random_tensor({4, 4}, rng);
    // Same seed on every evaluation so the mask is fixed.
    run("dropout",
        [&] {
          Rng mask_rng(seed + 1);
          return project(dropout(x, 0.3, true, mask_rng), weights);
        },
        {{"x", x}});
  }
  {
    auto logits = random_tensor({4, 5}, rng);
    const std::vector<std::int32_t> targets{0, 4, 2, 2};
    run("softmax_cross_entropy",
        [&] { return softmax_cross_entropy(logits, std::span(targets)); }, {{"logits", logits}});
    const std::vector<double> soft{0, 1, 1, 0, 0.5};
    auto l2 = random_tensor({1, 5}, rng);
    run("sigmoid_cross_entropy",
        [&] { return sigmoid_cross_entropy(l2, std::span<const double>(soft)); },
        {{"logits", l2}});
  }
  {
    auto q = random_tensor({4, 3}, rng), k = random_tensor({4, 3}, rng);
    auto v = random_tensor({4, 3}, rng);
    auto mask = T64::from({1, 4}, {0.0, 0.0, 0.0, -1e9});
    run("scaled_dot_attention",
        [&] { return project(scaled_dot_attention(q, k, v, mask), weights); },
        {{"q", q}, {"k", k}, {"v", v}});
  }
  {
    auto x = random_tensor({3, 4}, rng);
    auto w1 = random_tensor({4, 6}, rng), b1 = random_tensor({6}, rng);
    auto w2 = random_tensor({6, 4}, rng), b2 = random_tensor({4}, rng);
    run("feed_forward", [&] { return project(feed_forward(x, w1, b1, w2, b2), weights); },
        {{"x", x}, {"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}});
  }
  {
    auto em = random_tensor({4, 3}, rng);
    CrfParams<double> crf{random_tensor({3, 3}, rng), random_tensor({3}, rng),
                          random_tensor({3}, rng)};
    const std::vector<std::int32_t> tags{2, 0, 0, 1};
    run("crf_nll", [&] { return crf_negative_log_likelihood(em, std::span(tags), crf); },
        {{"emissions", em},
         {"transitions", crf.transitions},
         {"start", crf.start},
         {"end", crf.end}});
  }
  return all;
}

namespace {

struct TinySetup {
  ModelConfig config;
  ModelParameters<double> params;
  ModelInput input;
};

// A padded dialogue-shaped input: [CLS] s s [EOU] u [SEP] q q q [SEP] [PAD] [PAD]
TinySetup tiny_setup(std::uint64_t seed, bool use_crf) {
  TinySetup s;
  auto& c = s.config;
  c.num_layers = 2;
  c.hidden_size = 8;
  c.ff_size = 12;
  c.num_heads = 2;
  c.max_sequence_length = 16;
  c.token_vocab_size = 14;
  c.num_system_acts = 4;
  c.num_intents = 3;
  c.num_user_acts = 3;
  c.num_slot_tags = 5;
  c.dropout = 0.1;
  c.use_crf = use_crf;
  // Larger weights than the production init keep every gradient well above
  // the finite-difference noise floor.
  c.init_stddev = 0.5;
  Rng rng(seed);
  s.params = init_parameters<double>(c, rng);
  for (auto& nt : s.params.named_tensors()) {
    auto data = nt.tensor.mutable_data();
    if (nt.name.find("bias") != std::string::npos || nt.name.find("beta") != std::string::npos ||
        nt.name.find("gamma") != std::string::npos || nt.name.find("crf") != std::string::npos) {
      for (auto& v : data) v += 0.3 * rng.normal();
    }
  }
  auto& in = s.input;
  in.token_ids = {2, 7, 8, 4, 9, 3, 10, 11, 12, 3, 0, 0};
  in.segment_ids = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  in.speaker_ids = {2, 1, 1, 2, 0, 2, 0, 0, 0, 2, 2, 2};
  in.attention_mask = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0};
  for (std::int32_t i = 0; i < 12; ++i) in.position_ids.push_back(i);
  in.system_act_nhot = {1, 0, 1, 0};
  in.word_starts = {6, 8};  // the second word spans two subtokens
  in.query_start = 6;
  in.query_end = 9;
  Targets t;
  t.intents = {1};
  t.user_acts = {1, 0, 1};
  t.slot_tags = {1, 2};
  in.targets = t;
  return s;
}

// Everything except the heads the loss never touches.
std::vector<NamedTensor<double>> trainable(const ModelParameters<double>& p, bool pretrain) {
  const std::string skip = pretrain ? "heads." : "pretrain.";
  std::vector<NamedTensor<double>> out;
  for (auto& nt : p.named_tensors()) {
    if (nt.name.rfind(skip, 0) != 0) out.push_back(nt);
  }
  return out;
}

}  // namespace

GradCheckReport check_model_gradients(std::uint64_t seed, bool use_crf,
                                      const GradCheckOptions& options) {
  TinySetup s = tiny_setup(seed, use_crf);
  auto loss_fn = [&] {
    Rng dropout_rng(seed ^ 0x5eedULL);
    const auto out = forward(s.input, s.params, s.config, ForwardOptions{true, &dropout_rng});
    return joint_loss(out, *s.input.targets, s.params, s.config);
  };
  return check_gradients(loss_fn, trainable(s.params, false), options);
}

GradCheckReport check_pretrain_gradients(std::uint64_t seed, const GradCheckOptions& options) {
  TinySetup s = tiny_setup(seed, false);
  MlmExample mlm;
  mlm.corrupted = s.input.token_ids;
  mlm.positions = {1, 7};
  mlm.originals = {s.input.token_ids[1], s.input.token_ids[7]};
  mlm.corrupted[1] = Vocab::mask_id();
  s.input.token_ids = mlm.corrupted;
  auto loss_fn = [&] {
    Rng dropout_rng(seed ^ 0x5eedULL);
    const ForwardOptions opts{true, &dropout_rng};
    auto embedded = embed_input(s.input, s.params, s.config, opts);
    auto enc = encode(embedded, s.params, s.config, attention_mask_row<double>(s.input), opts);
    return pretrain_loss(enc.hidden, s.params, mlm, std::optional<bool>(true));
  };
  return check_gradients(loss_fn, trainable(s.params, true), options);
}

}  // namespace celt
