#include <benchmark/benchmark.h>

#include "celt/model.hpp"
#include "celt/synthetic.hpp"

using namespace celt;

namespace {

struct Setup {
  ModelConfig config;
  ModelParameters<float> params;
  std::vector<ModelInput> inputs;
};

// Desk-scale encoder over synthetic dialogues.
Setup make_setup(std::size_t hidden, std::size_t layers) {
  SyntheticConfig cfg;
  cfg.dialogues = 20;
  const Corpus corpus = generate_synthetic_corpus(5, cfg);
  std::string text;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) text += t.utterance + "\n";
  }
  const Vocab vocab = build_vocab(text, 300);
  ModelConfig c;
  c.hidden_size = hidden;
  c.ff_size = 2 * hidden;
  c.num_heads = 4;
  c.num_layers = layers;
  c.dropout = 0.0;
  Setup s;
  s.config = with_label_space(c, corpus.labels, vocab.size());
  Rng rng(1);
  s.params = init_parameters<float>(s.config, rng);
  s.inputs = build_corpus_inputs(corpus, vocab, corpus.labels, s.config.input_config());
  return s;
}

void BM_EncoderForward(benchmark::State& state) {
  const auto s = make_setup(static_cast<std::size_t>(state.range(0)), 2);
  NoGradGuard no_grad;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(s.inputs[i++ % s.inputs.size()], s.params, s.config));
  }
}
BENCHMARK(BM_EncoderForward)->Arg(32)->Arg(64);

void BM_TrainingStep(benchmark::State& state) {
  auto s = make_setup(static_cast<std::size_t>(state.range(0)), 2);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& in = s.inputs[i++ % s.inputs.size()];
    const auto out = forward(in, s.params, s.config);
    backward(joint_loss(out, *in.targets, s.params, s.config));
    s.params.zero_grad();
  }
}
BENCHMARK(BM_TrainingStep)->Arg(32)->Arg(64);

void BM_PredictFrame(benchmark::State& state) {
  const auto s = make_setup(32, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_ids(s.inputs[i++ % s.inputs.size()], s.params, s.config, 0.5));
  }
}
BENCHMARK(BM_PredictFrame);

}  // namespace
