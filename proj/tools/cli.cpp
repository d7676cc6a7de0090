#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "celt/checkpoint.hpp"
#include "celt/dialogue.hpp"
#include "celt/gradcheck.hpp"
#include "celt/metrics.hpp"
#include "celt/model.hpp"
#include "celt/sequence.hpp"
#include "celt/synthetic.hpp"
#include "celt/tokenizer.hpp"
#include "celt/training.hpp"

namespace celt::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 42;
  std::string config;
  std::string checkpoint_in;
  std::string checkpoint_out;
  std::string corpus;
  std::string out;
  std::string split = "0.8,0.1,0.1";
  bool split_given = false;
};

struct StageFlags {
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("short write to " + path);
}

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw UsageError(std::string(command) + " requires " + flag);
}

// The optional --config file: {"model": {...}, "stage": {...}, ...}.
nlohmann::json load_config(const Globals& g) {
  if (g.config.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(read_text(g.config));
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + g.config + ": " + e.what());
  }
}

ModelConfig model_config(const nlohmann::json& cfg, ModelConfig base, bool crf_flag) {
  if (cfg.contains("model")) base = model_config_from_json(cfg.at("model").dump(), base);
  if (crf_flag) base.use_crf = true;
  return base;
}

std::size_t default_epochs(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return 2;
    case Stage::kUnsupAdapt: return 2;
    case Stage::kSupAdapt: return 3;
    case Stage::kFinetune: return 10;
  }
  return 1;
}

StageSpec stage_spec(Stage stage, const nlohmann::json& cfg, const StageFlags& flags,
                     const Globals& g) {
  StageSpec spec = StageSpec::defaults(stage);
  spec.epochs = default_epochs(stage);
  if (cfg.contains("stage")) {
    auto overlay = cfg.at("stage");
    overlay.erase("stage");
    spec = stage_spec_from_json(overlay.dump(), spec);
  }
  if (flags.epochs) spec.epochs = *flags.epochs;
  if (flags.batch_size) spec.batch_size = *flags.batch_size;
  if (flags.learning_rate) spec.learning_rate = *flags.learning_rate;
  spec.seed = SeedStreams(g.seed).seed_for(stage_name(stage));
  spec.corpus = g.corpus.empty() ? "" : fs::path(g.corpus).filename().string();
  return spec;
}

std::array<double, 3> parse_split(const std::string& text) {
  std::array<double, 3> f{};
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw UsageError("--split takes three comma-separated fractions");
    try {
      f[i++] = std::stod(part);
    } catch (const std::exception&) {
      throw UsageError("--split: '" + part + "' is not a number");
    }
  }
  if (i != 3) throw UsageError("--split takes three comma-separated fractions");
  return f;
}

// Documents separated by blank lines, one sentence per line.
std::vector<std::vector<std::string>> read_text_documents(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<std::string>> docs(1);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      if (!docs.back().empty()) docs.emplace_back();
    } else {
      docs.back().push_back(line);
    }
  }
  if (docs.back().empty()) docs.pop_back();
  return docs;
}

std::string documents_to_text(const std::vector<std::vector<std::string>>& docs) {
  std::string out;
  for (const auto& d : docs) {
    for (const auto& s : d) out += s + "\n";
    out += "\n";
  }
  return out;
}

std::string run_config_json(const std::string& command, const Globals& g,
                            const ModelConfig& model, const StageSpec* spec) {
  ojson j;
  j["command"] = command;
  j["seed"] = g.seed;
  j["corpus"] = g.corpus;
  j["model"] = ojson::parse(model_config_to_json(model));
  if (spec) j["stage"] = ojson::parse(stage_spec_to_json(*spec));
  return j.dump();
}

void write_metrics(const std::string& json, const std::string& run_config, const Globals& g,
                   std::ostream& out) {
  if (g.out.empty()) {
    out << json;
    return;
  }
  write_text(g.out, json);
  write_text(g.out + ".config.json", ojson::parse(run_config).dump(2) + "\n");
  out << "wrote " << g.out << "\n";
}

void print_epochs(const std::vector<EpochMetrics>& epochs, std::ostream& out) {
  for (const auto& e : epochs) {
    out << "epoch " << e.epoch << " loss " << e.train_loss;
    if (e.validation_frame_accuracy) out << " val_frame_acc " << *e.validation_frame_accuracy;
    out << "\n";
  }
}

void save(const StageResult& result, const ModelConfig& config, const LabelSpace& labels,
          const Vocab& vocab, double threshold, const std::string& run_config,
          const std::string& path, std::ostream& out) {
  CheckpointManifest m;
  m.lineage = result.lineage;
  m.config = config;
  m.labels = labels;
  m.threshold = threshold;
  m.run_config = run_config;
  save_checkpoint(result.params, m, vocab, path);
  out << "saved " << lineage_tag_name(result.lineage.tag) << " checkpoint to "
      << checkpoint_paths(path).manifest.string() << "\n";
}

// --- commands -----------------------------------------------------------------

int cmd_gen_data(const Globals& g, std::size_t dialogues, bool unlabeled,
                 const std::string& text_out, std::size_t text_docs, std::ostream& out) {
  require(g.out, "--out", "gen-data");
  SyntheticConfig cfg;
  cfg.dialogues = dialogues;
  cfg.labeled = !unlabeled;
  const SeedStreams streams(g.seed);
  const Corpus corpus = generate_synthetic_corpus(streams.seed_for("data"), cfg);
  save_corpus(corpus, g.out);
  out << "wrote " << corpus.dialogues.size() << " dialogues (" << corpus.user_turn_count()
      << " user turns, " << count_context_ambiguous(corpus) << " context-ambiguous) to "
      << g.out << "\n";
  if (!text_out.empty()) {
    write_text(text_out, documents_to_text(
                             generate_plain_text(streams.seed_for("plain-text"), text_docs)));
    out << "wrote " << text_docs << " plain-text documents to " << text_out << "\n";
  }
  return kExitOk;
}

int cmd_build_vocab(const Globals& g, const std::string& text_path, std::size_t size,
                    std::ostream& out) {
  require(g.out, "--out", "build-vocab");
  if (g.corpus.empty() && text_path.empty()) {
    throw UsageError("build-vocab requires --corpus and/or --text");
  }
  std::string text;
  if (!g.corpus.empty()) {
    for (const auto& d : load_corpus(g.corpus).dialogues) {
      for (const auto& t : d.turns) text += t.utterance + "\n";
    }
  }
  if (!text_path.empty()) text += read_text(text_path);
  const Vocab vocab = build_vocab(text, size);
  vocab.save(g.out);
  out << "wrote " << vocab.size() << " tokens to " << g.out << "\n";
  return kExitOk;
}

int cmd_pretrain(const Globals& g, const nlohmann::json& cfg, const StageFlags& flags,
                 const std::string& vocab_path, const std::string& text_path,
                 std::ostream& out) {
  require(vocab_path, "--vocab", "pretrain");
  require(g.checkpoint_out, "--checkpoint-out", "pretrain");
  const Vocab vocab = Vocab::load(vocab_path);
  const SeedStreams streams(g.seed);
  const auto text = text_path.empty()
                        ? generate_plain_text(streams.seed_for("plain-text"), 300)
                        : read_text_documents(text_path);
  StageData data;
  data.documents = text_documents(text, vocab);
  if (!g.corpus.empty()) {
    auto dialogs = dialogue_documents(load_corpus(g.corpus), vocab);
    data.documents.insert(data.documents.end(), dialogs.begin(), dialogs.end());
  }
  const LabelSpace labels;
  const ModelConfig config =
      with_label_space(model_config(cfg, ModelConfig{}, false), labels, vocab.size());
  config.validate();
  const StageSpec spec = stage_spec(Stage::kPretrain, cfg, flags, g);
  Rng init = streams.stream("init", 0);
  auto result = run_stage(init_parameters<float>(config, init), config, ModelLineage{}, spec,
                          data);
  print_epochs(result.epochs, out);
  save(result, config, labels, vocab, 0.5, run_config_json("pretrain", g, config, &spec),
       g.checkpoint_out, out);
  return kExitOk;
}

int cmd_adapt_unsup(const Globals& g, const nlohmann::json& cfg, const StageFlags& flags,
                    std::ostream& out) {
  require(g.checkpoint_in, "--checkpoint-in", "adapt-unsup");
  require(g.checkpoint_out, "--checkpoint-out", "adapt-unsup");
  require(g.corpus, "--corpus", "adapt-unsup");
  auto ck = load_checkpoint(g.checkpoint_in);
  StageData data;
  data.documents = dialogue_documents(load_corpus(g.corpus), ck.vocab);
  const StageSpec spec = stage_spec(Stage::kUnsupAdapt, cfg, flags, g);
  const auto& config = ck.manifest.config;
  auto result = run_stage(std::move(ck.params), config, ck.manifest.lineage, spec, data);
  print_epochs(result.epochs, out);
  save(result, config, ck.manifest.labels, ck.vocab, ck.manifest.threshold,
       run_config_json("adapt-unsup", g, config, &spec), g.checkpoint_out, out);
  return kExitOk;
}

int cmd_adapt_sup(const Globals& g, const nlohmann::json& cfg, const StageFlags& flags,
                  bool crf, std::ostream& out) {
  require(g.checkpoint_in, "--checkpoint-in", "adapt-sup");
  require(g.checkpoint_out, "--checkpoint-out", "adapt-sup");
  require(g.corpus, "--corpus", "adapt-sup");
  auto ck = load_checkpoint(g.checkpoint_in);
  const Corpus corpus = load_corpus(g.corpus);
  StageSpec spec = stage_spec(Stage::kSupAdapt, cfg, flags, g);
  if (corpus.has_multi_intent()) spec.ic_mode = IcMode::kSigmoid;
  ModelConfig config = ck.manifest.config;
  if (crf) config.use_crf = true;
  config = with_label_space(config, corpus.labels, ck.vocab.size());
  Rng init = SeedStreams(g.seed).stream("init", 2);
  StageData data;
  data.train = build_corpus_inputs(corpus, ck.vocab, corpus.labels, config.input_config());
  auto result = run_stage(transfer_weights(ck.params, ck.manifest.config, config, init), config,
                          ck.manifest.lineage, spec, data);
  print_epochs(result.epochs, out);
  save(result, config, corpus.labels, ck.vocab, 0.5,
       run_config_json("adapt-sup", g, config, &spec), g.checkpoint_out, out);
  return kExitOk;
}

int cmd_finetune(const Globals& g, const nlohmann::json& cfg, const StageFlags& flags,
                 const std::string& vocab_path, bool crf, std::ostream& out) {
  require(g.checkpoint_out, "--checkpoint-out", "finetune");
  require(g.corpus, "--corpus", "finetune");
  const SeedStreams streams(g.seed);
  const Corpus corpus = load_corpus(g.corpus);
  const auto split = split_corpus(corpus, parse_split(g.split), streams.seed_for("split"));

  std::optional<Checkpoint> ck;
  Vocab vocab;
  ModelConfig base;
  ModelLineage lineage;
  if (!g.checkpoint_in.empty()) {
    ck = load_checkpoint(g.checkpoint_in);
    vocab = ck->vocab;
    base = ck->manifest.config;
    lineage = ck->manifest.lineage;
  } else {
    require(vocab_path, "--vocab (or --checkpoint-in)", "finetune");
    vocab = Vocab::load(vocab_path);
    base = model_config(cfg, ModelConfig{}, false);
  }
  if (crf) base.use_crf = true;
  const ModelConfig config = with_label_space(base, corpus.labels, vocab.size());
  config.validate();
  Rng init = streams.stream("init", 3);
  ModelParameters<float> params = ck ? transfer_weights(ck->params, base, config, init)
                                     : init_parameters<float>(config, init);
  const StageSpec spec = stage_spec(Stage::kFinetune, cfg, flags, g);
  StageData data;
  const auto icfg = config.input_config();
  data.train = build_corpus_inputs(split.train, vocab, corpus.labels, icfg);
  data.validation = build_corpus_inputs(split.validation, vocab, corpus.labels, icfg);
  data.labels = &corpus.labels;
  data.include_acts = corpus.has_user_acts();
  auto result = run_stage(std::move(params), config, lineage, spec, data);
  print_epochs(result.epochs, out);
  double threshold = 0.5;
  if (split.validation.has_user_acts() && !data.validation.empty()) {
    threshold = tune_threshold(result.params, config, data.validation, corpus.labels);
  }
  out << "threshold " << threshold << "\n";
  const std::string run_config = run_config_json("finetune", g, config, &spec);
  save(result, config, corpus.labels, vocab, threshold, run_config, g.checkpoint_out, out);
  if (!g.out.empty()) {
    const auto test = build_corpus_inputs(split.test, vocab, corpus.labels, icfg);
    const auto report = evaluate_inputs(test, result.params, config, corpus.labels, threshold,
                                        corpus.has_user_acts());
    write_metrics(report_to_json(report), run_config, g, out);
  }
  return kExitOk;
}

int cmd_eval(const Globals& g, std::ostream& out) {
  require(g.checkpoint_in, "--checkpoint-in", "eval");
  require(g.corpus, "--corpus", "eval");
  const auto ck = load_checkpoint(g.checkpoint_in);
  Corpus corpus = load_corpus(g.corpus);
  if (g.split_given) {
    corpus = split_corpus(corpus, parse_split(g.split), SeedStreams(g.seed).seed_for("split"))
                 .test;
  }
  const auto& config = ck.manifest.config;
  const auto inputs =
      build_corpus_inputs(corpus, ck.vocab, ck.manifest.labels, config.input_config());
  const auto report = evaluate_inputs(inputs, ck.params, config, ck.manifest.labels,
                                      ck.manifest.threshold, corpus.has_user_acts());
  write_metrics(report_to_json(report), run_config_json("eval", g, config, nullptr), g, out);
  return kExitOk;
}

SystemAct parse_system_act(const std::string& key) {
  const auto open = key.find('(');
  if (open == std::string::npos) return {key, std::nullopt};
  if (key.back() != ')') throw UsageError("malformed system act '" + key + "'");
  return {key.substr(0, open), key.substr(open + 1, key.size() - open - 2)};
}

int cmd_predict(const Globals& g, const std::string& utterance,
                const std::vector<std::string>& history, const std::string& system_acts,
                std::ostream& out) {
  require(g.checkpoint_in, "--checkpoint-in", "predict");
  const auto ck = load_checkpoint(g.checkpoint_in);
  Dialogue d;
  d.id = "predict";
  // History alternates speakers and ends with the system turn.
  for (std::size_t i = 0; i < history.size(); ++i) {
    Turn t;
    t.speaker = (history.size() - i) % 2 == 1 ? Speaker::kSystem : Speaker::kUser;
    t.utterance = history[i];
    d.turns.push_back(std::move(t));
  }
  if (!system_acts.empty()) {
    if (d.turns.empty()) throw UsageError("--system-acts needs a --history system turn");
    std::stringstream ss(system_acts);
    std::string key;
    while (std::getline(ss, key, ',')) {
      if (!key.empty()) d.turns.back().system_acts.push_back(parse_system_act(key));
    }
  }
  Turn q;
  q.utterance = utterance;
  d.turns.push_back(q);
  const auto& config = ck.manifest.config;
  const auto input = build_input_sequence(d, d.turns.size() - 1, ck.vocab, ck.manifest.labels,
                                          config.input_config(), false);
  const auto frame =
      predict_frame(input, ck.params, config, ck.manifest.labels, ck.manifest.threshold);
  const auto words = split_words(utterance);
  ojson j;
  j["intent"] = frame.intent;
  j["user_acts"] = frame.user_acts;
  auto slots = ojson::array();
  for (const auto& s : frame.slots) {
    std::string value;
    for (std::size_t w = s.start_word; w < s.end_word && w < words.size(); ++w) {
      value += (value.empty() ? "" : " ") + words[w];
    }
    slots.push_back({{"slot", s.slot},
                     {"start_word", s.start_word},
                     {"end_word", s.end_word},
                     {"value", value}});
  }
  j["slots"] = std::move(slots);
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_ablate(const Globals& g, const nlohmann::json& cfg, const StageFlags& flags,
               std::ostream& out) {
  require(g.checkpoint_in, "--checkpoint-in", "ablate");
  require(g.corpus, "--corpus", "ablate");
  auto ck = load_checkpoint(g.checkpoint_in);
  const Corpus corpus = load_corpus(g.corpus);
  const auto split =
      split_corpus(corpus, parse_split(g.split), SeedStreams(g.seed).seed_for("split"));
  AblationSuite suite;
  suite.base = ck.manifest.config;
  suite.train = split.train;
  suite.validation = split.validation;
  suite.test = split.test;
  suite.vocab = ck.vocab;
  suite.pretrained = std::move(ck.params);
  suite.pretrained_config = ck.manifest.config;
  suite.finetune = stage_spec(Stage::kFinetune, cfg, flags, g);
  const auto rows = run_ablation(suite);
  write_metrics(ablation_to_json(rows),
                run_config_json("ablate", g, suite.base, &suite.finetune), g, out);
  return kExitOk;
}

int cmd_grad_check(const Globals& g, bool verbose, std::ostream& out) {
  struct Suite {
    const char* name;
    GradCheckReport report;
  };
  std::vector<Suite> suites;
  suites.push_back({"tensor ops", check_tensor_ops(g.seed)});
  suites.push_back({"joint loss", check_model_gradients(g.seed, false)});
  suites.push_back({"joint loss with CRF", check_model_gradients(g.seed, true)});
  suites.push_back({"pretraining loss", check_pretrain_gradients(g.seed)});
  bool ok = true;
  for (const auto& s : suites) {
    for (const auto& e : s.report.entries) {
      if (verbose || !e.passed) {
        out << (e.passed ? "  ok   " : "  FAIL ") << e.name << " rel_err " << e.relative_error
            << "\n";
      }
    }
    out << s.name << ": " << s.report.entries.size() << " tensors, worst relative error "
        << s.report.worst_relative_error() << (s.report.passed() ? " PASS" : " FAIL") << "\n";
    ok = ok && s.report.passed();
  }
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-turn spoken language understanding with dialogue context", "celt"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed for every random stream");
  app.add_option("--config", g.config, "JSON file with model and stage settings");
  app.add_option("--checkpoint-in", g.checkpoint_in, "Checkpoint prefix to load");
  app.add_option("--checkpoint-out", g.checkpoint_out, "Checkpoint prefix to write");
  app.add_option("--corpus", g.corpus, "Dialogue corpus JSON");
  app.add_option("--out", g.out, "Output file");
  auto* split_opt =
      app.add_option("--split", g.split, "Train,validation,test fractions (default 0.8,0.1,0.1)");

  StageFlags flags;
  auto add_stage_flags = [&](CLI::App* sub) {
    sub->add_option("--epochs", flags.epochs, "Training epochs");
    sub->add_option("--batch-size", flags.batch_size, "Mini-batch size");
    sub->add_option("--lr", flags.learning_rate, "Adam learning rate");
  };

  std::size_t dialogues = 500;
  bool unlabeled = false;
  std::string text_out;
  std::size_t text_docs = 300;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dialogue corpus");
  gen->add_option("--dialogues", dialogues, "Number of dialogues");
  gen->add_flag("--unlabeled", unlabeled, "Omit user-turn labels");
  gen->add_option("--text-out", text_out, "Also write plain-text pretraining documents");
  gen->add_option("--text-documents", text_docs, "Plain-text document count");

  std::string text_path;
  std::size_t vocab_size = 800;
  auto* bv = app.add_subcommand("build-vocab", "Learn a subword vocabulary");
  bv->add_option("--text", text_path, "Plain-text file to include");
  bv->add_option("--size", vocab_size, "Target vocabulary size");

  std::string vocab_path;
  bool crf = false;
  auto* pre = app.add_subcommand("pretrain", "MLM + NSP pretraining");
  pre->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  pre->add_option("--text", text_path, "Plain-text documents (default: generated)");
  add_stage_flags(pre);

  auto* unsup = app.add_subcommand("adapt-unsup", "Unsupervised adaptive training");
  add_stage_flags(unsup);

  auto* sup = app.add_subcommand("adapt-sup", "Supervised adaptive training");
  sup->add_flag("--crf", crf, "Use a CRF slot layer");
  add_stage_flags(sup);

  auto* ft = app.add_subcommand("finetune", "Target-domain fine-tuning");
  ft->add_option("--vocab", vocab_path, "Vocabulary file when starting from scratch");
  ft->add_flag("--crf", crf, "Use a CRF slot layer");
  add_stage_flags(ft);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");

  std::string utterance, system_acts;
  std::vector<std::string> history;
  auto* pr = app.add_subcommand("predict", "Predict the semantic frame of one utterance");
  pr->add_option("--utterance", utterance, "Current user utterance")->required();
  pr->add_option("--history", history, "Previous turns, oldest first, ending with the system");
  pr->add_option("--system-acts", system_acts, "Comma-separated acts of the last system turn");

  auto* ab = app.add_subcommand("ablate", "Ablation table over context features");
  add_stage_flags(ab);

  bool verbose = false;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  gc->add_flag("--verbose", verbose, "List every checked tensor");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  g.split_given = split_opt->count() > 0;

  try {
    const auto cfg = load_config(g);
    if (gen->parsed()) return cmd_gen_data(g, dialogues, unlabeled, text_out, text_docs, out);
    if (bv->parsed()) return cmd_build_vocab(g, text_path, vocab_size, out);
    if (pre->parsed()) return cmd_pretrain(g, cfg, flags, vocab_path, text_path, out);
    if (unsup->parsed()) return cmd_adapt_unsup(g, cfg, flags, out);
    if (sup->parsed()) return cmd_adapt_sup(g, cfg, flags, crf, out);
    if (ft->parsed()) return cmd_finetune(g, cfg, flags, vocab_path, crf, out);
    if (ev->parsed()) return cmd_eval(g, out);
    if (pr->parsed()) return cmd_predict(g, utterance, history, system_acts, out);
    if (ab->parsed()) return cmd_ablate(g, cfg, flags, out);
    if (gc->parsed()) return cmd_grad_check(g, verbose, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  err << "no command given\n";
  return kExitUsage;
}

}  // namespace celt::cli
