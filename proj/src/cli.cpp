// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "stylebt/classifier.hpp"
#include "stylebt/config.hpp"
#include "stylebt/corpus.hpp"
#include "stylebt/lexicon.hpp"
#include "stylebt/metrics.hpp"
#include "stylebt/pipeline.hpp"
#include "stylebt/seq2seq.hpp"
#include "stylebt/toy.hpp"

namespace stylebt::cli {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    std::string item = text.substr(start, end - start);
    const auto first = item.find_first_not_of(' ');
    if (first != std::string::npos) out.push_back(item.substr(first, item.find_last_not_of(' ') - first + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int to_int(long v, const std::string& key, long min) {
  if (v < min || v > std::numeric_limits<int>::max()) {
    throw ConfigError("config key '" + key + "' must be at least " + std::to_string(min));
  }
  return static_cast<int>(v);
}

double unit_interval(Config& cfg, const std::string& key, double fallback) {
  const double v = cfg.get_double(key, fallback);
  if (v < 0.0 || v > 1.0) throw ConfigError("config key '" + key + "' must lie in [0, 1]");
  return v;
}

/// Settings shared by every stage, resolved before any work starts.
class Stage {
 public:
  explicit Stage(Config& cfg) : cfg_(cfg) { out_ = cfg.require_string("out"); }

  Config& cfg() { return cfg_; }
  const fs::path& out() const { return out_; }

  fs::path input(const std::string& key) {
    const fs::path p = cfg_.require_string(key);
    if (!fs::exists(p)) throw NotFoundError("'" + key + "' points to a missing path: " + p.string());
    return p;
  }

  std::optional<fs::path> optional_input(const std::string& key) {
    if (!cfg_.has(key)) return std::nullopt;
    return input(key);
  }

  StylePair styles() { return {StyleId(cfg_.require_string("style.first")), StyleId(cfg_.require_string("style.second"))}; }

  TokenizerOptions tokenizer() {
    TokenizerOptions t;
    t.lowercase = cfg_.get_bool("tokenize.lowercase", false);
    t.max_tokens = static_cast<std::size_t>(to_int(cfg_.get_int("tokenize.max_tokens", 64), "tokenize.max_tokens", 1));
    return t;
  }

  std::uint64_t seed() { return cfg_.get_u64("seed", 1); }

  nn::AdamOptions adam(const std::string& prefix) {
    nn::AdamOptions a;
    a.learning_rate = cfg_.get_double(prefix + ".lr", a.learning_rate);
    a.clip_norm = cfg_.get_double(prefix + ".clip_norm", a.clip_norm);
    if (a.learning_rate < 0.0) throw ConfigError("config key '" + prefix + ".lr' must be non-negative");
    return a;
  }

  RewardConfig rewards() {
    RewardConfig r;
    r.lambda_sc = cfg_.get_double("reward.lambda_sc", r.lambda_sc);
    r.lambda_bleu = cfg_.get_double("reward.lambda_bleu", r.lambda_bleu);
    r.lambda_learned = cfg_.get_double("reward.lambda_learned", r.lambda_learned);
    r.sc0 = cfg_.get_bool("reward.sc0", r.sc0);
    r.sc1 = cfg_.get_bool("reward.sc1", r.sc1);
    r.bleu = cfg_.get_bool("reward.bleu", r.bleu);
    r.learned = cfg_.get_bool("reward.learned", r.learned);
    r.sign = parse_reward_sign(cfg_.get_string("reward.sign", reward_sign_name(r.sign)));
    r.validate();
    return r;
  }

  std::unique_ptr<LearnedMetricOracle> oracle() { return make_oracle(cfg_.get_string("metric.oracle", "desk")); }

  StyleClassifier classifier(const StylePair& styles) {
    auto clf = StyleClassifier::load(input("classifier"));
    if (clf.styles().first != styles.first || clf.styles().second != styles.second) {
      throw ConfigError("classifier was trained for styles (" + clf.styles().first.name + ", " +
                        clf.styles().second.name + ") but the task uses (" + styles.first.name + ", " +
                        styles.second.name + ")");
    }
    return clf;
  }

  /// Creates the run directory and records the resolved settings. Every
  /// setting must have been read by now.
  void begin() {
    fs::create_directories(out_);
    cfg_.write_echo(out_ / "config.echo");
    for (const auto& key : cfg_.unused_keys()) spdlog::info("setting '{}' is not used by this stage", key);
  }

  fs::path checkpoint(const std::string& name) const { return out_ / "checkpoints" / name; }
  fs::path pairs(const std::string& name) const { return out_ / "pairs" / name; }

 private:
  Config& cfg_;
  fs::path out_;
};

/// Plain source<TAB>target files and scored files (with a header) both load.
Dataset<SentencePair> load_any_pairs(const fs::path& path, const StyleId& from, const StyleId& to,
                                     const TokenizerOptions& tok) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::string first;
  std::getline(in, first);
  if (first.rfind("source\ttarget", 0) == 0) return load_scored_pairs(path, from, to);
  return load_pairs(path, from, to, Split::Train, tok);
}

std::vector<fs::path> reference_files(const fs::path& dir, Split split) {
  std::vector<fs::path> refs;
  for (int k = 0;; ++k) {
    const fs::path p = dir / (split_name(split) + ".ref" + std::to_string(k));
    if (!fs::exists(p)) break;
    refs.push_back(p);
  }
  return refs;
}

/// References of one direction, or nothing when the corpus has none.
std::optional<Dataset<ReferenceSet>> direction_references(const fs::path& corpus, Split split, const StyleId& from,
                                                          const StyleId& to, const TokenizerOptions& tok) {
  const fs::path dir = direction_dir(corpus, from, to);
  const fs::path src = dir / (split_name(split) + ".src");
  if (!fs::exists(src)) return std::nullopt;
  const auto refs = reference_files(dir, split);
  if (refs.empty()) throw NotFoundError("no reference files next to " + src.string());
  return load_references(src, refs, split, tok);
}

std::string direction_name(const StyleId& from, const StyleId& to) { return from.name + "-" + to.name; }

std::vector<Utterance> read_sentences(const fs::path& path, const TokenizerOptions& tok, bool allow_empty) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::vector<Utterance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      out.push_back(tokenize(line, tok));
    } catch (const EmptyUtteranceError&) {
      if (!allow_empty) throw ParseError(path, lineno, "empty sentence");
      out.emplace_back();
    }
  }
  return out;
}

void write_sentences(const fs::path& path, std::span<const Utterance> sentences) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& u : sentences) out << u.text() << '\n';
}

// ---------------------------------------------------------------------------
// Stages

void make_toy_task_cmd(Config& cfg) {
  Stage st(cfg);
  ToyTaskConfig t;
  t.train_per_style = static_cast<std::size_t>(to_int(cfg.get_int("toy.train_per_style", 2000), "toy.train_per_style", 1));
  t.valid_per_style = static_cast<std::size_t>(to_int(cfg.get_int("toy.valid_per_style", 200), "toy.valid_per_style", 1));
  t.test_per_style = static_cast<std::size_t>(to_int(cfg.get_int("toy.test_per_style", 200), "toy.test_per_style", 1));
  t.paraphrase_pairs = static_cast<std::size_t>(to_int(cfg.get_int("toy.paraphrase_pairs", 2000), "toy.paraphrase_pairs", 0));
  t.min_content = static_cast<std::size_t>(to_int(cfg.get_int("toy.min_content", 4), "toy.min_content", 1));
  t.max_content = static_cast<std::size_t>(to_int(cfg.get_int("toy.max_content", 7), "toy.max_content", 1));
  t.paraphrase_marker_noise = unit_interval(cfg, "toy.marker_noise", t.paraphrase_marker_noise);
  t.seed = st.seed();
  st.begin();

  const ToyTask task = make_toy_task(t);
  write_toy_task(st.out(), task);
  std::ofstream conf(st.out() / "task.conf");
  conf << "style.first = " << task.styles.first.name << "\nstyle.second = " << task.styles.second.name
       << "\ncorpus.dir = " << fs::absolute(st.out()).string() << '\n';
  spdlog::info("wrote toy task to {}", st.out().string());
}

void make_pairs_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  const auto lexicon_path = st.input("lexicon");
  const auto antonyms_path = st.input("antonyms");
  const auto corpus = st.input("corpus.dir");
  const Split split = parse_split(cfg.get_string("make_pairs.split", "train"));
  const double cutoff = unit_interval(cfg, "lexicon.cutoff", kDefaultPolarityCutoff);
  st.begin();

  const auto lexicon = PolarityLexicon::load(lexicon_path);
  const auto antonyms = AntonymMap::load(antonyms_path);
  Dataset<LabeledUtterance> data;
  data.split = split;
  for (const auto& style : {styles.first, styles.second}) {
    const auto part = load_unpaired(unpaired_path(corpus, split, style), style, split, tok);
    data.items.insert(data.items.end(), part.items.begin(), part.items.end());
  }
  const auto pairs = build_synthetic_corpus(lexicon, antonyms, data, styles, cutoff);
  write_pairs(st.pairs("synthetic.tsv"), pairs);
  spdlog::info("synthesized {} pairs from {} sentences", pairs.size(), data.size());
}

void filter_paraphrases_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  const auto pairs_path = st.input("pairs");
  const double sigma = unit_interval(cfg, "filter.sigma", 0.85);
  const StyleId from(cfg.get_string("filter.source_style", styles.first.name));
  const StyleId to(cfg.get_string("filter.target_style", styles.opposite(from).name));
  if (!styles.contains(to) || from == to) throw ConfigError("filter styles must be the two task styles");
  auto clf = st.classifier(styles);
  st.begin();

  const auto bank = load_any_pairs(pairs_path, from, to, tok);
  const auto scored = score_style_pairs(clf, bank);
  const auto kept = filter_scored_paraphrase_pairs(scored, sigma);
  write_scored_pairs(st.pairs("scored.tsv"), scored);
  write_scored_pairs(st.pairs("filtered.tsv"), kept);
  spdlog::info("kept {} of {} paraphrase pairs at sigma {}", kept.size(), scored.size(), sigma);
}

void train_classifier_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  const auto corpus = st.input("corpus.dir");
  ClassifierTrainConfig c;
  c.epochs = to_int(cfg.get_int("classifier.epochs", c.epochs), "classifier.epochs", 1);
  c.batch_size = to_int(cfg.get_int("classifier.batch_size", c.batch_size), "classifier.batch_size", 1);
  c.learning_rate = cfg.get_double("classifier.lr", c.learning_rate);
  c.filters_per_width = to_int(cfg.get_int("classifier.filters_per_width", c.filters_per_width),
                               "classifier.filters_per_width", 1);
  c.embedding_dim = to_int(cfg.get_int("classifier.embedding_dim", c.embedding_dim), "classifier.embedding_dim", 1);
  c.filter_widths.clear();
  for (const auto& w : split_list(cfg.get_string("classifier.filter_widths", "3,4,5"))) {
    c.filter_widths.push_back(to_int(std::stol(w), "classifier.filter_widths", 1));
  }
  c.max_vocab = static_cast<std::size_t>(to_int(cfg.get_int("classifier.max_vocab", 0), "classifier.max_vocab", 0));
  c.seed = st.seed();
  st.begin();

  Dataset<LabeledUtterance> train, valid;
  valid.split = Split::Valid;
  for (const auto& style : {styles.first, styles.second}) {
    const auto t = load_unpaired(unpaired_path(corpus, Split::Train, style), style, Split::Train, tok);
    train.items.insert(train.items.end(), t.items.begin(), t.items.end());
    const auto vpath = unpaired_path(corpus, Split::Valid, style);
    if (fs::exists(vpath)) {
      const auto v = load_unpaired(vpath, style, Split::Valid, tok);
      valid.items.insert(valid.items.end(), v.items.begin(), v.items.end());
    }
  }
  const auto result = train_classifier(train, valid, styles, c);
  result.classifier.save(st.checkpoint("classifier.ckpt"));

  TrainingLog log;
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    LogRow row;
    row.step = static_cast<long>(e + 1);
    row.direction = "classifier";
    row.nll = result.train_loss[e];
    if (e < result.valid_accuracy.size()) row.valid_acc = result.valid_accuracy[e];
    log.rows.push_back(row);
  }
  write_logs_tsv(st.out() / "logs.tsv", log);
  if (!result.valid_accuracy.empty()) {
    spdlog::info("classifier validation accuracy {:.4f} (epoch {})",
                 result.valid_accuracy[static_cast<std::size_t>(result.best_epoch - 1)], result.best_epoch);
  }
}

ModelSpec model_spec(Stage& st) {
  Config& cfg = st.cfg();
  ModelSpec spec;
  spec.kind = parse_backbone(cfg.get_string("model.backbone", backbone_name(spec.kind)));
  spec.model_dim = to_int(cfg.get_int("model.dim", spec.model_dim), "model.dim", 1);
  spec.heads = to_int(cfg.get_int("model.heads", spec.heads), "model.heads", 1);
  spec.ff_dim = to_int(cfg.get_int("model.ff_dim", spec.ff_dim), "model.ff_dim", 1);
  spec.encoder_layers = to_int(cfg.get_int("model.encoder_layers", spec.encoder_layers), "model.encoder_layers", 1);
  spec.decoder_layers = to_int(cfg.get_int("model.decoder_layers", spec.decoder_layers), "model.decoder_layers", 1);
  spec.max_positions = to_int(cfg.get_int("model.max_positions", spec.max_positions), "model.max_positions", 2);
  spec.options.adam = st.adam("pretrain");
  return spec;
}

SupervisedConfig supervised_config(Stage& st, const std::string& prefix, bool samples) {
  Config& cfg = st.cfg();
  SupervisedConfig s;
  s.epochs = to_int(cfg.get_int(prefix + ".epochs", s.epochs), prefix + ".epochs", 0);
  s.batch_size = to_int(cfg.get_int(prefix + ".batch_size", s.batch_size), prefix + ".batch_size", 1);
  if (samples) s.max_len = to_int(cfg.get_int(prefix + ".max_len", s.max_len), prefix + ".max_len", 1);
  s.seed = st.seed();
  return s;
}

void pretrain_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  std::vector<fs::path> pair_files;
  for (const auto& p : split_list(cfg.require_string("pairs"))) {
    if (!fs::exists(p)) throw NotFoundError("'pairs' points to a missing path: " + p);
    pair_files.emplace_back(p);
  }
  if (pair_files.empty()) throw ConfigError("'pairs' lists no files");
  const auto corpus = st.optional_input("corpus.dir");
  const auto init = st.optional_input("init");
  const auto spec = model_spec(st);
  const auto vocab_size = static_cast<std::size_t>(to_int(cfg.get_int("vocab.max_size", 1000), "vocab.max_size", 0));
  const auto sup = supervised_config(st, "pretrain", false);
  st.begin();

  Dataset<SentencePair> pairs;
  for (const auto& f : pair_files) {
    const auto part = load_any_pairs(f, styles.first, styles.second, tok);
    pairs.items.insert(pairs.items.end(), part.items.begin(), part.items.end());
  }

  std::unique_ptr<Seq2SeqModel> base;
  if (init) {
    base = load_checkpoint(*init, spec.options);
  } else {
    // The vocabulary also covers the unpaired corpora used by later stages.
    Vocabulary::Builder builder;
    for (const auto& p : pairs) {
      builder.add(p.source);
      builder.add(p.target);
    }
    if (corpus) {
      for (const auto& style : {styles.first, styles.second}) {
        const auto path = unpaired_path(*corpus, Split::Train, style);
        if (!fs::exists(path)) continue;
        for (const auto& item : load_unpaired(path, style, Split::Train, tok)) builder.add(item.utterance);
      }
    }
    base = create_model(spec, builder.build(vocab_size), st.seed());
  }
  save_checkpoint(*base, st.checkpoint("base.ckpt"));

  TrainingLog log;
  const auto trained = further_pretrain(*base, pairs, sup, &log);
  save_checkpoint(*trained, st.checkpoint("pretrained.ckpt"));
  write_logs_tsv(st.out() / "logs.tsv", log);
  spdlog::info("pretrained on {} pairs for {} epochs", pairs.size(), sup.epochs);
}

void ibt_train_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  const auto init = st.input("init");
  const auto corpus = st.input("corpus.dir");
  IbtConfig ic;
  ic.steps = cfg.get_int("ibt.steps", ic.steps);
  ic.batch_size = to_int(cfg.get_int("ibt.batch_size", ic.batch_size), "ibt.batch_size", 1);
  ic.valid_every = cfg.get_int("ibt.valid_every", ic.valid_every);
  ic.patience = to_int(cfg.get_int("ibt.patience", ic.patience), "ibt.patience", 0);
  ic.max_len = to_int(cfg.get_int("ibt.max_len", ic.max_len), "ibt.max_len", 1);
  ic.rewards = st.rewards();
  ic.seed = st.seed();
  ic.validate();
  Seq2SeqOptions options;
  options.adam = st.adam("ibt");
  const bool learned = ic.rewards.learned;
  const auto oracle = learned ? st.oracle() : nullptr;
  auto clf = st.classifier(styles);
  st.begin();

  const auto train_first =
      load_unpaired(unpaired_path(corpus, Split::Train, styles.first), styles.first, Split::Train, tok);
  const auto train_second =
      load_unpaired(unpaired_path(corpus, Split::Train, styles.second), styles.second, Split::Train, tok);
  auto validation = [&](const StyleId& from, const StyleId& to) {
    if (auto refs = direction_references(corpus, Split::Valid, from, to, tok)) return direction_validation(*refs);
    return direction_validation(load_unpaired(unpaired_path(corpus, Split::Valid, from), from, Split::Valid, tok));
  };
  const IbtValidation valid{validation(styles.first, styles.second), validation(styles.second, styles.first)};

  const auto base = load_checkpoint(init, options);
  const auto result = ibt_train(ModelPair::from_base(*base, styles), train_first, train_second, valid, clf, ic,
                                oracle.get());
  save_checkpoint(*result.models.a, st.checkpoint("model_a.ckpt"));
  save_checkpoint(*result.models.b, st.checkpoint("model_b.ckpt"));
  write_logs_tsv(st.out() / "logs.tsv", result.log);
  spdlog::info("{}: best HM {:.4f} at step {}; {}: best HM {:.4f} at step {}",
               direction_name(styles.first, styles.second), result.best_a.hm, result.best_step_a,
               direction_name(styles.second, styles.first), result.best_b.hm, result.best_step_b);
}

void generate_cmd(Config& cfg) {
  Stage st(cfg);
  const auto tok = st.tokenizer();
  const auto model_path = st.input("model");
  const auto input = st.input("input");
  const std::string mode = cfg.get_string("generate.mode", "greedy");
  if (mode != "greedy" && mode != "sample") throw ConfigError("generate.mode must be greedy or sample");
  const long max_len = cfg.get_int("generate.max_len", 64);
  const auto seed = st.seed();
  st.begin();

  const auto model = load_checkpoint(model_path);
  const auto sources = read_sentences(input, tok, false);
  std::vector<std::vector<int>> ids;
  for (const auto& s : sources) ids.push_back(model->encode_source(s));
  std::mt19937_64 rng(seed);
  const auto gens = decode_ids(*model, ids, to_int(max_len, "generate.max_len", 1),
                               mode == "greedy" ? DecodeMode::Greedy : DecodeMode::Sample, &rng);
  std::vector<Utterance> outputs;
  for (const auto& g : gens) outputs.push_back(Utterance{model->vocab().decode(g.ids), {}});
  write_sentences(st.out() / "generated.txt", outputs);
  spdlog::info("generated {} sentences", outputs.size());
}

PairSelectionConfig selection_config(Stage& st) {
  Config& cfg = st.cfg();
  PairSelectionConfig p;
  p.sigma_c = cfg.get_double("select.sigma_c", p.sigma_c);
  p.sigma_s = unit_interval(cfg, "select.sigma_s", p.sigma_s);
  p.sample_count = static_cast<std::size_t>(to_int(cfg.get_int("select.sample_count", 0), "select.sample_count", 0));
  p.max_len = to_int(cfg.get_int("select.max_len", p.max_len), "select.max_len", 1);
  p.seed = st.seed();
  return p;
}

void select_pairs_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  const auto corpus = st.input("corpus.dir");
  const auto model_a = st.optional_input("model.a");
  const auto model_b = st.optional_input("model.b");
  if (!model_a && !model_b) throw ConfigError("select-pairs needs 'model.a', 'model.b' or both");
  const Split split = parse_split(cfg.get_string("select.split", "train"));
  const auto pcfg = selection_config(st);
  const auto oracle = st.oracle();
  auto clf = st.classifier(styles);
  st.begin();

  auto run_side = [&](const fs::path& path, const std::string& side, const StyleId& from, const StyleId& to) {
    const auto model = load_checkpoint(path);
    const auto sources = load_unpaired(unpaired_path(corpus, split, from), from, split, tok);
    const auto generated = generate_pseudo_pairs(*model, sources, to, clf, *oracle, pcfg);
    const auto selected = select_high_quality_pairs(generated, pcfg);
    write_scored_pairs(st.pairs("generated." + side + ".tsv"), generated);
    write_scored_pairs(st.pairs("selected." + side + ".tsv"), selected);
    spdlog::info("{}: selected {} of {} generated pairs", direction_name(from, to), selected.size(), generated.size());
  };
  if (model_a) run_side(*model_a, "a", styles.first, styles.second);
  if (model_b) run_side(*model_b, "b", styles.second, styles.first);
}

void train_offline_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  const auto base_path = st.input("base");
  const auto pairs_a = st.optional_input("pairs.a");
  const auto pairs_b = st.optional_input("pairs.b");
  if (!pairs_a && !pairs_b) throw ConfigError("train-offline needs 'pairs.a', 'pairs.b' or both");
  const auto sup = supervised_config(st, "offline", true);
  Seq2SeqOptions options;
  options.adam = st.adam("offline");
  OfflineContext ctx;
  ctx.rewards = st.rewards();
  const auto oracle = ctx.rewards.learned ? st.oracle() : nullptr;
  ctx.oracle = oracle.get();
  std::optional<StyleClassifier> clf;
  if (ctx.rewards.sc0) {
    clf.emplace(st.classifier(styles));
    ctx.classifier = &*clf;
  }
  st.begin();

  const auto base = load_checkpoint(base_path, options);
  TrainingLog log;
  auto run_side = [&](const fs::path& path, const std::string& side, const StyleId& from, const StyleId& to) {
    const auto pairs = load_any_pairs(path, from, to, tok);
    TrainingLog part;
    const auto model = offline_train(*base, pairs, ctx, sup, &part);
    for (auto& row : part.rows) row.direction = direction_name(from, to);
    log.rows.insert(log.rows.end(), part.rows.begin(), part.rows.end());
    save_checkpoint(*model, st.checkpoint("offline_" + side + ".ckpt"));
    spdlog::info("{}: trained on {} pairs", direction_name(from, to), pairs.size());
  };
  if (pairs_a) run_side(*pairs_a, "a", styles.first, styles.second);
  if (pairs_b) run_side(*pairs_b, "b", styles.second, styles.first);
  write_logs_tsv(st.out() / "logs.tsv", log);
}

void evaluate_cmd(Config& cfg) {
  Stage st(cfg);
  const auto styles = st.styles();
  const auto tok = st.tokenizer();
  const auto corpus = st.input("corpus.dir");
  const Split split = parse_split(cfg.get_string("eval.split", "test"));
  const int max_len = to_int(cfg.get_int("eval.max_len", 64), "eval.max_len", 1);
  EvalOptions eo;
  eo.bleu_lowercase = cfg.get_bool("eval.bleu_lowercase", false);
  eo.oracle_lowercase = cfg.get_bool("eval.oracle_lowercase", false);
  struct Side {
    std::string key;
    StyleId from, to;
    std::optional<fs::path> outputs, model;
  };
  std::vector<Side> sides{{"a", styles.first, styles.second, {}, {}}, {"b", styles.second, styles.first, {}, {}}};
  for (auto& s : sides) {
    s.outputs = st.optional_input("outputs." + s.key);
    if (!s.outputs) s.model = st.optional_input("model." + s.key);
  }
  std::vector<std::unique_ptr<LearnedMetricOracle>> owned;
  for (const auto& spec : split_list(cfg.get_string("metric.oracles", "desk"))) owned.push_back(make_oracle(spec));
  auto clf = st.classifier(styles);
  st.begin();

  std::vector<DirectionOutputs> directions;
  for (const auto& s : sides) {
    if (!s.outputs && !s.model) continue;
    auto refs = direction_references(corpus, split, s.from, s.to, tok);
    if (!refs) throw NotFoundError("no references for " + direction_name(s.from, s.to) + " in " + corpus.string());
    DirectionOutputs d{direction_name(s.from, s.to), s.to, {}, std::move(*refs)};
    if (s.outputs) {
      d.outputs = read_sentences(*s.outputs, tok, true);
    } else {
      const auto model = load_checkpoint(*s.model);
      std::vector<Utterance> sources;
      for (const auto& r : d.references) sources.push_back(r.source);
      d.outputs = greedy_decode_batch(*model, sources, max_len);
      write_sentences(st.out() / ("outputs." + s.key + ".txt"), d.outputs);
    }
    if (d.outputs.size() != d.references.size()) {
      throw Error(d.name + ": " + std::to_string(d.outputs.size()) + " outputs for " +
                  std::to_string(d.references.size()) + " references");
    }
    directions.push_back(std::move(d));
  }
  if (directions.empty()) throw ConfigError("evaluate needs outputs.a/outputs.b or model.a/model.b");

  std::vector<const LearnedMetricOracle*> oracles;
  for (const auto& o : owned) oracles.push_back(o.get());
  const auto report = evaluate_system(directions, clf, oracles, eo);
  std::ofstream tsv(st.out() / "report.tsv");
  write_report_tsv(tsv, report);
  write_report_table(std::cout, report);
}

void correlate_cmd(Config& cfg) {
  Stage st(cfg);
  const auto scores = st.input("scores");
  st.begin();

  const auto table = load_score_table(scores);
  const auto matrix = correlation_matrix(table);
  std::ofstream tsv(st.out() / "correlation.tsv");
  std::ostringstream shown;
  tsv << "metric";
  for (const auto& m : table.metrics) tsv << '\t' << m;
  tsv << '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    tsv << table.metrics[i];
    shown << std::left << std::setw(12) << table.metrics[i];
    for (double v : matrix[i]) {
      tsv << '\t' << format_double(v);
      shown << std::right << std::setw(9) << std::fixed << std::setprecision(4) << v;
    }
    tsv << '\n';
    shown << '\n';
  }
  std::cout << shown.str();
}

struct Command {
  const char* name;
  const char* help;
  void (*fn)(Config&);
  // Stage-specific flags: (flag, config key).
  std::vector<std::pair<const char*, const char*>> flags;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> all = {
      {"make-toy-task", "write a synthetic two-style corpus", make_toy_task_cmd, {}},
      {"make-pairs", "synthesize polarity pairs by antonym swap", make_pairs_cmd, {}},
      {"filter-paraphrases", "keep paraphrase pairs with a confident style gap", filter_paraphrases_cmd,
       {{"--sigma", "filter.sigma"}}},
      {"train-classifier", "train the style classifier", train_classifier_cmd, {}},
      {"pretrain", "further pre-train a backbone on pairs", pretrain_cmd, {{"--backbone", "model.backbone"}}},
      {"ibt-train", "iterative back-translation with rewards", ibt_train_cmd,
       {{"--lambda-sc", "reward.lambda_sc"}, {"--reward-sign", "reward.sign"}}},
      {"generate", "decode sentences with a model", generate_cmd, {}},
      {"select-pairs", "generate and select high-quality pairs", select_pairs_cmd,
       {{"--sigma-c", "select.sigma_c"}, {"--sigma-s", "select.sigma_s"}}},
      {"train-offline", "supervised training on selected pairs", train_offline_cmd,
       {{"--lambda-sc", "reward.lambda_sc"}, {"--reward-sign", "reward.sign"}}},
      {"evaluate", "score system outputs against references", evaluate_cmd, {}},
      {"correlate", "Pearson matrix over per-system metric scores", correlate_cmd, {}},
  };
  return all;
}

std::shared_ptr<spdlog::logger> cli_logger() {
  if (auto existing = spdlog::get("stylebt")) return existing;
  return spdlog::stderr_color_mt("stylebt");
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(std::span<const std::string> args) {
  CLI::App app{"Unsupervised two-style text transfer", args.empty() ? "stylebt" : args[0]};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> overrides;
  for (const auto& cmd : commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "key = value settings file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override one setting as key=value (repeatable)");
    sub->add_option_function<std::string>("--seed", [&](const std::string& v) { overrides["seed"] = v; }, "random seed");
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { overrides["out"] = v; }, "run directory");
    for (const auto& [flag, key] : cmd.flags) {
      const std::string k = key;
      sub->add_option_function<std::string>(flag, [&overrides, k](const std::string& v) { overrides[k] = v; },
                                            "sets " + k);
    }
  }

  if (args.size() > 1 && !args[1].starts_with("-") &&
      std::none_of(commands().begin(), commands().end(), [&](const Command& c) { return args[1] == c.name; })) {
    std::cerr << app.help() << "unknown subcommand '" << args[1] << "'\n";
    return 2;
  }
  std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << one_line(e.what()) << '\n';
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const auto* cmd = &*std::find_if(commands().begin(), commands().end(),
                                   [&](const Command& c) { return sub->get_name() == c.name; });
  const auto previous = spdlog::default_logger();
  spdlog::set_default_logger(cli_logger());
  int status = 0;
  try {
    Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    cmd->fn(cfg);
  } catch (const std::exception& e) {
    std::cerr << "stylebt " << cmd->name << ": error: " << one_line(e.what()) << '\n';
    status = 1;
  }
  spdlog::set_default_logger(previous);
  return status;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

}  // namespace stylebt::cli
