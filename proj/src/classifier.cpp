// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/classifier.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include "stylebt/checkpoint.hpp"
#include "stylebt/nn/adam.hpp"

namespace stylebt {
namespace {

constexpr std::size_t kPredictChunk = 256;

int parse_int(const Checkpoint& ckpt, const std::string& key) {
  const std::string& v = ckpt.config_value(key);
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw FormatError("checkpoint config '" + key + "' is not an integer: " + v);
  }
}

std::string join_ints(const std::vector<int>& xs) {
  std::string out;
  for (int x : xs) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto field = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      out.push_back(std::stoi(field));
    } catch (const std::exception&) {
      throw FormatError("bad integer list in checkpoint: " + s);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

StyleProbs softmax2(float a, float b) {
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  return {ea / (ea + eb), eb / (ea + eb)};
}

}  // namespace

StyleClassifier::StyleClassifier(StylePair styles, Vocabulary vocab, const nn::TextCnnConfig& config,
                                 std::uint64_t seed)
    : styles_(std::move(styles)), vocab_(std::move(vocab)), net_(config, seed) {
  if (config.classes != 2) throw Error("style classifier must have exactly two classes");
  if (config.vocab_size != vocab_.size()) throw Error("classifier vocabulary size does not match its network");
}

std::vector<StyleProbs> StyleClassifier::predict_batch(std::span<const Utterance> utterances) const {
  nn::NoGradGuard no_grad;
  std::vector<StyleProbs> out;
  out.reserve(utterances.size());
  for (std::size_t start = 0; start < utterances.size(); start += kPredictChunk) {
    const std::size_t end = std::min(utterances.size(), start + kPredictChunk);
    std::vector<std::vector<int>> ids;
    for (std::size_t i = start; i < end; ++i) {
      if (utterances[i].empty()) throw EmptyUtteranceError("cannot classify an empty utterance");
      ids.push_back(vocab_.encode(utterances[i].tokens));
    }
    const auto logits = net_.logits(ids);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) out.push_back(softmax2(logits.value()(r, 0), logits.value()(r, 1)));
  }
  return out;
}

StyleProbs StyleClassifier::predict(const Utterance& utterance) const {
  return predict_batch(std::span<const Utterance>(&utterance, 1)).front();
}

double StyleClassifier::probability(const Utterance& utterance, const StyleId& style) const {
  return predict(utterance)[static_cast<std::size_t>(styles_.index_of(style))];
}

const StyleId& StyleClassifier::predict_label(const Utterance& utterance) const {
  const auto p = predict(utterance);
  return p[1] > p[0] ? styles_.second : styles_.first;
}

StyleClassifier StyleClassifier::clone() const {
  StyleClassifier copy(styles_, vocab_, net_.config(), 0);
  copy.net_.parameters().assign_values(net_.parameters());
  return copy;
}

bool StyleClassifier::parameters_equal(const StyleClassifier& other) const {
  return vocab_ == other.vocab_ && net_.parameters().values_equal(other.net_.parameters());
}

void StyleClassifier::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.kind = kClassifierCheckpointKind;
  const auto& c = net_.config();
  ckpt.config["style.first"] = styles_.first.name;
  ckpt.config["style.second"] = styles_.second.name;
  ckpt.config["embedding_dim"] = std::to_string(c.embedding_dim);
  ckpt.config["filters_per_width"] = std::to_string(c.filters_per_width);
  ckpt.config["filter_widths"] = join_ints(c.filter_widths);
  ckpt.lists["vocab"] = vocab_.content_tokens();
  ckpt.tensors = to_tensors(net_.parameters());
  write_checkpoint(path, ckpt);
}

StyleClassifier StyleClassifier::load(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path, kClassifierCheckpointKind);
  Vocabulary vocab = Vocabulary::from_tokens(ckpt.list("vocab"));
  nn::TextCnnConfig c;
  c.vocab_size = vocab.size();
  c.embedding_dim = parse_int(ckpt, "embedding_dim");
  c.filters_per_width = parse_int(ckpt, "filters_per_width");
  c.filter_widths = split_ints(ckpt.config_value("filter_widths"));
  c.classes = 2;
  StyleClassifier clf(StylePair(StyleId(ckpt.config_value("style.first")), StyleId(ckpt.config_value("style.second"))),
                      std::move(vocab), c, 0);
  from_tensors(ckpt.tensors, clf.net_.parameters());
  return clf;
}

ClassifierTrainResult train_classifier(const Dataset<LabeledUtterance>& train, const Dataset<LabeledUtterance>& valid,
                                       const StylePair& styles, const ClassifierTrainConfig& config) {
  if (config.epochs <= 0 || config.batch_size <= 0 || !(config.learning_rate > 0.0) || config.filters_per_width <= 0 ||
      config.embedding_dim <= 0) {
    throw ConfigError("classifier training settings must be positive");
  }
  std::array<std::size_t, 2> counts{};
  Vocabulary::Builder builder;
  for (const auto& item : train) {
    if (item.utterance.empty()) throw EmptyUtteranceError("empty utterance in classifier training data");
    ++counts[static_cast<std::size_t>(styles.index_of(item.style))];
    builder.add(item.utterance);
  }
  if (counts[0] == 0 || counts[1] == 0) {
    throw Error("classifier training data must contain both styles ('" + styles.first.name + "', '" +
                styles.second.name + "')");
  }
  for (const auto& item : valid) styles.index_of(item.style);

  nn::TextCnnConfig net_config;
  Vocabulary vocab = builder.build(config.max_vocab);
  net_config.vocab_size = vocab.size();
  net_config.embedding_dim = config.embedding_dim;
  net_config.filters_per_width = config.filters_per_width;
  net_config.filter_widths = config.filter_widths;
  std::mt19937_64 rng(config.seed);
  StyleClassifier model(styles, std::move(vocab), net_config, rng());

  std::vector<std::vector<int>> ids;
  std::vector<int> labels;
  for (const auto& item : train) {
    ids.push_back(model.vocab().encode(item.utterance.tokens));
    labels.push_back(styles.index_of(item.style));
  }

  nn::AdamOptions adam_options;
  adam_options.learning_rate = config.learning_rate;
  nn::Adam<float> adam(adam_options);
  auto& params = model.network().parameters();

  std::optional<StyleClassifier> best;
  ClassifierTrainResult result{model.clone(), {}, {}, 0};
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<std::vector<int>> batch;
      std::vector<int> targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(ids[order[i]]);
        targets.push_back(labels[order[i]]);
      }
      const auto n = static_cast<float>(batch.size());
      auto logp = nn::log_softmax_pick(model.network().logits(batch), std::move(targets));
      auto loss = nn::weighted_sum(logp, std::vector<float>(batch.size(), -1.0f / n));
      loss.backward();
      adam.step(params);
      loss_sum += loss.item();
      ++batches;
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(batches));
    if (!valid.empty()) {
      const double acc = classifier_accuracy(model, valid);
      result.valid_accuracy.push_back(acc);
      spdlog::info("classifier epoch {}: loss {:.4f}, valid accuracy {:.4f}", epoch, result.train_loss.back(), acc);
      if (!best || acc > result.valid_accuracy[static_cast<std::size_t>(result.best_epoch - 1)]) {
        best = model.clone();
        result.best_epoch = epoch;
      }
    } else {
      spdlog::info("classifier epoch {}: loss {:.4f}", epoch, result.train_loss.back());
    }
  }
  if (valid.empty()) {
    spdlog::warn("no validation data for the classifier; keeping the final epoch");
    result.best_epoch = config.epochs;
    result.classifier = std::move(model);
  } else {
    result.classifier = std::move(*best);
  }
  return result;
}

StyleProbs predict_style_probs(const StyleClassifier& clf, const Utterance& utterance) {
  return clf.predict(utterance);
}

Dataset<SentencePair> score_style_pairs(const StyleClassifier& clf, const Dataset<SentencePair>& pairs) {
  std::vector<Utterance> sources, targets;
  for (const auto& p : pairs) {
    sources.push_back(p.source);
    targets.push_back(p.target);
  }
  const auto ps = clf.predict_batch(sources);
  const auto pt = clf.predict_batch(targets);
  Dataset<SentencePair> out = pairs;
  const auto& styles = clf.styles();
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    auto& p = out.items[i];
    const double a = ps[i][static_cast<std::size_t>(styles.index_of(p.source_style))];
    const double b = pt[i][static_cast<std::size_t>(styles.index_of(p.target_style))];
    p.scores["p_source"] = a;
    p.scores["p_target"] = b;
    p.scores["style_mean"] = (a + b) / 2.0;
  }
  return out;
}

Dataset<SentencePair> filter_scored_paraphrase_pairs(const Dataset<SentencePair>& scored, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in [0, 1]");
  Dataset<SentencePair> out{scored.split, {}};
  for (const auto& p : scored) {
    const auto a = p.scores.find("p_source");
    const auto b = p.scores.find("p_target");
    if (a == p.scores.end() || b == p.scores.end()) throw Error("pair carries no style scores");
    if ((a->second + b->second) / 2.0 > sigma) out.items.push_back(p);
  }
  return out;
}

Dataset<SentencePair> filter_paraphrase_pairs(const StyleClassifier& clf, const Dataset<SentencePair>& pairs,
                                              double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in [0, 1]");
  return filter_scored_paraphrase_pairs(score_style_pairs(clf, pairs), sigma);
}

double classifier_accuracy(const StyleClassifier& clf, const Dataset<LabeledUtterance>& test) {
  if (test.empty()) throw Error("classifier accuracy needs a non-empty test set");
  std::vector<Utterance> us;
  for (const auto& item : test) us.push_back(item.utterance);
  const auto probs = clf.predict_batch(us);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int predicted = probs[i][1] > probs[i][0] ? 1 : 0;
    if (predicted == clf.styles().index_of(test[i].style)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

}  // namespace stylebt
