// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/seq2seq.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "stylebt/checkpoint.hpp"

namespace stylebt {
namespace {

class TinySession final : public DecodeSession {
 public:
  explicit TinySession(nn::Transformer<float>::Decoder decoder) : decoder_(std::move(decoder)) {}
  int batch_size() const override { return decoder_.batch_size(); }
  nn::Matrix<float> step(std::span<const int> tokens) override { return decoder_.step(tokens); }

 private:
  nn::Transformer<float>::Decoder decoder_;
};

std::vector<int> with_eos(const std::vector<int>& ids) {
  std::vector<int> out = ids;
  out.push_back(Vocabulary::kEos);
  return out;
}

int config_int(const Checkpoint& ckpt, const std::string& key) {
  const auto& v = ckpt.config_value(key);
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw FormatError("checkpoint config '" + key + "' is not an integer: " + v);
  }
}

}  // namespace

std::string backbone_name(BackboneKind kind) {
  return kind == BackboneKind::ReferenceTiny ? "reference-tiny" : "external";
}

BackboneKind parse_backbone(const std::string& name) {
  if (name == "reference-tiny") return BackboneKind::ReferenceTiny;
  if (name == "external") return BackboneKind::External;
  throw ConfigError("unknown backbone '" + name + "' (expected reference-tiny or external)");
}

std::vector<int> Seq2SeqModel::encode_source(const Utterance& x) const {
  if (x.empty()) throw EmptyUtteranceError("cannot encode an empty source");
  auto ids = vocab().encode(x.tokens);
  const auto cap = static_cast<std::size_t>(max_source_length());
  if (ids.size() > cap) {
    spdlog::warn("source of {} tokens truncated to {}", ids.size(), cap);
    ids.resize(cap);
  }
  return ids;
}

std::vector<int> Seq2SeqModel::encode_target(const Utterance& y) const {
  if (y.empty()) throw EmptyUtteranceError("cannot train on an empty target");
  auto ids = vocab().encode(y.tokens);
  const auto cap = static_cast<std::size_t>(max_target_length() - 1);
  if (ids.size() > cap) {
    spdlog::warn("target of {} tokens truncated to {}", ids.size(), cap);
    ids.resize(cap);
  }
  ids.push_back(Vocabulary::kEos);
  return ids;
}

ReferenceTinyModel::ReferenceTinyModel(Vocabulary vocab, const nn::TransformerConfig& config, std::uint64_t seed,
                                       const Seq2SeqOptions& options)
    : vocab_(std::move(vocab)), net_(config, seed), options_(options), adam_(options.adam) {
  if (config.vocab_size != vocab_.size()) throw Error("model vocabulary size does not match its network");
  if (config.max_positions < 2) throw Error("model needs at least two positions");
}

std::unique_ptr<DecodeSession> ReferenceTinyModel::start_decoding(std::span<const std::vector<int>> sources) const {
  std::vector<std::vector<int>> full;
  full.reserve(sources.size());
  for (const auto& s : sources) {
    if (static_cast<int>(s.size()) > max_source_length()) throw Error("source exceeds the model's length limit");
    full.push_back(with_eos(s));
  }
  return std::make_unique<TinySession>(net_.start_decoding(full));
}

nn::PackedBatch ReferenceTinyModel::pack(std::span<const SequenceTerm> terms) const {
  std::vector<std::vector<int>> sources, targets;
  for (const auto& t : terms) {
    if (static_cast<int>(t.source.size()) > max_source_length() ||
        static_cast<int>(t.target.size()) > max_target_length()) {
      throw Error("sequence exceeds the model's length limit");
    }
    if (t.target.empty()) throw EmptyUtteranceError("sequence term has an empty target");
    sources.push_back(with_eos(t.source));
    targets.push_back(t.target);
  }
  return nn::pack_batch(sources, targets, Vocabulary::kBos);
}

std::vector<double> ReferenceTinyModel::sequence_logprobs(std::span<const SequenceTerm> terms) const {
  if (terms.empty()) return {};
  nn::NoGradGuard no_grad;
  const auto lp = net_.sequence_logprobs(pack(terms));
  std::vector<double> out;
  for (Eigen::Index i = 0; i < lp.rows(); ++i) out.push_back(lp.value()(i, 0));
  return out;
}

double ReferenceTinyModel::train_step(std::span<const SequenceTerm> terms, std::vector<double>* term_logprobs) {
  if (term_logprobs) term_logprobs->clear();
  if (terms.empty()) {
    grad_norm_ = 0.0;
    return 0.0;
  }
  const auto batch = pack(terms);
  std::vector<float> weights;
  weights.reserve(batch.targets.size());
  for (std::size_t b = 0; b < terms.size(); ++b) {
    const int len = nn::segment_length(batch.target_segments, static_cast<int>(b));
    weights.insert(weights.end(), static_cast<std::size_t>(len), static_cast<float>(-terms[b].weight));
  }
  const auto token_lp = net_.token_logprobs(batch);
  auto loss = nn::weighted_sum(token_lp, std::move(weights));
  const double value = loss.item();
  if (!std::isfinite(value)) throw Error("non-finite training loss (" + std::to_string(value) + "); step aborted");
  if (term_logprobs) {
    for (std::size_t b = 0; b < terms.size(); ++b) {
      const int start = batch.target_segments[b];
      const int len = nn::segment_length(batch.target_segments, static_cast<int>(b));
      term_logprobs->push_back(token_lp.value().block(start, 0, len, 1).template cast<double>().sum());
    }
  }
  loss.backward();
  grad_norm_ = adam_.step(net_.parameters());
  return value;
}

std::unique_ptr<Seq2SeqModel> ReferenceTinyModel::clone() const {
  auto copy = std::make_unique<ReferenceTinyModel>(vocab_, net_.config(), 0, options_);
  copy->net_.parameters().assign_values(net_.parameters());
  return copy;
}

bool ReferenceTinyModel::parameters_equal(const Seq2SeqModel& other) const {
  const auto* o = dynamic_cast<const ReferenceTinyModel*>(&other);
  return o && vocab_ == o->vocab_ && net_.parameters().values_equal(o->net_.parameters());
}

void ReferenceTinyModel::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.kind = kSeq2SeqCheckpointKind;
  const auto& c = net_.config();
  ckpt.config["backbone"] = backbone_name(kind());
  ckpt.config["model_dim"] = std::to_string(c.model_dim);
  ckpt.config["heads"] = std::to_string(c.heads);
  ckpt.config["ff_dim"] = std::to_string(c.ff_dim);
  ckpt.config["encoder_layers"] = std::to_string(c.encoder_layers);
  ckpt.config["decoder_layers"] = std::to_string(c.decoder_layers);
  ckpt.config["max_positions"] = std::to_string(c.max_positions);
  ckpt.lists["vocab"] = vocab_.content_tokens();
  ckpt.tensors = to_tensors(net_.parameters());
  write_checkpoint(path, ckpt);
}

std::unique_ptr<Seq2SeqModel> create_model(const ModelSpec& spec, Vocabulary vocab, std::uint64_t seed) {
  if (spec.kind == BackboneKind::External) {
    throw ConfigError("the external backbone is an adapter interface; no adapter is bundled with this build");
  }
  nn::TransformerConfig c;
  c.vocab_size = vocab.size();
  c.model_dim = spec.model_dim;
  c.heads = spec.heads;
  c.ff_dim = spec.ff_dim;
  c.encoder_layers = spec.encoder_layers;
  c.decoder_layers = spec.decoder_layers;
  c.max_positions = spec.max_positions;
  return std::make_unique<ReferenceTinyModel>(std::move(vocab), c, seed, spec.options);
}

void save_checkpoint(const Seq2SeqModel& model, const std::filesystem::path& path) { model.save(path); }

std::unique_ptr<Seq2SeqModel> load_checkpoint(const std::filesystem::path& path, const Seq2SeqOptions& options) {
  const Checkpoint ckpt = read_checkpoint(path, kSeq2SeqCheckpointKind);
  Vocabulary vocab = Vocabulary::from_tokens(ckpt.list("vocab"));
  nn::TransformerConfig c;
  c.vocab_size = vocab.size();
  c.model_dim = config_int(ckpt, "model_dim");
  c.heads = config_int(ckpt, "heads");
  c.ff_dim = config_int(ckpt, "ff_dim");
  c.encoder_layers = config_int(ckpt, "encoder_layers");
  c.decoder_layers = config_int(ckpt, "decoder_layers");
  c.max_positions = config_int(ckpt, "max_positions");
  auto model = std::make_unique<ReferenceTinyModel>(std::move(vocab), c, 0, options);
  from_tensors(ckpt.tensors, model->network().parameters());
  return model;
}

double nll_loss(const Seq2SeqModel& model, std::span<const SentencePair> pairs) {
  if (pairs.empty()) throw Error("NLL of an empty batch is undefined");
  std::vector<SequenceTerm> terms;
  for (const auto& p : pairs) terms.push_back({model.encode_source(p.source), model.encode_target(p.target), 1.0});
  double sum = 0.0;
  for (double lp : model.sequence_logprobs(terms)) sum -= lp;
  return sum / static_cast<double>(pairs.size());
}

double nll_loss(const Seq2SeqModel& model, const SentencePair& pair) {
  return nll_loss(model, std::span<const SentencePair>(&pair, 1));
}

double train_step(Seq2SeqModel& model, std::span<const SentencePair> pairs) {
  if (pairs.empty()) throw Error("cannot train on an empty batch");
  const double w = 1.0 / static_cast<double>(pairs.size());
  std::vector<SequenceTerm> terms;
  for (const auto& p : pairs) terms.push_back({model.encode_source(p.source), model.encode_target(p.target), w});
  return model.train_step(terms);
}

std::vector<Generation> decode_ids(const Seq2SeqModel& model, std::span<const std::vector<int>> sources, int max_len,
                                   DecodeMode mode, std::mt19937_64* rng) {
  if (mode == DecodeMode::Sample && rng == nullptr) throw Error("sampling needs a random generator");
  const int batch = static_cast<int>(sources.size());
  std::vector<Generation> out(sources.size());
  if (batch == 0) return out;
  max_len = std::clamp(max_len, 0, model.max_target_length() - 1);
  auto session = model.start_decoding(sources);
  std::vector<int> input(sources.size(), Vocabulary::kBos);
  std::vector<bool> done(sources.size(), false);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  int live = batch;
  for (int step = 0; step <= max_len && live > 0; ++step) {
    const auto probs = session->step(input);
    for (int b = 0; b < batch; ++b) {
      if (done[static_cast<std::size_t>(b)]) continue;
      const auto row = probs.row(b);
      int tok = 0;
      if (mode == DecodeMode::Greedy) {
        row.maxCoeff(&tok);
      } else {
        const double u = uniform(*rng);
        double acc = 0.0;
        tok = static_cast<int>(row.size()) - 1;
        for (Eigen::Index v = 0; v < row.size(); ++v) {
          acc += row(v);
          if (u < acc) {
            tok = static_cast<int>(v);
            break;
          }
        }
      }
      auto& g = out[static_cast<std::size_t>(b)];
      const double lp = std::log(std::max(static_cast<double>(row(tok)), 1e-45));
      if (tok == Vocabulary::kEos) {
        g.eos_logprob = lp;
        done[static_cast<std::size_t>(b)] = true;
        --live;
      } else if (step == max_len) {
        done[static_cast<std::size_t>(b)] = true;
        --live;
      } else {
        g.ids.push_back(tok);
        g.logprobs.push_back(lp);
      }
      input[static_cast<std::size_t>(b)] = tok;
    }
  }
  return out;
}

Utterance greedy_decode(const Seq2SeqModel& model, const Utterance& x, int max_len) {
  return greedy_decode_batch(model, std::span<const Utterance>(&x, 1), max_len).front();
}

std::vector<Utterance> greedy_decode_batch(const Seq2SeqModel& model, std::span<const Utterance> xs, int max_len) {
  std::vector<std::vector<int>> sources;
  for (const auto& x : xs) sources.push_back(model.encode_source(x));
  std::vector<Utterance> out;
  for (const auto& g : decode_ids(model, sources, max_len, DecodeMode::Greedy)) {
    Utterance u;
    u.tokens = model.vocab().decode(g.ids);
    u.raw = u.text();
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<DecodeOutcome> sample_decode_batch(const Seq2SeqModel& model, std::span<const std::vector<int>> sources,
                                               int max_len, std::mt19937_64& rng) {
  const auto greedy = decode_ids(model, sources, max_len, DecodeMode::Greedy);
  const auto sampled = decode_ids(model, sources, max_len, DecodeMode::Sample, &rng);
  std::vector<DecodeOutcome> out(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto& o = out[i];
    o.greedy_ids = greedy[i].ids;
    o.greedy.tokens = model.vocab().decode(o.greedy_ids);
    o.greedy.raw = o.greedy.text();
    o.sampled_ids = sampled[i].ids;
    o.sampled.tokens = model.vocab().decode(o.sampled_ids);
    o.sampled.raw = o.sampled.text();
    o.sampled_logprobs = sampled[i].logprobs;
    o.eos_logprob = sampled[i].eos_logprob;
  }
  return out;
}

DecodeOutcome sample_decode(const Seq2SeqModel& model, const Utterance& x, int max_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::vector<int>> sources{model.encode_source(x)};
  return sample_decode_batch(model, sources, max_len, rng).front();
}

}  // namespace stylebt
