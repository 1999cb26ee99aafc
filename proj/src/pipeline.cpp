// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace stylebt {
namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << std::setprecision(10) << *v;
  return s.str();
}

/// Target ids of a sample for a teacher-forced pass; nullopt when the
/// sample has nothing to score.
std::optional<std::vector<int>> sample_target(const DecodeOutcome& o) {
  std::vector<int> t = o.sampled_ids;
  if (o.eos_logprob) t.push_back(Vocabulary::kEos);
  if (t.empty()) return std::nullopt;
  return t;
}

std::vector<int> as_source(const Seq2SeqModel& model, std::vector<int> ids) {
  const auto cap = static_cast<std::size_t>(model.max_source_length());
  if (ids.size() > cap) ids.resize(cap);
  return ids;
}

/// p(style | u) for each utterance; empty utterances get an indifferent 0.5.
std::vector<double> style_probs(const StyleClassifier& clf, const std::vector<Utterance>& us, const StyleId& style) {
  std::vector<Utterance> nonempty;
  for (const auto& u : us) {
    if (!u.empty()) nonempty.push_back(u);
  }
  const auto probs = clf.predict_batch(nonempty);
  const auto idx = static_cast<std::size_t>(clf.styles().index_of(style));
  std::vector<double> out;
  std::size_t k = 0;
  for (const auto& u : us) out.push_back(u.empty() ? 0.5 : probs[k++][idx]);
  return out;
}

struct RewardSums {
  double sc = 0.0, bleu = 0.0, learned = 0.0;
  std::size_t sc_n = 0, bleu_n = 0, learned_n = 0;
};

/// Appends one policy-gradient term per usable sample of `outcomes`, with the
/// rewards enabled by the flags computed against `anchors` (the model's
/// inputs). Returns the count of samples that could not be scored.
std::size_t add_reward_terms(std::vector<SequenceTerm>& terms, const std::vector<std::vector<int>>& sources,
                             const std::vector<DecodeOutcome>& outcomes, const std::vector<Utterance>& anchors,
                             const StyleClassifier* clf, const StyleId* from, const StyleId* to, bool style_on,
                             bool bleu_on, bool learned_on, const RewardConfig& rc,
                             const LearnedMetricOracle* oracle, double scale, RewardSums& sums) {
  std::vector<double> p_from, p_to, learned;
  if (style_on) {
    std::vector<Utterance> samples;
    for (const auto& o : outcomes) samples.push_back(o.sampled);
    p_from = style_probs(*clf, samples, *from);
    p_to = style_probs(*clf, samples, *to);
  }
  if (learned_on) {
    std::vector<Utterance> samples;
    for (const auto& o : outcomes) samples.push_back(o.sampled);
    learned = oracle->score_batch(samples, anchors);
  }
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto target = sample_target(outcomes[i]);
    if (!target) {
      ++skipped;
      continue;
    }
    double r = 0.0;
    if (style_on) {
      const double v = style_reward(p_from[i], p_to[i], rc.lambda_sc);
      sums.sc += v;
      ++sums.sc_n;
      r += v;
    }
    if (bleu_on && !anchors[i].empty()) {
      const double v =
          self_critical_bleu_reward(outcomes[i].greedy, outcomes[i].sampled, anchors[i], rc.lambda_bleu, rc.sign);
      sums.bleu += v;
      ++sums.bleu_n;
      r += v;
    }
    if (learned_on) {
      const double v = rc.lambda_learned * learned[i];
      sums.learned += v;
      ++sums.learned_n;
      r += v;
    }
    if (r != 0.0) terms.push_back({sources[i], std::move(*target), r * scale});
  }
  return skipped;
}

double mean_or_zero(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

/// Per-model reward accumulators over an ibt step.
struct ModelAccumulator {
  RewardSums rewards;
  double nll = 0.0;
  std::size_t skipped = 0;

  DirectionStepMetrics finish() const {
    return {nll, mean_or_zero(rewards.sc, rewards.sc_n), mean_or_zero(rewards.bleu, rewards.bleu_n),
            mean_or_zero(rewards.learned, rewards.learned_n), skipped};
  }
};

/// One back-translation pass: `gen` transfers `batch` (style from -> to),
/// optionally takes the SC1 update, and its greedy outputs supervise
/// `train` on the reverse direction.
void ibt_pass(Seq2SeqModel& gen, Seq2SeqModel& train, std::span<const Utterance> batch, const StyleId& from,
              const StyleId& to, const IbtStepContext& ctx, std::mt19937_64& rng, ModelAccumulator& gen_acc,
              ModelAccumulator& train_acc) {
  const auto& rc = ctx.rewards;
  std::vector<std::vector<int>> sources;
  for (const auto& x : batch) sources.push_back(gen.encode_source(x));
  const auto outcomes = sample_decode_batch(gen, sources, ctx.max_len, rng);
  const double inv = 1.0 / static_cast<double>(batch.size());

  if (rc.sc1) {
    std::vector<SequenceTerm> terms;
    std::vector<Utterance> anchors(batch.begin(), batch.end());
    gen_acc.skipped += add_reward_terms(terms, sources, outcomes, anchors, &ctx.classifier, &from, &to, true, false,
                                        false, rc, nullptr, inv, gen_acc.rewards);
    gen.train_step(terms);
  }

  // Pseudo-pairs: generated source, genuine corpus target.
  std::vector<SequenceTerm> terms;
  std::vector<std::vector<int>> pseudo_sources;
  std::vector<Utterance> pseudo_utterances;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    pseudo_sources.push_back(as_source(train, outcomes[i].greedy_ids));
    pseudo_utterances.push_back(outcomes[i].greedy);
    terms.push_back({pseudo_sources.back(), train.encode_target(batch[i]), inv});
  }
  const std::size_t n_nll = terms.size();
  const bool bleu_on = rc.bleu;
  const bool learned_on = rc.learned && ctx.oracle != nullptr;
  if (rc.sc0 || bleu_on || learned_on) {
    const auto own = sample_decode_batch(train, pseudo_sources, ctx.max_len, rng);
    train_acc.skipped += add_reward_terms(terms, pseudo_sources, own, pseudo_utterances, &ctx.classifier, &to, &from,
                                          rc.sc0, bleu_on, learned_on, rc, ctx.oracle, inv, train_acc.rewards);
  }
  std::vector<double> lps;
  train.train_step(terms, &lps);
  double nll = 0.0;
  for (std::size_t i = 0; i < n_nll; ++i) nll -= lps[i];
  train_acc.nll = nll * inv;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Cycles through a corpus in reshuffled epochs.
class BatchStream {
 public:
  BatchStream(const Dataset<LabeledUtterance>& data, std::mt19937_64& rng) : data_(data), rng_(rng) {}

  std::vector<Utterance> next(std::size_t n) {
    std::vector<Utterance> out;
    while (out.size() < n) {
      if (pos_ >= order_.size()) {
        order_ = shuffled(data_.size(), rng_);
        pos_ = 0;
      }
      out.push_back(data_[order_[pos_++]].utterance);
    }
    return out;
  }

 private:
  const Dataset<LabeledUtterance>& data_;
  std::mt19937_64& rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_logs_tsv(std::ostream& out, const TrainingLog& log) {
  out << "step\tdirection\tnll\tr_sc\tr_bleu\tr_learned\tvalid_acc\tvalid_bleu\tvalid_hm\n";
  for (const auto& r : log.rows) {
    out << r.step << '\t' << r.direction << '\t' << cell(r.nll) << '\t' << cell(r.r_sc) << '\t' << cell(r.r_bleu)
        << '\t' << cell(r.r_learned) << '\t' << cell(r.valid_acc) << '\t' << cell(r.valid_bleu) << '\t'
        << cell(r.valid_hm) << '\n';
  }
}

void write_logs_tsv(const std::filesystem::path& path, const TrainingLog& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_logs_tsv(out, log);
}

std::unique_ptr<Seq2SeqModel> further_pretrain(const Seq2SeqModel& base, const Dataset<SentencePair>& pairs,
                                               const SupervisedConfig& config, TrainingLog* log) {
  return offline_train(base, pairs, OfflineContext{}, config, log);
}

ModelPair ModelPair::from_base(const Seq2SeqModel& base, const StylePair& styles) {
  return {base.clone(), base.clone(), styles};
}

ModelPair ModelPair::clone() const { return {a->clone(), b->clone(), styles}; }

IbtStepMetrics ibt_step(ModelPair& models, std::span<const Utterance> batch_first,
                        std::span<const Utterance> batch_second, const IbtStepContext& context, std::mt19937_64& rng) {
  if (batch_first.empty() || batch_second.empty()) throw Error("ibt_step needs non-empty batches for both styles");
  context.rewards.validate();
  if (context.rewards.learned && context.oracle == nullptr) {
    throw ConfigError("the learned-metric reward is enabled but no oracle was given");
  }
  const auto& s = models.styles;
  ModelAccumulator acc_a, acc_b;
  ibt_pass(*models.a, *models.b, batch_first, s.first, s.second, context, rng, acc_a, acc_b);
  ibt_pass(*models.b, *models.a, batch_second, s.second, s.first, context, rng, acc_b, acc_a);
  const auto a = acc_a.finish();
  const auto b = acc_b.finish();
  if (a.skipped + b.skipped > 0) spdlog::debug("ibt step skipped {} unscorable samples", a.skipped + b.skipped);
  return {a, b};
}

void IbtConfig::validate() const {
  if (steps < 0 || batch_size <= 0 || valid_every <= 0 || patience < 0 || max_len <= 0) {
    throw ConfigError("IBT budgets must be positive");
  }
  if (steps > 0 && valid_every > steps) throw ConfigError("validation cadence exceeds the step budget");
  rewards.validate();
}

DirectionValidation direction_validation(const Dataset<ReferenceSet>& refs) {
  DirectionValidation d;
  for (const auto& r : refs) {
    d.sources.push_back(r.source);
    d.references.push_back(r.references);
  }
  return d;
}

DirectionValidation direction_validation(const Dataset<LabeledUtterance>& sources) {
  DirectionValidation d;
  for (const auto& item : sources) d.sources.push_back(item.utterance);
  return d;
}

ValidationScore validate_direction(const Seq2SeqModel& model, const DirectionValidation& data,
                                   const StyleClassifier& clf, const StyleId& target, int max_len) {
  if (data.sources.empty()) throw Error("validation set is empty");
  const auto outputs = greedy_decode_batch(model, data.sources, max_len);
  BleuStats stats;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (data.references.empty()) {
      stats += bleu_stats(outputs[i].tokens, std::span<const Utterance>(&data.sources[i], 1));
    } else {
      stats += bleu_stats(outputs[i].tokens, data.references.at(i));
    }
  }
  ValidationScore v;
  v.acc = style_accuracy(clf, outputs, target);
  v.bleu = stats.score();
  v.hm = harmonic_mean(v.acc, v.bleu);
  return v;
}

IbtResult ibt_train(const ModelPair& models, const Dataset<LabeledUtterance>& unpaired_first,
                    const Dataset<LabeledUtterance>& unpaired_second, const IbtValidation& valid,
                    const StyleClassifier& clf, const IbtConfig& config, const LearnedMetricOracle* oracle) {
  config.validate();
  if (unpaired_first.empty() || unpaired_second.empty()) throw Error("IBT needs unpaired data in both styles");
  const auto& s = models.styles;
  const std::string name_a = s.first.name + "-" + s.second.name;
  const std::string name_b = s.second.name + "-" + s.first.name;

  std::mt19937_64 rng(config.seed);
  ModelPair current = models.clone();
  IbtResult result{models.clone(), {}, {}, {}, 0, 0, 0};
  result.best_a = validate_direction(*current.a, valid.first_to_second, clf, s.second, config.max_len);
  result.best_b = validate_direction(*current.b, valid.second_to_first, clf, s.first, config.max_len);
  result.log.rows.push_back({0, name_a, {}, {}, {}, {}, result.best_a.acc, result.best_a.bleu, result.best_a.hm});
  result.log.rows.push_back({0, name_b, {}, {}, {}, {}, result.best_b.acc, result.best_b.bleu, result.best_b.hm});

  BatchStream stream_first(unpaired_first, rng);
  BatchStream stream_second(unpaired_second, rng);
  const IbtStepContext ctx{clf, config.rewards, oracle, config.max_len};
  int stale = 0;
  for (long step = 1; step <= config.steps; ++step) {
    const auto batch_first = stream_first.next(static_cast<std::size_t>(config.batch_size));
    const auto batch_second = stream_second.next(static_cast<std::size_t>(config.batch_size));
    const auto m = ibt_step(current, batch_first, batch_second, ctx, rng);
    LogRow row_a{step, name_a, m.a.nll, m.a.r_sc, m.a.r_bleu, m.a.r_learned, {}, {}, {}};
    LogRow row_b{step, name_b, m.b.nll, m.b.r_sc, m.b.r_bleu, m.b.r_learned, {}, {}, {}};
    result.steps_run = step;

    if (step % config.valid_every == 0 || step == config.steps) {
      const auto va = validate_direction(*current.a, valid.first_to_second, clf, s.second, config.max_len);
      const auto vb = validate_direction(*current.b, valid.second_to_first, clf, s.first, config.max_len);
      row_a.valid_acc = va.acc;
      row_a.valid_bleu = va.bleu;
      row_a.valid_hm = va.hm;
      row_b.valid_acc = vb.acc;
      row_b.valid_bleu = vb.bleu;
      row_b.valid_hm = vb.hm;
      bool improved = false;
      if (va.hm > result.best_a.hm) {
        result.best_a = va;
        result.best_step_a = step;
        result.models.a = current.a->clone();
        improved = true;
      }
      if (vb.hm > result.best_b.hm) {
        result.best_b = vb;
        result.best_step_b = step;
        result.models.b = current.b->clone();
        improved = true;
      }
      spdlog::info("ibt step {}: {} acc {:.3f} bleu {:.3f} hm {:.3f}; {} acc {:.3f} bleu {:.3f} hm {:.3f}", step,
                   name_a, va.acc, va.bleu, va.hm, name_b, vb.acc, vb.bleu, vb.hm);
      stale = improved ? 0 : stale + 1;
      result.log.rows.push_back(std::move(row_a));
      result.log.rows.push_back(std::move(row_b));
      if (config.patience > 0 && stale >= config.patience) {
        spdlog::info("ibt stopping early after {} validations without improvement", stale);
        break;
      }
      continue;
    }
    result.log.rows.push_back(std::move(row_a));
    result.log.rows.push_back(std::move(row_b));
  }
  return result;
}

Dataset<SentencePair> generate_pseudo_pairs(const Seq2SeqModel& model, const Dataset<LabeledUtterance>& sources,
                                            const StyleId& target_style, const StyleClassifier& clf,
                                            const LearnedMetricOracle& oracle, const PairSelectionConfig& config) {
  std::vector<std::size_t> picked(sources.size());
  std::iota(picked.begin(), picked.end(), 0);
  if (config.sample_count > 0 && config.sample_count < sources.size()) {
    std::mt19937_64 rng(config.seed);
    std::shuffle(picked.begin(), picked.end(), rng);
    picked.resize(config.sample_count);
    std::sort(picked.begin(), picked.end());
  }
  Dataset<SentencePair> out{sources.split, {}};
  std::size_t skipped = 0;
  constexpr std::size_t kChunk = 128;
  for (std::size_t start = 0; start < picked.size(); start += kChunk) {
    const std::size_t end = std::min(picked.size(), start + kChunk);
    std::vector<Utterance> xs;
    for (std::size_t i = start; i < end; ++i) xs.push_back(sources[picked[i]].utterance);
    const auto ys = greedy_decode_batch(model, xs, config.max_len);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& item = sources[picked[start + i]];
      if (ys[i].empty()) {
        ++skipped;
        continue;
      }
      if (item.style == target_style) throw Error("pseudo-pair source already has the target style");
      SentencePair p;
      p.source = xs[i];
      p.target = ys[i];
      p.source_style = item.style;
      p.target_style = target_style;
      out.items.push_back(std::move(p));
    }
  }
  if (skipped > 0) spdlog::warn("skipped {} empty generations", skipped);
  std::vector<Utterance> xs, ys;
  for (const auto& p : out) {
    xs.push_back(p.source);
    ys.push_back(p.target);
  }
  const auto content = oracle.score_batch(xs, ys);
  const auto px = clf.predict_batch(xs);
  const auto py = clf.predict_batch(ys);
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    auto& p = out.items[i];
    const double a = px[i][static_cast<std::size_t>(clf.styles().index_of(p.source_style))];
    const double b = py[i][static_cast<std::size_t>(clf.styles().index_of(p.target_style))];
    p.scores["content"] = content[i];
    p.scores["p_source"] = a;
    p.scores["p_target"] = b;
    p.scores["style_mean"] = (a + b) / 2.0;
  }
  return out;
}

Dataset<SentencePair> select_high_quality_pairs(const Dataset<SentencePair>& pairs, const PairSelectionConfig& config) {
  if (!std::isfinite(config.sigma_c)) throw ConfigError("sigma_c must be finite");
  if (!(config.sigma_s >= 0.0 && config.sigma_s <= 1.0)) throw ConfigError("sigma_s must lie in [0, 1]");
  Dataset<SentencePair> out{pairs.split, {}};
  for (const auto& p : pairs) {
    const auto c = p.scores.find("content");
    const auto a = p.scores.find("p_source");
    const auto b = p.scores.find("p_target");
    if (c == p.scores.end() || a == p.scores.end() || b == p.scores.end()) {
      throw Error("pair '" + p.source.text() + "' is not scored");
    }
    if (c->second > config.sigma_c && (a->second + b->second) / 2.0 > config.sigma_s) out.items.push_back(p);
  }
  return out;
}

std::unique_ptr<Seq2SeqModel> offline_train(const Seq2SeqModel& base, const Dataset<SentencePair>& pairs,
                                            const OfflineContext& context, const SupervisedConfig& config,
                                            TrainingLog* log) {
  if (pairs.empty()) throw Error("cannot train on an empty pair set");
  if (config.epochs < 0 || config.batch_size <= 0) throw ConfigError("training budgets must be positive");
  const auto& rc = context.rewards;
  rc.validate();
  const bool style_on = rc.sc0;
  const bool learned_on = rc.learned;
  if (style_on && context.classifier == nullptr) throw ConfigError("the style reward needs a classifier");
  if (learned_on && context.oracle == nullptr) throw ConfigError("the learned-metric reward needs an oracle");
  const bool any = style_on || rc.bleu || learned_on;
  const std::string direction = any ? "offline" : "pretrain";

  auto model = base.clone();
  std::mt19937_64 rng(config.seed);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(pairs.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      std::vector<SequenceTerm> terms;
      std::vector<std::vector<int>> sources;
      std::vector<Utterance> anchors;
      for (std::size_t i = start; i < end; ++i) {
        const auto& p = pairs[order[i]];
        sources.push_back(model->encode_source(p.source));
        anchors.push_back(p.source);
        terms.push_back({sources.back(), model->encode_target(p.target), inv});
      }
      const std::size_t n_nll = terms.size();
      RewardSums sums;
      if (any) {
        const auto outcomes = sample_decode_batch(*model, sources, config.max_len, rng);
        if (style_on) {
          // Pairs may mix directions, so the style reward is added per pair.
          for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& p = pairs[order[start + i]];
            std::vector<SequenceTerm> one;
            add_reward_terms(one, {sources[i]}, {outcomes[i]}, {anchors[i]}, context.classifier, &p.source_style,
                             &p.target_style, true, false, false, rc, nullptr, inv, sums);
            terms.insert(terms.end(), one.begin(), one.end());
          }
        }
        add_reward_terms(terms, sources, outcomes, anchors, nullptr, nullptr, nullptr, false, rc.bleu, learned_on, rc,
                         context.oracle, inv, sums);
      }
      std::vector<double> lps;
      model->train_step(terms, &lps);
      double nll = 0.0;
      for (std::size_t i = 0; i < n_nll; ++i) nll -= lps[i];
      ++step;
      if (log) {
        LogRow row{step, direction, nll * inv, {}, {}, {}, {}, {}, {}};
        if (any) {
          row.r_sc = mean_or_zero(sums.sc, sums.sc_n);
          row.r_bleu = mean_or_zero(sums.bleu, sums.bleu_n);
          row.r_learned = mean_or_zero(sums.learned, sums.learned_n);
        }
        log->rows.push_back(std::move(row));
      }
    }
  }
  return model;
}

}  // namespace stylebt
