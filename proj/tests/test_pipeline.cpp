// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <sstream>

#include "stylebt/pipeline.hpp"
#include "test_support.hpp"

using namespace stylebt;
using stylebt::testing::read_file;
using stylebt::testing::small_toy_task;
using stylebt::testing::TempDir;
using stylebt::testing::toy_classifier;
using stylebt::testing::U;

namespace {

std::unique_ptr<Seq2SeqModel> untrained_model() {
  const auto& task = small_toy_task();
  Vocabulary::Builder vb;
  for (const auto& item : task.train_labeled()) vb.add(item.utterance.tokens);
  ModelSpec spec;
  spec.model_dim = 32;
  spec.heads = 2;
  spec.ff_dim = 64;
  spec.encoder_layers = 1;
  spec.decoder_layers = 1;
  spec.max_positions = 16;
  spec.options.adam.learning_rate = 3e-3;
  return create_model(spec, vb.build(), 3);
}

SupervisedConfig short_training(int epochs = 2) {
  SupervisedConfig c;
  c.epochs = epochs;
  c.batch_size = 32;
  c.max_len = 10;
  return c;
}

/// A copy model trained briefly on the paraphrases, shared per binary.
const Seq2SeqModel& pretrained_model() {
  static const auto model = further_pretrain(*untrained_model(), small_toy_task().paraphrases, short_training());
  return *model;
}

StyleClassifier indifferent_classifier() {
  auto clf = toy_classifier().clone();
  auto& params = clf.network().parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_value().setZero();
  return clf;
}

SentencePair scored(double content, double p_source, double p_target) {
  SentencePair p{U("a"), U("b"), StyleId("informal"), StyleId("formal"), {}};
  p.scores = {{"content", content}, {"p_source", p_source}, {"p_target", p_target}};
  return p;
}

std::vector<Utterance> first_utterances(const Dataset<LabeledUtterance>& d, std::size_t n) {
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < n && i < d.size(); ++i) out.push_back(d[i].utterance);
  return out;
}

IbtValidation small_validation() {
  const auto& task = small_toy_task();
  IbtValidation v;
  v.first_to_second = direction_validation(task.valid_first_to_second);
  v.second_to_first = direction_validation(task.valid_second_to_first);
  v.first_to_second.sources.resize(20);
  v.first_to_second.references.resize(20);
  v.second_to_first.sources.resize(20);
  v.second_to_first.references.resize(20);
  return v;
}

IbtConfig small_ibt(long steps) {
  IbtConfig c;
  c.steps = steps;
  c.batch_size = 8;
  c.valid_every = 2;
  c.max_len = 10;
  return c;
}

}  // namespace

TEST_CASE("further pre-training lowers the paraphrase NLL") {
  const auto& pairs = small_toy_task().paraphrases;
  const auto base = untrained_model();
  TrainingLog log;
  const auto trained = further_pretrain(*base, pairs, short_training(1), &log);
  CHECK(nll_loss(*trained, pairs.items) < nll_loss(*base, pairs.items));
  REQUIRE_FALSE(log.rows.empty());
  CHECK(log.rows.front().direction == "pretrain");
  CHECK(log.rows.back().step == static_cast<long>(log.rows.size()));
  CHECK(log.rows.back().nll.value() < log.rows.front().nll.value());
  CHECK_FALSE(log.rows.front().r_sc);

  const auto same = further_pretrain(*base, pairs, short_training(0));
  CHECK(same->parameters_equal(*base));
  CHECK_THROWS(further_pretrain(*base, Dataset<SentencePair>{}, short_training()));
}

TEST_CASE("ibt_step with an indifferent classifier gives no style reward") {
  const auto& task = small_toy_task();
  auto models = ModelPair::from_base(pretrained_model(), task.styles);
  const auto clf = indifferent_classifier();
  RewardConfig rc = RewardConfig::none();
  rc.sc0 = rc.sc1 = true;
  const IbtStepContext ctx{clf, rc, nullptr, 10};
  std::mt19937_64 rng(4);
  const auto first = first_utterances(task.train_first, 8);
  const auto second = first_utterances(task.train_second, 8);
  const auto m = ibt_step(models, first, second, ctx, rng);
  CHECK(m.a.r_sc == 0.0);
  CHECK(m.b.r_sc == 0.0);
  CHECK(m.a.r_bleu == 0.0);
  CHECK(std::isfinite(m.a.nll));
  CHECK(m.a.nll > 0.0);
  CHECK_FALSE(models.a->parameters_equal(pretrained_model()));

  RewardConfig learned = RewardConfig::none();
  learned.learned = true;
  const IbtStepContext missing{clf, learned, nullptr, 10};
  CHECK_THROWS_AS(ibt_step(models, first, second, missing, rng), ConfigError);
  CHECK_THROWS(ibt_step(models, {}, second, ctx, rng));
}

TEST_CASE("ibt_train with no steps returns the starting models") {
  const auto& task = small_toy_task();
  const auto start = ModelPair::from_base(pretrained_model(), task.styles);
  const auto result = ibt_train(start, task.train_first, task.train_second, small_validation(), toy_classifier(),
                                small_ibt(0));
  CHECK(result.steps_run == 0);
  CHECK(result.models.a->parameters_equal(*start.a));
  CHECK(result.models.b->parameters_equal(*start.b));
  REQUIRE(result.log.rows.size() == 2);
  CHECK(result.log.rows[0].direction == "informal-formal");
  CHECK(result.log.rows[1].direction == "formal-informal");
  CHECK(result.log.rows[0].valid_hm.value() == result.best_a.hm);
}

TEST_CASE("ibt_train is deterministic and keeps the classifier frozen") {
  const auto& task = small_toy_task();
  const auto start = ModelPair::from_base(pretrained_model(), task.styles);
  const auto clf = toy_classifier().clone();
  const auto before = clf.clone();
  DeskOracle desk;
  auto cfg = small_ibt(4);
  const auto r1 = ibt_train(start, task.train_first, task.train_second, small_validation(), clf, cfg, &desk);
  const auto r2 = ibt_train(start, task.train_first, task.train_second, small_validation(), clf, cfg, &desk);
  CHECK(clf.parameters_equal(before));
  CHECK(r1.models.a->parameters_equal(*r2.models.a));
  CHECK(r1.models.b->parameters_equal(*r2.models.b));
  std::ostringstream l1, l2;
  write_logs_tsv(l1, r1.log);
  write_logs_tsv(l2, r2.log);
  CHECK(l1.str() == l2.str());
  CHECK(r1.steps_run == 4);
  // Two rows per step plus the step-0 validation.
  CHECK(r1.log.rows.size() == 10);
  CHECK(r1.best_a.hm >= r1.log.rows[0].valid_hm.value());

  cfg.valid_every = 5;
  CHECK_THROWS_AS(ibt_train(start, task.train_first, task.train_second, small_validation(), clf, cfg), ConfigError);
}

TEST_CASE("ibt_train patience stops early") {
  const auto& task = small_toy_task();
  const auto start = ModelPair::from_base(pretrained_model(), task.styles);
  auto cfg = small_ibt(40);
  cfg.valid_every = 1;
  cfg.patience = 1;
  cfg.rewards = RewardConfig::none();
  // A zero learning rate can never improve on step 0.
  auto frozen = start.clone();
  frozen.a->set_learning_rate(0.0);
  frozen.b->set_learning_rate(0.0);
  const auto r = ibt_train(frozen, task.train_first, task.train_second, small_validation(), toy_classifier(), cfg);
  CHECK(r.steps_run == 1);
  CHECK(r.best_step_a == 0);
  CHECK(r.best_step_b == 0);
}

TEST_CASE("pseudo-pair scores are recomputable") {
  const auto& task = small_toy_task();
  const auto& clf = toy_classifier();
  DeskOracle desk;
  PairSelectionConfig cfg;
  cfg.max_len = 10;
  cfg.sample_count = 50;
  const auto pairs = generate_pseudo_pairs(pretrained_model(), task.train_first, task.styles.second, clf, desk, cfg);
  REQUIRE_FALSE(pairs.empty());
  CHECK(pairs.size() <= 50);
  for (const auto& p : pairs) {
    CHECK(p.source_style == task.styles.first);
    CHECK(p.target_style == task.styles.second);
    CHECK(p.target == greedy_decode(pretrained_model(), p.source, cfg.max_len));
    CHECK(p.scores.at("content") == doctest::Approx(desk.score(p.source, p.target)).epsilon(1e-12));
    CHECK(p.scores.at("p_source") == doctest::Approx(clf.predict(p.source)[0]).epsilon(1e-6));
    CHECK(p.scores.at("p_target") == doctest::Approx(clf.predict(p.target)[1]).epsilon(1e-6));
  }
  const auto again = generate_pseudo_pairs(pretrained_model(), task.train_first, task.styles.second, clf, desk, cfg);
  REQUIRE(again.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(again[i].source == pairs[i].source);

  CHECK_THROWS(generate_pseudo_pairs(pretrained_model(), task.train_second, task.styles.second, clf, desk, cfg));
}

TEST_CASE("select_high_quality_pairs thresholds") {
  Dataset<SentencePair> pairs;
  pairs.items = {scored(0.20, 0.95, 0.90), scored(0.10, 0.95, 0.90), scored(0.20, 0.90, 0.85),
                 scored(0.15, 0.99, 0.99)};
  PairSelectionConfig cfg;
  cfg.sigma_c = 0.15;
  cfg.sigma_s = 0.9;
  const auto kept = select_high_quality_pairs(pairs, cfg);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].scores.at("content") == 0.20);

  Dataset<SentencePair> unscored;
  unscored.items.push_back({U("a"), U("b"), StyleId("informal"), StyleId("formal"), {{"content", 1.0}}});
  CHECK_THROWS(select_high_quality_pairs(unscored, cfg));
  cfg.sigma_s = 1.5;
  CHECK_THROWS_AS(select_high_quality_pairs(pairs, cfg), ConfigError);
}

TEST_CASE("select_high_quality_pairs matches brute force and is monotone") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset<SentencePair> pairs;
  for (int i = 0; i < 1000; ++i) pairs.items.push_back(scored(2.0 * unit(rng) - 1.0, unit(rng), unit(rng)));
  for (double sc : {-0.5, 0.0, 0.15, 0.6}) {
    for (double ss : {0.0, 0.5, 0.9}) {
      PairSelectionConfig cfg;
      cfg.sigma_c = sc;
      cfg.sigma_s = ss;
      std::size_t expected = 0;
      for (const auto& p : pairs) {
        const double mean = (p.scores.at("p_source") + p.scores.at("p_target")) / 2.0;
        expected += p.scores.at("content") > sc && mean > ss;
      }
      const auto kept = select_high_quality_pairs(pairs, cfg);
      CHECK(kept.size() == expected);

      PairSelectionConfig stricter = cfg;
      stricter.sigma_c += 0.1;
      CHECK(select_high_quality_pairs(pairs, stricter).size() <= kept.size());
      stricter = cfg;
      stricter.sigma_s = std::min(1.0, ss + 0.05);
      CHECK(select_high_quality_pairs(pairs, stricter).size() <= kept.size());
    }
  }
}

TEST_CASE("offline training without rewards equals further pre-training") {
  const auto& pairs = small_toy_task().paraphrases;
  const auto base = untrained_model();
  TrainingLog l1, l2;
  const auto a = offline_train(*base, pairs, OfflineContext{}, short_training(1), &l1);
  const auto b = further_pretrain(*base, pairs, short_training(1), &l2);
  CHECK(a->parameters_equal(*b));
  std::ostringstream s1, s2;
  write_logs_tsv(s1, l1);
  write_logs_tsv(s2, l2);
  CHECK(s1.str() == s2.str());
}

TEST_CASE("offline training with rewards") {
  const auto& task = small_toy_task();
  Dataset<SentencePair> pairs;
  for (std::size_t i = 0; i < 64; ++i) {
    const auto& x = task.train_first[i].utterance;
    pairs.items.push_back({x, toy_transfer(task, x), task.styles.first, task.styles.second, {}});
  }
  const auto clf = toy_classifier().clone();
  const auto before = clf.clone();
  OfflineContext ctx;
  ctx.rewards = RewardConfig::none();
  ctx.rewards.sc0 = ctx.rewards.bleu = true;
  CHECK_THROWS_AS(offline_train(pretrained_model(), pairs, ctx, short_training(1)), ConfigError);
  ctx.classifier = &clf;
  TrainingLog log;
  const auto model = offline_train(pretrained_model(), pairs, ctx, short_training(1), &log);
  CHECK(clf.parameters_equal(before));
  CHECK_FALSE(model->parameters_equal(pretrained_model()));
  REQUIRE(log.rows.size() == 2);
  CHECK(log.rows[0].direction == "offline");
  CHECK(log.rows[0].r_sc.has_value());
  CHECK(log.rows[0].r_bleu.has_value());
}

TEST_CASE("logs.tsv layout") {
  TrainingLog log;
  log.rows.push_back({3, "informal-formal", 1.5, {}, 0.25, {}, {}, {}, {}});
  log.rows.push_back({4, "pretrain", {}, {}, {}, {}, 1.0, 0.5, 2.0 / 3.0});
  TempDir dir;
  write_logs_tsv(dir / "sub" / "logs.tsv", log);
  const auto text = read_file(dir / "sub" / "logs.tsv");
  std::istringstream in(text);
  std::string header, r1, r2, extra;
  std::getline(in, header);
  std::getline(in, r1);
  std::getline(in, r2);
  CHECK(header == "step\tdirection\tnll\tr_sc\tr_bleu\tr_learned\tvalid_acc\tvalid_bleu\tvalid_hm");
  CHECK(r1 == "3\tinformal-formal\t1.5\t\t0.25\t\t\t\t");
  CHECK(r2.rfind("4\tpretrain\t\t\t\t\t1\t0.5\t0.666", 0) == 0);
  CHECK_FALSE(std::getline(in, extra));
}
