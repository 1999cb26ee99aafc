// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "stylebt/classifier.hpp"
#include "stylebt/seq2seq.hpp"
#include "test_support.hpp"

using namespace stylebt;
using stylebt::testing::small_classifier_config;
using stylebt::testing::small_toy_task;
using stylebt::testing::TempDir;
using stylebt::testing::toy_classifier;
using stylebt::testing::U;

namespace {

SentencePair scored_pair(double p_source, double p_target) {
  SentencePair p{U("a"), U("b"), StyleId("informal"), StyleId("formal"), {}};
  p.scores = {{"p_source", p_source}, {"p_target", p_target}, {"style_mean", (p_source + p_target) / 2.0}};
  return p;
}

std::vector<Utterance> mixed_sentences(std::size_t n, std::uint64_t seed) {
  const auto& task = small_toy_task();
  std::mt19937_64 rng(seed);
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tokens t;
    const std::size_t len = 1 + rng() % 6;
    for (std::size_t k = 0; k < len; ++k) {
      // Mostly content words with a sprinkling of markers from either style.
      const auto r = rng() % 10;
      if (r == 0) {
        t.push_back(task.markers[rng() % 3].first);
      } else if (r == 1) {
        t.push_back(task.markers[rng() % 3].second);
      } else {
        t.push_back(task.content_words[rng() % task.content_words.size()]);
      }
    }
    out.push_back(Utterance{t, {}});
  }
  return out;
}

}  // namespace

TEST_CASE("toy classifier separates the marker styles") {
  const auto& task = small_toy_task();
  const auto& clf = toy_classifier();
  CHECK(classifier_accuracy(clf, task.valid_labeled()) >= 0.98);
  CHECK(clf.probability(U("plz help me"), task.styles.first) > 0.9);
  CHECK(clf.predict_label(U("please help me")) == task.styles.second);
}

TEST_CASE("predictions lie on the simplex") {
  const auto& clf = toy_classifier();
  for (const auto& u : mixed_sentences(200, 5)) {
    const auto p = clf.predict(u);
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(predict_style_probs(clf, u) == p);
  }
  // Shorter than the widest filter: padded rather than rejected.
  const auto one = clf.predict(U("plz"));
  CHECK(one[0] + one[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(clf.predict(Utterance{}), EmptyUtteranceError);
}

TEST_CASE("batched and single predictions agree") {
  const auto& clf = toy_classifier();
  const auto us = mixed_sentences(300, 6);
  const auto batch = clf.predict_batch(us);
  REQUIRE(batch.size() == us.size());
  for (std::size_t i = 0; i < us.size(); ++i) {
    CHECK(batch[i][0] == doctest::Approx(clf.predict(us[i])[0]).epsilon(1e-6));
  }
}

TEST_CASE("zeroed weights give an indifferent classifier") {
  auto clf = toy_classifier().clone();
  auto& params = clf.network().parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_value().setZero();
  const auto p = clf.predict(U("plz help"));
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  // Ties go to the first style.
  CHECK(clf.predict_label(U("plz help")) == clf.styles().first);
}

TEST_CASE("paraphrase filter thresholds") {
  Dataset<SentencePair> scored;
  scored.items = {scored_pair(0.95, 0.80), scored_pair(0.90, 0.70), scored_pair(0.85, 0.85)};
  const auto kept = filter_scored_paraphrase_pairs(scored, 0.85);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].scores.at("style_mean") == doctest::Approx(0.875));
  CHECK_THROWS(filter_scored_paraphrase_pairs(scored, 1.5));
  Dataset<SentencePair> unscored;
  unscored.items.push_back({U("a"), U("b"), StyleId("informal"), StyleId("formal"), {}});
  CHECK_THROWS(filter_scored_paraphrase_pairs(unscored, 0.5));
}

TEST_CASE("paraphrase filter matches a brute-force recomputation") {
  const auto& clf = toy_classifier();
  const auto& s = clf.styles();
  const auto xs = mixed_sentences(1000, 7);
  const auto ys = mixed_sentences(1000, 8);
  Dataset<SentencePair> pairs;
  for (std::size_t i = 0; i < xs.size(); ++i) pairs.items.push_back({xs[i], ys[i], s.first, s.second, {}});

  for (double sigma : {0.5, 0.85}) {
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double mean = (clf.predict(xs[i])[0] + clf.predict(ys[i])[1]) / 2.0;
      if (mean > sigma) expected.push_back(i);
    }
    const auto kept = filter_paraphrase_pairs(clf, pairs, sigma);
    REQUIRE(kept.size() == expected.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
      CHECK(kept[k].source == xs[expected[k]]);
      CHECK(kept[k].target == ys[expected[k]]);
    }
  }
}

TEST_CASE("raising sigma never adds pairs") {
  const auto& clf = toy_classifier();
  const auto xs = mixed_sentences(300, 9);
  Dataset<SentencePair> pairs;
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    pairs.items.push_back({xs[i], xs[i + 1], clf.styles().first, clf.styles().second, {}});
  }
  const auto scored = score_style_pairs(clf, pairs);
  std::size_t previous = scored.size() + 1;
  for (double sigma = 0.0; sigma <= 1.0; sigma += 0.05) {
    const auto kept = filter_scored_paraphrase_pairs(scored, sigma);
    CHECK(kept.size() <= previous);
    previous = kept.size();
  }
}

TEST_CASE("score_style_pairs follows each pair's own styles") {
  const auto& clf = toy_classifier();
  const auto& s = clf.styles();
  Dataset<SentencePair> pairs;
  pairs.items.push_back({U("please help"), U("plz help"), s.second, s.first, {}});
  const auto scored = score_style_pairs(clf, pairs);
  CHECK(scored[0].scores.at("p_source") == doctest::Approx(clf.predict(U("please help"))[1]));
  CHECK(scored[0].scores.at("p_target") == doctest::Approx(clf.predict(U("plz help"))[0]));
}

TEST_CASE("classifier_accuracy") {
  const auto& clf = toy_classifier();
  const auto& task = small_toy_task();
  Dataset<LabeledUtterance> right, flipped;
  for (const auto& item : task.valid_labeled()) {
    if (clf.predict_label(item.utterance) != item.style) continue;
    right.items.push_back(item);
    flipped.items.push_back({item.utterance, task.styles.opposite(item.style)});
  }
  CHECK(classifier_accuracy(clf, right) == 1.0);
  CHECK(classifier_accuracy(clf, flipped) == 0.0);
  CHECK_THROWS(classifier_accuracy(clf, Dataset<LabeledUtterance>{}));
}

TEST_CASE("training is seeded and rejects single-style data") {
  const auto& task = small_toy_task();
  auto cfg = small_classifier_config();
  cfg.epochs = 2;
  const auto a = train_classifier(task.train_labeled(), task.valid_labeled(), task.styles, cfg);
  const auto b = train_classifier(task.train_labeled(), task.valid_labeled(), task.styles, cfg);
  CHECK(a.valid_accuracy == b.valid_accuracy);
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.classifier.parameters_equal(b.classifier));

  CHECK_THROWS(train_classifier(task.train_first, task.valid_labeled(), task.styles, cfg));

  const auto no_valid = train_classifier(task.train_labeled(), Dataset<LabeledUtterance>{}, task.styles, cfg);
  CHECK(no_valid.valid_accuracy.empty());
  CHECK(no_valid.best_epoch == cfg.epochs);
}

TEST_CASE("classifier checkpoints round-trip") {
  TempDir dir;
  const auto& clf = toy_classifier();
  clf.save(dir / "clf.ckpt");
  const auto back = StyleClassifier::load(dir / "clf.ckpt");
  CHECK(back.parameters_equal(clf));
  CHECK(back.styles().first == clf.styles().first);
  CHECK(back.vocab() == clf.vocab());
  CHECK(back.predict(U("thx for the book")) == clf.predict(U("thx for the book")));
  CHECK_THROWS_AS(StyleClassifier::load(dir / "missing.ckpt"), NotFoundError);

  const std::vector<std::string> toks = {"a"};
  const auto model = create_model(ModelSpec{BackboneKind::ReferenceTiny, 8, 2, 8, 1, 1, 8, {}},
                                  Vocabulary::from_tokens(toks), 1);
  save_checkpoint(*model, dir / "model.ckpt");
  CHECK_THROWS_AS(StyleClassifier::load(dir / "model.ckpt"), FormatError);
}
