// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "stylebt/classifier.hpp"
#include "stylebt/seq2seq.hpp"
#include "test_support.hpp"

using namespace stylebt;
using stylebt::testing::TempDir;
using stylebt::testing::toy_classifier;
using stylebt::testing::U;
using stylebt::testing::write_file;

namespace {

const std::vector<std::string> kWords = {"help", "me", "find", "the", "book", "call", "later", "plz", "please"};

ModelSpec small_spec(double lr = 3e-3) {
  ModelSpec spec;
  spec.model_dim = 16;
  spec.heads = 2;
  spec.ff_dim = 32;
  spec.encoder_layers = 1;
  spec.decoder_layers = 1;
  spec.max_positions = 12;
  spec.options.adam.learning_rate = lr;
  return spec;
}

std::unique_ptr<Seq2SeqModel> small_model(std::uint64_t seed = 1, double lr = 3e-3) {
  return create_model(small_spec(lr), Vocabulary::from_tokens(kWords), seed);
}

SentencePair pair(const std::string& x, const std::string& y) {
  return {U(x), U(y), StyleId("informal"), StyleId("formal"), {}};
}

void zero_parameters(Seq2SeqModel& model) {
  auto& params = dynamic_cast<ReferenceTinyModel&>(model).network().parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_value().setZero();
}

std::vector<SentencePair> random_pairs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto sentence = [&] {
    std::string s;
    const std::size_t len = 1 + rng() % 8;
    for (std::size_t i = 0; i < len; ++i) s += (i ? " " : "") + kWords[rng() % kWords.size()];
    return s;
  };
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pair(sentence(), sentence()));
  return out;
}

}  // namespace

TEST_CASE("a zeroed model predicts uniformly") {
  auto model = small_model();
  zero_parameters(*model);
  const double v = static_cast<double>(model->vocab().size());
  // Two content tokens plus EOS.
  CHECK(nll_loss(*model, pair("plz help", "please help")) == doctest::Approx(3.0 * std::log(v)).epsilon(1e-5));
  const std::vector<SentencePair> two = {pair("a", "me"), pair("b", "find the book")};
  CHECK(nll_loss(*model, two) == doctest::Approx(3.0 * std::log(v)).epsilon(1e-5));

  const std::vector<std::vector<int>> src = {model->encode_source(U("help me"))};
  auto session = model->start_decoding(src);
  const std::vector<int> bos = {Vocabulary::kBos};
  const auto probs = session->step(bos);
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(probs(0, 4) == doctest::Approx(1.0 / v).epsilon(1e-5));
}

TEST_CASE("next-token distributions sum to one") {
  auto model = small_model(2);
  const auto pairs = random_pairs(5, 3);
  std::vector<std::vector<int>> src;
  for (const auto& p : pairs) src.push_back(model->encode_source(p.source));
  auto session = model->start_decoding(src);
  std::vector<int> tokens(src.size(), Vocabulary::kBos);
  for (int t = 0; t < 4; ++t) {
    const auto probs = session->step(tokens);
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      CHECK(probs.row(r).sum() == doctest::Approx(1.0).epsilon(1e-5));
      CHECK(probs.row(r).minCoeff() >= 0.0f);
    }
    std::fill(tokens.begin(), tokens.end(), 5 + t);
  }
}

TEST_CASE("overfitting one pair reproduces it under greedy decoding") {
  auto model = small_model(4);
  const std::vector<SentencePair> one = {pair("plz help me", "please help me")};
  const double start = nll_loss(*model, one);
  for (int step = 0; step < 200; ++step) train_step(*model, one);
  CHECK(nll_loss(*model, one) < 0.1);
  CHECK(nll_loss(*model, one) < start);
  const auto out = greedy_decode(*model, one[0].source, 8);
  CHECK(out.tokens == one[0].target.tokens);
  CHECK(greedy_decode(*model, one[0].source, 8).tokens == out.tokens);

  // A peaked model samples its greedy output.
  const auto s = sample_decode(*model, one[0].source, 8, 17);
  CHECK(s.sampled.tokens == out.tokens);
  CHECK(s.greedy.tokens == out.tokens);
  REQUIRE(s.eos_logprob);
  CHECK(s.sampled_ids.size() == s.sampled_logprobs.size());
}

TEST_CASE("decoding respects max_len") {
  auto model = small_model(5);
  const auto xs = random_pairs(20, 6);
  for (const auto& p : xs) {
    CHECK(greedy_decode(*model, p.source, 1).size() <= 1);
    CHECK(sample_decode(*model, p.source, 1, 3).sampled.size() <= 1);
  }
  std::vector<Utterance> sources;
  for (const auto& p : xs) sources.push_back(p.source);
  for (const auto& u : greedy_decode_batch(*model, sources, 3)) CHECK(u.size() <= 3);
}

TEST_CASE("sampling is seeded and reports valid log-probabilities") {
  auto model = small_model(6);
  for (const auto& p : random_pairs(30, 7)) {
    const auto a = sample_decode(*model, p.source, 6, 99);
    const auto b = sample_decode(*model, p.source, 6, 99);
    CHECK(a.sampled_ids == b.sampled_ids);
    CHECK(a.sampled_logprobs == b.sampled_logprobs);
    for (double lp : a.sampled_logprobs) CHECK(lp <= 0.0);
    if (a.eos_logprob) CHECK(*a.eos_logprob <= 0.0);
  }
}

TEST_CASE("batched greedy decoding matches single decoding") {
  auto model = small_model(7);
  std::vector<Utterance> sources;
  for (const auto& p : random_pairs(12, 8)) sources.push_back(p.source);
  const auto batch = greedy_decode_batch(*model, sources, 6);
  for (std::size_t i = 0; i < sources.size(); ++i) CHECK(batch[i].tokens == greedy_decode(*model, sources[i], 6).tokens);
}

TEST_CASE("a zero learning rate leaves parameters unchanged") {
  auto model = small_model(8, 0.0);
  const auto before = model->clone();
  const auto pairs = random_pairs(8, 9);
  for (int i = 0; i < 3; ++i) train_step(*model, pairs);
  CHECK(model->parameters_equal(*before));
  CHECK(model->last_grad_norm() > 0.0);
}

TEST_CASE("training steps are deterministic") {
  auto a = small_model(9);
  auto b = small_model(9);
  const auto pairs = random_pairs(8, 10);
  for (int i = 0; i < 5; ++i) CHECK(train_step(*a, pairs) == train_step(*b, pairs));
  CHECK(a->parameters_equal(*b));
  CHECK_FALSE(a->parameters_equal(*small_model(9)));
}

TEST_CASE("non-finite losses are rejected without an update") {
  auto model = small_model(10);
  auto& params = dynamic_cast<ReferenceTinyModel&>(*model).network().parameters();
  params[0].mutable_value()(4, 0) = std::numeric_limits<float>::infinity();
  const auto before = model->clone();
  CHECK_THROWS(train_step(*model, std::vector<SentencePair>{pair("help", "help")}));
  CHECK(model->parameters_equal(*before));
}

TEST_CASE("checkpoints round-trip") {
  TempDir dir;
  auto model = small_model(11);
  train_step(*model, random_pairs(8, 11));
  save_checkpoint(*model, dir / "m.ckpt");
  const auto back = load_checkpoint(dir / "m.ckpt");
  CHECK(back->parameters_equal(*model));
  CHECK(back->vocab() == model->vocab());
  CHECK(back->max_target_length() == model->max_target_length());
  for (const auto& p : random_pairs(50, 12)) {
    CHECK(nll_loss(*back, p) == nll_loss(*model, p));
    CHECK(greedy_decode(*back, p.source, 6).tokens == greedy_decode(*model, p.source, 6).tokens);
  }
}

TEST_CASE("checkpoint loading errors") {
  TempDir dir;
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), NotFoundError);
  toy_classifier().save(dir / "clf.ckpt");
  CHECK_THROWS_AS(load_checkpoint(dir / "clf.ckpt"), FormatError);
  write_file(dir / "junk.ckpt", "junk");
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), FormatError);
}

TEST_CASE("backbone selection") {
  CHECK(parse_backbone(backbone_name(BackboneKind::ReferenceTiny)) == BackboneKind::ReferenceTiny);
  ModelSpec spec = small_spec();
  spec.kind = BackboneKind::External;
  CHECK_THROWS_AS(create_model(spec, Vocabulary::from_tokens(kWords), 1), ConfigError);
  spec.kind = BackboneKind::ReferenceTiny;
  spec.heads = 3;
  CHECK_THROWS(create_model(spec, Vocabulary::from_tokens(kWords), 1));
}

TEST_CASE("long inputs are truncated to the model limits") {
  auto model = small_model(12);
  std::string longer = "help";
  for (int i = 0; i < 30; ++i) longer += " me";
  CHECK(model->encode_source(U(longer)).size() == static_cast<std::size_t>(model->max_source_length()));
  const auto target = model->encode_target(U(longer));
  CHECK(target.size() == static_cast<std::size_t>(model->max_target_length()));
  CHECK(target.back() == Vocabulary::kEos);
  CHECK(std::isfinite(nll_loss(*model, pair(longer, longer))));
}
