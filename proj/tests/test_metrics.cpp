// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "stylebt/metrics.hpp"
#include "test_support.hpp"

using namespace stylebt;
using stylebt::testing::data_path;
using stylebt::testing::small_toy_task;
using stylebt::testing::TempDir;
using stylebt::testing::toy_classifier;
using stylebt::testing::U;
using stylebt::testing::write_file;

namespace {

// Sacrebleu 2.x, tokenize="none", smooth_method="none", on tests/data/bleu_golden
// (see tests/oracles/bleu_oracle.py).
constexpr double kGoldenBleu = 0.620140678318;

// Second BLEU implementation: n-grams as joined strings, per-sentence
// clipping against the max count over references, closest reference length
// with ties to the shorter one.
double reference_bleu(const std::vector<Tokens>& cands, const std::vector<std::vector<Tokens>>& refs) {
  auto grams = [](const Tokens& t, std::size_t n) {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
      std::string key;
      for (std::size_t k = 0; k < n; ++k) key += t[i + k] + '\x1f';
      ++out[key];
    }
    return out;
  };
  double match[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  double c = 0, r = 0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    c += static_cast<double>(cands[s].size());
    std::size_t best = refs[s][0].size();
    for (const auto& ref : refs[s]) {
      const auto d = std::abs(static_cast<long>(ref.size()) - static_cast<long>(cands[s].size()));
      const auto bd = std::abs(static_cast<long>(best) - static_cast<long>(cands[s].size()));
      if (d < bd || (d == bd && ref.size() < best)) best = ref.size();
    }
    r += static_cast<double>(best);
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cg = grams(cands[s], n);
      std::map<std::string, int> maxref;
      for (const auto& ref : refs[s]) {
        for (const auto& [g, k] : grams(ref, n)) maxref[g] = std::max(maxref[g], k);
      }
      for (const auto& [g, k] : cg) {
        match[n - 1] += std::min(k, maxref[g]);
        total[n - 1] += k;
      }
    }
  }
  double logp = 0;
  for (int n = 0; n < 4; ++n) {
    if (match[n] == 0) return 0.0;
    logp += std::log(match[n] / total[n]) / 4.0;
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(logp);
}

std::vector<ReferenceSet> to_sets(const std::vector<std::vector<Tokens>>& refs) {
  std::vector<ReferenceSet> out;
  for (const auto& rs : refs) {
    ReferenceSet set;
    set.source = Utterance{rs[0], {}};
    for (const auto& r : rs) set.references.push_back(Utterance{r, {}});
    out.push_back(set);
  }
  return out;
}

std::vector<Utterance> to_utts(const std::vector<Tokens>& ts) {
  std::vector<Utterance> out;
  for (const auto& t : ts) out.push_back(Utterance{t, {}});
  return out;
}

Tokens random_sentence(std::mt19937_64& rng, std::size_t vocab, std::size_t min_len, std::size_t max_len) {
  Tokens t;
  const std::size_t n = min_len + rng() % (max_len - min_len + 1);
  for (std::size_t i = 0; i < n; ++i) t.push_back("w" + std::to_string(rng() % vocab));
  return t;
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("bleu is 1 on identical text") {
  std::vector<Utterance> c = {U("the cat sat on the mat"), U("a dog barked at the moon")};
  std::vector<ReferenceSet> r = {{c[0], {c[0]}}, {c[1], {c[1]}}};
  CHECK(bleu(c, r) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bleu hand case with no bigram match") {
  const auto s = bleu_stats(U("the the the").tokens, std::vector<Utterance>{U("the cat")});
  CHECK(s.matches[0] == 1);
  CHECK(s.totals[0] == 3);
  CHECK(s.matches[1] == 0);
  std::vector<Utterance> c = {U("the the the")};
  std::vector<ReferenceSet> r = {{U("x"), {U("the cat")}}};
  CHECK(bleu(c, r) == 0.0);
}

TEST_CASE("bleu brevity penalty uses the closest reference") {
  // Candidate of 4 tokens, references of 6 and 9 tokens: r = 6.
  std::vector<Utterance> c = {U("a b c d")};
  std::vector<ReferenceSet> r = {{U("x"), {U("a b c d e f"), U("a b c d e f g h i")}}};
  CHECK(bleu(c, r) == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)).epsilon(1e-12));
  // Equidistant references: the shorter one wins.
  const auto s = bleu_stats(U("a b c d").tokens, std::vector<Utterance>{U("a b c d e f"), U("a b")});
  CHECK(s.reference_length == 2);
}

TEST_CASE("bleu errors") {
  std::vector<Utterance> c = {U("a")};
  std::vector<ReferenceSet> none;
  CHECK_THROWS(bleu(c, none));
  CHECK_THROWS(bleu(std::vector<Utterance>{}, none));
}

TEST_CASE("bleu on the golden corpus matches the frozen oracle value") {
  const auto dir = data_path("bleu_golden");
  const auto cands = lines(dir / "candidates.txt");
  std::vector<std::vector<std::string>> refs;
  for (int k = 0; k < 4; ++k) refs.push_back(lines(dir / ("ref" + std::to_string(k) + ".txt")));
  REQUIRE(cands.size() == 50);
  std::vector<Utterance> cs;
  std::vector<ReferenceSet> rs;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    cs.push_back(U(cands[i]));
    ReferenceSet set{cs.back(), {}};
    for (int k = 0; k < 4; ++k) set.references.push_back(U(refs[static_cast<std::size_t>(k)][i]));
    rs.push_back(set);
  }
  CHECK(std::abs(bleu(cs, rs) - kGoldenBleu) < 1e-6);
}

TEST_CASE("bleu agrees with the second implementation on random corpora") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tokens> cands;
    std::vector<std::vector<Tokens>> refs;
    const std::size_t n = 1 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      cands.push_back(random_sentence(rng, 6, 1, 12));
      std::vector<Tokens> rs;
      const std::size_t k = 1 + rng() % 4;
      for (std::size_t j = 0; j < k; ++j) rs.push_back(random_sentence(rng, 6, 1, 12));
      refs.push_back(rs);
    }
    const auto sets = to_sets(refs);
    CHECK(bleu(to_utts(cands), sets) == doctest::Approx(reference_bleu(cands, refs)).epsilon(1e-12));
  }
}

TEST_CASE("a duplicate reference never lowers bleu") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tokens> cands;
    std::vector<std::vector<Tokens>> refs;
    for (int i = 0; i < 8; ++i) {
      cands.push_back(random_sentence(rng, 5, 2, 10));
      refs.push_back({random_sentence(rng, 5, 2, 10), random_sentence(rng, 5, 2, 10)});
    }
    const double before = bleu(to_utts(cands), to_sets(refs));
    auto more = refs;
    for (auto& rs : more) rs.push_back(rs[rng() % rs.size()]);
    const double after = bleu(to_utts(cands), to_sets(more));
    CHECK(after >= before);
    CHECK(after >= 0.0);
    CHECK(after <= 1.0);
  }
}

TEST_CASE("sentence bleu") {
  CHECK(sentence_bleu(U("a b c d"), U("a b c d")) == doctest::Approx(1.0));
  CHECK(sentence_bleu(U("a b"), U("c d")) == 0.0);
  CHECK(sentence_bleu(Utterance{}, U("c d")) == 0.0);
}

TEST_CASE("harmonic mean") {
  CHECK(std::abs(harmonic_mean(0.932, 0.553) - 0.694) <= 0.001);
  CHECK(std::abs(harmonic_mean(0.887, 0.316) - 0.466) <= 0.001);
  CHECK(harmonic_mean(0.0, 0.7) == 0.0);
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(harmonic_mean(a, b) == harmonic_mean(b, a));
    CHECK(harmonic_mean(a, b) <= std::max(a, b));
    CHECK(harmonic_mean(a, b) >= std::min(a, b) - 1e-15);
  }
}

TEST_CASE("style accuracy") {
  const auto& clf = toy_classifier();
  const StyleId formal("formal");
  const std::vector<Utterance> formal_out = {U("please help me"), U("thanks for the book"), U("you call me")};
  CHECK(style_accuracy(clf, formal_out, formal) == 1.0);
  const std::vector<Utterance> mixed = {U("please help me"), U("plz help me"), U("thanks a lot"), U("thx a lot")};
  CHECK(style_accuracy(clf, mixed, formal) == 0.5);
  const std::vector<Utterance> with_empty = {U("please help me"), Utterance{}};
  CHECK(style_accuracy(clf, with_empty, formal) == 0.5);
  CHECK_THROWS(style_accuracy(clf, std::vector<Utterance>{}, formal));
}

TEST_CASE("pearson") {
  const std::vector<double> x = {1, 2, 3}, y = {1, 2, 4};
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> down = {9, 6, 3};
  CHECK(pearson(x, down) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(pearson(x, y) - 0.98198) < 1e-5);
  const std::vector<double> flat = {2, 2, 2}, one = {1};
  CHECK_THROWS(pearson(x, flat));
  CHECK_THROWS(pearson(one, one));
  CHECK_THROWS(pearson(x, one));
}

TEST_CASE("pearson is invariant under positive affine maps") {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(20), b(20);
    for (int i = 0; i < 20; ++i) {
      a[i] = n(rng);
      b[i] = 0.5 * a[i] + n(rng);
    }
    const double r = pearson(a, b);
    const double s = scale(rng), t = n(rng) * 5;
    std::vector<double> a2 = a;
    for (auto& v : a2) v = s * v + t;
    CHECK(std::abs(pearson(a2, b) - r) < 1e-9);
  }
}

TEST_CASE("desk oracle") {
  CHECK(desk_oracle_score(U("a b c"), U("a b c")) == 1.0);
  CHECK(desk_oracle_score(U("a b"), U("c d")) == -1.0);
  CHECK(desk_oracle_score(U("a b"), U("a c")) == doctest::Approx(0.0));
  CHECK(desk_oracle_score(Utterance{}, Utterance{}) == 1.0);
  std::mt19937_64 rng(25);
  for (int i = 0; i < 200; ++i) {
    const Utterance a{random_sentence(rng, 5, 1, 8), {}}, b{random_sentence(rng, 5, 1, 8), {}};
    const double s = desk_oracle_score(a, b);
    CHECK(s == desk_oracle_score(b, a));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
  const DeskOracle d;
  CHECK(d.identity() == "desk");
  CHECK(make_oracle("desk")->identity() == "desk");
  CHECK_THROWS(make_oracle("bleurt"));
}

TEST_CASE("external oracle runs a scoring command") {
  TempDir dir;
  write_file(dir / "score.sh", "#!/bin/sh\nawk -F'\\t' '{ print ($1 == $2) ? 1 : 0.25 }' \"$1\"\n");
  write_file(dir / "short.sh", "#!/bin/sh\necho 1\n");
  write_file(dir / "nan.sh", "#!/bin/sh\nawk '{ print \"nan\" }' \"$1\"\n");
  const auto ok = make_oracle("external:sh " + (dir / "score.sh").string());
  const std::vector<Utterance> cands = {U("a b"), U("c")}, anchors = {U("a b"), U("d")};
  CHECK(ok->score_batch(cands, anchors) == std::vector<double>{1.0, 0.25});
  CHECK(ok->score(U("x"), U("x")) == 1.0);
  CHECK(ok->identity().rfind("external:", 0) == 0);
  CHECK_THROWS(make_oracle("external:sh " + (dir / "short.sh").string())->score_batch(cands, anchors));
  CHECK_THROWS(make_oracle("external:sh " + (dir / "nan.sh").string())->score_batch(cands, anchors));
}

TEST_CASE("evaluate_system on references and on input copies") {
  const auto& task = small_toy_task();
  const auto& clf = toy_classifier();
  const DeskOracle desk;
  const std::vector<const LearnedMetricOracle*> oracles = {&desk};

  auto outputs_for = [](const Dataset<ReferenceSet>& refs, bool copy) {
    std::vector<Utterance> out;
    for (const auto& r : refs) out.push_back(copy ? r.source : r.references[0]);
    return out;
  };
  std::vector<DirectionOutputs> perfect = {
      {"informal-formal", task.styles.second, outputs_for(task.test_first_to_second, false), task.test_first_to_second},
      {"formal-informal", task.styles.first, outputs_for(task.test_second_to_first, false), task.test_second_to_first}};
  const auto report = evaluate_system(perfect, clf, oracles);
  for (const auto& row : report.directions) {
    CHECK(row.bleu == doctest::Approx(1.0));
    CHECK(row.acc == 1.0);
    CHECK(row.hm == doctest::Approx(1.0));
    CHECK(row.learned.at(0).second == doctest::Approx(1.0));
  }
  CHECK(report.overall.count == task.test_first_to_second.size() + task.test_second_to_first.size());
  CHECK(report.overall.hm == doctest::Approx(1.0));

  std::vector<DirectionOutputs> copies = {
      {"informal-formal", task.styles.second, outputs_for(task.test_first_to_second, true), task.test_first_to_second}};
  const auto copy_row = evaluate_system(copies, clf, oracles).directions[0];
  CHECK(copy_row.acc <= 0.05);
  CHECK(copy_row.bleu > 0.0);
  CHECK(copy_row.hm <= 0.1);
}

TEST_CASE("report HM equals the harmonic mean of its ACC and BLEU columns") {
  const auto& task = small_toy_task();
  const auto& clf = toy_classifier();
  // Half copies, half references: intermediate ACC and BLEU.
  std::vector<Utterance> outs;
  for (std::size_t i = 0; i < task.test_first_to_second.size(); ++i) {
    const auto& r = task.test_first_to_second[i];
    outs.push_back(i % 2 ? r.source : r.references[0]);
  }
  std::vector<DirectionOutputs> d = {{"informal-formal", task.styles.second, outs, task.test_first_to_second}};
  const auto report = evaluate_system(d, clf, {});
  std::ostringstream tsv;
  write_report_tsv(tsv, report);
  std::istringstream in(tsv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "direction\tcount\tBLEU\tACC\tHM");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string name, count, b, a, h;
    std::getline(cells, name, '\t');
    std::getline(cells, count, '\t');
    std::getline(cells, b, '\t');
    std::getline(cells, a, '\t');
    std::getline(cells, h, '\t');
    CHECK(std::stod(h) == doctest::Approx(harmonic_mean(std::stod(a), std::stod(b))).epsilon(1e-12));
    CHECK(std::stod(a) > 0.2);
    CHECK(std::stod(a) < 0.8);
    ++rows;
  }
  CHECK(rows == 2);
  std::ostringstream table;
  write_report_table(table, report);
  CHECK(table.str().find("overall") != std::string::npos);
}

TEST_CASE("learned metric averages over references") {
  const auto& clf = toy_classifier();
  const DeskOracle desk;
  const std::vector<const LearnedMetricOracle*> oracles = {&desk};
  Dataset<ReferenceSet> refs;
  refs.items.push_back({U("plz help"), {U("please help"), U("x y")}});
  std::vector<DirectionOutputs> d = {{"d", StyleId("formal"), {U("please help")}, refs}};
  const auto row = evaluate_direction(d[0], clf, oracles);
  CHECK(row.learned.at(0).second == doctest::Approx((1.0 + -1.0) / 2.0));
}

TEST_CASE("score tables and correlation matrices") {
  TempDir dir;
  write_file(dir / "s.tsv", "system\tbleu\tacc\tbleu_copy\nA\t0.1\t0.9\t0.1\nB\t0.3\t0.2\t0.3\nC\t0.2\t0.5\t0.2\n");
  const auto t = load_score_table(dir / "s.tsv");
  CHECK(t.systems == std::vector<std::string>{"A", "B", "C"});
  CHECK(t.metrics.size() == 3);
  const auto m = correlation_matrix(t);
  CHECK(m[0][2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m[1][1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m[0][1] == doctest::Approx(m[1][0]));
  write_file(dir / "bad.tsv", "system\tbleu\nA\tx\n");
  CHECK_THROWS(load_score_table(dir / "bad.tsv"));
}
