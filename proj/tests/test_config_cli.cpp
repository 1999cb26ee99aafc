// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "stylebt/cli.hpp"
#include "stylebt/config.hpp"
#include "test_support.hpp"

using namespace stylebt;
using stylebt::testing::read_file;
using stylebt::testing::TempDir;
using stylebt::testing::write_file;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stylebt");
  return cli::run(args);
}

std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream l(line);
    while (std::getline(l, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Runs the tiny end-to-end pipeline once per binary under one directory.
struct ToyRun {
  TempDir dir;
  std::string common;
  int status = 0;

  std::string at(const std::string& name) const { return (dir / name).string(); }

  int stage(const std::string& name, const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> args = {name, "--config", common, "--out", at(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }

  ToyRun() {
    common = at("common.conf");
    write_file(common,
               "# shared settings\n"
               "style.first = informal\nstyle.second = formal\n"
               "corpus.dir = " + at("task") + "\n"
               "model.dim = 16\nmodel.heads = 2\nmodel.ff_dim = 32\n"
               "model.encoder_layers = 1\nmodel.decoder_layers = 1\nmodel.max_positions = 16\n"
               "classifier = " + at("train-classifier/checkpoints/classifier.ckpt") + "\n");
    const std::vector<std::pair<std::string, std::vector<std::string>>> stages = {
        {"make-toy-task",
         {"--set", "toy.train_per_style=200", "--set", "toy.valid_per_style=20", "--set", "toy.test_per_style=20",
          "--set", "toy.paraphrase_pairs=200"}},
        {"train-classifier", {"--set", "classifier.epochs=3"}},
        {"pretrain", {"--set", "pairs=" + at("task/paraphrases.tsv"), "--set", "pretrain.epochs=1"}},
        {"ibt-train",
         {"--set", "init=" + at("pretrain/checkpoints/pretrained.ckpt"), "--set", "ibt.steps=4", "--set",
          "ibt.valid_every=2", "--set", "ibt.batch_size=8", "--set", "ibt.max_len=10"}},
        {"select-pairs",
         {"--set", "model.a=" + at("ibt-train/checkpoints/model_a.ckpt"), "--set",
          "model.b=" + at("ibt-train/checkpoints/model_b.ckpt"), "--sigma-c", "-1", "--sigma-s", "0",
          "--set", "select.sample_count=40", "--set", "select.max_len=10"}},
        {"train-offline",
         {"--set", "base=" + at("pretrain/checkpoints/base.ckpt"), "--set",
          "pairs.a=" + at("select-pairs/pairs/selected.a.tsv"), "--set",
          "pairs.b=" + at("select-pairs/pairs/selected.b.tsv"), "--set", "offline.epochs=1", "--set",
          "offline.max_len=10"}},
        {"evaluate",
         {"--set", "model.a=" + at("train-offline/checkpoints/offline_a.ckpt"), "--set",
          "model.b=" + at("train-offline/checkpoints/offline_b.ckpt"), "--set", "eval.max_len=10"}},
    };
    for (const auto& [name, extra] : stages) {
      status = stage(name, name == "make-toy-task" ? "task" : name, extra);
      if (status != 0) {
        MESSAGE("stage failed: " << name);
        break;
      }
    }
  }
};

ToyRun& toy_run() {
  static ToyRun run;
  return run;
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = Config::parse("# comment\n\na = 1\n b=two words \nflag = yes\nx = 0.5\n");
  CHECK(c.get_int("a", 0) == 1);
  CHECK(c.get_string("b", "") == "two words");
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_double("x", 0.0) == 0.5);
  CHECK(c.get_double("missing", 0.25) == 0.25);
  CHECK(c.unused_keys().empty());
  CHECK(c.echo() == "a = 1\nb = two words\nflag = yes\nmissing = 0.25\nx = 0.5\n");
  c.set("a", "3");
  CHECK(c.get_int("a", 0) == 3);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(Config::parse("no equals sign\n"), ParseError);
  CHECK_THROWS_AS(Config::parse(" = 1\n"), ParseError);
  CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ParseError);
  auto c = Config::parse("n = seven\nd = nan\nb = maybe\n");
  CHECK_THROWS_AS(c.get_int("n", 0), ConfigError);
  CHECK_THROWS_AS(c.get_double("d", 0.0), ConfigError);
  CHECK_THROWS_AS(c.get_bool("b", false), ConfigError);
  CHECK_THROWS_AS(c.require_string("absent"), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/stylebt.conf"), NotFoundError);

  auto unused = Config::parse("used = 1\nstray = 2\n");
  unused.get_int("used", 0);
  CHECK(unused.unused_keys() == std::vector<std::string>{"stray"});
}

TEST_CASE("config echo reloads to the same settings") {
  TempDir dir;
  auto c = Config::parse("lr = 1e-3\nname = run a\n");
  c.get_double("lr", 0.0);
  c.get_string("name", "");
  c.get_int("steps", 10);
  c.write_echo(dir / "echo.conf");
  auto back = Config::load(dir / "echo.conf");
  CHECK(back.get_double("lr", 0.0) == 1e-3);
  CHECK(back.get_int("steps", 0) == 10);
  back.get_string("name", "");
  CHECK(back.echo() == c.echo());
}

TEST_CASE("the toy pipeline writes every artifact") {
  auto& run = toy_run();
  REQUIRE(run.status == 0);
  for (const char* path : {"task/train.informal", "task/task.conf", "task/config.echo",
                           "train-classifier/checkpoints/classifier.ckpt", "train-classifier/logs.tsv",
                           "pretrain/checkpoints/base.ckpt", "pretrain/checkpoints/pretrained.ckpt",
                           "pretrain/logs.tsv", "ibt-train/checkpoints/model_a.ckpt",
                           "ibt-train/checkpoints/model_b.ckpt", "ibt-train/logs.tsv",
                           "select-pairs/pairs/generated.a.tsv", "select-pairs/pairs/selected.b.tsv",
                           "train-offline/checkpoints/offline_a.ckpt", "train-offline/logs.tsv",
                           "evaluate/report.tsv", "evaluate/outputs.a.txt", "evaluate/config.echo"}) {
    CAPTURE(path);
    CHECK(std::filesystem::exists(run.dir / path));
  }
  const auto report = read_tsv(run.dir / "evaluate/report.tsv");
  REQUIRE(report.size() == 4);
  CHECK(report[0] == std::vector<std::string>{"direction", "count", "desk", "BLEU", "ACC", "HM"});
  CHECK(report[3][0] == "overall");
  CHECK(report[3][1] == "40");
}

TEST_CASE("evaluating the references scores perfectly") {
  auto& run = toy_run();
  REQUIRE(run.status == 0);
  const auto corpus = run.dir / "task";
  const int status =
      run.stage("evaluate", "eval-refs",
                {"--set", "outputs.a=" + (corpus / "informal-formal/test.ref0").string(), "--set",
                 "outputs.b=" + (corpus / "formal-informal/test.ref0").string()});
  REQUIRE(status == 0);
  const auto report = read_tsv(run.dir / "eval-refs/report.tsv");
  REQUIRE(report.size() == 4);
  for (std::size_t r = 1; r < 4; ++r) {
    CHECK(report[r][2] == "1");
    CHECK(report[r][3] == "1");
    CHECK(std::stod(report[r][4]) >= 0.95);
  }
}

TEST_CASE("correlating duplicate columns gives one") {
  TempDir dir;
  write_file(dir / "scores.tsv", "system\tbleu\tacc\tbleu_copy\ns1\t0.1\t0.5\t0.1\ns2\t0.3\t0.2\t0.3\ns3\t0.2\t0.9\t0.2\n");
  REQUIRE(run_cli({"correlate", "--set", "scores=" + (dir / "scores.tsv").string(), "--out", (dir / "out").string()}) ==
          0);
  const auto m = read_tsv(dir / "out/correlation.tsv");
  REQUIRE(m.size() == 4);
  CHECK(m[0] == std::vector<std::string>{"metric", "bleu", "acc", "bleu_copy"});
  CHECK(m[1][1] == "1");
  CHECK(m[1][3] == "1");
  CHECK(m[3][1] == "1");
  CHECK(std::stod(m[1][2]) == doctest::Approx(-0.4271210980886244).epsilon(1e-12));
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"no-such-stage"}) == 2);
  CHECK(run_cli({"evaluate", "--bogus-flag"}) == 2);
  CHECK(run_cli({"correlate", "--set", "scores=" + (dir / "missing.tsv").string(), "--out", (dir / "o").string()}) == 1);
  CHECK(run_cli({"correlate", "--set", "no-equals", "--out", (dir / "o").string()}) == 1);
  CHECK(run_cli({"correlate", "--set", "scores=x"}) == 1);  // no --out
  CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("rerunning a stage from its echoed config reproduces logs.tsv") {
  auto& run = toy_run();
  REQUIRE(run.status == 0);
  const auto echo = run.dir / "ibt-train/config.echo";
  REQUIRE(std::filesystem::exists(echo));
  REQUIRE(run_cli({"ibt-train", "--config", echo.string(), "--out", run.at("ibt-again")}) == 0);
  CHECK(read_file(run.dir / "ibt-again/logs.tsv") == read_file(run.dir / "ibt-train/logs.tsv"));
  CHECK(read_file(run.dir / "ibt-again/checkpoints/model_a.ckpt") ==
        read_file(run.dir / "ibt-train/checkpoints/model_a.ckpt"));

  auto cfg = Config::load(run.dir / "ibt-again/config.echo");
  auto orig = Config::load(echo);
  CHECK(cfg.get_string("ibt.steps", "") == orig.get_string("ibt.steps", ""));
  CHECK(cfg.get_string("out", "") != orig.get_string("out", ""));
}
