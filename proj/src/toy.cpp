// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/toy.hpp"

#include <random>

namespace stylebt {
namespace {

Utterance make_utterance(Tokens tokens) {
  Utterance u;
  u.tokens = std::move(tokens);
  u.raw = u.text();
  return u;
}

}  // namespace

Dataset<LabeledUtterance> ToyTask::train_labeled() const {
  Dataset<LabeledUtterance> out{Split::Train, train_first.items};
  out.items.insert(out.items.end(), train_second.items.begin(), train_second.items.end());
  return out;
}

Dataset<LabeledUtterance> ToyTask::valid_labeled() const {
  Dataset<LabeledUtterance> out{Split::Valid, valid_first.items};
  out.items.insert(out.items.end(), valid_second.items.begin(), valid_second.items.end());
  return out;
}

ToyTask make_toy_task(const ToyTaskConfig& config) {
  if (config.min_content == 0 || config.min_content > config.max_content) throw ConfigError("bad toy content range");
  ToyTask task;
  task.markers = {{"plz", "please"}, {"thx", "thanks"}, {"u", "you"}};
  task.content_words = {"help", "me", "find", "the", "book", "with", "this", "a",    "new",  "job",
                        "for",  "my", "friend", "today", "at",  "home", "call", "later", "send", "it"};
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_marker(0, task.markers.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_word(0, task.content_words.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_len(config.min_content, config.max_content);

  auto sentence = [&](int style_index) {
    const auto& m = task.markers[pick_marker(rng)];
    Tokens t{style_index == 0 ? m.first : m.second};
    const std::size_t n = pick_len(rng);
    for (std::size_t i = 0; i < n; ++i) t.push_back(task.content_words[pick_word(rng)]);
    return make_utterance(std::move(t));
  };
  auto fill = [&](Dataset<LabeledUtterance>& d, Split split, int style_index, std::size_t n) {
    d.split = split;
    const StyleId& s = style_index == 0 ? task.styles.first : task.styles.second;
    for (std::size_t i = 0; i < n; ++i) d.items.push_back({sentence(style_index), s});
  };
  fill(task.train_first, Split::Train, 0, config.train_per_style);
  fill(task.train_second, Split::Train, 1, config.train_per_style);
  fill(task.valid_first, Split::Valid, 0, config.valid_per_style);
  fill(task.valid_second, Split::Valid, 1, config.valid_per_style);

  auto refs = [&](const Dataset<LabeledUtterance>& src, Split split) {
    Dataset<ReferenceSet> out{split, {}};
    for (const auto& item : src) out.items.push_back({item.utterance, {toy_transfer(task, item.utterance)}});
    return out;
  };
  task.valid_first_to_second = refs(task.valid_first, Split::Valid);
  task.valid_second_to_first = refs(task.valid_second, Split::Valid);
  Dataset<LabeledUtterance> test_first, test_second;
  fill(test_first, Split::Test, 0, config.test_per_style);
  fill(test_second, Split::Test, 1, config.test_per_style);
  task.test_first_to_second = refs(test_first, Split::Test);
  task.test_second_to_first = refs(test_second, Split::Test);

  std::vector<std::string> all_markers;
  for (const auto& [a, b] : task.markers) {
    all_markers.push_back(a);
    all_markers.push_back(b);
  }
  std::uniform_int_distribution<std::size_t> pick_any(0, all_markers.size() - 1);
  std::bernoulli_distribution noisy(config.paraphrase_marker_noise);
  std::bernoulli_distribution coin(0.5);
  task.paraphrases.split = Split::Train;
  for (std::size_t i = 0; i < config.paraphrase_pairs; ++i) {
    const int style_index = coin(rng) ? 1 : 0;
    SentencePair p;
    p.source = sentence(style_index);
    Tokens target = p.source.tokens;
    if (noisy(rng)) target.front() = all_markers[pick_any(rng)];
    p.target = make_utterance(std::move(target));
    p.source_style = style_index == 0 ? task.styles.first : task.styles.second;
    p.target_style = task.styles.opposite(p.source_style);
    task.paraphrases.items.push_back(std::move(p));
  }
  return task;
}

Utterance toy_transfer(const ToyTask& task, const Utterance& sentence) {
  if (sentence.empty()) throw EmptyUtteranceError("empty toy sentence");
  Tokens t = sentence.tokens;
  for (const auto& [a, b] : task.markers) {
    if (t.front() == a) {
      t.front() = b;
      return make_utterance(std::move(t));
    }
    if (t.front() == b) {
      t.front() = a;
      return make_utterance(std::move(t));
    }
  }
  throw Error("not a toy sentence: " + sentence.text());
}

std::filesystem::path direction_dir(const std::filesystem::path& dir, const StyleId& from, const StyleId& to) {
  return dir / (from.name + "-" + to.name);
}

void write_toy_task(const std::filesystem::path& dir, const ToyTask& task) {
  std::filesystem::create_directories(dir);
  const auto& s = task.styles;
  write_unpaired(unpaired_path(dir, Split::Train, s.first), task.train_first);
  write_unpaired(unpaired_path(dir, Split::Train, s.second), task.train_second);
  write_unpaired(unpaired_path(dir, Split::Valid, s.first), task.valid_first);
  write_unpaired(unpaired_path(dir, Split::Valid, s.second), task.valid_second);
  auto write_refs = [&](const StyleId& from, const StyleId& to, const Dataset<ReferenceSet>& d) {
    const auto sub = direction_dir(dir, from, to);
    std::filesystem::create_directories(sub);
    const std::string split = split_name(d.split);
    write_references(sub / (split + ".src"), {sub / (split + ".ref0")}, d);
  };
  write_refs(s.first, s.second, task.valid_first_to_second);
  write_refs(s.second, s.first, task.valid_second_to_first);
  write_refs(s.first, s.second, task.test_first_to_second);
  write_refs(s.second, s.first, task.test_second_to_first);
  write_pairs(dir / "paraphrases.tsv", task.paraphrases);
}

}  // namespace stylebt
