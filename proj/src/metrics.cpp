// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/metrics.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace stylebt {
namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

Tokens lowered(const Tokens& tokens) {
  Tokens out = tokens;
  for (auto& t : out) {
    for (auto& c : t) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
  }
  return out;
}

Utterance maybe_lower(const Utterance& u, bool lower) {
  if (!lower) return u;
  return Utterance{lowered(u.tokens), u.raw};
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < 4; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
  return *this;
}

double BleuStats::score() const {
  if (candidate_length == 0) return 0.0;
  double log_precision = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (matches[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double c = static_cast<double>(candidate_length);
  const double r = static_cast<double>(reference_length);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_precision / 4.0);
}

BleuStats bleu_stats(const Tokens& candidate, std::span<const Utterance> references) {
  if (references.empty()) throw Error("BLEU needs at least one reference per sentence");
  BleuStats s;
  s.candidate_length = candidate.size();
  std::size_t best_diff = 0, best_len = 0;
  bool first = true;
  for (const auto& ref : references) {
    const std::size_t len = ref.size();
    const std::size_t diff = len > candidate.size() ? len - candidate.size() : candidate.size() - len;
    if (first || diff < best_diff || (diff == best_diff && len < best_len)) {
      best_diff = diff;
      best_len = len;
      first = false;
    }
  }
  s.reference_length = best_len;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = count_ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [g, c] : count_ngrams(ref.tokens, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    std::size_t matched = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      const auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    s.matches[n - 1] = matched;
    s.totals[n - 1] = total;
  }
  return s;
}

double bleu(std::span<const Utterance> candidates, std::span<const ReferenceSet> references) {
  if (candidates.size() != references.size()) {
    throw Error("BLEU: " + std::to_string(candidates.size()) + " candidates but " + std::to_string(references.size()) +
                " reference sets");
  }
  if (candidates.empty()) throw Error("BLEU of an empty corpus is undefined");
  BleuStats total;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += bleu_stats(candidates[i].tokens, references[i].references);
  return total.score();
}

double bleu(std::span<const Utterance> candidates, const Dataset<ReferenceSet>& references) {
  return bleu(candidates, std::span<const ReferenceSet>(references.items));
}

double sentence_bleu(const Utterance& candidate, std::span<const Utterance> references) {
  return bleu_stats(candidate.tokens, references).score();
}

double sentence_bleu(const Utterance& candidate, const Utterance& reference) {
  return sentence_bleu(candidate, std::span<const Utterance>(&reference, 1));
}

double harmonic_mean(double acc, double bleu) {
  const double s = acc + bleu;
  return s == 0.0 ? 0.0 : 2.0 * acc * bleu / s;
}

double style_accuracy(const StyleClassifier& clf, std::span<const Utterance> outputs, const StyleId& target) {
  if (outputs.empty()) throw Error("style accuracy needs at least one output");
  const int want = clf.styles().index_of(target);
  std::vector<Utterance> nonempty;
  for (const auto& u : outputs) {
    if (!u.empty()) nonempty.push_back(u);
  }
  std::size_t hits = 0;
  for (const auto& p : clf.predict_batch(nonempty)) {
    if ((p[1] > p[0] ? 1 : 0) == want) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: inputs differ in length");
  if (x.size() < 2) throw Error("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: correlation is undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> LearnedMetricOracle::score_batch(std::span<const Utterance> candidates,
                                                     std::span<const Utterance> anchors) const {
  if (candidates.size() != anchors.size()) throw Error("oracle: candidate and anchor counts differ");
  std::vector<double> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back(score(candidates[i], anchors[i]));
  return out;
}

double desk_oracle_score(const Utterance& candidate, const Utterance& anchor) {
  if (candidate.empty() && anchor.empty()) return 1.0;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : anchor.tokens) ++counts[t];
  std::size_t overlap = 0;
  for (const auto& t : candidate.tokens) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  const double f1 = 2.0 * static_cast<double>(overlap) / static_cast<double>(candidate.size() + anchor.size());
  return 2.0 * f1 - 1.0;
}

double DeskOracle::score(const Utterance& candidate, const Utterance& anchor) const {
  return desk_oracle_score(candidate, anchor);
}

ExternalOracle::ExternalOracle(std::string command) : command_(std::move(command)) {
  if (command_.empty()) throw ConfigError("external oracle needs a command");
}

double ExternalOracle::score(const Utterance& candidate, const Utterance& anchor) const {
  return score_batch(std::span<const Utterance>(&candidate, 1), std::span<const Utterance>(&anchor, 1)).front();
}

std::vector<double> ExternalOracle::score_batch(std::span<const Utterance> candidates,
                                                std::span<const Utterance> anchors) const {
  if (candidates.size() != anchors.size()) throw Error("oracle: candidate and anchor counts differ");
  if (candidates.empty()) return {};
  static std::mutex mutex;
  static std::atomic<unsigned> counter{0};
  std::lock_guard lock(mutex);
  const auto path = std::filesystem::temp_directory_path() /
                    ("stylebt-oracle-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".tsv");
  {
    std::ofstream out(path);
    if (!out) throw Error("cannot write oracle input " + path.string());
    for (std::size_t i = 0; i < candidates.size(); ++i) out << candidates[i].text() << '\t' << anchors[i].text() << '\n';
  }
  const std::string cmd = command_ + " '" + path.string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(path);
    throw Error("cannot run oracle command: " + command_);
  }
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  std::filesystem::remove(path);
  if (status != 0) throw Error("oracle command failed (status " + std::to_string(status) + "): " + command_);
  std::vector<double> scores;
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      scores.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw Error("oracle produced a non-numeric line: " + line);
    }
    if (!std::isfinite(scores.back())) throw Error("oracle produced a non-finite score");
  }
  if (scores.size() != candidates.size()) {
    throw Error("oracle returned " + std::to_string(scores.size()) + " scores for " +
                std::to_string(candidates.size()) + " pairs");
  }
  return scores;
}

std::unique_ptr<LearnedMetricOracle> make_oracle(const std::string& spec) {
  if (spec == "desk") return std::make_unique<DeskOracle>();
  constexpr std::string_view prefix = "external:";
  if (spec.starts_with(prefix)) return std::make_unique<ExternalOracle>(spec.substr(prefix.size()));
  throw ConfigError("unknown metric oracle '" + spec + "' (expected desk or external:<command>)");
}

namespace {

struct DirectionTotals {
  BleuStats bleu;
  std::size_t hits = 0;
  std::size_t count = 0;
  std::vector<double> learned_sums;
};

DirectionTotals accumulate_direction(const DirectionOutputs& d, const StyleClassifier& clf,
                                     std::span<const LearnedMetricOracle* const> oracles, const EvalOptions& options) {
  if (d.outputs.size() != d.references.size()) {
    throw Error("direction '" + d.name + "': " + std::to_string(d.outputs.size()) + " outputs but " +
                std::to_string(d.references.size()) + " reference sets");
  }
  if (d.outputs.empty()) throw Error("direction '" + d.name + "' has no outputs");
  DirectionTotals t;
  t.count = d.outputs.size();
  for (std::size_t i = 0; i < d.outputs.size(); ++i) {
    std::vector<Utterance> refs;
    for (const auto& r : d.references[i].references) refs.push_back(maybe_lower(r, options.bleu_lowercase));
    t.bleu += bleu_stats(maybe_lower(d.outputs[i], options.bleu_lowercase).tokens, refs);
  }
  t.hits = static_cast<std::size_t>(std::llround(style_accuracy(clf, d.outputs, d.target) * static_cast<double>(t.count)));
  t.learned_sums.assign(oracles.size(), 0.0);
  for (std::size_t o = 0; o < oracles.size(); ++o) {
    std::vector<Utterance> cands, anchors;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < d.outputs.size(); ++i) {
      for (const auto& r : d.references[i].references) {
        cands.push_back(maybe_lower(d.outputs[i], options.oracle_lowercase));
        anchors.push_back(maybe_lower(r, options.oracle_lowercase));
        owner.push_back(i);
      }
    }
    const auto scores = oracles[o]->score_batch(cands, anchors);
    std::vector<double> per_item(d.outputs.size(), 0.0);
    for (std::size_t k = 0; k < scores.size(); ++k) {
      per_item[owner[k]] += scores[k] / static_cast<double>(d.references[owner[k]].references.size());
    }
    for (double v : per_item) t.learned_sums[o] += v;
  }
  return t;
}

EvalRow make_row(std::string name, const DirectionTotals& t, std::span<const LearnedMetricOracle* const> oracles) {
  EvalRow row;
  row.name = std::move(name);
  row.count = t.count;
  row.acc = static_cast<double>(t.hits) / static_cast<double>(t.count);
  row.bleu = t.bleu.score();
  row.hm = harmonic_mean(row.acc, row.bleu);
  for (std::size_t o = 0; o < oracles.size(); ++o) {
    row.learned.emplace_back(oracles[o]->identity(), t.learned_sums[o] / static_cast<double>(t.count));
  }
  return row;
}

}  // namespace

EvalRow evaluate_direction(const DirectionOutputs& direction, const StyleClassifier& clf,
                           std::span<const LearnedMetricOracle* const> oracles, const EvalOptions& options) {
  return make_row(direction.name, accumulate_direction(direction, clf, oracles, options), oracles);
}

EvalReport evaluate_system(std::span<const DirectionOutputs> directions, const StyleClassifier& clf,
                           std::span<const LearnedMetricOracle* const> oracles, const EvalOptions& options) {
  if (directions.empty()) throw Error("evaluation needs at least one direction");
  EvalReport report;
  DirectionTotals pooled;
  pooled.learned_sums.assign(oracles.size(), 0.0);
  for (const auto& d : directions) {
    const auto t = accumulate_direction(d, clf, oracles, options);
    report.directions.push_back(make_row(d.name, t, oracles));
    pooled.bleu += t.bleu;
    pooled.hits += t.hits;
    pooled.count += t.count;
    for (std::size_t o = 0; o < oracles.size(); ++o) pooled.learned_sums[o] += t.learned_sums[o];
  }
  report.overall = make_row("overall", pooled, oracles);
  report.config["bleu.lowercase"] = options.bleu_lowercase ? "true" : "false";
  report.config["oracle.lowercase"] = options.oracle_lowercase ? "true" : "false";
  for (const auto* o : oracles) report.config["oracle." + o->identity()] = "used";
  return report;
}

namespace {

std::vector<std::vector<std::string>> report_cells(const EvalReport& report, bool exact) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"direction", "count"};
  for (const auto& [id, _] : report.overall.learned) header.push_back(id);
  for (const char* h : {"BLEU", "ACC", "HM"}) header.emplace_back(h);
  rows.push_back(header);
  auto fmt = [exact](double v) {
    if (exact) return format_double(v);
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  auto add = [&](const EvalRow& r) {
    std::vector<std::string> cells{r.name, std::to_string(r.count)};
    for (const auto& [_, v] : r.learned) cells.push_back(fmt(v));
    cells.push_back(fmt(r.bleu));
    cells.push_back(fmt(r.acc));
    cells.push_back(fmt(r.hm));
    rows.push_back(std::move(cells));
  };
  for (const auto& r : report.directions) add(r);
  add(report.overall);
  return rows;
}

}  // namespace

void write_report_tsv(std::ostream& out, const EvalReport& report) {
  for (const auto& row : report_cells(report, true)) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "\t" : "") << row[i];
    out << '\n';
  }
}

void write_report_table(std::ostream& out, const EvalReport& report) {
  const auto rows = report_cells(report, false);
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        out << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[i])) << row[i];
      }
    }
    out << '\n';
  }
}

std::vector<double> ScoreTable::column(std::size_t metric) const {
  std::vector<double> out;
  for (const auto& row : values) out.push_back(row.at(metric));
  return out;
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0, tab;
    while ((tab = line.find('\t', start)) != std::string::npos) {
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    cols.push_back(line.substr(start));
    return cols;
  };
  ScoreTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split(line);
    if (table.metrics.empty()) {
      if (cols.size() < 2) throw ParseError(path, lineno, "header needs a system column and at least one metric");
      table.metrics.assign(cols.begin() + 1, cols.end());
      continue;
    }
    if (cols.size() != table.metrics.size() + 1) throw ParseError(path, lineno, "column count differs from header");
    table.systems.push_back(cols[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < cols.size(); ++i) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cols[i], &used));
        if (used != cols[i].size() || !std::isfinite(row.back())) throw std::invalid_argument("bad");
      } catch (const std::exception&) {
        throw ParseError(path, lineno, "'" + cols[i] + "' is not a finite number");
      }
    }
    table.values.push_back(std::move(row));
  }
  if (table.metrics.empty()) throw ParseError(path, 1, "missing header");
  return table;
}

std::vector<std::vector<double>> correlation_matrix(const ScoreTable& table) {
  const std::size_t m = table.metrics.size();
  std::vector<std::vector<double>> out(m, std::vector<double>(m, 1.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      out[i][j] = out[j][i] = pearson(table.column(i), table.column(j));
    }
  }
  return out;
}

}  // namespace stylebt
