// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylebt/corpus.hpp"
#include "stylebt/metrics.hpp"
#include "stylebt/nn/ops.hpp"

namespace stylebt {

enum class RewardSign { GreedyMinusSample, SelfCritical };

std::string reward_sign_name(RewardSign sign);
RewardSign parse_reward_sign(const std::string& name);

struct RewardConfig {
  double lambda_sc = 1.0;
  double lambda_bleu = 1.0;
  double lambda_learned = 1.0;
  bool sc0 = true;
  bool sc1 = true;
  bool bleu = true;
  bool learned = true;
  RewardSign sign = RewardSign::SelfCritical;

  bool any_enabled() const { return sc0 || sc1 || bleu || learned; }
  static RewardConfig none();
  /// Throws ConfigError on negative or non-finite lambdas.
  void validate() const;
};

/// A greedy decode and one ancestral sample for the same source.
/// Ids exclude BOS; sampled_ids mirror sampled_logprobs one to one and end
/// before EOS. eos_logprob is set when the sample terminated on EOS.
struct DecodeOutcome {
  Utterance greedy;
  Utterance sampled;
  std::vector<int> greedy_ids;
  std::vector<int> sampled_ids;
  std::vector<double> sampled_logprobs;
  std::optional<double> eos_logprob;
};

/// lambda * (p2 - p1).
double style_reward(double p1, double p2, double lambda_sc);

/// Sentence BLEU of each decode against x. Self-critical: sampled minus
/// greedy. GreedyMinusSample: the reverse.
double self_critical_bleu_reward(const Utterance& greedy, const Utterance& sampled, const Utterance& x, double lambda,
                                 RewardSign sign = RewardSign::SelfCritical);

double learned_metric_reward(const Utterance& sampled, const Utterance& x, double lambda,
                             const LearnedMetricOracle& oracle);

/// -reward * sum(logprobs).
double policy_gradient_loss(double reward, std::span<const double> sampled_logprobs);

/// Differentiable form over an N x 1 column of token log-probabilities.
template <typename Scalar>
nn::Var<Scalar> policy_gradient_loss(double reward, const nn::Var<Scalar>& token_logprobs) {
  return nn::weighted_sum(token_logprobs,
                          std::vector<Scalar>(static_cast<std::size_t>(token_logprobs.rows()), static_cast<Scalar>(-reward)));
}

}  // namespace stylebt
