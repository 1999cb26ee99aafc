// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/rewards.hpp"

#include <cmath>

namespace stylebt {

std::string reward_sign_name(RewardSign sign) { return sign == RewardSign::GreedyMinusSample ? "greedy_minus_sample" : "self_critical"; }

RewardSign parse_reward_sign(const std::string& name) {
  if (name == "greedy_minus_sample") return RewardSign::GreedyMinusSample;
  if (name == "self_critical" || name == "self-critical") return RewardSign::SelfCritical;
  throw ConfigError("unknown reward sign '" + name + "' (expected self_critical or greedy_minus_sample)");
}

RewardConfig RewardConfig::none() {
  RewardConfig c;
  c.sc0 = c.sc1 = c.bleu = c.learned = false;
  return c;
}

void RewardConfig::validate() const {
  for (double l : {lambda_sc, lambda_bleu, lambda_learned}) {
    if (!std::isfinite(l) || l < 0.0) throw ConfigError("reward lambdas must be finite and non-negative");
  }
}

double style_reward(double p1, double p2, double lambda_sc) { return lambda_sc * (p2 - p1); }

double self_critical_bleu_reward(const Utterance& greedy, const Utterance& sampled, const Utterance& x, double lambda,
                                 RewardSign sign) {
  if (x.empty()) throw EmptyUtteranceError("BLEU reward needs a non-empty anchor");
  const double g = sentence_bleu(greedy, x);
  const double s = sentence_bleu(sampled, x);
  return sign == RewardSign::GreedyMinusSample ? lambda * (g - s) : lambda * (s - g);
}

double learned_metric_reward(const Utterance& sampled, const Utterance& x, double lambda,
                             const LearnedMetricOracle& oracle) {
  if (lambda == 0.0) return 0.0;
  return lambda * oracle.score(sampled, x);
}

double policy_gradient_loss(double reward, std::span<const double> sampled_logprobs) {
  double sum = 0.0;
  for (double lp : sampled_logprobs) sum += lp;
  return -reward * sum;
}

}  // namespace stylebt
