#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "convdysat/graph.hpp"
#include "convdysat/model.hpp"

namespace convdysat {

struct LabeledPair {
  NodeId u;
  NodeId v;
  int label;  // 1 link, 0 non-link

  bool operator==(const LabeledPair&) const = default;
};

/// Link-prediction examples for snapshot `target_step` (= t + 1).
///
/// Positives are its links, negatives the same number of uniformly drawn non-links
/// among nodes active in it. A `validation_fraction` share of each class is held out
/// first; the rest is split per class into `train_fraction` / remainder.
struct EvalSplit {
  int target_step = 0;
  std::vector<LabeledPair> positives;
  std::vector<LabeledPair> negatives;
  std::vector<LabeledPair> validation;
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> test;
};

struct SplitOptions {
  double validation_fraction = 0.2;
  double train_fraction = 0.25;
};

// Throws DomainError when snapshot t+1 has fewer than 4 links or too few non-links.
EvalSplit build_eval_split(const DynamicGraph& graph, int t, std::uint64_t seed, const SplitOptions& options = {});

std::vector<double> hadamard_features(std::span<const double> a, std::span<const double> b);

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;

  double logit(std::span<const double> x) const;
};

/// L2-regularised logistic regression, mean log-loss + l2/2 |w|^2 (bias unpenalised),
/// fit by full-batch gradient descent with Armijo backtracking. Stops once the
/// gradient norm falls below 1e-10 or after `iterations` steps.
LogisticModel logistic_fit(const std::vector<std::vector<double>>& features, std::span<const int> labels, double l2,
                           int iterations);

// Gradient of the logistic objective above; exposed for optimality checks.
std::vector<double> logistic_gradient(const LogisticModel& model, const std::vector<std::vector<double>>& features,
                                      std::span<const int> labels, double l2);

/// Area under the ROC curve by the Mann-Whitney rank statistic with mid-ranks for ties.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EvalOptions {
  SplitOptions split;
  double l2 = 1e-3;
  int iterations = 2000;
};

struct EvalReport {
  std::vector<std::uint64_t> seeds;
  std::vector<int> target_steps;                // one entry per evaluated step (t + 1)
  std::vector<std::vector<double>> step_auc;    // [step][seed]
  std::vector<double> micro_auc;                // per seed, pooled over steps
  std::vector<double> macro_auc;                // per seed, mean of step AUCs
  std::vector<int> skipped_steps;               // target steps without a usable split
  std::string config_hash;

  double micro_mean() const;
  double micro_std() const;
  double macro_mean() const;
  double macro_std() const;
};

double mean(std::span<const double> values);
// Population standard deviation; 0 for fewer than two values.
double stddev(std::span<const double> values);

/// Scores every step whose embeddings are provided. `embeddings[t]` must hold e^t for
/// all nodes (embedding with forward(up_to = t)); links of snapshot t + 1 are predicted.
EvalReport evaluate_embeddings(const DynamicGraph& graph, const std::map<int, EmbeddingTable>& embeddings,
                               std::span<const std::uint64_t> seeds, const EvalOptions& options = {});

// Embeds with the per-step parameters (step t -> parameters after training step t), then
// evaluates as above.
EvalReport evaluate(const DynamicGraph& graph, const std::map<int, ParameterSet>& step_params, const ModelConfig& cfg,
                    std::span<const std::uint64_t> seeds, const EvalOptions& options = {});

// step,auc_seed<s>...,mean,std rows, followed by micro and macro rows.
void write_eval_csv(std::ostream& out, const EvalReport& report);
// {"micro_mean":..,"micro_std":..,"macro_mean":..,"macro_std":..} on one line.
std::string summary_json(const EvalReport& report);

}  // namespace convdysat
