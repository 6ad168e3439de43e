#include "convdysat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "convdysat/error.hpp"
#include "convdysat/random.hpp"

namespace convdysat {
namespace {

constexpr std::uint64_t kNegativeTag = 0x4556;
constexpr std::uint64_t kShuffleTag = 0x5350;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t share(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double objective(const LogisticModel& m, const std::vector<std::vector<double>>& x, std::span<const int> y, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = m.logit(x[i]);
    loss += y[i] ? log1p_exp(-z) : log1p_exp(z);
  }
  loss /= static_cast<double>(x.size());
  double reg = 0.0;
  for (double w : m.weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

void check_examples(const std::vector<std::vector<double>>& x, std::span<const int> y) {
  if (x.empty() || x.size() != y.size()) throw DimensionError("logistic_fit: need one label per example");
  const std::size_t d = x.front().size();
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) throw DimensionError("logistic_fit: ragged feature matrix");
    for (double v : x[i]) {
      if (!std::isfinite(v)) throw DomainError("logistic_fit: non-finite feature");
    }
    if (y[i] == 1) {
      pos = true;
    } else if (y[i] == 0) {
      neg = true;
    } else {
      throw DomainError("logistic_fit: labels must be 0 or 1");
    }
  }
  if (!pos || !neg) throw DomainError("logistic_fit: both classes must be present");
}

}  // namespace

EvalSplit build_eval_split(const DynamicGraph& graph, int t, std::uint64_t seed, const SplitOptions& options) {
  if (t < 1 || t + 1 > graph.num_steps()) throw DomainError("build_eval_split: need 1 <= t and t + 1 <= T");
  if (options.validation_fraction < 0.0 || options.validation_fraction >= 1.0 || options.train_fraction <= 0.0 ||
      options.train_fraction >= 1.0) {
    throw DomainError("build_eval_split: fractions out of range");
  }
  const Snapshot& snap = graph.snapshot(t + 1);
  const auto& links = snap.edges();
  if (links.size() < 4) {
    throw DomainError("build_eval_split: snapshot " + std::to_string(t + 1) + " has fewer than 4 links");
  }
  const auto active = snap.active_nodes();
  const std::size_t a = active.size();
  const std::size_t non_links = a * (a - 1) / 2 - links.size();
  if (non_links < links.size()) {
    throw DomainError("build_eval_split: snapshot " + std::to_string(t + 1) + " has too few non-links for negatives");
  }

  EvalSplit split;
  split.target_step = t + 1;
  for (const auto& e : links) split.positives.push_back({e.u, e.v, 1});

  Rng rng = make_rng({seed, static_cast<std::uint64_t>(t + 1), kNegativeTag});
  std::uniform_int_distribution<std::size_t> pick(0, a - 1);
  std::set<std::pair<NodeId, NodeId>> taken;
  while (split.negatives.size() < links.size()) {
    NodeId u = active[pick(rng)];
    NodeId v = active[pick(rng)];
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (snap.has_link(u, v) || !taken.insert({u, v}).second) continue;
    split.negatives.push_back({u, v, 0});
  }

  Rng shuffle = make_rng({seed, static_cast<std::uint64_t>(t + 1), kShuffleTag});
  auto positives = split.positives;
  auto negatives = split.negatives;
  std::shuffle(positives.begin(), positives.end(), shuffle);
  std::shuffle(negatives.begin(), negatives.end(), shuffle);

  // Same counts for both classes keep every part balanced.
  const std::size_t n = links.size();
  const std::size_t n_val = share(n, options.validation_fraction);
  const std::size_t n_train = std::max<std::size_t>(1, share(n - n_val, options.train_fraction));
  if (n - n_val <= n_train) throw DomainError("build_eval_split: too few links left for a test set");
  for (const auto* cls : {&positives, &negatives}) {
    split.validation.insert(split.validation.end(), cls->begin(), cls->begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.insert(split.train.end(), cls->begin() + static_cast<std::ptrdiff_t>(n_val),
                       cls->begin() + static_cast<std::ptrdiff_t>(n_val + n_train));
    split.test.insert(split.test.end(), cls->begin() + static_cast<std::ptrdiff_t>(n_val + n_train), cls->end());
  }
  return split;
}

std::vector<double> hadamard_features(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("hadamard_features: dimension mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double LogisticModel::logit(std::span<const double> x) const {
  if (x.size() != weights.size()) throw DimensionError("logistic model: feature dimension mismatch");
  double z = bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
  return z;
}

std::vector<double> logistic_gradient(const LogisticModel& model, const std::vector<std::vector<double>>& features,
                                      std::span<const int> labels, double l2) {
  const std::size_t d = model.weights.size();
  std::vector<double> g(d + 1, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double r = sigmoid(model.logit(features[i])) - labels[i];
    for (std::size_t k = 0; k < d; ++k) g[k] += r * features[i][k];
    g[d] += r;
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  for (std::size_t k = 0; k < d; ++k) g[k] = g[k] * inv + l2 * model.weights[k];
  g[d] *= inv;
  return g;
}

LogisticModel logistic_fit(const std::vector<std::vector<double>>& features, std::span<const int> labels, double l2,
                           int iterations) {
  check_examples(features, labels);
  if (l2 < 0.0) throw DomainError("logistic_fit: l2 must be non-negative");
  const std::size_t d = features.front().size();
  LogisticModel m{std::vector<double>(d, 0.0), 0.0};
  double f = objective(m, features, labels, l2);
  double step = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const auto g = logistic_gradient(m, features, labels, l2);
    double g2 = 0.0;
    for (double v : g) g2 += v * v;
    if (std::sqrt(g2) < 1e-10) break;
    // Armijo backtracking; the step grows again after each accepted move.
    step = std::min(step * 2.0, 1e6);
    LogisticModel trial = m;
    double f_trial = f;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t j = 0; j < d; ++j) trial.weights[j] = m.weights[j] - step * g[j];
      trial.bias = m.bias - step * g[d];
      f_trial = objective(trial, features, labels, l2);
      if (f_trial <= f - 0.5 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    m = std::move(trial);
    f = f_trial;
  }
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double n_pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        rank_sum += midrank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw DomainError("roc_auc: both classes must be present");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double mean(std::span<const double> values) {
  if (values.empty()) return std::nan("");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size()));
}

double EvalReport::micro_mean() const { return mean(micro_auc); }
double EvalReport::micro_std() const { return stddev(micro_auc); }
double EvalReport::macro_mean() const { return mean(macro_auc); }
double EvalReport::macro_std() const { return stddev(macro_auc); }

EvalReport evaluate_embeddings(const DynamicGraph& graph, const std::map<int, EmbeddingTable>& embeddings,
                               std::span<const std::uint64_t> seeds, const EvalOptions& options) {
  if (seeds.empty()) throw DomainError("evaluate: at least one seed is required");
  EvalReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  std::vector<std::vector<double>> pooled_scores(seeds.size());
  std::vector<std::vector<int>> pooled_labels(seeds.size());

  for (const auto& [t, table] : embeddings) {
    if (t + 1 > graph.num_steps()) continue;
    if (table.steps() < t || table.node_count() != graph.node_count()) {
      throw ShapeMismatchError("evaluate: embedding table for step " + std::to_string(t) + " has the wrong shape");
    }
    std::vector<double> row(seeds.size());
    bool usable = true;
    for (std::size_t s = 0; s < seeds.size() && usable; ++s) {
      EvalSplit split;
      try {
        split = build_eval_split(graph, t, seeds[s], options.split);
      } catch (const DomainError&) {
        usable = false;
        break;
      }
      auto featurise = [&](const std::vector<LabeledPair>& pairs, std::vector<std::vector<double>>& x,
                           std::vector<int>& y) {
        for (const auto& p : pairs) {
          x.push_back(hadamard_features(table.row(t, p.u), table.row(t, p.v)));
          y.push_back(p.label);
        }
      };
      std::vector<std::vector<double>> x_train, x_test;
      std::vector<int> y_train, y_test;
      featurise(split.train, x_train, y_train);
      featurise(split.test, x_test, y_test);
      const auto model = logistic_fit(x_train, y_train, options.l2, options.iterations);
      std::vector<double> scores;
      scores.reserve(x_test.size());
      for (const auto& x : x_test) scores.push_back(model.logit(x));
      row[s] = roc_auc(scores, y_test);
      pooled_scores[s].insert(pooled_scores[s].end(), scores.begin(), scores.end());
      pooled_labels[s].insert(pooled_labels[s].end(), y_test.begin(), y_test.end());
    }
    if (!usable) {
      report.skipped_steps.push_back(t + 1);
      continue;
    }
    report.target_steps.push_back(t + 1);
    report.step_auc.push_back(std::move(row));
  }
  if (report.target_steps.empty()) throw DomainError("evaluate: no step has a usable link-prediction split");

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    report.micro_auc.push_back(roc_auc(pooled_scores[s], pooled_labels[s]));
    std::vector<double> per_step;
    for (const auto& row : report.step_auc) per_step.push_back(row[s]);
    report.macro_auc.push_back(mean(per_step));
  }
  return report;
}

EvalReport evaluate(const DynamicGraph& graph, const std::map<int, ParameterSet>& step_params, const ModelConfig& cfg,
                    std::span<const std::uint64_t> seeds, const EvalOptions& options) {
  const GraphTensors tensors(graph);
  std::map<int, EmbeddingTable> embeddings;
  for (const auto& [t, params] : step_params) {
    if (t < 1 || t + 1 > graph.num_steps()) continue;
    check_parameters(params, cfg, graph.node_count(), graph.num_steps());
    embeddings.emplace(t, embed(tensors, params, cfg, t));
  }
  return evaluate_embeddings(graph, embeddings, seeds, options);
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "step";
  for (auto s : report.seeds) out << ",auc_seed" << s;
  out << ",mean,std\n";
  auto line = [&](const std::string& label, std::span<const double> values) {
    out << label;
    for (double v : values) out << ',' << format_double(v);
    out << ',' << format_double(mean(values)) << ',' << format_double(stddev(values)) << '\n';
  };
  for (std::size_t i = 0; i < report.target_steps.size(); ++i) {
    line(std::to_string(report.target_steps[i]), report.step_auc[i]);
  }
  line("micro", report.micro_auc);
  line("macro", report.macro_auc);
}

std::string summary_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["micro_mean"] = report.micro_mean();
  j["micro_std"] = report.micro_std();
  j["macro_mean"] = report.macro_mean();
  j["macro_std"] = report.macro_std();
  j["seeds"] = report.seeds;
  j["steps"] = report.target_steps;
  j["skipped_steps"] = report.skipped_steps;
  if (!report.config_hash.empty()) j["config_hash"] = report.config_hash;
  return j.dump();
}

}  // namespace convdysat
