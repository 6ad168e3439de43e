#include "convdysat/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "convdysat/error.hpp"
#include "convdysat/random.hpp"

namespace convdysat {
namespace {

// Stream tags keep the random streams of different purposes apart.
constexpr std::uint64_t kShuffleTag = 0x5348;
constexpr std::uint64_t kNegativeTag = 0x4E45;
constexpr std::uint64_t kLimitTag = 0x4C49;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs_per_step < 0) throw InputError("train: epochs_per_step must be non-negative");
  if (batch_size == 0) throw InputError("train: batch_size must be positive");
  if (!(learning_rate > 0.0) || !(epsilon > 0.0) || weight_decay < 0.0 || !(gradient_clip_norm > 0.0)) {
    throw InputError("train: learning_rate, epsilon and gradient_clip_norm must be positive, weight_decay non-negative");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw InputError("train: Adam betas must lie in (0, 1)");
  if (first_step < 1) throw InputError("train: first_step must be at least 1");
}

AdamConfig TrainConfig::adam() const { return {learning_rate, beta1, beta2, epsilon, weight_decay}; }

std::vector<PairSample> build_training_pairs(const DynamicGraph& graph, const WalkConfig& walk, int step,
                                             bool latest_only, std::uint64_t stream) {
  std::vector<PairSample> out;
  for (int s = latest_only ? step : 1; s <= step; ++s) {
    WalkConfig cfg = walk;
    cfg.seed = derive_seed({walk.seed, stream, static_cast<std::uint64_t>(s)});
    const auto walks = random_walks(graph.snapshot(s), cfg);
    const auto all = context_pairs(walks, walk.window);
    Rng rng = make_rng({walk.seed, stream, static_cast<std::uint64_t>(s), kLimitTag});
    for (const auto& p : limit_contexts_per_node(all, walk.max_contexts_per_node, rng)) {
      out.push_back({s, p.context, p.center});
    }
  }
  return out;
}

Trainer::Trainer(const DynamicGraph& graph, ModelConfig model, WalkConfig walk, TrainConfig train)
    : graph_(graph), model_(std::move(model)), walk_(walk), train_(train), tensors_(graph) {
  model_.validate();
  walk_.validate();
  train_.validate();
  if (graph_.num_steps() < 2) throw InputError("training needs at least 2 snapshots");
  walk_.seed = derive_seed({train_.seed, walk.seed});
  for (int t = 1; t <= graph_.num_steps(); ++t) {
    const auto& snap = graph_.snapshot(t);
    negatives_.push_back(snap.edges().empty() ? NegativeTable{} : NegativeTable::from_snapshot(snap));
  }
}

TrainState Trainer::initial_state() const {
  TrainState state;
  state.params = init_parameters(model_, graph_.node_count(), graph_.num_steps(), train_.seed);
  state.step = train_.first_step;
  state.finished = state.step > last_step();
  return state;
}

void Trainer::prepare_pairs(int step, int epoch) {
  if (pairs_step_ == step && pairs_epoch_ == epoch) return;
  const std::uint64_t stream = train_.resample_every_epoch
                                   ? derive_seed({static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(epoch)})
                                   : static_cast<std::uint64_t>(step);
  pairs_ = build_training_pairs(graph_, walk_, step, model_.latest_only, stream);
  pairs_step_ = step;
  pairs_epoch_ = epoch;
}

double Trainer::run_epoch(TrainState& state) {
  const int step = state.step;
  prepare_pairs(step, train_.resample_every_epoch ? state.epoch : 0);
  if (pairs_.empty()) return std::numeric_limits<double>::quiet_NaN();

  std::vector<std::size_t> order(pairs_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng = make_rng({train_.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(state.epoch), kShuffleTag});
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  const AdamConfig adam = train_.adam();
  double weighted_loss = 0.0;
  std::size_t total_positives = 0;
  for (std::size_t begin = 0, batch = 0; begin < order.size(); begin += train_.batch_size, ++batch) {
    const std::size_t end = std::min(order.size(), begin + train_.batch_size);
    LossBatch lb;
    lb.positives.reserve(end - begin);
    // Positives per (snapshot, centre) in order of first appearance.
    std::vector<std::pair<std::pair<int, NodeId>, std::size_t>> groups;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& p = pairs_[order[i]];
      lb.positives.push_back(p);
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == std::make_pair(p.step, p.v); });
      if (it == groups.end()) {
        groups.push_back({{p.step, p.v}, 1});
      } else {
        ++it->second;
      }
    }
    Rng neg_rng = make_rng({train_.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(state.epoch), batch, kNegativeTag});
    for (const auto& [key, count] : groups) {
      const auto& table = negatives_[static_cast<std::size_t>(key.first - 1)];
      for (NodeId u : sample_negatives(table, model_.negatives_per_positive * count, neg_rng)) {
        lb.negatives.push_back({key.first, u, key.second});
      }
    }

    state.params.clear_grad();
    Tape tape;
    Var emb = forward(tape, tensors_, state.params, model_, step);
    Var loss = context_loss(emb, lb, model_.negative_weight, model_.reduction);
    const double value = loss.value().item();
    if (!std::isfinite(value)) {
      throw DivergenceError("loss became non-finite at step " + std::to_string(step) + ", epoch " + std::to_string(state.epoch));
    }
    tape.backward(loss);
    clip_grad_norm(state.params, train_.gradient_clip_norm);
    adam_step(state.params, state.adam, adam);

    const std::size_t positives = lb.positives.size();
    weighted_loss += model_.reduction == LossReduction::Mean ? value * static_cast<double>(positives) : value;
    total_positives += positives;
  }
  state.params.clear_grad();
  return weighted_loss / static_cast<double>(total_positives);
}

bool Trainer::run(TrainState& state, std::optional<std::size_t> epoch_budget,
                  const std::function<void(const LossRecord&)>& on_epoch) {
  std::size_t ran = 0;
  while (!state.finished) {
    if (state.epoch >= train_.epochs_per_step) {
      state.step_params[state.step] = state.params;
      ++state.step;
      state.epoch = 0;
      if (state.step > last_step()) {
        state.finished = true;
        break;
      }
      if (!train_.warm_start) {
        state.params = init_parameters(model_, graph_.node_count(), graph_.num_steps(), train_.seed);
        state.adam = AdamState{};
      }
      continue;
    }
    if (epoch_budget && ran >= *epoch_budget) return false;

    const auto start = std::chrono::steady_clock::now();
    const ParameterSet params_before = state.params;
    const AdamState adam_before = state.adam;
    double loss = 0.0;
    try {
      loss = run_epoch(state);
    } catch (const DivergenceError&) {
      state.params = params_before;
      state.adam = adam_before;
      throw;
    }
    const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!std::isnan(loss)) {
      LossRecord rec{state.epoch, state.step, loss, wall};
      state.log.push_back(rec);
      if (on_epoch) on_epoch(rec);
    }
    ++state.epoch;
    ++ran;
  }
  return true;
}

TrainState train(const DynamicGraph& graph, const ModelConfig& model, const WalkConfig& walk, const TrainConfig& cfg) {
  Trainer trainer(graph, model, walk, cfg);
  TrainState state = trainer.initial_state();
  trainer.run(state);
  return state;
}

void write_metrics_csv(std::ostream& out, const std::vector<LossRecord>& log) {
  out << "epoch,time_step,loss\n";
  for (const auto& r : log) out << r.epoch << ',' << r.time_step << ',' << format_double(r.loss) << '\n';
}

void write_timing_csv(std::ostream& out, const std::vector<LossRecord>& log) {
  out << "epoch,time_step,wall_ms\n";
  for (const auto& r : log) out << r.epoch << ',' << r.time_step << ',' << format_double(r.wall_ms) << '\n';
}

}  // namespace convdysat
