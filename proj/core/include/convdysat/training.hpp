#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "convdysat/adam.hpp"
#include "convdysat/graph.hpp"
#include "convdysat/model.hpp"
#include "convdysat/sampling.hpp"

namespace convdysat {

struct TrainConfig {
  int epochs_per_step = 200;
  std::size_t batch_size = 512;  // positive pairs per optimiser step
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;
  double gradient_clip_norm = 10.0;
  std::uint64_t seed = 1;
  int first_step = 1;  // first training step t; links of t+1 are predicted from it
  bool warm_start = true;
  bool resample_every_epoch = false;

  void validate() const;
  AdamConfig adam() const;
};

struct LossRecord {
  int epoch;      // 0-based within the time step
  int time_step;  // training step t
  double loss;
  double wall_ms;
};

/// Everything needed to continue training bit-exactly.
///
/// `step` is the training step in progress and `epoch` the number of epochs already
/// finished in it. `step_params[t]` holds the parameters at the end of step t, which are
/// the ones used to embed snapshots 1..t for predicting t+1.
struct TrainState {
  ParameterSet params;
  AdamState adam;
  int step = 0;
  int epoch = 0;
  bool finished = false;
  std::vector<LossRecord> log;
  std::map<int, ParameterSet> step_params;
};

// Positive context pairs of one training step, grouped per snapshot.
std::vector<PairSample> build_training_pairs(const DynamicGraph& graph, const WalkConfig& walk, int step,
                                             bool latest_only, std::uint64_t stream);

class Trainer {
 public:
  Trainer(const DynamicGraph& graph, ModelConfig model, WalkConfig walk, TrainConfig train);

  const ModelConfig& model_config() const { return model_; }
  const GraphTensors& tensors() const { return tensors_; }
  int last_step() const { return graph_.num_steps() - 1; }

  TrainState initial_state() const;

  /// Runs epochs until training finishes or `epoch_budget` epochs have run in this call.
  /// Returns true once every step is complete. On divergence throws DivergenceError and
  /// leaves `state` at the last completed epoch.
  bool run(TrainState& state, std::optional<std::size_t> epoch_budget = std::nullopt,
           const std::function<void(const LossRecord&)>& on_epoch = {});

  // One epoch of step `state.step`; returns the mean loss per positive pair.
  double run_epoch(TrainState& state);

 private:
  void prepare_pairs(int step, int epoch);

  const DynamicGraph& graph_;
  ModelConfig model_;
  WalkConfig walk_;
  TrainConfig train_;
  GraphTensors tensors_;
  std::vector<NegativeTable> negatives_;  // per snapshot, empty table for link-free snapshots
  std::vector<PairSample> pairs_;
  int pairs_step_ = -1;
  int pairs_epoch_ = -1;
};

TrainState train(const DynamicGraph& graph, const ModelConfig& model, const WalkConfig& walk, const TrainConfig& cfg);

// "epoch,time_step,loss" rows; wall-clock times are kept out so the file is reproducible.
void write_metrics_csv(std::ostream& out, const std::vector<LossRecord>& log);
// "epoch,time_step,wall_ms" rows.
void write_timing_csv(std::ostream& out, const std::vector<LossRecord>& log);

}  // namespace convdysat
