#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "convdysat/graph.hpp"
#include "convdysat/layers.hpp"
#include "convdysat/params.hpp"

namespace convdysat {

enum class LossReduction { Sum, Mean };

struct ModelConfig {
  std::vector<std::size_t> structural_dims{64};
  std::size_t structural_heads = 8;
  std::size_t temporal_dim = 64;
  std::size_t temporal_heads = 8;
  std::size_t qk_kernel = 2;
  double negative_weight = 1.0;  // w_n
  std::size_t negatives_per_positive = 10;
  double attention_slope = 0.2;
  bool scale_by_full_dim = false;
  LossReduction reduction = LossReduction::Mean;
  // Only the newest snapshot contributes to the training objective.
  bool latest_only = false;

  void validate() const;
  std::size_t embedding_dim() const { return temporal_dim; }
};

// e_v^t for t = 1..steps, stored time-major as [steps x N x d].
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(Tensor values);

  int steps() const { return static_cast<int>(values_.dim(0)); }
  std::size_t node_count() const { return values_.dim(1); }
  std::size_t dim() const { return values_.dim(2); }
  // t is 1-based.
  std::span<const double> row(int t, NodeId v) const;
  const Tensor& values() const { return values_; }

 private:
  Tensor values_;
};

// Dense adjacency of every snapshot, computed once per graph.
class GraphTensors {
 public:
  explicit GraphTensors(const DynamicGraph& graph);

  std::size_t node_count() const { return node_count_; }
  int num_steps() const { return static_cast<int>(snapshots_.size()); }
  const DenseAdjacency& snapshot(int t) const { return snapshots_.at(static_cast<std::size_t>(t - 1)); }

 private:
  std::size_t node_count_;
  std::vector<DenseAdjacency> snapshots_;
};

/// Glorot-uniform weights, zero biases, N(0, 0.1^2) position embeddings.
ParameterSet init_parameters(const ModelConfig& cfg, std::size_t node_count, int num_steps, std::uint64_t seed);

// Throws ShapeMismatchError unless `params` has exactly the tensors `cfg` implies.
void check_parameters(const ParameterSet& params, const ModelConfig& cfg, std::size_t node_count, int num_steps);

// True for tensors subject to weight decay (structural weights and convolution kernels).
bool is_decayed_parameter(const std::string& name);

/// Full forward pass over snapshots 1..up_to. Returns embeddings as [N x up_to x d]
/// (node-major, the layout of the temporal block). Nothing from snapshots after
/// `up_to` is read.
Var forward(Tape& tape, const GraphTensors& graph, ParameterSet& params, const ModelConfig& cfg, int up_to);

// Convenience wrapper without gradients.
EmbeddingTable embed(const GraphTensors& graph, const ParameterSet& params, const ModelConfig& cfg, int up_to);

// One (u, v) inner product at snapshot `step` (1-based).
struct PairSample {
  int step;
  NodeId u;
  NodeId v;
};

struct LossBatch {
  std::vector<PairSample> positives;
  std::vector<PairSample> negatives;
};

/// Graph-context objective on embeddings [N x T x d]:
/// sum over positives of -log sigma(<e_u, e_v>) plus w_n times the sum over negatives of
/// -log(1 - sigma(<e_u', e_v>)). Log arguments are floored at 1e-12. Mean reduction
/// divides by the number of positives.
Var context_loss(const Var& embeddings, const LossBatch& batch, double negative_weight, LossReduction reduction);

}  // namespace convdysat
