#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "convdysat/graph.hpp"
#include "convdysat/random.hpp"

namespace convdysat {

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 40;
  std::size_t window = 10;
  std::uint64_t seed = 0;
  // Upper bound on context pairs kept per (snapshot, centre node); 0 keeps all.
  std::size_t max_contexts_per_node = 20;

  void validate() const;
};

using Walk = std::vector<NodeId>;

struct ContextPair {
  NodeId center;
  NodeId context;

  bool operator==(const ContextPair&) const = default;
};

/// First-order weighted random walks, `walks_per_node` starting at every node.
///
/// Walk w from node v draws from its own stream seeded by (seed, v, w), so the result
/// does not depend on evaluation order. Self-loops guarantee a successor always exists.
std::vector<Walk> random_walks(const Snapshot& snapshot, const WalkConfig& cfg);

// (walk[i], walk[j]) for every j != i with |i - j| <= window, minus pairs whose two
// nodes coincide.
std::vector<ContextPair> context_pairs(std::span<const Walk> walks, std::size_t window);

// Keeps at most `max_per_node` pairs per centre, chosen uniformly without replacement.
// Output is grouped by centre in ascending order, original order inside a group.
std::vector<ContextPair> limit_contexts_per_node(std::span<const ContextPair> pairs, std::size_t max_per_node,
                                                 Rng& rng);

/// Negative sampling distribution proportional to degree^power.
class NegativeTable {
 public:
  static NegativeTable from_degrees(std::span<const double> degrees, double power = 0.75);
  static NegativeTable from_snapshot(const Snapshot& snapshot, double power = 0.75);

  const std::vector<double>& cumulative_weights() const { return cumulative_; }
  double probability(NodeId v) const;
  NodeId draw(Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

std::vector<NodeId> sample_negatives(const NegativeTable& table, std::size_t count, Rng& rng);

// One walk per line, space-separated node labels.
void write_walk_corpus(std::ostream& out, std::span<const Walk> walks, const LabelMap& labels);

}  // namespace convdysat
