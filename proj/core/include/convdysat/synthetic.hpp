#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

#include "convdysat/graph.hpp"

namespace convdysat {

// Generators for offline datasets. Record i of bin b carries a timestamp inside [b, b+1),
// with the first record at 0 and the last at `steps`, so binning into `steps` snapshots
// reproduces the intended bins exactly.

// 12 nodes in four triangles joined by one moving bridge, 4 steps; the bundled toy dataset.
std::vector<EdgeRecord> toy_dataset();

// Independent G(n, p) graph per step.
std::vector<EdgeRecord> random_graph_dataset(std::size_t nodes, int steps, double p, std::uint64_t seed);

// One planted-partition graph repeated unchanged at every step.
std::vector<EdgeRecord> persistence_dataset(std::size_t nodes, int steps, std::size_t groups, double p_in,
                                            double p_out, std::uint64_t seed);

struct EmailLikeOptions {
  std::size_t nodes = 143;
  std::size_t interactions = 2347;
  int steps = 16;
  std::size_t communities = 8;
  double repeat_contact = 0.8;  // chance an email goes to one of the sender's usual contacts
  double in_community = 0.75;   // otherwise, chance the recipient shares the community
  std::uint64_t seed = 2001;
};

/// Email-network surrogate: heavy-tailed sender activity that drifts over time,
/// community structure and persistent contact lists.
std::vector<EdgeRecord> email_like_dataset(const EmailLikeOptions& options = {});

// "u v weight timestamp" lines.
void write_edge_list(std::ostream& out, const std::vector<EdgeRecord>& records);

}  // namespace convdysat
