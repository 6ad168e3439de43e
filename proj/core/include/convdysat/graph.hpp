#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace convdysat {

using NodeId = std::uint32_t;

// One interaction line of an edge-list file.
struct EdgeRecord {
  std::string source;
  std::string target;
  double weight = 1.0;
  double timestamp = 0.0;

  bool operator==(const EdgeRecord&) const = default;
};

/// Reads `u v [weight] timestamp` lines. Blank lines and lines starting with '#' or '%'
/// are skipped. Throws InputError naming the line on malformed input or a non-positive
/// weight.
std::vector<EdgeRecord> parse_edge_list(std::istream& in);
std::vector<EdgeRecord> read_edge_list_file(const std::string& path);

struct Neighbor {
  NodeId node;
  double weight;
};

struct Edge {
  NodeId u;  // u < v
  NodeId v;
  double weight;
};

// Bijection between original string labels and dense node ids.
class LabelMap {
 public:
  NodeId intern(const std::string& label);
  NodeId id(const std::string& label) const;
  const std::string& label(NodeId id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> ids_;
};

/// A static graph over the full node universe. Undirected; every node carries a
/// self-loop of weight 1 in its adjacency list, which is sorted by neighbour id.
class Snapshot {
 public:
  Snapshot(int time_index, std::size_t node_count, std::vector<Edge> edges);

  int time_index() const { return time_index_; }
  std::size_t node_count() const { return adjacency_.size(); }
  // Distinct undirected links, excluding injected self-loops, ordered by (u, v).
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Neighbor> adjacency(NodeId v) const { return adjacency_.at(v); }
  double weight(NodeId u, NodeId v) const;  // 0 when absent
  bool has_link(NodeId u, NodeId v) const;   // ignores self-loops
  // Weighted degree without the self-loop.
  double degree(NodeId v) const;
  double total_weight() const;
  // Nodes incident to at least one link.
  std::vector<NodeId> active_nodes() const;

 private:
  int time_index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

enum class SnapshotMode { Binned, Cumulative };

SnapshotMode parse_snapshot_mode(const std::string& text);
std::string to_string(SnapshotMode mode);

// Snapshots G_1..G_T over a fixed node universe; time indices are 1-based.
class DynamicGraph {
 public:
  DynamicGraph(LabelMap labels, std::vector<Snapshot> snapshots);

  std::size_t node_count() const { return labels_.size(); }
  int num_steps() const { return static_cast<int>(snapshots_.size()); }
  const Snapshot& snapshot(int t) const;
  const LabelMap& labels() const { return labels_; }
  // Adjacency of v at step t including the self-loop, ascending by neighbour id.
  std::span<const Neighbor> neighbors(int t, NodeId v) const;

 private:
  LabelMap labels_;
  std::vector<Snapshot> snapshots_;
};

/// Splits [min, max] of the timestamps into `num_steps` equal-width bins (half-open,
/// last bin closed) and builds one snapshot per bin. Duplicate links inside a snapshot
/// have their weights summed; self-interactions in the input are dropped since every
/// node already has a self-loop.
DynamicGraph build_snapshots(std::span<const EdgeRecord> records, int num_steps, SnapshotMode mode);

// "u v weight" lines under a "# snapshot t=<k>" header, labels as in the input.
void write_snapshot(std::ostream& out, const DynamicGraph& graph, int t);

}  // namespace convdysat
