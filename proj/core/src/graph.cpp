#include "convdysat/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "convdysat/error.hpp"

namespace convdysat {
namespace {

bool parse_number(const std::string& token, double& value) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end && std::isfinite(value);
}

}  // namespace

std::vector<EdgeRecord> parse_edge_list(std::istream& in) {
  std::vector<EdgeRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || line[first] == '%') continue;

    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.size() != 3 && tokens.size() != 4) {
      throw InputError("line " + std::to_string(line_no) + ": expected 3 or 4 fields, got " +
                       std::to_string(tokens.size()));
    }
    EdgeRecord rec;
    rec.source = tokens[0];
    rec.target = tokens[1];
    if (tokens.size() == 4 && !parse_number(tokens[2], rec.weight)) {
      throw InputError("line " + std::to_string(line_no) + ": bad weight '" + tokens[2] + "'");
    }
    if (!parse_number(tokens.back(), rec.timestamp)) {
      throw InputError("line " + std::to_string(line_no) + ": bad timestamp '" + tokens.back() + "'");
    }
    if (rec.weight <= 0.0) {
      throw InputError("line " + std::to_string(line_no) + ": weight must be positive, got " + tokens[2]);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<EdgeRecord> read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open edge list '" + path + "'");
  try {
    return parse_edge_list(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

NodeId LabelMap::intern(const std::string& label) {
  auto [it, inserted] = ids_.try_emplace(label, static_cast<NodeId>(labels_.size()));
  if (inserted) labels_.push_back(label);
  return it->second;
}

NodeId LabelMap::id(const std::string& label) const {
  auto it = ids_.find(label);
  if (it == ids_.end()) throw InputError("unknown node label '" + label + "'");
  return it->second;
}

Snapshot::Snapshot(int time_index, std::size_t node_count, std::vector<Edge> edges)
    : time_index_(time_index), edges_(std::move(edges)), adjacency_(node_count) {
  for (const auto& e : edges_) {
    if (e.u >= node_count || e.v >= node_count || e.u == e.v || !(e.weight > 0.0)) {
      throw InputError("invalid edge in snapshot " + std::to_string(time_index));
    }
    adjacency_[e.u].push_back({e.v, e.weight});
    adjacency_[e.v].push_back({e.u, e.weight});
  }
  for (NodeId v = 0; v < node_count; ++v) {
    auto& adj = adjacency_[v];
    adj.push_back({v, 1.0});
    std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
}

double Snapshot::weight(NodeId u, NodeId v) const {
  for (const auto& n : adjacency_.at(u)) {
    if (n.node == v) return n.weight;
  }
  return 0.0;
}

bool Snapshot::has_link(NodeId u, NodeId v) const { return u != v && weight(u, v) > 0.0; }

double Snapshot::degree(NodeId v) const {
  double total = 0.0;
  for (const auto& n : adjacency_.at(v)) {
    if (n.node != v) total += n.weight;
  }
  return total;
}

double Snapshot::total_weight() const {
  double total = 0.0;
  for (const auto& e : edges_) total += e.weight;
  return total;
}

std::vector<NodeId> Snapshot::active_nodes() const {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < adjacency_.size(); ++v) {
    if (adjacency_[v].size() > 1) out.push_back(v);
  }
  return out;
}

SnapshotMode parse_snapshot_mode(const std::string& text) {
  if (text == "binned") return SnapshotMode::Binned;
  if (text == "cumulative") return SnapshotMode::Cumulative;
  throw InputError("unknown snapshot mode '" + text + "' (expected binned or cumulative)");
}

std::string to_string(SnapshotMode mode) { return mode == SnapshotMode::Binned ? "binned" : "cumulative"; }

DynamicGraph::DynamicGraph(LabelMap labels, std::vector<Snapshot> snapshots)
    : labels_(std::move(labels)), snapshots_(std::move(snapshots)) {
  for (std::size_t i = 0; i < snapshots_.size(); ++i) {
    if (snapshots_[i].time_index() != static_cast<int>(i) + 1) throw InputError("snapshots must be numbered 1..T in order");
    if (snapshots_[i].node_count() != labels_.size()) throw InputError("snapshot node universe mismatch");
  }
}

const Snapshot& DynamicGraph::snapshot(int t) const {
  if (t < 1 || t > num_steps()) {
    throw InputError("time step " + std::to_string(t) + " outside [1, " + std::to_string(num_steps()) + "]");
  }
  return snapshots_[static_cast<std::size_t>(t - 1)];
}

std::span<const Neighbor> DynamicGraph::neighbors(int t, NodeId v) const {
  const auto& snap = snapshot(t);
  if (v >= node_count()) throw InputError("node " + std::to_string(v) + " outside universe of " + std::to_string(node_count()));
  return snap.adjacency(v);
}

DynamicGraph build_snapshots(std::span<const EdgeRecord> records, int num_steps, SnapshotMode mode) {
  if (num_steps < 2) throw InputError("number of snapshots must be at least 2");
  if (records.empty()) throw InputError("edge list is empty");
  double lo = records.front().timestamp, hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.timestamp);
    hi = std::max(hi, r.timestamp);
  }
  if (hi <= lo) throw InputError("all timestamps are identical; cannot split into " + std::to_string(num_steps) + " snapshots");

  LabelMap labels;
  const double width = (hi - lo) / num_steps;
  std::vector<std::map<std::pair<NodeId, NodeId>, double>> bins(static_cast<std::size_t>(num_steps));
  for (const auto& r : records) {
    const NodeId a = labels.intern(r.source);
    const NodeId b = labels.intern(r.target);
    if (a == b) continue;
    auto bin = static_cast<std::size_t>(std::floor((r.timestamp - lo) / width));
    bin = std::min(bin, static_cast<std::size_t>(num_steps - 1));
    bins[bin][{std::min(a, b), std::max(a, b)}] += r.weight;
  }
  if (mode == SnapshotMode::Cumulative) {
    for (std::size_t t = 1; t < bins.size(); ++t) {
      for (const auto& [key, w] : bins[t - 1]) bins[t][key] += w;
    }
  }

  std::vector<Snapshot> snapshots;
  snapshots.reserve(bins.size());
  for (std::size_t t = 0; t < bins.size(); ++t) {
    std::vector<Edge> edges;
    edges.reserve(bins[t].size());
    for (const auto& [key, w] : bins[t]) edges.push_back({key.first, key.second, w});
    snapshots.emplace_back(static_cast<int>(t) + 1, labels.size(), std::move(edges));
  }
  return DynamicGraph(std::move(labels), std::move(snapshots));
}

void write_snapshot(std::ostream& out, const DynamicGraph& graph, int t) {
  const auto& snap = graph.snapshot(t);
  out << "# snapshot t=" << t << '\n';
  char buf[64];
  for (const auto& e : snap.edges()) {
    auto res = std::to_chars(buf, buf + sizeof(buf), e.weight);
    out << graph.labels().label(e.u) << ' ' << graph.labels().label(e.v) << ' ' << std::string_view(buf, res.ptr - buf) << '\n';
  }
}

}  // namespace convdysat
