#include "convdysat/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "convdysat/error.hpp"

namespace convdysat {

void WalkConfig::validate() const {
  if (walks_per_node == 0 || walk_length == 0 || window == 0) {
    throw InputError("walk config: walks_per_node, walk_length and window must be positive");
  }
  if (window > walk_length) throw InputError("walk config: window must not exceed walk_length");
}

std::vector<Walk> random_walks(const Snapshot& snapshot, const WalkConfig& cfg) {
  cfg.validate();
  const std::size_t n = snapshot.node_count();
  std::vector<Walk> walks;
  walks.reserve(n * cfg.walks_per_node);
  std::vector<double> cumulative;
  for (NodeId start = 0; start < n; ++start) {
    for (std::size_t w = 0; w < cfg.walks_per_node; ++w) {
      Rng rng = make_rng({cfg.seed, start, w});
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      Walk walk;
      walk.reserve(cfg.walk_length);
      NodeId current = start;
      walk.push_back(current);
      while (walk.size() < cfg.walk_length) {
        const auto adj = snapshot.adjacency(current);
        cumulative.resize(adj.size());
        double total = 0.0;
        for (std::size_t i = 0; i < adj.size(); ++i) cumulative[i] = (total += adj[i].weight);
        const double r = unit(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        if (it == cumulative.end()) --it;
        current = adj[static_cast<std::size_t>(it - cumulative.begin())].node;
        walk.push_back(current);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

std::vector<ContextPair> context_pairs(std::span<const Walk> walks, std::size_t window) {
  std::vector<ContextPair> pairs;
  for (const auto& walk : walks) {
    for (std::size_t i = 0; i < walk.size(); ++i) {
      const std::size_t lo = i >= window ? i - window : 0;
      const std::size_t hi = std::min(walk.size() - 1, i + window);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j != i && walk[i] != walk[j]) pairs.push_back({walk[i], walk[j]});
      }
    }
  }
  return pairs;
}

std::vector<ContextPair> limit_contexts_per_node(std::span<const ContextPair> pairs, std::size_t max_per_node,
                                                 Rng& rng) {
  std::map<NodeId, std::vector<ContextPair>> groups;
  for (const auto& p : pairs) groups[p.center].push_back(p);
  std::vector<ContextPair> out;
  for (auto& [center, group] : groups) {
    if (max_per_node == 0 || group.size() <= max_per_node) {
      out.insert(out.end(), group.begin(), group.end());
      continue;
    }
    // Partial Fisher-Yates picks which positions survive; keep them in original order.
    std::vector<std::size_t> idx(group.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < max_per_node; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(max_per_node);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) out.push_back(group[i]);
  }
  return out;
}

NegativeTable NegativeTable::from_degrees(std::span<const double> degrees, double power) {
  NegativeTable table;
  table.cumulative_.reserve(degrees.size());
  double total = 0.0;
  for (double d : degrees) {
    if (d < 0.0) throw DomainError("negative table: degrees must be non-negative");
    total += d > 0.0 ? std::pow(d, power) : 0.0;
    table.cumulative_.push_back(total);
  }
  if (!(total > 0.0)) throw DomainError("negative table: all degrees are zero");
  return table;
}

NegativeTable NegativeTable::from_snapshot(const Snapshot& snapshot, double power) {
  std::vector<double> degrees(snapshot.node_count());
  for (NodeId v = 0; v < degrees.size(); ++v) degrees[v] = snapshot.degree(v);
  return from_degrees(degrees, power);
}

double NegativeTable::probability(NodeId v) const {
  const double prev = v == 0 ? 0.0 : cumulative_.at(v - 1);
  return (cumulative_.at(v) - prev) / cumulative_.back();
}

NodeId NegativeTable::draw(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = unit(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  if (it == cumulative_.end()) --it;
  return static_cast<NodeId>(it - cumulative_.begin());
}

std::vector<NodeId> sample_negatives(const NegativeTable& table, std::size_t count, Rng& rng) {
  if (table.cumulative_weights().empty()) throw DomainError("sample_negatives: empty negative table");
  std::vector<NodeId> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(table.draw(rng));
  return out;
}

void write_walk_corpus(std::ostream& out, std::span<const Walk> walks, const LabelMap& labels) {
  for (const auto& walk : walks) {
    for (std::size_t i = 0; i < walk.size(); ++i) {
      if (i) out << ' ';
      out << labels.label(walk[i]);
    }
    out << '\n';
  }
}

}  // namespace convdysat
