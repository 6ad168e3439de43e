#include "convdysat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "convdysat/error.hpp"
#include "convdysat/random.hpp"

namespace convdysat {
namespace {

struct Draft {
  NodeId u;
  NodeId v;
  int bin;
};

// Spreads each bin's records evenly inside [bin, bin + 1) and pins the extremes.
std::vector<EdgeRecord> finish(std::vector<Draft> drafts, int steps, const std::string& prefix) {
  if (drafts.empty()) throw DomainError("synthetic dataset is empty");
  std::stable_sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) { return a.bin < b.bin; });
  std::vector<std::size_t> per_bin(static_cast<std::size_t>(steps), 0);
  for (const auto& d : drafts) ++per_bin[static_cast<std::size_t>(d.bin)];
  if (per_bin.front() == 0 || per_bin.back() == 0) throw DomainError("synthetic dataset leaves the first or last bin empty");

  std::vector<EdgeRecord> out;
  out.reserve(drafts.size());
  std::vector<std::size_t> seen(per_bin.size(), 0);
  for (const auto& d : drafts) {
    const auto b = static_cast<std::size_t>(d.bin);
    const double offset = static_cast<double>(seen[b]++) / static_cast<double>(per_bin[b]);
    out.push_back({prefix + std::to_string(d.u), prefix + std::to_string(d.v), 1.0, d.bin + offset});
  }
  out.front().timestamp = 0.0;
  out.back().timestamp = static_cast<double>(steps);
  return out;
}

bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

}  // namespace

std::vector<EdgeRecord> toy_dataset() {
  constexpr int kSteps = 4;
  Rng rng = make_rng({0x70, 12});
  std::vector<Draft> drafts;
  for (int b = 0; b < kSteps; ++b) {
    for (NodeId g = 0; g < 4; ++g) {
      // Each triangle keeps at least two of its three sides.
      const auto dropped = static_cast<int>(std::uniform_int_distribution<int>(0, 5)(rng));
      int side = 0;
      for (NodeId i = 0; i < 3; ++i) {
        for (NodeId j = i + 1; j < 3; ++j, ++side) {
          if (side != dropped) drafts.push_back({3 * g + i, 3 * g + j, b});
        }
      }
    }
    // One bridge between neighbouring groups, moving every step.
    const auto g = static_cast<NodeId>(b % 4);
    drafts.push_back({3 * g + static_cast<NodeId>(b % 3), 3 * ((g + 1) % 4) + static_cast<NodeId>((b + 1) % 3), b});
  }
  return finish(std::move(drafts), kSteps, "n");
}

std::vector<EdgeRecord> random_graph_dataset(std::size_t nodes, int steps, double p, std::uint64_t seed) {
  if (nodes < 2 || steps < 1 || !(p > 0.0 && p <= 1.0)) throw DomainError("random_graph_dataset: bad arguments");
  std::vector<Draft> drafts;
  for (int b = 0; b < steps; ++b) {
    Rng rng = make_rng({seed, static_cast<std::uint64_t>(b)});
    for (NodeId u = 0; u < nodes; ++u) {
      for (NodeId v = u + 1; v < nodes; ++v) {
        if (coin(rng, p)) drafts.push_back({u, v, b});
      }
    }
  }
  return finish(std::move(drafts), steps, "");
}

std::vector<EdgeRecord> persistence_dataset(std::size_t nodes, int steps, std::size_t groups, double p_in,
                                            double p_out, std::uint64_t seed) {
  if (nodes < 2 || steps < 1 || groups < 1) throw DomainError("persistence_dataset: bad arguments");
  Rng rng = make_rng({seed});
  std::vector<std::pair<NodeId, NodeId>> links;
  for (NodeId u = 0; u < nodes; ++u) {
    for (NodeId v = u + 1; v < nodes; ++v) {
      if (coin(rng, u % groups == v % groups ? p_in : p_out)) links.push_back({u, v});
    }
  }
  std::vector<Draft> drafts;
  for (int b = 0; b < steps; ++b) {
    for (auto [u, v] : links) drafts.push_back({u, v, b});
  }
  return finish(std::move(drafts), steps, "");
}

std::vector<EdgeRecord> email_like_dataset(const EmailLikeOptions& o) {
  if (o.nodes < 4 || o.steps < 2 || o.communities < 1 || o.interactions < o.nodes) {
    throw DomainError("email_like_dataset: bad arguments");
  }
  Rng rng = make_rng({o.seed});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = o.nodes;
  const auto steps = static_cast<std::size_t>(o.steps);

  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> community(n);
  std::vector<std::vector<NodeId>> members(o.communities);
  for (std::size_t i = 0; i < n; ++i) {
    community[perm[i]] = i % o.communities;
    members[i % o.communities].push_back(perm[i]);
  }
  // Zipf-like activity; rank order is the random permutation.
  std::vector<double> activity(n);
  for (std::size_t i = 0; i < n; ++i) activity[perm[i]] = std::pow(static_cast<double>(i + 1), -0.9);

  // Active period per node; outside it the node still mails, but rarely.
  std::vector<std::size_t> first(n), last(n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t len = steps / 2 + static_cast<std::size_t>(unit(rng) * static_cast<double>(steps / 2 + 1));
    first[v] = static_cast<std::size_t>(unit(rng) * static_cast<double>(steps - std::min(len, steps) + 1));
    last[v] = std::min(steps, first[v] + len) - 1;
  }

  auto random_peer = [&](NodeId v) {
    for (;;) {
      NodeId u;
      if (coin(rng, o.in_community)) {
        const auto& group = members[community[v]];
        u = group[static_cast<std::size_t>(unit(rng) * static_cast<double>(group.size())) % group.size()];
      } else {
        u = static_cast<NodeId>(static_cast<std::size_t>(unit(rng) * static_cast<double>(n)) % n);
      }
      if (u != v) return u;
    }
  };
  std::vector<std::vector<NodeId>> contacts(n);
  std::vector<std::vector<double>> contact_weight(n);
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t k = 2 + static_cast<std::size_t>(6.0 * std::sqrt(activity[v] / activity[perm[0]]) + 3.0 * unit(rng));
    for (std::size_t i = 0; i < k; ++i) {
      const NodeId u = random_peer(v);
      if (std::find(contacts[v].begin(), contacts[v].end(), u) != contacts[v].end()) continue;
      contacts[v].push_back(u);
      contact_weight[v].push_back(std::pow(unit(rng) + 0.05, 2.0));
    }
  }

  // Volume ramps up over the period.
  std::vector<double> bin_weight(steps);
  for (std::size_t b = 0; b < steps; ++b) bin_weight[b] = 0.5 + static_cast<double>(b) / static_cast<double>(steps);
  std::discrete_distribution<std::size_t> pick_bin(bin_weight.begin(), bin_weight.end());
  std::vector<std::discrete_distribution<std::size_t>> pick_sender;
  for (std::size_t b = 0; b < steps; ++b) {
    std::vector<double> w(n);
    for (std::size_t v = 0; v < n; ++v) w[v] = activity[v] * (b >= first[v] && b <= last[v] ? 1.0 : 0.05);
    pick_sender.emplace_back(w.begin(), w.end());
  }

  std::vector<Draft> drafts;
  drafts.reserve(o.interactions);
  for (std::size_t i = 0; i < o.interactions; ++i) {
    NodeId sender;
    int bin;
    if (i < n) {
      // Every node sends at least once, inside its active period.
      sender = perm[i];
      bin = static_cast<int>(first[sender] + static_cast<std::size_t>(unit(rng) * static_cast<double>(last[sender] - first[sender] + 1)));
    } else if (i == n) {
      sender = perm[0];
      bin = 0;
    } else if (i == n + 1) {
      sender = perm[0];
      bin = o.steps - 1;
    } else {
      bin = static_cast<int>(pick_bin(rng));
      sender = static_cast<NodeId>(pick_sender[static_cast<std::size_t>(bin)](rng));
    }
    NodeId recipient;
    if (!contacts[sender].empty() && coin(rng, o.repeat_contact)) {
      std::discrete_distribution<std::size_t> pick(contact_weight[sender].begin(), contact_weight[sender].end());
      recipient = contacts[sender][pick(rng)];
    } else {
      recipient = random_peer(sender);
    }
    drafts.push_back({sender, recipient, bin});
  }
  return finish(std::move(drafts), o.steps, "e");
}

void write_edge_list(std::ostream& out, const std::vector<EdgeRecord>& records) {
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), " %.17g %.17g\n", r.weight, r.timestamp);
    out << r.source << ' ' << r.target << buf;
  }
}

}  // namespace convdysat
