#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edgeset.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace netsel {

// Read-only adjacency over an EdgeSet: out-neighbors (directed sets) and the
// symmetrized undirected view, both sorted by node id.
class Graph {
public:
  Graph() = default;

  explicit Graph(const EdgeSet& g) : n_(g.n_nodes()), directed_(g.directed()) {
    std::vector<std::pair<NodeId, NodeId>> out_pairs, und_pairs;
    for (const auto& e : g.edges()) {
      out_pairs.emplace_back(e.u, e.v);
      und_pairs.emplace_back(e.u, e.v);
      und_pairs.emplace_back(e.v, e.u);
      if (!g.directed()) out_pairs.emplace_back(e.v, e.u);
    }
    build_csr(out_pairs, out_off_, out_adj_);
    build_csr(und_pairs, und_off_, und_adj_);
    for (const auto& e : g.edges()) {
      const auto key = pair_key(e.u, e.v);
      if (und_keys_.insert(key).second) ++und_edges_;
    }
  }

  [[nodiscard]] std::size_t n_nodes() const { return n_; }
  [[nodiscard]] bool directed() const { return directed_; }
  [[nodiscard]] std::size_t undirected_edge_count() const { return und_edges_; }

  // Directed sets: out-neighbors. Undirected sets: all adjacent nodes.
  [[nodiscard]] std::span<const NodeId> neighbors(NodeId i) const {
    check(i);
    return {out_adj_.data() + out_off_[i], out_adj_.data() + out_off_[i + 1]};
  }

  [[nodiscard]] std::span<const NodeId> undirected_neighbors(NodeId i) const {
    check(i);
    return {und_adj_.data() + und_off_[i], und_adj_.data() + und_off_[i + 1]};
  }

  [[nodiscard]] std::size_t degree(NodeId i) const { return undirected_neighbors(i).size(); }

  [[nodiscard]] bool adjacent(NodeId u, NodeId v) const { return und_keys_.contains(pair_key(u, v)); }

private:
  void check(NodeId i) const {
    require(i < n_, "node " + std::to_string(i) + " out of range (n_nodes=" + std::to_string(n_) + ")");
  }

  void build_csr(std::vector<std::pair<NodeId, NodeId>>& pairs, std::vector<std::size_t>& off, std::vector<NodeId>& adj) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    off.assign(n_ + 1, 0);
    for (const auto& p : pairs) ++off[p.first + 1];
    for (std::size_t i = 0; i < n_; ++i) off[i + 1] += off[i];
    adj.resize(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) adj[k] = pairs[k].second;
  }

  std::size_t n_ = 0;
  bool directed_ = false;
  std::vector<std::size_t> out_off_, und_off_;
  std::vector<NodeId> out_adj_, und_adj_;
  std::unordered_set<std::uint64_t> und_keys_;
  std::size_t und_edges_ = 0;
};

inline std::vector<NodeId> neighbors(const Graph& g, NodeId i) {
  auto s = g.neighbors(i);
  return {s.begin(), s.end()};
}

// Induced subgraph on a sorted node set: its edges and the complementary
// non-edges, both as sorted unordered pairs.
struct PairSplit {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<std::pair<NodeId, NodeId>> nonedges;
};

inline PairSplit induced_pairs(const Graph& g, const std::vector<NodeId>& nodes) {
  PairSplit out;
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      auto u = std::min(nodes[a], nodes[b]), v = std::max(nodes[a], nodes[b]);
      (g.adjacent(u, v) ? out.edges : out.nonedges).emplace_back(u, v);
    }
  std::sort(out.edges.begin(), out.edges.end());
  std::sort(out.nonedges.begin(), out.nonedges.end());
  return out;
}

struct Egonet {
  std::vector<NodeId> nodes;  // i and its undirected neighbors, sorted
  PairSplit pairs;
};

// Induced subgraph on {i} and its neighbors, plus its pair complement.
inline Egonet egonet(const Graph& g, NodeId i) {
  Egonet ego;
  auto nb = g.undirected_neighbors(i);
  ego.nodes.assign(nb.begin(), nb.end());
  ego.nodes.push_back(i);
  std::sort(ego.nodes.begin(), ego.nodes.end());
  ego.pairs = induced_pairs(g, ego.nodes);
  return ego;
}

// Breadth-first order from i (excluding i) over the undirected view, each
// depth level emitted in ascending node id, truncated at k nodes.
inline std::vector<NodeId> bfs_neighborhood(const Graph& g, NodeId i, std::size_t k) {
  require(k >= 1, "bfs neighborhood size must be >= 1");
  std::vector<NodeId> order;
  std::vector<std::uint8_t> seen(g.n_nodes(), 0);
  seen.at(i) = 1;
  std::vector<NodeId> level{i};
  while (!level.empty() && order.size() < k) {
    std::vector<NodeId> next;
    for (NodeId u : level)
      for (NodeId v : g.undirected_neighbors(u))
        if (!seen[v]) {
          seen[v] = 1;
          next.push_back(v);
        }
    std::sort(next.begin(), next.end());
    for (NodeId v : next) {
      if (order.size() == k) break;
      order.push_back(v);
    }
    level = std::move(next);
  }
  return order;
}

// Slice sizes: floor of each fraction, remainder handed out one at a time
// starting from the first slice.
inline std::array<std::size_t, 3> split_sizes(std::size_t m, const std::array<double, 3>& fractions) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  require(std::abs(total - 1.0) < 1e-9, "edge split fractions must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::size_t used = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    require(fractions[s] >= 0.0, "edge split fractions must be non-negative");
    sizes[s] = static_cast<std::size_t>(std::floor(fractions[s] * static_cast<double>(m) + 1e-9));
    used += sizes[s];
  }
  for (std::size_t s = 0; used < m; s = (s + 1) % 3, ++used) ++sizes[s];
  return sizes;
}

// Seeded uniform shuffle of the edge list, then contiguous slices.
inline std::array<EdgeSet, 3> split_edges_random(const EdgeSet& g, const std::array<double, 3>& fractions,
                                                 std::uint64_t seed) {
  auto edges = g.edges();
  Rng rng(derive_seed(seed, "edge-split"));
  rng.shuffle(std::span<Edge>(edges));
  const auto sizes = split_sizes(edges.size(), fractions);
  std::array<EdgeSet, 3> out;
  std::size_t start = 0;
  static constexpr std::array<const char*, 3> kNames{"split-training", "split-validation", "split-testing"};
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<Edge> slice(edges.begin() + static_cast<std::ptrdiff_t>(start),
                            edges.begin() + static_cast<std::ptrdiff_t>(start + sizes[s]));
    Provenance prov = g.provenance();
    prov.source = g.provenance().source + ":" + kNames[s];
    out[s] = EdgeSet::build(g.n_nodes(), g.directed(), std::move(slice), prov);
    start += sizes[s];
  }
  return out;
}

// Uniform sample (without replacement) of unordered node pairs absent from
// union_g and from `exclude`. Rejection sampling while the population is
// sparse in requests, full enumeration otherwise.
inline std::vector<std::pair<NodeId, NodeId>> sample_nonedges(const Graph& union_g, std::size_t count, std::uint64_t seed,
                                                               const std::unordered_set<std::uint64_t>& exclude = {}) {
  const std::size_t n = union_g.n_nodes();
  const std::uint64_t all_pairs = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t excluded_nonedges = 0;
  for (auto key : exclude) {
    auto [u, v] = unpack_pair(key);
    if (u != v && u < n && v < n && !union_g.adjacent(u, v)) ++excluded_nonedges;
  }
  const std::uint64_t population = all_pairs - union_g.undirected_edge_count() - excluded_nonedges;
  require(count <= population, "requested " + std::to_string(count) + " non-edges but only " +
                                   std::to_string(population) + " exist");
  std::vector<std::pair<NodeId, NodeId>> out;
  if (count == 0) return out;
  Rng rng(derive_seed(seed, "nonedges"));
  if (count * 4 <= population) {
    std::unordered_set<std::uint64_t> chosen;
    while (out.size() < count) {
      auto u = static_cast<NodeId>(rng.below(n));
      auto v = static_cast<NodeId>(rng.below(n));
      if (u == v || union_g.adjacent(u, v)) continue;
      const auto key = pair_key(u, v);
      if (exclude.contains(key) || !chosen.insert(key).second) continue;
      out.emplace_back(std::min(u, v), std::max(u, v));
    }
    return out;
  }
  std::vector<std::pair<NodeId, NodeId>> pool;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (!union_g.adjacent(u, v) && !exclude.contains(pair_key(u, v))) pool.emplace_back(u, v);
  for (std::size_t t = 0; t < count; ++t) {
    const auto j = t + static_cast<std::size_t>(rng.below(pool.size() - t));
    std::swap(pool[t], pool[j]);
  }
  pool.resize(count);
  return pool;
}

// Non-edges incident to node i: pairs (i, j) absent from union_g and not yet
// in `used`. Returns fewer than `count` only when the population runs out.
inline std::vector<NodeId> sample_incident_nonedges(const Graph& union_g, NodeId i, std::size_t count, Rng& rng,
                                                    const std::unordered_set<std::uint64_t>& used) {
  const std::size_t n = union_g.n_nodes();
  std::vector<NodeId> out;
  if (count == 0 || n < 2) return out;
  std::unordered_set<NodeId> chosen;
  std::size_t attempts = 0;
  const std::size_t budget = 64 * count + 256;
  while (out.size() < count && attempts < budget) {
    ++attempts;
    auto j = static_cast<NodeId>(rng.below(n));
    if (j == i || union_g.adjacent(i, j) || used.contains(pair_key(i, j)) || !chosen.insert(j).second) continue;
    out.push_back(j);
  }
  if (out.size() < count) {
    std::vector<NodeId> pool;
    for (NodeId j = 0; j < n; ++j)
      if (j != i && !union_g.adjacent(i, j) && !used.contains(pair_key(i, j)) && !chosen.contains(j)) pool.push_back(j);
    for (std::size_t t = 0; t < pool.size() && out.size() < count; ++t) {
      const auto s = t + static_cast<std::size_t>(rng.below(pool.size() - t));
      std::swap(pool[t], pool[s]);
      out.push_back(pool[t]);
    }
  }
  return out;
}

}  // namespace netsel
