#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "edgeset.hpp"
#include "rng.hpp"

namespace netsel {

struct CommunityAssignment {
  std::vector<std::uint32_t> labels;  // dense ids, numbered by first appearance over node ids
  double modularity = 0.0;

  [[nodiscard]] std::size_t community_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }

  [[nodiscard]] std::vector<NodeId> members(std::uint32_t c) const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < labels.size(); ++i)
      if (labels[i] == c) out.push_back(i);
    return out;
  }
};

// Q = sum_c ( e_c / m - resolution * (d_c / 2m)^2 ) over the symmetrized,
// weighted graph. Empty graphs score 0.
inline double modularity(const EdgeSet& g, const std::vector<std::uint32_t>& labels, double resolution = 1.0) {
  require(labels.size() == g.n_nodes(), "community labels must cover every node");
  const EdgeSet und = g.symmetrized();
  double m = 0.0;
  for (const auto& e : und.edges()) m += e.weight;
  if (m <= 0.0) return 0.0;
  const std::size_t k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<double> internal(k, 0.0), degree(k, 0.0);
  for (const auto& e : und.edges()) {
    if (labels[e.u] == labels[e.v]) internal[labels[e.u]] += e.weight;
    degree[labels[e.u]] += e.weight;
    degree[labels[e.v]] += e.weight;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double frac = degree[c] / (2.0 * m);
    q += internal[c] / m - resolution * frac * frac;
  }
  return q;
}

namespace detail {

// Weighted undirected multigraph level used during aggregation.
struct LouvainLevel {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;  // no self entries
  std::vector<double> self;                                         // internal weight per node
};

inline std::vector<std::uint32_t> renumber(const std::vector<std::uint32_t>& comm) {
  std::unordered_map<std::uint32_t, std::uint32_t> ids;
  std::vector<std::uint32_t> out(comm.size());
  for (std::size_t i = 0; i < comm.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(comm[i], static_cast<std::uint32_t>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

}  // namespace detail

struct LouvainOptions {
  std::uint64_t seed = 0;
  double resolution = 1.0;
  double min_gain = 1e-7;
  // Called after every aggregation phase with the phase index and the
  // modularity of the flattened assignment on the input graph.
  std::function<void(std::size_t, double)> on_phase;
};

// Two-phase Louvain: seeded-order local moves until no move gains more than
// min_gain, then aggregation, repeated until a phase changes nothing.
inline CommunityAssignment louvain(const EdgeSet& g, const LouvainOptions& opt = {}) {
  const EdgeSet und = g.symmetrized();
  const std::size_t n = und.n_nodes();
  CommunityAssignment result;
  result.labels.resize(n);
  std::iota(result.labels.begin(), result.labels.end(), 0u);
  double m = 0.0;
  for (const auto& e : und.edges()) {
    require(e.weight >= 0.0, "louvain needs non-negative edge weights");
    m += e.weight;
  }
  if (n == 0 || m <= 0.0) {
    result.modularity = modularity(und, result.labels, opt.resolution);
    return result;
  }

  detail::LouvainLevel level;
  level.adj.resize(n);
  level.self.assign(n, 0.0);
  for (const auto& e : und.edges()) {
    level.adj[e.u].push_back({e.v, e.weight});
    level.adj[e.v].push_back({e.u, e.weight});
  }

  std::vector<std::uint32_t> node_level(result.labels);
  Rng rng(derive_seed(opt.seed, "louvain"));
  std::size_t phase = 0;
  while (true) {
    const std::size_t ln = level.adj.size();
    std::vector<double> k(ln, 0.0);
    for (std::size_t i = 0; i < ln; ++i) {
      k[i] = 2.0 * level.self[i];
      for (const auto& [j, w] : level.adj[i]) k[i] += w;
    }
    std::vector<std::uint32_t> comm(ln);
    std::iota(comm.begin(), comm.end(), 0u);
    std::vector<double> tot(k);

    std::vector<double> link(ln, 0.0);
    std::vector<std::uint32_t> touched;
    bool any_move = false;
    while (true) {
      std::vector<std::uint32_t> order(ln);
      std::iota(order.begin(), order.end(), 0u);
      rng.shuffle(std::span<std::uint32_t>(order));
      bool moved = false;
      for (auto i : order) {
        const auto own = comm[i];
        touched.clear();
        for (const auto& [j, w] : level.adj[i]) {
          const auto c = comm[j];
          if (link[c] == 0.0) touched.push_back(c);
          link[c] += w;
        }
        tot[own] -= k[i];
        auto gain = [&](std::uint32_t c) { return link[c] / m - opt.resolution * tot[c] * k[i] / (2.0 * m * m); };
        const double own_gain = gain(own);
        std::uint32_t best = own;
        double best_gain = own_gain;
        for (auto c : touched) {
          const double gc = gain(c);
          if (gc > best_gain) {
            best = c;
            best_gain = gc;
          }
        }
        if (best != own && best_gain - own_gain > opt.min_gain) {
          comm[i] = best;
          moved = true;
          any_move = true;
        }
        tot[comm[i]] += k[i];
        for (auto c : touched) link[c] = 0.0;
      }
      if (!moved) break;
    }
    if (!any_move) break;

    const auto dense = detail::renumber(comm);
    for (auto& lab : node_level) lab = dense[lab];

    const std::size_t nc = *std::max_element(dense.begin(), dense.end()) + 1;
    detail::LouvainLevel next;
    next.adj.resize(nc);
    next.self.assign(nc, 0.0);
    std::vector<std::unordered_map<std::uint32_t, double>> acc(nc);
    for (std::size_t i = 0; i < ln; ++i) {
      next.self[dense[i]] += level.self[i];
      for (const auto& [j, w] : level.adj[i]) {
        if (dense[i] == dense[j]) {
          if (i < j) next.self[dense[i]] += w;
        } else {
          acc[dense[i]][dense[j]] += w;
        }
      }
    }
    for (std::size_t c = 0; c < nc; ++c) {
      next.adj[c].assign(acc[c].begin(), acc[c].end());
      std::sort(next.adj[c].begin(), next.adj[c].end());
    }
    level = std::move(next);
    if (opt.on_phase) opt.on_phase(phase, modularity(und, node_level, opt.resolution));
    ++phase;
    if (nc == ln) break;
  }
  result.labels = detail::renumber(node_level);
  result.modularity = modularity(und, result.labels, opt.resolution);
  return result;
}

}  // namespace netsel
