#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "data.hpp"
#include "edgeset.hpp"
#include "rng.hpp"

namespace netsel {

// Two latent structures over the same nodes:
//  - label communities: members share a block of "label" items, derive the
//    same labelset, and are wired together by the homophily graph;
//  - a ring: nodes at nearby ring positions share a window of "edge" items
//    and are wired together by the formation graph.
// Label items partly drift between time segments (persistent part plus one
// part per segment); edge items do not.
struct PlantSpec {
  std::size_t label_communities = 5;
  double label_item_fraction = 0.5;
  std::size_t label_items_per_node = 8;
  double label_drift = 0.8;
  double label_value_min = 5.0;
  double label_value_max = 8.0;
  std::size_t homophily_degree = 10;

  std::size_t formation_degree = 10;
  std::size_t edge_window = 6;
  double edge_item_rate = 0.8;
  double edge_value_min = 10.0;
  double edge_value_max = 40.0;
  double rewire = 0.0;

  double noise = 0.1;
  double noise_value_max = 3.0;
  std::int64_t segment_length = 1000;

  std::size_t label_min_count = 4;
  double label_min_value = 5.0;
};

struct SynthData {
  EventLog log;
  EdgeSet homophily;
  EdgeSet formation;
  std::vector<LabelRule> rules;
  std::vector<std::uint32_t> label_community;
  std::vector<std::uint32_t> ring_position;
  std::array<std::int64_t, 2> boundaries{};
};

namespace detail {

// Contiguous block [begin, end) split into `parts` near-equal slices.
inline std::vector<std::pair<ItemId, ItemId>> slices(ItemId begin, ItemId end, std::size_t parts) {
  std::vector<std::pair<ItemId, ItemId>> out;
  const ItemId len = end - begin;
  for (std::size_t p = 0; p < parts; ++p)
    out.emplace_back(begin + len * p / parts, begin + len * (p + 1) / parts);
  return out;
}

}  // namespace detail

inline SynthData synth_generate(std::uint64_t seed, std::size_t n_nodes, std::size_t n_items, const PlantSpec& plant) {
  require(n_nodes >= 10, "synthetic datasets need at least 10 nodes");
  require(n_items >= 1, "synthetic datasets need at least one item");
  require(plant.label_communities >= 1, "plant needs at least one label community");
  require(plant.label_item_fraction >= 0.0 && plant.label_item_fraction <= 1.0, "label_item_fraction must lie in [0, 1]");
  require(plant.label_drift >= 0.0 && plant.label_drift <= 1.0, "label_drift must lie in [0, 1]");

  SynthData out;
  const std::size_t n = n_nodes;
  const auto label_items = static_cast<ItemId>(std::llround(plant.label_item_fraction * static_cast<double>(n_items)));
  const ItemId edge_begin = label_items;
  const ItemId edge_items = n_items - label_items;

  // Latent assignments.
  {
    Rng rng(derive_seed(seed, "synth-communities"));
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(std::span<NodeId>(order));
    out.label_community.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) out.label_community[order[k]] = static_cast<std::uint32_t>(k % plant.label_communities);
    rng.shuffle(std::span<NodeId>(order));
    out.ring_position.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) out.ring_position[order[k]] = static_cast<std::uint32_t>(k);
  }

  const auto groups = detail::slices(0, label_items, plant.label_communities);
  for (std::size_t c = 0; c < plant.label_communities; ++c) {
    LabelRule rule;
    rule.name = "label" + std::to_string(c);
    rule.kind = LabelRuleKind::ItemSetThreshold;
    for (ItemId it = groups[c].first; it < groups[c].second; ++it) rule.item_group.insert(it);
    rule.min_count = plant.label_min_count;
    rule.min_value = plant.label_min_value;
    out.rules.push_back(std::move(rule));
  }

  // Events.
  Rng rng(derive_seed(seed, "synth-events"));
  auto int_value = [&](double lo, double hi) {
    return static_cast<double>(rng.between(static_cast<std::int64_t>(std::llround(lo)), static_cast<std::int64_t>(std::llround(hi))));
  };
  out.log.original_ids.resize(n);
  std::iota(out.log.original_ids.begin(), out.log.original_ids.end(), 0u);
  for (std::size_t s = 0; s < 3; ++s) {
    const std::int64_t t0 = static_cast<std::int64_t>(s) * plant.segment_length;
    auto stamp = [&] { return t0 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(plant.segment_length))); };
    for (NodeId i = 0; i < n; ++i) {
      std::vector<Event> planted;
      // Label items: persistent part 0, segment-specific part s + 1.
      const auto parts = detail::slices(groups[out.label_community[i]].first, groups[out.label_community[i]].second, 4);
      std::vector<ItemId> persistent, current;
      for (ItemId it = parts[0].first; it < parts[0].second; ++it) persistent.push_back(it);
      for (ItemId it = parts[s + 1].first; it < parts[s + 1].second; ++it) current.push_back(it);
      rng.shuffle(std::span<ItemId>(persistent));
      rng.shuffle(std::span<ItemId>(current));
      std::size_t used_p = 0, used_c = 0;
      for (std::size_t k = 0; k < plant.label_items_per_node; ++k) {
        const bool drift = rng.bernoulli(plant.label_drift);
        ItemId item = 0;
        if ((drift && used_c < current.size()) || (!drift && used_p >= persistent.size() && used_c < current.size()))
          item = current[used_c++];
        else if (used_p < persistent.size())
          item = persistent[used_p++];
        else
          break;
        planted.push_back({i, item, int_value(plant.label_value_min, plant.label_value_max), stamp()});
      }
      // Edge items: a window around the node's ring position.
      if (edge_items > 0) {
        const auto center = static_cast<std::int64_t>(static_cast<std::uint64_t>(out.ring_position[i]) * edge_items / n);
        const auto w = static_cast<std::int64_t>(plant.edge_window);
        const std::int64_t span = std::min<std::int64_t>(2 * w + 1, static_cast<std::int64_t>(edge_items));
        for (std::int64_t off = -w; off < -w + span; ++off) {
          if (!rng.bernoulli(plant.edge_item_rate)) continue;
          const auto e = static_cast<std::int64_t>(edge_items);
          const ItemId item = edge_begin + static_cast<ItemId>(((center + off) % e + e) % e);
          const double decay = 1.0 - static_cast<double>(std::abs(off)) / static_cast<double>(w + 1);
          const double v = std::max(1.0, std::round(decay * int_value(plant.edge_value_min, plant.edge_value_max)));
          planted.push_back({i, item, v, stamp()});
        }
      }
      const auto noise_count = static_cast<std::size_t>(std::llround(plant.noise * static_cast<double>(planted.size())));
      for (std::size_t k = 0; k < noise_count; ++k)
        planted.push_back({i, static_cast<ItemId>(rng.below(n_items)), int_value(1.0, plant.noise_value_max), stamp()});
      if (planted.empty())
        planted.push_back({i, static_cast<ItemId>(rng.below(n_items)), int_value(1.0, plant.noise_value_max), stamp()});
      out.log.records.insert(out.log.records.end(), planted.begin(), planted.end());
    }
  }
  std::sort(out.log.records.begin(), out.log.records.end(), [](const Event& a, const Event& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.node != b.node) return a.node < b.node;
    return a.item < b.item;
  });
  out.boundaries = {plant.segment_length, 2 * plant.segment_length};

  // Homophily graph: G(n_c, p) inside each label community.
  {
    Rng grng(derive_seed(seed, "synth-homophily"));
    std::vector<std::vector<NodeId>> members(plant.label_communities);
    for (NodeId i = 0; i < n; ++i) members[out.label_community[i]].push_back(i);
    std::vector<Edge> edges;
    for (const auto& m : members) {
      if (m.size() < 2) continue;
      const double p = std::min(1.0, static_cast<double>(plant.homophily_degree) / static_cast<double>(m.size() - 1));
      for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = a + 1; b < m.size(); ++b)
          if (grng.bernoulli(p)) edges.push_back({m[a], m[b], 1.0});
    }
    out.homophily = EdgeSet::build(n, false, std::move(edges), Provenance{"EXPLICIT", "", 0, "homophily", 0, 0});
  }
  // Formation graph: ring lattice over ring positions, optionally rewired.
  {
    Rng grng(derive_seed(seed, "synth-formation"));
    std::vector<NodeId> at(n);
    for (NodeId i = 0; i < n; ++i) at[out.ring_position[i]] = i;
    std::vector<Edge> edges;
    const std::size_t half = std::max<std::size_t>(1, plant.formation_degree / 2);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t d = 1; d <= half && d < n; ++d) {
        NodeId u = at[p], v = at[(p + d) % n];
        if (grng.bernoulli(plant.rewire)) {
          u = static_cast<NodeId>(grng.below(n));
          v = static_cast<NodeId>(grng.below(n));
        }
        edges.push_back({u, v, 1.0});
      }
    out.formation = EdgeSet::build(n, false, std::move(edges), Provenance{"EXPLICIT", "", 0, "formation", 0, 0});
  }
  return out;
}

}  // namespace netsel
