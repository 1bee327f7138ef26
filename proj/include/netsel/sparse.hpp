#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <utility>
#include <vector>

#include "error.hpp"

namespace netsel {

using NodeId = std::uint32_t;
using ItemId = std::uint64_t;

struct SparseEntry {
  ItemId item;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Non-negative sparse vector, entries sorted by item with no stored zeros.
class SparseVector {
public:
  SparseVector() = default;

  SparseVector(std::initializer_list<std::pair<ItemId, double>> init) {
    std::map<ItemId, double> acc;
    for (const auto& [item, value] : init) acc[item] += value;
    for (const auto& [item, value] : acc) push_back_sorted(item, value);
  }

  // Entries must already be sorted by item and unique.
  static SparseVector from_sorted(std::vector<SparseEntry> entries) {
    SparseVector v;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      require(entries[i].value >= 0.0, "sparse vector entry must be non-negative");
      require(i == 0 || entries[i - 1].item < entries[i].item, "sparse vector entries must be sorted and unique");
    }
    std::erase_if(entries, [](const SparseEntry& e) { return e.value == 0.0; });
    v.entries_ = std::move(entries);
    return v;
  }

  static SparseVector from_map(const std::map<ItemId, double>& m) {
    SparseVector v;
    for (const auto& [item, value] : m) v.push_back_sorted(item, value);
    return v;
  }

  void push_back_sorted(ItemId item, double value) {
    require(value >= 0.0, "sparse vector entry must be non-negative");
    require(entries_.empty() || entries_.back().item < item, "sparse vector entries must be pushed in item order");
    if (value != 0.0) entries_.push_back({item, value});
  }

  [[nodiscard]] const std::vector<SparseEntry>& entries() const { return entries_; }
  [[nodiscard]] std::size_t nnz() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  [[nodiscard]] double get(ItemId item) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), item,
                               [](const SparseEntry& e, ItemId i) { return e.item < i; });
    return (it != entries_.end() && it->item == item) ? it->value : 0.0;
  }

  [[nodiscard]] double sum() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value;
    return s;
  }

  [[nodiscard]] double norm2() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value * e.value;
    return std::sqrt(s);
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

private:
  std::vector<SparseEntry> entries_;
};

}  // namespace netsel
