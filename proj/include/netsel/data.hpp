#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "sparse.hpp"

namespace netsel {

// ---------------------------------------------------------------------------
// Events

struct Event {
  NodeId node;  // dense id
  ItemId item;
  double value;
  std::int64_t timestamp;

  friend bool operator==(const Event&, const Event&) = default;
};

// Timestamped attribute events over a dense node universe. original_ids[i]
// is the id node i carried in the source file.
struct EventLog {
  std::vector<Event> records;
  std::vector<std::uint64_t> original_ids;

  [[nodiscard]] std::size_t n_nodes() const { return original_ids.size(); }
  [[nodiscard]] std::size_t size() const { return records.size(); }
};

enum class EventFormat { Tsv, Csv };

inline EventFormat parse_event_format(std::string_view s) {
  if (s == "tsv") return EventFormat::Tsv;
  if (s == "csv") return EventFormat::Csv;
  throw Error("unknown event format '" + std::string(s) + "' (expected tsv or csv)");
}

struct IngestOptions {
  EventFormat format = EventFormat::Tsv;
  bool header = false;
  bool strict = false;
};

struct IngestResult {
  EventLog log;
  std::size_t rejected = 0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

// Parse an event stream. Malformed lines are skipped and counted unless
// options.strict, in which case the first one is fatal.
inline IngestResult ingest_events(std::istream& in, const IngestOptions& options) {
  IngestResult result;
  std::unordered_map<std::uint64_t, NodeId> dense;
  const char sep = options.format == EventFormat::Tsv ? '\t' : ',';
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && options.header) continue;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line, sep);
    std::uint64_t node = 0, item = 0;
    double value = 0.0;
    std::int64_t ts = 0;
    const bool ok = fields.size() == 4 && detail::parse_number(fields[0], node) &&
                    detail::parse_number(fields[1], item) && detail::parse_number(fields[2], value) &&
                    detail::parse_number(fields[3], ts) && value >= 0.0;
    if (!ok) {
      if (options.strict) throw Error("malformed event at line " + std::to_string(line_no) + ": " + line);
      ++result.rejected;
      continue;
    }
    auto [it, inserted] = dense.try_emplace(node, static_cast<NodeId>(result.log.original_ids.size()));
    if (inserted) result.log.original_ids.push_back(node);
    result.log.records.push_back({it->second, item, value, ts});
  }
  return result;
}

inline IngestResult ingest_events(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read events file: " + path.string());
  return ingest_events(in, options);
}

// ---------------------------------------------------------------------------
// Attribute matrix

class AttributeMatrix {
public:
  AttributeMatrix() = default;
  AttributeMatrix(std::size_t n_nodes) : rows_(n_nodes) {}
  explicit AttributeMatrix(std::vector<SparseVector> rows) : rows_(std::move(rows)) {}

  [[nodiscard]] std::size_t n_nodes() const { return rows_.size(); }
  [[nodiscard]] const SparseVector& row(NodeId i) const {
    require(i < rows_.size(), "attribute row out of range");
    return rows_[i];
  }
  [[nodiscard]] const std::vector<SparseVector>& rows() const { return rows_; }

  [[nodiscard]] std::set<ItemId> item_dictionary() const {
    std::set<ItemId> items;
    for (const auto& r : rows_)
      for (const auto& e : r) items.insert(e.item);
    return items;
  }

  [[nodiscard]] double total() const {
    double s = 0.0;
    for (const auto& r : rows_) s += r.sum();
    return s;
  }

private:
  std::vector<SparseVector> rows_;
};

enum class Aggregation { Sum, Mean };

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "sum") return Aggregation::Sum;
  if (s == "mean") return Aggregation::Mean;
  throw Error("unknown aggregation '" + std::string(s) + "' (expected sum or mean)");
}

// Aggregate events per (node, item): play counts sum, ratings average.
template <typename EventRange>
AttributeMatrix build_matrix(std::size_t n_nodes, const EventRange& events, Aggregation agg) {
  std::vector<std::map<ItemId, std::pair<double, std::size_t>>> acc(n_nodes);
  for (const Event& e : events) {
    require(e.node < n_nodes, "event node out of range");
    auto& slot = acc[e.node][e.item];
    slot.first += e.value;
    ++slot.second;
  }
  std::vector<SparseVector> rows(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    for (const auto& [item, sc] : acc[i]) {
      const double v = agg == Aggregation::Sum ? sc.first : sc.first / static_cast<double>(sc.second);
      rows[i].push_back_sorted(item, v);
    }
  }
  return AttributeMatrix(std::move(rows));
}

// ---------------------------------------------------------------------------
// Labels

enum class LabelRuleKind { ItemThreshold, ItemSetThreshold };

struct LabelRule {
  std::string name;
  LabelRuleKind kind = LabelRuleKind::ItemSetThreshold;
  std::set<ItemId> item_group;
  std::size_t min_count = 5;
  double min_value = 5.0;
};

class LabelSetCollection {
public:
  LabelSetCollection() = default;
  LabelSetCollection(std::size_t n_nodes, std::vector<std::string> names, std::vector<std::vector<std::uint8_t>> sets)
      : n_nodes_(n_nodes), names_(std::move(names)), sets_(std::move(sets)) {
    require(names_.size() == sets_.size(), "labelset names and vectors differ in count");
    for (const auto& s : sets_) {
      require(s.size() == n_nodes_, "labelset length must equal n_nodes");
      for (auto v : s) require(v <= 1, "label entries must be 0 or 1");
    }
  }

  [[nodiscard]] std::size_t n_nodes() const { return n_nodes_; }
  [[nodiscard]] std::size_t size() const { return sets_.size(); }
  [[nodiscard]] const std::string& name(std::size_t l) const { return names_.at(l); }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] const std::vector<std::uint8_t>& labels(std::size_t l) const { return sets_.at(l); }
  [[nodiscard]] std::uint8_t at(std::size_t l, NodeId i) const { return sets_.at(l).at(i); }

  friend bool operator==(const LabelSetCollection&, const LabelSetCollection&) = default;

private:
  std::size_t n_nodes_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<std::uint8_t>> sets_;
};

// Node i is positive for a rule iff at least min_count items of the group
// carry a row value >= min_value.
inline LabelSetCollection derive_labels(const AttributeMatrix& matrix, const std::vector<LabelRule>& rules) {
  std::vector<std::string> names;
  std::vector<std::vector<std::uint8_t>> sets;
  for (const auto& rule : rules) {
    require(rule.min_count >= 1, "label rule '" + rule.name + "' needs min_count >= 1");
    std::vector<std::uint8_t> labels(matrix.n_nodes(), 0);
    for (NodeId i = 0; i < matrix.n_nodes(); ++i) {
      std::size_t hits = 0;
      for (const auto& e : matrix.row(i))
        if (e.value >= rule.min_value && rule.item_group.contains(e.item)) ++hits;
      labels[i] = hits >= rule.min_count ? 1 : 0;
    }
    names.push_back(rule.name);
    sets.push_back(std::move(labels));
  }
  return LabelSetCollection(matrix.n_nodes(), std::move(names), std::move(sets));
}

// ---------------------------------------------------------------------------
// Temporal partitions

enum class Role { Validation, Training, Testing };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::Validation: return "validation";
    case Role::Training: return "training";
    case Role::Testing: return "testing";
  }
  return "?";
}

inline Role parse_role(std::string_view s) {
  if (s == "validation") return Role::Validation;
  if (s == "training") return Role::Training;
  if (s == "testing") return Role::Testing;
  throw Error("unknown partition role '" + std::string(s) + "'");
}

enum class PartitionMode { EqualFrequency, ExplicitBoundaries };

struct PartitionOptions {
  PartitionMode mode = PartitionMode::EqualFrequency;
  std::optional<std::array<std::int64_t, 2>> boundaries;
  // Role of each time segment, earliest first.
  std::array<Role, 3> roles{Role::Validation, Role::Training, Role::Testing};
  Aggregation aggregation = Aggregation::Sum;
};

struct Partition {
  Role role;
  AttributeMatrix matrix;
  LabelSetCollection labels;
  std::size_t event_count = 0;
  double value_total = 0.0;
};

// Three contiguous half-open time segments [-inf, b0), [b0, b1), [b1, +inf).
struct PartitionedDataset {
  std::array<Partition, 3> segments;
  std::array<std::int64_t, 2> boundaries{};
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t n_nodes() const { return segments[0].matrix.n_nodes(); }

  [[nodiscard]] const Partition& by_role(Role r) const {
    for (const auto& s : segments)
      if (s.role == r) return s;
    throw Error("partition role missing: " + std::string(to_string(r)));
  }
};

// Equal-frequency boundaries sit just after the timestamp holding the 1/3 and
// 2/3 quantile event, so events sharing a timestamp never straddle segments.
inline std::array<std::int64_t, 2> equal_frequency_boundaries(const EventLog& log) {
  require(!log.records.empty(), "equal-frequency partitioning needs a non-empty event log");
  std::vector<std::int64_t> ts;
  ts.reserve(log.size());
  for (const auto& e : log.records) ts.push_back(e.timestamp);
  std::sort(ts.begin(), ts.end());
  const std::size_t n = ts.size();
  auto at_fraction = [&](std::size_t k) {
    std::size_t idx = (k * n + 2) / 3;  // ceil(k n / 3)
    idx = std::max<std::size_t>(idx, 1);
    return ts[idx - 1] + 1;
  };
  return {at_fraction(1), at_fraction(2)};
}

inline std::size_t segment_of(std::int64_t ts, const std::array<std::int64_t, 2>& b) {
  if (ts < b[0]) return 0;
  if (ts < b[1]) return 1;
  return 2;
}

inline PartitionedDataset partition_by_time(const EventLog& log, const PartitionOptions& options) {
  std::array<std::int64_t, 2> b{};
  if (options.mode == PartitionMode::EqualFrequency) {
    b = equal_frequency_boundaries(log);
  } else {
    require(options.boundaries.has_value(), "explicit-boundaries mode needs two boundaries");
    b = *options.boundaries;
    require(b[0] <= b[1], "partition boundaries out of order");
  }
  {
    std::set<Role> seen(options.roles.begin(), options.roles.end());
    require(seen.size() == 3, "partition roles must name validation, training and testing once each");
  }

  std::array<std::vector<Event>, 3> buckets;
  for (const auto& e : log.records) buckets[segment_of(e.timestamp, b)].push_back(e);

  PartitionedDataset ds;
  ds.boundaries = b;
  for (std::size_t s = 0; s < 3; ++s) {
    auto& seg = ds.segments[s];
    seg.role = options.roles[s];
    seg.matrix = build_matrix(log.n_nodes(), buckets[s], options.aggregation);
    seg.labels = LabelSetCollection(log.n_nodes(), {}, {});
    seg.event_count = buckets[s].size();
    for (const auto& e : buckets[s]) seg.value_total += e.value;
    if (buckets[s].empty())
      ds.warnings.push_back("partition '" + std::string(to_string(seg.role)) + "' (segment " + std::to_string(s) +
                            ") is empty");
  }
  return ds;
}

// Labels are re-derived independently inside every partition.
inline PartitionedDataset label_partitions(PartitionedDataset ds, const std::vector<LabelRule>& rules) {
  for (auto& seg : ds.segments) seg.labels = derive_labels(seg.matrix, rules);
  return ds;
}

}  // namespace netsel
