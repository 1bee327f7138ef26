#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "tasks.hpp"

namespace netsel {

struct EvaluationRecord {
  std::string config_key;
  double precision_validation = 0.0;
  double precision_testing = 0.0;
  PartitionScore validation;
  PartitionScore testing;
};

inline EvaluationRecord make_record(const PredictionBatch& batch) {
  EvaluationRecord r;
  r.config_key = batch.config_key;
  r.validation = score_records(batch.task, batch.records, Role::Validation);
  r.testing = score_records(batch.task, batch.records, Role::Testing);
  r.precision_validation = r.validation.precision;
  r.precision_testing = r.testing.precision;
  return r;
}

// Fields of a config key: task|classifier|model|measure|density|locality|seed.
struct KeyFields {
  std::string task, classifier, model, measure, density, locality, seed;

  // Everything except task and classifier.
  [[nodiscard]] std::string network_portion() const {
    return model + "|" + measure + "|" + density + "|" + locality + "|" + seed;
  }
};

inline KeyFields parse_config_key(std::string_view key) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (;;) {
    auto pos = key.find('|', start);
    f.emplace_back(key.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  require(f.size() == 7, "malformed config key '" + std::string(key) + "'");
  return {f[0], f[1], f[2], f[3], f[4], f[5], f[6]};
}

namespace detail {

// Indices sorted by descending value, ties by ascending key.
inline std::vector<std::size_t> order_by(const std::vector<EvaluationRecord>& recs, bool validation) {
  std::vector<std::size_t> idx(recs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double pa = validation ? recs[a].precision_validation : recs[a].precision_testing;
    const double pb = validation ? recs[b].precision_validation : recs[b].precision_testing;
    if (pa != pb) return pa > pb;
    return recs[a].config_key < recs[b].config_key;
  });
  return idx;
}

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace detail

inline std::string select_model(const std::vector<EvaluationRecord>& records) {
  require(!records.empty(), "select_model needs at least one record");
  return records[detail::order_by(records, true).front()].config_key;
}

struct KendallResult {
  double tau = 0.0;
  double p_value = 1.0;
};

namespace detail {

struct TieCounts {
  double pairs = 0, x0 = 0, x1 = 0;  // Σt(t-1)/2, Σt(t-1)(t-2), Σt(t-1)(2t+5)
};

inline TieCounts tie_counts(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  TieCounts c;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double t = static_cast<double>(j - i);
    c.pairs += t * (t - 1) / 2;
    c.x0 += t * (t - 1) * (t - 2);
    c.x1 += t * (t - 1) * (2 * t + 5);
    i = j;
  }
  return c;
}

inline std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = (lo + hi) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace detail

// Tau-b with the normal approximation p-value (two sided). A zero
// denominator (one side constant) gives tau 0 and p 1.
inline KendallResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "kendall_tau needs equal-length inputs");
  require(x.size() >= 2, "kendall_tau needs at least 2 observations");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  double joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[idx[j]] == x[idx[i]] && y[idx[j]] == y[idx[i]]) ++j;
    const double t = static_cast<double>(j - i);
    joint += t * (t - 1) / 2;
    i = j;
  }
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const auto swaps = static_cast<double>(detail::merge_count(ys, buf, 0, n));
  const auto tx = detail::tie_counts(x);
  const auto ty = detail::tie_counts(y);
  const double nd = static_cast<double>(n);
  const double n0 = nd * (nd - 1) / 2;
  const double s = n0 - tx.pairs - ty.pairs + joint - 2 * swaps;
  KendallResult r;
  const double denom = (n0 - tx.pairs) * (n0 - ty.pairs);
  if (denom <= 0) return r;
  r.tau = s / std::sqrt(denom);
  const double m = nd * (nd - 1);
  double var = (m * (2 * nd + 5) - tx.x1 - ty.x1) / 18 + 2 * tx.pairs * ty.pairs / m;
  if (n > 2) var += tx.x0 * ty.x0 / (9 * m * (nd - 2));
  if (var > 0) r.p_value = std::erfc(std::abs(s) / std::sqrt(var) / std::sqrt(2.0));
  return r;
}

struct Intersection {
  std::size_t count = 0;
  std::size_t effective_k = 0;
};

inline Intersection topk_intersection(const std::vector<EvaluationRecord>& records, std::size_t k = 10) {
  Intersection r;
  r.effective_k = std::min(k, records.size());
  const auto v = detail::order_by(records, true);
  const auto t = detail::order_by(records, false);
  std::set<std::string> top;
  for (std::size_t i = 0; i < r.effective_k; ++i) top.insert(records[v[i]].config_key);
  for (std::size_t i = 0; i < r.effective_k; ++i) r.count += top.count(records[t[i]].config_key);
  return r;
}

struct SelectionReport {
  std::size_t configs = 0;
  double mu = 0, mu_top10 = 0, delta_mu = 0, p1 = 0, delta_p1 = 0;
  std::string selected_key;
  double selected_rank = 0;
  double tau = 0, tau_p = 1, tau10 = 0;
  std::size_t intersection10 = 0;
  std::size_t intersection_k = 0;
  bool bold_delta_p1 = false;
  bool bold_rank = false;
};

// Position (0-based) of `key` in the testing ordering mapped to [0,1].
inline double normalized_rank(const std::vector<EvaluationRecord>& records, const std::string& key) {
  const auto t = detail::order_by(records, false);
  for (std::size_t pos = 0; pos < t.size(); ++pos)
    if (records[t[pos]].config_key == key)
      return t.size() < 2 ? 1.0 : 1.0 - static_cast<double>(pos) / static_cast<double>(t.size() - 1);
  throw Error("config '" + key + "' not in record list");
}

inline SelectionReport selection_stats(const std::vector<EvaluationRecord>& records) {
  require(!records.empty(), "selection_stats needs records");
  SelectionReport r;
  r.configs = records.size();
  const double n = static_cast<double>(records.size());
  for (const auto& rec : records) {
    r.mu += rec.precision_testing / n;
    r.delta_mu += (rec.precision_validation - rec.precision_testing) / n;
  }
  const auto t = detail::order_by(records, false);
  const auto v = detail::order_by(records, true);
  r.p1 = records[t.front()].precision_testing;
  const std::size_t top = std::min<std::size_t>(10, records.size());
  for (std::size_t i = 0; i < top; ++i) r.mu_top10 += records[t[i]].precision_testing / static_cast<double>(top);
  r.selected_key = records[v.front()].config_key;
  r.delta_p1 = records[v.front()].precision_testing - r.p1;
  r.selected_rank = normalized_rank(records, r.selected_key);
  if (records.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& rec : records) {
      xs.push_back(rec.precision_validation);
      ys.push_back(rec.precision_testing);
    }
    auto k = kendall_tau(xs, ys);
    r.tau = k.tau;
    r.tau_p = k.p_value;
    if (top >= 2) {
      std::vector<double> x10, y10;
      for (std::size_t i = 0; i < top; ++i) {
        x10.push_back(records[v[i]].precision_validation);
        y10.push_back(records[v[i]].precision_testing);
      }
      r.tau10 = kendall_tau(x10, y10).tau;
    }
  }
  const auto inter = topk_intersection(records, 10);
  r.intersection10 = inter.count;
  r.intersection_k = inter.effective_k;
  r.bold_delta_p1 = r.delta_p1 <= 0.1 * (r.p1 - r.mu);
  r.bold_rank = r.selected_rank >= 0.9;
  return r;
}

enum class GroupBy { Locality, Model };

inline std::string_view to_string(GroupBy g) { return g == GroupBy::Locality ? "locality" : "model"; }

// Median absolute testing-precision difference over same-group pairs minus
// the same median over cross-group pairs.
inline double match_mismatch(const std::vector<EvaluationRecord>& records, GroupBy group_by) {
  std::vector<std::string> group;
  for (const auto& r : records) {
    const auto f = parse_config_key(r.config_key);
    group.push_back(group_by == GroupBy::Locality ? f.locality : f.model);
  }
  std::vector<double> matched, mismatched;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      const double d = std::abs(records[i].precision_testing - records[j].precision_testing);
      (group[i] == group[j] ? matched : mismatched).push_back(d);
    }
  require(!mismatched.empty(), "match_mismatch needs at least two groups");
  require(!matched.empty(), "match_mismatch found no group with two or more configs");
  return detail::median(matched) - detail::median(mismatched);
}

struct CrossTaskCell {
  double delta_p1 = 0;
  double rank = 0;
  std::string selected_key;  // key of the evaluated config in the evaluation task
};

// rows: selection on CC, on LP, on the CC/LP validation average; columns:
// evaluation on CC, LP.
struct CrossTaskTable {
  std::array<std::array<std::optional<CrossTaskCell>, 2>, 3> cells;
};

namespace detail {

inline std::optional<CrossTaskCell> evaluate_in(const std::vector<EvaluationRecord>& target,
                                                const std::string& network_portion) {
  if (target.empty()) return std::nullopt;
  const auto t = order_by(target, false);
  const double p1 = target[t.front()].precision_testing;
  for (const auto& r : target)
    if (parse_config_key(r.config_key).network_portion() == network_portion)
      return CrossTaskCell{r.precision_testing - p1, normalized_rank(target, r.config_key), r.config_key};
  return std::nullopt;
}

}  // namespace detail

inline CrossTaskTable cross_task(const std::vector<EvaluationRecord>& records_cc,
                                 const std::vector<EvaluationRecord>& records_lp) {
  CrossTaskTable table;
  const std::array<const std::vector<EvaluationRecord>*, 2> by_task{&records_cc, &records_lp};
  for (std::size_t s = 0; s < 2; ++s) {
    if (by_task[s]->empty()) continue;
    const auto portion = parse_config_key(select_model(*by_task[s])).network_portion();
    for (std::size_t e = 0; e < 2; ++e) table.cells[s][e] = detail::evaluate_in(*by_task[e], portion);
  }
  std::map<std::string, double> cc_val;
  for (const auto& r : records_cc) cc_val[parse_config_key(r.config_key).network_portion()] = r.precision_validation;
  std::vector<EvaluationRecord> averaged;
  for (const auto& r : records_lp) {
    const auto portion = parse_config_key(r.config_key).network_portion();
    auto it = cc_val.find(portion);
    if (it == cc_val.end()) continue;
    EvaluationRecord a;
    a.config_key = portion;
    a.precision_validation = (it->second + r.precision_validation) / 2.0;
    averaged.push_back(std::move(a));
  }
  if (!averaged.empty()) {
    const auto portion = detail::order_by(averaged, true);
    for (std::size_t e = 0; e < 2; ++e)
      table.cells[2][e] = detail::evaluate_in(*by_task[e], averaged[portion.front()].config_key);
  }
  return table;
}

struct NodeDifficulty {
  std::string task;
  std::string classifier;
  NodeId node = 0;
  std::size_t records = 0;
  double precision = 0;
  bool empty = false;
};

// Per-node precision over the union of the top-`top` validation and testing
// configs of each (task, classifier) cell, using all of the node's records
// in those configs.
inline std::vector<NodeDifficulty> node_difficulty(const std::vector<PredictionBatch>& batches,
                                                   std::size_t top = 5) {
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> cells;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto f = parse_config_key(batches[b].config_key);
    cells[{f.task, f.classifier}].push_back(b);
  }
  std::vector<NodeDifficulty> out;
  for (const auto& [cell, members] : cells) {
    std::vector<EvaluationRecord> recs;
    for (auto b : members) recs.push_back(make_record(batches[b]));
    std::set<std::size_t> chosen;
    for (bool validation : {true, false}) {
      const auto order = detail::order_by(recs, validation);
      for (std::size_t i = 0; i < std::min(top, order.size()); ++i) chosen.insert(members[order[i]]);
    }
    std::map<NodeId, std::vector<PredictionRecord>> per_node;
    Task task = Task::CC;
    for (auto b : chosen) {
      task = batches[b].task;
      for (auto r : batches[b].records) {
        r.partition = Role::Validation;
        per_node[r.test_node].push_back(r);
      }
    }
    for (const auto& [node, records] : per_node) {
      const auto s = score_records(task, records, Role::Validation);
      out.push_back({cell.first, cell.second, node, s.records, s.precision, s.empty});
    }
  }
  return out;
}

}  // namespace netsel
