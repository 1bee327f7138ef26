#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"
#include "edgeset.hpp"
#include "parallel.hpp"
#include "sparse.hpp"

namespace netsel {

enum class Measure { Int, IntN };

inline std::string_view to_string(Measure m) { return m == Measure::Int ? "INT" : "INT-N"; }

inline Measure parse_measure(std::string_view s) {
  if (s == "INT") return Measure::Int;
  if (s == "INT-N") return Measure::IntN;
  throw Error("unknown similarity measure '" + std::string(s) + "' (expected INT or INT-N)");
}

// Sum of element-wise minima over the shared support, accumulated in item order.
inline double intersection(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->item < ib->item) {
      ++ia;
    } else if (ib->item < ia->item) {
      ++ib;
    } else {
      s += std::min(ia->value, ib->value);
      ++ia;
      ++ib;
    }
  }
  return s;
}

// Normalized form from the intersection and the two row sums:
// sum(max) = sum(a) + sum(b) - sum(min). 0/0 is 0.
inline double normalize_intersection(double inter, double sum_a, double sum_b) {
  const double denom = sum_a + sum_b - inter;
  return denom > 0.0 ? inter / denom : 0.0;
}

inline double similarity(Measure m, const SparseVector& a, const SparseVector& b) {
  const double inter = intersection(a, b);
  return m == Measure::Int ? inter : normalize_intersection(inter, a.sum(), b.sum());
}

// Inverted item index over a matrix: scores only co-supported node pairs.
class SimilarityIndex {
public:
  explicit SimilarityIndex(const AttributeMatrix& matrix) : matrix_(&matrix), row_sums_(matrix.n_nodes()) {
    std::vector<ItemId> items;
    for (const auto& r : matrix.rows())
      for (const auto& e : r) items.push_back(e.item);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    items_ = std::move(items);
    offsets_.assign(items_.size() + 1, 0);
    for (const auto& r : matrix.rows())
      for (const auto& e : r) ++offsets_[slot(e.item) + 1];
    for (std::size_t k = 0; k < items_.size(); ++k) offsets_[k + 1] += offsets_[k];
    postings_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (NodeId i = 0; i < matrix.n_nodes(); ++i) {
      row_sums_[i] = matrix.row(i).sum();
      for (const auto& e : matrix.row(i)) postings_[cursor[slot(e.item)]++] = {i, e.value};
    }
  }

  [[nodiscard]] std::size_t n_nodes() const { return matrix_->n_nodes(); }

  struct Scratch {
    std::vector<double> acc;
    std::vector<NodeId> touched;
  };

  // Calls fn(j, score) for every j != i with a strictly positive similarity,
  // in ascending j.
  template <typename Fn>
  void for_each_positive(NodeId i, Measure m, Scratch& scratch, Fn&& fn) const {
    if (scratch.acc.size() != n_nodes()) scratch.acc.assign(n_nodes(), 0.0);
    scratch.touched.clear();
    for (const auto& e : matrix_->row(i)) {
      const auto k = slot(e.item);
      for (std::size_t p = offsets_[k]; p < offsets_[k + 1]; ++p) {
        const auto& post = postings_[p];
        if (post.node == i) continue;
        if (scratch.acc[post.node] == 0.0) scratch.touched.push_back(post.node);
        scratch.acc[post.node] += std::min(e.value, post.value);
      }
    }
    std::sort(scratch.touched.begin(), scratch.touched.end());
    for (NodeId j : scratch.touched) {
      const double inter = scratch.acc[j];
      scratch.acc[j] = 0.0;
      if (inter <= 0.0) continue;
      fn(j, m == Measure::Int ? inter : normalize_intersection(inter, row_sums_[i], row_sums_[j]));
    }
  }

private:
  struct Posting {
    NodeId node;
    double value;
  };

  [[nodiscard]] std::size_t slot(ItemId item) const {
    return static_cast<std::size_t>(std::lower_bound(items_.begin(), items_.end(), item) - items_.begin());
  }

  const AttributeMatrix* matrix_;
  std::vector<ItemId> items_;
  std::vector<std::size_t> offsets_;
  std::vector<Posting> postings_;
  std::vector<double> row_sums_;
};

// lambda = round-half-up(density * #pairs), at least 1.
inline std::uint64_t lambda_from_density(std::size_t n_nodes, double density, bool directed) {
  require(density > 0.0 && density <= 1.0, "density must lie in (0, 1]");
  const double n = static_cast<double>(n_nodes);
  const double pairs = directed ? n * (n - 1.0) : n * (n - 1.0) / 2.0;
  const double x = density * pairs;
  const double rounded = std::floor(x + 0.5 + x * 1e-12);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(rounded));
}

namespace detail {
struct ScoredPair {
  double score;
  NodeId u;
  NodeId v;
};
// Higher score first; equal scores by lexicographic (u, v).
inline bool better(const ScoredPair& a, const ScoredPair& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.u != b.u ? a.u < b.u : a.v < b.v;
}
}  // namespace detail

// Directed k-nearest-neighbor model: every node links to its k = lambda / |V|
// most similar peers with strictly positive similarity (ties: lower id).
inline EdgeSet knn_graph(const AttributeMatrix& matrix, Measure measure, std::uint64_t lambda,
                         std::string source = "training", std::size_t workers = 1) {
  const std::size_t n = matrix.n_nodes();
  require(n > 0 && lambda >= n, "KNN model needs lambda >= n_nodes (got lambda=" + std::to_string(lambda) +
                                    ", n_nodes=" + std::to_string(n) + ")");
  const std::size_t k = lambda / n;
  SimilarityIndex index(matrix);
  std::vector<std::vector<Edge>> per_node(n);
  std::vector<std::uint64_t> shortfall(n, 0);
  const std::size_t chunks = std::min<std::size_t>(n, std::max<std::size_t>(1, workers) * 8);
  parallel_for(chunks, workers, [&](std::size_t c) {
    SimilarityIndex::Scratch scratch;
    std::vector<detail::ScoredPair> cand;
    for (std::size_t i = c * n / chunks; i < (c + 1) * n / chunks; ++i) {
      cand.clear();
      const auto ni = static_cast<NodeId>(i);
      index.for_each_positive(ni, measure, scratch, [&](NodeId j, double s) { cand.push_back({s, ni, j}); });
      const std::size_t take = std::min(k, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), detail::better);
      for (std::size_t t = 0; t < take; ++t) per_node[i].push_back({ni, cand[t].v, cand[t].score});
      shortfall[i] = k - take;
    }
  });
  std::vector<Edge> edges;
  Provenance prov{"KNN", std::string(to_string(measure)), lambda, std::move(source), 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    edges.insert(edges.end(), per_node[i].begin(), per_node[i].end());
    prov.shortfall += shortfall[i];
  }
  return EdgeSet::build(n, true, std::move(edges), prov);
}

// Threshold model: the lambda most similar unordered pairs with strictly
// positive similarity, ties at the cutoff by lexicographic (i, j).
inline EdgeSet threshold_graph(const AttributeMatrix& matrix, Measure measure, std::uint64_t lambda,
                               std::string source = "training", std::size_t workers = 1) {
  require(lambda >= 1, "threshold model needs lambda >= 1");
  const std::size_t n = matrix.n_nodes();
  SimilarityIndex index(matrix);
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(n, std::max<std::size_t>(1, workers) * 8));
  std::vector<std::vector<detail::ScoredPair>> tops(chunks);
  auto worse_on_top = [](const detail::ScoredPair& a, const detail::ScoredPair& b) { return detail::better(a, b); };
  parallel_for(chunks, workers, [&](std::size_t c) {
    SimilarityIndex::Scratch scratch;
    auto& heap = tops[c];
    for (std::size_t i = c * n / chunks; i < (c + 1) * n / chunks; ++i) {
      const auto ni = static_cast<NodeId>(i);
      index.for_each_positive(ni, measure, scratch, [&](NodeId j, double s) {
        if (j <= ni) return;
        detail::ScoredPair p{s, ni, j};
        if (heap.size() < lambda) {
          heap.push_back(p);
          std::push_heap(heap.begin(), heap.end(), worse_on_top);
        } else if (detail::better(p, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), worse_on_top);
          heap.back() = p;
          std::push_heap(heap.begin(), heap.end(), worse_on_top);
        }
      });
    }
  });
  std::vector<detail::ScoredPair> all;
  for (auto& t : tops) all.insert(all.end(), t.begin(), t.end());
  std::sort(all.begin(), all.end(), detail::better);
  if (all.size() > lambda) all.resize(lambda);
  std::vector<Edge> edges;
  edges.reserve(all.size());
  for (const auto& p : all) edges.push_back({p.u, p.v, p.score});
  Provenance prov{"TH", std::string(to_string(measure)), lambda, std::move(source), lambda - all.size(), 0};
  return EdgeSet::build(n, false, std::move(edges), prov);
}

}  // namespace netsel
