#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "data.hpp"
#include "rng.hpp"
#include "similarity.hpp"
#include "sparse.hpp"

namespace netsel {

// Element-wise minimum of two attribute vectors (pair features for link
// prediction). Non-zero only on the shared support.
inline SparseVector edge_features(const SparseVector& a, const SparseVector& b) {
  SparseVector out;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->item < ib->item) {
      ++ia;
    } else if (ib->item < ia->item) {
      ++ib;
    } else {
      out.push_back_sorted(ia->item, std::min(ia->value, ib->value));
      ++ia;
      ++ib;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training data

// Counts partition-tag checks made while assembling training sets. Any tag
// other than the training partition is a leak.
struct LeakageAudit {
  std::atomic<std::uint64_t> assertions{0};
  std::atomic<std::uint64_t> violations{0};

  void check(Role source) {
    assertions.fetch_add(1, std::memory_order_relaxed);
    if (source != Role::Training) violations.fetch_add(1, std::memory_order_relaxed);
  }
};

struct Instance {
  SparseVector x;
  std::uint8_t y = 0;
  std::uint64_t key = 0;  // node id or packed pair, used for canonical order
  Role source = Role::Training;
};

class TrainingSet {
public:
  void add(SparseVector x, std::uint8_t y, std::uint64_t key, Role source, LeakageAudit* audit) {
    require(y <= 1, "training labels must be 0 or 1");
    if (audit) audit->check(source);
    instances_.push_back({std::move(x), y, key, source});
    canonical_ = false;
  }

  [[nodiscard]] std::size_t size() const { return instances_.size(); }
  [[nodiscard]] bool empty() const { return instances_.empty(); }

  [[nodiscard]] std::size_t positives() const {
    return static_cast<std::size_t>(
        std::count_if(instances_.begin(), instances_.end(), [](const Instance& in) { return in.y == 1; }));
  }

  // Instances sorted by (key, label, features) and the sorted item
  // dictionary built from them, so learners see the same input regardless of
  // assembly order.
  const std::vector<Instance>& instances() {
    canonicalize();
    return instances_;
  }

  const std::vector<ItemId>& dictionary() {
    canonicalize();
    return dictionary_;
  }

private:
  void canonicalize() {
    if (canonical_) return;
    std::sort(instances_.begin(), instances_.end(), [](const Instance& a, const Instance& b) {
      if (a.key != b.key) return a.key < b.key;
      if (a.y != b.y) return a.y < b.y;
      return std::lexicographical_compare(a.x.begin(), a.x.end(), b.x.begin(), b.x.end(),
                                          [](const SparseEntry& p, const SparseEntry& q) {
                                            return p.item != q.item ? p.item < q.item : p.value < q.value;
                                          });
    });
    dictionary_.clear();
    for (const auto& in : instances_)
      for (const auto& e : in.x) dictionary_.push_back(e.item);
    std::sort(dictionary_.begin(), dictionary_.end());
    dictionary_.erase(std::unique(dictionary_.begin(), dictionary_.end()), dictionary_.end());
    canonical_ = true;
  }

  std::vector<Instance> instances_;
  std::vector<ItemId> dictionary_;
  bool canonical_ = false;
};

namespace detail {

struct DimEntry {
  std::uint32_t dim;
  double value;
};

// Projects x onto a sorted dictionary, dropping unknown items.
inline std::vector<DimEntry> project(const SparseVector& x, const std::vector<ItemId>& dict) {
  std::vector<DimEntry> out;
  auto d = dict.begin();
  for (const auto& e : x) {
    d = std::lower_bound(d, dict.end(), e.item);
    if (d == dict.end()) break;
    if (*d == e.item) out.push_back({static_cast<std::uint32_t>(d - dict.begin()), e.value});
  }
  return out;
}

inline void l2_normalize(std::vector<DimEntry>& v) {
  double s = 0.0;
  for (const auto& e : v) s += e.value * e.value;
  if (s <= 0.0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (auto& e : v) e.value *= inv;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Learners

struct SvmParams {
  double reg = 1e-4;
  std::size_t epochs = 10;
};

struct RfParams {
  std::size_t trees = 50;
  std::size_t max_depth = 16;
  double feature_frac = 0.0;  // 0 selects floor(sqrt(|dictionary|))
  std::size_t min_leaf = 1;
  bool bootstrap = true;
};

struct ConstantModel {
  std::uint8_t label = 0;
};

// Linear model over a fixed dictionary; the last weight is the bias.
struct LinearSvm {
  std::vector<ItemId> dictionary;
  std::vector<double> weights;

  [[nodiscard]] double score(const SparseVector& x) const {
    auto proj = detail::project(x, dictionary);
    detail::l2_normalize(proj);
    double s = weights.back();
    for (const auto& e : proj) s += weights[e.dim] * e.value;
    return s;
  }

  // Regularized hinge objective on canonical instances.
  [[nodiscard]] double objective(const std::vector<Instance>& data, double reg) const {
    double sq = 0.0;
    for (double w : weights) sq += w * w;
    double hinge = 0.0;
    for (const auto& in : data) {
      const double y = in.y ? 1.0 : -1.0;
      hinge += std::max(0.0, 1.0 - y * score(in.x));
    }
    return 0.5 * reg * sq + hinge / static_cast<double>(data.size());
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // dictionary index, -1 for leaves
  double threshold = 0.0;     // left branch takes value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint8_t label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  [[nodiscard]] std::uint8_t predict(const std::vector<double>& dense) const {
    std::int32_t at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(at)];
      at = dense[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(at)].label;
  }
};

struct RandomForest {
  std::vector<ItemId> dictionary;
  std::vector<DecisionTree> trees;

  [[nodiscard]] std::uint8_t predict(const SparseVector& x) const {
    std::vector<double> dense(dictionary.size(), 0.0);
    for (const auto& e : detail::project(x, dictionary)) dense[e.dim] = e.value;
    std::size_t ones = 0;
    for (const auto& t : trees) ones += t.predict(dense);
    return 2 * ones >= trees.size() ? 1 : 0;
  }
};

// Deterministic pseudo-random labels keyed on the instance: a balanced
// baseline for the link-prediction harness.
struct CoinFlip {
  std::uint64_t seed = 0;
};

enum class ClassifierKind { LinearSvm, RandomForest, CoinFlip };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::LinearSvm: return "linear-svm";
    case ClassifierKind::RandomForest: return "random-forest";
    case ClassifierKind::CoinFlip: return "coin-flip";
  }
  return "?";
}

inline ClassifierKind parse_classifier(std::string_view s) {
  if (s == "linear-svm") return ClassifierKind::LinearSvm;
  if (s == "random-forest") return ClassifierKind::RandomForest;
  if (s == "coin-flip") return ClassifierKind::CoinFlip;
  throw Error("unknown classifier '" + std::string(s) + "'");
}

class Classifier {
public:
  using Model = std::variant<ConstantModel, LinearSvm, RandomForest, CoinFlip>;

  Classifier(ClassifierKind kind, Model model) : kind_(kind), model_(std::move(model)) {}

  [[nodiscard]] ClassifierKind kind() const { return kind_; }
  [[nodiscard]] const Model& model() const { return model_; }
  [[nodiscard]] bool is_constant() const { return std::holds_alternative<ConstantModel>(model_); }

  // key only matters for the coin-flip baseline.
  [[nodiscard]] std::uint8_t predict(const SparseVector& x, std::uint64_t key = 0) const {
    return std::visit(
        [&](const auto& m) -> std::uint8_t {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, ConstantModel>) {
            return m.label;
          } else if constexpr (std::is_same_v<M, LinearSvm>) {
            return m.score(x) >= 0.0 ? 1 : 0;
          } else if constexpr (std::is_same_v<M, RandomForest>) {
            return m.predict(x);
          } else {
            return static_cast<std::uint8_t>(derive_seed(m.seed, "coin", key) >> 63);
          }
        },
        model_);
  }

private:
  ClassifierKind kind_;
  Model model_;
};

inline std::optional<Classifier> single_class(ClassifierKind kind, TrainingSet& data) {
  const auto pos = data.positives();
  if (pos == 0) return Classifier(kind, ConstantModel{0});
  if (pos == data.size()) return Classifier(kind, ConstantModel{1});
  return std::nullopt;
}

// Primal hinge-loss SVM by seeded stochastic subgradient descent with step
// 1/(reg t) and projection onto the 1/sqrt(reg) ball. Features are L2
// normalized per instance; a constant feature carries the bias. The returned
// weights are the best end-of-epoch iterate by objective, starting from zero.
inline std::optional<Classifier> train_svm(TrainingSet& data, const SvmParams& params, std::uint64_t seed) {
  if (data.empty()) return std::nullopt;
  if (auto c = single_class(ClassifierKind::LinearSvm, data)) return c;
  require(params.reg > 0.0, "svm regularization must be positive");

  const auto& inst = data.instances();
  LinearSvm model;
  model.dictionary = data.dictionary();
  const std::size_t d = model.dictionary.size();
  std::vector<std::vector<detail::DimEntry>> xs;
  xs.reserve(inst.size());
  for (const auto& in : inst) {
    auto p = detail::project(in.x, model.dictionary);
    detail::l2_normalize(p);
    p.push_back({static_cast<std::uint32_t>(d), 1.0});
    xs.push_back(std::move(p));
  }

  std::vector<double> v(d + 1, 0.0);
  double scale = 1.0, vnorm2 = 0.0;
  const double radius2 = 1.0 / params.reg;
  model.weights.assign(d + 1, 0.0);
  double best = model.objective(inst, params.reg);
  std::vector<double> best_w = model.weights;

  Rng rng(derive_seed(seed, "svm"));
  std::vector<std::size_t> order(inst.size());
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    rng.shuffle(std::span<std::size_t>(order));
    for (auto idx : order) {
      ++t;
      const double eta = 1.0 / (params.reg * static_cast<double>(t));
      const double y = inst[idx].y ? 1.0 : -1.0;
      double dot = 0.0;
      for (const auto& e : xs[idx]) dot += v[e.dim] * e.value;
      const double margin = y * scale * dot;
      const double shrink = 1.0 - eta * params.reg;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
        vnorm2 = 0.0;
        dot = 0.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        const double step = eta * y / scale;
        double xnorm2 = 0.0;
        for (const auto& e : xs[idx]) {
          v[e.dim] += step * e.value;
          xnorm2 += e.value * e.value;
        }
        vnorm2 += 2.0 * step * dot + step * step * xnorm2;
      }
      const double wnorm2 = scale * scale * vnorm2;
      if (wnorm2 > radius2) scale *= std::sqrt(radius2 / wnorm2);
      if (scale < 1e-100) {
        for (auto& w : v) w *= scale;
        vnorm2 *= scale * scale;
        scale = 1.0;
      }
    }
    for (std::size_t k = 0; k <= d; ++k) model.weights[k] = scale * v[k];
    const double obj = model.objective(inst, params.reg);
    if (obj < best) {
      best = obj;
      best_w = model.weights;
    }
  }
  model.weights = std::move(best_w);
  return Classifier(ClassifierKind::LinearSvm, std::move(model));
}

namespace detail {

struct Column {
  std::vector<std::uint32_t> rows;
  std::vector<double> values;
};

struct SplitChoice {
  double impurity = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

inline double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

// Grows one CART tree on weighted instances (weights are bootstrap counts).
class TreeBuilder {
public:
  TreeBuilder(const std::vector<Column>& columns, const std::vector<std::uint8_t>& labels, const RfParams& params,
              std::size_t features_per_split, Rng& rng)
      : columns_(columns), labels_(labels), params_(params), mtry_(features_per_split), rng_(rng),
        stamp_(labels.size(), 0), value_(labels.size(), 0.0) {}

  DecisionTree build(const std::vector<std::uint32_t>& weights) {
    weights_ = weights;
    std::vector<std::uint32_t> root;
    for (std::uint32_t r = 0; r < weights.size(); ++r)
      if (weights[r] > 0) root.push_back(r);
    DecisionTree tree;
    grow(tree, root, 0);
    return tree;
  }

private:
  std::int32_t grow(DecisionTree& tree, const std::vector<std::uint32_t>& rows, std::size_t depth) {
    double total = 0.0, pos = 0.0;
    for (auto r : rows) {
      total += weights_[r];
      pos += labels_[r] ? weights_[r] : 0.0;
    }
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.back().label = 2.0 * pos >= total ? 1 : 0;
    const double parent = gini(pos, total);
    if (depth >= params_.max_depth || parent <= 0.0 || total < 2.0 * static_cast<double>(params_.min_leaf))
      return id;

    auto split = best_split(rows, total, pos);
    if (split.feature < 0 || split.impurity >= parent - 1e-12) return id;

    std::vector<std::uint32_t> left, right;
    mark(rows, static_cast<std::size_t>(split.feature));
    for (auto r : rows) (value_[r] <= split.threshold ? left : right).push_back(r);
    clear(rows);
    const auto l = grow(tree, left, depth + 1);
    const auto rt = grow(tree, right, depth + 1);
    auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = l;
    nd.right = rt;
    return id;
  }

  void mark(const std::vector<std::uint32_t>& rows, std::size_t f) {
    ++epoch_;
    for (auto r : rows) {
      stamp_[r] = epoch_;
      value_[r] = 0.0;
    }
    const auto& col = columns_[f];
    for (std::size_t k = 0; k < col.rows.size(); ++k)
      if (stamp_[col.rows[k]] == epoch_) value_[col.rows[k]] = col.values[k];
  }

  void clear(const std::vector<std::uint32_t>& rows) {
    for (auto r : rows) value_[r] = 0.0;
  }

  SplitChoice best_split(const std::vector<std::uint32_t>& rows, double total, double pos) {
    const std::size_t d = columns_.size();
    std::vector<std::uint32_t> order(d);
    for (std::uint32_t f = 0; f < d; ++f) order[f] = f;
    SplitChoice best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::size_t informative = 0;
    const double min_leaf = static_cast<double>(params_.min_leaf);
    std::vector<std::pair<double, std::uint32_t>> vals;
    for (std::size_t k = 0; k < d && informative < mtry_; ++k) {
      // Lazy Fisher-Yates: draw features until mtry non-constant ones are seen.
      const auto pick = k + static_cast<std::size_t>(rng_.below(d - k));
      std::swap(order[k], order[pick]);
      const auto f = order[k];
      mark(rows, f);
      vals.clear();
      for (auto r : rows) vals.emplace_back(value_[r], r);
      clear(rows);
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;
      ++informative;
      double lw = 0.0, lp = 0.0;
      for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
        const auto r = vals[t].second;
        lw += weights_[r];
        lp += labels_[r] ? weights_[r] : 0.0;
        if (vals[t].first == vals[t + 1].first) continue;
        const double rw = total - lw;
        if (lw < min_leaf || rw < min_leaf) continue;
        const double imp = (lw * gini(lp, lw) + rw * gini(pos - lp, rw)) / total;
        const double thr = 0.5 * (vals[t].first + vals[t + 1].first);
        const auto fi = static_cast<std::int32_t>(f);
        if (imp < best.impurity || (imp == best.impurity && (fi < best.feature || (fi == best.feature && thr < best.threshold)))) {
          best = {imp, fi, thr};
        }
      }
    }
    return best;
  }

  const std::vector<Column>& columns_;
  const std::vector<std::uint8_t>& labels_;
  const RfParams& params_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<std::uint32_t> weights_;
  std::vector<std::uint64_t> stamp_;
  std::vector<double> value_;
  std::uint64_t epoch_ = 0;
};

}  // namespace detail

// Bootstrap-sampled CART trees with Gini splits and per-split feature
// sampling; majority vote with ties to 1.
inline std::optional<Classifier> train_rf(TrainingSet& data, const RfParams& params, std::uint64_t seed) {
  if (data.empty()) return std::nullopt;
  if (auto c = single_class(ClassifierKind::RandomForest, data)) return c;
  require(params.trees >= 1 && params.min_leaf >= 1, "random forest needs trees >= 1 and min_leaf >= 1");

  const auto& inst = data.instances();
  RandomForest forest;
  forest.dictionary = data.dictionary();
  const std::size_t d = forest.dictionary.size();
  std::vector<detail::Column> columns(d);
  std::vector<std::uint8_t> labels;
  labels.reserve(inst.size());
  for (std::uint32_t r = 0; r < inst.size(); ++r) {
    labels.push_back(inst[r].y);
    for (const auto& e : detail::project(inst[r].x, forest.dictionary)) {
      columns[e.dim].rows.push_back(r);
      columns[e.dim].values.push_back(e.value);
    }
  }
  std::size_t mtry = params.feature_frac > 0.0
                         ? static_cast<std::size_t>(std::floor(params.feature_frac * static_cast<double>(d)))
                         : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
  mtry = std::clamp<std::size_t>(mtry, 1, std::max<std::size_t>(1, d));

  for (std::size_t t = 0; t < params.trees; ++t) {
    Rng rng(derive_seed(seed, "rf-tree", t));
    std::vector<std::uint32_t> weights(inst.size(), 1);
    if (params.bootstrap) {
      std::fill(weights.begin(), weights.end(), 0);
      for (std::size_t k = 0; k < inst.size(); ++k) ++weights[rng.below(inst.size())];
    }
    detail::TreeBuilder builder(columns, labels, params, mtry, rng);
    forest.trees.push_back(builder.build(weights));
  }
  return Classifier(ClassifierKind::RandomForest, std::move(forest));
}

struct LearnerParams {
  SvmParams svm;
  RfParams rf;
};

inline std::optional<Classifier> train(ClassifierKind kind, TrainingSet& data, const LearnerParams& params,
                                       std::uint64_t seed) {
  switch (kind) {
    case ClassifierKind::LinearSvm: return train_svm(data, params.svm, seed);
    case ClassifierKind::RandomForest: return train_rf(data, params.rf, seed);
    case ClassifierKind::CoinFlip:
      if (data.empty()) return std::nullopt;
      return Classifier(ClassifierKind::CoinFlip, CoinFlip{derive_seed(seed, "coin-model")});
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Ensembles

struct EnsembleMember {
  NodeId node;
  const Classifier* classifier;
};

// The knn members most similar to `selector` (ties: lower node id).
inline std::vector<EnsembleMember> nearest_members(const std::vector<EnsembleMember>& members, const SparseVector& selector,
                                                   Measure measure, std::size_t knn,
                                                   const AttributeMatrix& member_attrs) {
  require(knn >= 1 && members.size() >= knn, "ensemble needs at least knn members");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(members.size());
  for (std::size_t k = 0; k < members.size(); ++k)
    scored.emplace_back(similarity(measure, selector, member_attrs.row(members[k].node)), k);
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(knn), scored.end(),
                    [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return members[a.second].node < members[b.second].node;
                    });
  std::vector<EnsembleMember> out;
  for (std::size_t k = 0; k < knn; ++k) out.push_back(members[scored[k].second]);
  return out;
}

inline std::uint8_t majority_vote(const std::vector<EnsembleMember>& voters, const SparseVector& x, std::uint64_t key = 0) {
  std::size_t ones = 0;
  for (const auto& m : voters) ones += m.classifier->predict(x, key);
  return 2 * ones >= voters.size() ? 1 : 0;
}

// Majority of the knn most similar members' predictions on test_attr.
inline std::uint8_t ensemble_vote(const std::vector<EnsembleMember>& members, const SparseVector& test_attr,
                                  Measure measure, std::size_t knn, const AttributeMatrix& member_attrs,
                                  std::uint64_t key = 0) {
  return majority_vote(nearest_members(members, test_attr, measure, knn, member_attrs), test_attr, key);
}

}  // namespace netsel
