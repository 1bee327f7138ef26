#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "community.hpp"
#include "data.hpp"
#include "edgeset.hpp"
#include "graph.hpp"
#include "learn.hpp"
#include "similarity.hpp"

namespace netsel {

// ---------------------------------------------------------------------------
// Configuration

enum class Task { CC, LP };

inline std::string_view to_string(Task t) { return t == Task::CC ? "CC" : "LP"; }

inline Task parse_task(std::string_view s) {
  if (s == "CC") return Task::CC;
  if (s == "LP") return Task::LP;
  throw Error("unknown task '" + std::string(s) + "' (expected CC or LP)");
}

enum class NetworkModel { Knn, Th, Explicit };

inline std::string_view to_string(NetworkModel m) {
  switch (m) {
    case NetworkModel::Knn: return "KNN";
    case NetworkModel::Th: return "TH";
    case NetworkModel::Explicit: return "EXPLICIT";
  }
  return "?";
}

inline NetworkModel parse_network_model(std::string_view s) {
  if (s == "KNN") return NetworkModel::Knn;
  if (s == "TH") return NetworkModel::Th;
  if (s == "EXPLICIT") return NetworkModel::Explicit;
  throw Error("unknown network model '" + std::string(s) + "' (expected KNN, TH or EXPLICIT)");
}

// One network model instantiation: inferred (model, measure, density) or a
// named explicit edge-set.
struct NetworkSpec {
  NetworkModel model = NetworkModel::Knn;
  Measure measure = Measure::Int;
  double density = 0.0;
  std::string density_label;  // as written in keys, e.g. "0.01" or "x0.75"
  std::string explicit_name;

  // "KNN|INT|0.01" or "EXPLICIT:social|-|observed".
  [[nodiscard]] std::string key() const {
    if (model == NetworkModel::Explicit) return "EXPLICIT:" + explicit_name + "|-|observed";
    return std::string(to_string(model)) + "|" + std::string(to_string(measure)) + "|" + density_label;
  }

  // File-name friendly identifier.
  [[nodiscard]] std::string file_id() const {
    if (model == NetworkModel::Explicit) return "EXPLICIT-" + explicit_name;
    return std::string(to_string(model)) + "_" + std::string(to_string(measure)) + "_" + density_label;
  }

  // Measure used wherever a similarity is needed (ensemble member choice).
  [[nodiscard]] Measure effective_measure() const { return model == NetworkModel::Explicit ? Measure::Int : measure; }
};

enum class Locality { LocalAdjacency, LocalBfs, Community, Ensemble, Global };
enum class EnsembleOrder { Degree, AttrSum, AttrUnique, Random };

struct NeighborhoodSpec {
  Locality locality = Locality::LocalAdjacency;
  EnsembleOrder order = EnsembleOrder::Degree;
  std::size_t bfs_k = 200;
  std::size_t ensemble_k = 30;
  std::size_t ensemble_knn = 3;
  std::size_t global_sample = 500;
  std::size_t community_min_members = 3;

  [[nodiscard]] std::string name() const {
    switch (locality) {
      case Locality::LocalAdjacency: return "local-adjacency";
      case Locality::LocalBfs: return "local-bfs";
      case Locality::Community: return "community";
      case Locality::Global: return "global";
      case Locality::Ensemble:
        switch (order) {
          case EnsembleOrder::Degree: return "ensemble-degree";
          case EnsembleOrder::AttrSum: return "ensemble-attr-sum";
          case EnsembleOrder::AttrUnique: return "ensemble-attr-unique";
          case EnsembleOrder::Random: return "ensemble-random";
        }
    }
    return "?";
  }

  void validate() const {
    require(bfs_k >= 1, "bfs_k must be >= 1");
    require(ensemble_knn >= 1 && ensemble_knn <= ensemble_k, "ensemble_knn must lie in [1, ensemble_k]");
    require(global_sample >= 1, "global_sample must be >= 1");
  }
};

inline NeighborhoodSpec parse_locality(std::string_view s, NeighborhoodSpec base = {}) {
  if (s == "local-adjacency") base.locality = Locality::LocalAdjacency;
  else if (s == "local-bfs") base.locality = Locality::LocalBfs;
  else if (s == "community") base.locality = Locality::Community;
  else if (s == "global") base.locality = Locality::Global;
  else if (s == "ensemble-degree") base.locality = Locality::Ensemble, base.order = EnsembleOrder::Degree;
  else if (s == "ensemble-attr-sum") base.locality = Locality::Ensemble, base.order = EnsembleOrder::AttrSum;
  else if (s == "ensemble-attr-unique") base.locality = Locality::Ensemble, base.order = EnsembleOrder::AttrUnique;
  else if (s == "ensemble-random") base.locality = Locality::Ensemble, base.order = EnsembleOrder::Random;
  else throw Error("unknown locality '" + std::string(s) + "'");
  return base;
}

struct ModelConfig {
  NetworkSpec network;
  NeighborhoodSpec locality;
  Task task = Task::CC;
  ClassifierKind classifier = ClassifierKind::LinearSvm;
  std::uint64_t seed = 0;

  // task|classifier|model|measure|density|locality|seed. Field values never
  // contain '|', so equal keys mean equal configs.
  [[nodiscard]] std::string key() const {
    std::ostringstream os;
    os << to_string(task) << '|' << to_string(classifier) << '|' << network.key() << '|' << locality.name() << '|'
       << seed;
    return os.str();
  }

  [[nodiscard]] std::uint64_t stream() const { return derive_seed(seed, key()); }
};

// ---------------------------------------------------------------------------
// Prediction records

struct PredictionRecord {
  Role partition = Role::Validation;
  NodeId test_node = 0;
  std::string target;  // labelset name (CC) or "u-v" pair (LP)
  std::uint8_t predicted = 0;
  std::uint8_t actual = 0;
  bool fallback = false;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

struct PredictionBatch {
  std::string config_key;
  Task task = Task::CC;
  std::vector<PredictionRecord> records;

  // Canonical order: partition, test node, target.
  void canonicalize() {
    std::stable_sort(records.begin(), records.end(), [](const PredictionRecord& a, const PredictionRecord& b) {
      if (a.partition != b.partition) return static_cast<int>(a.partition) < static_cast<int>(b.partition);
      if (a.test_node != b.test_node) return a.test_node < b.test_node;
      return a.target < b.target;
    });
  }
};

inline std::string pair_label(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return std::to_string(u) + "-" + std::to_string(v);
}

inline void write_batch(std::ostream& out, const PredictionBatch& batch) {
  for (const auto& r : batch.records)
    out << batch.config_key << '\t' << to_string(r.partition) << '\t' << r.test_node << '\t' << r.target << '\t'
        << int(r.predicted) << '\t' << int(r.actual) << '\t' << (r.fallback ? 1 : 0) << '\n';
}

inline PredictionBatch read_batch(std::istream& in, Task task, const std::string& expected_key = {}) {
  PredictionBatch batch;
  batch.task = task;
  batch.config_key = expected_key;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_fields(line, '\t');
    std::uint64_t node = 0;
    int pred = 0, act = 0, fb = 0;
    require(f.size() == 7 && detail::parse_number(f[2], node) && detail::parse_number(f[4], pred) &&
                detail::parse_number(f[5], act) && detail::parse_number(f[6], fb),
            "malformed prediction record: " + line);
    if (batch.config_key.empty()) batch.config_key = std::string(f[0]);
    require(f[0] == batch.config_key, "prediction batch mixes config keys");
    batch.records.push_back({parse_role(f[1]), static_cast<NodeId>(node), std::string(f[3]),
                             static_cast<std::uint8_t>(pred), static_cast<std::uint8_t>(act), fb != 0});
  }
  return batch;
}

// Precision of one partition of a batch. CC batches hold positive-oracle
// instances only, so precision is the fraction predicted 1; LP precision is
// TP / predicted-1. An empty denominator yields 0 with `empty` set.
struct PartitionScore {
  double precision = 0.0;
  std::size_t records = 0;
  std::size_t predicted_positive = 0;
  std::size_t true_positive = 0;
  std::size_t fallbacks = 0;
  bool empty = true;
};

inline PartitionScore score_records(Task task, const std::vector<PredictionRecord>& records, Role role) {
  PartitionScore s;
  for (const auto& r : records) {
    if (r.partition != role) continue;
    ++s.records;
    s.predicted_positive += r.predicted;
    s.true_positive += (r.predicted && r.actual) ? 1 : 0;
    s.fallbacks += r.fallback ? 1 : 0;
  }
  const std::size_t denom = task == Task::CC ? s.records : s.predicted_positive;
  const std::size_t numer = task == Task::CC ? s.predicted_positive : s.true_positive;
  s.empty = denom == 0;
  s.precision = s.empty ? 0.0 : static_cast<double>(numer) / static_cast<double>(denom);
  return s;
}

// ---------------------------------------------------------------------------
// Network views

// Everything the tasks query about one network model: the graph used for
// collective classification, the training/validation/testing edge-sets for
// link prediction (undirected), and Louvain communities on both.
struct NetworkViews {
  EdgeSet cc_edges;
  std::array<EdgeSet, 3> lp_edges;  // indexed by Role
  Graph cc;
  std::array<Graph, 3> lp;
  Graph lp_union;
  std::optional<CommunityAssignment> cc_communities;
  std::optional<CommunityAssignment> lp_communities;

  [[nodiscard]] const Graph& lp_graph(Role r) const { return lp[static_cast<std::size_t>(r)]; }
  [[nodiscard]] const EdgeSet& lp_edgeset(Role r) const { return lp_edges[static_cast<std::size_t>(r)]; }
};

inline NetworkViews make_network_views(EdgeSet cc, EdgeSet lp_training, EdgeSet lp_validation, EdgeSet lp_testing,
                                       bool with_communities, std::uint64_t louvain_seed) {
  NetworkViews v;
  v.cc_edges = std::move(cc);
  v.lp_edges[static_cast<std::size_t>(Role::Training)] = lp_training.symmetrized();
  v.lp_edges[static_cast<std::size_t>(Role::Validation)] = lp_validation.symmetrized();
  v.lp_edges[static_cast<std::size_t>(Role::Testing)] = lp_testing.symmetrized();
  v.cc = Graph(v.cc_edges);
  std::vector<Edge> all;
  for (std::size_t r = 0; r < 3; ++r) {
    v.lp[r] = Graph(v.lp_edges[r]);
    all.insert(all.end(), v.lp_edges[r].edges().begin(), v.lp_edges[r].edges().end());
  }
  v.lp_union = Graph(EdgeSet::build(v.cc_edges.n_nodes(), false, std::move(all)));
  if (with_communities) {
    LouvainOptions opt;
    opt.seed = louvain_seed;
    v.cc_communities = louvain(v.cc_edges, opt);
    v.lp_communities = louvain(v.lp_edgeset(Role::Training), opt);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Task execution

struct TaskOptions {
  LearnerParams learner;
  std::size_t lp_max_pairs_per_class = 250;
  bool cc_positive_only_training = false;
  LeakageAudit* audit = nullptr;
};

// Runs one configuration against one network and dataset. Holds per-config
// caches (global sample, ensemble members, per-community classifiers).
class TaskRunner {
public:
  TaskRunner(ModelConfig config, const NetworkViews& views, const PartitionedDataset& data, TaskOptions options)
      : config_(std::move(config)), views_(views), data_(data), options_(std::move(options)),
        train_(data.by_role(Role::Training)) {
    config_.locality.validate();
    require(views_.cc.n_nodes() == data_.n_nodes(), "network and dataset disagree on n_nodes");
  }

  [[nodiscard]] const ModelConfig& config() const { return config_; }

  // Both evaluation partitions, canonical order.
  PredictionBatch evaluate() {
    PredictionBatch batch;
    batch.config_key = config_.key();
    batch.task = config_.task;
    for (Role role : {Role::Validation, Role::Testing}) {
      auto part = config_.task == Task::CC ? run_cc(role) : run_lp(role);
      batch.records.insert(batch.records.end(), part.begin(), part.end());
    }
    batch.canonicalize();
    return batch;
  }

  // ---- neighborhoods -----------------------------------------------------

  struct NodeNeighborhood {
    std::vector<NodeId> nodes;
    bool fallback = false;  // community too small, replaced by the global sample
  };

  // Training nodes for collective classification at node i.
  NodeNeighborhood cc_neighborhood(NodeId i) {
    const auto& spec = config_.locality;
    switch (spec.locality) {
      case Locality::LocalAdjacency: return {neighbors(views_.cc, i), false};
      case Locality::LocalBfs: return {bfs_neighborhood(views_.cc, i, spec.bfs_k), false};
      case Locality::Community: {
        require(views_.cc_communities.has_value(), "community locality needs community assignments");
        const auto& comm = *views_.cc_communities;
        auto members = comm.members(comm.labels.at(i));
        if (members.size() < spec.community_min_members) return {global_nodes(), true};
        std::erase(members, i);
        return {std::move(members), false};
      }
      case Locality::Global: return {global_nodes(), false};
      case Locality::Ensemble: break;
    }
    throw Error("ensemble locality has no single-node neighborhood");
  }

  // The per-config global node sample, drawn once.
  const std::vector<NodeId>& global_nodes() {
    std::call_once(global_nodes_once_, [&] {
      const std::size_t n = data_.n_nodes();
      std::vector<NodeId> all(n);
      std::iota(all.begin(), all.end(), 0u);
      if (n > config_.locality.global_sample) {
        Rng rng(derive_seed(config_.stream(), "global-nodes"));
        rng.shuffle(std::span<NodeId>(all));
        all.resize(config_.locality.global_sample);
        std::sort(all.begin(), all.end());
      }
      global_nodes_ = std::move(all);
    });
    return global_nodes_;
  }

  struct TrainingPairs {
    PairSplit pairs;  // balanced and capped
    bool fallback = false;
  };

  // Link-prediction training pairs at node i on the training edge-set.
  TrainingPairs lp_training_pairs(NodeId i) {
    const auto& spec = config_.locality;
    const Graph& g = views_.lp_graph(Role::Training);
    switch (spec.locality) {
      case Locality::LocalAdjacency: return {balance(egonet(g, i).pairs, derive_seed(config_.stream(), "lp-ego", i)), false};
      case Locality::LocalBfs: {
        auto nodes = bfs_neighborhood(g, i, spec.bfs_k);
        nodes.push_back(i);
        std::sort(nodes.begin(), nodes.end());
        return {induced_balanced(g, nodes, derive_seed(config_.stream(), "lp-bfs", i)), false};
      }
      case Locality::Community: {
        require(views_.lp_communities.has_value(), "community locality needs community assignments");
        const auto c = views_.lp_communities->labels.at(i);
        auto members = views_.lp_communities->members(c);
        if (members.size() < spec.community_min_members) return {global_pairs(), true};
        return {induced_balanced(g, members, derive_seed(config_.stream(), "lp-community", c)), false};
      }
      case Locality::Global: return {global_pairs(), false};
      case Locality::Ensemble: break;
    }
    throw Error("ensemble locality has no single-node pair neighborhood");
  }

  // ---- tasks -------------------------------------------------------------

  std::vector<PredictionRecord> run_cc(Role role) {
    require(config_.task == Task::CC, "run_cc on a non-CC config");
    if (config_.locality.locality == Locality::Ensemble) return run_ensemble(role);
    const auto& eval = data_.by_role(role);
    std::vector<PredictionRecord> out;
    for (NodeId i = 0; i < data_.n_nodes(); ++i) {
      std::optional<NodeNeighborhood> hood;
      for (std::size_t l = 0; l < eval.labels.size(); ++l) {
        if (eval.labels.at(l, i) != 1) continue;
        if (!hood) hood = cc_neighborhood(i);
        const bool shared = config_.locality.locality == Locality::Global || hood->fallback;
        std::optional<Classifier> local;
        const Classifier* clf = nullptr;
        if (shared) {
          clf = global_cc_classifier(l);
        } else {
          auto ts = cc_training_set(hood->nodes, l);
          local = train(config_.classifier, ts, options_.learner, derive_seed(config_.stream(), "cc", l, i));
          if (local) clf = &*local;
        }
        PredictionRecord rec{role, i, eval.labels.name(l), 0, 1, hood->fallback};
        if (clf)
          rec.predicted = clf->predict(eval.matrix.row(i), cc_record_key(role, i, l));
        else
          rec.fallback = true;
        out.push_back(std::move(rec));
      }
    }
    return out;
  }

  std::vector<PredictionRecord> run_lp(Role role) {
    require(config_.task == Task::LP, "run_lp on a non-LP config");
    const auto& eval = data_.by_role(role);
    const auto plan = lp_evaluation_plan(role);
    std::vector<PredictionRecord> out;
    const bool ensemble = config_.locality.locality == Locality::Ensemble;
    for (const auto& [i, pairs] : plan) {
      std::vector<EnsembleMember> voters;
      const Classifier* clf = nullptr;
      bool fallback = false;
      if (ensemble) {
        auto& ens = lp_ensemble();
        if (ens.members.size() >= config_.locality.ensemble_knn) {
          voters = nearest_members(ens.members, eval.matrix.row(i), config_.network.effective_measure(),
                                   config_.locality.ensemble_knn, train_.matrix);
        } else {
          clf = global_lp_classifier();
          fallback = true;
        }
      } else {
        auto trained = lp_classifier(i);
        clf = trained.first;
        fallback = trained.second;
      }
      for (const auto& [j, actual] : pairs) {
        PredictionRecord rec{role, i, pair_label(i, j), 0, actual, fallback};
        const auto x = edge_features(eval.matrix.row(i), eval.matrix.row(j));
        const auto key = derive_seed(pair_key(i, j), "lp-record", static_cast<int>(role));
        if (!voters.empty())
          rec.predicted = majority_vote(voters, x, key);
        else if (clf)
          rec.predicted = clf->predict(x, key);
        else
          rec.fallback = true;
        out.push_back(std::move(rec));
      }
    }
    return out;
  }

  // Ensemble locality: the top ensemble_k nodes under the configured order
  // each train a local classifier; the ensemble_knn members most similar to
  // the test node vote.
  std::vector<PredictionRecord> run_ensemble(Role role) {
    require(config_.locality.locality == Locality::Ensemble, "run_ensemble on a non-ensemble config");
    if (config_.task == Task::LP) return run_lp(role);
    const auto& eval = data_.by_role(role);
    std::vector<PredictionRecord> out;
    for (NodeId i = 0; i < data_.n_nodes(); ++i) {
      for (std::size_t l = 0; l < eval.labels.size(); ++l) {
        if (eval.labels.at(l, i) != 1) continue;
        const auto& ens = cc_ensemble(l);
        PredictionRecord rec{role, i, eval.labels.name(l), 0, 1, false};
        if (ens.members.size() >= config_.locality.ensemble_knn) {
          rec.predicted = ensemble_vote(ens.members, eval.matrix.row(i), config_.network.effective_measure(),
                                        config_.locality.ensemble_knn, train_.matrix, cc_record_key(role, i, l));
        } else {
          rec.fallback = true;
          const auto* g = global_cc_classifier(l);
          rec.predicted = g ? g->predict(eval.matrix.row(i), cc_record_key(role, i, l)) : 0;
        }
        out.push_back(std::move(rec));
      }
    }
    return out;
  }

  // Ensemble member nodes under the configured order (before trainability).
  std::vector<NodeId> ensemble_order(const Graph& g) {
    const std::size_t n = data_.n_nodes();
    std::vector<NodeId> nodes(n);
    std::iota(nodes.begin(), nodes.end(), 0u);
    std::vector<double> score(n, 0.0);
    switch (config_.locality.order) {
      case EnsembleOrder::Degree:
        for (NodeId i = 0; i < n; ++i) score[i] = static_cast<double>(g.degree(i));
        break;
      case EnsembleOrder::AttrSum:
        for (NodeId i = 0; i < n; ++i) score[i] = train_.matrix.row(i).sum();
        break;
      case EnsembleOrder::AttrUnique:
        for (NodeId i = 0; i < n; ++i) score[i] = static_cast<double>(train_.matrix.row(i).nnz());
        break;
      case EnsembleOrder::Random: {
        Rng rng(derive_seed(config_.stream(), "ensemble-random"));
        rng.shuffle(std::span<NodeId>(nodes));
        nodes.resize(std::min(n, config_.locality.ensemble_k));
        return nodes;
      }
    }
    std::stable_sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) { return score[a] > score[b]; });
    nodes.resize(std::min(n, config_.locality.ensemble_k));
    return nodes;
  }

private:
  // Per-record key for keyed classifiers (coin flips).
  static std::uint64_t cc_record_key(Role role, NodeId i, std::size_t l) {
    return derive_seed(i, "cc-record", static_cast<int>(role), l);
  }

  struct Ensemble {
    std::vector<std::unique_ptr<Classifier>> owned;
    std::vector<EnsembleMember> members;
  };

  TrainingSet cc_training_set(const std::vector<NodeId>& nodes, std::size_t l) {
    TrainingSet ts;
    for (NodeId j : nodes) {
      const auto y = train_.labels.at(l, j);
      if (options_.cc_positive_only_training && y != 1) continue;
      ts.add(train_.matrix.row(j), y, j, train_.role, options_.audit);
    }
    return ts;
  }

  const Classifier* global_cc_classifier(std::size_t l) {
    std::lock_guard lock(cache_mutex_);
    auto it = global_cc_.find(l);
    if (it == global_cc_.end()) {
      auto ts = cc_training_set(global_nodes(), l);
      auto clf = train(config_.classifier, ts, options_.learner, derive_seed(config_.stream(), "cc-global", l));
      it = global_cc_.emplace(l, clf ? std::make_unique<Classifier>(std::move(*clf)) : nullptr).first;
    }
    return it->second.get();
  }

  const Ensemble& cc_ensemble(std::size_t l) {
    std::lock_guard lock(cache_mutex_);
    auto it = cc_ensembles_.find(l);
    if (it != cc_ensembles_.end()) return it->second;
    Ensemble ens;
    for (NodeId m : ensemble_order(views_.cc)) {
      auto ts = cc_training_set(neighbors(views_.cc, m), l);
      auto clf = train(config_.classifier, ts, options_.learner, derive_seed(config_.stream(), "cc-member", l, m));
      if (!clf) continue;
      ens.owned.push_back(std::make_unique<Classifier>(std::move(*clf)));
      ens.members.push_back({m, ens.owned.back().get()});
    }
    return cc_ensembles_.emplace(l, std::move(ens)).first->second;
  }

  // Down-sample the majority side to the minority size, capped per class.
  PairSplit balance(PairSplit p, std::uint64_t seed) const {
    const std::size_t m = std::min({p.edges.size(), p.nonedges.size(), options_.lp_max_pairs_per_class});
    Rng rng(seed);
    auto take = [&](std::vector<std::pair<NodeId, NodeId>>& v) {
      if (v.size() > m) {
        for (std::size_t t = 0; t < m; ++t) std::swap(v[t], v[t + static_cast<std::size_t>(rng.below(v.size() - t))]);
        v.resize(m);
      }
      std::sort(v.begin(), v.end());
    };
    if (m == 0) return {};
    take(p.edges);
    take(p.nonedges);
    return p;
  }

  // Induced pairs on a node set without enumerating every non-edge when only
  // a balanced sample of them is needed.
  PairSplit induced_balanced(const Graph& g, const std::vector<NodeId>& nodes, std::uint64_t seed) const {
    const std::size_t k = nodes.size();
    const std::size_t total = k < 2 ? 0 : k * (k - 1) / 2;
    std::vector<std::uint8_t> in(g.n_nodes(), 0);
    for (NodeId u : nodes) in[u] = 1;
    PairSplit p;
    for (NodeId u : nodes)
      for (NodeId v : g.undirected_neighbors(u))
        if (v > u && in[v]) p.edges.emplace_back(u, v);
    const std::size_t nonedge_count = total - p.edges.size();
    const std::size_t want = std::min({p.edges.size(), nonedge_count, options_.lp_max_pairs_per_class});
    if (want == 0) return {};
    if (4 * want > nonedge_count) return balance(induced_pairs(g, nodes), seed);
    Rng rng(derive_seed(seed, "nonedges"));
    std::unordered_set<std::uint64_t> chosen;
    while (p.nonedges.size() < want) {
      auto u = nodes[rng.below(k)], v = nodes[rng.below(k)];
      if (u == v || g.adjacent(u, v) || !chosen.insert(pair_key(u, v)).second) continue;
      p.nonedges.emplace_back(std::min(u, v), std::max(u, v));
    }
    return balance(std::move(p), seed);
  }

  TrainingSet lp_training_set(const PairSplit& pairs) {
    TrainingSet ts;
    for (const auto& [u, v] : pairs.edges)
      ts.add(edge_features(train_.matrix.row(u), train_.matrix.row(v)), 1, pair_key(u, v), train_.role, options_.audit);
    for (const auto& [u, v] : pairs.nonedges)
      ts.add(edge_features(train_.matrix.row(u), train_.matrix.row(v)), 0, pair_key(u, v), train_.role, options_.audit);
    return ts;
  }

  // Fixed global training pairs: up to global_sample/2 training edges and as
  // many non-edges of the joined network.
  const PairSplit& global_pairs() {
    std::call_once(global_pairs_once_, [&] {
      const auto& edges = views_.lp_edgeset(Role::Training).edges();
      const std::size_t half = std::max<std::size_t>(1, config_.locality.global_sample / 2);
      PairSplit p;
      for (const auto& e : edges) p.edges.emplace_back(e.u, e.v);
      Rng rng(derive_seed(config_.stream(), "global-edges"));
      if (p.edges.size() > half) {
        for (std::size_t t = 0; t < half; ++t)
          std::swap(p.edges[t], p.edges[t + static_cast<std::size_t>(rng.below(p.edges.size() - t))]);
        p.edges.resize(half);
      }
      std::sort(p.edges.begin(), p.edges.end());
      const std::size_t n = data_.n_nodes();
      const std::uint64_t population = (n < 2 ? 0 : n * (n - 1) / 2) - views_.lp_union.undirected_edge_count();
      const auto count = static_cast<std::size_t>(std::min<std::uint64_t>(p.edges.size(), population));
      p.nonedges = sample_nonedges(views_.lp_union, count, derive_seed(config_.stream(), "global-nonedges"));
      std::sort(p.nonedges.begin(), p.nonedges.end());
      if (p.nonedges.empty()) p.edges.clear();
      for (const auto& [u, v] : p.nonedges) reserved_.insert(pair_key(u, v));
      global_pairs_ = std::move(p);
    });
    return global_pairs_;
  }

  const Classifier* global_lp_classifier() {
    std::lock_guard lock(cache_mutex_);
    if (!global_lp_ready_) {
      auto ts = lp_training_set(global_pairs());
      auto clf = train(config_.classifier, ts, options_.learner, derive_seed(config_.stream(), "lp-global"));
      if (clf) global_lp_ = std::make_unique<Classifier>(std::move(*clf));
      global_lp_ready_ = true;
    }
    return global_lp_.get();
  }

  // Classifier for test node i, shared across evaluation partitions since it
  // only sees training data. Second member flags a fallback.
  std::pair<const Classifier*, bool> lp_classifier(NodeId i) {
    const auto loc = config_.locality.locality;
    if (loc == Locality::Global) return {global_lp_classifier(), false};
    if (loc == Locality::Community) {
      const auto c = views_.lp_communities.value().labels.at(i);
      auto it = lp_by_community_.find(c);
      if (it == lp_by_community_.end()) {
        auto pairs = lp_training_pairs(i);
        if (pairs.fallback) return {global_lp_classifier(), true};
        auto ts = lp_training_set(pairs.pairs);
        auto clf = train(config_.classifier, ts, options_.learner, derive_seed(config_.stream(), "lp-community", c));
        it = lp_by_community_.emplace(c, clf ? std::make_unique<Classifier>(std::move(*clf)) : nullptr).first;
      }
      return {it->second.get(), it->second == nullptr};
    }
    auto it = lp_by_node_.find(i);
    if (it == lp_by_node_.end()) {
      auto pairs = lp_training_pairs(i);
      auto ts = lp_training_set(pairs.pairs);
      auto clf = train(config_.classifier, ts, options_.learner, derive_seed(config_.stream(), "lp-node", i));
      it = lp_by_node_.emplace(i, clf ? std::make_unique<Classifier>(std::move(*clf)) : nullptr).first;
    }
    return {it->second.get(), it->second == nullptr};
  }

  Ensemble& lp_ensemble() {
    if (lp_ensemble_ready_) return lp_ensemble_;
    const Graph& g = views_.lp_graph(Role::Training);
    for (NodeId m : ensemble_order(g)) {
      auto pairs = balance(egonet(g, m).pairs, derive_seed(config_.stream(), "lp-member-ego", m));
      auto ts = lp_training_set(pairs);
      auto clf = train(config_.classifier, ts, options_.learner, derive_seed(config_.stream(), "lp-member", m));
      if (!clf) continue;
      lp_ensemble_.owned.push_back(std::make_unique<Classifier>(std::move(*clf)));
      lp_ensemble_.members.push_back({m, lp_ensemble_.owned.back().get()});
    }
    lp_ensemble_ready_ = true;
    return lp_ensemble_;
  }

  // Evaluation instances per test node: the evaluation edges attributed to
  // it (each edge to one endpoint by a seeded coin) plus as many reserved
  // non-edges incident to it, disjoint from every partition's edges.
  std::vector<std::pair<NodeId, std::vector<std::pair<NodeId, std::uint8_t>>>> lp_evaluation_plan(Role role) {
    if (config_.locality.locality == Locality::Global ||
        (config_.locality.locality == Locality::Ensemble) || config_.locality.locality == Locality::Community)
      global_pairs();  // reserve global training non-edges first
    const auto& eval_edges = views_.lp_edgeset(role).edges();
    std::map<NodeId, std::vector<NodeId>> owned;
    std::unordered_set<std::uint64_t> used(reserved_);
    for (const auto& e : eval_edges) {
      const auto key = pair_key(e.u, e.v);
      const bool first = (derive_seed(config_.stream(), "lp-owner", static_cast<int>(role), key) >> 63) != 0;
      owned[first ? e.u : e.v].push_back(first ? e.v : e.u);
      used.insert(key);
    }
    std::vector<std::pair<NodeId, std::vector<std::pair<NodeId, std::uint8_t>>>> plan;
    for (auto& [i, others] : owned) {
      std::sort(others.begin(), others.end());
      Rng rng(derive_seed(config_.stream(), "lp-neg", static_cast<int>(role), i));
      auto negatives = sample_incident_nonedges(views_.lp_union, i, others.size(), rng, used);
      others.resize(std::min(others.size(), negatives.size()));
      if (others.empty()) continue;
      std::vector<std::pair<NodeId, std::uint8_t>> pairs;
      for (NodeId j : others) pairs.emplace_back(j, 1);
      for (NodeId j : negatives) {
        pairs.emplace_back(j, 0);
        used.insert(pair_key(i, j));
      }
      plan.emplace_back(i, std::move(pairs));
    }
    return plan;
  }

  ModelConfig config_;
  const NetworkViews& views_;
  const PartitionedDataset& data_;
  TaskOptions options_;
  const Partition& train_;

  std::mutex cache_mutex_;
  std::once_flag global_nodes_once_, global_pairs_once_;
  std::vector<NodeId> global_nodes_;
  PairSplit global_pairs_;
  std::unordered_set<std::uint64_t> reserved_;
  std::map<std::size_t, std::unique_ptr<Classifier>> global_cc_;
  std::map<std::size_t, Ensemble> cc_ensembles_;
  std::unique_ptr<Classifier> global_lp_;
  bool global_lp_ready_ = false;
  std::map<std::uint32_t, std::unique_ptr<Classifier>> lp_by_community_;
  std::map<NodeId, std::unique_ptr<Classifier>> lp_by_node_;
  Ensemble lp_ensemble_;
  bool lp_ensemble_ready_ = false;
};

inline std::vector<PredictionRecord> run_cc(const ModelConfig& config, const NetworkViews& views,
                                            const PartitionedDataset& data, Role role, const TaskOptions& options = {}) {
  TaskRunner runner(config, views, data, options);
  return runner.run_cc(role);
}

inline std::vector<PredictionRecord> run_lp(const ModelConfig& config, const NetworkViews& views,
                                            const PartitionedDataset& data, Role role, const TaskOptions& options = {}) {
  TaskRunner runner(config, views, data, options);
  return runner.run_lp(role);
}

inline std::vector<PredictionRecord> run_ensemble(const ModelConfig& config, const NetworkViews& views,
                                                  const PartitionedDataset& data, Role role,
                                                  const TaskOptions& options = {}) {
  TaskRunner runner(config, views, data, options);
  return runner.run_ensemble(role);
}

inline PredictionBatch evaluate_config(const ModelConfig& config, const NetworkViews& views,
                                       const PartitionedDataset& data, const TaskOptions& options = {}) {
  TaskRunner runner(config, views, data, options);
  return runner.evaluate();
}

}  // namespace netsel
