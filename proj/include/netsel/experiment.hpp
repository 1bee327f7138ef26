#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "community.hpp"
#include "data.hpp"
#include "edgeset.hpp"
#include "graph.hpp"
#include "learn.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "selection.hpp"
#include "similarity.hpp"
#include "synth.hpp"
#include "tasks.hpp"

namespace netsel {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Experiment configuration

struct SynthSpec {
  std::size_t n_nodes = 500;
  std::size_t n_items = 400;
  std::optional<std::uint64_t> seed;  // defaults to the experiment seed
  PlantSpec plant;
  bool include_networks = true;  // expose the planted graphs as explicit networks
};

struct ExplicitNetworkSpec {
  std::string name;
  std::string path;
  bool original_ids = true;  // ids as in the events file, else dense ids
};

struct DatasetSpec {
  std::optional<std::string> events;
  EventFormat format = EventFormat::Tsv;
  bool header = false;
  std::optional<SynthSpec> synth;
  std::vector<LabelRule> label_rules;
  PartitionOptions partition;
  std::vector<ExplicitNetworkSpec> explicit_networks;
};

struct GridSpec {
  std::vector<std::string> models{"KNN", "TH"};
  std::vector<std::string> measures{"INT", "INT-N"};
  std::vector<double> densities{0.0025, 0.005, 0.01, 0.02};
  std::optional<std::string> density_reference;
  std::vector<double> density_factors{0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> localities{"local-adjacency", "local-bfs", "community", "ensemble-degree", "global"};
  std::vector<std::string> tasks{"CC", "LP"};
  std::vector<std::string> classifiers{"linear-svm"};
  std::vector<std::uint64_t> seeds;  // empty: the experiment seed
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string output = "netsel-out";
  bool strict = false;
  DatasetSpec dataset;
  GridSpec grid;
  NeighborhoodSpec locality;
  std::array<double, 3> lp_split{0.5, 0.25, 0.25};
  std::size_t lp_max_pairs_per_class = 250;
  LearnerParams learner;
  bool cc_positive_only_training = false;
  std::filesystem::path base_dir;  // relative paths resolve here; not serialized

  [[nodiscard]] std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }
  [[nodiscard]] std::vector<std::uint64_t> seeds() const { return grid.seeds.empty() ? std::vector{seed} : grid.seeds; }
};

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    require(ok, "unknown field '" + k + "' in " + where);
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::string_view rule_kind_name(LabelRuleKind k) {
  return k == LabelRuleKind::ItemThreshold ? "item" : "item-set";
}

inline Json plant_to_json(const PlantSpec& p) {
  return Json{{"label_communities", p.label_communities},
              {"label_item_fraction", p.label_item_fraction},
              {"label_items_per_node", p.label_items_per_node},
              {"label_drift", p.label_drift},
              {"label_value_min", p.label_value_min},
              {"label_value_max", p.label_value_max},
              {"homophily_degree", p.homophily_degree},
              {"formation_degree", p.formation_degree},
              {"edge_window", p.edge_window},
              {"edge_item_rate", p.edge_item_rate},
              {"edge_value_min", p.edge_value_min},
              {"edge_value_max", p.edge_value_max},
              {"rewire", p.rewire},
              {"noise", p.noise},
              {"noise_value_max", p.noise_value_max},
              {"segment_length", p.segment_length},
              {"label_min_count", p.label_min_count},
              {"label_min_value", p.label_min_value}};
}

inline PlantSpec plant_from_json(const Json& j) {
  PlantSpec p;
  check_keys(j,
             {"label_communities", "label_item_fraction", "label_items_per_node", "label_drift", "label_value_min",
              "label_value_max", "homophily_degree", "formation_degree", "edge_window", "edge_item_rate",
              "edge_value_min", "edge_value_max", "rewire", "noise", "noise_value_max", "segment_length",
              "label_min_count", "label_min_value"},
             "synth.plant");
  read(j, "label_communities", p.label_communities);
  read(j, "label_item_fraction", p.label_item_fraction);
  read(j, "label_items_per_node", p.label_items_per_node);
  read(j, "label_drift", p.label_drift);
  read(j, "label_value_min", p.label_value_min);
  read(j, "label_value_max", p.label_value_max);
  read(j, "homophily_degree", p.homophily_degree);
  read(j, "formation_degree", p.formation_degree);
  read(j, "edge_window", p.edge_window);
  read(j, "edge_item_rate", p.edge_item_rate);
  read(j, "edge_value_min", p.edge_value_min);
  read(j, "edge_value_max", p.edge_value_max);
  read(j, "rewire", p.rewire);
  read(j, "noise", p.noise);
  read(j, "noise_value_max", p.noise_value_max);
  read(j, "segment_length", p.segment_length);
  read(j, "label_min_count", p.label_min_count);
  read(j, "label_min_value", p.label_min_value);
  return p;
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  Json ds;
  if (c.dataset.events) {
    ds["events"] = Json{{"path", *c.dataset.events},
                        {"format", c.dataset.format == EventFormat::Tsv ? "tsv" : "csv"},
                        {"header", c.dataset.header}};
  }
  if (c.dataset.synth) {
    const auto& s = *c.dataset.synth;
    Json sj{{"n_nodes", s.n_nodes}, {"n_items", s.n_items}};
    if (s.seed) sj["seed"] = *s.seed;
    sj["include_networks"] = s.include_networks;
    sj["plant"] = detail::plant_to_json(s.plant);
    ds["synth"] = sj;
  }
  Json rules = Json::array();
  for (const auto& r : c.dataset.label_rules)
    rules.push_back(Json{{"name", r.name},
                         {"kind", detail::rule_kind_name(r.kind)},
                         {"items", std::vector<ItemId>(r.item_group.begin(), r.item_group.end())},
                         {"min_count", r.min_count},
                         {"min_value", r.min_value}});
  ds["label_rules"] = rules;
  Json part{{"mode", c.dataset.partition.mode == PartitionMode::EqualFrequency ? "equal-frequency" : "boundaries"}};
  if (c.dataset.partition.boundaries)
    part["boundaries"] = std::vector<std::int64_t>(c.dataset.partition.boundaries->begin(),
                                                   c.dataset.partition.boundaries->end());
  part["roles"] = Json::array();
  for (Role r : c.dataset.partition.roles) part["roles"].push_back(to_string(r));
  part["aggregation"] = c.dataset.partition.aggregation == Aggregation::Sum ? "sum" : "mean";
  ds["partition"] = part;
  Json nets = Json::array();
  for (const auto& n : c.dataset.explicit_networks)
    nets.push_back(Json{{"name", n.name}, {"path", n.path}, {"id_space", n.original_ids ? "original" : "dense"}});
  ds["explicit_networks"] = nets;

  Json grid{{"models", c.grid.models},   {"measures", c.grid.measures},     {"densities", c.grid.densities},
            {"density_factors", c.grid.density_factors}, {"localities", c.grid.localities},
            {"tasks", c.grid.tasks},     {"classifiers", c.grid.classifiers}, {"seeds", c.grid.seeds}};
  if (c.grid.density_reference) grid["density_reference"] = *c.grid.density_reference;

  return Json{{"seed", c.seed},
              {"workers", c.workers},
              {"output", c.output},
              {"strict", c.strict},
              {"dataset", ds},
              {"grid", grid},
              {"locality_params",
               {{"bfs_k", c.locality.bfs_k},
                {"ensemble_k", c.locality.ensemble_k},
                {"ensemble_knn", c.locality.ensemble_knn},
                {"global_sample", c.locality.global_sample},
                {"community_min_members", c.locality.community_min_members}}},
              {"lp", {{"split", c.lp_split}, {"max_pairs_per_class", c.lp_max_pairs_per_class}}},
              {"svm", {{"reg", c.learner.svm.reg}, {"epochs", c.learner.svm.epochs}}},
              {"rf",
               {{"trees", c.learner.rf.trees},
                {"max_depth", c.learner.rf.max_depth},
                {"feature_frac", c.learner.rf.feature_frac},
                {"min_leaf", c.learner.rf.min_leaf},
                {"bootstrap", c.learner.rf.bootstrap}}},
              {"cc_positive_only_training", c.cc_positive_only_training}};
}

inline ExperimentConfig config_from_json(const Json& j, std::filesystem::path base_dir = {}) {
  using detail::check_keys;
  using detail::read;
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  check_keys(j,
             {"seed", "workers", "output", "strict", "dataset", "grid", "locality_params", "lp", "svm", "rf",
              "cc_positive_only_training"},
             "config");
  read(j, "seed", c.seed);
  read(j, "workers", c.workers);
  read(j, "output", c.output);
  read(j, "strict", c.strict);
  read(j, "cc_positive_only_training", c.cc_positive_only_training);

  require(j.contains("dataset"), "config needs a dataset block");
  const auto& ds = j.at("dataset");
  check_keys(ds, {"events", "synth", "label_rules", "partition", "explicit_networks"}, "dataset");
  if (ds.contains("events")) {
    const auto& e = ds.at("events");
    if (e.is_string()) {
      c.dataset.events = e.get<std::string>();
    } else {
      check_keys(e, {"path", "format", "header"}, "dataset.events");
      c.dataset.events = e.at("path").get<std::string>();
      if (e.contains("format")) c.dataset.format = parse_event_format(e.at("format").get<std::string>());
      read(e, "header", c.dataset.header);
    }
  }
  if (ds.contains("synth")) {
    const auto& s = ds.at("synth");
    check_keys(s, {"n_nodes", "n_items", "seed", "include_networks", "plant"}, "dataset.synth");
    SynthSpec spec;
    read(s, "n_nodes", spec.n_nodes);
    read(s, "n_items", spec.n_items);
    if (s.contains("seed")) spec.seed = s.at("seed").get<std::uint64_t>();
    read(s, "include_networks", spec.include_networks);
    if (s.contains("plant")) spec.plant = detail::plant_from_json(s.at("plant"));
    c.dataset.synth = spec;
  }
  require(c.dataset.events.has_value() != c.dataset.synth.has_value(),
          "dataset needs exactly one of 'events' or 'synth'");
  if (ds.contains("label_rules")) {
    for (const auto& r : ds.at("label_rules")) {
      check_keys(r, {"name", "kind", "items", "min_count", "min_value"}, "label rule");
      LabelRule rule;
      rule.name = r.at("name").get<std::string>();
      if (r.contains("kind")) {
        const auto k = r.at("kind").get<std::string>();
        require(k == "item" || k == "item-set", "label rule kind must be 'item' or 'item-set'");
        rule.kind = k == "item" ? LabelRuleKind::ItemThreshold : LabelRuleKind::ItemSetThreshold;
      }
      for (auto item : r.at("items").get<std::vector<ItemId>>()) rule.item_group.insert(item);
      read(r, "min_count", rule.min_count);
      read(r, "min_value", rule.min_value);
      c.dataset.label_rules.push_back(std::move(rule));
    }
  }
  if (ds.contains("partition")) {
    const auto& p = ds.at("partition");
    check_keys(p, {"mode", "boundaries", "roles", "aggregation"}, "dataset.partition");
    if (p.contains("mode")) {
      const auto m = p.at("mode").get<std::string>();
      require(m == "equal-frequency" || m == "boundaries", "partition mode must be 'equal-frequency' or 'boundaries'");
      c.dataset.partition.mode = m == "boundaries" ? PartitionMode::ExplicitBoundaries : PartitionMode::EqualFrequency;
    }
    if (p.contains("boundaries")) {
      auto b = p.at("boundaries").get<std::vector<std::int64_t>>();
      require(b.size() == 2, "partition boundaries need exactly two values");
      c.dataset.partition.boundaries = std::array<std::int64_t, 2>{b[0], b[1]};
    }
    if (p.contains("roles")) {
      auto roles = p.at("roles").get<std::vector<std::string>>();
      require(roles.size() == 3, "partition roles need exactly three entries");
      for (std::size_t s = 0; s < 3; ++s) c.dataset.partition.roles[s] = parse_role(roles[s]);
    }
    if (p.contains("aggregation"))
      c.dataset.partition.aggregation = parse_aggregation(p.at("aggregation").get<std::string>());
  }
  if (ds.contains("explicit_networks")) {
    for (const auto& n : ds.at("explicit_networks")) {
      check_keys(n, {"name", "path", "id_space"}, "explicit network");
      ExplicitNetworkSpec spec;
      spec.name = n.at("name").get<std::string>();
      spec.path = n.at("path").get<std::string>();
      if (n.contains("id_space")) {
        const auto s = n.at("id_space").get<std::string>();
        require(s == "original" || s == "dense", "id_space must be 'original' or 'dense'");
        spec.original_ids = s == "original";
      }
      c.dataset.explicit_networks.push_back(std::move(spec));
    }
  }

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g,
               {"models", "measures", "densities", "density_reference", "density_factors", "localities", "tasks",
                "classifiers", "seeds"},
               "grid");
    read(g, "models", c.grid.models);
    read(g, "measures", c.grid.measures);
    read(g, "densities", c.grid.densities);
    if (g.contains("density_reference")) c.grid.density_reference = g.at("density_reference").get<std::string>();
    read(g, "density_factors", c.grid.density_factors);
    read(g, "localities", c.grid.localities);
    read(g, "tasks", c.grid.tasks);
    read(g, "classifiers", c.grid.classifiers);
    read(g, "seeds", c.grid.seeds);
  }
  if (j.contains("locality_params")) {
    const auto& l = j.at("locality_params");
    check_keys(l, {"bfs_k", "ensemble_k", "ensemble_knn", "global_sample", "community_min_members"},
               "locality_params");
    read(l, "bfs_k", c.locality.bfs_k);
    read(l, "ensemble_k", c.locality.ensemble_k);
    read(l, "ensemble_knn", c.locality.ensemble_knn);
    read(l, "global_sample", c.locality.global_sample);
    read(l, "community_min_members", c.locality.community_min_members);
  }
  if (j.contains("lp")) {
    const auto& l = j.at("lp");
    check_keys(l, {"split", "max_pairs_per_class"}, "lp");
    read(l, "split", c.lp_split);
    read(l, "max_pairs_per_class", c.lp_max_pairs_per_class);
  }
  if (j.contains("svm")) {
    const auto& s = j.at("svm");
    check_keys(s, {"reg", "epochs"}, "svm");
    read(s, "reg", c.learner.svm.reg);
    read(s, "epochs", c.learner.svm.epochs);
  }
  if (j.contains("rf")) {
    const auto& r = j.at("rf");
    check_keys(r, {"trees", "max_depth", "feature_frac", "min_leaf", "bootstrap"}, "rf");
    read(r, "trees", c.learner.rf.trees);
    read(r, "max_depth", c.learner.rf.max_depth);
    read(r, "feature_frac", c.learner.rf.feature_frac);
    read(r, "min_leaf", c.learner.rf.min_leaf);
    read(r, "bootstrap", c.learner.rf.bootstrap);
  }
  c.locality.validate();
  require(c.workers >= 1, "workers must be >= 1");
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Grid

inline std::string density_label(double d) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  require(ec == std::errc(), "cannot format density");
  return std::string(buf, end);
}

inline double undirected_density(const EdgeSet& g) {
  const double n = static_cast<double>(g.n_nodes());
  return n < 2 ? 0.0 : static_cast<double>(g.size()) / (n * (n - 1) / 2);
}

// Network specs of the grid, sorted by key. Explicit densities need the
// loaded networks (observed density and density-factor references).
inline std::vector<NetworkSpec> network_grid(const ExperimentConfig& c, const std::map<std::string, EdgeSet>& explicit_nets) {
  std::map<std::string, NetworkSpec> out;
  for (const auto& model_name : c.grid.models) {
    const auto model = parse_network_model(model_name);
    if (model == NetworkModel::Explicit) {
      for (const auto& [name, g] : explicit_nets) {
        NetworkSpec s;
        s.model = model;
        s.explicit_name = name;
        s.density = undirected_density(g);
        s.density_label = "observed";
        out.emplace(s.key(), s);
      }
      continue;
    }
    for (const auto& measure_name : c.grid.measures) {
      NetworkSpec s;
      s.model = model;
      s.measure = parse_measure(measure_name);
      for (double d : c.grid.densities) {
        require(d > 0.0 && d <= 1.0, "densities must lie in (0, 1]");
        s.density = d;
        s.density_label = density_label(d);
        out.emplace(s.key(), s);
      }
      if (c.grid.density_reference) {
        auto it = explicit_nets.find(*c.grid.density_reference);
        require(it != explicit_nets.end(), "density_reference names unknown explicit network '" +
                                               *c.grid.density_reference + "'");
        const double observed = undirected_density(it->second);
        for (double f : c.grid.density_factors) {
          require(f > 0.0, "density factors must be positive");
          s.density = f * observed;
          s.density_label = "x" + density_label(f);
          out.emplace(s.key(), s);
        }
      }
    }
  }
  std::vector<NetworkSpec> v;
  for (auto& [_, s] : out) v.push_back(std::move(s));
  return v;
}

inline std::vector<ModelConfig> config_grid(const ExperimentConfig& c, const std::vector<NetworkSpec>& networks) {
  std::map<std::string, ModelConfig> out;
  for (const auto& net : networks)
    for (const auto& loc : c.grid.localities)
      for (const auto& task : c.grid.tasks)
        for (const auto& clf : c.grid.classifiers)
          for (auto seed : c.seeds()) {
            ModelConfig m;
            m.network = net;
            m.locality = parse_locality(loc, c.locality);
            m.task = parse_task(task);
            m.classifier = parse_classifier(clf);
            m.seed = seed;
            const auto key = m.key();
            require(out.emplace(key, m).second, "duplicate grid cell '" + key + "'");
          }
  std::vector<ModelConfig> v;
  for (auto& [_, m] : out) v.push_back(std::move(m));
  return v;
}

// ---------------------------------------------------------------------------
// Artifacts

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing stage input: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string batch_file_name(const std::string& key) {
  std::string s;
  for (char ch : key) {
    if (ch == '|') s += "__";
    else if (ch == ':') s += '-';
    else s += ch;
  }
  return s + ".tsv";
}

struct Dataset {
  EventLog log;
  std::vector<LabelRule> rules;
  std::map<std::string, EdgeSet> explicit_networks;
  PartitionedDataset parts;
};

namespace detail {

inline void write_rules(Json& out, const std::vector<LabelRule>& rules) {
  out = Json::array();
  for (const auto& r : rules)
    out.push_back(Json{{"name", r.name},
                       {"kind", rule_kind_name(r.kind)},
                       {"items", std::vector<ItemId>(r.item_group.begin(), r.item_group.end())},
                       {"min_count", r.min_count},
                       {"min_value", r.min_value}});
}

inline std::vector<LabelRule> read_rules(const Json& j) {
  std::vector<LabelRule> rules;
  for (const auto& r : j) {
    LabelRule rule;
    rule.name = r.at("name").get<std::string>();
    rule.kind = r.at("kind").get<std::string>() == "item" ? LabelRuleKind::ItemThreshold : LabelRuleKind::ItemSetThreshold;
    for (auto item : r.at("items").get<std::vector<ItemId>>()) rule.item_group.insert(item);
    rule.min_count = r.at("min_count").get<std::size_t>();
    rule.min_value = r.at("min_value").get<double>();
    rules.push_back(std::move(rule));
  }
  return rules;
}

inline std::string edgeset_text(const EdgeSet& g) {
  std::ostringstream os;
  write_edgeset(os, g);
  return os.str();
}

inline void check_name(const std::string& name, const std::string& what) {
  require(!name.empty(), what + " name must not be empty");
  for (char ch : name)
    require(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.',
            what + " name '" + name + "' may only use letters, digits, '-', '_' and '.'");
}

}  // namespace detail

inline PartitionedDataset partition_dataset(const ExperimentConfig& c, const EventLog& log,
                                            const std::vector<LabelRule>& rules) {
  require(!rules.empty(), "no label rules configured");
  auto parts = label_partitions(partition_by_time(log, c.dataset.partition), rules);
  if (c.strict && !parts.warnings.empty()) throw Error("strict mode: " + parts.warnings.front());
  return parts;
}

// Ingest (or generate) the dataset and write dataset/ artifacts.
inline Dataset stage_dataset(const ExperimentConfig& c, const std::filesystem::path& out) {
  Dataset d;
  if (c.dataset.synth) {
    const auto& s = *c.dataset.synth;
    auto synth = synth_generate(s.seed.value_or(c.seed), s.n_nodes, s.n_items, s.plant);
    d.log = std::move(synth.log);
    d.rules = c.dataset.label_rules.empty() ? synth.rules : c.dataset.label_rules;
    if (s.include_networks) {
      d.explicit_networks.emplace("homophily", std::move(synth.homophily));
      d.explicit_networks.emplace("formation", std::move(synth.formation));
    }
  } else {
    IngestOptions opt;
    opt.format = c.dataset.format;
    opt.header = c.dataset.header;
    opt.strict = c.strict;
    auto res = ingest_events(c.resolve(*c.dataset.events), opt);
    d.log = std::move(res.log);
    d.rules = c.dataset.label_rules;
  }
  std::unordered_map<std::uint64_t, NodeId> id_map;
  for (NodeId i = 0; i < d.log.n_nodes(); ++i) id_map.emplace(d.log.original_ids[i], i);
  for (const auto& spec : c.dataset.explicit_networks) {
    detail::check_name(spec.name, "explicit network");
    require(!d.explicit_networks.contains(spec.name), "duplicate explicit network '" + spec.name + "'");
    d.explicit_networks.emplace(spec.name, load_explicit_edges(c.resolve(spec.path), d.log.n_nodes(), spec.name,
                                                               spec.original_ids ? &id_map : nullptr));
  }
  for (const auto& r : d.rules) detail::check_name(r.name, "label rule");
  d.parts = partition_dataset(c, d.log, d.rules);

  std::ostringstream events, ids;
  for (const auto& e : d.log.records)
    events << e.node << '\t' << e.item << '\t' << format_double(e.value) << '\t' << e.timestamp << '\n';
  for (NodeId i = 0; i < d.log.n_nodes(); ++i) ids << i << '\t' << d.log.original_ids[i] << '\n';
  Json rules;
  detail::write_rules(rules, d.rules);
  Json part{{"boundaries", d.parts.boundaries}, {"segments", Json::array()}, {"warnings", d.parts.warnings}};
  for (const auto& s : d.parts.segments) {
    Json labels = Json::object();
    for (std::size_t l = 0; l < s.labels.size(); ++l) {
      const auto& v = s.labels.labels(l);
      labels[s.labels.name(l)] = std::count(v.begin(), v.end(), 1);
    }
    part["segments"].push_back(Json{{"role", to_string(s.role)},
                                    {"events", s.event_count},
                                    {"value_total", s.value_total},
                                    {"positives", labels}});
  }
  const auto dir = out / "dataset";
  write_atomic(dir / "events.tsv", events.str());
  write_atomic(dir / "node_ids.tsv", ids.str());
  write_atomic(dir / "label_rules.json", rules.dump(2) + "\n");
  write_atomic(dir / "partition.json", part.dump(2) + "\n");
  for (const auto& [name, g] : d.explicit_networks)
    write_atomic(dir / "explicit" / (name + ".tsv"), detail::edgeset_text(g));
  return d;
}

inline Dataset load_dataset(const ExperimentConfig& c, const std::filesystem::path& out) {
  const auto dir = out / "dataset";
  Dataset d;
  {
    std::istringstream in(read_file(dir / "node_ids.tsv"));
    std::string line;
    while (std::getline(in, line)) {
      auto f = detail::split_fields(line, '\t');
      std::uint64_t orig = 0;
      require(f.size() == 2 && detail::parse_number(f[1], orig), "malformed node_ids.tsv");
      d.log.original_ids.push_back(orig);
    }
  }
  {
    std::istringstream in(read_file(dir / "events.tsv"));
    std::string line;
    while (std::getline(in, line)) {
      auto f = detail::split_fields(line, '\t');
      Event e;
      std::uint64_t node = 0;
      require(f.size() == 4 && detail::parse_number(f[0], node) && detail::parse_number(f[1], e.item) &&
                  detail::parse_number(f[2], e.value) && detail::parse_number(f[3], e.timestamp) &&
                  node < d.log.n_nodes(),
              "malformed events.tsv line: " + line);
      e.node = static_cast<NodeId>(node);
      d.log.records.push_back(e);
    }
  }
  d.rules = detail::read_rules(Json::parse(read_file(dir / "label_rules.json")));
  if (std::filesystem::exists(dir / "explicit"))
    for (const auto& entry : std::filesystem::directory_iterator(dir / "explicit"))
      if (entry.path().extension() == ".tsv")
        d.explicit_networks.emplace(entry.path().stem().string(), read_edgeset(entry.path()));
  d.parts = partition_dataset(c, d.log, d.rules);
  return d;
}

// The four edge-sets of one network model.
struct NetworkEdges {
  EdgeSet cc;
  std::array<EdgeSet, 3> lp;  // indexed by Role
};

inline NetworkEdges infer_network(const ExperimentConfig& c, const NetworkSpec& spec, const Dataset& d) {
  NetworkEdges e;
  if (spec.model == NetworkModel::Explicit) {
    const auto& g = d.explicit_networks.at(spec.explicit_name);
    e.cc = g;
    auto split = split_edges_random(g, c.lp_split, derive_seed(derive_seed(c.seed, spec.explicit_name), "explicit-split"));
    e.lp[static_cast<std::size_t>(Role::Training)] = std::move(split[0]);
    e.lp[static_cast<std::size_t>(Role::Validation)] = std::move(split[1]);
    e.lp[static_cast<std::size_t>(Role::Testing)] = std::move(split[2]);
    return e;
  }
  const bool directed = spec.model == NetworkModel::Knn;
  const auto lambda = lambda_from_density(d.parts.n_nodes(), spec.density, directed);
  for (Role r : {Role::Validation, Role::Training, Role::Testing}) {
    const auto& matrix = d.parts.by_role(r).matrix;
    const std::string source(to_string(r));
    e.lp[static_cast<std::size_t>(r)] = spec.model == NetworkModel::Knn
                                            ? knn_graph(matrix, spec.measure, lambda, source)
                                            : threshold_graph(matrix, spec.measure, lambda, source);
  }
  e.cc = e.lp[static_cast<std::size_t>(Role::Training)];
  return e;
}

inline std::filesystem::path network_path(const std::filesystem::path& out, const NetworkSpec& s, const char* part) {
  return out / "networks" / (s.file_id() + "." + part + ".tsv");
}

inline std::map<std::string, NetworkEdges> stage_infer(const ExperimentConfig& c, const Dataset& d,
                                                       const std::filesystem::path& out) {
  const auto specs = network_grid(c, d.explicit_networks);
  std::vector<NetworkEdges> built(specs.size());
  parallel_for(specs.size(), c.workers, [&](std::size_t k) {
    try {
      built[k] = infer_network(c, specs[k], d);
    } catch (const std::exception& ex) {
      throw Error("network " + specs[k].key() + ": " + ex.what());
    }
  });
  std::map<std::string, NetworkEdges> result;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    write_atomic(network_path(out, specs[k], "cc"), detail::edgeset_text(built[k].cc));
    for (Role r : {Role::Training, Role::Validation, Role::Testing})
      write_atomic(network_path(out, specs[k], ("lp-" + std::string(to_string(r))).c_str()),
                   detail::edgeset_text(built[k].lp[static_cast<std::size_t>(r)]));
    result.emplace(specs[k].key(), std::move(built[k]));
  }
  return result;
}

inline std::map<std::string, NetworkEdges> load_networks(const ExperimentConfig& c, const Dataset& d,
                                                         const std::filesystem::path& out) {
  std::map<std::string, NetworkEdges> result;
  for (const auto& spec : network_grid(c, d.explicit_networks)) {
    NetworkEdges e;
    auto load = [&](const char* part) {
      const auto p = network_path(out, spec, part);
      if (!std::filesystem::exists(p)) throw Error("missing stage input: " + p.string());
      return read_edgeset(p);
    };
    e.cc = load("cc");
    for (Role r : {Role::Training, Role::Validation, Role::Testing})
      e.lp[static_cast<std::size_t>(r)] = load(("lp-" + std::string(to_string(r))).c_str());
    result.emplace(spec.key(), std::move(e));
  }
  return result;
}

struct EvaluationOutcome {
  std::vector<PredictionBatch> batches;  // canonical config order
  std::vector<double> wall_seconds;
  std::uint64_t audit_assertions = 0;
  std::uint64_t audit_violations = 0;
};

inline bool needs_communities(const ExperimentConfig& c) {
  return std::find(c.grid.localities.begin(), c.grid.localities.end(), "community") != c.grid.localities.end();
}

inline EvaluationOutcome stage_evaluate(const ExperimentConfig& c, const Dataset& d,
                                        const std::map<std::string, NetworkEdges>& networks,
                                        const std::filesystem::path& out) {
  const auto specs = network_grid(c, d.explicit_networks);
  std::map<std::string, NetworkViews> views;
  {
    std::vector<NetworkViews> built(specs.size());
    parallel_for(specs.size(), c.workers, [&](std::size_t k) {
      const auto& e = networks.at(specs[k].key());
      built[k] = make_network_views(e.cc, e.lp[1], e.lp[0], e.lp[2], needs_communities(c),
                                    derive_seed(derive_seed(c.seed, specs[k].key()), "louvain"));
    });
    for (std::size_t k = 0; k < specs.size(); ++k) views.emplace(specs[k].key(), std::move(built[k]));
  }
  const auto grid = config_grid(c, specs);
  LeakageAudit audit;
  TaskOptions options;
  options.learner = c.learner;
  options.lp_max_pairs_per_class = c.lp_max_pairs_per_class;
  options.cc_positive_only_training = c.cc_positive_only_training;
  options.audit = &audit;

  EvaluationOutcome result;
  result.batches.resize(grid.size());
  result.wall_seconds.resize(grid.size());
  parallel_for(grid.size(), c.workers, [&](std::size_t k) {
    const auto start = std::chrono::steady_clock::now();
    try {
      result.batches[k] = evaluate_config(grid[k], views.at(grid[k].network.key()), d.parts, options);
    } catch (const std::exception& ex) {
      throw Error("config " + grid[k].key() + ": " + ex.what());
    }
    result.wall_seconds[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  for (const auto& b : result.batches) {
    std::ostringstream os;
    write_batch(os, b);
    write_atomic(out / "batches" / batch_file_name(b.config_key), os.str());
  }
  result.audit_assertions = audit.assertions.load();
  result.audit_violations = audit.violations.load();
  return result;
}

inline std::vector<PredictionBatch> load_batches(const ExperimentConfig& c, const Dataset& d,
                                                 const std::filesystem::path& out) {
  std::vector<PredictionBatch> batches;
  for (const auto& m : config_grid(c, network_grid(c, d.explicit_networks))) {
    std::istringstream in(read_file(out / "batches" / batch_file_name(m.key())));
    batches.push_back(read_batch(in, m.task, m.key()));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string results_csv(const std::vector<EvaluationRecord>& records) {
  std::ostringstream os;
  os << "config_key,task,classifier,model,measure,density,locality,seed,precision_validation,precision_testing,"
        "records_validation,records_testing,predicted_positive_validation,predicted_positive_testing,"
        "fallbacks_validation,fallbacks_testing,empty_validation,empty_testing\n";
  for (const auto& r : records) {
    const auto f = parse_config_key(r.config_key);
    os << r.config_key << ',' << f.task << ',' << f.classifier << ',' << f.model << ',' << f.measure << ','
       << f.density << ',' << f.locality << ',' << f.seed << ',' << format_double(r.precision_validation) << ','
       << format_double(r.precision_testing) << ',' << r.validation.records << ',' << r.testing.records << ','
       << r.validation.predicted_positive << ',' << r.testing.predicted_positive << ',' << r.validation.fallbacks
       << ',' << r.testing.fallbacks << ',' << int(r.validation.empty) << ',' << int(r.testing.empty) << '\n';
  }
  return os.str();
}

inline std::vector<EvaluationRecord> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  require(line.rfind("config_key,", 0) == 0, "results.csv has an unexpected header");
  std::vector<EvaluationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_fields(line, ',');
    require(f.size() == 18, "malformed results.csv row: " + line);
    EvaluationRecord r;
    r.config_key = std::string(f[0]);
    int ev = 0, et = 0;
    require(detail::parse_number(f[8], r.precision_validation) && detail::parse_number(f[9], r.precision_testing) &&
                detail::parse_number(f[10], r.validation.records) && detail::parse_number(f[11], r.testing.records) &&
                detail::parse_number(f[12], r.validation.predicted_positive) &&
                detail::parse_number(f[13], r.testing.predicted_positive) &&
                detail::parse_number(f[14], r.validation.fallbacks) && detail::parse_number(f[15], r.testing.fallbacks) &&
                detail::parse_number(f[16], ev) && detail::parse_number(f[17], et),
            "malformed results.csv row: " + line);
    r.validation.precision = r.precision_validation;
    r.testing.precision = r.precision_testing;
    r.validation.empty = ev != 0;
    r.testing.empty = et != 0;
    out.push_back(std::move(r));
  }
  return out;
}

// Records grouped per (task, classifier) cell.
inline std::map<std::pair<std::string, std::string>, std::vector<EvaluationRecord>> by_cell(
    const std::vector<EvaluationRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<EvaluationRecord>> cells;
  for (const auto& r : records) {
    const auto f = parse_config_key(r.config_key);
    cells[{f.task, f.classifier}].push_back(r);
  }
  return cells;
}

struct SelectionOutputs {
  std::string selection_csv, cross_task_csv, match_mismatch_csv;
};

inline SelectionOutputs selection_reports(const std::vector<EvaluationRecord>& records) {
  SelectionOutputs o;
  std::ostringstream sel, cross, mm;
  sel << "task,classifier,configs,mu,mu10,delta_mu,p1,delta_p1,selected_key,rank,tau,tau_p,tau10,intersection10,"
         "effective_k,bold_delta_p1,bold_rank\n";
  const auto cells = by_cell(records);
  for (const auto& [cell, recs] : cells) {
    const auto s = selection_stats(recs);
    sel << cell.first << ',' << cell.second << ',' << s.configs << ',' << format_double(s.mu) << ','
        << format_double(s.mu_top10) << ',' << format_double(s.delta_mu) << ',' << format_double(s.p1) << ','
        << format_double(s.delta_p1) << ',' << s.selected_key << ',' << format_double(s.selected_rank) << ','
        << format_double(s.tau) << ',' << format_double(s.tau_p) << ',' << format_double(s.tau10) << ','
        << s.intersection10 << ',' << s.intersection_k << ',' << int(s.bold_delta_p1) << ',' << int(s.bold_rank)
        << '\n';
  }
  cross << "classifier,selection_task,evaluation_task,delta_p1,rank,evaluated_key\n";
  std::set<std::string> classifiers;
  for (const auto& [cell, _] : cells) classifiers.insert(cell.second);
  for (const auto& clf : classifiers) {
    auto find = [&](const char* task) {
      auto it = cells.find({task, clf});
      return it == cells.end() ? std::vector<EvaluationRecord>{} : it->second;
    };
    const auto table = cross_task(find("CC"), find("LP"));
    static constexpr std::array<const char*, 3> kRows{"CC", "LP", "average"};
    static constexpr std::array<const char*, 2> kCols{"CC", "LP"};
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t e = 0; e < 2; ++e) {
        cross << clf << ',' << kRows[s] << ',' << kCols[e] << ',';
        if (const auto& cellv = table.cells[s][e])
          cross << format_double(cellv->delta_p1) << ',' << format_double(cellv->rank) << ',' << cellv->selected_key;
        else
          cross << ",,";
        cross << '\n';
      }
  }
  mm << "task,classifier,group_by,value\n";
  for (const auto& [cell, recs] : cells)
    for (GroupBy g : {GroupBy::Locality, GroupBy::Model}) {
      mm << cell.first << ',' << cell.second << ',' << to_string(g) << ',';
      try {
        mm << format_double(match_mismatch(recs, g));
      } catch (const Error&) {
        mm << "NA";
      }
      mm << '\n';
    }
  o.selection_csv = sel.str();
  o.cross_task_csv = cross.str();
  o.match_mismatch_csv = mm.str();
  return o;
}

inline void stage_select(const std::filesystem::path& out) {
  const auto records = parse_results_csv(read_file(out / "results.csv"));
  require(!records.empty(), "results.csv holds no configs");
  const auto o = selection_reports(records);
  write_atomic(out / "selection.csv", o.selection_csv);
  write_atomic(out / "cross_task.csv", o.cross_task_csv);
  write_atomic(out / "match_mismatch.csv", o.match_mismatch_csv);
}

inline void stage_report(const std::vector<PredictionBatch>& batches, const EventLog& log,
                         const std::filesystem::path& out) {
  std::vector<EvaluationRecord> records;
  for (const auto& b : batches) records.push_back(make_record(b));
  std::ostringstream nd;
  nd << "task,classifier,node,original_id,records,precision,empty\n";
  for (const auto& row : node_difficulty(batches, 5))
    nd << row.task << ',' << row.classifier << ',' << row.node << ',' << log.original_ids.at(row.node) << ','
       << row.records << ',' << format_double(row.precision) << ',' << int(row.empty) << '\n';
  write_atomic(out / "results.csv", results_csv(records));
  write_atomic(out / "node_difficulty.csv", nd.str());
  stage_select(out);
}

inline void write_manifest(const std::filesystem::path& out, const Json& update) {
  Json m = Json::object();
  if (std::filesystem::exists(out / "manifest.json")) m = Json::parse(read_file(out / "manifest.json"));
  for (const auto& [k, v] : update.items()) m[k] = v;
  write_atomic(out / "manifest.json", m.dump(2) + "\n");
}

inline Json manifest_header(const ExperimentConfig& c) {
  return Json{{"version", kVersion}, {"prng", kPrngName}, {"seed", c.seed}, {"seeds", c.seeds()},
              {"workers", c.workers}, {"config", to_json(c)}};
}

inline Json evaluation_manifest(const ExperimentConfig& c, const Dataset& d, const EvaluationOutcome& ev) {
  Json configs = Json::array();
  for (std::size_t k = 0; k < ev.batches.size(); ++k)
    configs.push_back(Json{{"config_key", ev.batches[k].config_key}, {"wall_seconds", ev.wall_seconds[k]}});
  (void)c;
  return Json{{"configs", configs},
              {"leakage_audit", {{"assertions", ev.audit_assertions}, {"violations", ev.audit_violations}}},
              {"partition_warnings", d.parts.warnings}};
}

struct RunSummary {
  std::size_t configs = 0;
  std::uint64_t audit_assertions = 0;
  std::uint64_t audit_violations = 0;
  double wall_seconds = 0;
};

// ingest -> partition -> labels -> networks -> evaluation -> selection.
inline RunSummary run_experiment(const ExperimentConfig& c, const std::filesystem::path& out) {
  const auto start = std::chrono::steady_clock::now();
  auto d = stage_dataset(c, out);
  auto nets = stage_infer(c, d, out);
  auto ev = stage_evaluate(c, d, nets, out);
  stage_report(ev.batches, d.log, out);
  RunSummary s;
  s.configs = ev.batches.size();
  s.audit_assertions = ev.audit_assertions;
  s.audit_violations = ev.audit_violations;
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto m = manifest_header(c);
  const auto evaluation = evaluation_manifest(c, d, ev);
  for (const auto& [k, v] : evaluation.items()) m[k] = v;
  m["total_wall_seconds"] = s.wall_seconds;
  write_manifest(out, m);
  return s;
}

}  // namespace netsel
