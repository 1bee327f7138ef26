#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "json.hpp"

namespace netsel {

struct Edge {
  NodeId u;
  NodeId v;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

inline std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

inline std::pair<NodeId, NodeId> unpack_pair(std::uint64_t key) {
  return {static_cast<NodeId>(key >> 32), static_cast<NodeId>(key & 0xFFFFFFFFULL)};
}

// Where an edge-set came from.
struct Provenance {
  std::string model = "EXPLICIT";  // KNN | TH | EXPLICIT
  std::string measure;             // INT | INT-N, empty for explicit
  std::uint64_t lambda = 0;
  std::string source;              // partition role or explicit source name
  std::uint64_t shortfall = 0;
  std::uint64_t self_loops_dropped = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

inline void to_json(nlohmann::ordered_json& j, const Provenance& p) {
  j = nlohmann::ordered_json{{"model", p.model},   {"measure", p.measure},     {"lambda", p.lambda},
                             {"source", p.source}, {"shortfall", p.shortfall}, {"self_loops_dropped", p.self_loops_dropped}};
}

inline void from_json(const nlohmann::ordered_json& j, Provenance& p) {
  p.model = j.at("model").get<std::string>();
  p.measure = j.value("measure", std::string{});
  p.lambda = j.value("lambda", std::uint64_t{0});
  p.source = j.value("source", std::string{});
  p.shortfall = j.value("shortfall", std::uint64_t{0});
  p.self_loops_dropped = j.value("self_loops_dropped", std::uint64_t{0});
}

// Immutable edge list. Undirected sets store u < v; directed sets store (u, v)
// as given. Edges are kept sorted and unique, self-loops never stored.
class EdgeSet {
public:
  EdgeSet() = default;

  static EdgeSet build(std::size_t n_nodes, bool directed, std::vector<Edge> edges, Provenance prov = {}) {
    EdgeSet g;
    g.n_nodes_ = n_nodes;
    g.directed_ = directed;
    g.provenance_ = std::move(prov);
    std::uint64_t loops = 0;
    std::vector<Edge> kept;
    kept.reserve(edges.size());
    for (auto e : edges) {
      require(e.u < n_nodes && e.v < n_nodes, "edge endpoint out of range: (" + std::to_string(e.u) + ", " +
                                                   std::to_string(e.v) + ") with n_nodes=" + std::to_string(n_nodes));
      if (e.u == e.v) {
        ++loops;
        continue;
      }
      if (!directed && e.u > e.v) std::swap(e.u, e.v);
      kept.push_back(e);
    }
    // Stable sort then keep the first occurrence of each pair.
    std::stable_sort(kept.begin(), kept.end(),
                     [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    kept.erase(std::unique(kept.begin(), kept.end(), [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }),
               kept.end());
    g.edges_ = std::move(kept);
    g.provenance_.self_loops_dropped += loops;
    return g;
  }

  [[nodiscard]] std::size_t n_nodes() const { return n_nodes_; }
  [[nodiscard]] bool directed() const { return directed_; }
  [[nodiscard]] std::size_t size() const { return edges_.size(); }
  [[nodiscard]] bool empty() const { return edges_.empty(); }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const Provenance& provenance() const { return provenance_; }

  // Undirected view; reciprocal directed edges merge with weight max(w_uv, w_vu).
  [[nodiscard]] EdgeSet symmetrized() const {
    if (!directed_) return *this;
    std::unordered_map<std::uint64_t, double> best;
    std::vector<std::uint64_t> order;
    for (const auto& e : edges_) {
      auto key = pair_key(e.u, e.v);
      auto [it, inserted] = best.try_emplace(key, e.weight);
      if (inserted)
        order.push_back(key);
      else
        it->second = std::max(it->second, e.weight);
    }
    std::vector<Edge> out;
    out.reserve(order.size());
    for (auto key : order) {
      auto [a, b] = unpack_pair(key);
      out.push_back({a, b, best[key]});
    }
    return build(n_nodes_, false, std::move(out), provenance_);
  }

  [[nodiscard]] double density() const {
    if (n_nodes_ < 2) return 0.0;
    const double pairs = static_cast<double>(n_nodes_) * static_cast<double>(n_nodes_ - 1);
    return static_cast<double>(edges_.size()) / (directed_ ? pairs : pairs / 2.0);
  }

  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;

private:
  std::size_t n_nodes_ = 0;
  bool directed_ = false;
  std::vector<Edge> edges_;
  Provenance provenance_;
};

// ---------------------------------------------------------------------------
// Serialization: "# {provenance json}" header, "# n_nodes\t<n>", then
// u \t v \t similarity \t directed-flag per line.

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline void write_edgeset(std::ostream& out, const EdgeSet& g) {
  nlohmann::ordered_json header;
  to_json(header, g.provenance());
  out << "# " << header.dump() << '\n';
  out << "# n_nodes\t" << g.n_nodes() << '\n';
  out << "# directed\t" << (g.directed() ? 1 : 0) << '\n';
  for (const auto& e : g.edges())
    out << e.u << '\t' << e.v << '\t' << format_double(e.weight) << '\t' << (g.directed() ? 1 : 0) << '\n';
}

inline EdgeSet read_edgeset(std::istream& in) {
  std::string line;
  Provenance prov;
  std::optional<std::size_t> n_nodes;
  std::optional<bool> directed;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# n_nodes\t", 0) == 0) {
      n_nodes = std::stoull(line.substr(10));
      continue;
    }
    if (line.rfind("# directed\t", 0) == 0) {
      directed = line.substr(11) == "1";
      continue;
    }
    if (line.rfind("# ", 0) == 0) {
      from_json(nlohmann::ordered_json::parse(line.substr(2)), prov);
      continue;
    }
    auto f = detail::split_fields(line, '\t');
    std::uint64_t u = 0, v = 0;
    double w = 1.0;
    int d = 0;
    require(f.size() == 4 && detail::parse_number(f[0], u) && detail::parse_number(f[1], v) &&
                detail::parse_number(f[2], w) && detail::parse_number(f[3], d),
            "malformed edge-set line: " + line);
    require(u != v, "serialized edge-set contains a self-loop: " + line);
    edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), w});
    if (!directed) directed = d != 0;
  }
  require(n_nodes.has_value(), "edge-set file lacks an n_nodes header");
  return EdgeSet::build(*n_nodes, directed.value_or(false), std::move(edges), prov);
}

inline EdgeSet read_edgeset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read edge-set file: " + path.string());
  return read_edgeset(in);
}

// Plain "u \t v" edge list of an observed network. Ids are dense node ids;
// pass id_map to translate original ids first.
inline EdgeSet load_explicit_edges(std::istream& in, std::size_t n_nodes, const std::string& source = "explicit",
                                   const std::unordered_map<std::uint64_t, NodeId>* id_map = nullptr) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = detail::split_fields(t, '\t');
    std::uint64_t u = 0, v = 0;
    require(f.size() >= 2 && detail::parse_number(f[0], u) && detail::parse_number(f[1], v),
            "malformed edge at line " + std::to_string(line_no));
    if (id_map) {
      auto iu = id_map->find(u), iv = id_map->find(v);
      require(iu != id_map->end() && iv != id_map->end(),
              "edge at line " + std::to_string(line_no) + " references a node absent from the events");
      u = iu->second;
      v = iv->second;
    }
    require(u < n_nodes && v < n_nodes, "edge at line " + std::to_string(line_no) + " has node id out of range");
    edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), 1.0});
  }
  Provenance prov;
  prov.model = "EXPLICIT";
  prov.source = source;
  return EdgeSet::build(n_nodes, false, std::move(edges), prov);
}

inline EdgeSet load_explicit_edges(const std::filesystem::path& path, std::size_t n_nodes,
                                   const std::string& source = "explicit",
                                   const std::unordered_map<std::uint64_t, NodeId>* id_map = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read edge file: " + path.string());
  return load_explicit_edges(in, n_nodes, source, id_map);
}

}  // namespace netsel
