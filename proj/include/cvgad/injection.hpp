#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cvgad/bundle_io.hpp"
#include "cvgad/errors.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/rng.hpp"

namespace cvgad {

/// Injection protocol settings. With the "equal numbers" default active,
/// contextual_count tracks clique_size * clique_count.
struct InjectionConfig {
  int clique_size = 15;
  int clique_count = 0;              // m'
  int contextual_count = -1;         // n'; -1 means clique_size * clique_count
  int candidate_pool_size = 50;
  std::uint64_t seed = 1;

  int resolved_contextual_count() const {
    return contextual_count >= 0 ? contextual_count : clique_size * clique_count;
  }

  void validate() const {
    if (clique_size < 2) throw config_error("clique_size must be >= 2");
    if (clique_count < 0) throw config_error("clique_count must be >= 0");
    if (candidate_pool_size < 1) throw config_error("candidate_pool_size must be >= 1");
  }
};

/// Anomaly labels plus the interfering-edge ground truth used by the
/// edge-removal accuracy experiment.
struct GroundTruth {
  std::vector<int> anomaly_labels;   // length n, 1 = anomaly
  std::set<Edge> interfering_edges;
};

struct StructuralInjection {
  std::set<Edge> added_edges;        // edges newly created by clique wiring
  std::set<Edge> clique_edges;       // all in-clique pairs, incl. pre-existing ones
  std::vector<int> clique_nodes;
};

/// Selects clique_count disjoint groups of clique_size nodes and wires each
/// group into a clique, adding whatever pairwise edges were missing.
/// Pre-existing in-clique edges are kept and still counted as clique edges.
inline StructuralInjection inject_structural(AttributedGraph& g, const InjectionConfig& cfg,
                                             Rng& rng) {
  cfg.validate();
  StructuralInjection out;
  const int total = cfg.clique_size * cfg.clique_count;
  if (total == 0) return out;
  if (total > g.num_nodes())
    throw config_error("structural injection needs " + std::to_string(total) + " nodes, graph has " +
                       std::to_string(g.num_nodes()));
  out.clique_nodes = rng.sample_without_replacement(g.num_nodes(), total);
  for (int c = 0; c < cfg.clique_count; ++c) {
    const int base = c * cfg.clique_size;
    for (int i = 0; i < cfg.clique_size; ++i) {
      for (int j = i + 1; j < cfg.clique_size; ++j) {
        const int u = out.clique_nodes[base + i];
        const int v = out.clique_nodes[base + j];
        out.clique_edges.insert(make_edge(u, v));
        if (g.add_edge(u, v)) out.added_edges.insert(make_edge(u, v));
      }
    }
  }
  return out;
}

/// For each selected node, samples a candidate pool and overwrites the node's
/// feature row with the row of the candidate at maximal Euclidean distance.
inline std::vector<int> inject_contextual(AttributedGraph& g, const InjectionConfig& cfg,
                                          const std::vector<int>& excluded, Rng& rng) {
  cfg.validate();
  const int want = cfg.resolved_contextual_count();
  if (want == 0) return {};
  const int n = g.num_nodes();

  std::vector<char> blocked(n, 0);
  for (int v : excluded) blocked[v] = 1;
  std::vector<int> eligible;
  eligible.reserve(n);
  for (int v = 0; v < n; ++v)
    if (!blocked[v]) eligible.push_back(v);
  if (want > static_cast<int>(eligible.size()))
    throw config_error("contextual injection needs " + std::to_string(want) +
                       " nodes outside the structural set, only " +
                       std::to_string(eligible.size()) + " available");

  std::vector<int> picks;
  {
    Rng& r = rng;
    std::vector<int> pool = eligible;
    for (int i = 0; i < want; ++i) {
      const int j = i + r.next_index(static_cast<int>(pool.size()) - i);
      std::swap(pool[i], pool[j]);
      picks.push_back(pool[i]);
    }
  }

  RowMatrixXd& x = g.mutable_features();
  const int pool_size = std::min(cfg.candidate_pool_size, n - 1);
  for (int v : picks) {
    // candidates: pool_size distinct nodes != v, from the full node set
    std::vector<int> cand = rng.sample_without_replacement(n - 1, pool_size);
    for (int& c : cand)
      if (c >= v) ++c;
    int best = cand[0];
    double best_dist = -1.0;
    for (int c : cand) {
      const double dist = (x.row(c) - x.row(v)).squaredNorm();
      if (dist > best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    x.row(v) = x.row(best);
  }
  return picks;
}

/// Interfering edges: every clique pair plus every current edge incident to a
/// contextual anomaly node.
inline std::set<Edge> derive_interfering_ground_truth(const std::set<Edge>& clique_edges,
                                                      const std::vector<int>& contextual_nodes,
                                                      const AttributedGraph& injected) {
  std::set<Edge> out = clique_edges;
  for (int v : contextual_nodes)
    for (int u : injected.neighbors(v)) out.insert(make_edge(u, v));
  return out;
}

struct InjectionResult {
  AttributedGraph graph;
  GroundTruth truth;
  std::vector<int> structural_nodes;
  std::vector<int> contextual_nodes;
  std::size_t edges_added = 0;
};

/// Full protocol: structural cliques first, then contextual feature swaps on
/// disjoint nodes, then ground-truth derivation.
inline InjectionResult inject_anomalies(const AttributedGraph& graph, const InjectionConfig& cfg) {
  cfg.validate();
  InjectionResult out;
  out.graph = graph;
  Rng rng(derive_seed(cfg.seed, rng_tag::kInjection));

  const std::size_t edges_before = out.graph.num_edges();
  StructuralInjection structural = inject_structural(out.graph, cfg, rng);
  out.structural_nodes = structural.clique_nodes;
  out.contextual_nodes = inject_contextual(out.graph, cfg, structural.clique_nodes, rng);
  out.edges_added = out.graph.num_edges() - edges_before;

  out.truth.anomaly_labels.assign(out.graph.num_nodes(), 0);
  for (int v : out.structural_nodes) out.truth.anomaly_labels[v] = 1;
  for (int v : out.contextual_nodes) out.truth.anomaly_labels[v] = 1;
  out.truth.interfering_edges =
      derive_interfering_ground_truth(structural.clique_edges, out.contextual_nodes, out.graph);
  return out;
}

/// Sidecar files written next to an injected bundle.
inline void save_injection_artifacts(const std::filesystem::path& dir, const InjectionResult& r) {
  {
    auto f = detail::open_for_write(dir / "anomalies.csv");
    std::fprintf(f.get(), "node_id,type\n");
    std::vector<std::pair<int, const char*>> rows;
    for (int v : r.structural_nodes) rows.emplace_back(v, "structural");
    for (int v : r.contextual_nodes) rows.emplace_back(v, "contextual");
    std::sort(rows.begin(), rows.end());
    for (const auto& [v, type] : rows) std::fprintf(f.get(), "%d,%s\n", v, type);
  }
  {
    auto f = detail::open_for_write(dir / "interfering_edges.tsv");
    for (const Edge& e : r.truth.interfering_edges)
      std::fprintf(f.get(), "%d\t%d\n", e.first, e.second);
  }
}

/// Reads interfering_edges.tsv back (for evaluation against a stored bundle).
inline std::set<Edge> load_interfering_edges(const std::filesystem::path& path) {
  const std::string buf = detail::read_file(path);
  std::set<Edge> out;
  detail::for_each_line(buf, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) return;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw data_error("expected two tab-separated ids in " + ctx);
    const int u = detail::parse_int(line.substr(0, tab), ctx);
    const int v = detail::parse_int(line.substr(tab + 1), ctx);
    out.insert(make_edge(u, v));
  });
  return out;
}

}  // namespace cvgad
