#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>
#include <vector>

#include "cvgad/graph.hpp"
#include "cvgad/injection.hpp"
#include "cvgad/rng.hpp"

namespace fs = std::filesystem;
using namespace cvgad;

namespace {

AttributedGraph ring_graph(int n, int o, Rng& rng) {
  RowMatrixXd x(n, o);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) x(i, j) = rng.next_double();
  AttributedGraph g(n, std::move(x));
  for (int v = 0; v < n; ++v) g.add_edge(v, (v + 1) % n);
  return g;
}

}  // namespace

TEST_CASE("structural injection wires disjoint cliques") {
  Rng feat_rng(3);
  AttributedGraph g = ring_graph(60, 4, feat_rng);
  InjectionConfig cfg;
  cfg.clique_size = 5;
  cfg.clique_count = 3;

  Rng rng(derive_seed(9, rng_tag::kInjection));
  const StructuralInjection s = inject_structural(g, cfg, rng);

  REQUIRE(s.clique_nodes.size() == 15);
  CHECK(std::set<int>(s.clique_nodes.begin(), s.clique_nodes.end()).size() == 15);
  CHECK(s.clique_edges.size() == 3 * 10);
  CHECK(s.added_edges.size() <= s.clique_edges.size());
  for (const Edge& e : s.added_edges) CHECK(s.clique_edges.count(e) == 1);
  for (const Edge& e : s.clique_edges) CHECK(g.has_edge(e.first, e.second));

  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j)
        CHECK(s.clique_edges.count(make_edge(s.clique_nodes[c * 5 + i],
                                             s.clique_nodes[c * 5 + j])) == 1);
}

TEST_CASE("pre-existing edges stay and are still clique ground truth") {
  RowMatrixXd x = RowMatrixXd::Zero(6, 2);
  AttributedGraph g(6, std::move(x));
  for (int u = 0; u < 6; ++u)
    for (int v = u + 1; v < 6; ++v) g.add_edge(u, v);

  InjectionConfig cfg;
  cfg.clique_size = 3;
  cfg.clique_count = 2;
  Rng rng(1);
  const StructuralInjection s = inject_structural(g, cfg, rng);
  CHECK(s.added_edges.empty());
  CHECK(s.clique_edges.size() == 6);
  CHECK(g.num_edges() == 15);
}

TEST_CASE("structural injection refuses oversized demands") {
  Rng feat_rng(5);
  AttributedGraph g = ring_graph(10, 2, feat_rng);
  InjectionConfig cfg;
  cfg.clique_size = 4;
  cfg.clique_count = 3;
  Rng rng(1);
  CHECK_THROWS_AS(inject_structural(g, cfg, rng), config_error);
}

TEST_CASE("contextual injection copies the farthest candidate row") {
  // Graph small enough that the candidate pool is every other node, so the
  // swap must pick the global Euclidean argmax.
  Rng feat_rng(17);
  AttributedGraph g = ring_graph(12, 3, feat_rng);
  const RowMatrixXd before = g.features();

  InjectionConfig cfg;
  cfg.clique_size = 15;
  cfg.clique_count = 0;
  cfg.contextual_count = 1;
  cfg.candidate_pool_size = 50;

  Rng rng(derive_seed(2, rng_tag::kInjection));
  const std::vector<int> picked = inject_contextual(g, cfg, {}, rng);
  REQUIRE(picked.size() == 1);
  const int v = picked[0];

  int best = -1;
  double best_dist = -1.0;
  for (int c = 0; c < 12; ++c) {
    if (c == v) continue;
    const double dist = (before.row(c) - before.row(v)).squaredNorm();
    if (dist > best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  CHECK((g.features().row(v) - before.row(best)).cwiseAbs().maxCoeff() == 0.0);
  for (int u = 0; u < 12; ++u)
    if (u != v) CHECK((g.features().row(u) - before.row(u)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("contextual nodes avoid the structural set") {
  Rng feat_rng(21);
  AttributedGraph g = ring_graph(40, 3, feat_rng);
  const std::vector<int> excluded{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  InjectionConfig cfg;
  cfg.clique_count = 0;
  cfg.contextual_count = 25;
  Rng rng(4);
  const std::vector<int> picked = inject_contextual(g, cfg, excluded, rng);
  CHECK(picked.size() == 25);
  CHECK(std::set<int>(picked.begin(), picked.end()).size() == 25);
  for (int v : picked) CHECK(v >= 10);

  cfg.contextual_count = 31;
  Rng rng2(4);
  CHECK_THROWS_AS(inject_contextual(g, cfg, excluded, rng2), config_error);
}

TEST_CASE("full protocol injects equal anomaly counts and is seed stable") {
  Rng feat_rng(31);
  AttributedGraph base = ring_graph(120, 4, feat_rng);
  InjectionConfig cfg;
  cfg.clique_size = 5;
  cfg.clique_count = 4;
  cfg.seed = 77;

  const InjectionResult a = inject_anomalies(base, cfg);
  const InjectionResult b = inject_anomalies(base, cfg);

  CHECK(a.structural_nodes.size() == 20);
  CHECK(a.contextual_nodes.size() == 20);  // equal numbers by default
  int positives = 0;
  for (int y : a.truth.anomaly_labels) positives += y;
  CHECK(positives == 40);

  std::set<int> overlap(a.structural_nodes.begin(), a.structural_nodes.end());
  for (int v : a.contextual_nodes) CHECK(overlap.count(v) == 0);

  CHECK(a.structural_nodes == b.structural_nodes);
  CHECK(a.contextual_nodes == b.contextual_nodes);
  CHECK(a.truth.interfering_edges == b.truth.interfering_edges);
  CHECK((a.graph.features() - b.graph.features()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.graph.edges() == b.graph.edges());

  cfg.seed = 78;
  const InjectionResult c = inject_anomalies(base, cfg);
  CHECK(a.structural_nodes != c.structural_nodes);

  CHECK(a.edges_added == a.graph.num_edges() - base.num_edges());
}

TEST_CASE("interfering ground truth covers cliques and contextual incidence") {
  Rng feat_rng(41);
  AttributedGraph base = ring_graph(80, 3, feat_rng);
  InjectionConfig cfg;
  cfg.clique_size = 4;
  cfg.clique_count = 2;
  cfg.seed = 5;
  const InjectionResult r = inject_anomalies(base, cfg);

  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        const Edge e = make_edge(r.structural_nodes[c * 4 + i], r.structural_nodes[c * 4 + j]);
        CHECK(r.truth.interfering_edges.count(e) == 1);
      }
  for (int v : r.contextual_nodes)
    for (int u : r.graph.neighbors(v))
      CHECK(r.truth.interfering_edges.count(make_edge(u, v)) == 1);

  // every interfering edge is explained by one of the two rules
  std::set<int> contextual(r.contextual_nodes.begin(), r.contextual_nodes.end());
  std::set<Edge> cliques;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        cliques.insert(make_edge(r.structural_nodes[c * 4 + i], r.structural_nodes[c * 4 + j]));
  for (const Edge& e : r.truth.interfering_edges) {
    const bool from_clique = cliques.count(e) == 1;
    const bool from_context = contextual.count(e.first) || contextual.count(e.second);
    CHECK((from_clique || from_context));
  }
}

TEST_CASE("injection artifacts round-trip through their files") {
  Rng feat_rng(51);
  AttributedGraph base = ring_graph(50, 3, feat_rng);
  InjectionConfig cfg;
  cfg.clique_size = 3;
  cfg.clique_count = 2;
  cfg.seed = 13;
  const InjectionResult r = inject_anomalies(base, cfg);

  const fs::path dir = fs::temp_directory_path() / "cvgad_injection_artifacts";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_injection_artifacts(dir, r);

  const std::set<Edge> reloaded = load_interfering_edges(dir / "interfering_edges.tsv");
  CHECK(reloaded == r.truth.interfering_edges);

  const std::string anomalies = detail::read_file(dir / "anomalies.csv");
  CHECK(anomalies.rfind("node_id,type\n", 0) == 0);
  std::size_t lines = 0;
  detail::for_each_line(anomalies, [&](std::string_view, std::size_t) { ++lines; });
  CHECK(lines == 1 + r.structural_nodes.size() + r.contextual_nodes.size());
}
