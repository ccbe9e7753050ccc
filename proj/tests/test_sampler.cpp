#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "cvgad/graph.hpp"
#include "cvgad/rng.hpp"
#include "cvgad/sampler.hpp"

using namespace cvgad;

namespace {

AttributedGraph path_graph(int n, int o = 2) {
  RowMatrixXd x(n, o);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) x(i, j) = i + 0.25 * j;
  AttributedGraph g(n, std::move(x));
  for (int v = 0; v + 1 < n; ++v) g.add_edge(v, v + 1);
  return g;
}

std::set<int> component_of(const AttributedGraph& g, int start) {
  std::set<int> seen{start};
  std::vector<int> stack{start};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : g.neighbors(v))
      if (seen.insert(u).second) stack.push_back(u);
  }
  return seen;
}

}  // namespace

TEST_CASE("walks start at the target and stay in its component") {
  AttributedGraph g = path_graph(12);
  g.remove_edges({{5, 6}});  // split into two components
  SamplerConfig cfg;
  cfg.subgraph_size = 4;
  Rng rng(3);
  for (int target = 0; target < 12; ++target) {
    const std::set<int> comp = component_of(g, target);
    for (int rep = 0; rep < 10; ++rep) {
      const SubgraphSample s = sample_subgraph(g, target, cfg, rng);
      REQUIRE(s.members.size() == 4);
      CHECK(s.members[0] == target);
      for (int v : s.members) CHECK(comp.count(v) == 1);
      std::set<int> uniq(s.members.begin(), s.members.end());
      // duplicates may only be padding copies of the target
      std::size_t padding = 0;
      for (int v : s.members)
        if (v == target) ++padding;
      CHECK(uniq.size() + (padding - 1) == s.members.size());
    }
  }
}

TEST_CASE("an isolated target pads the whole sample with itself") {
  RowMatrixXd x = RowMatrixXd::Zero(3, 2);
  AttributedGraph g(3, std::move(x));
  g.add_edge(0, 1);
  SamplerConfig cfg;
  cfg.subgraph_size = 4;
  Rng rng(1);
  const SubgraphSample s = sample_subgraph(g, 2, cfg, rng);
  CHECK(s.members == std::vector<int>{2, 2, 2, 2});
}

TEST_CASE("restart probability one keeps the walk pinned to the target") {
  AttributedGraph g = path_graph(6);
  SamplerConfig cfg;
  cfg.subgraph_size = 3;
  cfg.restart_prob = 1.0;
  Rng rng(2);
  const SubgraphSample s = sample_subgraph(g, 4, cfg, rng);
  CHECK(s.members == std::vector<int>{4, 4, 4});
}

TEST_CASE("sampling is deterministic for a fixed stream") {
  AttributedGraph g = path_graph(30);
  SamplerConfig cfg;
  cfg.subgraph_size = 6;
  Rng a(derive_seed(9, rng_tag::kWalk, 4));
  Rng b(derive_seed(9, rng_tag::kWalk, 4));
  for (int rep = 0; rep < 20; ++rep) {
    const SubgraphSample sa = sample_subgraph(g, 15, cfg, a);
    const SubgraphSample sb = sample_subgraph(g, 15, cfg, b);
    CHECK(sa.members == sb.members);
  }
}

TEST_CASE("members are recorded in first-visit order") {
  // Star around node 0: after the target, every member is a distinct leaf in
  // the order the walk first touched it, so all walks yield 0 first and no
  // duplicate leaves.
  RowMatrixXd x = RowMatrixXd::Zero(9, 2);
  AttributedGraph g(9, std::move(x));
  for (int v = 1; v < 9; ++v) g.add_edge(0, v);
  SamplerConfig cfg;
  cfg.subgraph_size = 5;
  Rng rng(11);
  for (int rep = 0; rep < 25; ++rep) {
    const SubgraphSample s = sample_subgraph(g, 0, cfg, rng);
    CHECK(s.members[0] == 0);
    std::set<int> leaves(s.members.begin() + 1, s.members.end());
    CHECK(leaves.size() == 4);
    for (int v : leaves) CHECK(v != 0);
  }
}

TEST_CASE("target rows are masked to zero including padding copies") {
  AttributedGraph g = path_graph(4, 3);
  SubgraphSample s;
  s.target = 2;
  s.members = {2, 1, 3, 2};  // trailing padding copy
  const RowMatrixXd m = masked_member_features(g, s);
  REQUIRE(m.rows() == 4);
  CHECK(m.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.row(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m.row(1) - g.features().row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m.row(2) - g.features().row(3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batches pair each sample with its cyclic predecessor") {
  AttributedGraph g = path_graph(20);
  SamplerConfig cfg;
  Rng rng(5);
  const Batch b = make_batch(g, {3, 7, 11, 15}, cfg, rng);
  REQUIRE(b.size() == 4);
  CHECK(b.negative_of(0) == 3);
  CHECK(b.negative_of(1) == 0);
  CHECK(b.negative_of(3) == 2);
  for (int i = 0; i < 4; ++i) CHECK(b.samples[i].target == b.targets[i]);

  Rng rng2(5);
  CHECK_THROWS_AS(make_batch(g, {3}, cfg, rng2), config_error);
}

TEST_CASE("walk configuration is validated") {
  AttributedGraph g = path_graph(5);
  Rng rng(1);
  SamplerConfig bad;
  bad.subgraph_size = 0;
  CHECK_THROWS_AS(sample_subgraph(g, 1, bad, rng), config_error);
  bad.subgraph_size = 4;
  bad.restart_prob = 1.5;
  CHECK_THROWS_AS(sample_subgraph(g, 1, bad, rng), config_error);
  SamplerConfig ok;
  CHECK_THROWS_AS(sample_subgraph(g, 9, ok, rng), data_error);
}
