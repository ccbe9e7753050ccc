#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cvgad/errors.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/rng.hpp"

namespace cvgad::testing {

/// Planted-partition graph with community-mean Gaussian features. Communities
/// split the nodes evenly (remainder spread over the leading communities);
/// within-community pairs link with `within_prob` and cross pairs with
/// whatever probability brings the overall edge density to `edge_prob`.
struct SyntheticConfig {
  int nodes = 300;
  int communities = 4;
  double edge_prob = 0.02;
  double within_prob = 0.06;
  int feat_dim = 16;
  double mean_scale = 2.0;
  std::uint64_t seed = 1;
};

inline AttributedGraph synthetic_graph(const SyntheticConfig& cfg) {
  if (cfg.nodes < 2 || cfg.communities < 1 || cfg.communities > cfg.nodes)
    throw config_error("synthetic_graph: bad node/community counts");
  if (cfg.feat_dim < 1) throw config_error("synthetic_graph: feat_dim must be >= 1");

  std::vector<int> community(cfg.nodes);
  double within_pairs = 0.0;
  {
    const int base = cfg.nodes / cfg.communities;
    const int extra = cfg.nodes % cfg.communities;
    int next = 0;
    for (int c = 0; c < cfg.communities; ++c) {
      const int size = base + (c < extra ? 1 : 0);
      for (int k = 0; k < size; ++k) community[next++] = c;
      within_pairs += 0.5 * size * (size - 1);
    }
  }
  const double total_pairs = 0.5 * cfg.nodes * (cfg.nodes - 1.0);
  const double cross_pairs = total_pairs - within_pairs;
  double cross_prob = cfg.edge_prob;
  if (cross_pairs > 0.0)
    cross_prob = (cfg.edge_prob * total_pairs - cfg.within_prob * within_pairs) / cross_pairs;
  if (cross_prob < 0.0 || cross_prob > 1.0)
    throw config_error("synthetic_graph: within_prob incompatible with edge_prob");

  Rng rng(derive_seed(cfg.seed, rng_tag::kSynthetic, 0));
  RowMatrixXd means(cfg.communities, cfg.feat_dim);
  for (Eigen::Index i = 0; i < means.rows(); ++i)
    for (Eigen::Index j = 0; j < means.cols(); ++j)
      means(i, j) = cfg.mean_scale * rng.next_gaussian();

  RowMatrixXd x(cfg.nodes, cfg.feat_dim);
  for (int v = 0; v < cfg.nodes; ++v)
    for (int j = 0; j < cfg.feat_dim; ++j)
      x(v, j) = means(community[v], j) + rng.next_gaussian();

  AttributedGraph g(cfg.nodes, std::move(x));
  for (int i = 0; i < cfg.nodes; ++i)
    for (int j = i + 1; j < cfg.nodes; ++j) {
      const double p = community[i] == community[j] ? cfg.within_prob : cross_prob;
      if (rng.next_double() < p) g.add_edge(i, j);
    }
  return g;
}

}  // namespace cvgad::testing
