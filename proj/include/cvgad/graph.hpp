#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cvgad/errors.hpp"

namespace cvgad {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Undirected edge, stored once with u < v.
using Edge = std::pair<int, int>;

inline Edge make_edge(int u, int v) { return u < v ? Edge{u, v} : Edge{v, u}; }

/// Dense D^-1/2 (A+I) D^-1/2 over an induced subgraph; symmetric, entries in [0,1].
using NormalizedAdjacency = RowMatrixXd;

/// Undirected attributed graph: a deduplicated edge set plus a dense n x o
/// feature matrix. Self-loops are never stored; normalization adds the
/// identity transiently. Immutable while samplers read it; the purification
/// orchestrator is the single writer between training phases.
class AttributedGraph {
 public:
  AttributedGraph() = default;

  AttributedGraph(int n, RowMatrixXd features) : n_(n), x_(std::move(features)), adj_(n) {
    if (x_.rows() != n_)
      throw data_error("feature matrix has " + std::to_string(x_.rows()) + " rows, expected " +
                       std::to_string(n_));
  }

  int num_nodes() const { return n_; }
  int feature_dim() const { return static_cast<int>(x_.cols()); }
  std::size_t num_edges() const { return edges_.size(); }

  const RowMatrixXd& features() const { return x_; }
  RowMatrixXd& mutable_features() { return x_; }

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int v) const {
    check_index(v);
    return adj_[v];
  }
  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }

  bool has_edge(int u, int v) const {
    if (u == v) return false;
    check_index(u);
    check_index(v);
    return edge_keys_.count(edge_key(u, v)) != 0;
  }

  /// Adds the undirected edge if absent; returns whether it was added.
  bool add_edge(int u, int v) {
    check_index(u);
    check_index(v);
    if (u == v) throw data_error("self-loop (" + std::to_string(u) + ") cannot be added");
    const std::uint64_t key = edge_key(u, v);
    if (!edge_keys_.insert(key).second) return false;
    const Edge e = make_edge(u, v);
    edges_.insert(std::lower_bound(edges_.begin(), edges_.end(), e), e);
    insert_sorted(adj_[u], v);
    insert_sorted(adj_[v], u);
    return true;
  }

  /// Removes the listed undirected edges. Every edge must currently exist;
  /// a missing one signals a purification bookkeeping bug.
  void remove_edges(const std::vector<Edge>& to_remove) {
    for (const Edge& raw : to_remove) {
      const Edge e = make_edge(raw.first, raw.second);
      check_index(e.first);
      check_index(e.second);
      const std::uint64_t key = edge_key(e.first, e.second);
      if (edge_keys_.erase(key) == 0)
        throw data_error("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                         ") scheduled for removal does not exist");
      const auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
      edges_.erase(it);
      erase_sorted(adj_[e.first], e.second);
      erase_sorted(adj_[e.second], e.first);
    }
  }

 private:
  static std::uint64_t edge_key(int u, int v) {
    const auto a = static_cast<std::uint64_t>(std::min(u, v));
    const auto b = static_cast<std::uint64_t>(std::max(u, v));
    return (a << 32) | b;
  }

  static void insert_sorted(std::vector<int>& v, int x) {
    v.insert(std::lower_bound(v.begin(), v.end(), x), x);
  }
  static void erase_sorted(std::vector<int>& v, int x) {
    v.erase(std::lower_bound(v.begin(), v.end(), x));
  }

  void check_index(int v) const {
    if (v < 0 || v >= n_)
      throw data_error("node index " + std::to_string(v) + " out of range [0," +
                       std::to_string(n_) + ")");
  }

  int n_ = 0;
  RowMatrixXd x_;
  std::vector<Edge> edges_;            // sorted, canonical u < v
  std::vector<std::vector<int>> adj_;  // sorted neighbor lists
  std::unordered_set<std::uint64_t> edge_keys_;
};

/// D^-1/2 (A+I) D^-1/2 over the subgraph induced by sub_nodes, rows ordered as
/// sub_nodes. Duplicate ids (target padding) yield disconnected identity rows
/// against each other, since self-pairs are never edges.
inline NormalizedAdjacency normalized_adjacency(const std::vector<int>& sub_nodes,
                                                const AttributedGraph& g) {
  const int n = static_cast<int>(sub_nodes.size());
  if (n == 0) throw data_error("normalized_adjacency requires a non-empty node list");
  NormalizedAdjacency a = NormalizedAdjacency::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    a(p, p) = 1.0;  // self-loop from A + I
    for (int q = p + 1; q < n; ++q) {
      if (g.has_edge(sub_nodes[p], sub_nodes[q])) {
        a(p, q) = 1.0;
        a(q, p) = 1.0;
      }
    }
  }
  Eigen::VectorXd inv_sqrt_deg(n);
  for (int p = 0; p < n; ++p) inv_sqrt_deg(p) = 1.0 / std::sqrt(a.row(p).sum());
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) a(p, q) *= inv_sqrt_deg(p) * inv_sqrt_deg(q);
  return a;
}

struct ValidationReport {
  int nodes = 0;
  std::size_t edges = 0;
  int isolated = 0;
};

/// Checks every structural invariant and reports basic counts. Throws
/// data_error naming the violated invariant.
inline ValidationReport validate(const AttributedGraph& g) {
  const int n = g.num_nodes();
  if (g.features().rows() != n) throw data_error("invariant violated: feature row count != node count");
  for (Eigen::Index i = 0; i < g.features().rows(); ++i)
    for (Eigen::Index j = 0; j < g.features().cols(); ++j)
      if (!std::isfinite(g.features()(i, j)))
        throw data_error("invariant violated: non-finite feature at node " + std::to_string(i) +
                         " column " + std::to_string(j));
  for (const Edge& e : g.edges()) {
    if (e.first == e.second)
      throw data_error("invariant violated: self-loop stored at node " + std::to_string(e.first));
    if (e.first < 0 || e.second >= n)
      throw data_error("invariant violated: edge endpoint out of range");
  }
  ValidationReport report;
  report.nodes = n;
  report.edges = g.num_edges();
  for (int v = 0; v < n; ++v)
    if (g.degree(v) == 0) ++report.isolated;
  return report;
}

}  // namespace cvgad
