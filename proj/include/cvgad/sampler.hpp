#pragma once

#include <vector>

#include "cvgad/errors.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/rng.hpp"

namespace cvgad {

/// A sampled local subgraph: exactly subgraph_size member ids, target first,
/// padded with repeats of the target when the walk finds too few nodes.
struct SubgraphSample {
  int target = 0;
  std::vector<int> members;
};

struct SamplerConfig {
  int subgraph_size = 4;          // N
  double restart_prob = 0.5;
  int max_steps_factor = 1000;    // step budget = factor * subgraph_size

  void validate() const {
    if (subgraph_size < 1) throw config_error("subgraph_size must be >= 1");
    if (restart_prob < 0.0 || restart_prob > 1.0)
      throw config_error("restart_prob must lie in [0, 1]");
    if (max_steps_factor < 1) throw config_error("max_steps_factor must be >= 1");
  }
};

/// Random walk with restart around `target`. Members are recorded in first
/// visit order starting at the target itself; isolated or hard-to-reach
/// neighborhoods give up after the step budget and pad with the target id.
inline SubgraphSample sample_subgraph(const AttributedGraph& g, int target,
                                      const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (target < 0 || target >= g.num_nodes())
    throw data_error("walk target " + std::to_string(target) + " out of range");

  SubgraphSample out;
  out.target = target;
  out.members.reserve(cfg.subgraph_size);
  out.members.push_back(target);

  std::vector<char> seen(g.num_nodes(), 0);
  seen[target] = 1;

  int cur = target;
  const long budget = static_cast<long>(cfg.max_steps_factor) * cfg.subgraph_size;
  for (long step = 0; step < budget && static_cast<int>(out.members.size()) < cfg.subgraph_size;
       ++step) {
    if (rng.next_double() < cfg.restart_prob) {
      cur = target;
      continue;
    }
    const auto& nbrs = g.neighbors(cur);
    if (nbrs.empty()) {
      cur = target;  // dead end, forced restart
      continue;
    }
    cur = nbrs[rng.next_index(static_cast<int>(nbrs.size()))];
    if (!seen[cur]) {
      seen[cur] = 1;
      out.members.push_back(cur);
    }
  }
  while (static_cast<int>(out.members.size()) < cfg.subgraph_size) out.members.push_back(target);
  return out;
}

/// Anonymization step: zeroes every feature row belonging to the target id,
/// which also blanks the padding copies.
inline RowMatrixXd masked_member_features(const AttributedGraph& g, const SubgraphSample& s) {
  RowMatrixXd m(static_cast<Eigen::Index>(s.members.size()), g.feature_dim());
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    if (s.members[i] == s.target)
      m.row(static_cast<Eigen::Index>(i)).setZero();
    else
      m.row(static_cast<Eigen::Index>(i)) = g.features().row(s.members[i]);
  }
  return m;
}

/// One training batch: per-target subgraph samples on both views share the
/// same member sets, negatives are cyclic (sample i pairs with subgraph i-1).
struct Batch {
  std::vector<int> targets;
  std::vector<SubgraphSample> samples;

  int size() const { return static_cast<int>(targets.size()); }
  int negative_of(int i) const { return (i - 1 + size()) % size(); }
};

inline Batch make_batch(const AttributedGraph& g, const std::vector<int>& targets,
                        const SamplerConfig& cfg, Rng& rng) {
  if (targets.size() < 2)
    throw config_error("a batch needs at least 2 targets for cyclic negatives");
  Batch b;
  b.targets = targets;
  b.samples.reserve(targets.size());
  for (int t : targets) b.samples.push_back(sample_subgraph(g, t, cfg, rng));
  return b;
}

}  // namespace cvgad
