#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cvgad/bundle_io.hpp"
#include "cvgad/errors.hpp"
#include "cvgad/gradients.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/model.hpp"
#include "cvgad/rng.hpp"

namespace cvgad {

/// Pipeline variants. kFull is the reference behaviour; the others swap out
/// one ingredient each: ranking source (kSim, kGcn), removal schedule (kOre),
/// view composition (kBano, kBcla, kOcla), or final score blending (kCon).
enum class AblationMode { kFull, kSim, kGcn, kOre, kBano, kBcla, kOcla, kCon };

inline const char* ablation_mode_name(AblationMode m) {
  switch (m) {
    case AblationMode::kFull: return "full";
    case AblationMode::kSim: return "sim";
    case AblationMode::kGcn: return "gcn";
    case AblationMode::kOre: return "ore";
    case AblationMode::kBano: return "bano";
    case AblationMode::kBcla: return "bcla";
    case AblationMode::kOcla: return "ocla";
    case AblationMode::kCon: return "con";
  }
  throw config_error("unreachable ablation mode");
}

inline AblationMode parse_ablation_mode(const std::string& s) {
  for (AblationMode m : {AblationMode::kFull, AblationMode::kSim, AblationMode::kGcn,
                         AblationMode::kOre, AblationMode::kBano, AblationMode::kBcla,
                         AblationMode::kOcla, AblationMode::kCon})
    if (s == ablation_mode_name(m)) return m;
  throw config_error("unknown ablation mode '" + s +
                     "' (expected full, sim, gcn, ore, bano, bcla, ocla, or con)");
}

/// Per-node contrast scores from one scoring pass.
struct NodeScores {
  std::vector<double> ns, nn, msc;
  bool empty() const { return msc.empty(); }
};

/// score = negative-pair similarity minus positive-pair similarity per scale,
/// blended with beta. Ideal normal nodes approach -1, anomalies sit higher.
inline NodeScores node_contrast_scores(const PassScores& pass, double beta) {
  const std::size_t n = pass.ns.pos.size();
  if (pass.ns.neg.size() != n || pass.nn.pos.size() != n || pass.nn.neg.size() != n)
    throw data_error("pair score vectors disagree in length");
  NodeScores out;
  out.ns.resize(n);
  out.nn.resize(n);
  out.msc.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.ns[i] = pass.ns.neg[i] - pass.ns.pos[i];
    out.nn[i] = pass.nn.neg[i] - pass.nn.pos[i];
    out.msc[i] = beta * out.ns[i] + (1.0 - beta) * out.nn[i];
  }
  return out;
}

/// One interference entry per existing edge: the sum of the endpoint scores.
struct EdgeInterference {
  Edge edge;
  double value;
};

inline std::vector<EdgeInterference> edge_interference_matrix(const NodeScores& scores,
                                                              const AttributedGraph& g) {
  if (static_cast<int>(scores.msc.size()) != g.num_nodes())
    throw data_error("contrast scores do not cover every node");
  std::vector<EdgeInterference> out;
  out.reserve(g.num_edges());
  for (const Edge& e : g.edges())
    out.push_back({e, scores.msc[e.first] + scores.msc[e.second]});
  return out;
}

inline int removal_budget(double fraction, std::size_t original_edge_count) {
  return static_cast<int>(std::ceil(fraction * static_cast<double>(original_edge_count)));
}

/// Highest-interference edges first, ties by lexicographic edge id, capped at
/// the current edge count. Optionally reports how many entries share the
/// cutoff value and whether the budget exceeded the remaining edges.
inline std::vector<Edge> select_top_k(std::vector<EdgeInterference> entries, int budget,
                                      int* ties_at_cutoff = nullptr, bool* saturated = nullptr) {
  if (budget < 0) throw config_error("removal budget must be >= 0");
  if (saturated) *saturated = budget > static_cast<int>(entries.size());
  if (ties_at_cutoff) *ties_at_cutoff = 0;
  const int take = std::min<int>(budget, static_cast<int>(entries.size()));
  std::sort(entries.begin(), entries.end(), [](const EdgeInterference& a, const EdgeInterference& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.edge < b.edge;
  });
  std::vector<Edge> out;
  out.reserve(take);
  for (int i = 0; i < take; ++i) out.push_back(entries[i].edge);
  if (ties_at_cutoff && take > 0) {
    const double cutoff = entries[take - 1].value;
    *ties_at_cutoff = static_cast<int>(
        std::count_if(entries.begin(), entries.end(),
                      [&](const EdgeInterference& e) { return e.value == cutoff; }));
  }
  return out;
}

inline std::vector<Edge> select_top_k(const std::vector<EdgeInterference>& entries,
                                      double fraction, std::size_t original_edge_count) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw config_error("removal fraction must lie in (0, 1]");
  return select_top_k(entries, removal_budget(fraction, original_edge_count));
}

inline double cosine_similarity(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

/// One normalized aggregation pass over the graph: each node averages itself
/// and its neighbours with symmetric degree weights.
inline RowMatrixXd propagate_once(const AttributedGraph& g) {
  const RowMatrixXd& x = g.features();
  RowMatrixXd out(g.num_nodes(), x.cols());
  for (int v = 0; v < g.num_nodes(); ++v) {
    const double dv = static_cast<double>(g.degree(v) + 1);
    Eigen::RowVectorXd acc = x.row(v) / dv;
    for (int u : g.neighbors(v)) {
      const double du = static_cast<double>(g.degree(u) + 1);
      acc += x.row(u) / std::sqrt(dv * du);
    }
    out.row(v) = acc;
  }
  return out;
}

/// Least-similar edges first (ascending cosine of the embedding rows). When
/// the cutoff lands inside a block of exactly-zero similarities bigger than
/// the remaining budget, the block is sampled uniformly instead of
/// lexicographically, mirroring the behaviour on sparse disjoint features.
inline std::vector<Edge> select_by_ascending_similarity(const RowMatrixXd& emb,
                                                        const std::vector<Edge>& edges,
                                                        int budget, Rng& tie_rng) {
  if (budget < 0) throw config_error("removal budget must be >= 0");
  struct Entry {
    Edge edge;
    double sim;
  };
  std::vector<Entry> entries;
  entries.reserve(edges.size());
  for (const Edge& e : edges)
    entries.push_back({e, cosine_similarity(emb.row(e.first), emb.row(e.second))});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.sim != b.sim) return a.sim < b.sim;
    return a.edge < b.edge;
  });
  const int take = std::min<int>(budget, static_cast<int>(entries.size()));
  std::vector<Edge> out;
  if (take == 0) return out;
  const double cutoff = entries[take - 1].sim;
  if (cutoff == 0.0) {
    std::vector<Edge> zeros;
    for (const Entry& e : entries) {
      if (e.sim < 0.0)
        out.push_back(e.edge);
      else if (e.sim == 0.0)
        zeros.push_back(e.edge);
    }
    const int need = take - static_cast<int>(out.size());
    if (static_cast<int>(zeros.size()) > need) {
      std::vector<int> picks =
          tie_rng.sample_without_replacement(static_cast<int>(zeros.size()), need);
      std::sort(picks.begin(), picks.end());
      for (int idx : picks) out.push_back(zeros[idx]);
      return out;
    }
  }
  out.clear();
  for (int i = 0; i < take; ++i) out.push_back(entries[i].edge);
  return out;
}

struct IterationLog {
  int iteration = 0;
  int budget = 0;
  std::vector<Edge> removed;
  int ties_at_cutoff = 0;
  bool saturated = false;
  NodeScores scores;  // empty for the similarity-ranked modes
};

struct PurificationState {
  std::vector<IterationLog> iterations;
  std::vector<int> detection_counts;
  std::size_t original_edge_count = 0;
};

namespace detail {

inline bool mode_scores_rank(AblationMode mode) {
  return mode != AblationMode::kSim && mode != AblationMode::kGcn;
}

}  // namespace detail

/// One removal round: rank the clean graph's edges (contrast scores on the
/// anomalous graph, or embedding similarity for the sim/gcn variants), drop
/// the top of the ranking from the clean graph, bump both endpoints'
/// detection counters, and reinitialize model and optimizer for the next
/// iteration. The anomalous graph is never touched.
inline void purify_step(PurificationState& state, ModelParams& params, AdamState& adam,
                        const AttributedGraph& anomalous, AttributedGraph& clean,
                        const FeatureAccess& feats, const Hyperparams& hp, AblationMode mode,
                        int budget, int threads) {
  IterationLog log;
  log.iteration = static_cast<int>(state.iterations.size());
  log.budget = budget;
  if (detail::mode_scores_rank(mode)) {
    const PassScores pass = score_pass(params, anomalous, feats, hp, rng_tag::kPurifyPass,
                                       static_cast<std::uint64_t>(log.iteration), threads);
    log.scores = node_contrast_scores(pass, hp.beta);
    log.removed = select_top_k(edge_interference_matrix(log.scores, clean), budget,
                               &log.ties_at_cutoff, &log.saturated);
  } else {
    Rng tie_rng(derive_seed(hp.seed, rng_tag::kSimTieBreak,
                            static_cast<std::uint64_t>(log.iteration)));
    const RowMatrixXd emb =
        mode == AblationMode::kGcn ? propagate_once(clean) : anomalous.features();
    log.saturated = budget > static_cast<int>(clean.num_edges());
    log.removed = select_by_ascending_similarity(emb, clean.edges(), budget, tie_rng);
  }
  clean.remove_edges(log.removed);
  for (const Edge& e : log.removed) {
    ++state.detection_counts[e.first];
    ++state.detection_counts[e.second];
  }
  state.iterations.push_back(std::move(log));

  const std::uint64_t reset_seed = derive_seed(
      hp.seed, rng_tag::kParamInit, static_cast<std::uint64_t>(state.iterations.size()));
  params = init_params(static_cast<int>(anomalous.feature_dim()), hp, reset_seed);
  adam = AdamState::like(params);
}

struct PipelineResult {
  ModelParams params;
  AttributedGraph clean;
  PurificationState purification;
  std::vector<double> epoch_losses;
};

namespace detail {

inline ViewGraphs views_for_mode(AblationMode mode, const AttributedGraph& anomalous,
                                 const AttributedGraph& clean) {
  switch (mode) {
    case AblationMode::kBano: return ViewGraphs{&anomalous, &anomalous};
    case AblationMode::kBcla: return ViewGraphs{&clean, &clean};
    case AblationMode::kOcla: return ViewGraphs{nullptr, &clean};
    default: return ViewGraphs{&anomalous, &clean};
  }
}

}  // namespace detail

/// Full training loop: the clean view starts as a copy of the anomalous
/// graph, loses its highest-ranked edges after each training slice, and the
/// model restarts from fresh parameters after every removal. A final refine
/// phase trains on the settled views without further removal. kOre collapses
/// the schedule into one removal of the whole budget after all training
/// slices; with zero iterations the loop degenerates to plain training.
inline PipelineResult run_pipeline(const AttributedGraph& anomalous, const Hyperparams& hp,
                                   AblationMode mode, int threads) {
  hp.validate();
  validate(anomalous);
  if (anomalous.num_nodes() < 2) throw data_error("pipeline needs at least 2 nodes");

  PipelineResult result{ModelParams{}, anomalous, PurificationState{}, {}};
  AttributedGraph& clean = result.clean;
  PurificationState& state = result.purification;
  state.detection_counts.assign(anomalous.num_nodes(), 0);
  state.original_edge_count = anomalous.num_edges();

  const FeatureAccess feats(anomalous.features());
  ContrastEngine engine(hp, feats);
  const int o = static_cast<int>(anomalous.feature_dim());
  result.params = init_params(o, hp, derive_seed(hp.seed, rng_tag::kParamInit, 0));
  AdamState adam = AdamState::like(result.params);
  Gradients grads = Gradients::like(result.params);
  const ViewGraphs views = detail::views_for_mode(mode, anomalous, clean);

  const int per_iter_budget = removal_budget(hp.removal_fraction, state.original_edge_count);
  std::uint64_t epoch = 0;
  auto train_block = [&](int epochs) {
    for (int e = 0; e < epochs; ++e, ++epoch)
      result.epoch_losses.push_back(
          train_epoch(result.params, adam, engine, views, epoch, threads, grads));
  };

  if (hp.iterations == 0) {
    train_block(hp.train_epochs);
  } else if (mode == AblationMode::kOre) {
    train_block(hp.train_epochs);
    purify_step(state, result.params, adam, anomalous, clean, feats, hp, mode,
                per_iter_budget * hp.iterations, threads);
  } else {
    for (int t = 0; t < hp.iterations; ++t) {
      train_block(hp.epochs_per_iteration());
      purify_step(state, result.params, adam, anomalous, clean, feats, hp, mode,
                  per_iter_budget, threads);
    }
  }
  train_block(hp.refine_epochs);
  return result;
}

/// Writes removed_edges_iter<t>.tsv and node_scores_iter<t>.csv per iteration
/// plus purification_log.json with the bookkeeping numbers.
inline void save_purification_artifacts(const std::string& dir, const PurificationState& state,
                                        AblationMode mode) {
  for (const IterationLog& log : state.iterations) {
    {
      detail::FilePtr f = detail::open_for_write(
          dir + "/removed_edges_iter" + std::to_string(log.iteration) + ".tsv");
      for (const Edge& e : log.removed) std::fprintf(f.get(), "%d\t%d\n", e.first, e.second);
    }
    if (!log.scores.empty()) {
      detail::FilePtr f = detail::open_for_write(
          dir + "/node_scores_iter" + std::to_string(log.iteration) + ".csv");
      std::fprintf(f.get(), "node_id,ns,nn,msc\n");
      for (std::size_t v = 0; v < log.scores.msc.size(); ++v) {
        std::fprintf(f.get(), "%zu,", v);
        detail::format_double(f.get(), log.scores.ns[v]);
        std::fprintf(f.get(), ",");
        detail::format_double(f.get(), log.scores.nn[v]);
        std::fprintf(f.get(), ",");
        detail::format_double(f.get(), log.scores.msc[v]);
        std::fprintf(f.get(), "\n");
      }
    }
  }
  detail::FilePtr f = detail::open_for_write(dir + "/purification_log.json");
  std::fprintf(f.get(), "{\n  \"mode\": \"%s\",\n  \"original_edge_count\": %zu,\n",
               ablation_mode_name(mode), state.original_edge_count);
  std::fprintf(f.get(), "  \"iterations\": [\n");
  for (std::size_t i = 0; i < state.iterations.size(); ++i) {
    const IterationLog& log = state.iterations[i];
    std::fprintf(f.get(),
                 "    {\"iteration\": %d, \"budget\": %d, \"removed\": %zu, "
                 "\"ties_at_cutoff\": %d, \"saturated\": %s}%s\n",
                 log.iteration, log.budget, log.removed.size(), log.ties_at_cutoff,
                 log.saturated ? "true" : "false",
                 i + 1 < state.iterations.size() ? "," : "");
  }
  std::fprintf(f.get(), "  ]\n}\n");
}

}  // namespace cvgad
