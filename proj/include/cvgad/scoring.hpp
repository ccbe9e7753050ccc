#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cvgad/bundle_io.hpp"
#include "cvgad/errors.hpp"
#include "cvgad/gradients.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/model.hpp"
#include "cvgad/purification.hpp"

namespace cvgad {

/// Per-node statistics over repeated scoring rounds; score = mean + std.
struct RoundStats {
  std::vector<double> mean, stddev, score;
};

/// Folds per-round score vectors into per-node mean, population standard
/// deviation (1/R divisor), and their sum.
inline RoundStats reduce_rounds(const std::vector<std::vector<double>>& rounds) {
  if (rounds.empty()) throw config_error("score reduction needs at least one round");
  const std::size_t n = rounds.front().size();
  RoundStats out;
  out.mean.assign(n, 0.0);
  out.stddev.assign(n, 0.0);
  out.score.assign(n, 0.0);
  std::vector<double> m2(n, 0.0);
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    if (rounds[r].size() != n) throw data_error("score rounds disagree in length");
    for (std::size_t v = 0; v < n; ++v) {
      const double delta = rounds[r][v] - out.mean[v];
      out.mean[v] += delta / static_cast<double>(r + 1);
      m2[v] += delta * (rounds[r][v] - out.mean[v]);
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    out.stddev[v] = std::sqrt(m2[v] / static_cast<double>(rounds.size()));
    out.score[v] = out.mean[v] + out.stddev[v];
  }
  return out;
}

/// Runs R independent sampling rounds on the anomalous graph and reduces the
/// per-round blended contrast scores. Rounds run one after another so the
/// reduction order is fixed; the per-node work inside each round is parallel.
inline RoundStats multi_round_scores(const ModelParams& params, const AttributedGraph& g,
                                     const FeatureAccess& feats, const Hyperparams& hp,
                                     int threads) {
  std::vector<std::vector<double>> rounds;
  rounds.reserve(hp.score_rounds);
  for (int r = 0; r < hp.score_rounds; ++r) {
    const PassScores pass = score_pass(params, g, feats, hp, rng_tag::kScoreRound,
                                       static_cast<std::uint64_t>(r), threads);
    rounds.push_back(node_contrast_scores(pass, hp.beta).msc);
  }
  return reduce_rounds(rounds);
}

/// Min-max rescaling to [0,1]; a constant vector maps to all zeros.
inline std::vector<double> min_max_normalize(const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  return out;
}

/// Blends the normalized contrast score with the normalized removal counter.
inline std::vector<double> final_scores(const std::vector<double>& contrast_scores,
                                        const std::vector<int>& detection_counts,
                                        double gamma) {
  if (contrast_scores.size() != detection_counts.size())
    throw data_error("contrast scores and detection counts disagree in length");
  const std::vector<double> msc = min_max_normalize(contrast_scores);
  std::vector<double> dec_raw(detection_counts.begin(), detection_counts.end());
  const std::vector<double> dec = min_max_normalize(dec_raw);
  std::vector<double> out(msc.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = gamma * msc[i] + (1.0 - gamma) * dec[i];
  return out;
}

/// Mann-Whitney ROC-AUC with ties counted one half. The numerator stays an
/// exact integer (doubled ranks), so results match pairwise counting bit for
/// bit.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw data_error("scores and labels disagree in length");
  std::int64_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw data_error("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw data_error("scores must be finite");
    labels[i] == 1 ? ++n1 : ++n0;
  }
  if (n1 == 0 || n0 == 0)
    throw data_error("ROC-AUC is undefined when only one class is present");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::int64_t doubled_rank_sum = 0;  // over positives
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // tied block occupies 1-based positions [i+1, j]; doubled average rank:
    const std::int64_t doubled = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) doubled_rank_sum += doubled;
    i = j;
  }
  const std::int64_t numerator = doubled_rank_sum - n1 * (n1 + 1);
  return static_cast<double>(numerator) / (2.0 * static_cast<double>(n1) * static_cast<double>(n0));
}

/// Per-iteration removal precision plus cumulative recall against a known
/// interfering-edge set. Precision is NaN for an iteration that removed
/// nothing.
struct RemovalAccuracy {
  std::vector<double> precision;
  std::vector<double> cumulative_recall;
};

inline RemovalAccuracy edge_removal_accuracy(const PurificationState& state,
                                             const std::set<Edge>& interfering) {
  RemovalAccuracy out;
  std::set<Edge> seen_hits;
  for (const IterationLog& log : state.iterations) {
    std::size_t hits = 0;
    for (const Edge& e : log.removed)
      if (interfering.count(e)) {
        ++hits;
        seen_hits.insert(e);
      }
    out.precision.push_back(log.removed.empty()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : static_cast<double>(hits) / log.removed.size());
    out.cumulative_recall.push_back(
        interfering.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : static_cast<double>(seen_hits.size()) / interfering.size());
  }
  return out;
}

/// Everything the run emits: per-node scores, global metrics, config echo.
struct ScoreReport {
  std::string mode;
  Hyperparams hp;
  std::size_t original_edges = 0, final_edges = 0;
  RoundStats contrast;
  std::vector<int> detection_counts;
  std::vector<double> final_score;
  std::optional<std::vector<int>> labels;
  std::optional<double> auc;
  RemovalAccuracy removal;  // empty when no ground truth was supplied
};

inline ScoreReport build_report(const AttributedGraph& anomalous, const PipelineResult& pipe,
                                const Hyperparams& hp, AblationMode mode,
                                const std::optional<std::vector<int>>& labels,
                                const std::optional<std::set<Edge>>& interfering, int threads) {
  ScoreReport report;
  report.mode = ablation_mode_name(mode);
  report.hp = hp;
  report.original_edges = pipe.purification.original_edge_count;
  report.final_edges = pipe.clean.num_edges();
  const FeatureAccess feats(anomalous.features());
  report.contrast = multi_round_scores(pipe.params, anomalous, feats, hp, threads);
  report.detection_counts = pipe.purification.detection_counts;
  const double gamma = mode == AblationMode::kCon ? 1.0 : hp.gamma;
  report.final_score = final_scores(report.contrast.score, report.detection_counts, gamma);
  report.labels = labels;
  if (labels) report.auc = roc_auc(report.final_score, *labels);
  if (interfering) report.removal = edge_removal_accuracy(pipe.purification, *interfering);
  return report;
}

namespace detail {

inline void write_json_double_or_null(std::FILE* f, double v) {
  if (std::isnan(v))
    std::fprintf(f, "null");
  else
    format_double(f, v);
}

}  // namespace detail

/// Writes report.json, node_scores.csv, and removal_accuracy.csv under dir.
/// All decimals use 17 significant digits so reruns diff clean.
inline void emit_report(const std::string& dir, const ScoreReport& report) {
  {
    detail::FilePtr f = detail::open_for_write(dir + "/report.json");
    std::fprintf(f.get(), "{\n  \"mode\": \"%s\",\n", report.mode.c_str());
    std::fprintf(f.get(), "  \"seed\": %llu,\n",
                 static_cast<unsigned long long>(report.hp.seed));
    std::fprintf(f.get(), "  \"auc\": ");
    if (report.auc)
      detail::format_double(f.get(), *report.auc);
    else
      std::fprintf(f.get(), "null");
    std::fprintf(f.get(), ",\n");
    const auto put = [&](const char* key, double v, const char* tail) {
      std::fprintf(f.get(), "  \"%s\": ", key);
      detail::format_double(f.get(), v);
      std::fprintf(f.get(), "%s\n", tail);
    };
    put("alpha", report.hp.alpha, ",");
    put("beta", report.hp.beta, ",");
    put("gamma", report.hp.gamma, ",");
    put("removal_fraction", report.hp.removal_fraction, ",");
    std::fprintf(f.get(), "  \"embedding_dim\": %d,\n", report.hp.embedding_dim);
    std::fprintf(f.get(), "  \"subgraph_size\": %d,\n", report.hp.subgraph_size);
    std::fprintf(f.get(), "  \"iterations\": %d,\n", report.hp.iterations);
    std::fprintf(f.get(), "  \"train_epochs\": %d,\n", report.hp.train_epochs);
    std::fprintf(f.get(), "  \"refine_epochs\": %d,\n", report.hp.refine_epochs);
    std::fprintf(f.get(), "  \"score_rounds\": %d,\n", report.hp.score_rounds);
    std::fprintf(f.get(), "  \"score_normalization\": \"min-max\",\n");
    std::fprintf(f.get(), "  \"original_edges\": %zu,\n", report.original_edges);
    std::fprintf(f.get(), "  \"final_edges\": %zu,\n", report.final_edges);
    std::fprintf(f.get(), "  \"removal_accuracy\": [");
    for (std::size_t t = 0; t < report.removal.precision.size(); ++t) {
      std::fprintf(f.get(), "%s\n    {\"iteration\": %zu, \"precision\": ",
                   t == 0 ? "" : ",", t);
      detail::write_json_double_or_null(f.get(), report.removal.precision[t]);
      std::fprintf(f.get(), ", \"recall\": ");
      detail::write_json_double_or_null(f.get(), report.removal.cumulative_recall[t]);
      std::fprintf(f.get(), "}");
    }
    std::fprintf(f.get(), "%s]\n}\n", report.removal.precision.empty() ? "" : "\n  ");
  }
  {
    detail::FilePtr f = detail::open_for_write(dir + "/node_scores.csv");
    std::fprintf(f.get(), "node_id,msc,dec,final%s\n", report.labels ? ",label" : "");
    std::vector<double> dec_raw(report.detection_counts.begin(), report.detection_counts.end());
    const std::vector<double> dec = min_max_normalize(dec_raw);
    for (std::size_t v = 0; v < report.final_score.size(); ++v) {
      std::fprintf(f.get(), "%zu,", v);
      detail::format_double(f.get(), report.contrast.score[v]);
      std::fprintf(f.get(), ",");
      detail::format_double(f.get(), dec[v]);
      std::fprintf(f.get(), ",");
      detail::format_double(f.get(), report.final_score[v]);
      if (report.labels) std::fprintf(f.get(), ",%d", (*report.labels)[v]);
      std::fprintf(f.get(), "\n");
    }
  }
  {
    detail::FilePtr f = detail::open_for_write(dir + "/removal_accuracy.csv");
    std::fprintf(f.get(), "iteration,precision,recall\n");
    for (std::size_t t = 0; t < report.removal.precision.size(); ++t) {
      std::fprintf(f.get(), "%zu,", t);
      if (!std::isnan(report.removal.precision[t]))
        detail::format_double(f.get(), report.removal.precision[t]);
      std::fprintf(f.get(), ",");
      if (!std::isnan(report.removal.cumulative_recall[t]))
        detail::format_double(f.get(), report.removal.cumulative_recall[t]);
      std::fprintf(f.get(), "\n");
    }
  }
}

}  // namespace cvgad
