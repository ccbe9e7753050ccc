#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cvgad/errors.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/model.hpp"
#include "cvgad/rng.hpp"
#include "cvgad/sampler.hpp"
#include "cvgad/threading.hpp"

namespace cvgad {

/// Read adapter over the shared feature matrix. Citation-style features are
/// mostly zeros, so per-row nonzero lists make the o-wide products cheap; a
/// dense fallback covers everything else.
class FeatureAccess {
 public:
  explicit FeatureAccess(const RowMatrixXd& x, double density_threshold = 0.25) : x_(&x) {
    const std::size_t total = static_cast<std::size_t>(x.rows()) * x.cols();
    std::size_t nnz = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (x(i, j) != 0.0) ++nnz;
    sparse_ = total > 0 && static_cast<double>(nnz) < density_threshold * total;
    if (sparse_) {
      rows_.resize(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
          if (x(i, j) != 0.0) rows_[i].emplace_back(static_cast<int>(j), x(i, j));
    }
  }

  int dim() const { return static_cast<int>(x_->cols()); }
  bool sparse() const { return sparse_; }
  const RowMatrixXd& matrix() const { return *x_; }

  /// out = features.row(v) * w
  void row_times(int v, const RowMatrixXd& w, Eigen::Ref<Eigen::RowVectorXd> out) const {
    if (!sparse_) {
      out.noalias() = x_->row(v) * w;
      return;
    }
    out.setZero();
    for (const auto& [j, val] : rows_[v]) out.noalias() += val * w.row(j);
  }

  /// dw += features.row(v)^T * g
  void add_outer(int v, const Eigen::Ref<const Eigen::RowVectorXd>& g, RowMatrixXd& dw) const {
    if (!sparse_) {
      dw.noalias() += x_->row(v).transpose() * g;
      return;
    }
    for (const auto& [j, val] : rows_[v]) dw.row(j).noalias() += val * g;
  }

 private:
  const RowMatrixXd* x_;
  bool sparse_ = false;
  std::vector<std::vector<std::pair<int, double>>> rows_;
};

struct ScaleGradients {
  std::vector<RowMatrixXd> w;
  RowMatrixXd bilinear;
  double bias = 0.0;
};

struct Gradients {
  ScaleGradients ns, nn;

  static Gradients like(const ModelParams& p) {
    Gradients g;
    auto shape = [](const ScaleParams& s, ScaleGradients& out) {
      out.w.clear();
      for (const RowMatrixXd& w : s.w) out.w.push_back(RowMatrixXd::Zero(w.rows(), w.cols()));
      out.bilinear = RowMatrixXd::Zero(s.bilinear.rows(), s.bilinear.cols());
      out.bias = 0.0;
    };
    shape(p.ns, g.ns);
    shape(p.nn, g.nn);
    return g;
  }

  void set_zero() {
    for (ScaleGradients* s : {&ns, &nn}) {
      for (RowMatrixXd& w : s->w) w.setZero();
      s->bilinear.setZero();
      s->bias = 0.0;
    }
  }
};

/// One subgraph on one view, ready for encoding.
struct SampleView {
  SubgraphSample sample;
  NormalizedAdjacency adj;
};

/// Per-batch inputs: targets plus the sampled subgraphs on each active view.
/// An empty view vector means that view sits out and the other one carries
/// full weight in the objective.
struct BatchInputs {
  std::vector<int> targets;
  std::vector<SampleView> ano;
  std::vector<SampleView> cla;
};

/// Which graph backs each view slot. Null disables the slot (single-view
/// training); pointing both at the same graph reproduces the degenerate
/// both-anomalous / both-clean variants.
struct ViewGraphs {
  const AttributedGraph* ano = nullptr;
  const AttributedGraph* cla = nullptr;
};

inline SampleView make_sample_view(const AttributedGraph& g, int target, const SamplerConfig& cfg,
                                   Rng& rng) {
  SampleView sv;
  sv.sample = sample_subgraph(g, target, cfg, rng);
  sv.adj = normalized_adjacency(sv.sample.members, g);
  return sv;
}

/// Samples both views for a batch of targets. Walk streams are derived per
/// (salt, view, node), so the result is independent of batch composition,
/// processing order and thread count.
inline BatchInputs sample_batch_inputs(const std::vector<int>& targets, const ViewGraphs& views,
                                       const Hyperparams& hp, std::uint64_t seed,
                                       std::uint64_t salt, int threads) {
  BatchInputs in;
  in.targets = targets;
  const SamplerConfig cfg = hp.sampler();
  auto fill = [&](const AttributedGraph* g, std::uint64_t view_idx, std::vector<SampleView>& out) {
    if (!g) return;
    out.resize(targets.size());
    parallel_for_chunked(targets.size(), threads, [&](std::size_t lo, std::size_t hi, int) {
      for (std::size_t i = lo; i < hi; ++i) {
        Rng rng(derive_seed(seed, rng_tag::kWalk, salt * 2 + view_idx,
                            static_cast<std::uint64_t>(targets[i])));
        out[i] = make_sample_view(*g, targets[i], cfg, rng);
      }
    });
  };
  fill(views.ano, 0, in.ano);
  fill(views.cla, 1, in.cla);
  return in;
}

/// Discriminator outputs for every scale and view of one batch, plus the
/// combined objective value.
struct BatchResult {
  double loss = 0.0;
  ScalePairScores ns_ano, ns_cla, nn_ano, nn_cla;
};

namespace detail {

struct EncodeCache {
  std::vector<RowMatrixXd> z;  // post-activation per layer, N x d
  RowMatrixXd scratch;         // N x d workspace
  Eigen::RowVectorXd context;
};

struct MlpCache {
  std::vector<Eigen::RowVectorXd> h;  // post-activation per layer
};

/// Forward one subgraph through one scale's stacked GCN. Masked member rows
/// never touch the feature matrix, so layer 0 skips them entirely.
inline void encode_subgraph(const ScaleParams& sp, const FeatureAccess& feats,
                            const SampleView& sv, bool pooled_context, EncodeCache& cache) {
  const int n = static_cast<int>(sv.sample.members.size());
  const int d = static_cast<int>(sp.w.front().cols());
  const int layers = static_cast<int>(sp.w.size());
  cache.z.resize(layers);
  cache.scratch.resize(n, d);
  for (int p = 0; p < n; ++p) {
    if (sv.sample.members[p] == sv.sample.target)
      cache.scratch.row(p).setZero();
    else
      feats.row_times(sv.sample.members[p], sp.w[0], cache.scratch.row(p));
  }
  cache.z[0].resize(n, d);
  cache.z[0].noalias() = sv.adj * cache.scratch;
  cache.z[0] = cache.z[0].cwiseMax(0.0);
  for (int l = 1; l < layers; ++l) {
    cache.scratch.noalias() = cache.z[l - 1] * sp.w[l];
    cache.z[l].resize(n, d);
    cache.z[l].noalias() = sv.adj * cache.scratch;
    cache.z[l] = cache.z[l].cwiseMax(0.0);
  }
  if (pooled_context)
    cache.context = cache.z[layers - 1].colwise().mean();
  else
    cache.context = cache.z[layers - 1].row(0);
}

inline void encode_target(const ScaleParams& sp, const FeatureAccess& feats, int target,
                          MlpCache& cache) {
  const int layers = static_cast<int>(sp.w.size());
  cache.h.resize(layers);
  cache.h[0].resize(sp.w[0].cols());
  feats.row_times(target, sp.w[0], cache.h[0]);
  cache.h[0] = cache.h[0].cwiseMax(0.0);
  for (int l = 1; l < layers; ++l) {
    cache.h[l].noalias() = cache.h[l - 1] * sp.w[l];
    cache.h[l] = cache.h[l].cwiseMax(0.0);
  }
}

/// d(-log s) and d(-log(1-s)) through the logistic, honoring the clamp: a
/// score pinned at the clamp boundary contributes no gradient.
inline double pos_pre_grad(double s) {
  if (s < kScoreClamp || s > 1.0 - kScoreClamp) return 0.0;
  return s - 1.0;
}
inline double neg_pre_grad(double s) {
  if (s < kScoreClamp || s > 1.0 - kScoreClamp) return 0.0;
  return s;
}

/// Backward through the stacked GCN for one sample; dz_top is consumed.
inline void backward_subgraph(const ScaleParams& sp, const FeatureAccess& feats,
                              const SampleView& sv, const EncodeCache& cache, RowMatrixXd& dz,
                              RowMatrixXd& dp, RowMatrixXd& dg, ScaleGradients& grads) {
  const int layers = static_cast<int>(sp.w.size());
  const int n = static_cast<int>(sv.sample.members.size());
  for (int l = layers - 1; l >= 0; --l) {
    dp = (cache.z[l].array() > 0.0).select(dz, 0.0);
    dg.noalias() = sv.adj * dp;  // adjacency is symmetric
    if (l > 0) {
      grads.w[l].noalias() += cache.z[l - 1].transpose() * dg;
      dz.noalias() = dg * sp.w[l].transpose();
    } else {
      for (int p = 0; p < n; ++p)
        if (sv.sample.members[p] != sv.sample.target)
          feats.add_outer(sv.sample.members[p], dg.row(p), grads.w[0]);
    }
  }
}

inline void backward_target(const ScaleParams& sp, const FeatureAccess& feats, int target,
                            const MlpCache& cache, Eigen::RowVectorXd& dh,
                            Eigen::RowVectorXd& dp, ScaleGradients& grads) {
  const int layers = static_cast<int>(sp.w.size());
  for (int l = layers - 1; l >= 0; --l) {
    dp = (cache.h[l].array() > 0.0).select(dh, 0.0);
    if (l > 0) {
      grads.w[l].noalias() += cache.h[l - 1].transpose() * dp;
      dh.noalias() = dp * sp.w[l].transpose();
    } else {
      feats.add_outer(target, dp, grads.w[0]);
    }
  }
}

}  // namespace detail

/// Forward and backward passes for the dual-scale contrastive objective.
/// Encoding parallelizes over samples; all cross-sample accumulation is
/// serial, so results do not depend on the thread count.
class ContrastEngine {
 public:
  ContrastEngine(Hyperparams hp, const FeatureAccess& feats) : hp_(std::move(hp)), feats_(&feats) {
    hp_.validate();
  }

  const Hyperparams& hyper() const { return hp_; }

  /// Objective value only, on fixed pre-sampled inputs (finite differences).
  double loss_only(const ModelParams& params, const BatchInputs& in) {
    return run(params, in, nullptr, 1).loss;
  }

  /// Full pass: returns scores/loss and accumulates gradients (zeroed here).
  BatchResult forward_backward(const ModelParams& params, const BatchInputs& in, Gradients& grads,
                               int threads) {
    grads.set_zero();
    return run(params, in, &grads, threads);
  }

 private:
  struct ScaleWork {
    std::vector<detail::EncodeCache> enc_ano, enc_cla;
    std::vector<detail::MlpCache> mlp;
    RowMatrixXd bn;  // B x d, rows n_i * bilinear^T
    RowMatrixXd cb_ano, cb_cla;
    std::vector<double> gp_ano, gn_ano, gp_cla, gn_cla;
    std::vector<Eigen::RowVectorXd> dn;
  };

  BatchResult run(const ModelParams& params, const BatchInputs& in, Gradients* grads,
                  int threads) {
    const int batch = static_cast<int>(in.targets.size());
    if (batch < 2) throw config_error("a contrast batch needs at least 2 targets");
    const bool has_ano = !in.ano.empty();
    const bool has_cla = !in.cla.empty();
    if (!has_ano && !has_cla) throw config_error("no active view in batch");
    if (has_ano && static_cast<int>(in.ano.size()) != batch)
      throw data_error("anomalous-view sample count does not match batch");
    if (has_cla && static_cast<int>(in.cla.size()) != batch)
      throw data_error("clean-view sample count does not match batch");

    const double w_ano = has_cla ? hp_.alpha : 1.0;
    const double w_cla = has_ano ? 1.0 - hp_.alpha : 1.0;

    BatchResult result;
    double loss_ns_ano = 0.0, loss_ns_cla = 0.0, loss_nn_ano = 0.0, loss_nn_cla = 0.0;

    run_scale(params.ns, in, true, ns_, grads ? &grads->ns : nullptr,
              hp_.beta * (has_ano ? w_ano : 0.0), hp_.beta * (has_cla ? w_cla : 0.0),
              params.use_bias, threads, result.ns_ano, result.ns_cla, loss_ns_ano, loss_ns_cla);
    run_scale(params.nn, in, false, nn_, grads ? &grads->nn : nullptr,
              (1.0 - hp_.beta) * (has_ano ? w_ano : 0.0),
              (1.0 - hp_.beta) * (has_cla ? w_cla : 0.0), params.use_bias, threads, result.nn_ano,
              result.nn_cla, loss_nn_ano, loss_nn_cla);

    if (has_ano && has_cla) {
      result.loss = total_loss(loss_ns_ano, loss_ns_cla, loss_nn_ano, loss_nn_cla, hp_.alpha,
                               hp_.beta);
    } else if (has_ano) {
      result.loss = hp_.beta * loss_ns_ano + (1.0 - hp_.beta) * loss_nn_ano;
    } else {
      result.loss = hp_.beta * loss_ns_cla + (1.0 - hp_.beta) * loss_nn_cla;
    }
    return result;
  }

  /// One scale end to end. coef_* are the final objective weights multiplying
  /// this scale's per-view BCE sums; a zero coefficient still runs forward (to
  /// report scores) but contributes no gradient.
  void run_scale(const ScaleParams& sp, const BatchInputs& in, bool pooled, ScaleWork& work,
                 ScaleGradients* grads, double coef_ano, double coef_cla, bool use_bias,
                 int threads, ScalePairScores& scores_ano, ScalePairScores& scores_cla,
                 double& loss_ano, double& loss_cla) {
    const int batch = static_cast<int>(in.targets.size());
    const int d = static_cast<int>(sp.w.front().cols());
    const bool has_ano = !in.ano.empty();
    const bool has_cla = !in.cla.empty();

    if (static_cast<int>(work.mlp.size()) < batch) {
      work.mlp.resize(batch);
      work.enc_ano.resize(batch);
      work.enc_cla.resize(batch);
      work.dn.resize(batch);
    }
    work.bn.resize(batch, d);

    // Parallel phase: per-sample encoders, each writing its own slots.
    parallel_for_chunked(static_cast<std::size_t>(batch), threads,
                         [&](std::size_t lo, std::size_t hi, int) {
                           for (std::size_t i = lo; i < hi; ++i) {
                             detail::encode_target(sp, *feats_, in.targets[i], work.mlp[i]);
                             if (has_ano)
                               detail::encode_subgraph(sp, *feats_, in.ano[i], pooled,
                                                       work.enc_ano[i]);
                             if (has_cla)
                               detail::encode_subgraph(sp, *feats_, in.cla[i], pooled,
                                                       work.enc_cla[i]);
                             work.bn.row(i).noalias() = work.mlp[i].h.back() * sp.bilinear.transpose();
                           }
                         });

    const double bias = use_bias ? sp.bias : 0.0;
    auto score_view = [&](const std::vector<detail::EncodeCache>& enc, ScalePairScores& out) {
      out.pos.resize(batch);
      out.neg.resize(batch);
      for (int i = 0; i < batch; ++i) {
        const int j = (i - 1 + batch) % batch;  // cyclic negative subgraph
        const double u_pos = enc[i].context.dot(work.bn.row(i)) + bias;
        const double u_neg = enc[j].context.dot(work.bn.row(i)) + bias;
        if (!std::isfinite(u_pos) || !std::isfinite(u_neg))
          throw numeric_error("discriminator produced a non-finite value");
        out.pos[i] = logistic(u_pos);
        out.neg[i] = logistic(u_neg);
      }
    };
    if (has_ano) {
      score_view(work.enc_ano, scores_ano);
      loss_ano = bce_loss(scores_ano);
    } else {
      scores_ano = {};
      loss_ano = 0.0;
    }
    if (has_cla) {
      score_view(work.enc_cla, scores_cla);
      loss_cla = bce_loss(scores_cla);
    } else {
      scores_cla = {};
      loss_cla = 0.0;
    }

    if (!grads) return;

    for (int i = 0; i < batch; ++i) {
      work.dn[i].resize(d);
      work.dn[i].setZero();
    }

    auto backward_view = [&](const std::vector<detail::EncodeCache>& enc,
                             const ScalePairScores& sc, double coef, RowMatrixXd& cb,
                             std::vector<double>& gp, std::vector<double>& gn,
                             const std::vector<SampleView>& views) {
      if (coef == 0.0) return;
      gp.resize(batch);
      gn.resize(batch);
      cb.resize(batch, d);
      for (int i = 0; i < batch; ++i) {
        gp[i] = coef * detail::pos_pre_grad(sc.pos[i]);
        gn[i] = coef * detail::neg_pre_grad(sc.neg[i]);
        cb.row(i).noalias() = enc[i].context * sp.bilinear;
        if (use_bias) grads->bias += gp[i] + gn[i];
      }
      for (int i = 0; i < batch; ++i) {
        const int nxt = (i + 1) % batch;  // sample nxt's negative used context i
        const int prv = (i - 1 + batch) % batch;
        // discriminator input gradients
        dctx_ = gp[i] * work.bn.row(i) + gn[nxt] * work.bn.row(nxt);
        work.dn[i].noalias() += gp[i] * cb.row(i) + gn[i] * cb.row(prv);
        // bilinear gradient, grouped by context row
        dvec_ = gp[i] * work.mlp[i].h.back() + gn[nxt] * work.mlp[nxt].h.back();
        grads->bilinear.noalias() += enc[i].context.transpose() * dvec_;
        // encoder backward
        const int n_rows = static_cast<int>(views[i].sample.members.size());
        dz_.resize(n_rows, d);
        if (pooled) {
          for (int p = 0; p < n_rows; ++p) dz_.row(p) = dctx_ / n_rows;
        } else {
          dz_.setZero();
          dz_.row(0) = dctx_;
        }
        detail::backward_subgraph(sp, *feats_, views[i], enc[i], dz_, dp_, dg_, *grads);
      }
    };

    backward_view(work.enc_ano, scores_ano, coef_ano, work.cb_ano, work.gp_ano, work.gn_ano,
                  in.ano);
    backward_view(work.enc_cla, scores_cla, coef_cla, work.cb_cla, work.gp_cla, work.gn_cla,
                  in.cla);

    for (int i = 0; i < batch; ++i)
      detail::backward_target(sp, *feats_, in.targets[i], work.mlp[i], work.dn[i], dpv_, *grads);
  }

  Hyperparams hp_;
  const FeatureAccess* feats_;
  ScaleWork ns_, nn_;
  Eigen::RowVectorXd dctx_, dvec_, dpv_;
  RowMatrixXd dz_, dp_, dg_;
};

/// Adam with bias correction; one moment pair per parameter tensor.
struct AdamTensor {
  RowMatrixXd m, v;
};

struct AdamScaleState {
  std::vector<AdamTensor> w;
  AdamTensor bilinear;
  double m_bias = 0.0, v_bias = 0.0;
};

struct AdamState {
  AdamScaleState ns, nn;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState like(const ModelParams& p) {
    AdamState s;
    auto shape = [](const ScaleParams& sp, AdamScaleState& out) {
      out.w.clear();
      for (const RowMatrixXd& w : sp.w)
        out.w.push_back({RowMatrixXd::Zero(w.rows(), w.cols()),
                         RowMatrixXd::Zero(w.rows(), w.cols())});
      out.bilinear = {RowMatrixXd::Zero(sp.bilinear.rows(), sp.bilinear.cols()),
                      RowMatrixXd::Zero(sp.bilinear.rows(), sp.bilinear.cols())};
      out.m_bias = out.v_bias = 0.0;
    };
    shape(p.ns, s.ns);
    shape(p.nn, s.nn);
    return s;
  }
};

namespace detail {

inline void adam_update(RowMatrixXd& param, const RowMatrixXd& grad, AdamTensor& state,
                        const AdamState& s, double lr, double bc1, double bc2) {
  state.m = s.beta1 * state.m + (1.0 - s.beta1) * grad;
  state.v.array() = s.beta2 * state.v.array() + (1.0 - s.beta2) * grad.array().square();
  param.array() -= lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + s.eps);
}

inline void adam_update_scalar(double& param, double grad, double& m, double& v,
                               const AdamState& s, double lr, double bc1, double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad * grad;
  param -= lr * (m / bc1) / (std::sqrt(v / bc2) + s.eps);
}

}  // namespace detail

inline void adam_step(ModelParams& p, const Gradients& g, AdamState& s, double lr) {
  ++s.t;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  auto apply = [&](ScaleParams& sp, const ScaleGradients& sg, AdamScaleState& st) {
    for (std::size_t l = 0; l < sp.w.size(); ++l)
      detail::adam_update(sp.w[l], sg.w[l], st.w[l], s, lr, bc1, bc2);
    detail::adam_update(sp.bilinear, sg.bilinear, st.bilinear, s, lr, bc1, bc2);
    if (p.use_bias)
      detail::adam_update_scalar(sp.bias, sg.bias, st.m_bias, st.v_bias, s, lr, bc1, bc2);
  };
  apply(p.ns, g.ns, s.ns);
  apply(p.nn, g.nn, s.nn);
}

/// One full epoch: shuffled minibatches over every node, Adam updates after
/// each batch. A trailing single node joins the previous batch so cyclic
/// negatives always exist. Returns the mean per-batch objective.
inline double train_epoch(ModelParams& params, AdamState& adam, ContrastEngine& engine,
                          const ViewGraphs& views, std::uint64_t epoch_counter, int threads,
                          Gradients& grads) {
  const Hyperparams& hp = engine.hyper();
  const AttributedGraph* any = views.ano ? views.ano : views.cla;
  if (!any) throw config_error("train_epoch called with no active view");
  const int n = any->num_nodes();
  if (n < 2) throw config_error("training needs at least 2 nodes");

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(derive_seed(hp.seed, rng_tag::kEpochShuffle, epoch_counter));
  shuffle_rng.shuffle(order);

  double loss_sum = 0.0;
  int batches = 0;
  int start = 0;
  while (start < n) {
    int size = std::min(hp.batch_size, n - start);
    if (n - (start + size) == 1) ++size;  // absorb a trailing singleton
    const std::vector<int> targets(order.begin() + start, order.begin() + start + size);
    const BatchInputs inputs =
        sample_batch_inputs(targets, views, hp, hp.seed, epoch_counter, threads);
    const BatchResult res = engine.forward_backward(params, inputs, grads, threads);
    if (!std::isfinite(res.loss))
      throw numeric_error("training diverged at epoch " + std::to_string(epoch_counter) +
                          " batch " + std::to_string(batches));
    adam_step(params, grads, adam, hp.learning_rate);
    loss_sum += res.loss;
    ++batches;
    start += size;
  }
  return loss_sum / batches;
}

/// Pair scores for every node from one sampling round on one graph.
struct PassScores {
  ScalePairScores ns, nn;  // indexed by node id
};

/// One deterministic scoring pass: every node gets a fresh subgraph, negatives
/// follow a per-round random cyclic ordering. Used for purification decisions
/// (one pass per iteration) and final multi-round scoring.
inline PassScores score_pass(const ModelParams& params, const AttributedGraph& g,
                             const FeatureAccess& feats, const Hyperparams& hp,
                             std::uint64_t tag, std::uint64_t round, int threads) {
  const int n = g.num_nodes();
  if (n < 2) throw config_error("scoring needs at least 2 nodes");
  const int d = params.embedding_dim();
  const SamplerConfig cfg = hp.sampler();

  RowMatrixXd ctx_ns(n, d), ctx_nn(n, d), bn_ns(n, d), bn_nn(n, d);
  parallel_for_chunked(static_cast<std::size_t>(n), threads,
                       [&](std::size_t lo, std::size_t hi, int) {
                         detail::EncodeCache enc;
                         detail::MlpCache mlp;
                         for (std::size_t v = lo; v < hi; ++v) {
                           Rng rng(derive_seed(hp.seed, tag, round, 1 + v));
                           const SampleView sv =
                               make_sample_view(g, static_cast<int>(v), cfg, rng);
                           detail::encode_subgraph(params.ns, feats, sv, true, enc);
                           ctx_ns.row(v) = enc.context;
                           detail::encode_subgraph(params.nn, feats, sv, false, enc);
                           ctx_nn.row(v) = enc.context;
                           detail::encode_target(params.ns, feats, static_cast<int>(v), mlp);
                           bn_ns.row(v).noalias() = mlp.h.back() * params.ns.bilinear.transpose();
                           detail::encode_target(params.nn, feats, static_cast<int>(v), mlp);
                           bn_nn.row(v).noalias() = mlp.h.back() * params.nn.bilinear.transpose();
                         }
                       });

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng perm_rng(derive_seed(hp.seed, tag, round, 0));
  perm_rng.shuffle(order);
  std::vector<int> neg_of(n);
  for (int k = 0; k < n; ++k) neg_of[order[k]] = order[(k - 1 + n) % n];

  PassScores out;
  out.ns.pos.resize(n);
  out.ns.neg.resize(n);
  out.nn.pos.resize(n);
  out.nn.neg.resize(n);
  const double bias_ns = params.use_bias ? params.ns.bias : 0.0;
  const double bias_nn = params.use_bias ? params.nn.bias : 0.0;
  parallel_for_chunked(static_cast<std::size_t>(n), threads,
                       [&](std::size_t lo, std::size_t hi, int) {
                         for (std::size_t v = lo; v < hi; ++v) {
                           const int j = neg_of[v];
                           out.ns.pos[v] = logistic(ctx_ns.row(v).dot(bn_ns.row(v)) + bias_ns);
                           out.ns.neg[v] = logistic(ctx_ns.row(j).dot(bn_ns.row(v)) + bias_ns);
                           out.nn.pos[v] = logistic(ctx_nn.row(v).dot(bn_nn.row(v)) + bias_nn);
                           out.nn.neg[v] = logistic(ctx_nn.row(j).dot(bn_nn.row(v)) + bias_nn);
                         }
                       });
  return out;
}

/// Central-difference comparison against a caller-supplied analytic gradient;
/// relative error damped by an absolute floor so that near-zero coordinates
/// are judged on absolute difference.
inline double max_relative_gradient_error(const ModelParams& params, const Hyperparams& hp,
                                          const FeatureAccess& feats, const BatchInputs& inputs,
                                          const Gradients& analytic) {
  ContrastEngine engine(hp, feats);
  ModelParams probe = params;
  const double step = 1e-5;
  double worst = 0.0;

  auto check_entry = [&](double& slot, double grad) {
    const double saved = slot;
    slot = saved + step;
    const double up = engine.loss_only(probe, inputs);
    slot = saved - step;
    const double down = engine.loss_only(probe, inputs);
    slot = saved;
    const double fd = (up - down) / (2.0 * step);
    const double scale = std::max(std::abs(fd), std::abs(grad));
    const double err = std::abs(fd - grad) / (1e-6 + scale);
    worst = std::max(worst, err);
  };

  auto check_matrix = [&](RowMatrixXd& p, const RowMatrixXd& g) {
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) check_entry(p(i, j), g(i, j));
  };

  auto check_scale = [&](ScaleParams& sp, const ScaleGradients& sg) {
    for (std::size_t l = 0; l < sp.w.size(); ++l) check_matrix(sp.w[l], sg.w[l]);
    check_matrix(sp.bilinear, sg.bilinear);
    if (params.use_bias) check_entry(sp.bias, sg.bias);
  };
  check_scale(probe.ns, analytic.ns);
  check_scale(probe.nn, analytic.nn);
  return worst;
}

/// End-to-end gradient check on fixed sampled inputs.
inline double finite_difference_check(const ModelParams& params, const Hyperparams& hp,
                                      const FeatureAccess& feats, const BatchInputs& inputs) {
  ContrastEngine engine(hp, feats);
  Gradients grads = Gradients::like(params);
  engine.forward_backward(params, inputs, grads, 1);
  return max_relative_gradient_error(params, hp, feats, inputs, grads);
}

}  // namespace cvgad
