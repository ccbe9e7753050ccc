#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "cvgad/bundle_io.hpp"
#include "cvgad/errors.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/rng.hpp"
#include "cvgad/sampler.hpp"

namespace cvgad {

/// Every knob of the detector in one place. Defaults follow the reference
/// experimental protocol; dataset presets override epochs, alpha and the
/// removal fraction.
struct Hyperparams {
  int embedding_dim = 64;         // d
  int subgraph_size = 4;          // N
  int gcn_layers = 1;
  double learning_rate = 0.001;
  double alpha = 0.5;             // anomalous-view weight in the objective
  double beta = 0.6;              // node-subgraph scale weight
  double gamma = 0.8;             // contrast-score weight in the final blend
  double removal_fraction = 0.01; // K, fraction of original edges per iteration
  int iterations = 5;             // m
  int train_epochs = 500;         // T_e, total across the removal phase
  int refine_epochs = 200;        // T_r
  int score_rounds = 300;         // R
  double restart_prob = 0.5;
  int batch_size = 300;
  bool use_disc_bias = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (embedding_dim < 1) throw config_error("embedding_dim must be >= 1");
    if (subgraph_size < 1) throw config_error("subgraph_size must be >= 1");
    if (gcn_layers < 1) throw config_error("gcn_layers must be >= 1");
    if (learning_rate < 0.0) throw config_error("learning_rate must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw config_error("alpha must lie in [0, 1]");
    if (beta < 0.0 || beta > 1.0) throw config_error("beta must lie in [0, 1]");
    if (gamma < 0.0 || gamma > 1.0) throw config_error("gamma must lie in [0, 1]");
    if (removal_fraction <= 0.0 || removal_fraction > 1.0)
      throw config_error("removal_fraction must lie in (0, 1]");
    if (iterations < 0) throw config_error("iterations must be >= 0");
    if (train_epochs < 0) throw config_error("train_epochs must be >= 0");
    if (refine_epochs < 0) throw config_error("refine_epochs must be >= 0");
    if (score_rounds < 1) throw config_error("score_rounds must be >= 1");
    if (restart_prob < 0.0 || restart_prob > 1.0)
      throw config_error("restart_prob must lie in [0, 1]");
    if (batch_size < 2) throw config_error("batch_size must be >= 2");
    if (iterations > 0 && train_epochs % iterations != 0)
      throw config_error("train_epochs must be divisible by iterations");
  }

  SamplerConfig sampler() const {
    SamplerConfig cfg;
    cfg.subgraph_size = subgraph_size;
    cfg.restart_prob = restart_prob;
    return cfg;
  }

  int epochs_per_iteration() const { return iterations > 0 ? train_epochs / iterations : 0; }
};

/// One contrast scale: stacked encoder weights (layer 0 is o x d, deeper ones
/// d x d) shared between the subgraph GCN and the target MLP, plus a bilinear
/// discriminator with a scalar bias.
struct ScaleParams {
  std::vector<RowMatrixXd> w;
  RowMatrixXd bilinear;
  double bias = 0.0;
};

struct ModelParams {
  ScaleParams ns;  // node-subgraph scale
  ScaleParams nn;  // node-node scale
  bool use_bias = true;

  int feature_dim() const { return static_cast<int>(ns.w.front().rows()); }
  int embedding_dim() const { return static_cast<int>(ns.w.front().cols()); }
  int layers() const { return static_cast<int>(ns.w.size()); }
};

namespace detail {

inline RowMatrixXd xavier_uniform(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  RowMatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.next_double() - 1.0) * bound;
  return m;
}

inline ScaleParams init_scale(int o, const Hyperparams& hp, Rng& rng) {
  ScaleParams s;
  s.w.push_back(xavier_uniform(o, hp.embedding_dim, rng));
  for (int l = 1; l < hp.gcn_layers; ++l)
    s.w.push_back(xavier_uniform(hp.embedding_dim, hp.embedding_dim, rng));
  s.bilinear = xavier_uniform(hp.embedding_dim, hp.embedding_dim, rng);
  s.bias = 0.0;
  return s;
}

}  // namespace detail

inline ModelParams init_params(int o, const Hyperparams& hp, std::uint64_t seed) {
  hp.validate();
  if (o < 1) throw config_error("feature dimension must be >= 1");
  Rng rng(derive_seed(seed, rng_tag::kParamInit));
  ModelParams p;
  p.ns = detail::init_scale(o, hp, rng);
  p.nn = detail::init_scale(o, hp, rng);
  p.use_bias = hp.use_disc_bias;
  return p;
}

/// sigma(A_sub * M * W) for one layer; serves both scales. Row order follows
/// the member order of the sample.
inline RowMatrixXd gcn_forward(const RowMatrixXd& masked_features, const NormalizedAdjacency& adj,
                               const RowMatrixXd& w) {
  if (masked_features.rows() != adj.rows() || adj.rows() != adj.cols())
    throw data_error("gcn_forward: adjacency and feature row counts disagree");
  if (masked_features.cols() != w.rows())
    throw data_error("gcn_forward: weight matrix does not match feature width");
  return (adj * (masked_features * w)).cwiseMax(0.0);
}

/// sigma(x * W) on raw target features, reading the same W storage as the GCN.
inline Eigen::RowVectorXd mlp_forward(const Eigen::RowVectorXd& x, const RowMatrixXd& w) {
  if (x.cols() != w.rows()) throw data_error("mlp_forward: weight matrix does not match input");
  return (x * w).cwiseMax(0.0);
}

/// Average pooling over subgraph rows.
inline Eigen::RowVectorXd readout(const RowMatrixXd& s) {
  if (s.rows() < 1) throw data_error("readout needs at least one row");
  return s.colwise().mean();
}

/// The target's own row, reconstructed from neighbors since its input was masked.
inline Eigen::RowVectorXd target_row(const RowMatrixXd& s) {
  if (s.rows() < 1) throw data_error("target_row needs at least one row");
  return s.row(0);
}

inline double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

/// Bilinear discriminator squashed to (0,1): logistic(h B n^T + bias).
inline double discriminate(const Eigen::RowVectorXd& h, const Eigen::RowVectorXd& n,
                           const RowMatrixXd& b, double bias = 0.0) {
  if (h.cols() != b.rows() || n.cols() != b.cols())
    throw data_error("discriminate: bilinear matrix does not match embedding width");
  const double u = (h * b * n.transpose()).value() + bias;
  if (!std::isfinite(u)) throw numeric_error("discriminator produced a non-finite value");
  return logistic(u);
}

/// Positive/negative discriminator outputs for one scale on one view.
struct ScalePairScores {
  std::vector<double> pos;
  std::vector<double> neg;
};

constexpr double kScoreClamp = 1e-7;

/// Binary cross-entropy summed over the batch: positives labeled 1,
/// negatives 0, scores clamped away from the log singularities.
inline double bce_loss(const ScalePairScores& s) {
  double loss = 0.0;
  for (double p : s.pos) loss -= std::log(std::clamp(p, kScoreClamp, 1.0 - kScoreClamp));
  for (double n : s.neg) loss -= std::log(1.0 - std::clamp(n, kScoreClamp, 1.0 - kScoreClamp));
  return loss;
}

/// Dual-view dual-scale objective: beta weights the node-subgraph scale,
/// alpha the anomalous view within each scale.
inline double total_loss(double ns_ano, double ns_cla, double nn_ano, double nn_cla, double alpha,
                         double beta) {
  return beta * (alpha * ns_ano + (1.0 - alpha) * ns_cla) +
         (1.0 - beta) * (alpha * nn_ano + (1.0 - alpha) * nn_cla);
}

namespace detail {

inline void write_matrix(std::FILE* f, const RowMatrixXd& m) {
  const std::uint64_t rows = m.rows(), cols = m.cols();
  std::fwrite(&rows, sizeof rows, 1, f);
  std::fwrite(&cols, sizeof cols, 1, f);
  std::fwrite(m.data(), sizeof(double), rows * cols, f);
}

inline RowMatrixXd read_matrix(std::FILE* f, const std::string& path) {
  std::uint64_t rows = 0, cols = 0;
  if (std::fread(&rows, sizeof rows, 1, f) != 1 || std::fread(&cols, sizeof cols, 1, f) != 1)
    throw data_error("truncated parameter snapshot " + path);
  if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24))
    throw data_error("implausible matrix shape in parameter snapshot " + path);
  RowMatrixXd m(rows, cols);
  if (std::fread(m.data(), sizeof(double), rows * cols, f) != rows * cols)
    throw data_error("truncated parameter snapshot " + path);
  return m;
}

inline void write_scale(std::FILE* f, const ScaleParams& s) {
  const std::uint32_t layers = static_cast<std::uint32_t>(s.w.size());
  std::fwrite(&layers, sizeof layers, 1, f);
  for (const RowMatrixXd& w : s.w) write_matrix(f, w);
  write_matrix(f, s.bilinear);
  std::fwrite(&s.bias, sizeof s.bias, 1, f);
}

inline ScaleParams read_scale(std::FILE* f, const std::string& path) {
  std::uint32_t layers = 0;
  if (std::fread(&layers, sizeof layers, 1, f) != 1 || layers == 0 || layers > 64)
    throw data_error("bad layer count in parameter snapshot " + path);
  ScaleParams s;
  for (std::uint32_t l = 0; l < layers; ++l) s.w.push_back(read_matrix(f, path));
  s.bilinear = read_matrix(f, path);
  if (std::fread(&s.bias, sizeof s.bias, 1, f) != 1)
    throw data_error("truncated parameter snapshot " + path);
  return s;
}

constexpr char kParamMagic[8] = {'C', 'V', 'G', 'D', 'P', 'R', 'M', '1'};

}  // namespace detail

/// Raw little-endian dump of every parameter tensor; round-trips bit-exactly.
inline void save_params(const std::filesystem::path& path, const ModelParams& p) {
  auto f = detail::open_for_write(path);
  std::fwrite(detail::kParamMagic, 1, sizeof detail::kParamMagic, f.get());
  const std::uint8_t use_bias = p.use_bias ? 1 : 0;
  std::fwrite(&use_bias, 1, 1, f.get());
  detail::write_scale(f.get(), p.ns);
  detail::write_scale(f.get(), p.nn);
}

inline ModelParams load_params(const std::filesystem::path& path) {
  std::FILE* raw = std::fopen(path.string().c_str(), "rb");
  if (!raw) throw data_error("cannot open parameter snapshot " + path.string());
  detail::FilePtr f(raw);
  char magic[sizeof detail::kParamMagic];
  if (std::fread(magic, 1, sizeof magic, f.get()) != sizeof magic ||
      std::memcmp(magic, detail::kParamMagic, sizeof magic) != 0)
    throw data_error(path.string() + " is not a parameter snapshot");
  std::uint8_t use_bias = 0;
  if (std::fread(&use_bias, 1, 1, f.get()) != 1)
    throw data_error("truncated parameter snapshot " + path.string());
  ModelParams p;
  p.use_bias = use_bias != 0;
  p.ns = detail::read_scale(f.get(), path.string());
  p.nn = detail::read_scale(f.get(), path.string());
  if (p.ns.w.size() != p.nn.w.size())
    throw data_error("parameter snapshot scales disagree on layer count in " + path.string());
  return p;
}

}  // namespace cvgad
