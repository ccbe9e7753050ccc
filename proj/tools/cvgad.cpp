#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cvgad/cvgad.hpp"

namespace fs = std::filesystem;
using namespace cvgad;

namespace {

struct CliOverrides {
  std::optional<std::string> data, out, mode, dataset;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, epochs, refine_epochs, iterations, rounds, dim, batch,
      cliques, clique_size, contextual, subgraph;
  std::optional<double> alpha, beta, gamma, removal_fraction, learning_rate;
  bool force = false;
};

void add_common_options(CLI::App* cmd, CliOverrides& ov, std::string& config_path) {
  cmd->add_option("--config", config_path, "config file (key = value with [hyper]/[injection] sections)");
  cmd->add_option("--data", ov.data, "input bundle directory");
  cmd->add_option("--dataset", ov.dataset, "apply a named dataset profile");
  cmd->add_option("--seed", ov.seed, "seed (overrides config and CVGAD_SEED)");
  cmd->add_flag("--force", ov.force, "overwrite existing outputs");
}

void add_run_options(CLI::App* cmd, CliOverrides& ov) {
  cmd->add_option("--out", ov.out, "output directory");
  cmd->add_option("--threads", ov.threads, "worker threads (default: all cores)");
  cmd->add_option("--epochs", ov.epochs, "training epochs before refine");
  cmd->add_option("--refine-epochs", ov.refine_epochs, "refine epochs after the last removal");
  cmd->add_option("--iterations", ov.iterations, "removal iterations");
  cmd->add_option("--rounds", ov.rounds, "scoring rounds");
  cmd->add_option("--dim", ov.dim, "embedding dimension");
  cmd->add_option("--batch", ov.batch, "batch size");
  cmd->add_option("--subgraph-size", ov.subgraph, "sampled subgraph size");
  cmd->add_option("--alpha", ov.alpha, "view balance");
  cmd->add_option("--beta", ov.beta, "scale balance");
  cmd->add_option("--gamma", ov.gamma, "final score balance");
  cmd->add_option("--removal-fraction", ov.removal_fraction, "per-iteration removal fraction");
  cmd->add_option("--learning-rate", ov.learning_rate, "Adam learning rate");
}

RunConfig resolve_config(const std::string& config_path, const CliOverrides& ov) {
  RunConfig cfg;
  std::optional<std::uint64_t> file_seed;
  if (!config_path.empty()) {
    cfg = load_run_config(config_path);
    file_seed = cfg.hp.seed;
  }
  if (ov.dataset && !apply_dataset_profile(cfg, *ov.dataset))
    throw config_error("unknown dataset '" + *ov.dataset +
                       "' (known: cora, citeseer, pubmed, citation, acm)");
  if (ov.data) cfg.data_dir = *ov.data;
  if (ov.out) cfg.out_dir = *ov.out;
  if (ov.mode) cfg.mode = *ov.mode;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.epochs) cfg.hp.train_epochs = *ov.epochs;
  if (ov.refine_epochs) cfg.hp.refine_epochs = *ov.refine_epochs;
  if (ov.iterations) cfg.hp.iterations = *ov.iterations;
  if (ov.rounds) cfg.hp.score_rounds = *ov.rounds;
  if (ov.dim) cfg.hp.embedding_dim = *ov.dim;
  if (ov.batch) cfg.hp.batch_size = *ov.batch;
  if (ov.subgraph) cfg.hp.subgraph_size = *ov.subgraph;
  if (ov.alpha) cfg.hp.alpha = *ov.alpha;
  if (ov.beta) cfg.hp.beta = *ov.beta;
  if (ov.gamma) cfg.hp.gamma = *ov.gamma;
  if (ov.removal_fraction) cfg.hp.removal_fraction = *ov.removal_fraction;
  if (ov.learning_rate) cfg.hp.learning_rate = *ov.learning_rate;
  if (ov.cliques) cfg.injection.clique_count = *ov.cliques;
  if (ov.clique_size) cfg.injection.clique_size = *ov.clique_size;
  if (ov.contextual) cfg.injection.contextual_count = *ov.contextual;
  cfg.hp.seed = resolve_seed(ov.seed, file_seed);
  cfg.injection.seed = cfg.hp.seed;
  if (cfg.data_dir.empty()) throw config_error("no input bundle given (--data or config 'data')");
  return cfg;
}

void require_out_dir(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw config_error("no output directory given (--out or config 'out')");
  fs::create_directories(cfg.out_dir);
}

int cmd_validate(const RunConfig& cfg) {
  const BundleData bundle = load_bundle(cfg.data_dir);
  const ValidationReport report = validate(bundle.graph);
  std::printf("nodes %d\nfeatures %d\nedges %zu\nisolated %d\nlabels %s\n", report.nodes,
              static_cast<int>(bundle.graph.feature_dim()), bundle.graph.num_edges(),
              report.isolated, bundle.labels ? "present" : "absent");
  if (bundle.stats.self_loops_dropped || bundle.stats.duplicate_edges_dropped)
    std::printf("dropped %d self-loops, %d duplicates\n", bundle.stats.self_loops_dropped,
                bundle.stats.duplicate_edges_dropped);
  return 0;
}

int cmd_inject(const RunConfig& cfg, bool force) {
  require_out_dir(cfg);
  const BundleData bundle = load_bundle(cfg.data_dir);
  const InjectionResult result = inject_anomalies(bundle.graph, cfg.injection);
  save_bundle(cfg.out_dir, result.graph, result.truth.anomaly_labels, force);
  save_injection_artifacts(cfg.out_dir, result);
  std::printf("injected %zu structural + %zu contextual anomalies, %zu new edges\n",
              result.structural_nodes.size(), result.contextual_nodes.size(),
              result.edges_added);
  std::printf("interfering edges %zu\n", result.truth.interfering_edges.size());
  return 0;
}

int run_one_mode(const RunConfig& cfg, AblationMode mode, const BundleData& bundle,
                 const std::optional<std::set<Edge>>& interfering, const std::string& out_dir,
                 bool force, double* auc_out) {
  if (fs::exists(fs::path(out_dir) / "report.json") && !force)
    throw config_error("report already exists at " + out_dir + " (use --force to overwrite)");
  fs::create_directories(out_dir);
  const int threads = resolve_threads(cfg.threads);
  const PipelineResult pipe = run_pipeline(bundle.graph, cfg.hp, mode, threads);
  const ScoreReport report =
      build_report(bundle.graph, pipe, cfg.hp, mode, bundle.labels, interfering, threads);
  emit_report(out_dir, report);
  save_purification_artifacts(out_dir, pipe.purification, mode);
  save_params(fs::path(out_dir) / "params.bin", pipe.params);
  if (report.auc) {
    std::printf("mode %s auc %.6f\n", ablation_mode_name(mode), *report.auc);
    if (auc_out) *auc_out = *report.auc;
  } else {
    std::printf("mode %s auc n/a (no labels)\n", ablation_mode_name(mode));
    if (auc_out) *auc_out = std::numeric_limits<double>::quiet_NaN();
  }
  return 0;
}

std::optional<std::set<Edge>> maybe_interfering(const RunConfig& cfg) {
  const fs::path truth = fs::path(cfg.data_dir) / "interfering_edges.tsv";
  if (!fs::exists(truth)) return std::nullopt;
  return load_interfering_edges(truth);
}

int cmd_run(const RunConfig& cfg, bool force) {
  require_out_dir(cfg);
  const AblationMode mode = parse_ablation_mode(cfg.mode);
  const BundleData bundle = load_bundle(cfg.data_dir);
  return run_one_mode(cfg, mode, bundle, maybe_interfering(cfg), cfg.out_dir, force, nullptr);
}

int cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& mode_names, bool force) {
  require_out_dir(cfg);
  if (mode_names.empty()) throw config_error("ablate needs at least one mode via --modes");
  std::vector<AblationMode> modes;
  for (const std::string& name : mode_names) modes.push_back(parse_ablation_mode(name));
  const BundleData bundle = load_bundle(cfg.data_dir);
  const std::optional<std::set<Edge>> interfering = maybe_interfering(cfg);

  detail::FilePtr csv = detail::open_for_write(fs::path(cfg.out_dir) / "ablation.csv");
  std::fprintf(csv.get(), "mode,auc\n");
  for (AblationMode mode : modes) {
    double auc = 0.0;
    run_one_mode(cfg, mode, bundle, interfering,
                 (fs::path(cfg.out_dir) / ablation_mode_name(mode)).string(), force, &auc);
    std::fprintf(csv.get(), "%s,", ablation_mode_name(mode));
    if (!std::isnan(auc)) detail::format_double(csv.get(), auc);
    std::fprintf(csv.get(), "\n");
  }
  return 0;
}

int cmd_plotdata(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const fs::path scores_path = dir / "node_scores.csv";
  const fs::path removal_path = dir / "removal_accuracy.csv";
  for (const fs::path& p : {scores_path, removal_path})
    if (!fs::exists(p)) throw data_error("missing run artifact " + p.string());

  {
    const std::string buf = detail::read_file(removal_path);
    detail::FilePtr f = detail::open_for_write(dir / "fig_removal.csv");
    std::fwrite(buf.data(), 1, buf.size(), f.get());
  }

  const std::string buf = detail::read_file(scores_path);
  std::vector<int> bins(50, 0);
  bool header = true;
  int final_col = -1;
  detail::for_each_line(buf, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) return;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (header) {
      header = false;
      for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i] == "final") final_col = static_cast<int>(i);
      if (final_col < 0) throw data_error("node_scores.csv has no 'final' column");
      return;
    }
    const std::string ctx = scores_path.string() + ":" + std::to_string(lineno);
    if (final_col >= static_cast<int>(fields.size()))
      throw data_error(ctx + ": short row");
    const std::string_view sv = fields[final_col];
    const char* next = nullptr;
    const double v = detail::parse_double(sv.data(), sv.data() + sv.size(), &next, ctx);
    int bin = static_cast<int>(v * 50.0);
    bin = std::max(0, std::min(49, bin));
    ++bins[bin];
  });

  detail::FilePtr f = detail::open_for_write(dir / "fig_score_hist.csv");
  std::fprintf(f.get(), "bin_lo,bin_hi,count\n");
  for (int b = 0; b < 50; ++b) {
    detail::format_double(f.get(), b / 50.0);
    std::fprintf(f.get(), ",");
    detail::format_double(f.get(), (b + 1) / 50.0);
    std::fprintf(f.get(), ",%d\n", bins[b]);
  }
  std::printf("wrote fig_removal.csv and fig_score_hist.csv\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-view graph anomaly detection with progressive edge removal"};
  app.require_subcommand(1);

  CliOverrides ov;
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> mode_names;

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a bundle and print its shape");
  add_common_options(validate_cmd, ov, config_path);

  CLI::App* inject_cmd = app.add_subcommand("inject", "write an anomaly-injected copy of a bundle");
  add_common_options(inject_cmd, ov, config_path);
  inject_cmd->add_option("--out", ov.out, "output bundle directory");
  inject_cmd->add_option("--cliques", ov.cliques, "number of injected cliques");
  inject_cmd->add_option("--clique-size", ov.clique_size, "nodes per clique");
  inject_cmd->add_option("--contextual", ov.contextual, "contextual anomaly count (-1: match structural)");

  CLI::App* run_cmd = app.add_subcommand("run", "train, purify, score, and report");
  add_common_options(run_cmd, ov, config_path);
  add_run_options(run_cmd, ov);
  run_cmd->add_option("--mode", ov.mode, "pipeline variant (full, sim, gcn, ore, bano, bcla, ocla, con)");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run several modes and tabulate AUC");
  add_common_options(ablate_cmd, ov, config_path);
  add_run_options(ablate_cmd, ov);
  ablate_cmd->add_option("--modes", mode_names, "modes to run")->delimiter(',');

  CLI::App* plot_cmd = app.add_subcommand("plotdata", "derive plot-ready CSVs from a run directory");
  plot_cmd->add_option("--run", run_dir, "completed run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (plot_cmd->parsed()) return cmd_plotdata(run_dir);
    const RunConfig cfg = resolve_config(config_path, ov);
    if (validate_cmd->parsed()) return cmd_validate(cfg);
    if (inject_cmd->parsed()) return cmd_inject(cfg, ov.force);
    if (run_cmd->parsed()) return cmd_run(cfg, ov.force);
    if (ablate_cmd->parsed()) return cmd_ablate(cfg, mode_names, ov.force);
    throw config_error("no subcommand selected");
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
