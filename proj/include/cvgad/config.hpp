#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "cvgad/bundle_io.hpp"
#include "cvgad/errors.hpp"
#include "cvgad/injection.hpp"
#include "cvgad/model.hpp"

namespace cvgad {

/// Everything a run needs, with defaults from the reference experiments.
struct RunConfig {
  std::string dataset;  // profile name; empty means generic defaults
  std::string data_dir;
  std::string out_dir;
  std::string mode = "full";
  Hyperparams hp;
  InjectionConfig injection;
  int threads = 0;  // 0 = all available cores
};

/// Known dataset profiles: training schedule, view balance, removal fraction,
/// and injection size. Unknown names keep the generic defaults.
inline bool apply_dataset_profile(RunConfig& cfg, const std::string& name) {
  auto set = [&](int train, int refine, double alpha, double k, int cliques) {
    cfg.hp.train_epochs = train;
    cfg.hp.refine_epochs = refine;
    cfg.hp.alpha = alpha;
    cfg.hp.removal_fraction = k;
    cfg.injection.clique_count = cliques;
  };
  if (name == "cora") set(500, 200, 0.8, 0.01, 5);
  else if (name == "citeseer") set(500, 200, 0.4, 0.01, 5);
  else if (name == "pubmed") set(500, 200, 0.4, 0.01, 20);
  else if (name == "citation") set(1000, 400, 0.4, 0.01, 20);
  else if (name == "acm") set(1000, 400, 0.6, 0.015, 20);
  else return false;
  cfg.dataset = name;
  return true;
}

namespace detail {

struct ConfigEntry {
  std::string section, key, value;
  std::size_t line = 0;
  bool quoted = false;
};

inline std::string strip(std::string_view sv) {
  std::size_t b = 0, e = sv.size();
  while (b < e && (sv[b] == ' ' || sv[b] == '\t')) ++b;
  while (e > b && (sv[e - 1] == ' ' || sv[e - 1] == '\t')) --e;
  return std::string(sv.substr(b, e - b));
}

inline std::vector<ConfigEntry> parse_config_entries(const std::string& path) {
  const std::string buf = read_file(path);
  std::vector<ConfigEntry> entries;
  std::string section;
  for_each_line(buf, [&](std::string_view raw, std::size_t lineno) {
    const std::string ctx = path + ":" + std::to_string(lineno);
    std::string line(raw);
    // comments start at an unquoted '#'
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quote = !in_quote;
      else if (line[i] == '#' && !in_quote) {
        line.resize(i);
        break;
      }
    }
    const std::string trimmed = strip(line);
    if (trimmed.empty()) return;
    if (trimmed.front() == '[') {
      if (trimmed.back() != ']')
        throw config_error(ctx + ": malformed section header '" + trimmed + "'");
      section = strip(std::string_view(trimmed).substr(1, trimmed.size() - 2));
      if (section.empty()) throw config_error(ctx + ": empty section name");
      return;
    }
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw config_error(ctx + ": expected 'key = value', got '" + trimmed + "'");
    ConfigEntry entry;
    entry.section = section;
    entry.key = strip(std::string_view(trimmed).substr(0, eq));
    entry.line = lineno;
    std::string value = strip(std::string_view(trimmed).substr(eq + 1));
    if (entry.key.empty()) throw config_error(ctx + ": empty key");
    if (value.empty()) throw config_error(ctx + ": empty value for '" + entry.key + "'");
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"')
        throw config_error(ctx + ": unterminated string for '" + entry.key + "'");
      value = value.substr(1, value.size() - 2);
      entry.quoted = true;
    }
    entry.value = value;
    entries.push_back(std::move(entry));
  });
  return entries;
}

inline int config_int(const ConfigEntry& e, const std::string& path) {
  try {
    return parse_int(e.value, path + ":" + std::to_string(e.line) + " key '" + e.key + "'");
  } catch (const data_error& err) {
    throw config_error(err.what());
  }
}

inline double config_double(const ConfigEntry& e, const std::string& path) {
  const char* b = e.value.data();
  const char* next = nullptr;
  double v = 0.0;
  try {
    v = parse_double(b, b + e.value.size(), &next,
                     path + ":" + std::to_string(e.line) + " key '" + e.key + "'");
  } catch (const data_error& err) {
    throw config_error(err.what());
  }
  if (next != b + e.value.size())
    throw config_error(path + ":" + std::to_string(e.line) + ": trailing characters in number for '" +
                       e.key + "'");
  return v;
}

inline bool config_bool(const ConfigEntry& e, const std::string& path) {
  if (e.value == "true") return true;
  if (e.value == "false") return false;
  throw config_error(path + ":" + std::to_string(e.line) + ": key '" + e.key +
                     "' expects true or false");
}

inline std::uint64_t config_u64(const ConfigEntry& e, const std::string& path) {
  const std::string ctx = path + ":" + std::to_string(e.line) + " key '" + e.key + "'";
  if (e.value.empty() || e.value.find_first_not_of("0123456789") != std::string::npos)
    throw config_error(ctx + ": expects a non-negative integer");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
  if (errno != 0 || end != e.value.c_str() + e.value.size())
    throw config_error(ctx + ": integer out of range");
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

/// Seed priority: explicit flag, then config file, then CVGAD_SEED, then 1.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag_seed,
                                  std::optional<std::uint64_t> file_seed) {
  if (flag_seed) return *flag_seed;
  if (file_seed) return *file_seed;
  if (const char* env = std::getenv("CVGAD_SEED")) {
    const std::string s(env);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw config_error("CVGAD_SEED must be a non-negative integer, got '" + s + "'");
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size())
      throw config_error("CVGAD_SEED out of range: '" + s + "'");
    return static_cast<std::uint64_t>(v);
  }
  return 1;
}

/// Loads a run config. The dataset profile (when given) applies first, then
/// every explicit key overrides it; unknown keys are rejected with their
/// location.
inline RunConfig load_run_config(const std::string& path) {
  const std::vector<detail::ConfigEntry> entries = detail::parse_config_entries(path);
  RunConfig cfg;
  for (const detail::ConfigEntry& e : entries)
    if (e.section.empty() && e.key == "dataset") {
      if (!apply_dataset_profile(cfg, e.value))
        throw config_error(path + ":" + std::to_string(e.line) + ": unknown dataset '" + e.value +
                           "' (known: cora, citeseer, pubmed, citation, acm)");
    }

  bool seed_seen = false;
  for (const detail::ConfigEntry& e : entries) {
    const std::string ctx = path + ":" + std::to_string(e.line);
    if (e.section.empty()) {
      if (e.key == "dataset") continue;  // handled above
      else if (e.key == "data") cfg.data_dir = e.value;
      else if (e.key == "out") cfg.out_dir = e.value;
      else if (e.key == "mode") cfg.mode = e.value;
      else if (e.key == "threads") cfg.threads = detail::config_int(e, path);
      else if (e.key == "seed") {
        cfg.hp.seed = detail::config_u64(e, path);
        seed_seen = true;
      } else throw config_error(ctx + ": unknown key '" + e.key + "'");
    } else if (e.section == "hyper") {
      if (e.key == "embedding_dim") cfg.hp.embedding_dim = detail::config_int(e, path);
      else if (e.key == "subgraph_size") cfg.hp.subgraph_size = detail::config_int(e, path);
      else if (e.key == "gcn_layers") cfg.hp.gcn_layers = detail::config_int(e, path);
      else if (e.key == "learning_rate") cfg.hp.learning_rate = detail::config_double(e, path);
      else if (e.key == "alpha") cfg.hp.alpha = detail::config_double(e, path);
      else if (e.key == "beta") cfg.hp.beta = detail::config_double(e, path);
      else if (e.key == "gamma") cfg.hp.gamma = detail::config_double(e, path);
      else if (e.key == "removal_fraction")
        cfg.hp.removal_fraction = detail::config_double(e, path);
      else if (e.key == "iterations") cfg.hp.iterations = detail::config_int(e, path);
      else if (e.key == "train_epochs") cfg.hp.train_epochs = detail::config_int(e, path);
      else if (e.key == "refine_epochs") cfg.hp.refine_epochs = detail::config_int(e, path);
      else if (e.key == "score_rounds") cfg.hp.score_rounds = detail::config_int(e, path);
      else if (e.key == "restart_prob") cfg.hp.restart_prob = detail::config_double(e, path);
      else if (e.key == "batch_size") cfg.hp.batch_size = detail::config_int(e, path);
      else if (e.key == "use_disc_bias") cfg.hp.use_disc_bias = detail::config_bool(e, path);
      else throw config_error(ctx + ": unknown key '" + e.key + "' in [hyper]");
    } else if (e.section == "injection") {
      if (e.key == "clique_size") cfg.injection.clique_size = detail::config_int(e, path);
      else if (e.key == "cliques") cfg.injection.clique_count = detail::config_int(e, path);
      else if (e.key == "contextual") cfg.injection.contextual_count = detail::config_int(e, path);
      else if (e.key == "pool") cfg.injection.candidate_pool_size = detail::config_int(e, path);
      else throw config_error(ctx + ": unknown key '" + e.key + "' in [injection]");
    } else {
      throw config_error(ctx + ": unknown section '" + e.section + "'");
    }
  }
  if (!seed_seen) cfg.hp.seed = resolve_seed(std::nullopt, std::nullopt);
  cfg.injection.seed = cfg.hp.seed;
  return cfg;
}

}  // namespace cvgad
