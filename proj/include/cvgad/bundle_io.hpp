#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cvgad/errors.hpp"
#include "cvgad/graph.hpp"

namespace cvgad {

struct LoadStats {
  int self_loops_dropped = 0;
  int duplicate_edges_dropped = 0;
};

struct BundleData {
  AttributedGraph graph;
  std::optional<std::vector<int>> labels;
  LoadStats stats;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Splits buffer into lines, tolerating a trailing \r and a missing final newline.
template <typename Fn>
void for_each_line(const std::string& buf, Fn&& fn) {
  std::size_t start = 0;
  std::size_t lineno = 0;
  while (start < buf.size()) {
    std::size_t end = buf.find('\n', start);
    if (end == std::string::npos) end = buf.size();
    std::size_t len = end - start;
    if (len > 0 && buf[start + len - 1] == '\r') --len;
    ++lineno;
    fn(std::string_view(buf.data() + start, len), lineno);
    start = end + 1;
  }
}

inline int parse_int(std::string_view sv, const std::string& context) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
  if (ec != std::errc() || ptr != sv.data() + sv.size())
    throw data_error("malformed integer '" + std::string(sv) + "' in " + context);
  return value;
}

inline double parse_double(const char* begin, const char* end, const char** next,
                           const std::string& context) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc())
    throw data_error("malformed number in " + context);
  *next = ptr;
  return value;
}

inline void format_double(std::FILE* f, double v) { std::fprintf(f, "%.17g", v); }

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_for_write(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw data_error("cannot write " + path.string());
  return FilePtr(f);
}

}  // namespace detail

/// Reads a bundle directory: features.csv (defines n and o), edges.tsv
/// (deduplicated, self-loops dropped and counted), optional labels.csv.
inline BundleData load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path feat_path = dir / "features.csv";
  const fs::path edge_path = dir / "edges.tsv";
  if (!fs::exists(feat_path)) throw data_error("missing " + feat_path.string());
  if (!fs::exists(edge_path)) throw data_error("missing " + edge_path.string());

  // features.csv
  std::vector<double> values;
  int n = 0, o = -1;
  {
    const std::string buf = detail::read_file(feat_path);
    detail::for_each_line(buf, [&](std::string_view line, std::size_t lineno) {
      if (line.empty()) return;
      const std::string ctx = feat_path.string() + ":" + std::to_string(lineno);
      const char* cur = line.data();
      const char* end = line.data() + line.size();
      int cols = 0;
      for (;;) {
        const char* next = nullptr;
        const double v = detail::parse_double(cur, end, &next, ctx);
        if (!std::isfinite(v)) throw data_error("non-finite feature in " + ctx);
        values.push_back(v);
        ++cols;
        if (next == end) break;
        if (*next != ',') throw data_error("expected ',' in " + ctx);
        cur = next + 1;
      }
      if (o < 0)
        o = cols;
      else if (cols != o)
        throw data_error(ctx + ": row has " + std::to_string(cols) + " columns, expected " +
                         std::to_string(o));
      ++n;
    });
  }
  if (n == 0) throw data_error(feat_path.string() + " contains no feature rows");
  RowMatrixXd x(n, o);
  std::copy(values.begin(), values.end(), x.data());

  BundleData out{AttributedGraph(n, std::move(x)), std::nullopt, {}};

  // edges.tsv
  {
    const std::string buf = detail::read_file(edge_path);
    detail::for_each_line(buf, [&](std::string_view line, std::size_t lineno) {
      if (line.empty()) return;
      const std::string ctx = edge_path.string() + ":" + std::to_string(lineno);
      const std::size_t tab = line.find('\t');
      if (tab == std::string_view::npos) throw data_error("expected two tab-separated ids in " + ctx);
      const int u = detail::parse_int(line.substr(0, tab), ctx);
      const int v = detail::parse_int(line.substr(tab + 1), ctx);
      if (u < 0 || v < 0 || u >= n || v >= n)
        throw data_error(ctx + ": node index out of range for n=" + std::to_string(n));
      if (u == v) {
        ++out.stats.self_loops_dropped;
        return;
      }
      if (!out.graph.add_edge(u, v)) ++out.stats.duplicate_edges_dropped;
    });
  }

  // labels.csv (optional)
  const fs::path label_path = dir / "labels.csv";
  if (fs::exists(label_path)) {
    std::vector<int> labels;
    const std::string buf = detail::read_file(label_path);
    detail::for_each_line(buf, [&](std::string_view line, std::size_t lineno) {
      if (line.empty()) return;
      const std::string ctx = label_path.string() + ":" + std::to_string(lineno);
      const int y = detail::parse_int(line, ctx);
      if (y != 0 && y != 1) throw data_error(ctx + ": label must be 0 or 1");
      labels.push_back(y);
    });
    if (static_cast<int>(labels.size()) != n)
      throw data_error(label_path.string() + " has " + std::to_string(labels.size()) +
                       " labels, expected " + std::to_string(n));
    out.labels = std::move(labels);
  }
  return out;
}

/// Writes a bundle directory. Refuses to clobber an existing bundle unless
/// force is set; decimals use 17 significant digits so reloads are bit-exact.
inline void save_bundle(const std::filesystem::path& dir, const AttributedGraph& g,
                        const std::optional<std::vector<int>>& labels, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir / "edges.tsv") || fs::exists(dir / "features.csv")) {
    if (!force) throw config_error("bundle already exists at " + dir.string() + " (use force to overwrite)");
  }
  fs::create_directories(dir);

  {
    auto f = detail::open_for_write(dir / "edges.tsv");
    for (const Edge& e : g.edges()) std::fprintf(f.get(), "%d\t%d\n", e.first, e.second);
  }
  {
    auto f = detail::open_for_write(dir / "features.csv");
    const RowMatrixXd& x = g.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j) std::fputc(',', f.get());
        detail::format_double(f.get(), x(i, j));
      }
      std::fputc('\n', f.get());
    }
  }
  if (labels) {
    if (static_cast<int>(labels->size()) != g.num_nodes())
      throw data_error("label vector length does not match node count");
    auto f = detail::open_for_write(dir / "labels.csv");
    for (int y : *labels) std::fprintf(f.get(), "%d\n", y);
  }
}

}  // namespace cvgad
