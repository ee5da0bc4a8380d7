#pragma once

// File formats. CSV output is RFC 4180 quoted, preceded by `# ` comment lines
// carrying provenance JSON; readers skip `#` lines. Numbers are written in
// shortest round-trip form so reruns are byte-identical.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include <Eigen/Dense>

#include "bnl/errors.hpp"
#include "bnl/gibbs.hpp"
#include "bnl/model.hpp"
#include "bnl/realdata.hpp"

namespace bnl::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Raised when an output path exists and overwriting was not requested, or a
/// named input is missing.
struct PathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const json& provenance) : out_(out) {
    out_ << "# " << provenance.dump() << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out_ << ',';
      out_ << csv_field(cells[k]);
    }
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Paths.

inline void require_input(const std::string& path, const char* what) {
  std::error_code ec;
  if (path.empty() || !std::filesystem::is_regular_file(path, ec)) {
    throw PathError(std::string(what) + " file '" + path + "' does not exist");
  }
}

inline void require_output(const std::string& path, bool overwrite) {
  if (path.empty()) throw PathError("output path is empty");
  std::error_code ec;
  if (!overwrite && std::filesystem::exists(path, ec)) {
    throw PathError("output '" + path + "' exists; pass --overwrite to replace it");
  }
}

/// Writes to `path` through a temporary sibling so a failed run leaves no
/// truncated file behind.
template <class F>
void write_file(const std::string& path, F&& body) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PathError("cannot write '" + path + "'");
    body(out);
    out.flush();
    if (!out) throw PathError("write to '" + path + "' failed");
  }
  std::filesystem::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Readers.

namespace detail {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open '" + path + "'");
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = geo::detail::split_csv_line(line);
    for (auto& c : cells) c = geo::detail::trim(c);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw DataError(path + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, header has " +
                      std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw DataError(path + ": no header row");
  return t;
}

inline double number_at(const Table& t, std::size_t r, std::size_t c, const std::string& path) {
  const auto v = geo::detail::parse_number(t.rows[r][c]);
  if (!v || !std::isfinite(*v)) {
    throw DataError(path + ": line " + std::to_string(t.line_numbers[r]) + ", column '" +
                    t.header[c] + "': cannot parse '" + t.rows[r][c] + "'");
  }
  return *v;
}

inline std::size_t index_at(const Table& t, std::size_t r, std::size_t c, const std::string& path) {
  const double v = number_at(t, r, c, path);
  if (v < 0.0 || v != std::floor(v)) {
    throw DataError(path + ": line " + std::to_string(t.line_numbers[r]) + ", column '" +
                    t.header[c] + "': expected a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

inline std::size_t column(const Table& t, const std::string& name, const std::string& path) {
  for (std::size_t k = 0; k < t.header.size(); ++k) {
    if (t.header[k] == name) return k;
  }
  throw DataError(path + ": no column '" + name + "'");
}

}  // namespace detail

/// Column `y` is the response; every other column is a feature, in order.
inline Dataset read_dataset_csv(const std::string& path) {
  const auto t = detail::read_table(path);
  const std::size_t yc = detail::column(t, "y", path);
  if (t.rows.empty()) throw DataError(path + ": no data rows");
  if (t.header.size() < 2) throw DataError(path + ": no feature columns");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto p = static_cast<Eigen::Index>(t.header.size() - 1);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const double v = detail::number_at(t, r, c, path);
      if (c == yc) {
        y(static_cast<Eigen::Index>(r)) = v;
      } else {
        X(static_cast<Eigen::Index>(r), j++) = v;
      }
    }
  }
  Dataset d(std::move(X), std::move(y));
  d.validate();
  return d;
}

/// Columns `a`, `b`: 0-based sample indices.
inline EdgeSet read_edges_csv(const std::string& path, std::size_t n_nodes) {
  const auto t = detail::read_table(path);
  const std::size_t ac = detail::column(t, "a", path);
  const std::size_t bc = detail::column(t, "b", path);
  std::vector<Edge> pairs;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    pairs.push_back({detail::index_at(t, r, ac, path), detail::index_at(t, r, bc, path)});
  }
  return EdgeSet(n_nodes, std::move(pairs));
}

/// Columns `a`, `b`, `r`; every edge of `edges` exactly once, either orientation.
inline std::vector<double> read_r_csv(const std::string& path, const EdgeSet& edges) {
  const auto t = detail::read_table(path);
  const std::size_t ac = detail::column(t, "a", path);
  const std::size_t bc = detail::column(t, "b", path);
  const std::size_t rc = detail::column(t, "r", path);
  std::vector<std::optional<double>> r(edges.size());
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    const Edge e{detail::index_at(t, row, ac, path), detail::index_at(t, row, bc, path)};
    const auto idx = edges.index_of(e.a, e.b);
    if (!idx) {
      throw DataError(path + ": line " + std::to_string(t.line_numbers[row]) +
                      " names a pair that is not an edge");
    }
    if (r[*idx]) {
      throw DataError(path + ": line " + std::to_string(t.line_numbers[row]) + " repeats an edge");
    }
    r[*idx] = detail::number_at(t, row, rc, path);
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (!r[k]) {
      throw DataError(path + ": no r for edge (" + std::to_string(edges[k].a) + ", " +
                      std::to_string(edges[k].b) + ")");
    }
    out.push_back(*r[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON.

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json summary_json(const ChainSummary& s, const EdgeSet& edges, const json& provenance) {
  json edge_list = json::array();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    edge_list.push_back({{"a", edges[k].a},
                         {"b", edges[k].b},
                         {"mean_r", s.mean_r.empty() ? 0.0 : s.mean_r[k]},
                         {"fusion_prob", s.fusion_prob.empty() ? 0.0 : s.fusion_prob[k]}});
  }
  return {{"schema_version", kSchemaVersion},
          {"provenance", provenance},
          {"n_kept", s.n_kept},
          {"mean_sigma2", s.mean_sigma2},
          {"mean_lambda1", s.mean_lambda1},
          {"ess_sigma2", s.ess_sigma2},
          {"mean_W", matrix_json(s.mean_W)},
          {"q05_W", matrix_json(s.q05_W)},
          {"q50_W", matrix_json(s.q50_W)},
          {"q95_W", matrix_json(s.q95_W)},
          {"edges", std::move(edge_list)}};
}

inline json record_json(const ChainRecord& r) {
  return {{"sweep", r.sweep},
          {"sigma2", r.sigma2},
          {"lambda1", r.lambda1},
          {"r_inv", r.r_inv},
          {"W", matrix_json(r.W)}};
}

inline json cv_json(const geo::CvReport& report, const json& provenance) {
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"fold", f.fold},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test},
                     {"n_edges", f.n_edges},
                     {"pse", f.pse},
                     {"alpha", f.best.alpha},
                     {"lambda1", f.best.lambda1},
                     {"lambda2", f.best.lambda2},
                     {"grid_pse", f.grid_pse}});
  }
  return {{"schema_version", kSchemaVersion},
          {"provenance", provenance},
          {"mean_pse", report.mean_pse},
          {"sd_pse", report.sd_pse},
          {"folds", std::move(folds)}};
}

}  // namespace bnl::io
