#pragma once

// Geo-tagged regression data: CSV ingestion with missing-value filtering, a
// k-nearest-neighbour graph on (latitude, longitude), and k-fold
// cross-validation of the sampler with held-out prediction error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/tokenizer.hpp>
#include <Eigen/Dense>

#include "bnl/errors.hpp"
#include "bnl/gibbs.hpp"
#include "bnl/model.hpp"
#include "bnl/random.hpp"
#include "bnl/simgen.hpp"

namespace bnl::geo {

/// Column mapping. Cells listed in `zero_is_missing` count as missing when
/// they parse to exactly 0.
struct GeoSchema {
  std::string target = "price";
  std::vector<std::string> features{"beds", "baths", "sq__ft"};
  std::string latitude = "latitude";
  std::string longitude = "longitude";
  std::vector<std::string> zero_is_missing{"beds", "baths", "sq__ft"};
};

struct GeoDataset {
  Dataset data;
  Eigen::MatrixXd coords;            // n x 2: latitude, longitude
  std::vector<std::size_t> source_rows;  // 1-based data-row number in the file
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
};

namespace detail {

using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::string clean = line;
  if (!clean.empty() && clean.back() == '\r') clean.pop_back();
  // Doubled quotes inside quoted fields (RFC 4180) become backslash escapes.
  std::string escaped;
  escaped.reserve(clean.size());
  bool quoted = false;
  for (std::size_t k = 0; k < clean.size(); ++k) {
    const char c = clean[k];
    if (c == '"') {
      if (quoted && k + 1 < clean.size() && clean[k + 1] == '"') {
        escaped += "\\\"";
        ++k;
        continue;
      }
      quoted = !quoted;
    } else if (c == '\\') {
      escaped += '\\';
    }
    escaped += c;
  }
  const boost::escaped_list_separator<char> sep('\\', ',', '"');
  const Tokenizer tok(escaped, sep);
  return {tok.begin(), tok.end()};
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?" || s == "null";
}

inline std::optional<double> parse_number(const std::string& s) {
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  double v = 0.0;
  in >> v;
  if (in.fail()) return std::nullopt;
  in >> std::ws;
  if (!in.eof()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses CSV text with a header row. Rows with a missing named field are
/// dropped when `filter_missing`; otherwise a missing field is an error.
inline GeoDataset parse_geo_csv(std::istream& in, const GeoSchema& schema, bool filter_missing,
                                const std::string& source = "<input>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < header.size(); ++k) column[detail::trim(header[k])] = k;

  auto index_of = [&](const std::string& name, const char* role) {
    const auto it = column.find(name);
    if (it == column.end()) {
      throw DataError(source + ": " + role + " column '" + name + "' not in header");
    }
    return it->second;
  };
  if (schema.target.empty()) throw DataError(source + ": schema has no target column");
  if (schema.features.empty()) throw DataError(source + ": schema has no feature columns");
  const std::size_t target = index_of(schema.target, "target");
  std::vector<std::size_t> features;
  for (const auto& f : schema.features) features.push_back(index_of(f, "feature"));
  const std::size_t lat = index_of(schema.latitude, "latitude");
  const std::size_t lon = index_of(schema.longitude, "longitude");
  std::vector<bool> zero_missing(header.size(), false);
  for (const auto& z : schema.zero_is_missing) {
    const auto it = column.find(z);
    if (it != column.end()) zero_missing[it->second] = true;
  }

  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  std::vector<std::pair<double, double>> cs;
  GeoDataset out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty() || line == "\r") continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    bool missing = false;
    auto read = [&](std::size_t col) -> double {
      const std::string name = detail::trim(header[col]);
      if (col >= cells.size()) {
        missing = true;
        return 0.0;
      }
      const std::string cell = detail::trim(cells[col]);
      if (detail::is_missing_token(cell)) {
        missing = true;
        return 0.0;
      }
      const auto v = detail::parse_number(cell);
      if (!v || !std::isfinite(*v)) {
        throw DataError(source + ": row " + std::to_string(row) + ", column '" + name +
                        "': cannot parse '" + cell + "' as a number");
      }
      if (zero_missing[col] && *v == 0.0) missing = true;
      return *v;
    };
    std::vector<double> x;
    for (std::size_t f : features) x.push_back(read(f));
    const double y = read(target);
    const double la = read(lat);
    const double lo = read(lon);
    ++out.rows_read;
    if (missing) {
      if (!filter_missing) {
        throw DataError(source + ": row " + std::to_string(row) + " has a missing value");
      }
      ++out.rows_dropped;
      continue;
    }
    xs.push_back(std::move(x));
    ys.push_back(y);
    cs.emplace_back(la, lo);
    out.source_rows.push_back(row);
  }
  if (xs.empty()) throw DataError(source + ": no complete rows");

  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto p = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  out.coords.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = xs[k][static_cast<std::size_t>(j)];
    y(i) = ys[k];
    out.coords(i, 0) = cs[k].first;
    out.coords(i, 1) = cs[k].second;
  }
  out.data = Dataset(std::move(x), std::move(y));
  return out;
}

inline GeoDataset load_geo_csv(const std::string& path, const GeoSchema& schema,
                               bool filter_missing) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_geo_csv(in, schema, filter_missing, path);
}

/// Union over i of the pairs (i, j) for the k nearest j != i by Euclidean
/// distance on the coordinate rows; ties go to the lower index.
inline EdgeSet knn_edges(const Eigen::MatrixXd& coords, std::size_t k) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (k < 1 || k >= n) {
    throw DomainError("k must satisfy 1 <= k < n, got k=" + std::to_string(k) +
                      " with n=" + std::to_string(n));
  }
  std::vector<Edge> pairs;
  pairs.reserve(n * k);
  std::vector<std::pair<double, std::size_t>> dist(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m++] = {(coords.row(static_cast<Eigen::Index>(i)) -
                    coords.row(static_cast<Eigen::Index>(j))).squaredNorm(),
                   j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t t = 0; t < k; ++t) pairs.push_back({i, dist[t].second});
  }
  return EdgeSet(n, std::move(pairs));
}

// ---------------------------------------------------------------------------
// Cross-validation.

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < len; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t row_hash(const GeoDataset& geo, Eigen::Index i, std::uint64_t seed) {
  std::uint64_t h = fnv1a(&seed, sizeof(seed), 0xcbf29ce484222325ULL);
  auto mix = [&](double v) { h = fnv1a(&v, sizeof(v), h); };
  for (Eigen::Index j = 0; j < geo.data.X.cols(); ++j) mix(geo.data.X(i, j));
  mix(geo.data.y(i));
  mix(geo.coords(i, 0));
  mix(geo.coords(i, 1));
  return h;
}

}  // namespace detail

/// Fold label per row, a function of row content and seed only: rows are
/// ordered by (hash, content) and dealt round-robin, so fold sizes differ by
/// at most one and reordering the input permutes the labels with it.
inline std::vector<std::size_t> assign_folds(const GeoDataset& geo, std::size_t folds,
                                             std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(geo.data.X.rows());
  if (folds < 2 || folds > n) {
    throw DomainError("need 2 <= folds <= n, got folds=" + std::to_string(folds));
  }
  auto key = [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<double> v(geo.data.X.row(r).begin(), geo.data.X.row(r).end());
    v.push_back(geo.data.y(r));
    v.push_back(geo.coords(r, 0));
    v.push_back(geo.coords(r, 1));
    return std::make_pair(detail::row_hash(geo, r, seed), v);
  };
  std::vector<std::pair<std::pair<std::uint64_t, std::vector<double>>, std::size_t>> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) order.push_back({key(i), i});
  std::sort(order.begin(), order.end());
  std::vector<std::size_t> label(n);
  for (std::size_t k = 0; k < n; ++k) label[order[k].second] = k % folds;
  return label;
}

/// Column means and sample standard deviations; a constant column keeps
/// scale 1.
struct Standardizer {
  Eigen::RowVectorXd x_mean;
  Eigen::RowVectorXd x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;

  static Standardizer fit(const Dataset& d) {
    Standardizer s;
    const double n = static_cast<double>(d.n());
    s.x_mean = d.X.colwise().mean();
    s.x_scale.resize(d.X.cols());
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) {
      const double ss = (d.X.col(j).array() - s.x_mean(j)).square().sum();
      const double sd = n > 1.0 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      s.x_scale(j) = sd > 0.0 ? sd : 1.0;
    }
    s.y_mean = d.y.mean();
    const double ss = (d.y.array() - s.y_mean).square().sum();
    const double sd = n > 1.0 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.y_scale = sd > 0.0 ? sd : 1.0;
    return s;
  }

  Eigen::MatrixXd x(const Eigen::MatrixXd& raw) const {
    return (raw.rowwise() - x_mean).array().rowwise() / x_scale.array();
  }
  Eigen::VectorXd y(const Eigen::VectorXd& raw) const {
    return (raw.array() - y_mean) / y_scale;
  }
};

/// y^ = x' w_bar with w_bar the mean posterior-mean coefficient row of the k
/// training points nearest to `coord` (ties to the lower index).
inline double predict_held_out(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& coord,
                               const Eigen::MatrixXd& mean_W, const Eigen::MatrixXd& train_coords,
                               std::size_t k) {
  const auto n = static_cast<std::size_t>(train_coords.rows());
  if (k < 1 || k > n) throw DomainError("prediction needs 1 <= k <= training size");
  if (mean_W.rows() != train_coords.rows() || mean_W.cols() != x.size()) {
    throw ShapeError("coefficient rows must match training points and features");
  }
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t j = 0; j < n; ++j) {
    dist[j] = {(train_coords.row(static_cast<Eigen::Index>(j)) - coord).squaredNorm(), j};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(x.size());
  for (std::size_t t = 0; t < k; ++t) w += mean_W.row(static_cast<Eigen::Index>(dist[t].second));
  w /= static_cast<double>(k);
  return x.dot(w);
}

/// Mean squared prediction error.
inline double pse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (y.size() != y_hat.size() || y.size() == 0) throw ShapeError("pse needs equal nonempty vectors");
  return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

struct CvConfig {
  std::size_t folds = 5;
  std::size_t k = 5;
  SamplerMode method = SamplerMode::dlbmn;
  sim::HyperGrid grid;
  ChainConfig chain;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_edges = 0;
  double pse = 0.0;
  sim::GridPoint best;
  std::vector<double> grid_pse;  // per grid point, NaN when the fit failed
};

struct CvReport {
  std::vector<FoldResult> folds;
  double mean_pse = 0.0;
  double sd_pse = 0.0;
};

/// One training split: standardized data restricted to non-test rows, its
/// kNN graph, and the standardized held-out rows.
struct FoldSplit {
  Dataset train;
  Eigen::MatrixXd train_coords;
  EdgeSet edges;
  Eigen::MatrixXd test_x;
  Eigen::VectorXd test_y;
  Eigen::MatrixXd test_coords;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
};

inline FoldSplit make_split(const GeoDataset& geo, const std::vector<std::size_t>& label,
                            std::size_t fold, std::size_t k) {
  FoldSplit s;
  for (std::size_t i = 0; i < label.size(); ++i) {
    (label[i] == fold ? s.test_index : s.train_index).push_back(i);
  }
  if (s.train_index.size() < k + 1) {
    throw DomainError("fold " + std::to_string(fold) + " leaves " +
                      std::to_string(s.train_index.size()) + " training points; need > k = " +
                      std::to_string(k));
  }
  auto take = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x, Eigen::VectorXd& y,
                  Eigen::MatrixXd& c) {
    const auto m = static_cast<Eigen::Index>(idx.size());
    x.resize(m, geo.data.X.cols());
    y.resize(m);
    c.resize(m, 2);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]);
      x.row(r) = geo.data.X.row(i);
      y(r) = geo.data.y(i);
      c.row(r) = geo.coords.row(i);
    }
  };
  Eigen::MatrixXd tx;
  Eigen::VectorXd ty;
  take(s.train_index, tx, ty, s.train_coords);
  Eigen::MatrixXd vx;
  Eigen::VectorXd vy;
  take(s.test_index, vx, vy, s.test_coords);
  const auto st = Standardizer::fit(Dataset(tx, ty));
  s.train = Dataset(st.x(tx), st.y(ty));
  s.test_x = st.x(vx);
  s.test_y = st.y(vy);
  s.edges = knn_edges(s.train_coords, k);
  return s;
}

inline CvReport cross_validate(const GeoDataset& geo, const CvConfig& cfg) {
  cfg.grid.validate();
  cfg.chain.validate();
  if (cfg.k < 1) throw DomainError("k must be >= 1");
  const auto label = assign_folds(geo, cfg.folds, cfg.seed);
  std::vector<FoldSplit> splits;
  for (std::size_t f = 0; f < cfg.folds; ++f) splits.push_back(make_split(geo, label, f, cfg.k));

  const auto points = sim::grid_points(cfg.grid, cfg.method);
  const std::size_t units = cfg.folds * points.size();
  std::vector<double> unit_pse(units, std::numeric_limits<double>::quiet_NaN());
  const RandomSource root(cfg.seed);
  sim::parallel_for(units, cfg.threads, [&](std::size_t u) {
    const std::size_t f = u / points.size();
    const std::size_t g = u % points.size();
    const auto& sp = splits[f];
    try {
      ChainConfig chain = cfg.chain;
      chain.seed = root.child(u).seed();
      chain.store_full_chain = false;
      const auto hyper = sim::make_hyper(points[g], cfg.grid, sp.edges.size());
      const auto fit = run_chain(sp.train, sp.edges, hyper, chain);
      Eigen::VectorXd pred(sp.test_y.size());
      for (Eigen::Index r = 0; r < pred.size(); ++r) {
        pred(r) = predict_held_out(sp.test_x.row(r), sp.test_coords.row(r), fit.summary.mean_W,
                                   sp.train_coords, cfg.k);
      }
      unit_pse[u] = pse(sp.test_y, pred);
    } catch (const std::exception&) {
      // Recorded as NaN; the fold fails only if every grid point does.
    }
  });

  CvReport report;
  std::vector<double> values;
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    FoldResult fr;
    fr.fold = f;
    fr.n_train = splits[f].train_index.size();
    fr.n_test = splits[f].test_index.size();
    fr.n_edges = splits[f].edges.size();
    fr.grid_pse.assign(unit_pse.begin() + static_cast<std::ptrdiff_t>(f * points.size()),
                       unit_pse.begin() + static_cast<std::ptrdiff_t>((f + 1) * points.size()));
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < points.size(); ++g) {
      if (std::isnan(fr.grid_pse[g])) continue;
      if (!best || fr.grid_pse[g] < fr.grid_pse[*best]) best = g;
    }
    if (!best) throw SamplerError(0, "every grid point failed on fold " + std::to_string(f));
    fr.best = points[*best];
    fr.pse = fr.grid_pse[*best];
    values.push_back(fr.pse);
    report.folds.push_back(std::move(fr));
  }
  report.mean_pse = std::accumulate(values.begin(), values.end(), 0.0) /
                    static_cast<double>(values.size());
  report.sd_pse = sim::sample_sd(values, report.mean_pse);
  return report;
}

}  // namespace bnl::geo
