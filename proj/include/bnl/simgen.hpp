#pragma once

// Synthetic three-group design with TR/FR-corrupted edge sets, the
// coefficient-error MSE, and a repetition x grid experiment runner that picks
// the best grid point per dataset by true-coefficient MSE (oracle selection).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bnl/errors.hpp"
#include "bnl/gibbs.hpp"
#include "bnl/model.hpp"
#include "bnl/random.hpp"

namespace bnl::sim {

inline constexpr std::size_t kGroups = 3;

struct SimDesign {
  std::size_t n = 30;
  std::size_t p = 5;
  double tr = 1.0;
  double fr = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < kGroups || n % kGroups != 0) {
      throw DomainError("n must be a positive multiple of 3, got " + std::to_string(n));
    }
    if (p < 1) throw DomainError("p must be >= 1");
    if (!(tr >= 0.0 && tr <= 1.0)) throw DomainError("tr must lie in [0, 1], got " + std::to_string(tr));
    if (!(fr >= 0.0 && fr <= 1.0)) throw DomainError("fr must lie in [0, 1], got " + std::to_string(fr));
  }
};

struct GroundTruth {
  Eigen::MatrixXd W_star;            // n x p
  std::vector<std::size_t> groups;   // 0, 1, 2 in contiguous blocks
};

/// Rows are the three group coefficient vectors. Five informative features;
/// larger p pads with zeros, smaller p truncates.
inline Eigen::MatrixXd group_coefficients(std::size_t p) {
  Eigen::Matrix<double, 3, 5> base;
  base << 5.0, 1.0, -1.0, 0.0, 0.0,
          0.0, 1.0, -5.0, 1.0, 0.0,
          0.0, 0.0, 0.0, 0.5, -0.5;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(p));
  const auto keep = static_cast<Eigen::Index>(std::min<std::size_t>(p, 5));
  out.leftCols(keep) = base.leftCols(keep);
  return out;
}

/// x_ij ~ Uniform(-1, 1), y_i = x_i' w*_{g(i)} + N(0, 1).
inline std::pair<Dataset, GroundTruth> generate_dataset(const SimDesign& design) {
  design.validate();
  RandomSource rng(design.seed);
  const auto n = static_cast<Eigen::Index>(design.n);
  const auto p = static_cast<Eigen::Index>(design.p);
  const Eigen::MatrixXd coef = group_coefficients(design.p);
  GroundTruth truth;
  truth.W_star.resize(n, p);
  truth.groups.resize(design.n);
  const std::size_t size = design.n / kGroups;
  for (std::size_t i = 0; i < design.n; ++i) {
    truth.groups[i] = i / size;
    truth.W_star.row(static_cast<Eigen::Index>(i)) =
        coef.row(static_cast<Eigen::Index>(truth.groups[i]));
  }
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = 2.0 * rng.uniform() - 1.0;
    y(i) = x.row(i).dot(truth.W_star.row(i)) + rng.normal();
  }
  return {Dataset(std::move(x), std::move(y)), std::move(truth)};
}

/// Nearest integer to `fraction * total`, halves rounded up.
inline std::size_t rounded_count(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 0.5 + 1e-9));
}

/// Union of round(tr #F) same-group pairs and round(fr #G) cross-group pairs,
/// each sampled uniformly without replacement.
inline EdgeSet generate_edges(const std::vector<std::size_t>& groups, double tr, double fr,
                              std::uint64_t seed) {
  if (!(tr >= 0.0 && tr <= 1.0) || !(fr >= 0.0 && fr <= 1.0)) {
    throw DomainError("tr and fr must lie in [0, 1]");
  }
  std::vector<Edge> same;
  std::vector<Edge> cross;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      (groups[a] == groups[b] ? same : cross).push_back({a, b});
    }
  }
  RandomSource rng(seed);
  std::vector<Edge> chosen;
  auto take = [&](std::vector<Edge>& pool, std::size_t k) {
    for (std::size_t t = 0; t < k; ++t) {
      std::swap(pool[t], pool[t + rng.index(pool.size() - t)]);
      chosen.push_back(pool[t]);
    }
  };
  take(same, rounded_count(tr, same.size()));
  take(cross, rounded_count(fr, cross.size()));
  return EdgeSet(groups.size(), std::move(chosen));
}

/// sum_i (w*_i - w^_i)' Sigma_i (w*_i - w^_i).
inline double mse(const Eigen::MatrixXd& W_star, const Eigen::MatrixXd& W_hat,
                  const std::vector<Eigen::MatrixXd>& covariances) {
  if (W_star.rows() != W_hat.rows() || W_star.cols() != W_hat.cols()) {
    throw ShapeError("true and estimated coefficients differ in shape");
  }
  if (covariances.size() != static_cast<std::size_t>(W_star.rows())) {
    throw ShapeError("need one covariance per sample");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < W_star.rows(); ++i) {
    const auto& cov = covariances[static_cast<std::size_t>(i)];
    if (cov.rows() != W_star.cols() || cov.cols() != W_star.cols()) {
      throw ShapeError("covariance " + std::to_string(i) + " is not p x p");
    }
    const Eigen::VectorXd d = (W_star.row(i) - W_hat.row(i)).transpose();
    acc += d.dot(cov * d);
  }
  return acc;
}

/// MSE under Uniform(-1, 1) predictors, whose covariance is I / 3.
inline double mse_uniform(const Eigen::MatrixXd& W_star, const Eigen::MatrixXd& W_hat) {
  const Eigen::MatrixXd cov =
      Eigen::MatrixXd::Identity(W_star.cols(), W_star.cols()) / 3.0;
  return mse(W_star, W_hat, std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(W_star.rows()), cov));
}

// ---------------------------------------------------------------------------
// Experiment runner.

inline std::vector<double> default_grid() { return {1e2, 1e1, 1.0, 1e-1, 1e-2, 1e-3}; }

/// DLBMN searches alpha x lambda2; BMN searches lambda1 x lambda2 with r = 1.
struct HyperGrid {
  std::vector<double> alpha = default_grid();
  std::vector<double> lambda1 = default_grid();
  std::vector<double> lambda2 = default_grid();
  double nu0 = 1.0;
  double eta0 = 1.0;

  void validate() const {
    for (const auto* axis : {&alpha, &lambda1, &lambda2}) {
      if (axis->empty()) throw DomainError("hyperparameter grids must be nonempty");
      for (double v : *axis) {
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("grid values must be positive");
      }
    }
    if (!(nu0 > 0.0) || !(eta0 > 0.0)) throw DomainError("nu0 and eta0 must be positive");
  }
};

/// One grid point for one method: (alpha or lambda1, lambda2).
struct GridPoint {
  SamplerMode mode = SamplerMode::dlbmn;
  double alpha = 0.0;    // DLBMN only
  double lambda1 = 0.0;  // BMN only
  double lambda2 = 0.0;
};

inline std::vector<GridPoint> grid_points(const HyperGrid& grid, SamplerMode mode) {
  std::vector<GridPoint> out;
  const auto& outer = mode == SamplerMode::dlbmn ? grid.alpha : grid.lambda1;
  for (double a : outer) {
    for (double l2 : grid.lambda2) {
      GridPoint g;
      g.mode = mode;
      (mode == SamplerMode::dlbmn ? g.alpha : g.lambda1) = a;
      g.lambda2 = l2;
      out.push_back(g);
    }
  }
  return out;
}

inline Hyperparameters make_hyper(const GridPoint& g, const HyperGrid& grid, std::size_t n_edges) {
  Hyperparameters h;
  h.mode = g.mode;
  h.lambda2 = g.lambda2;
  h.nu0 = grid.nu0;
  h.eta0 = grid.eta0;
  if (g.mode == SamplerMode::dlbmn) {
    h.alpha = g.alpha;
  } else {
    h.bmn = BmnFixed{g.lambda1, std::vector<double>(n_edges, 1.0)};
  }
  return h;
}

/// Best grid point for one (repetition, method).
struct RepResult {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  SamplerMode method = SamplerMode::dlbmn;
  GridPoint best;
  double mse = 0.0;
  std::size_t n_edges = 0;
  std::size_t failed_points = 0;
  std::optional<std::string> error;  // set when every grid point failed
};

struct CellSummary {
  SamplerMode method = SamplerMode::dlbmn;
  double mean = 0.0;
  double sd = 0.0;  // n - 1 denominator; 0 for a single repetition
  std::size_t reps = 0;
  std::size_t failed = 0;
};

struct ExperimentResult {
  std::vector<RepResult> reps;        // ordered by (rep, method)
  std::vector<CellSummary> cells;     // one per method, in request order
};

struct ExperimentOptions {
  std::size_t repetitions = 1;
  std::vector<SamplerMode> methods{SamplerMode::dlbmn, SamplerMode::bmn};
  std::size_t threads = 1;
};

/// Runs `f(k)` for k in [0, count) on up to `threads` workers. Results must be
/// written by index so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) f(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) f(k);
    });
  }
  for (auto& th : pool) th.join();
}

inline double sample_sd(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Seed of repetition `rep`: the data, edges and chains all derive from it.
inline std::uint64_t repetition_seed(std::uint64_t seed, std::size_t rep) {
  return RandomSource(seed).child(rep).seed();
}

inline ExperimentResult run_experiment(const SimDesign& design, const HyperGrid& grid,
                                       const ChainConfig& chain,
                                       const ExperimentOptions& options) {
  design.validate();
  grid.validate();
  chain.validate();
  if (options.repetitions < 1) throw DomainError("repetitions must be >= 1");
  if (options.methods.empty()) throw DomainError("at least one method is required");

  struct Replicate {
    Dataset data;
    GroundTruth truth;
    EdgeSet edges;
    std::uint64_t seed = 0;
  };
  std::vector<Replicate> reps(options.repetitions);
  for (std::size_t r = 0; r < options.repetitions; ++r) {
    const std::uint64_t seed = repetition_seed(design.seed, r);
    const RandomSource root(seed);
    SimDesign d = design;
    d.seed = root.child(0).seed();
    auto [data, truth] = generate_dataset(d);
    EdgeSet edges = generate_edges(truth.groups, design.tr, design.fr, root.child(1).seed());
    reps[r] = {std::move(data), std::move(truth), std::move(edges), seed};
  }

  struct Unit {
    std::size_t rep;
    std::size_t method;
    GridPoint point;
    std::uint64_t chain_seed;
  };
  std::vector<Unit> units;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const RandomSource root(reps[r].seed);
    for (std::size_t m = 0; m < options.methods.size(); ++m) {
      const auto points = grid_points(grid, options.methods[m]);
      for (std::size_t g = 0; g < points.size(); ++g) {
        const std::uint64_t stream = 2 + 100000 * m + g;
        units.push_back({r, m, points[g], root.child(stream).seed()});
      }
    }
  }

  std::vector<std::optional<double>> unit_mse(units.size());
  std::vector<std::string> unit_error(units.size());
  parallel_for(units.size(), options.threads, [&](std::size_t k) {
    const auto& u = units[k];
    const auto& rep = reps[u.rep];
    try {
      ChainConfig cfg = chain;
      cfg.seed = u.chain_seed;
      cfg.store_full_chain = false;
      const auto hyper = make_hyper(u.point, grid, rep.edges.size());
      const auto fit = run_chain(rep.data, rep.edges, hyper, cfg);
      unit_mse[k] = mse_uniform(rep.truth.W_star, fit.summary.mean_W);
    } catch (const std::exception& err) {
      unit_error[k] = err.what();
    }
  });

  ExperimentResult out;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    for (std::size_t m = 0; m < options.methods.size(); ++m) {
      RepResult res;
      res.rep = r;
      res.seed = reps[r].seed;
      res.method = options.methods[m];
      res.n_edges = reps[r].edges.size();
      std::optional<double> best;
      std::string last_error;
      for (std::size_t k = 0; k < units.size(); ++k) {
        if (units[k].rep != r || units[k].method != m) continue;
        if (!unit_mse[k]) {
          ++res.failed_points;
          last_error = unit_error[k];
          continue;
        }
        if (!best || *unit_mse[k] < *best) {
          best = unit_mse[k];
          res.best = units[k].point;
        }
      }
      if (best) {
        res.mse = *best;
      } else {
        res.error = last_error;
        res.mse = std::numeric_limits<double>::quiet_NaN();
      }
      out.reps.push_back(std::move(res));
    }
  }

  for (std::size_t m = 0; m < options.methods.size(); ++m) {
    CellSummary cell;
    cell.method = options.methods[m];
    std::vector<double> values;
    for (const auto& r : out.reps) {
      if (r.method != cell.method) continue;
      if (r.error) {
        ++cell.failed;
      } else {
        values.push_back(r.mse);
      }
    }
    cell.reps = values.size();
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      cell.mean = sum / static_cast<double>(values.size());
      cell.sd = sample_sd(values, cell.mean);
    } else {
      cell.mean = std::numeric_limits<double>::quiet_NaN();
    }
    out.cells.push_back(cell);
  }
  return out;
}

}  // namespace bnl::sim
