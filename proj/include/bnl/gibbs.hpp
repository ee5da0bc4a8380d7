#pragma once

// Systematic-scan Gibbs sampler for the network-lasso hierarchy.
//
// One sweep draws, in order:
//   1. every row w_i            from N(S^-1 m, sigma^2 S^-1)
//   2. r_inv                    from p(r_inv | W, sigma^2), tau and lambda1 integrated out
//   3. lambda1                  from p(lambda1 | r, W, sigma^2), tau integrated out
//   4. every edge scale tau_e   from p(tau_e | lambda1, r, W, sigma^2)
//   5. every cell scale tau~_ij from p(tau~_ij | w_ij, sigma^2)
//   6. sigma^2                  from its inverse-gamma conditional
//
// Steps 2-4 together draw (r_inv, lambda1, tau) jointly from their conditional
// given (W, sigma^2, tau~), so tau must follow the two collapsed draws. With
// the Laplace form of the edge prior and T_e = r_inv_e / lambda1, the T_e are
// iid Gamma(alpha, rate 1/2) a priori, which gives
//
//   T_e       | .  ~ GIG(alpha - 1,          chi = 2 d_e / sigma,          rho = 1)
//   1/lambda1 | .  ~ GIG(#E (alpha - 1),     chi = 2 sum_e r_e d_e / sigma, rho = 1)
//   1/tau_e   | .  ~ IGauss(sigma / (lambda1 r_e d_e), 1)
//   1/tau~_ij | .  ~ IGauss(lambda2 sigma / |w_ij|, lambda2^2)
//   sigma^2   | .  ~ IG(nu' / 2, eta' / 2),  nu' = n + #E + np + nu0
//
// with d_e = ||w_a - w_b||. In BMN mode steps 2 and 3 are skipped and the
// fixed r and lambda1 stay in the state untouched.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnl/distributions.hpp"
#include "bnl/errors.hpp"
#include "bnl/model.hpp"
#include "bnl/random.hpp"

namespace bnl {

/// Guards the scale updates against exact coefficient collisions.
inline constexpr double kDistanceFloor = 1e-10;

struct ChainConfig {
  std::size_t n_iter = 50000;
  std::optional<std::size_t> burn_in;  // default n_iter / 2
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  bool store_full_chain = false;
  double fusion_epsilon = 1e-2;
  std::size_t quantile_draws = 1000;  // kept draws retained for quantiles

  std::size_t resolved_burn_in() const { return burn_in.value_or(n_iter / 2); }

  std::size_t n_kept() const {
    const std::size_t b = resolved_burn_in();
    return (n_iter - b + thin - 1) / thin;
  }

  void validate() const {
    if (n_iter < 1) throw DomainError("n_iter must be positive");
    if (resolved_burn_in() >= n_iter) {
      throw DomainError("burn_in must be < n_iter, got " + std::to_string(resolved_burn_in()) +
                        " >= " + std::to_string(n_iter));
    }
    if (thin < 1) throw DomainError("thin must be >= 1");
    if (!(fusion_epsilon > 0.0)) throw DomainError("fusion_epsilon must be positive");
    if (quantile_draws < 1) throw DomainError("quantile_draws must be >= 1");
  }
};

/// One kept draw of the full chain.
struct ChainRecord {
  std::size_t sweep = 0;
  Eigen::MatrixXd W;
  double sigma2 = 0.0;
  double lambda1 = 0.0;
  std::vector<double> r_inv;
};

struct ChainResult {
  ChainSummary summary;
  std::vector<ChainRecord> chain;  // empty unless store_full_chain
  GibbsState final_state;
};

// ---------------------------------------------------------------------------
// Conditional parameters. Exposed separately so they can be checked without
// sampling.

struct NormalConditional {
  Eigen::MatrixXd precision;  // S
  Eigen::VectorXd linear;     // m
  double scale = 1.0;         // sigma^2
};

inline NormalConditional w_conditional(const GibbsState& s, const Dataset& data,
                                       const EdgeSet& edges, std::size_t i) {
  const auto row = static_cast<Eigen::Index>(i);
  const Eigen::VectorXd x = data.X.row(row).transpose();
  const double l2 = s.lambda1 * s.lambda1;
  double ridge = 0.0;
  Eigen::VectorXd pull = Eigen::VectorXd::Zero(x.size());
  for (const auto& nb : edges.neighbors(i)) {
    const double r = s.r(nb.edge);
    const double c = l2 * r * r / s.tau[nb.edge];
    ridge += c;
    pull += c * s.W.row(static_cast<Eigen::Index>(nb.node)).transpose();
  }
  NormalConditional out;
  out.precision = x * x.transpose();
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    out.precision(j, j) += ridge + 1.0 / s.tau_tilde(row, j);
  }
  out.linear = data.y(row) * x + pull;
  out.scale = s.sigma2;
  return out;
}

/// Parameters of the inverse-Gaussian draw of 1 / tau_e.
inline InvGaussParams tau_edge_conditional(const GibbsState& s, const EdgeSet& edges,
                                           std::size_t e) {
  const double d = std::max(edge_distance(s.W, edges[e]), kDistanceFloor);
  return {std::sqrt(s.sigma2) / (s.lambda1 * s.r(e) * d), 1.0};
}

/// Parameters of the inverse-Gaussian draw of 1 / tau~_ij.
inline InvGaussParams tau_tilde_conditional(const GibbsState& s, const Hyperparameters& hyper,
                                            std::size_t i, std::size_t j) {
  const double w = std::max(std::abs(s.W(static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(j))),
                            kDistanceFloor);
  return {hyper.lambda2 * std::sqrt(s.sigma2) / w, hyper.lambda2 * hyper.lambda2};
}

/// Parameters of the GIG draw of 1 / lambda1.
inline GigParams lambda1_conditional(const GibbsState& s, const EdgeSet& edges,
                                     const Hyperparameters& hyper) {
  double weighted = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    weighted += s.r(e) * std::max(edge_distance(s.W, edges[e]), kDistanceFloor);
  }
  const double n_edges = static_cast<double>(edges.size());
  return {n_edges * (hyper.alpha - 1.0), 2.0 * weighted / std::sqrt(s.sigma2), 1.0};
}

/// Parameters of the GIG draw of the unnormalized T_e.
inline GigParams r_component_conditional(const GibbsState& s, const EdgeSet& edges,
                                         const Hyperparameters& hyper, std::size_t e) {
  const double d = std::max(edge_distance(s.W, edges[e]), kDistanceFloor);
  return {hyper.alpha - 1.0, 2.0 * d / std::sqrt(s.sigma2), 1.0};
}

/// Shape and scale of the inverse-gamma draw of sigma^2, i.e. (nu'/2, eta'/2).
struct InverseGammaParams {
  double shape = 0.0;
  double scale = 0.0;
};

inline InverseGammaParams sigma2_conditional(const GibbsState& s, const Dataset& data,
                                             const EdgeSet& edges,
                                             const Hyperparameters& hyper) {
  const double n = static_cast<double>(data.n());
  const double p = static_cast<double>(data.p());
  const double n_edges = static_cast<double>(edges.size());
  const double nu = n + n_edges + n * p + hyper.nu0;

  const Eigen::VectorXd fitted = (data.X.array() * s.W.array()).rowwise().sum();
  double eta = (data.y - fitted).squaredNorm();
  const double l2 = s.lambda1 * s.lambda1;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double d = edge_distance(s.W, edges[e]);
    const double r = s.r(e);
    eta += l2 * r * r / s.tau[e] * d * d;
  }
  eta += (s.W.array().square() / s.tau_tilde.array()).sum();
  eta += hyper.eta0;
  return {0.5 * nu, 0.5 * eta};
}

// ---------------------------------------------------------------------------
// Block updates. Each mutates only its own block of `state`.

inline void update_w(GibbsState& state, const Dataset& data, const EdgeSet& edges, std::size_t i,
                     RandomSource& rng) {
  if (i >= data.n()) throw ShapeError("row index " + std::to_string(i) + " out of range");
  const auto c = w_conditional(state, data, edges, i);
  state.W.row(static_cast<Eigen::Index>(i)) =
      sample_mvn_from_precision(c.precision, c.linear, c.scale, rng).transpose();
}

inline void update_tau_edge(GibbsState& state, const EdgeSet& edges, std::size_t e,
                            RandomSource& rng) {
  state.tau[e] = 1.0 / sample_inverse_gaussian(tau_edge_conditional(state, edges, e), rng);
}

inline void update_lambda1(GibbsState& state, const EdgeSet& edges, const Hyperparameters& hyper,
                           RandomSource& rng) {
  if (hyper.mode == SamplerMode::bmn || edges.empty()) return;
  state.lambda1 = 1.0 / sample_gig(lambda1_conditional(state, edges, hyper), rng);
}

inline void update_r(GibbsState& state, const EdgeSet& edges, const Hyperparameters& hyper,
                     RandomSource& rng) {
  if (hyper.mode == SamplerMode::bmn || edges.empty()) return;
  if (edges.size() == 1) {
    state.r_inv[0] = 1.0;
    return;
  }
  // Normalize in log space so a common scale in T cannot overflow.
  std::vector<double> log_t(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    log_t[e] = std::log(sample_gig(r_component_conditional(state, edges, hyper, e), rng));
  }
  const double top = *std::max_element(log_t.begin(), log_t.end());
  double sum = 0.0;
  for (double& v : log_t) {
    v = std::exp(v - top);
    sum += v;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw DomainError("relational coefficients failed to normalize (sum " + std::to_string(sum) +
                      ")");
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    state.r_inv[e] = std::max(log_t[e] / sum, std::numeric_limits<double>::min());
  }
}

inline void update_tau_tilde(GibbsState& state, const Hyperparameters& hyper, std::size_t i,
                             std::size_t j, RandomSource& rng) {
  state.tau_tilde(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
      1.0 / sample_inverse_gaussian(tau_tilde_conditional(state, hyper, i, j), rng);
}

inline void update_sigma2(GibbsState& state, const Dataset& data, const EdgeSet& edges,
                          const Hyperparameters& hyper, RandomSource& rng) {
  const auto c = sigma2_conditional(state, data, edges, hyper);
  state.sigma2 = sample_inverse_gamma(c.shape, c.scale, rng);
}

/// One full sweep in the fixed block order.
inline void gibbs_sweep(GibbsState& state, const Dataset& data, const EdgeSet& edges,
                        const Hyperparameters& hyper, RandomSource& rng) {
  for (std::size_t i = 0; i < data.n(); ++i) update_w(state, data, edges, i, rng);
  update_r(state, edges, hyper, rng);
  update_lambda1(state, edges, hyper, rng);
  for (std::size_t e = 0; e < edges.size(); ++e) update_tau_edge(state, edges, e, rng);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) update_tau_tilde(state, hyper, i, j, rng);
  }
  update_sigma2(state, data, edges, hyper, rng);
}

/// Deterministic start: per-row ridge fit, unit scales, uniform r_inv.
inline GibbsState initialize_state(const Dataset& data, const EdgeSet& edges,
                                   const Hyperparameters& hyper) {
  data.validate();
  hyper.validate(edges.size());
  if (edges.n_nodes() != data.n()) throw ShapeError("edge set and dataset disagree on n");

  GibbsState s;
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.p());
  s.W.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd x = data.X.row(i);
    // (x x' + I)^-1 y x = y x / (1 + x'x) by Sherman-Morrison.
    s.W.row(i) = data.y(i) * x / (1.0 + x.squaredNorm());
  }
  const double mean = data.y.mean();
  const double var =
      n > 1 ? (data.y.array() - mean).square().sum() / static_cast<double>(n - 1) : 0.0;
  s.sigma2 = std::max(var, 1e-6);
  s.tau.assign(edges.size(), 1.0);
  s.tau_tilde = Eigen::MatrixXd::Ones(n, p);
  if (hyper.mode == SamplerMode::bmn) {
    s.lambda1 = hyper.bmn->lambda1;
    s.r_inv.resize(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) s.r_inv[e] = 1.0 / hyper.bmn->r[e];
  } else {
    s.lambda1 = 1.0;
    s.r_inv.assign(edges.size(), edges.empty() ? 1.0 : 1.0 / static_cast<double>(edges.size()));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Summaries.

namespace detail {

/// Linear-interpolation sample quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Effective sample size from Geyer's initial positive sequence.
inline double effective_sample_size(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += (xs[t] - mean) * (xs[t + lag] - mean);
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n && k < 5000; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return static_cast<double>(n) / std::max(tau, 1.0 / static_cast<double>(n));
}

/// Runs one chain from `initialize_state`. Any failure inside a sweep is
/// rethrown as SamplerError carrying the sweep index.
inline ChainResult run_chain(const Dataset& data, const EdgeSet& edges,
                             const Hyperparameters& hyper, const ChainConfig& config) {
  config.validate();
  GibbsState state = initialize_state(data, edges, hyper);
  RandomSource rng(config.seed);

  const std::size_t burn = config.resolved_burn_in();
  const std::size_t total_kept = config.n_kept();
  const std::size_t stride = (total_kept + config.quantile_draws - 1) / config.quantile_draws;
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.p());

  ChainResult result;
  auto& sum = result.summary;
  sum.mean_W = Eigen::MatrixXd::Zero(n, p);
  sum.mean_r.assign(edges.size(), 0.0);
  sum.fusion_prob.assign(edges.size(), 0.0);
  std::vector<Eigen::MatrixXd> quantile_store;
  std::vector<double> sigma_trace;
  sigma_trace.reserve(total_kept);
  double lambda_sum = 0.0;

  for (std::size_t sweep = 0; sweep < config.n_iter; ++sweep) {
    try {
      gibbs_sweep(state, data, edges, hyper, rng);
    } catch (const std::exception& err) {
      throw SamplerError(sweep + 1, err.what());
    }
    if (sweep < burn || (sweep - burn) % config.thin != 0) continue;

    const std::size_t kept_index = sum.n_kept++;
    sum.mean_W += state.W;
    sigma_trace.push_back(state.sigma2);
    lambda_sum += state.lambda1;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      sum.mean_r[e] += state.r(e);
      if (edge_distance(state.W, edges[e]) < config.fusion_epsilon) sum.fusion_prob[e] += 1.0;
    }
    if (kept_index % stride == 0) quantile_store.push_back(state.W);
    if (config.store_full_chain) {
      result.chain.push_back({sweep, state.W, state.sigma2, state.lambda1, state.r_inv});
    }
  }

  const double kept = static_cast<double>(sum.n_kept);
  sum.mean_W /= kept;
  sum.mean_sigma2 = std::accumulate(sigma_trace.begin(), sigma_trace.end(), 0.0) / kept;
  sum.mean_lambda1 = lambda_sum / kept;
  for (auto& v : sum.mean_r) v /= kept;
  for (auto& v : sum.fusion_prob) v /= kept;
  sum.ess_sigma2 = effective_sample_size(sigma_trace);

  sum.q05_W.resize(n, p);
  sum.q50_W.resize(n, p);
  sum.q95_W.resize(n, p);
  std::vector<double> cell(quantile_store.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < quantile_store.size(); ++k) cell[k] = quantile_store[k](i, j);
      std::sort(cell.begin(), cell.end());
      sum.q05_W(i, j) = detail::sorted_quantile(cell, 0.05);
      sum.q50_W(i, j) = detail::sorted_quantile(cell, 0.50);
      sum.q95_W(i, j) = detail::sorted_quantile(cell, 0.95);
    }
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace bnl
