#pragma once

// Containers for the multi-task regression model y_i = x_i' w_i + e_i with
// per-sample coefficients fused over a relational graph, the network-lasso
// objective, and the log-joint density of the latent-variable hierarchy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnl/distributions.hpp"
#include "bnl/errors.hpp"

namespace bnl {

/// Observed data: n x p design matrix and n responses.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  Dataset() = default;
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd resp) : X(std::move(x)), y(std::move(resp)) {
    validate();
  }

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw ShapeError("dataset needs n >= 1 and p >= 1");
    if (X.rows() != y.size()) {
      throw ShapeError("design has " + std::to_string(X.rows()) + " rows but response has " +
                       std::to_string(y.size()) + " entries");
    }
    if (!X.allFinite() || !y.allFinite()) throw DomainError("dataset contains non-finite values");
  }
};

/// Undirected pair (a, b) with a < b.
struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  auto operator<=>(const Edge&) const = default;
};

struct Neighbor {
  std::size_t node = 0;
  std::size_t edge = 0;
};

/// Canonical undirected edge set: pairs stored as (min, max), sorted, no
/// duplicates or self-loops, with a per-node neighbor index covering both
/// pair positions.
class EdgeSet {
 public:
  EdgeSet() = default;

  EdgeSet(std::size_t n_nodes, std::vector<Edge> pairs) : n_nodes_(n_nodes) {
    for (auto& e : pairs) {
      if (e.a == e.b) throw DomainError("self-loop on node " + std::to_string(e.a));
      if (e.a >= n_nodes || e.b >= n_nodes) {
        throw DomainError("edge (" + std::to_string(e.a) + ", " + std::to_string(e.b) +
                          ") references a node >= " + std::to_string(n_nodes));
      }
      if (e.a > e.b) std::swap(e.a, e.b);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    edges_ = std::move(pairs);
    build_index();
  }

  std::size_t n_nodes() const noexcept { return n_nodes_; }
  std::size_t size() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return edges_.empty(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& operator[](std::size_t k) const { return edges_[k]; }

  std::span<const Neighbor> neighbors(std::size_t i) const {
    return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  std::optional<std::size_t> index_of(std::size_t i, std::size_t j) const {
    const Edge key{std::min(i, j), std::max(i, j)};
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
  }

  friend bool operator==(const EdgeSet& l, const EdgeSet& r) {
    return l.n_nodes_ == r.n_nodes_ && l.edges_ == r.edges_;
  }

 private:
  void build_index() {
    offsets_.assign(n_nodes_ + 1, 0);
    for (const auto& e : edges_) {
      ++offsets_[e.a + 1];
      ++offsets_[e.b + 1];
    }
    for (std::size_t i = 0; i < n_nodes_; ++i) offsets_[i + 1] += offsets_[i];
    adjacency_.resize(2 * edges_.size());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      adjacency_[fill[edges_[k].a]++] = {edges_[k].b, k};
      adjacency_[fill[edges_[k].b]++] = {edges_[k].a, k};
    }
  }

  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adjacency_;
};

enum class SamplerMode { dlbmn, bmn };

inline const char* to_string(SamplerMode m) { return m == SamplerMode::dlbmn ? "dlbmn" : "bmn"; }

/// Fixed relational coefficients and lambda1 for the BMN baseline.
struct BmnFixed {
  double lambda1 = 1.0;
  std::vector<double> r;  // per edge, in EdgeSet order
};

struct Hyperparameters {
  double alpha = 1.0;    // Dirichlet concentration
  double lambda2 = 1.0;  // variable-selection strength
  double nu0 = 1.0;      // sigma^2 ~ IG(nu0 / 2, eta0 / 2)
  double eta0 = 1.0;
  SamplerMode mode = SamplerMode::dlbmn;
  std::optional<BmnFixed> bmn;

  void validate(std::size_t n_edges) const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be positive, got " + std::to_string(v));
      }
    };
    positive(alpha, "alpha");
    positive(lambda2, "lambda2");
    positive(nu0, "nu0");
    positive(eta0, "eta0");
    if (mode == SamplerMode::bmn) {
      if (!bmn) throw DomainError("BMN mode needs fixed lambda1 and r");
      positive(bmn->lambda1, "lambda1");
      if (bmn->r.size() != n_edges) {
        throw ShapeError("BMN needs one r per edge: got " + std::to_string(bmn->r.size()) +
                         " for " + std::to_string(n_edges) + " edges");
      }
      for (double r : bmn->r) positive(r, "r");
    } else if (bmn) {
      throw DomainError("fixed lambda1/r given outside BMN mode");
    }
  }
};

/// Every quantity the sampler updates. r is stored through its reciprocal,
/// which lives on the simplex in DLBMN mode.
struct GibbsState {
  Eigen::MatrixXd W;           // n x p, row i is w_i
  std::vector<double> r_inv;   // per edge
  double lambda1 = 1.0;
  std::vector<double> tau;     // per edge
  Eigen::MatrixXd tau_tilde;   // n x p
  double sigma2 = 1.0;

  double r(std::size_t edge) const { return 1.0 / r_inv[edge]; }
};

/// Posterior summaries over kept draws.
struct ChainSummary {
  Eigen::MatrixXd mean_W;
  double mean_sigma2 = 0.0;
  double mean_lambda1 = 0.0;
  std::vector<double> mean_r;
  std::vector<double> fusion_prob;
  Eigen::MatrixXd q05_W;
  Eigen::MatrixXd q50_W;
  Eigen::MatrixXd q95_W;
  std::size_t n_kept = 0;
  double ess_sigma2 = 0.0;
};

inline double edge_distance(const Eigen::MatrixXd& W, const Edge& e) {
  return (W.row(static_cast<Eigen::Index>(e.a)) - W.row(static_cast<Eigen::Index>(e.b))).norm();
}

inline void check_shapes(const Eigen::MatrixXd& W, const Dataset& data, const EdgeSet& edges) {
  if (W.rows() != data.X.rows() || W.cols() != data.X.cols()) {
    throw ShapeError("coefficient matrix is " + std::to_string(W.rows()) + "x" +
                     std::to_string(W.cols()) + ", data is " + std::to_string(data.n()) + "x" +
                     std::to_string(data.p()));
  }
  if (edges.n_nodes() != data.n()) throw ShapeError("edge set and dataset disagree on n");
}

/// sum_i (y_i - x_i' w_i)^2 + lambda * sum_edges r_e ||w_a - w_b||_2.
inline double network_lasso_objective(const Eigen::MatrixXd& W, const Dataset& data,
                                      const EdgeSet& edges, std::span<const double> r,
                                      double lambda) {
  check_shapes(W, data, edges);
  if (r.size() != edges.size()) throw ShapeError("need one relational coefficient per edge");
  const Eigen::VectorXd fitted = (data.X.array() * W.array()).rowwise().sum();
  double penalty = 0.0;
  for (std::size_t k = 0; k < edges.size(); ++k) penalty += r[k] * edge_distance(W, edges[k]);
  return (data.y - fitted).squaredNorm() + lambda * penalty;
}

namespace detail {

inline bool valid_state(const GibbsState& s, const Dataset& data, const EdgeSet& edges,
                        const Hyperparameters& hyper) {
  auto ok = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!ok(s.sigma2) || !ok(s.lambda1)) return false;
  if (s.r_inv.size() != edges.size() || s.tau.size() != edges.size()) return false;
  if (s.tau_tilde.rows() != s.W.rows() || s.tau_tilde.cols() != s.W.cols()) return false;
  if (!s.W.allFinite()) return false;
  double sum = 0.0;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!ok(s.r_inv[k]) || !ok(s.tau[k])) return false;
    sum += s.r_inv[k];
  }
  if (hyper.mode == SamplerMode::dlbmn && !edges.empty() && std::abs(sum - 1.0) > 1e-10) {
    return false;
  }
  if (!(s.tau_tilde.array() > 0.0).all() || !s.tau_tilde.allFinite()) return false;
  check_shapes(s.W, data, edges);
  return true;
}

}  // namespace detail

/// Gaussian log-likelihood of y given W and sigma^2.
inline double log_likelihood(const GibbsState& state, const Dataset& data) {
  if (!(state.sigma2 > 0.0) || !std::isfinite(state.sigma2)) {
    return -std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd fitted = (data.X.array() * state.W.array()).rowwise().sum();
  const double rss = (data.y - fitted).squaredNorm();
  const double n = static_cast<double>(data.n());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * state.sigma2) - 0.5 * rss / state.sigma2;
}

/// Log prior of the augmented hierarchy, with every density normalized:
///
///   ||w_a - w_b|| | .   ~ N(0, tau_e sigma^2 / (lambda1 r_e)^2)   per edge
///   w_ij | .            ~ N(0, tau~_ij sigma^2)
///   r_inv               ~ Dir(alpha, ..., alpha)
///   1 / lambda1         ~ Gamma(alpha #E, rate 1/2)
///   tau_e               ~ Exp(rate 1/2)
///   tau~_ij             ~ Exp(rate lambda2^2 / 2)
///   sigma^2             ~ IG(nu0 / 2, eta0 / 2)
///
/// The edge term is a one-dimensional normal in the norm of the difference,
/// so that integrating tau_e out leaves the Laplace factor
/// (lambda1 r_e / (2 sigma)) exp(-lambda1 r_e ||w_a - w_b|| / sigma).
/// The r_inv density is with respect to its first #E - 1 coordinates and the
/// lambda1 density is the one of its reciprocal. In BMN mode the fixed r and
/// lambda1 contribute nothing; with no edges neither do their priors.
inline double log_prior(const GibbsState& state, const Dataset& data, const EdgeSet& edges,
                        const Hyperparameters& hyper) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (!detail::valid_state(state, data, edges, hyper)) return ninf;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const double sigma2 = state.sigma2;
  double acc = 0.0;

  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double d = edge_distance(state.W, edges[k]);
    const double lr = state.lambda1 * state.r(k);
    const double var = state.tau[k] * sigma2 / (lr * lr);
    acc += -0.5 * (log2pi + std::log(var)) - 0.5 * d * d / var;
    acc += log_density(Exponential{0.5}, state.tau[k]);
  }

  const double rate_tilde = 0.5 * hyper.lambda2 * hyper.lambda2;
  for (Eigen::Index i = 0; i < state.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < state.W.cols(); ++j) {
      const double var = state.tau_tilde(i, j) * sigma2;
      const double w = state.W(i, j);
      acc += -0.5 * (log2pi + std::log(var)) - 0.5 * w * w / var;
      acc += log_density(Exponential{rate_tilde}, state.tau_tilde(i, j));
    }
  }

  if (hyper.mode == SamplerMode::dlbmn && !edges.empty()) {
    const std::vector<double> alphas(edges.size(), hyper.alpha);
    acc += log_density_dirichlet(alphas, state.r_inv);
    const double shape = hyper.alpha * static_cast<double>(edges.size());
    acc += log_density(Gamma{shape, 0.5}, 1.0 / state.lambda1);
  }

  acc += log_density(InverseGamma{0.5 * hyper.nu0, 0.5 * hyper.eta0}, sigma2);
  return acc;
}

/// log likelihood + log prior; -inf for any state outside the support.
inline double log_joint(const GibbsState& state, const Dataset& data, const EdgeSet& edges,
                        const Hyperparameters& hyper) {
  const double prior = log_prior(state, data, edges, hyper);
  if (!std::isfinite(prior)) return prior;
  return log_likelihood(state, data) + prior;
}

}  // namespace bnl
