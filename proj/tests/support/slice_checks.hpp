#pragma once

// One-dimensional slice tests of the Gibbs updates: each update, applied
// repeatedly to a fixed state, must reproduce the slice of exp(log_joint)
// along its coordinate (with the latent scales the update integrates out
// integrated numerically). Each check returns a KS p-value.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bnl/gibbs.hpp"
#include "support/oracles.hpp"

namespace bnl::oracle::slices {

struct Instance {
  Dataset data;
  EdgeSet edges;
  Hyperparameters hyper;
  GibbsState state;
};

/// n = 2, p = 1, one edge, with a fixed off-mode state.
inline Instance one_edge() {
  Instance in{Dataset(Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(1.0, 1.0)), EdgeSet(2, {{0, 1}}),
              Hyperparameters{}, GibbsState{}};
  in.hyper.alpha = 2.0;
  in.hyper.lambda2 = 1.3;
  in.hyper.nu0 = 4.0;
  in.hyper.eta0 = 2.0;
  in.state.W = Eigen::Vector2d(0.6, 0.2);
  in.state.tau_tilde = Eigen::Vector2d(1.5, 0.7);
  in.state.r_inv = {1.0};
  in.state.lambda1 = 1.3;
  in.state.tau = {0.8};
  in.state.sigma2 = 0.9;
  return in;
}

/// n = 3, p = 1, path graph with two edges.
inline Instance two_edge() {
  Instance in{Dataset(Eigen::Vector3d(1.0, -0.5, 0.8), Eigen::Vector3d(0.4, 1.2, -0.3)),
              EdgeSet(3, {{0, 1}, {1, 2}}), Hyperparameters{}, GibbsState{}};
  in.hyper.alpha = 0.6;
  in.hyper.lambda2 = 0.8;
  in.state.W = Eigen::Vector3d(0.3, -0.4, 0.9);
  in.state.tau_tilde = Eigen::Vector3d(1.0, 2.0, 0.5);
  in.state.r_inv = {0.3, 0.7};
  in.state.lambda1 = 0.7;
  in.state.tau = {1.2, 0.4};
  in.state.sigma2 = 0.6;
  return in;
}

inline std::vector<double> repeat(std::size_t n, const std::function<double()>& f) {
  std::vector<double> out(n);
  for (auto& v : out) v = f();
  return out;
}

/// log_joint along one coordinate, everything else held at the instance state.
template <class Set>
std::function<double(double)> slice(const Instance& in, Set set) {
  return [&in, set](double v) {
    GibbsState s = in.state;
    set(s, v);
    return log_joint(s, in.data, in.edges, in.hyper);
  };
}

inline double w_row(const Instance& in, std::size_t i, std::size_t draws, std::uint64_t seed) {
  const auto row = static_cast<Eigen::Index>(i);
  const auto oracle = NumericDistribution::real_line(
      slice(in, [row](GibbsState& s, double v) { s.W(row, 0) = v; }), -20.0, 20.0);
  RandomSource rng(seed);
  const auto xs = repeat(draws, [&] {
    GibbsState s = in.state;
    update_w(s, in.data, in.edges, i, rng);
    return s.W(row, 0);
  });
  return ks_test(xs, oracle).p_value;
}

inline double tau_edge(const Instance& in, std::size_t e, std::size_t draws, std::uint64_t seed) {
  const auto oracle =
      NumericDistribution::positive(slice(in, [e](GibbsState& s, double v) { s.tau[e] = v; }));
  RandomSource rng(seed);
  const auto xs = repeat(draws, [&] {
    GibbsState s = in.state;
    update_tau_edge(s, in.edges, e, rng);
    return s.tau[e];
  });
  return ks_test(xs, oracle).p_value;
}

inline double tau_tilde(const Instance& in, std::size_t i, std::size_t draws, std::uint64_t seed) {
  const auto row = static_cast<Eigen::Index>(i);
  const auto oracle = NumericDistribution::positive(
      slice(in, [row](GibbsState& s, double v) { s.tau_tilde(row, 0) = v; }));
  RandomSource rng(seed);
  const auto xs = repeat(draws, [&] {
    GibbsState s = in.state;
    update_tau_tilde(s, in.hyper, i, 0, rng);
    return s.tau_tilde(row, 0);
  });
  return ks_test(xs, oracle).p_value;
}

inline double sigma2(const Instance& in, std::size_t draws, std::uint64_t seed) {
  const auto oracle =
      NumericDistribution::positive(slice(in, [](GibbsState& s, double v) { s.sigma2 = v; }));
  RandomSource rng(seed);
  const auto xs = repeat(draws, [&] {
    GibbsState s = in.state;
    update_sigma2(s, in.data, in.edges, in.hyper, rng);
    return s.sigma2;
  });
  return ks_test(xs, oracle).p_value;
}

/// The lambda1 draw integrates tau out, so its target is the slice in
/// 1/lambda1 after integrating the (single) tau numerically.
inline double lambda1(const Instance& in, std::size_t draws, std::uint64_t seed) {
  auto marginal = [&in](double phi) {
    GibbsState s = in.state;
    s.lambda1 = 1.0 / phi;
    return log_integral(
        [&](double u) {
          for (auto& t : s.tau) t = std::exp(u);
          return log_joint(s, in.data, in.edges, in.hyper) + static_cast<double>(s.tau.size()) * u;
        },
        -40.0, 40.0, 4001);
  };
  const auto oracle = NumericDistribution::positive(marginal, 4001, -30.0, 30.0, 0.1);
  RandomSource rng(seed);
  const auto xs = repeat(draws, [&] {
    GibbsState s = in.state;
    update_lambda1(s, in.edges, in.hyper, rng);
    return 1.0 / s.lambda1;
  });
  return ks_test(xs, oracle).p_value;
}

/// On one edge the r_inv simplex is the single point 1.
inline bool r_single_edge_is_one(const Instance& in, std::size_t draws, std::uint64_t seed) {
  GibbsState s = in.state;
  RandomSource rng(seed);
  for (std::size_t k = 0; k < draws; ++k) {
    update_r(s, in.edges, in.hyper, rng);
    if (s.r_inv.size() != 1 || s.r_inv[0] != 1.0) return false;
  }
  return true;
}

/// On two edges the r draw integrates lambda1 and both tau out. With tau
/// integrated each edge term is Laplace with scale sigma / (lambda1 r_e),
/// leaving a 1-D integral over 1/lambda1 per point of the slice, taken on
/// the logit scale u = log(r_inv_0 / r_inv_1).
inline double r_two_edges(const Instance& in, std::size_t draws, std::uint64_t seed) {
  const double sigma = std::sqrt(in.state.sigma2);
  const double a = in.hyper.alpha;
  std::vector<double> d;
  for (const auto& e : in.edges.edges()) d.push_back(edge_distance(in.state.W, e));

  auto log_target = [&](double u) {
    const double s0 = 1.0 / (1.0 + std::exp(-u));
    const double s1 = 1.0 / (1.0 + std::exp(u));
    const std::vector<double> alphas{a, a};
    const std::vector<double> pt{s0, s1};
    const double dir = log_density_dirichlet(alphas, pt) + std::log(s0) + std::log(s1);
    const double phi_part = log_integral(
        [&](double v) {
          const double phi = std::exp(v);
          double acc = log_density(Gamma{2.0 * a, 0.5}, phi) + v;
          for (std::size_t e = 0; e < 2; ++e) {
            const double b = sigma * phi * (e == 0 ? s0 : s1);
            acc += -std::log(2.0 * b) - d[e] / b;
          }
          return acc;
        },
        -40.0, 40.0, 4001);
    return dir + phi_part;
  };
  const auto oracle = NumericDistribution::real_line(log_target, -60.0, 60.0, 4001, 1200);
  RandomSource rng(seed);
  const auto xs = repeat(draws, [&] {
    GibbsState s = in.state;
    update_r(s, in.edges, in.hyper, rng);
    return std::log(s.r_inv[0]) - std::log(s.r_inv[1]);
  });
  return ks_test(xs, oracle).p_value;
}

}  // namespace bnl::oracle::slices
