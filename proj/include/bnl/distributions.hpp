#pragma once

// Random variates and log densities for the distributions used by the
// network-lasso hierarchy: inverse Gaussian, generalized inverse Gaussian
// (GIG), Dirichlet, inverse gamma and a multivariate normal given in
// precision form. Normal, exponential and gamma densities are exposed for
// the log-joint.
//
// Conventions
//   InverseGaussian(mu, lambda):  sqrt(lambda / (2 pi x^3))
//                                   * exp(-lambda (x - mu)^2 / (2 mu^2 x))
//   Gig(index, chi, rho):         x^(index - 1) * exp(-(chi / x + rho x) / 2)
//   InverseGamma(shape, scale):   scale^shape / Gamma(shape)
//                                   * x^(-shape - 1) * exp(-scale / x)
//   Gamma(shape, rate), Exponential(rate), Normal(mean, variance).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/bessel.hpp>

#include "bnl/errors.hpp"
#include "bnl/random.hpp"

namespace bnl {

struct InvGaussParams {
  double mu = 1.0;
  double lambda = 1.0;
};

struct GigParams {
  double index = 1.0;
  double chi = 1.0;
  double rho = 1.0;
};

struct Normal {
  double mean = 0.0;
  double variance = 1.0;
};

struct Exponential {
  double rate = 1.0;
};

struct Gamma {
  double shape = 1.0;
  double rate = 1.0;
};

struct InverseGamma {
  double shape = 1.0;
  double scale = 1.0;
};

using Distribution =
    std::variant<Normal, Exponential, Gamma, InverseGamma, InvGaussParams, GigParams>;

namespace detail {

inline bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

inline void require_positive(double v, const char* what) {
  if (!positive_finite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite, got " +
                      std::to_string(v));
  }
}

inline double clamp_positive(double x) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = std::numeric_limits<double>::max();
  return std::clamp(x, lo, hi);
}

// log of a Gamma(shape, 1) variate; stays finite for very small shapes where
// the variate itself underflows.
inline double sample_log_gamma(double shape, RandomSource& rng) {
  if (shape >= 1.0) return std::log(rng.gamma(shape));
  return std::log(rng.gamma(shape + 1.0)) + std::log(rng.uniform()) / shape;
}

// log K_nu(x) for the modified Bessel function of the second kind. Falls back
// to the integral K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, evaluated
// in log space, when the direct value over- or underflows.
inline double log_bessel_k(double nu, double x) {
  nu = std::abs(nu);
  try {
    const double k = boost::math::cyl_bessel_k(nu, x);
    if (std::isfinite(k) && k > 0.0) return std::log(k);
  } catch (const std::exception&) {
  }

  auto g = [&](double t) {
    const double a = nu * t;
    return -x * std::cosh(t) + a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
  };
  double peak = 0.0;
  if (nu * nu > x) {
    auto slope = [&](double t) { return -x * std::sinh(t) + nu * std::tanh(nu * t); };
    double lo = 0.0;
    double hi = std::asinh(nu / x) + 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    peak = 0.5 * (lo + hi);
  }
  double curvature = x * std::cosh(peak) - nu * nu / std::pow(std::cosh(nu * peak), 2);
  if (!(curvature > 0.0)) curvature = x * std::cosh(peak);
  const double width = 1.0 / std::sqrt(curvature);
  const double lo = 0.0;
  const double hi = peak + 60.0 * width;
  const double h = std::min(width / 40.0, (hi - lo) / 2000.0);
  const auto steps = std::min<std::size_t>(
      static_cast<std::size_t>(std::ceil((hi - lo) / h)), 4'000'000);
  const double gmax = g(peak);
  double sum = 0.0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps);
    const double wgt = (k == 0 || k == steps) ? 0.5 : 1.0;
    sum += wgt * std::exp(g(t) - gmax);
  }
  return gmax + std::log(sum * (hi - lo) / static_cast<double>(steps));
}

// Mode of y^(lambda - 1) exp(-omega (y + 1/y) / 2).
inline double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) {
    return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) /
           omega;
  }
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// The three generators below draw from the standardized density
// y^(lambda - 1) exp(-omega (y + 1/y) / 2) with lambda >= 0 (Hoermann and
// Leydold's ratio-of-uniforms family, as in the GIGrvg package).

inline double gig_rou_shift(double lambda, double omega, RandomSource& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)) are roots of y^3 + a y^2 + b y + c.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double arg = std::clamp(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)), -1.0, 1.0);
  const double fi = std::acos(arg);
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  auto polish = [&](double y) {
    for (int it = 0; it < 4; ++it) {
      const double f = ((y + a) * y + b) * y + c;
      const double df = (3.0 * y + 2.0 * a) * y + b;
      if (df == 0.0) break;
      const double next = y - f / df;
      if (!std::isfinite(next) || next <= 0.0) break;
      y = next;
    }
    return y;
  };
  double y1 = polish(fak * std::cos(fi / 3.0) - a / 3.0);
  double y2 = polish(fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0);
  if (y1 <= xm || y2 >= xm || y2 <= 0.0) {
    throw DomainError("GIG bounding rectangle failed for lambda=" + std::to_string(lambda) +
                      ", omega=" + std::to_string(omega));
  }
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

inline double gig_rou_noshift(double lambda, double omega, RandomSource& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym =
      ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);

  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Constant/power/exponential hat for 0 <= lambda < 1 and small omega.
inline double gig_small_omega(double lambda, double omega, RandomSource& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);

  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;

  double k1 = 0.0;
  double k2 = 0.0;
  if (x0 >= 2.0 / omega) {
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = (lambda == 0.0)
                  ? k1 * std::log(2.0 / (omega * omega))
                  : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * rng.uniform();
    double x = 0.0;
    double hx = 0.0;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + (lambda / k1 * v), 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double start = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * start) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    if (!(x > 0.0) || !std::isfinite(x)) continue;
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

// Lower Cholesky factor of the lower triangle of `a`. Reports the first
// pivot that is not strictly positive.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
  const Eigen::Index p = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) throw FactorizationError(static_cast<std::size_t>(j), d);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < p; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

}  // namespace detail

inline void validate(const InvGaussParams& p) {
  detail::require_positive(p.mu, "inverse-Gaussian mu");
  detail::require_positive(p.lambda, "inverse-Gaussian lambda");
}

inline void validate(const GigParams& p) {
  if (!std::isfinite(p.index)) throw DomainError("GIG index must be finite");
  detail::require_positive(p.chi, "GIG chi");
  detail::require_positive(p.rho, "GIG rho");
}

/// Michael-Schucany-Haas transformation with the root written in a
/// cancellation-free form, so very large mu / lambda ratios stay accurate.
inline double sample_inverse_gaussian(const InvGaussParams& params, RandomSource& rng) {
  validate(params);
  const double mu = params.mu;
  const double nu = rng.normal();
  const double z = mu * (nu * nu) / (2.0 * params.lambda);
  double x = mu / (1.0 + z + std::sqrt(z) * std::sqrt(2.0 + z));
  if (rng.uniform() * (mu + x) > mu) x = mu * (mu / x);
  return detail::clamp_positive(x);
}

inline double sample_gig(const GigParams& params, RandomSource& rng) {
  validate(params);
  const double lambda = std::abs(params.index);
  const double omega = std::sqrt(params.chi) * std::sqrt(params.rho);
  const double scale = std::sqrt(params.chi) / std::sqrt(params.rho);

  // omega this small cannot be resolved: the gamma (or inverse-gamma) limit.
  if (omega < 1e-200 && lambda > 0.0) {
    if (params.index > 0.0) return detail::clamp_positive(rng.gamma(lambda) * 2.0 / params.rho);
    return detail::clamp_positive(params.chi / (2.0 * rng.gamma(lambda)));
  }

  double y = 0.0;
  if (lambda > 2.0 || omega > 3.0) {
    y = detail::gig_rou_shift(lambda, omega, rng);
  } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    y = detail::gig_rou_noshift(lambda, omega, rng);
  } else {
    y = detail::gig_small_omega(lambda, omega, rng);
  }
  return detail::clamp_positive(params.index < 0.0 ? scale / y : scale * y);
}

/// Normalized gamma draws. A single component returns exactly {1}.
inline std::vector<double> sample_dirichlet(std::span<const double> alphas, RandomSource& rng) {
  if (alphas.empty()) throw DomainError("Dirichlet needs at least one concentration");
  for (double a : alphas) detail::require_positive(a, "Dirichlet concentration");
  if (alphas.size() == 1) return {1.0};

  std::vector<double> out(alphas.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    out[k] = detail::sample_log_gamma(alphas[k], rng);
    max_log = std::max(max_log, out[k]);
  }
  double sum = 0.0;
  for (double& v : out) {
    v = std::max(std::exp(v - max_log), std::numeric_limits<double>::min());
    sum += v;
  }
  // Components stay strictly inside (0, 1) even when one dominates to
  // within rounding.
  constexpr double top = 1.0 - std::numeric_limits<double>::epsilon();
  for (double& v : out) v = std::clamp(v / sum, std::numeric_limits<double>::min(), top);
  return out;
}

/// Draw whose reciprocal is Gamma(shape, rate = scale).
inline double sample_inverse_gamma(double shape, double scale, RandomSource& rng) {
  detail::require_positive(shape, "inverse-gamma shape");
  detail::require_positive(scale, "inverse-gamma scale");
  return detail::clamp_positive(std::exp(std::log(scale) - detail::sample_log_gamma(shape, rng)));
}

/// Draw from N(P^-1 b, scale * P^-1) using the Cholesky factor of P.
inline Eigen::VectorXd sample_mvn_from_precision(const Eigen::MatrixXd& precision,
                                                 const Eigen::VectorXd& linear, double scale,
                                                 RandomSource& rng) {
  if (precision.rows() != precision.cols() || precision.rows() != linear.size()) {
    throw ShapeError("precision must be square and match the linear term");
  }
  detail::require_positive(scale, "normal scale");
  const Eigen::MatrixXd l = detail::cholesky_lower(precision);
  const auto lower = l.triangularView<Eigen::Lower>();
  const auto upper = l.transpose().triangularView<Eigen::Upper>();

  Eigen::VectorXd mean = upper.solve(lower.solve(linear));
  Eigen::VectorXd z(linear.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  return mean + std::sqrt(scale) * upper.solve(z);
}

// ---------------------------------------------------------------------------
// Log densities. Invalid parameters throw; x outside the support gives -inf.

namespace detail {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double log_pdf(const Normal& d, double x) {
  require_positive(d.variance, "normal variance");
  const double r = x - d.mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * d.variance) - 0.5 * r * r / d.variance;
}

inline double log_pdf(const Exponential& d, double x) {
  require_positive(d.rate, "exponential rate");
  if (!(x >= 0.0) || !std::isfinite(x)) return neg_inf;
  return std::log(d.rate) - d.rate * x;
}

inline double log_pdf(const Gamma& d, double x) {
  require_positive(d.shape, "gamma shape");
  require_positive(d.rate, "gamma rate");
  if (!(x > 0.0) || !std::isfinite(x)) return neg_inf;
  return d.shape * std::log(d.rate) - std::lgamma(d.shape) + (d.shape - 1.0) * std::log(x) -
         d.rate * x;
}

inline double log_pdf(const InverseGamma& d, double x) {
  require_positive(d.shape, "inverse-gamma shape");
  require_positive(d.scale, "inverse-gamma scale");
  if (!(x > 0.0) || !std::isfinite(x)) return neg_inf;
  return d.shape * std::log(d.scale) - std::lgamma(d.shape) - (d.shape + 1.0) * std::log(x) -
         d.scale / x;
}

inline double log_pdf(const InvGaussParams& d, double x) {
  validate(d);
  if (!(x > 0.0) || !std::isfinite(x)) return neg_inf;
  const double r = x - d.mu;
  return 0.5 * (std::log(d.lambda) - std::log(2.0 * std::numbers::pi) - 3.0 * std::log(x)) -
         d.lambda * r * r / (2.0 * d.mu * d.mu * x);
}

inline double log_pdf(const GigParams& d, double x) {
  validate(d);
  if (!(x > 0.0) || !std::isfinite(x)) return neg_inf;
  const double omega = std::sqrt(d.chi * d.rho);
  const double log_norm = 0.5 * d.index * (std::log(d.rho) - std::log(d.chi)) -
                          std::numbers::ln2 - log_bessel_k(d.index, omega);
  return log_norm + (d.index - 1.0) * std::log(x) - 0.5 * (d.chi / x + d.rho * x);
}

}  // namespace detail

/// Natural log of the normalized density of `dist` at `x`.
inline double log_density(const Distribution& dist, double x) {
  return std::visit([x](const auto& d) { return detail::log_pdf(d, x); }, dist);
}

/// Dirichlet log density with respect to Lebesgue measure on the first
/// K - 1 coordinates. A one-component Dirichlet is the point mass at {1}.
inline double log_density_dirichlet(std::span<const double> alphas, std::span<const double> x) {
  if (alphas.empty() || alphas.size() != x.size()) {
    throw ShapeError("Dirichlet point and concentration lengths differ");
  }
  double sum_alpha = 0.0;
  double sum_x = 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    detail::require_positive(alphas[k], "Dirichlet concentration");
    if (!(x[k] > 0.0) || !std::isfinite(x[k])) return detail::neg_inf;
    sum_alpha += alphas[k];
    sum_x += x[k];
    acc += (alphas[k] - 1.0) * std::log(x[k]) - std::lgamma(alphas[k]);
  }
  if (std::abs(sum_x - 1.0) > 1e-10) return detail::neg_inf;
  if (alphas.size() == 1) return 0.0;
  return acc + std::lgamma(sum_alpha);
}

}  // namespace bnl
