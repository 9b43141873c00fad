#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "gqmi/ensemble.hpp"
#include "gqmi/geometry.hpp"
#include "gqmi/rng.hpp"

namespace gqmi {

/// Metropolis-Hastings configuration for the canonical and Fubini-Study
/// Gaussian samplers. Proposals are Gaussian steps in (p, phi), reflected
/// at p in {0, 1} and wrapped mod 2*pi; the base measure is coordinate
/// Lebesgue dp dphi.
struct McmcConfig {
  double sigma_p = 0.1;
  double sigma_phi = 0.4;
  std::int64_t burn_in = 10000;
  int thinning = 10;
  int chains = 8;

  void validate() const {
    if (sigma_p <= 0.0 || sigma_phi <= 0.0) {
      throw std::invalid_argument("McmcConfig: step sizes must be positive");
    }
    if (burn_in < 0) throw std::invalid_argument("McmcConfig: negative burn-in");
    if (thinning < 1) throw std::invalid_argument("McmcConfig: thinning must be >= 1");
    if (chains < 1) throw std::invalid_argument("McmcConfig: chain count must be >= 1");
  }
};

namespace detail {

inline double reflect_unit(double x) {
  while (x < 0.0 || x > 1.0) {
    if (x < 0.0) x = -x;
    if (x > 1.0) x = 2.0 - x;
  }
  return x;
}

/// Writes a valid qubit point into row i: p-row (1-p, p), phi-row (0, phi)
/// with the gauge conventions applied.
inline void store_qubit_point(Eigen::MatrixXd& p, Eigen::MatrixXd& phi,
                              std::int64_t i, double p1, double phi1) {
  const double p0 = 1.0 - p1;
  p(i, 0) = p0;
  p(i, 1) = p1;
  phi(i, 0) = 0.0;
  if (p1 <= zero_probability_threshold) {
    phi(i, 1) = 0.0;
  } else if (p0 <= zero_probability_threshold) {
    phi(i, 1) = 0.0;  // anchor moves to component 1
  } else {
    phi(i, 1) = wrap_angle(phi1);
  }
}

/// Generic qubit Metropolis-Hastings driver. `log_target` is the log
/// density with respect to dp dphi, up to a constant.
template <typename LogTarget>
Ensemble sample_qubit_mcmc(LogTarget&& log_target, std::int64_t n, std::uint64_t seed,
                           const McmcConfig& cfg, EnsembleMeta meta) {
  cfg.validate();
  if (n <= 0) throw std::invalid_argument("sampler: n must be positive");

  Eigen::MatrixXd p(n, 2), phi(n, 2);
  const std::int64_t per_chain = (n + cfg.chains - 1) / cfg.chains;
  std::int64_t written = 0;
  std::int64_t accepted = 0, proposed = 0;

  for (int c = 0; c < cfg.chains && written < n; ++c) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(c));
    double cp = (c + 0.5) / cfg.chains;
    double cphi = two_pi * (c + 0.5) / cfg.chains;
    double logq = log_target(cp, cphi);

    const std::int64_t want = std::min<std::int64_t>(per_chain, n - written);
    const std::int64_t steps = cfg.burn_in + want * cfg.thinning;
    for (std::int64_t s = 0; s < steps; ++s) {
      const double np = detail::reflect_unit(cp + cfg.sigma_p * rng.normal());
      const double nphi = wrap_angle(cphi + cfg.sigma_phi * rng.normal());
      const double nlogq = log_target(np, nphi);
      const bool in_measurement = s >= cfg.burn_in;
      if (in_measurement) ++proposed;
      if (nlogq >= logq || rng.uniform() < std::exp(nlogq - logq)) {
        cp = np;
        cphi = nphi;
        logq = nlogq;
        if (in_measurement) ++accepted;
      }
      if (in_measurement && (s - cfg.burn_in) % cfg.thinning == cfg.thinning - 1) {
        store_qubit_point(p, phi, written++, cp, cphi);
      }
      if (written == n) break;
    }
  }

  meta.n = n;
  meta.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / proposed : 1.0;
  if (meta.acceptance_rate < 0.1 || meta.acceptance_rate > 0.9) {
    meta.warnings.push_back("mcmc acceptance rate " + std::to_string(meta.acceptance_rate) +
                            " outside [0.1, 0.9]");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return Ensemble({2}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

}  // namespace detail

/// n copies of a single pure state with equal weights.
inline Ensemble sample_dirac(const StatePoint& x0, std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("sample_dirac: n must be positive");
  const int d = x0.dim();
  Eigen::MatrixXd p = x0.p.transpose().replicate(n, 1);
  Eigen::MatrixXd phi = x0.phi.transpose().replicate(n, 1);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  EnsembleMeta meta;
  meta.generator = "dirac";
  meta.n = n;
  return Ensemble({d}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

/// Unitarily invariant (Haar) ensemble: normalized vectors of independent
/// standard complex Gaussians, converted to coordinates.
inline Ensemble sample_haar(int dim, std::int64_t n, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("sample_haar: dim must be >= 2");
  if (n <= 0) throw std::invalid_argument("sample_haar: n must be positive");
  Eigen::MatrixXd p(n, dim), phi(n, dim);
  Rng rng = Rng::stream(seed, 0);
  AmplitudeVector psi(dim);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) psi[k] = rng.complex_normal();
    psi /= psi.norm();
    const StatePoint x = amplitudes_to_coords(psi);
    p.row(i) = x.p.transpose();
    phi.row(i) = x.phi.transpose();
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  EnsembleMeta meta;
  meta.generator = "haar";
  meta.params["dim"] = dim;
  meta.seed = seed;
  meta.n = n;
  return Ensemble({dim}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

/// Product of a Dirac measure on the simplex and the uniform measure on
/// the torus: fixed probabilities p0, phases i.i.d. uniform.
inline Ensemble sample_diagonal(const Eigen::VectorXd& p0, std::int64_t n, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample_diagonal: n must be positive");
  if (p0.size() < 2 || p0.minCoeff() < 0.0 || std::abs(p0.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("sample_diagonal: p0 must lie on the simplex");
  }
  const int d = static_cast<int>(p0.size());
  const int anchor = gauge_anchor(p0);
  Eigen::MatrixXd p = p0.transpose().replicate(n, 1);
  Eigen::MatrixXd phi(n, d);
  Rng rng = Rng::stream(seed, 0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      const bool free_phase = k != anchor && p0[k] > zero_probability_threshold;
      phi(i, k) = free_phase ? rng.uniform(0.0, two_pi) : 0.0;
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  EnsembleMeta meta;
  meta.generator = "diagonal";
  meta.seed = seed;
  meta.n = n;
  return Ensemble({d}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

/// Independent truncated Gaussians in p and phi for a qubit; the factorized
/// "naive" Gaussian measure.
inline Ensemble sample_naive_gaussian(double p0, double phi0, double sigma_p, double sigma_phi,
                                      std::int64_t n, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample_naive_gaussian: n must be positive");
  if (sigma_p <= 0.0 || sigma_phi <= 0.0) {
    throw std::invalid_argument("sample_naive_gaussian: widths must be positive");
  }
  Eigen::MatrixXd p(n, 2), phi(n, 2);
  Rng rng = Rng::stream(seed, 0);
  for (std::int64_t i = 0; i < n; ++i) {
    double v;
    do {
      v = p0 + sigma_p * rng.normal();
    } while (v < 0.0 || v > 1.0);
    double a;
    do {
      a = phi0 + sigma_phi * rng.normal();
    } while (a < 0.0 || a >= two_pi);
    detail::store_qubit_point(p, phi, i, v, a);
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  EnsembleMeta meta;
  meta.generator = "naive-gaussian";
  meta.params = {{"p0", p0}, {"phi0", phi0}, {"sigma_p", sigma_p}, {"sigma_phi", sigma_phi}};
  meta.seed = seed;
  meta.n = n;
  return Ensemble({2}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

/// Gaussian in the Fubini-Study distance from x0 (qubit), sampled by
/// Metropolis-Hastings against the coordinate measure dp dphi.
inline Ensemble sample_fs_gaussian(const StatePoint& x0, double sigma, std::int64_t n,
                                   std::uint64_t seed, const McmcConfig& cfg = {}) {
  if (x0.dim() != 2) throw std::invalid_argument("sample_fs_gaussian: qubit required");
  if (sigma <= 0.0) throw std::invalid_argument("sample_fs_gaussian: sigma must be positive");
  const double p0 = x0.p[1];
  const double phi0 = x0.phi[1];
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  EnsembleMeta meta;
  meta.generator = "fs-gaussian";
  meta.params = {{"p0", p0}, {"phi0", phi0}, {"sigma", sigma}};
  meta.seed = seed;
  return detail::sample_qubit_mcmc(
      [=](double p, double phi) {
        const double d = qubit_fs_distance(p, phi, p0, phi0);
        return -d * d * inv_two_sigma2;
      },
      n, seed, cfg, std::move(meta));
}

/// Spiral ensemble: p uniform on (0, 1), phi = 2*pi*p + eps with eps
/// uniform on (-delta, delta), wrapped.
inline Ensemble sample_spiral(double delta, std::int64_t n, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample_spiral: n must be positive");
  if (delta < 0.0 || delta > std::numbers::pi) {
    throw std::invalid_argument("sample_spiral: delta outside [0, pi]");
  }
  Eigen::MatrixXd p(n, 2), phi(n, 2);
  Rng rng = Rng::stream(seed, 0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = rng.uniform();
    const double eps = delta > 0.0 ? rng.uniform(-delta, delta) : 0.0;
    detail::store_qubit_point(p, phi, i, v, two_pi * v + eps);
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  EnsembleMeta meta;
  meta.generator = "spiral";
  meta.params = {{"delta", delta}};
  meta.seed = seed;
  meta.n = n;
  return Ensemble({2}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

/// Canonical ensemble exp(-beta h_g(p, phi)) / Z for the qubit Hamiltonian
/// sigma_z + g sigma_x; the partition function is never evaluated.
inline Ensemble sample_canonical(double beta, double g, std::int64_t n, std::uint64_t seed,
                                 const McmcConfig& cfg = {}) {
  if (beta < 0.0) throw std::invalid_argument("sample_canonical: beta must be >= 0");
  EnsembleMeta meta;
  meta.generator = "canonical";
  meta.params = {{"beta", beta}, {"g", g}};
  meta.seed = seed;
  return detail::sample_qubit_mcmc(
      [=](double p, double phi) { return -beta * qubit_energy_raw(p, phi, g); },
      n, seed, cfg, std::move(meta));
}

}  // namespace gqmi
