#pragma once

// Independent reference implementations used for cross-checks: a naive
// binner, quadrature oracles for the closed-form ensembles, a rejection
// sampler, dense time evolution and small statistical tests. These stay
// deliberately separate from the estimator and propagator code paths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "gqmi/ensemble.hpp"
#include "gqmi/coherence.hpp"
#include "gqmi/estimators.hpp"
#include "gqmi/geometry.hpp"
#include "gqmi/rng.hpp"
#include "gqmi/samplers.hpp"
#include "gqmi/spinchain.hpp"

namespace gqmi::reference {

/// Naive histogram entropy: per-point index arithmetic done longhand and
/// cells accumulated in a std::map in lexicographic order.
inline double naive_coarse_entropy(const Ensemble& e, double eps, Marginal which) {
  std::vector<int> cols;
  int offset = 0;
  for (int d : e.block_dims()) {
    for (int k = 1; k < d; ++k) cols.push_back(offset + k);
    offset += d;
  }
  const auto p_bins = static_cast<long long>(std::ceil(1.0 / eps));
  const auto phi_bins = static_cast<long long>(std::ceil(two_pi / eps));

  std::map<std::vector<long long>, double> cells;
  for (std::int64_t i = 0; i < e.size(); ++i) {
    std::vector<long long> key;
    if (which == Marginal::joint || which == Marginal::probability) {
      for (int c : cols) {
        auto idx = static_cast<long long>(std::floor(e.probabilities()(i, c) / eps));
        if (idx < 0) idx = 0;
        if (idx > p_bins - 1) idx = p_bins - 1;
        key.push_back(idx);
      }
    }
    if (which == Marginal::joint || which == Marginal::phase) {
      for (int c : cols) {
        auto idx = static_cast<long long>(std::floor(e.phases()(i, c) / eps));
        if (idx < 0) idx = 0;
        if (idx > phi_bins - 1) idx = phi_bins - 1;
        key.push_back(idx);
      }
    }
    cells[key] += e.weight(i);
  }
  double h = 0.0;
  for (const auto& [key, w] : cells) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

/// Closed form of the spiral mutual information, ln(pi / delta).
inline double spiral_mi_closed_form(double delta) { return std::log(std::numbers::pi / delta); }

/// Exact coarse-grained mutual information of the spiral ensemble at one
/// scale, by quadrature of the band density over every cell.
inline double spiral_mi_quadrature(double delta, double eps) {
  if (delta <= 0.0) throw std::invalid_argument("spiral_mi_quadrature: delta must be positive");
  const auto p_bins = static_cast<long long>(std::ceil(1.0 / eps));
  const auto phi_bins = static_cast<long long>(std::ceil(two_pi / eps));

  // Band overlap length of the interval [lo, hi) with the wrapped window
  // of half-width delta around 2*pi*p.
  auto overlap = [&](double p, double lo, double hi) {
    const double c = two_pi * p;
    double total = 0.0;
    for (int shift = -1; shift <= 1; ++shift) {
      const double a = std::max(lo, c - delta + shift * two_pi);
      const double b = std::min(hi, c + delta + shift * two_pi);
      if (b > a) total += b - a;
    }
    return total;
  };

  const int subdiv = 64;
  double h_joint = 0.0;
  std::vector<double> phi_mass(phi_bins, 0.0);
  for (long long ip = 0; ip < p_bins; ++ip) {
    const double p_lo = ip * eps;
    const double p_hi = std::min(1.0, (ip + 1) * eps);
    if (p_hi <= p_lo) continue;
    for (long long iphi = 0; iphi < phi_bins; ++iphi) {
      const double f_lo = iphi * eps;
      const double f_hi = std::min(two_pi, (iphi + 1) * eps);
      // midpoint rule over the p extent of the column
      double mass = 0.0;
      const double dp = (p_hi - p_lo) / subdiv;
      for (int s = 0; s < subdiv; ++s) {
        const double pm = p_lo + (s + 0.5) * dp;
        mass += overlap(pm, f_lo, f_hi) * dp;
      }
      mass /= 2.0 * delta;
      if (mass > 0.0) {
        h_joint -= mass * std::log(mass);
        phi_mass[iphi] += mass;
      }
    }
  }
  double h_phi = 0.0;
  for (double m : phi_mass) {
    if (m > 0.0) h_phi -= m * std::log(m);
  }
  // p marginal is uniform on [0, 1]: exact cell masses.
  double h_p = 0.0;
  for (long long ip = 0; ip < p_bins; ++ip) {
    const double m = std::min(1.0, (ip + 1) * eps) - ip * eps;
    if (m > 0.0) h_p -= m * std::log(m);
  }
  return h_p + h_phi - h_joint;
}

/// Off-diagonal of the spiral density matrix by quadrature:
/// rho_01 = sinc(delta) * int sqrt(p(1-p)) exp(-2*pi*i*p) dp.
inline DensityMatrix spiral_density_quadrature(double delta) {
  const int n = 1 << 14;
  Complex integral(0.0, 0.0);
  const double dp = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const double p = (i + 0.5) * dp;
    integral += std::sqrt(p * (1.0 - p)) * std::polar(1.0, -two_pi * p) * dp;
  }
  const double sinc = delta > 0.0 ? std::sin(delta) / delta : 1.0;
  Eigen::MatrixXcd rho(2, 2);
  rho(0, 0) = 0.5;
  rho(1, 1) = 0.5;
  rho(0, 1) = sinc * std::conj(integral);
  rho(1, 0) = sinc * integral;
  return DensityMatrix::from_matrix(std::move(rho));
}

/// E[p] under the g = 0 canonical density, exp(2*beta*p) up to a constant.
inline double canonical_mean_p_quadrature(double beta) {
  const int n = 1 << 16;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = (i + 0.5) / n;
    const double q = std::exp(2.0 * beta * (p - 1.0));  // shifted for stability
    num += p * q;
    den += q;
  }
  return num / den;
}

/// Continuum mutual information of a qubit density given up to a
/// constant, by dense midpoint quadrature over (p, phi).
template <typename Density>
double qubit_mi_quadrature(Density&& density, int grid = 1024) {
  std::vector<double> joint(static_cast<std::size_t>(grid) * grid);
  std::vector<double> pm(grid, 0.0), fm(grid, 0.0);
  double z = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double p = (i + 0.5) / grid;
    for (int j = 0; j < grid; ++j) {
      const double phi = two_pi * (j + 0.5) / grid;
      const double q = density(p, phi);
      joint[static_cast<std::size_t>(i) * grid + j] = q;
      z += q;
    }
  }
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double q = joint[static_cast<std::size_t>(i) * grid + j] / z;
      joint[static_cast<std::size_t>(i) * grid + j] = q;
      pm[i] += q;
      fm[j] += q;
    }
  }
  double mi = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double q = joint[static_cast<std::size_t>(i) * grid + j];
      if (q > 0.0) mi += q * std::log(q / (pm[i] * fm[j]));
    }
  }
  return mi;
}

inline double canonical_mi_quadrature(double beta, double g, int grid = 1024) {
  return qubit_mi_quadrature(
      [&](double p, double phi) { return std::exp(-beta * qubit_energy_raw(p, phi, g)); }, grid);
}

inline double fs_gaussian_mi_quadrature(const StatePoint& x0, double sigma, int grid = 1024) {
  const double p0 = x0.p[1];
  const double phi0 = x0.phi[1];
  return qubit_mi_quadrature(
      [&](double p, double phi) {
        const double d = qubit_fs_distance(p, phi, p0, phi0);
        return std::exp(-d * d / (2.0 * sigma * sigma));
      },
      grid);
}

/// Rejection sampler for the Fubini-Study Gaussian with a uniform
/// envelope over (p, phi); independent of the Metropolis-Hastings path.
inline std::vector<double> fs_gaussian_rejection_distances(const StatePoint& x0, double sigma,
                                                           std::int64_t n, std::uint64_t seed) {
  const double p0 = x0.p[1];
  const double phi0 = x0.phi[1];
  Rng rng = Rng::stream(seed, 7);
  std::vector<double> out;
  out.reserve(n);
  while (static_cast<std::int64_t>(out.size()) < n) {
    const double p = rng.uniform();
    const double phi = rng.uniform(0.0, two_pi);
    const double d = qubit_fs_distance(p, phi, p0, phi0);
    if (rng.uniform() < std::exp(-d * d / (2.0 * sigma * sigma))) out.push_back(d);
  }
  return out;
}

/// Two-sample Kolmogorov-Smirnov test; returns the asymptotic p-value.
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    p += sign * 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
    sign = -sign;
  }
  return std::clamp(p, 0.0, 1.0);
}

/// 99th percentile of chi-square via the Wilson-Hilferty approximation.
inline double chi2_critical_99(int df) {
  const double z = 2.3263478740408408;  // Phi^-1(0.99)
  const double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  return df * t * t * t;
}

/// Chi-square statistic of the Haar p-marginal against the flat Dirichlet
/// density (D-1)!. For D=2 the cells are `bins` intervals of p_1; for
/// D=3 they are grid cells of (p_1, p_2) clipped to the simplex, with
/// slivers below a minimum expected count pooled into one group.
/// Returns (statistic, degrees of freedom).
inline std::pair<double, int> haar_p_marginal_chi2(const Ensemble& e, int bins) {
  const std::int64_t n = e.size();
  if (e.dim() == 2) {
    std::vector<double> observed(bins, 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
      auto idx = static_cast<int>(e.probabilities()(i, 1) * bins);
      observed[std::clamp(idx, 0, bins - 1)] += 1.0;
    }
    const double expected = static_cast<double>(n) / bins;
    double stat = 0.0;
    for (double o : observed) stat += (o - expected) * (o - expected) / expected;
    return {stat, bins - 1};
  }
  if (e.dim() != 3) throw std::invalid_argument("haar_p_marginal_chi2: D must be 2 or 3");

  // Expected mass of [a,b] x [c,d] under density 2 on {p1 + p2 <= 1}:
  // 2 * int_a^b clamp(1 - x - c, 0, d - c) dx, done piecewise.
  auto cell_mass = [](double a, double b, double c, double d) {
    auto height = [&](double x) { return std::clamp(1.0 - x - c, 0.0, d - c); };
    // integrand is piecewise linear with breaks at 1-d-c... use fine Simpson
    const int m = 64;
    double area = 0.0;
    const double h = (b - a) / m;
    for (int s = 0; s < m; ++s) {
      const double x0 = a + s * h, x1 = x0 + h;
      area += (height(x0) + 4.0 * height(0.5 * (x0 + x1)) + height(x1)) * h / 6.0;
    }
    return 2.0 * area;
  };

  const int g = bins;  // grid per axis
  std::vector<double> observed(static_cast<std::size_t>(g) * g, 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto i1 = std::clamp(static_cast<int>(e.probabilities()(i, 1) * g), 0, g - 1);
    const auto i2 = std::clamp(static_cast<int>(e.probabilities()(i, 2) * g), 0, g - 1);
    observed[static_cast<std::size_t>(i1) * g + i2] += 1.0;
  }
  double stat = 0.0;
  int groups = 0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (int i1 = 0; i1 < g; ++i1) {
    for (int i2 = 0; i2 < g; ++i2) {
      const double expected =
          n * cell_mass(i1 / double(g), (i1 + 1) / double(g), i2 / double(g), (i2 + 1) / double(g));
      const double o = observed[static_cast<std::size_t>(i1) * g + i2];
      if (expected < 20.0) {
        pooled_obs += o;
        pooled_exp += expected;
        continue;
      }
      stat += (o - expected) * (o - expected) / expected;
      ++groups;
    }
  }
  if (pooled_exp >= 20.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++groups;
  }
  return {stat, groups - 1};
}

/// Dense evolution exp(-i H t) psi via full diagonalization.
inline ManyBodyState dense_evolve(const Eigen::MatrixXcd& h, const ManyBodyState& psi, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXcd phases(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    phases[i] = std::polar(1.0, -t * es.eigenvalues()[i]);
  }
  return es.eigenvectors() * (phases.asDiagonal() * (es.eigenvectors().adjoint() * psi));
}

/// Reduced density matrix of one site by direct partial trace.
inline Eigen::MatrixXcd partial_trace_single_site(const ManyBodyState& psi, int site) {
  const std::int64_t dim = psi.size();
  int sites = 0;
  while ((std::int64_t{1} << sites) < dim) ++sites;
  const std::int64_t low_mask = (std::int64_t{1} << site) - 1;
  const std::int64_t bit = std::int64_t{1} << site;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
  for (std::int64_t z = 0; z < dim / 2; ++z) {
    const std::int64_t base = (z & low_mask) | ((z & ~low_mask) << 1);
    const Complex a0 = psi[base];
    const Complex a1 = psi[base | bit];
    rho(0, 0) += a0 * std::conj(a0);
    rho(0, 1) += a0 * std::conj(a1);
    rho(1, 0) += a1 * std::conj(a0);
    rho(1, 1) += a1 * std::conj(a1);
  }
  return rho;
}

}  // namespace gqmi::reference
