#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gqmi/ensemble.hpp"
#include "gqmi/estimators.hpp"
#include "gqmi/geometry.hpp"

namespace gqmi {

using ManyBodyState = Eigen::VectorXcd;

/// Long-range Ising chain with transverse field,
///   H = -|J| sum_{i>j} sigma_z^i sigma_z^j / |i-j|^alpha - h sum_i sigma_x^i,
/// open boundary conditions.
struct ChainConfig {
  int sites = 14;
  double coupling = 1.0;   // J
  double alpha = 2.0;
  double field = -0.6;     // h
  int system_site = 6;     // 0-based
  // The all-up state freezes under this ferromagnetic Hamiltonian (the
  // measurement distribution collapses onto a single outcome); the Neel
  // state produces a genuinely spread projected ensemble.
  std::string initial_state = "neel";
  double t_max = 20.0;
  double dt = 0.1;

  void validate() const {
    if (sites < 2 || sites > 16) throw std::invalid_argument("ChainConfig: 2 <= L <= 16 required");
    if (system_site < 0 || system_site >= sites) {
      throw std::invalid_argument("ChainConfig: system site outside the chain");
    }
    if (dt <= 0.0 || t_max < 0.0) throw std::invalid_argument("ChainConfig: invalid time grid");
  }
};

/// Matrix-free representation: the ZZ part is diagonal in the z basis and
/// the transverse part flips single bits with a constant coefficient.
class SpinChainHamiltonian {
 public:
  static SpinChainHamiltonian build(const ChainConfig& cfg) {
    cfg.validate();
    SpinChainHamiltonian ham;
    ham.sites_ = cfg.sites;
    ham.flip_coeff_ = -cfg.field;
    const std::int64_t dim = std::int64_t{1} << cfg.sites;
    ham.zz_diag_.resize(dim);
    const double j = std::abs(cfg.coupling);
    for (std::int64_t b = 0; b < dim; ++b) {
      double energy = 0.0;
      for (int i = 1; i < cfg.sites; ++i) {
        const double si = (b >> i) & 1 ? -1.0 : 1.0;
        for (int k = 0; k < i; ++k) {
          const double sk = (b >> k) & 1 ? -1.0 : 1.0;
          energy -= j * si * sk / std::pow(static_cast<double>(i - k), cfg.alpha);
        }
      }
      ham.zz_diag_[b] = energy;
    }
    return ham;
  }

  int sites() const { return sites_; }
  std::int64_t dim() const { return zz_diag_.size(); }

  void apply(const ManyBodyState& in, ManyBodyState& out) const {
    out = zz_diag_.cwiseProduct(in);
    if (flip_coeff_ == 0.0) return;
    const std::int64_t n = dim();
    for (int i = 0; i < sites_; ++i) {
      const std::int64_t bit = std::int64_t{1} << i;
      for (std::int64_t b = 0; b < n; ++b) {
        out[b] += flip_coeff_ * in[b ^ bit];
      }
    }
  }

  ManyBodyState apply(const ManyBodyState& in) const {
    ManyBodyState out(dim());
    apply(in, out);
    return out;
  }

  double energy(const ManyBodyState& psi) const {
    return std::real(psi.dot(apply(psi)));
  }

  Eigen::MatrixXcd to_dense() const {
    if (sites_ > 12) throw std::invalid_argument("to_dense: chain too large");
    const std::int64_t n = dim();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (std::int64_t b = 0; b < n; ++b) {
      m(b, b) = zz_diag_[b];
      for (int i = 0; i < sites_; ++i) m(b ^ (std::int64_t{1} << i), b) += flip_coeff_;
    }
    return m;
  }

  /// Crude upper bound on the spectral radius; used to scale breakdowns.
  double norm_bound() const {
    return zz_diag_.cwiseAbs().maxCoeff() + std::abs(flip_coeff_) * sites_;
  }

 private:
  int sites_ = 0;
  double flip_coeff_ = 0.0;
  Eigen::VectorXd zz_diag_;
};

/// Product state from per-site qubit amplitudes (a0, a1), site 0 first.
inline ManyBodyState product_state_from_sites(const std::vector<std::pair<Complex, Complex>>& site_amps) {
  const int sites = static_cast<int>(site_amps.size());
  if (sites < 1 || sites > 16) throw std::invalid_argument("product_state_from_sites: 1..16 sites");
  ManyBodyState psi = ManyBodyState::Zero(std::int64_t{1} << sites);
  psi[0] = 1.0;
  std::int64_t filled = 1;
  for (int i = 0; i < sites; ++i) {
    auto [a0, a1] = site_amps[i];
    const double norm = std::sqrt(std::norm(a0) + std::norm(a1));
    if (norm < 1e-12) throw std::invalid_argument("product_state_from_sites: null site state");
    a0 /= norm;
    a1 /= norm;
    const std::int64_t bit = std::int64_t{1} << i;
    for (std::int64_t b = 0; b < filled; ++b) {
      const Complex amp = psi[b];
      psi[b] = amp * a0;
      psi[b | bit] = amp * a1;
    }
    filled <<= 1;
  }
  return psi;
}

/// Product state in the z basis. Named forms: "up", "down", "neel",
/// "plus", "minus", or a per-site string over {u, d, +, -}, site 0 first.
inline ManyBodyState product_state(int sites, const std::string& spec) {
  std::string pattern;
  if (spec == "up") {
    pattern.assign(sites, 'u');
  } else if (spec == "down") {
    pattern.assign(sites, 'd');
  } else if (spec == "plus") {
    pattern.assign(sites, '+');
  } else if (spec == "minus") {
    pattern.assign(sites, '-');
  } else if (spec == "neel") {
    pattern.resize(sites);
    for (int i = 0; i < sites; ++i) pattern[i] = i % 2 ? 'd' : 'u';
  } else {
    pattern = spec;
  }
  if (static_cast<int>(pattern.size()) != sites) {
    throw std::invalid_argument("product_state: pattern length must equal site count");
  }
  const double r = 1.0 / std::numbers::sqrt2;
  ManyBodyState psi = ManyBodyState::Zero(std::int64_t{1} << sites);
  psi[0] = 1.0;
  std::int64_t filled = 1;
  for (int i = 0; i < sites; ++i) {
    Complex a0, a1;
    switch (pattern[i]) {
      case 'u': a0 = 1.0; a1 = 0.0; break;
      case 'd': a0 = 0.0; a1 = 1.0; break;
      case '+': a0 = r; a1 = r; break;
      case '-': a0 = r; a1 = -r; break;
      default: throw std::invalid_argument("product_state: unknown site token");
    }
    const std::int64_t bit = std::int64_t{1} << i;
    for (std::int64_t b = 0; b < filled; ++b) {
      const Complex amp = psi[b];
      psi[b] = amp * a0;
      psi[b | bit] = amp * a1;
    }
    filled <<= 1;
  }
  return psi;
}

struct KrylovOptions {
  double tol = 1e-10;  // per-step propagation error bound
  int max_order = 30;  // steps split in half when the order is exhausted
  double max_norm_drift = 1e-8;
};

namespace detail {

/// One Lanczos propagation step over time t. Returns false when the
/// subspace error estimate cannot be pushed below tol at max_order.
inline bool lanczos_step(const SpinChainHamiltonian& ham, ManyBodyState& psi, double t,
                         const KrylovOptions& opts) {
  const std::int64_t n = ham.dim();
  const int m_max = static_cast<int>(std::min<std::int64_t>(opts.max_order, n));
  std::vector<ManyBodyState> basis;
  basis.reserve(m_max + 1);
  basis.push_back(psi);

  std::vector<double> alpha, beta;
  ManyBodyState w(n);
  Eigen::VectorXcd small;
  bool converged = false;
  bool breakdown = false;

  for (int j = 0; j < m_max && !converged && !breakdown; ++j) {
    ham.apply(basis[j], w);
    if (j > 0) w -= beta[j - 1] * basis[j - 1];
    double a = std::real(basis[j].dot(w));
    w -= a * basis[j];
    // full reorthogonalization keeps the tridiagonal honest at m <= 40
    for (int k = 0; k <= j; ++k) w -= basis[k].dot(w) * basis[k];
    alpha.push_back(a);
    const double b = w.norm();

    const int m = j + 1;
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      tri(i, i) = alpha[i];
      if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    Eigen::VectorXcd phases(m);
    for (int i = 0; i < m; ++i) {
      phases[i] = std::polar(1.0, -t * es.eigenvalues()[i]);
    }
    small = es.eigenvectors().cast<Complex>() *
            (phases.array() * es.eigenvectors().row(0).transpose().cast<Complex>().array()).matrix();

    if (b < 1e-12 * std::max(1.0, ham.norm_bound())) {
      breakdown = true;  // invariant subspace; propagation is exact
      converged = true;
    } else {
      const double err = b * std::abs(small[m - 1]);
      if (err <= opts.tol && m >= 2) converged = true;
    }
    if (!converged) {
      beta.push_back(b);
      basis.push_back(w / b);
    }
  }

  if (!converged) return false;
  ManyBodyState next = ManyBodyState::Zero(n);
  for (std::size_t k = 0; k < static_cast<std::size_t>(small.size()); ++k) {
    next += small[k] * basis[k];
  }
  psi = std::move(next);
  return true;
}

}  // namespace detail

/// Propagates psi by exp(-i H t) with Krylov steps. The step is split in
/// half recursively whenever the subspace error bound cannot be met.
inline ManyBodyState evolve(const ManyBodyState& psi0, const SpinChainHamiltonian& ham, double t,
                            const KrylovOptions& opts = {}) {
  if (t < 0.0) throw std::invalid_argument("evolve: t must be >= 0");
  if (psi0.size() != ham.dim()) throw std::invalid_argument("evolve: dimension mismatch");
  ManyBodyState psi = psi0;
  if (t == 0.0) return psi;

  std::vector<double> pending{t};
  int splits = 0;
  while (!pending.empty()) {
    const double step = pending.back();
    pending.pop_back();
    if (detail::lanczos_step(ham, psi, step, opts)) continue;
    if (++splits > 64) {
      throw std::runtime_error("evolve: Krylov step size underflow (breakdown)");
    }
    pending.push_back(step / 2.0);
    pending.push_back(step / 2.0);
  }

  const double drift = std::abs(psi.norm() - 1.0);
  if (drift > opts.max_norm_drift) {
    throw std::runtime_error("evolve: norm drift " + std::to_string(drift) +
                             " exceeds bound " + std::to_string(opts.max_norm_drift));
  }
  psi /= psi.norm();
  return psi;
}

/// Conditional qubit states of `system_site` given a z-basis measurement
/// of the other sites: the projected ensemble. Outcomes with probability
/// below 1e-14 are dropped and the removed mass is recorded.
inline Ensemble projected_ensemble(const ManyBodyState& psi, int system_site) {
  const std::int64_t dim = psi.size();
  int sites = 0;
  while ((std::int64_t{1} << sites) < dim) ++sites;
  if ((std::int64_t{1} << sites) != dim) {
    throw std::invalid_argument("projected_ensemble: state length is not a power of 2");
  }
  if (system_site < 0 || system_site >= sites) {
    throw std::invalid_argument("projected_ensemble: system site outside the chain");
  }

  const std::int64_t env_dim = dim >> 1;
  const std::int64_t low_mask = (std::int64_t{1} << system_site) - 1;
  const std::int64_t sys_bit = std::int64_t{1} << system_site;

  Eigen::MatrixXd p(env_dim, 2), phi(env_dim, 2);
  Eigen::VectorXd w(env_dim);
  double drop_mass = 0.0;
  std::int64_t kept = 0;
  for (std::int64_t z = 0; z < env_dim; ++z) {
    const std::int64_t base = (z & low_mask) | ((z & ~low_mask) << 1);
    const Complex a0 = psi[base];
    const Complex a1 = psi[base | sys_bit];
    const double prob = std::norm(a0) + std::norm(a1);
    if (prob < 1e-14) {
      drop_mass += prob;
      continue;
    }
    const double p1 = std::norm(a1) / prob;
    const double p0 = 1.0 - p1;
    p(kept, 0) = p0;
    p(kept, 1) = p1;
    phi(kept, 0) = 0.0;
    if (p1 <= zero_probability_threshold || p0 <= zero_probability_threshold) {
      phi(kept, 1) = 0.0;
    } else {
      phi(kept, 1) = wrap_angle(std::arg(a1) - std::arg(a0));
    }
    w[kept] = prob;
    ++kept;
  }
  if (kept == 0) throw std::runtime_error("projected_ensemble: all outcomes dropped");
  p.conservativeResize(kept, 2);
  phi.conservativeResize(kept, 2);
  w.conservativeResize(kept);
  w /= w.sum();

  EnsembleMeta meta;
  meta.generator = "projected";
  meta.params["system_site"] = system_site;
  meta.n = kept;
  meta.drop_mass = drop_mass;
  return Ensemble({2}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

struct MiTimePoint {
  double t = 0.0;
  double mi = 0.0;  // I_eps at the reporting scale
  double di = 0.0;  // fitted scaling slope across the ladder (diagnostic)
  double plateau_diag = 0.0;
  std::int64_t points = 0;
  double drop_mass = 0.0;
  double norm_drift = 0.0;
  double energy = 0.0;
  std::vector<double> i_eps;  // per ladder scale
};

/// Default coarse-graining ladder for projected ensembles; the guard and
/// the fixed reporting scale keep the 2^(L-1)-atom histograms honest.
inline PartitionSpec chain_partition_spec() {
  return PartitionSpec::geometric(0.5, 0.17677669529663687, 4);  // 2^-1 .. 2^-2.5
}

inline constexpr double chain_reporting_eps = 0.25;

/// I_t(P;Phi) of the projected ensemble along the time grid of cfg. The
/// projected ensemble is atomic, so its per-scale mutual information has
/// no small-eps limit; the primary I_t is read at the fixed reporting
/// scale and the fitted slope is carried as a diagnostic.
inline std::vector<MiTimePoint> mi_time_series(const ChainConfig& cfg, const PartitionSpec& spec,
                                               double reporting_eps = chain_reporting_eps,
                                               const KrylovOptions& opts = {}) {
  cfg.validate();
  std::size_t report_index = 0;
  for (std::size_t i = 1; i < spec.scales.size(); ++i) {
    if (std::abs(std::log(spec.scales[i] / reporting_eps)) <
        std::abs(std::log(spec.scales[report_index] / reporting_eps))) {
      report_index = i;
    }
  }
  const SpinChainHamiltonian ham = SpinChainHamiltonian::build(cfg);
  ManyBodyState psi = product_state(cfg.sites, cfg.initial_state);

  std::vector<MiTimePoint> out;
  const auto steps = static_cast<std::int64_t>(std::floor(cfg.t_max / cfg.dt + 1e-9));
  for (std::int64_t k = 0; k <= steps; ++k) {
    MiTimePoint row;
    row.t = k * cfg.dt;
    row.norm_drift = std::abs(psi.norm() - 1.0);
    row.energy = ham.energy(psi);
    const Ensemble proj = projected_ensemble(psi, cfg.system_site);
    const MIResult mi = mutual_information(proj, spec);
    row.mi = mi.i_eps[report_index];
    row.di = mi.di;
    row.plateau_diag = mi.plateau_diag;
    row.points = proj.size();
    row.drop_mass = proj.meta().drop_mass;
    row.i_eps = mi.i_eps;
    out.push_back(row);
    if (k < steps) psi = evolve(psi, ham, cfg.dt, opts);
  }
  return out;
}

}  // namespace gqmi
