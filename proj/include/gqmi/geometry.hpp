#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace gqmi {

using Complex = std::complex<double>;

/// Complex amplitude vector in the reference basis; unit norm expected.
using AmplitudeVector = Eigen::VectorXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Probabilities at or below this threshold are treated as zero when
/// assigning phases and when picking the gauge anchor.
inline constexpr double zero_probability_threshold = 1e-14;

/// Reduces an angle to [0, 2*pi).
inline double wrap_angle(double phi) {
  double w = std::fmod(phi, two_pi);
  if (w < 0.0) w += two_pi;
  if (w >= two_pi) w = 0.0;  // fmod rounding can land exactly on 2*pi
  return w;
}

/// A pure state in probability-phase coordinates: a point on the simplex
/// (p) and on the torus (phi). Phases live in [0, 2*pi); the gauge anchor
/// phase is exactly zero; zero-probability components carry phase zero.
struct StatePoint {
  Eigen::VectorXd p;
  Eigen::VectorXd phi;

  int dim() const { return static_cast<int>(p.size()); }
};

/// Index of the lowest component carrying probability mass. Its phase is
/// the gauge reference.
inline int gauge_anchor(const Eigen::VectorXd& p) {
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] > zero_probability_threshold) return static_cast<int>(k);
  }
  throw std::invalid_argument("gauge_anchor: no component with positive probability");
}

/// Builds a valid StatePoint from raw coordinates: checks the simplex
/// constraint, wraps phases, rotates the anchor phase to zero and zeroes
/// phases of zero-probability components.
inline StatePoint make_state_point(Eigen::VectorXd p, Eigen::VectorXd phi) {
  if (p.size() != phi.size() || p.size() < 2) {
    throw std::invalid_argument("make_state_point: p and phi must share length >= 2");
  }
  if (p.minCoeff() < -1e-12 || p.maxCoeff() > 1.0 + 1e-12) {
    throw std::invalid_argument("make_state_point: probabilities outside [0, 1]");
  }
  if (std::abs(p.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("make_state_point: probabilities do not sum to 1");
  }
  p = p.cwiseMax(0.0).cwiseMin(1.0);
  const int a = gauge_anchor(p);
  const double ref = phi[a];
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    phi[k] = p[k] > zero_probability_threshold ? wrap_angle(phi[k] - ref) : 0.0;
  }
  phi[a] = 0.0;
  return StatePoint{std::move(p), std::move(phi)};
}

/// Coordinates of a normalized amplitude vector: p_k = |psi_k|^2 and
/// phi_k = arg(psi_k) - arg(psi_anchor) mod 2*pi.
inline StatePoint amplitudes_to_coords(const AmplitudeVector& psi) {
  if (psi.size() < 2) throw std::invalid_argument("amplitudes_to_coords: dim >= 2 required");
  if (std::abs(psi.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("amplitudes_to_coords: input not normalized");
  }
  Eigen::VectorXd p(psi.size());
  for (Eigen::Index k = 0; k < psi.size(); ++k) p[k] = std::norm(psi[k]);
  const double total = p.sum();
  p /= total;

  const int a = gauge_anchor(p);
  const double ref = std::arg(psi[a]);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(psi.size());
  for (Eigen::Index k = 0; k < psi.size(); ++k) {
    if (p[k] > zero_probability_threshold) phi[k] = wrap_angle(std::arg(psi[k]) - ref);
  }
  phi[a] = 0.0;
  return StatePoint{std::move(p), std::move(phi)};
}

/// Amplitudes psi_k = sqrt(p_k) exp(i phi_k).
inline AmplitudeVector coords_to_amplitudes(const StatePoint& x) {
  AmplitudeVector psi(x.dim());
  for (int k = 0; k < x.dim(); ++k) {
    psi[k] = std::polar(std::sqrt(x.p[k]), x.phi[k]);
  }
  return psi;
}

/// Fubini-Study distance arccos |<psi(x)|psi(y)>|, in [0, pi/2].
inline double fs_distance(const StatePoint& x, const StatePoint& y) {
  if (x.dim() != y.dim()) throw std::invalid_argument("fs_distance: dimension mismatch");
  Complex overlap(0.0, 0.0);
  for (int k = 0; k < x.dim(); ++k) {
    overlap += std::polar(std::sqrt(x.p[k] * y.p[k]), y.phi[k] - x.phi[k]);
  }
  const double a = std::min(std::abs(overlap), 1.0);
  return std::acos(a);
}

/// Qubit overlap magnitude in raw coordinates; avoids building vectors in
/// sampler inner loops.
inline double qubit_fs_distance(double p, double phi, double p0, double phi0) {
  const Complex overlap =
      std::sqrt((1.0 - p0) * (1.0 - p)) +
      std::sqrt(p0 * p) * std::polar(1.0, phi0 - phi);
  return std::acos(std::min(std::abs(overlap), 1.0));
}

/// Energy h_g(p, phi) = 1 - 2p + 2g sqrt(p(1-p)) cos(phi) of the qubit
/// Hamiltonian sigma_z + g sigma_x, with p = p_1 and phi = phi_1.
inline double qubit_energy(const StatePoint& x, double g) {
  if (x.dim() != 2) throw std::invalid_argument("qubit_energy: qubit required");
  return 1.0 - 2.0 * x.p[1] + 2.0 * g * std::sqrt(x.p[1] * x.p[0]) * std::cos(x.phi[1]);
}

inline double qubit_energy_raw(double p, double phi, double g) {
  return 1.0 - 2.0 * p + 2.0 * g * std::sqrt(p * (1.0 - p)) * std::cos(phi);
}

/// Expectation value <psi(x)|H|psi(x)> for Hermitian H.
inline double expectation_value(const StatePoint& x, const Eigen::MatrixXcd& H) {
  if (H.rows() != x.dim() || H.cols() != x.dim()) {
    throw std::invalid_argument("expectation_value: dimension mismatch");
  }
  if ((H - H.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("expectation_value: matrix not Hermitian");
  }
  const AmplitudeVector psi = coords_to_amplitudes(x);
  return std::real(psi.dot(H * psi));
}

}  // namespace gqmi
