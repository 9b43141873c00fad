#pragma once

// Shared helpers for the test suites.

#include <Eigen/Dense>

#include "gqmi/geometry.hpp"
#include "gqmi/rng.hpp"

namespace gqmi::testutil {

/// Random interior StatePoint: Dirichlet(1,...,1) probabilities and
/// uniform phases.
inline StatePoint random_state_point(Rng& rng, int dim) {
  Eigen::VectorXd p(dim);
  for (int k = 0; k < dim; ++k) p[k] = -std::log(1.0 - rng.uniform());
  p /= p.sum();
  Eigen::VectorXd phi(dim);
  for (int k = 0; k < dim; ++k) phi[k] = rng.uniform(0.0, two_pi);
  return make_state_point(std::move(p), std::move(phi));
}

inline AmplitudeVector random_amplitudes(Rng& rng, int dim) {
  AmplitudeVector psi(dim);
  for (int k = 0; k < dim; ++k) psi[k] = rng.complex_normal();
  psi /= psi.norm();
  return psi;
}

}  // namespace gqmi::testutil
