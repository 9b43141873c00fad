#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gqmi/geometry.hpp"
#include "gqmi/rng.hpp"

namespace gqmi {

/// Provenance and diagnostics carried by every ensemble.
struct EnsembleMeta {
  std::string generator;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  std::int64_t resampled = 0;   // kernel rejections in product_channel
  double drop_mass = 0.0;       // weight removed by projected-ensemble pruning
  std::vector<std::string> warnings;
};

/// Weighted collection of pure states in probability-phase coordinates;
/// the empirical geometric quantum state. Rows of `p` and `phi` are
/// points. For composites built by `tensor`, coordinates of the factors
/// are concatenated column blocks, one simplex/torus pair per block.
/// Immutable after construction.
class Ensemble {
 public:
  Ensemble(std::vector<int> block_dims, Eigen::MatrixXd p, Eigen::MatrixXd phi,
           Eigen::VectorXd w, EnsembleMeta meta)
      : blocks_(std::move(block_dims)),
        p_(std::move(p)),
        phi_(std::move(phi)),
        w_(std::move(w)),
        meta_(std::move(meta)) {
    validate();
  }

  const std::vector<int>& block_dims() const { return blocks_; }
  int total_dim() const { return std::accumulate(blocks_.begin(), blocks_.end(), 0); }

  /// Dimension of a single-block ensemble.
  int dim() const {
    if (blocks_.size() != 1) throw std::logic_error("Ensemble::dim: composite ensemble");
    return blocks_[0];
  }

  std::int64_t size() const { return static_cast<std::int64_t>(w_.size()); }

  double weight(std::int64_t i) const { return w_[i]; }

  /// Point i of a single-block ensemble as a StatePoint.
  StatePoint point(std::int64_t i) const {
    if (blocks_.size() != 1) throw std::logic_error("Ensemble::point: composite ensemble");
    return StatePoint{p_.row(i).transpose(), phi_.row(i).transpose()};
  }

  const Eigen::MatrixXd& probabilities() const { return p_; }
  const Eigen::MatrixXd& phases() const { return phi_; }
  const Eigen::VectorXd& weights() const { return w_; }
  const EnsembleMeta& meta() const { return meta_; }
  EnsembleMeta& meta() { return meta_; }

  /// Columns of the free simplex coordinates (all but each block's first).
  std::vector<int> free_p_columns() const { return free_columns(); }
  /// Columns of the free torus coordinates (gauge-fixed phases excluded).
  std::vector<int> free_phi_columns() const { return free_columns(); }

 private:
  std::vector<int> free_columns() const {
    std::vector<int> cols;
    int offset = 0;
    for (int d : blocks_) {
      for (int k = 1; k < d; ++k) cols.push_back(offset + k);
      offset += d;
    }
    return cols;
  }

  void validate() const {
    if (blocks_.empty()) throw std::invalid_argument("Ensemble: no blocks");
    for (int d : blocks_) {
      if (d < 2) throw std::invalid_argument("Ensemble: block dimension must be >= 2");
    }
    const int dtot = std::accumulate(blocks_.begin(), blocks_.end(), 0);
    if (p_.cols() != dtot || phi_.cols() != dtot || p_.rows() != phi_.rows() ||
        p_.rows() != w_.size()) {
      throw std::invalid_argument("Ensemble: inconsistent shapes");
    }
    if (w_.size() == 0) throw std::invalid_argument("Ensemble: empty");
    if (w_.minCoeff() < 0.0) throw std::invalid_argument("Ensemble: negative weight");
    if (std::abs(w_.sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("Ensemble: weights do not sum to 1");
    }
    int offset = 0;
    for (int d : blocks_) {
      const auto block = p_.middleCols(offset, d);
      if ((block.rowwise().sum().array() - 1.0).abs().maxCoeff() > 1e-9) {
        throw std::invalid_argument("Ensemble: simplex constraint violated");
      }
      offset += d;
    }
    if (phi_.size() > 0 && (phi_.minCoeff() < 0.0 || phi_.maxCoeff() >= two_pi)) {
      throw std::invalid_argument("Ensemble: phases outside [0, 2*pi)");
    }
  }

  std::vector<int> blocks_;
  Eigen::MatrixXd p_, phi_;
  Eigen::VectorXd w_;
  EnsembleMeta meta_;
};

/// Convex mixture: points of e1 with weights scaled by lambda, points of
/// e2 scaled by 1-lambda. lambda in {0, 1} returns the surviving ensemble.
inline Ensemble mix(const Ensemble& e1, const Ensemble& e2, double lambda) {
  if (e1.block_dims() != e2.block_dims()) {
    throw std::invalid_argument("mix: dimension mismatch");
  }
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("mix: lambda outside [0, 1]");
  if (lambda == 1.0) return e1;
  if (lambda == 0.0) return e2;

  const auto n1 = e1.size(), n2 = e2.size();
  Eigen::MatrixXd p(n1 + n2, e1.probabilities().cols());
  Eigen::MatrixXd phi(n1 + n2, e1.phases().cols());
  Eigen::VectorXd w(n1 + n2);
  p << e1.probabilities(), e2.probabilities();
  phi << e1.phases(), e2.phases();
  w << lambda * e1.weights(), (1.0 - lambda) * e2.weights();
  w /= w.sum();

  EnsembleMeta meta;
  meta.generator = "mix(" + e1.meta().generator + "," + e2.meta().generator + ")";
  meta.params["lambda"] = lambda;
  meta.n = n1 + n2;
  return Ensemble(e1.block_dims(), std::move(p), std::move(phi), std::move(w), std::move(meta));
}

/// Composite of two independently sampled ensembles: sample i of e1 is
/// paired with sample i of e2 and coordinate blocks are concatenated.
/// Composite estimators then treat (P, P') jointly versus (Phi, Phi').
inline Ensemble tensor(const Ensemble& e1, const Ensemble& e2) {
  if (e1.size() != e2.size()) {
    throw std::invalid_argument("tensor: ensembles must have equal sample counts");
  }
  const auto n = e1.size();
  Eigen::MatrixXd p(n, e1.probabilities().cols() + e2.probabilities().cols());
  p << e1.probabilities(), e2.probabilities();
  Eigen::MatrixXd phi(n, e1.phases().cols() + e2.phases().cols());
  phi << e1.phases(), e2.phases();

  Eigen::VectorXd w = e1.weights().cwiseProduct(e2.weights());
  w /= w.sum();

  std::vector<int> blocks = e1.block_dims();
  blocks.insert(blocks.end(), e2.block_dims().begin(), e2.block_dims().end());

  EnsembleMeta meta;
  meta.generator = "tensor(" + e1.meta().generator + "," + e2.meta().generator + ")";
  meta.n = n;
  const double w1span = e1.weights().maxCoeff() - e1.weights().minCoeff();
  const double w2span = e2.weights().maxCoeff() - e2.weights().minCoeff();
  if (w1span > 1e-9 || w2span > 1e-9) {
    meta.warnings.push_back("tensor: pointwise pairing assumes near-uniform weights");
  }
  return Ensemble(std::move(blocks), std::move(p), std::move(phi), std::move(w), std::move(meta));
}

/// Noise kernel acting on the free simplex coordinates only.
struct ProbabilityKernel {
  enum class Type { identity, gaussian };
  Type type = Type::identity;
  double sigma = 0.0;

  static ProbabilityKernel identity() { return {}; }
  static ProbabilityKernel gaussian(double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian kernel: sigma must be positive");
    return {Type::gaussian, sigma};
  }
};

/// Noise kernel acting on the free phase coordinates only.
struct PhaseKernel {
  enum class Type { identity, wrapped_uniform };
  Type type = Type::identity;
  double width = 0.0;  // full width of the additive uniform noise

  static PhaseKernel identity() { return {}; }
  static PhaseKernel wrapped_uniform(double width) {
    if (width <= 0.0) throw std::invalid_argument("wrapped_uniform kernel: width must be positive");
    return {Type::wrapped_uniform, width};
  }
};

/// Free operation K = K_P * K_Phi: the probability kernel perturbs each
/// free simplex coordinate independently of the phases and vice versa.
/// Proposals leaving the simplex are redrawn; the rejection count is
/// recorded in the output meta.
inline Ensemble product_channel(const Ensemble& e, const ProbabilityKernel& kp,
                                const PhaseKernel& kphi, std::uint64_t seed) {
  Eigen::MatrixXd p = e.probabilities();
  Eigen::MatrixXd phi = e.phases();
  Rng rng = Rng::stream(seed, 0);
  std::int64_t resampled = 0;

  if (kp.type == ProbabilityKernel::Type::gaussian) {
    const auto& blocks = e.block_dims();
    for (std::int64_t i = 0; i < e.size(); ++i) {
      int offset = 0;
      for (int d : blocks) {
        auto row = p.row(i).segment(offset, d);
        while (true) {
          Eigen::VectorXd candidate(d);
          double rest = 0.0;
          for (int k = 1; k < d; ++k) {
            candidate[k] = row[k] + kp.sigma * rng.normal();
            rest += candidate[k];
          }
          candidate[0] = 1.0 - rest;
          if (candidate.minCoeff() >= 0.0 && candidate.maxCoeff() <= 1.0) {
            row = candidate.transpose();
            break;
          }
          ++resampled;
        }
        offset += d;
      }
    }
  }
  if (kphi.type == PhaseKernel::Type::wrapped_uniform) {
    const double half = 0.5 * kphi.width;
    for (std::int64_t i = 0; i < e.size(); ++i) {
      for (int c : e.free_phi_columns()) {
        phi(i, c) = wrap_angle(phi(i, c) + rng.uniform(-half, half));
      }
    }
  }

  // Re-impose gauge conventions touched by the p kernel (zero-probability
  // components must carry zero phase).
  for (std::int64_t i = 0; i < e.size(); ++i) {
    int offset = 0;
    for (int d : e.block_dims()) {
      for (int k = 0; k < d; ++k) {
        if (p(i, offset + k) <= zero_probability_threshold) phi(i, offset + k) = 0.0;
      }
      phi(i, offset) = 0.0;
      offset += d;
    }
  }

  EnsembleMeta meta = e.meta();
  meta.generator = "channel(" + e.meta().generator + ")";
  meta.seed = seed;
  meta.resampled = resampled;
  if (kp.type == ProbabilityKernel::Type::gaussian) meta.params["kernel_sigma_p"] = kp.sigma;
  if (kphi.type == PhaseKernel::Type::wrapped_uniform) meta.params["kernel_width_phi"] = kphi.width;
  return Ensemble(e.block_dims(), std::move(p), std::move(phi), e.weights(), std::move(meta));
}

}  // namespace gqmi
