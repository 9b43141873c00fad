#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gqmi/ensemble.hpp"

namespace gqmi {

enum class Marginal { joint, probability, phase };

/// Decreasing ladder of coarse-graining scales. Cells have linear size
/// eps on every axis: ceil(1/eps) bins per probability coordinate over
/// [0, 1] and ceil(2*pi/eps) bins per phase coordinate over [0, 2*pi).
struct PartitionSpec {
  std::vector<double> scales;

  static PartitionSpec dyadic(int k_min = 3, int k_max = 10) {
    PartitionSpec s;
    for (int k = k_min; k <= k_max; ++k) s.scales.push_back(std::pow(2.0, -k));
    s.validate();
    return s;
  }

  /// `count` log-spaced scales from `coarse` down to `fine`.
  static PartitionSpec geometric(double coarse, double fine, int count) {
    if (count < 1) throw std::invalid_argument("PartitionSpec: count must be >= 1");
    PartitionSpec s;
    if (count == 1) {
      s.scales.push_back(coarse);
    } else {
      const double ratio = std::log(fine / coarse) / (count - 1);
      for (int i = 0; i < count; ++i) s.scales.push_back(coarse * std::exp(ratio * i));
    }
    s.validate();
    return s;
  }

  void validate() const {
    if (scales.empty()) throw std::invalid_argument("PartitionSpec: no scales");
    for (std::size_t i = 0; i < scales.size(); ++i) {
      if (!(scales[i] > 0.0) || scales[i] > 1.0) {
        throw std::invalid_argument("PartitionSpec: scales must lie in (0, 1]");
      }
      if (i > 0 && scales[i] >= scales[i - 1]) {
        throw std::invalid_argument("PartitionSpec: scales must be strictly decreasing");
      }
    }
  }
};

/// Coarse entropies of the joint and the two marginals at one scale.
struct ScaleEntropies {
  double eps = 0.0;
  double h_joint = 0.0, h_p = 0.0, h_phi = 0.0;
  std::int64_t cells_joint = 0, cells_p = 0, cells_phi = 0;
  double log_phi_grid = 0.0;  // log of the total phase-grid cell count
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

/// Ordinary least squares of y against x. With zero variance in the
/// residual-free case the fit is reported as exact.
inline FitResult fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_line: need at least two points");
  }
  const double n = static_cast<double>(x.size());
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= n;
  ybar /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_line: x values are degenerate");
  FitResult f;
  f.slope = sxy / sxx;
  f.intercept = ybar - f.slope * xbar;
  double ssr = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ssr += r * r;
    sst += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = sst > 1e-15 ? 1.0 - ssr / sst : (ssr < 1e-15 ? 1.0 : 0.0);
  return f;
}

/// Entropy-scaling fit H(eps) ~ D * (-log eps) + H_G over the scales that
/// survive the undersampling guard.
struct ScalingReport {
  Marginal which = Marginal::joint;
  std::vector<double> eps;
  std::vector<double> entropy;
  std::vector<bool> included;
  double dimension = 0.0;
  double intercept = 0.0;  // geometric entropy H_G, nats
  double r2 = 1.0;
  std::int64_t n_points = 0;
};

/// Per-scale mutual information and its scaling fit. `value` is the
/// primary estimate: the plateau mean of I_eps when the fitted dimension
/// is flat (|D_I| <= 0.05), the fitted intercept otherwise, NaN when the
/// per-scale sequence diverges.
struct MIResult {
  std::vector<double> eps;
  std::vector<double> i_eps;
  std::vector<bool> included;
  double di = 0.0;
  double fitted_intercept = 0.0;
  double value = 0.0;
  bool plateau_used = false;
  double plateau_diag = 0.0;  // max |I_eps - value| over included scales
  std::int64_t n_points = 0;
  std::vector<std::string> warnings;
};

/// Per-scale KL divergence of the phase marginal from the uniform
/// histogram, log(N_phi_cells) - H_phi(eps), with a scaling fit.
struct KlPhiReport {
  std::vector<double> eps;
  std::vector<double> kl;
  std::vector<bool> included;
  double slope = 0.0;
  double intercept = 0.0;
  std::int64_t n_points = 0;
};

namespace detail {

struct AxisLayout {
  std::vector<int> p_cols, phi_cols;
  std::int64_t p_bins = 0, phi_bins = 0;
  int p_bits = 0, phi_bits = 0;
  double eps_p = 0.0, eps_phi = 0.0;

  AxisLayout(const std::vector<int>& p_cols_in, const std::vector<int>& phi_cols_in,
             double eps_p, double eps_phi)
      : p_cols(p_cols_in), phi_cols(phi_cols_in) {
    p_bins = static_cast<std::int64_t>(std::ceil(1.0 / eps_p));
    phi_bins = static_cast<std::int64_t>(std::ceil(two_pi / eps_phi));
    p_bits = std::max(1, static_cast<int>(std::bit_width(static_cast<std::uint64_t>(p_bins - 1))));
    phi_bits = std::max(1, static_cast<int>(std::bit_width(static_cast<std::uint64_t>(phi_bins - 1))));
    this->eps_p = eps_p;
    this->eps_phi = eps_phi;
    const int total = p_bits * static_cast<int>(p_cols.size()) +
                      phi_bits * static_cast<int>(phi_cols.size());
    if (total > 64) {
      throw std::invalid_argument("partition too fine for this dimension (cell key > 64 bits)");
    }
  }

  std::int64_t p_index(double v) const {
    auto i = static_cast<std::int64_t>(std::floor(v / eps_p));
    return std::clamp<std::int64_t>(i, 0, p_bins - 1);
  }
  std::int64_t phi_index(double v) const {
    auto i = static_cast<std::int64_t>(std::floor(v / eps_phi));
    return std::clamp<std::int64_t>(i, 0, phi_bins - 1);
  }
};

using CellMap = std::unordered_map<std::uint64_t, double>;

/// Accumulates one ensemble into joint/marginal maps. Earlier axes occupy
/// higher key bits, so ascending key order is lexicographic cell order.
inline void accumulate(const Ensemble& e, const AxisLayout& ax, double mass_scale,
                       CellMap& joint, CellMap& pmarg, CellMap& phimarg) {
  const auto& p = e.probabilities();
  const auto& phi = e.phases();
  const auto& w = e.weights();
  const std::int64_t n = e.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double wi = w[i] * mass_scale;
    if (wi == 0.0) continue;
    std::uint64_t kp = 0, kphi = 0;
    for (int c : ax.p_cols) kp = (kp << ax.p_bits) | static_cast<std::uint64_t>(ax.p_index(p(i, c)));
    for (int c : ax.phi_cols) {
      kphi = (kphi << ax.phi_bits) | static_cast<std::uint64_t>(ax.phi_index(phi(i, c)));
    }
    const std::uint64_t kj =
        (kp << (ax.phi_bits * static_cast<int>(ax.phi_cols.size()))) | kphi;
    joint[kj] += wi;
    pmarg[kp] += wi;
    phimarg[kphi] += wi;
  }
}

/// Shannon entropy of the accumulated cell weights, summed in ascending
/// key order so the result does not depend on insertion order.
inline std::pair<double, std::int64_t> map_entropy(const CellMap& m) {
  std::vector<std::pair<std::uint64_t, double>> cells(m.begin(), m.end());
  std::sort(cells.begin(), cells.end());
  double h = 0.0;
  std::int64_t occupied = 0;
  for (const auto& [key, weight] : cells) {
    if (weight <= 0.0) continue;
    h -= weight * std::log(weight);
    ++occupied;
  }
  return {h, occupied};
}

}  // namespace detail

/// Multi-scale histogram accumulator. Ensembles (or chunks of a larger
/// stream) are added one at a time; estimates are read off afterwards.
/// All entropies are in nats.
class HistogramAccumulator {
 public:
  HistogramAccumulator(PartitionSpec spec, const std::vector<int>& block_dims)
      : spec_(std::move(spec)), blocks_(block_dims) {
    spec_.validate();
    std::vector<int> cols;
    int offset = 0;
    for (int d : blocks_) {
      for (int k = 1; k < d; ++k) cols.push_back(offset + k);
      offset += d;
    }
    for (double eps : spec_.scales) {
      layouts_.emplace_back(cols, cols, eps, eps);
    }
    maps_.resize(spec_.scales.size());
  }

  void add(const Ensemble& e, double mass_scale = 1.0) {
    if (e.block_dims() != blocks_) {
      throw std::invalid_argument("HistogramAccumulator: block dimensions changed");
    }
    for (std::size_t s = 0; s < spec_.scales.size(); ++s) {
      detail::accumulate(e, layouts_[s], mass_scale, maps_[s].joint, maps_[s].pmarg,
                         maps_[s].phimarg);
    }
    points_ += e.size();
  }

  std::int64_t points() const { return points_; }
  const PartitionSpec& spec() const { return spec_; }

  ScaleEntropies entropies(std::size_t scale_index) const {
    const auto& m = maps_.at(scale_index);
    ScaleEntropies se;
    se.eps = spec_.scales[scale_index];
    std::tie(se.h_joint, se.cells_joint) = detail::map_entropy(m.joint);
    std::tie(se.h_p, se.cells_p) = detail::map_entropy(m.pmarg);
    std::tie(se.h_phi, se.cells_phi) = detail::map_entropy(m.phimarg);
    const auto& ax = layouts_[scale_index];
    se.log_phi_grid = static_cast<double>(ax.phi_cols.size()) *
                      std::log(static_cast<double>(ax.phi_bins));
    return se;
  }

  std::vector<ScaleEntropies> profile() const {
    std::vector<ScaleEntropies> out;
    out.reserve(spec_.scales.size());
    for (std::size_t s = 0; s < spec_.scales.size(); ++s) out.push_back(entropies(s));
    return out;
  }

  ScalingReport scaling_fit(Marginal which) const {
    const auto prof = profile();
    ScalingReport rep;
    rep.which = which;
    rep.n_points = points_;
    for (const auto& se : prof) {
      rep.eps.push_back(se.eps);
      rep.entropy.push_back(pick(se, which));
    }
    rep.included = inclusion_mask(rep.entropy);
    fit_included(rep.eps, rep.entropy, rep.included, rep.dimension, rep.intercept, rep.r2);
    return rep;
  }

  MIResult mutual_information() const {
    const auto prof = profile();
    MIResult mi;
    mi.n_points = points_;
    std::vector<double> joint;
    for (const auto& se : prof) {
      mi.eps.push_back(se.eps);
      mi.i_eps.push_back(se.h_p + se.h_phi - se.h_joint);
      joint.push_back(se.h_joint);
    }
    mi.included = inclusion_mask(joint);

    std::vector<double> x, y;
    for (std::size_t i = 0; i < mi.eps.size(); ++i) {
      if (!mi.included[i]) continue;
      x.push_back(-std::log(mi.eps[i]));
      y.push_back(mi.i_eps[i]);
    }
    require_enough_scales(x.size(), joint);
    const FitResult fit = fit_line(x, y);
    mi.di = fit.slope;
    mi.fitted_intercept = fit.intercept;

    // Divergence of the per-scale sequence: sustained growth with a
    // clearly positive dimension means no finite intercept exists.
    double max_growth = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < x.size(); ++i) {
      max_growth = std::max(max_growth, (y[i] - y[i - 1]) / ((x[i] - x[i - 1]) / std::numbers::ln2));
    }
    if (mi.di > 0.1 && max_growth > 0.2) {
      mi.warnings.push_back("per-scale mutual information diverges; no finite estimate");
      mi.fitted_intercept = std::numeric_limits<double>::quiet_NaN();
      mi.value = std::numeric_limits<double>::quiet_NaN();
      mi.plateau_diag = std::numeric_limits<double>::quiet_NaN();
      return mi;
    }

    if (std::abs(mi.di) <= 0.05) {
      double mean = 0.0;
      for (double v : y) mean += v;
      mi.value = mean / static_cast<double>(y.size());
      mi.plateau_used = true;
      if (std::abs(mi.value - mi.fitted_intercept) > 0.05) {
        mi.warnings.push_back("plateau mean and fitted intercept disagree by more than 0.05");
      }
    } else {
      mi.value = mi.fitted_intercept;
    }
    mi.plateau_diag = 0.0;
    for (double v : y) mi.plateau_diag = std::max(mi.plateau_diag, std::abs(v - mi.value));
    return mi;
  }

  KlPhiReport kl_phase_to_uniform() const {
    const auto prof = profile();
    KlPhiReport rep;
    rep.n_points = points_;
    std::vector<double> joint;
    for (const auto& se : prof) {
      rep.eps.push_back(se.eps);
      // H_phi <= log(grid cells) always; clip the rounding residue.
      rep.kl.push_back(std::max(0.0, se.log_phi_grid - se.h_phi));
      joint.push_back(se.h_joint);
    }
    rep.included = inclusion_mask(joint);
    double slope, intercept, r2;
    fit_included(rep.eps, rep.kl, rep.included, slope, intercept, r2);
    rep.slope = slope;
    rep.intercept = intercept;
    return rep;
  }

 private:
  static double pick(const ScaleEntropies& se, Marginal which) {
    switch (which) {
      case Marginal::joint: return se.h_joint;
      case Marginal::probability: return se.h_p;
      case Marginal::phase: return se.h_phi;
    }
    throw std::logic_error("unreachable");
  }

  /// Undersampling guard: scales with H(eps) > log(n) - 1 are saturated
  /// by the finite sample and excluded from fits. The cap is clamped at
  /// zero: a histogram concentrated in one cell is never undersampled.
  std::vector<bool> inclusion_mask(const std::vector<double>& entropy) const {
    const double cap = std::max(std::log(static_cast<double>(points_)) - 1.0, 0.0);
    std::vector<bool> mask(entropy.size());
    for (std::size_t i = 0; i < entropy.size(); ++i) mask[i] = entropy[i] <= cap;
    return mask;
  }

  void require_enough_scales(std::size_t usable, const std::vector<double>& joint) const {
    if (usable >= 3) return;
    std::ostringstream oss;
    oss << "fewer than 3 usable scales after undersampling exclusion (n=" << points_
        << ", guard=" << std::log(static_cast<double>(points_)) - 1.0 << "; per-scale H =";
    for (std::size_t i = 0; i < joint.size(); ++i) {
      oss << (i ? ", " : " ") << spec_.scales[i] << ":" << joint[i];
    }
    oss << ")";
    throw std::runtime_error(oss.str());
  }

  void fit_included(const std::vector<double>& eps, const std::vector<double>& y,
                    const std::vector<bool>& included, double& slope, double& intercept,
                    double& r2) const {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      if (!included[i]) continue;
      xs.push_back(-std::log(eps[i]));
      ys.push_back(y[i]);
    }
    std::vector<double> joint_for_msg = y;
    require_enough_scales(xs.size(), joint_for_msg);
    const FitResult fit = fit_line(xs, ys);
    slope = fit.slope;
    intercept = fit.intercept;
    r2 = fit.r2;
  }

  struct ScaleMaps {
    detail::CellMap joint, pmarg, phimarg;
  };

  PartitionSpec spec_;
  std::vector<int> blocks_;
  std::vector<detail::AxisLayout> layouts_;
  std::vector<ScaleMaps> maps_;
  std::int64_t points_ = 0;
};

/// Joint and marginal entropies at a single pair of axis scales. Used by
/// the fixed-scale data-processing checks, which coarsen one axis only.
inline ScaleEntropies coarse_entropies_mixed(const Ensemble& e, double eps_p, double eps_phi) {
  if (!(eps_p > 0.0) || eps_p > 1.0 || !(eps_phi > 0.0) || eps_phi > 1.0) {
    throw std::invalid_argument("coarse_entropies_mixed: scales must lie in (0, 1]");
  }
  std::vector<int> cols;
  int offset = 0;
  for (int d : e.block_dims()) {
    for (int k = 1; k < d; ++k) cols.push_back(offset + k);
    offset += d;
  }
  detail::AxisLayout ax(cols, cols, eps_p, eps_phi);
  detail::CellMap joint, pmarg, phimarg;
  detail::accumulate(e, ax, 1.0, joint, pmarg, phimarg);
  ScaleEntropies se;
  se.eps = eps_p;
  std::tie(se.h_joint, se.cells_joint) = detail::map_entropy(joint);
  std::tie(se.h_p, se.cells_p) = detail::map_entropy(pmarg);
  std::tie(se.h_phi, se.cells_phi) = detail::map_entropy(phimarg);
  se.log_phi_grid =
      static_cast<double>(ax.phi_cols.size()) * std::log(static_cast<double>(ax.phi_bins));
  return se;
}

inline double coarse_entropy(const Ensemble& e, double eps, Marginal which) {
  const ScaleEntropies se = coarse_entropies_mixed(e, eps, eps);
  switch (which) {
    case Marginal::joint: return se.h_joint;
    case Marginal::probability: return se.h_p;
    case Marginal::phase: return se.h_phi;
  }
  throw std::logic_error("unreachable");
}

inline ScalingReport scaling_fit(const Ensemble& e, const PartitionSpec& spec, Marginal which) {
  HistogramAccumulator acc(spec, e.block_dims());
  acc.add(e);
  return acc.scaling_fit(which);
}

inline MIResult mutual_information(const Ensemble& e, const PartitionSpec& spec) {
  HistogramAccumulator acc(spec, e.block_dims());
  acc.add(e);
  return acc.mutual_information();
}

inline KlPhiReport kl_phase_to_uniform(const Ensemble& e, const PartitionSpec& spec) {
  HistogramAccumulator acc(spec, e.block_dims());
  acc.add(e);
  return acc.kl_phase_to_uniform();
}

}  // namespace gqmi
