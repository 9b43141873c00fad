#pragma once

// Self-contained verification suite behind `gqmi verify`: axiom checks,
// the coherence-surplus grid and oracle cross-comparisons, all at reduced
// sample sizes with fixed seeds. Tolerances here are calibrated for the
// reduced n and are looser than the full acceptance suite.

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gqmi/coherence.hpp"
#include "gqmi/estimators.hpp"
#include "gqmi/reference.hpp"
#include "gqmi/samplers.hpp"
#include "gqmi/spinchain.hpp"

namespace gqmi::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

class Suite {
 public:
  void check(const std::string& name, bool pass, const std::string& detail) {
    results_.push_back({name, pass, detail});
  }
  template <typename T>
  void check_le(const std::string& name, T value, T bound) {
    std::ostringstream oss;
    oss << value << " <= " << bound;
    check(name, value <= bound, oss.str());
  }
  const std::vector<CheckResult>& results() const { return results_; }
  int failures() const {
    int f = 0;
    for (const auto& r : results_) f += r.pass ? 0 : 1;
    return f;
  }

 private:
  std::vector<CheckResult> results_;
};

namespace detail_v {

inline const std::int64_t n_small = 100000;

inline StatePoint fig2_center() {
  return make_state_point((Eigen::VectorXd(2) << 0.5, 0.5).finished(),
                          (Eigen::VectorXd(2) << 0.0, std::numbers::pi).finished());
}

/// Balance window for the spiral estimator at sample size n: scales
/// bracketing (2 delta^2 / (pi n))^(1/3), where the discretization
/// deficit and the histogram bias are of equal size.
inline PartitionSpec spiral_window(double delta, std::int64_t n) {
  const double center = 1.6 * std::cbrt(2.0 * delta * delta / (std::numbers::pi * n));
  return PartitionSpec::geometric(center * std::pow(2.0, 0.5), center * std::pow(2.0, -0.5), 5);
}

/// Mean of the per-scale I_eps over included scales; usable even when
/// the plateau gate rejects the fit at small n.
inline double window_mean_mi(const Ensemble& e, const PartitionSpec& spec) {
  const MIResult mi = mutual_information(e, spec);
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < mi.eps.size(); ++i) {
    if (!mi.included[i]) continue;
    sum += mi.i_eps[i];
    ++count;
  }
  return sum / count;
}

/// Joint/marginal cell maps of an ensemble at one scale.
struct CellMaps {
  gqmi::detail::CellMap joint, pmarg, phimarg;
};

inline CellMaps cell_maps(const Ensemble& e, double eps) {
  std::vector<int> cols;
  int offset = 0;
  for (int d : e.block_dims()) {
    for (int k = 1; k < d; ++k) cols.push_back(offset + k);
    offset += d;
  }
  gqmi::detail::AxisLayout ax(cols, cols, eps, eps);
  CellMaps maps;
  gqmi::detail::accumulate(e, ax, 1.0, maps.joint, maps.pmarg, maps.phimarg);
  return maps;
}

/// Exact finite form of the joint-convexity step in the C4 proof:
/// D(mix || lambda prod1 + (1-lambda) prod2) - lambda I1 - (1-lambda) I2,
/// all at one scale. Non-positive up to rounding by the log-sum
/// inequality.
inline double c4_logsum_defect(const Ensemble& e1, const Ensemble& e2, double lambda, double eps) {
  const CellMaps m1 = cell_maps(e1, eps);
  const CellMaps m2 = cell_maps(e2, eps);
  const int phi_axes_bits = [&] {
    std::vector<int> cols;
    int offset = 0;
    for (int d : e1.block_dims()) {
      for (int k = 1; k < d; ++k) cols.push_back(offset + k);
      offset += d;
    }
    gqmi::detail::AxisLayout ax(cols, cols, eps, eps);
    return ax.phi_bits * static_cast<int>(ax.phi_cols.size());
  }();

  auto product_weight = [&](const CellMaps& m, std::uint64_t joint_key) {
    const std::uint64_t kp = joint_key >> phi_axes_bits;
    const std::uint64_t kphi = joint_key & ((std::uint64_t{1} << phi_axes_bits) - 1);
    const auto ip = m.pmarg.find(kp);
    const auto iphi = m.phimarg.find(kphi);
    if (ip == m.pmarg.end() || iphi == m.phimarg.end()) return 0.0;
    return ip->second * iphi->second;
  };
  auto mi_of = [&](const CellMaps& m) {
    double mi = 0.0;
    for (const auto& [key, w] : m.joint) {
      if (w > 0.0) mi += w * std::log(w / product_weight(m, key));
    }
    return mi;
  };

  double lhs = 0.0;
  auto add_lhs = [&](std::uint64_t key, double wmix) {
    const double ref =
        lambda * product_weight(m1, key) + (1.0 - lambda) * product_weight(m2, key);
    if (wmix > 0.0) lhs += wmix * std::log(wmix / ref);
  };
  for (const auto& [key, w1] : m1.joint) {
    const auto it2 = m2.joint.find(key);
    const double w2 = it2 == m2.joint.end() ? 0.0 : it2->second;
    add_lhs(key, lambda * w1 + (1.0 - lambda) * w2);
  }
  for (const auto& [key, w2] : m2.joint) {
    if (m1.joint.count(key)) continue;
    add_lhs(key, (1.0 - lambda) * w2);
  }
  return lhs - lambda * mi_of(m1) - (1.0 - lambda) * mi_of(m2);
}

}  // namespace detail_v

using detail_v::c4_logsum_defect;

inline void run_samplers(Suite& s) {
  using namespace detail_v;
  {
    Ensemble a = sample_haar(2, 20000, 404);
    Ensemble b = sample_haar(2, 20000, 404);
    s.check("samplers/determinism", a.probabilities() == b.probabilities() &&
                                        a.phases() == b.phases(),
            "identical seed reproduces identical samples");
  }
  {
    Ensemble h2 = sample_haar(2, 400000, 405);
    const double mean_p = h2.probabilities().col(1).mean();
    s.check_le("samplers/haar-mean-p", std::abs(mean_p - 0.5), 0.002);
    auto [stat2, df2] = reference::haar_p_marginal_chi2(h2, 50);
    s.check_le("samplers/haar-chi2-D2", stat2, reference::chi2_critical_99(df2));
    Ensemble h3 = sample_haar(3, 400000, 406);
    auto [stat3, df3] = reference::haar_p_marginal_chi2(h3, 7);
    s.check_le("samplers/haar-chi2-D3", stat3, reference::chi2_critical_99(df3));
  }
  {
    Ensemble c = sample_canonical(2.0, 0.0, n_small, 407);
    const double mean_p = c.probabilities().col(1).mean();
    const double truth = reference::canonical_mean_p_quadrature(2.0);
    // sd of p is below 0.25; 3 standard errors at n = 1e5
    s.check_le("samplers/canonical-mean-p", std::abs(mean_p - truth), 3.0 * 0.25 / std::sqrt(1e5));
  }
  {
    McmcConfig cfg;
    cfg.thinning = 40;  // near-independent draws for the KS comparison
    Ensemble g = sample_fs_gaussian(fig2_center(), 0.5, 50000, 408, cfg);
    std::vector<double> mh(g.size());
    for (std::int64_t i = 0; i < g.size(); ++i) {
      mh[i] = qubit_fs_distance(g.probabilities()(i, 1), g.phases()(i, 1), 0.5, std::numbers::pi);
    }
    auto rej = reference::fs_gaussian_rejection_distances(fig2_center(), 0.5, 50000, 409);
    const double p = reference::ks_two_sample_pvalue(std::move(mh), std::move(rej));
    std::ostringstream oss;
    oss << "KS p-value " << p << " >= 0.01";
    s.check("samplers/fs-gaussian-ks", p >= 0.01, oss.str());
  }
  {
    Ensemble ng = sample_naive_gaussian(0.5, std::numbers::pi, 0.05, 0.3, n_small, 410);
    const double mp = ng.probabilities().col(1).mean();
    const double mphi = ng.phases().col(1).mean();
    s.check_le("samplers/naive-gaussian-means",
               std::max(std::abs(mp - 0.5), std::abs(mphi - std::numbers::pi)),
               3.0 * 0.3 / std::sqrt(1e5));
  }
}

inline void run_estimators(Suite& s) {
  using namespace detail_v;
  {
    Ensemble h = sample_haar(2, 20000, 500);
    const double mine = coarse_entropy(h, 1.0 / 64, Marginal::joint);
    const double ref = reference::naive_coarse_entropy(h, 1.0 / 64, Marginal::joint);
    s.check("estimators/naive-binner", mine == ref, "binner match is bit-exact");
  }
  {
    std::vector<double> x, y;
    for (int k = 3; k <= 8; ++k) {
      x.push_back(k * std::numbers::ln2);
      y.push_back(2.0 * k * std::numbers::ln2 + 1.0);
    }
    const FitResult f = fit_line(x, y);
    s.check_le("estimators/exact-line-fit",
               std::max(std::abs(f.slope - 2.0), std::abs(f.intercept - 1.0)), 1e-9);
  }
  {
    StatePoint x0 = fig2_center();
    Ensemble d = sample_dirac(x0, 1000);
    ScalingReport r = scaling_fit(d, PartitionSpec::dyadic(3, 10), Marginal::joint);
    s.check_le("estimators/dirac-dimension",
               std::max(std::abs(r.dimension), std::abs(r.intercept)), 1e-9);
  }
  for (double delta : {std::numbers::pi / 4, std::numbers::pi / 2, 3 * std::numbers::pi / 4}) {
    Ensemble sp = sample_spiral(delta, n_small, 501);
    const double got = window_mean_mi(sp, spiral_window(delta, n_small));
    std::ostringstream name;
    name << "estimators/spiral-closed-form-delta=" << delta;
    s.check_le(name.str(), std::abs(got - reference::spiral_mi_closed_form(delta)), 0.12);
  }
  {
    PartitionSpec nulls = PartitionSpec::dyadic(3, 5);
    const double i_haar = mutual_information(sample_haar(2, n_small, 502), nulls).value;
    const double i_diag = mutual_information(
        sample_diagonal((Eigen::VectorXd(2) << 0.3, 0.7).finished(), n_small, 503), nulls).value;
    const double i_ng = mutual_information(
        sample_naive_gaussian(0.5, std::numbers::pi, 0.05, 0.3, n_small, 504), nulls).value;
    const double i_can = mutual_information(sample_canonical(2.0, 0.0, n_small, 505), nulls).value;
    s.check_le("estimators/null-haar", std::abs(i_haar), 0.03);
    s.check_le("estimators/null-diagonal", std::abs(i_diag), 0.03);
    s.check_le("estimators/null-naive-gaussian", std::abs(i_ng), 0.03);
    s.check_le("estimators/null-canonical-g0", std::abs(i_can), 0.03);
  }
  {
    Ensemble h = sample_haar(2, 200000, 506);
    ScalingReport r = scaling_fit(h, PartitionSpec::dyadic(3, 6), Marginal::joint);
    s.check_le("estimators/haar-D2-dimension", std::abs(r.dimension - 2.0), 0.15);
    KlPhiReport kl = kl_phase_to_uniform(h, PartitionSpec::dyadic(3, 6));
    s.check_le("estimators/haar-kl-intercept", std::abs(kl.intercept), 0.02);
  }
  {
    // coarsening the phi axis can only lower the fixed-scale I
    bool monotone = true;
    Rng rng(507);
    for (int trial = 0; trial < 10 && monotone; ++trial) {
      Ensemble sp = sample_spiral(rng.uniform(0.2, 3.0), 20000, 508 + trial);
      ScaleEntropies fine = coarse_entropies_mixed(sp, 0.0625, 0.0625);
      ScaleEntropies coarse = coarse_entropies_mixed(sp, 0.0625, 0.125);
      const double i_fine = fine.h_p + fine.h_phi - fine.h_joint;
      const double i_coarse = coarse.h_p + coarse.h_phi - coarse.h_joint;
      monotone = i_coarse <= i_fine + 1e-12;
    }
    s.check("estimators/merge-monotone", monotone, "phi-coarsening never increases I_eps");
  }
}

inline void run_axioms(Suite& s) {
  using namespace detail_v;
  PartitionSpec k35 = PartitionSpec::dyadic(3, 5);
  StatePoint x0 = fig2_center();

  {  // C1 over a small grid
    double worst = 0.0;
    worst = std::min(worst, mutual_information(sample_haar(2, n_small, 600), k35).value);
    worst = std::min(worst, mutual_information(sample_canonical(1.0, 0.5, n_small, 601), k35).value);
    worst = std::min(worst,
                     mutual_information(sample_fs_gaussian(x0, 0.4, n_small, 602), k35).value);
    s.check_le("axioms/C1-nonnegativity", -worst, 0.02);
  }
  {  // C2: built-in kernel pairs never raise I
    double worst = -1.0;
    int idx = 0;
    for (const auto& e :
         {sample_spiral(0.5, n_small, 603), sample_canonical(2.0, 0.7, n_small, 604)}) {
      for (const auto& kernels :
           std::vector<std::pair<ProbabilityKernel, PhaseKernel>>{
               {ProbabilityKernel::gaussian(0.05), PhaseKernel::identity()},
               {ProbabilityKernel::identity(), PhaseKernel::wrapped_uniform(0.8)},
               {ProbabilityKernel::gaussian(0.1), PhaseKernel::wrapped_uniform(two_pi)}}) {
        Ensemble out = product_channel(e, kernels.first, kernels.second, 605 + idx++);
        MIResult in_mi = mutual_information(e, k35);
        MIResult out_mi = mutual_information(out, k35);
        for (std::size_t i = 0; i < in_mi.eps.size(); ++i) {
          worst = std::max(worst, out_mi.i_eps[i] - in_mi.i_eps[i]);
        }
      }
    }
    s.check_le("axioms/C2-monotonicity", worst, 0.03);
  }
  {  // C4: exact log-sum inequality, plus the literal form on
     // marginal-compatible pairs
    Rng rng(610);
    double worst_exact = -1.0;
    for (int trial = 0; trial < 10; ++trial) {
      Ensemble e1 = sample_naive_gaussian(rng.uniform(0.2, 0.8), rng.uniform(1.0, 5.0),
                                          rng.uniform(0.05, 0.3), rng.uniform(0.2, 1.0), 20000,
                                          611 + trial);
      Ensemble e2 = sample_canonical(rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0), 20000,
                                     651 + trial);
      worst_exact =
          std::max(worst_exact, c4_logsum_defect(e1, e2, rng.uniform(0.1, 0.9), 0.03125));
    }
    s.check_le("axioms/C4-joint-convexity-exact", worst_exact, 1e-9);

    double worst_literal = -1.0;
    for (int trial = 0; trial < 10; ++trial) {
      Ensemble e1 = sample_spiral(rng.uniform(0.2, 3.0), n_small, 620 + trial);
      Ensemble e2 = trial % 2 ? sample_haar(2, n_small, 630 + trial)
                              : sample_spiral(rng.uniform(0.2, 3.0), n_small, 660 + trial);
      const double lambda = rng.uniform(0.2, 0.8);
      Ensemble m = mix(e1, e2, lambda);
      MIResult m1 = mutual_information(e1, k35);
      MIResult m2 = mutual_information(e2, k35);
      MIResult mm = mutual_information(m, k35);
      for (std::size_t i = 0; i < mm.eps.size(); ++i) {
        worst_literal = std::max(
            worst_literal, mm.i_eps[i] - lambda * m1.i_eps[i] - (1.0 - lambda) * m2.i_eps[i]);
      }
    }
    s.check_le("axioms/C4-convexity-uniform-marginals", worst_literal, 0.03);
  }
  {  // C5
    const double i_dirac = mutual_information(sample_dirac(x0, 1000), k35).value;
    s.check_le("axioms/C5-pure-state", std::abs(i_dirac), 1e-9);
  }
  {  // C6: additivity of the per-scale values under tensor pairing
    Ensemble s1 = sample_spiral(std::numbers::pi / 4, 200000, 680);
    Ensemble s2 = sample_spiral(std::numbers::pi / 4, 200000, 681);
    Ensemble h = sample_haar(2, 200000, 682);
    PartitionSpec coarse = PartitionSpec::geometric(0.35355339059327379, 0.17677669529663687, 3);
    auto defect = [&](const Ensemble& a, const Ensemble& b) {
      Ensemble comp = tensor(a, b);
      MIResult mc = mutual_information(comp, coarse);
      MIResult ma = mutual_information(a, coarse);
      MIResult mb = mutual_information(b, coarse);
      double worst = 0.0;
      for (std::size_t i = 0; i < mc.eps.size(); ++i) {
        worst = std::max(worst, std::abs(mc.i_eps[i] - ma.i_eps[i] - mb.i_eps[i]));
      }
      return worst;
    };
    s.check_le("axioms/C6-additivity-spiralxspiral", defect(s1, s2), 0.1);
    s.check_le("axioms/C6-additivity-spiralxhaar", defect(s1, h), 0.1);
  }
}

inline void run_theorem1(Suite& s) {
  using namespace detail_v;
  PartitionSpec k35 = PartitionSpec::dyadic(3, 5);
  StatePoint x0 = fig2_center();

  double worst_margin = 1e9;
  bool gap_holds = true;
  auto visit = [&](const Ensemble& e, const PartitionSpec& spec) {
    SurplusReport sr = coherence_surplus(e, spec);
    worst_margin = std::min(worst_margin, sr.min_delta_c_eps);
    GapReport gr = entropy_gap_check(e, spec);
    gap_holds = gap_holds && gr.holds;
  };
  visit(sample_haar(2, n_small, 700), k35);
  visit(sample_spiral(std::numbers::pi / 4, n_small, 701),
        spiral_window(std::numbers::pi / 4, n_small));
  visit(sample_canonical(2.0, 0.5, n_small, 702), k35);
  visit(sample_fs_gaussian(x0, 0.4, n_small, 703), k35);
  visit(sample_diagonal((Eigen::VectorXd(2) << 0.3, 0.7).finished(), n_small, 704), k35);
  Rng rng(705);
  for (int trial = 0; trial < 5; ++trial) {
    Ensemble e1 = sample_spiral(rng.uniform(0.3, 2.8), n_small, 710 + trial);
    Ensemble e2 = sample_canonical(rng.uniform(0.2, 3.0), rng.uniform(0.0, 1.0), n_small,
                                   720 + trial);
    visit(mix(e1, e2, rng.uniform(0.2, 0.8)), k35);
  }
  s.check("theorem1/delta-c-nonnegative", worst_margin >= -0.03,
          "min per-scale delta_C = " + std::to_string(worst_margin));
  s.check("theorem1/entropy-gap", gap_holds, "lhs >= rhs - 0.03 at all included scales");

  {
    Ensemble sp = sample_spiral(std::numbers::pi / 4, n_small, 730);
    const double c_est = rel_entropy_coherence(density_from_ensemble(sp));
    const double c_oracle =
        rel_entropy_coherence(reference::spiral_density_quadrature(std::numbers::pi / 4));
    s.check_le("theorem1/spiral-coherence-oracle", std::abs(c_est - c_oracle), 2e-3);
  }
  {
    // single superposition point: I = 0, KL_phi(eps) = log(cells),
    // C = ln 2, so delta_C(eps) = log(cells) - ln 2 >= 0
    Ensemble d = sample_dirac(x0, 100);
    SurplusReport sr = coherence_surplus(d, k35);
    bool ok = !sr.scalar_valid && std::abs(sr.C - std::numbers::ln2) < 1e-12;
    for (const auto& ps : sr.per_scale) {
      const auto cells = static_cast<double>(std::ceil(two_pi / ps.eps));
      ok = ok && std::abs(ps.delta_c_eps - (std::log(cells) - std::numbers::ln2)) < 1e-9;
    }
    s.check("theorem1/superposition-point", ok, "delta_C(eps) = log N_phi - ln 2 exactly");
  }
}

inline void run_spinchain(Suite& s) {
  {
    ChainConfig cfg;
    cfg.sites = 4;
    cfg.system_site = 0;
    const SpinChainHamiltonian ham = SpinChainHamiltonian::build(cfg);
    const Eigen::MatrixXcd hd = ham.to_dense();
    Rng rng(800);
    ManyBodyState psi(16);
    for (int i = 0; i < 16; ++i) psi[i] = rng.complex_normal();
    psi /= psi.norm();
    double worst = 0.0;
    for (double t : {0.4, 1.3, 3.7, 8.0}) {
      worst = std::max(worst,
                       (evolve(psi, ham, t) - reference::dense_evolve(hd, psi, t)).norm());
    }
    s.check_le("spinchain/krylov-vs-dense-L4", worst, 1e-8);
  }
  {
    ChainConfig cfg;
    cfg.sites = 5;
    cfg.system_site = 2;
    const SpinChainHamiltonian ham = SpinChainHamiltonian::build(cfg);
    Rng rng(801);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      ManyBodyState psi(32);
      for (int i = 0; i < 32; ++i) psi[i] = rng.complex_normal();
      psi /= psi.norm();
      psi = evolve(psi, ham, rng.uniform(0.0, 5.0));
      const Ensemble proj = projected_ensemble(psi, cfg.system_site);
      const Eigen::MatrixXcd direct = reference::partial_trace_single_site(psi, cfg.system_site);
      worst = std::max(
          worst,
          (density_from_ensemble(proj).matrix() - direct).cwiseAbs().maxCoeff());
    }
    s.check_le("spinchain/partial-trace-consistency", worst, 1e-10);
  }
  {
    // ZZ-only evolution keeps every conditional state a phase-rotated
    // copy of the system state; p stays atomic, so I vanishes exactly.
    // A tilted system state keeps p off the dyadic cell edges.
    ChainConfig cfg;
    cfg.sites = 10;
    cfg.system_site = 3;
    cfg.field = 0.0;
    const SpinChainHamiltonian ham = SpinChainHamiltonian::build(cfg);
    std::vector<std::pair<Complex, Complex>> site_amps(
        10, {Complex(1 / std::numbers::sqrt2, 0), Complex(1 / std::numbers::sqrt2, 0)});
    site_amps[3] = {Complex(std::cos(0.6), 0.0), std::polar(std::sin(0.6), 0.8)};
    ManyBodyState psi = product_state_from_sites(site_amps);
    psi = evolve(psi, ham, 2.5);
    const MIResult mi = mutual_information(projected_ensemble(psi, 3), chain_partition_spec());
    s.check_le("spinchain/zz-only-mi-vanishes", std::abs(mi.value), 1e-9);
  }
  {
    ChainConfig cfg;
    cfg.sites = 10;
    cfg.system_site = 4;
    cfg.t_max = 4.0;
    const SpinChainHamiltonian ham = SpinChainHamiltonian::build(cfg);
    ManyBodyState psi = product_state(cfg.sites, cfg.initial_state);
    const double e0 = ham.energy(psi);
    double worst_e = 0.0, worst_n = 0.0;
    for (int k = 0; k < 40; ++k) {
      psi = evolve(psi, ham, 0.1);
      worst_e = std::max(worst_e, std::abs(ham.energy(psi) - e0));
      worst_n = std::max(worst_n, std::abs(psi.norm() - 1.0));
    }
    s.check_le("spinchain/energy-conservation", worst_e, 1e-6);
    s.check_le("spinchain/norm-conservation", worst_n, 1e-8);
  }
}

inline Suite run(const std::string& only = "all") {
  Suite s;
  const bool all = only == "all";
  if (all || only == "samplers") run_samplers(s);
  if (all || only == "estimators") run_estimators(s);
  if (all || only == "axioms") run_axioms(s);
  if (all || only == "theorem1") run_theorem1(s);
  if (all || only == "spinchain") run_spinchain(s);
  if (s.results().empty()) {
    throw std::invalid_argument(
        "verify: unknown section '" + only +
        "' (expected all, samplers, estimators, axioms, theorem1 or spinchain)");
  }
  return s;
}

}  // namespace gqmi::verify
