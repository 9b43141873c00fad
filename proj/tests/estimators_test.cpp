#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <numeric>

#include "gqmi/estimators.hpp"
#include "gqmi/reference.hpp"
#include "gqmi/samplers.hpp"
#include "test_util.hpp"

using namespace gqmi;
using Catch::Approx;

namespace {

/// Hand-built ensemble from explicit qubit points.
Ensemble from_points(const std::vector<std::tuple<double, double, double>>& pts) {
  const auto n = static_cast<std::int64_t>(pts.size());
  Eigen::MatrixXd p(n, 2), phi(n, 2);
  Eigen::VectorXd w(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& [weight, p1, phi1] = pts[i];
    w[i] = weight;
    p(i, 0) = 1.0 - p1;
    p(i, 1) = p1;
    phi(i, 0) = 0.0;
    phi(i, 1) = phi1;
  }
  EnsembleMeta meta;
  meta.generator = "explicit";
  meta.n = n;
  return Ensemble({2}, std::move(p), std::move(phi), std::move(w), std::move(meta));
}

Ensemble random_family_ensemble(Rng& rng, std::int64_t n, std::uint64_t seed) {
  switch (static_cast<int>(rng.uniform() * 4)) {
    case 0: return sample_haar(2, n, seed);
    case 1: return sample_spiral(rng.uniform(0.2, 3.0), n, seed);
    case 2: return sample_canonical(rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0), n, seed);
    default:
      return sample_naive_gaussian(rng.uniform(0.2, 0.8), rng.uniform(1.0, 5.0),
                                   rng.uniform(0.05, 0.3), rng.uniform(0.2, 1.0), n, seed);
  }
}

}  // namespace

TEST_CASE("coarse entropy basics", "[estimators]") {
  SECTION("single occupied cell") {
    const Ensemble e = from_points({{0.4, 0.21, 1.0}, {0.6, 0.22, 1.01}});
    CHECK(coarse_entropy(e, 0.125, Marginal::joint) == 0.0);
  }
  SECTION("four equal cells") {
    const Ensemble e =
        from_points({{0.25, 0.1, 0.5}, {0.25, 0.1, 1.5}, {0.25, 0.6, 0.5}, {0.25, 0.6, 1.5}});
    CHECK(coarse_entropy(e, 0.25, Marginal::joint) == Approx(std::log(4.0)).margin(1e-15));
    CHECK(coarse_entropy(e, 0.25, Marginal::probability) ==
          Approx(std::numbers::ln2).margin(1e-15));
  }
  SECTION("scale range enforced") {
    const Ensemble e = from_points({{1.0, 0.3, 1.0}});
    CHECK_THROWS_AS(coarse_entropy(e, 1.5, Marginal::joint), std::invalid_argument);
    CHECK_THROWS_AS(coarse_entropy(e, 0.0, Marginal::joint), std::invalid_argument);
  }
}

TEST_CASE("binner matches a naive reference exactly", "[estimators]") {
  const Ensemble h = sample_haar(2, 100000, 51);
  for (Marginal which : {Marginal::joint, Marginal::probability, Marginal::phase}) {
    CHECK(coarse_entropy(h, 1.0 / 64, which) == reference::naive_coarse_entropy(h, 1.0 / 64, which));
  }
  const Ensemble sp = sample_spiral(0.4, 50000, 52);
  CHECK(coarse_entropy(sp, 1.0 / 32, Marginal::joint) ==
        reference::naive_coarse_entropy(sp, 1.0 / 32, Marginal::joint));
}

TEST_CASE("line fit recovers exact data", "[estimators]") {
  std::vector<double> x, y;
  for (int k = 3; k <= 10; ++k) {
    x.push_back(k * std::numbers::ln2);
    y.push_back(2.0 * k * std::numbers::ln2 + 1.0);
  }
  const FitResult f = fit_line(x, y);
  CHECK(f.slope == Approx(2.0).margin(1e-9));
  CHECK(f.intercept == Approx(1.0).margin(1e-9));
  CHECK(f.r2 == Approx(1.0).margin(1e-12));
}

TEST_CASE("scaling fit", "[estimators]") {
  SECTION("haar joint dimension is 2(D-1)") {
    const Ensemble h = sample_haar(2, 1000000, 53);
    const ScalingReport r = scaling_fit(h, PartitionSpec::dyadic(3, 10), Marginal::joint);
    CHECK(r.dimension == Approx(2.0).margin(0.1));
    CHECK(r.r2 > 0.999);
  }
  SECTION("undersampled scales are excluded") {
    const Ensemble h = sample_haar(2, 20000, 54);
    const ScalingReport r = scaling_fit(h, PartitionSpec::dyadic(3, 10), Marginal::joint);
    REQUIRE(r.included.size() == 8);
    CHECK_FALSE(r.included.back());
    CHECK(r.included.front());
  }
  SECTION("too few usable scales is an error with diagnostics") {
    const Ensemble h = sample_haar(2, 3000, 55);
    try {
      scaling_fit(h, PartitionSpec::dyadic(6, 9), Marginal::joint);
      FAIL("expected rejection");
    } catch (const std::runtime_error& ex) {
      CHECK(std::string(ex.what()).find("usable scales") != std::string::npos);
    }
  }
}

TEST_CASE("mutual information estimator", "[estimators]") {
  SECTION("perfectly correlated two-symbol ensemble") {
    const Ensemble e = from_points({{0.5, 0.2, 1.0}, {0.5, 0.7, 4.0}});
    for (double eps : {0.5, 0.25, 0.125, 0.0625}) {
      const ScaleEntropies se = coarse_entropies_mixed(e, eps, eps);
      CHECK(se.h_p + se.h_phi - se.h_joint == std::log(2.0));
    }
  }
  SECTION("spiral closed form at delta = pi/2") {
    const Ensemble e = sample_spiral(std::numbers::pi / 2, 1000000, 56);
    const double center =
        1.6 * std::cbrt(2.0 * std::pow(std::numbers::pi / 2, 2) / (std::numbers::pi * 1e6));
    const PartitionSpec window =
        PartitionSpec::geometric(center * std::pow(2.0, 0.5), center * std::pow(2.0, -0.5), 5);
    const MIResult mi = mutual_information(e, window);
    CHECK(mi.value == Approx(std::numbers::ln2).margin(0.05));
    CHECK(std::abs(mi.di) <= 0.05);
    CHECK(mi.plateau_used);
  }
  SECTION("per-scale values match the band quadrature oracle") {
    const Ensemble e = sample_spiral(std::numbers::pi / 2, 1000000, 57);
    for (double eps : {0.03125, 0.015625}) {
      const ScaleEntropies se = coarse_entropies_mixed(e, eps, eps);
      const double i_hat = se.h_p + se.h_phi - se.h_joint;
      const double i_true = reference::spiral_mi_quadrature(std::numbers::pi / 2, eps);
      CHECK(i_hat == Approx(i_true).margin(0.02));
    }
  }
  SECTION("haar is a null") {
    const Ensemble h = sample_haar(2, 1000000, 58);
    CHECK(std::abs(mutual_information(h, PartitionSpec::dyadic(3, 6)).value) <= 0.02);
  }
}

TEST_CASE("mutual information invariants", "[estimators]") {
  Rng rng(59);
  SECTION("non-negativity at every scale") {
    for (int trial = 0; trial < 20; ++trial) {
      const Ensemble e = random_family_ensemble(rng, 20000, 600 + trial);
      const MIResult mi = mutual_information(e, PartitionSpec::dyadic(3, 6));
      for (double v : mi.i_eps) CHECK(v >= -1e-12);
    }
  }
  SECTION("invariance under point reordering") {
    const Ensemble e = sample_spiral(0.7, 30000, 60);
    std::vector<std::int64_t> perm(e.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(61));
    Eigen::MatrixXd p(e.size(), 2), phi(e.size(), 2);
    Eigen::VectorXd w(e.size());
    for (std::int64_t i = 0; i < e.size(); ++i) {
      p.row(i) = e.probabilities().row(perm[i]);
      phi.row(i) = e.phases().row(perm[i]);
      w[i] = e.weight(perm[i]);
    }
    const Ensemble shuffled({2}, std::move(p), std::move(phi), std::move(w), e.meta());
    const MIResult a = mutual_information(e, PartitionSpec::dyadic(3, 6));
    const MIResult b = mutual_information(shuffled, PartitionSpec::dyadic(3, 6));
    for (std::size_t s = 0; s < a.i_eps.size(); ++s) {
      CHECK(a.i_eps[s] == Approx(b.i_eps[s]).margin(1e-12));
    }
  }
  SECTION("coarsening the phase axis never increases I_eps") {
    for (int trial = 0; trial < 100; ++trial) {
      const Ensemble e = random_family_ensemble(rng, 5000, 700 + trial);
      const ScaleEntropies fine = coarse_entropies_mixed(e, 0.0625, 0.0625);
      const ScaleEntropies coarse = coarse_entropies_mixed(e, 0.0625, 0.125);
      CHECK(coarse.h_p + coarse.h_phi - coarse.h_joint <=
            fine.h_p + fine.h_phi - fine.h_joint + 1e-12);
    }
  }
  SECTION("divergence warning replaces the fit for singular ensembles") {
    const Ensemble e = sample_spiral(0.0, 50000, 62);
    const MIResult mi = mutual_information(e, PartitionSpec::dyadic(3, 7));
    REQUIRE_FALSE(mi.warnings.empty());
    CHECK(std::isnan(mi.value));
    CHECK(std::isnan(mi.fitted_intercept));
    for (double v : mi.i_eps) CHECK(std::isfinite(v));
  }
}

TEST_CASE("phase KL divergence", "[estimators]") {
  SECTION("haar phases are uniform") {
    const Ensemble h = sample_haar(2, 1000000, 63);
    const KlPhiReport kl = kl_phase_to_uniform(h, PartitionSpec::dyadic(3, 10));
    CHECK(std::abs(kl.intercept) <= 0.02);
    CHECK(std::abs(kl.slope) <= 0.05);
    for (double v : kl.kl) CHECK(v >= 0.0);
  }
  SECTION("spiral phase marginal is uniform for any noise level") {
    const Ensemble e = sample_spiral(0.9, 1000000, 64);
    CHECK(std::abs(kl_phase_to_uniform(e, PartitionSpec::dyadic(3, 6)).intercept) <= 0.02);
  }
  SECTION("diagonal-ensemble phases are uniform") {
    const Ensemble e =
        sample_diagonal((Eigen::VectorXd(2) << 0.4, 0.6).finished(), 1000000, 65);
    CHECK(std::abs(kl_phase_to_uniform(e, PartitionSpec::dyadic(3, 6)).intercept) <= 0.02);
  }
  SECTION("concentrated phases diverge with a positive slope") {
    const Ensemble e = sample_naive_gaussian(0.5, 3.0, 0.2, 0.05, 100000, 66);
    const KlPhiReport kl = kl_phase_to_uniform(e, PartitionSpec::dyadic(3, 6));
    CHECK(kl.intercept > 0.5);
  }
}

TEST_CASE("histogram accumulator streams chunks exactly", "[estimators]") {
  const Ensemble whole = sample_haar(2, 40000, 67);
  HistogramAccumulator one(PartitionSpec::dyadic(3, 6), {2});
  one.add(whole);

  // the same points split into two half-mass chunks
  auto half = [&](std::int64_t begin) {
    Eigen::MatrixXd p = whole.probabilities().middleRows(begin, 20000);
    Eigen::MatrixXd phi = whole.phases().middleRows(begin, 20000);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(20000, 1.0 / 20000.0);
    EnsembleMeta meta;
    meta.generator = "chunk";
    meta.n = 20000;
    return Ensemble({2}, std::move(p), std::move(phi), std::move(w), std::move(meta));
  };
  HistogramAccumulator two(PartitionSpec::dyadic(3, 6), {2});
  two.add(half(0), 0.5);
  two.add(half(20000), 0.5);

  REQUIRE(two.points() == one.points());
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(one.entropies(s).h_joint == two.entropies(s).h_joint);
    CHECK(one.entropies(s).h_p == two.entropies(s).h_p);
    CHECK(one.entropies(s).h_phi == two.entropies(s).h_phi);
  }
}

TEST_CASE("partition spec validation", "[estimators]") {
  auto validate = [](std::vector<double> scales) {
    PartitionSpec spec;
    spec.scales = std::move(scales);
    spec.validate();
  };
  CHECK_THROWS_AS(validate({0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(validate({0.25, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(validate({1.5, 0.5}), std::invalid_argument);
  CHECK_NOTHROW(PartitionSpec::dyadic(3, 10).validate());
}
