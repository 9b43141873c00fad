#include <catch2/catch_amalgamated.hpp>

#include "gqmi/geometry.hpp"
#include "test_util.hpp"

using namespace gqmi;
using Catch::Approx;

namespace {

StatePoint qubit(double p1, double phi1) {
  return make_state_point((Eigen::VectorXd(2) << 1.0 - p1, p1).finished(),
                          (Eigen::VectorXd(2) << 0.0, phi1).finished());
}

}  // namespace

TEST_CASE("amplitude to coordinate conversion", "[geometry]") {
  SECTION("basis state") {
    AmplitudeVector psi(2);
    psi << 1.0, 0.0;
    const StatePoint x = amplitudes_to_coords(psi);
    CHECK(x.p[0] == 1.0);
    CHECK(x.p[1] == 0.0);
    CHECK(x.phi[0] == 0.0);
    CHECK(x.phi[1] == 0.0);
  }
  SECTION("equal superposition with i") {
    AmplitudeVector psi(2);
    psi << Complex(1.0 / std::numbers::sqrt2, 0.0), Complex(0.0, 1.0 / std::numbers::sqrt2);
    const StatePoint x = amplitudes_to_coords(psi);
    CHECK(x.p[0] == Approx(0.5).margin(1e-15));
    CHECK(x.p[1] == Approx(0.5).margin(1e-15));
    CHECK(x.phi[0] == 0.0);
    CHECK(x.phi[1] == Approx(std::numbers::pi / 2).margin(1e-15));
  }
  SECTION("global phase invariance") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
      const AmplitudeVector psi = testutil::random_amplitudes(rng, 2 + trial % 3);
      const AmplitudeVector rotated = std::polar(1.0, rng.uniform(0.0, two_pi)) * psi;
      const StatePoint a = amplitudes_to_coords(psi);
      const StatePoint b = amplitudes_to_coords(rotated);
      CHECK((a.p - b.p).cwiseAbs().maxCoeff() < 1e-12);
      for (int k = 0; k < a.dim(); ++k) {
        double d = std::abs(a.phi[k] - b.phi[k]);
        d = std::min(d, two_pi - d);
        CHECK(d < 1e-9);
      }
    }
  }
  SECTION("non-normalized input rejected") {
    AmplitudeVector psi(2);
    psi << 1.0, 0.5;
    CHECK_THROWS_AS(amplitudes_to_coords(psi), std::invalid_argument);
  }
}

TEST_CASE("coordinate to amplitude conversion", "[geometry]") {
  SECTION("phase pi gives a relative sign") {
    const AmplitudeVector psi = coords_to_amplitudes(qubit(0.5, std::numbers::pi));
    CHECK(psi[0].real() == Approx(1.0 / std::numbers::sqrt2));
    CHECK(psi[1].real() == Approx(-1.0 / std::numbers::sqrt2));
    CHECK(std::abs(psi[1].imag()) < 1e-15);
  }
  SECTION("excited basis state") {
    const AmplitudeVector psi = coords_to_amplitudes(qubit(1.0, 0.0));
    CHECK(psi[0] == Complex(0.0, 0.0));
    CHECK(psi[1] == Complex(1.0, 0.0));
  }
  SECTION("round trip is the identity") {
    Rng rng(102);
    for (int trial = 0; trial < 10000; ++trial) {
      const StatePoint x = testutil::random_state_point(rng, 2 + trial % 3);
      const StatePoint back = amplitudes_to_coords(coords_to_amplitudes(x));
      CHECK((x.p - back.p).cwiseAbs().maxCoeff() < 1e-12);
      for (int k = 0; k < x.dim(); ++k) {
        double d = std::abs(x.phi[k] - back.phi[k]);
        d = std::min(d, two_pi - d);
        CHECK(d < 1e-12);
      }
    }
  }
}

TEST_CASE("Fubini-Study distance", "[geometry]") {
  Rng rng(103);
  SECTION("coincident points") {
    const StatePoint x = testutil::random_state_point(rng, 3);
    CHECK(fs_distance(x, x) == Approx(0.0).margin(1e-7));
  }
  SECTION("orthogonal basis states") {
    CHECK(fs_distance(qubit(0.0, 0.0), qubit(1.0, 0.0)) ==
          Approx(std::numbers::pi / 2).margin(1e-12));
  }
  SECTION("equator antipodes") {
    // overlap sqrt(1/4) + sqrt(1/4) e^{i pi} = 0
    CHECK(fs_distance(qubit(0.5, 0.0), qubit(0.5, std::numbers::pi)) ==
          Approx(std::numbers::pi / 2).margin(1e-12));
  }
  SECTION("symmetry and triangle inequality") {
    for (int trial = 0; trial < 1000; ++trial) {
      const StatePoint a = testutil::random_state_point(rng, 2);
      const StatePoint b = testutil::random_state_point(rng, 2);
      const StatePoint c = testutil::random_state_point(rng, 2);
      CHECK(fs_distance(a, b) == Approx(fs_distance(b, a)).margin(1e-14));
      CHECK(fs_distance(a, c) <= fs_distance(a, b) + fs_distance(b, c) + 1e-10);
    }
  }
  SECTION("dimension mismatch rejected") {
    Rng r2(104);
    CHECK_THROWS_AS(
        fs_distance(testutil::random_state_point(r2, 2), testutil::random_state_point(r2, 3)),
        std::invalid_argument);
  }
}

TEST_CASE("qubit energy", "[geometry]") {
  SECTION("pole value is field independent") {
    for (double g : {0.0, 1.0, 3.0}) {
      CHECK(qubit_energy(qubit(0.0, 1.3), g) == 1.0);
    }
  }
  SECTION("equator with aligned phase") {
    CHECK(qubit_energy(qubit(0.5, 0.0), 1.0) == Approx(1.0).margin(1e-12));
  }
  SECTION("equator at quarter phase cancels") {
    CHECK(qubit_energy(qubit(0.5, std::numbers::pi / 2), 3.0) == Approx(0.0).margin(1e-12));
  }
  SECTION("energy bound |h| <= 1 + |g|") {
    Rng rng(105);
    for (int trial = 0; trial < 1000; ++trial) {
      const StatePoint x = testutil::random_state_point(rng, 2);
      const double g = rng.uniform(-3.0, 3.0);
      CHECK(std::abs(qubit_energy(x, g)) <= 1.0 + std::abs(g) + 1e-12);
    }
  }
  SECTION("qubit required") {
    Rng rng(106);
    CHECK_THROWS_AS(qubit_energy(testutil::random_state_point(rng, 3), 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("expectation values", "[geometry]") {
  Rng rng(107);
  SECTION("identity operator") {
    for (int trial = 0; trial < 20; ++trial) {
      const StatePoint x = testutil::random_state_point(rng, 2 + trial % 3);
      CHECK(expectation_value(x, Eigen::MatrixXcd::Identity(x.dim(), x.dim())) ==
            Approx(1.0).margin(1e-12));
    }
  }
  SECTION("diagonal operator gives weighted levels") {
    const StatePoint x = testutil::random_state_point(rng, 3);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(3, 3);
    h(0, 0) = 0.3;
    h(1, 1) = -1.2;
    h(2, 2) = 2.0;
    const double expected = 0.3 * x.p[0] - 1.2 * x.p[1] + 2.0 * x.p[2];
    CHECK(expectation_value(x, h) == Approx(expected).margin(1e-12));
  }
  SECTION("sigma_z + g sigma_x matches the closed form") {
    for (int trial = 0; trial < 200; ++trial) {
      const StatePoint x = testutil::random_state_point(rng, 2);
      const double g = rng.uniform(-2.0, 2.0);
      Eigen::MatrixXcd h(2, 2);
      h << 1.0, g, g, -1.0;
      CHECK(expectation_value(x, h) == Approx(qubit_energy(x, g)).margin(1e-12));
    }
  }
  SECTION("non-Hermitian operator rejected") {
    const StatePoint x = testutil::random_state_point(rng, 2);
    Eigen::MatrixXcd h(2, 2);
    h << 1.0, Complex(0.0, 1.0), Complex(0.0, 1.0), -1.0;
    CHECK_THROWS_AS(expectation_value(x, h), std::invalid_argument);
  }
}

TEST_CASE("state point construction", "[geometry]") {
  SECTION("phases wrap into [0, 2*pi)") {
    const StatePoint x = qubit(0.4, 7.0);
    CHECK(x.phi[1] == Approx(7.0 - two_pi));
    CHECK(x.phi[1] >= 0.0);
    CHECK(x.phi[1] < two_pi);
  }
  SECTION("zero-probability components carry zero phase") {
    const StatePoint x = make_state_point((Eigen::VectorXd(3) << 0.5, 0.0, 0.5).finished(),
                                          (Eigen::VectorXd(3) << 0.0, 2.0, 1.0).finished());
    CHECK(x.phi[1] == 0.0);
    CHECK(x.phi[2] == 1.0);
  }
  SECTION("gauge anchor skips empty leading components") {
    const StatePoint x = make_state_point((Eigen::VectorXd(3) << 0.0, 0.6, 0.4).finished(),
                                          (Eigen::VectorXd(3) << 0.0, 1.5, 2.5).finished());
    CHECK(x.phi[1] == 0.0);  // anchor moved to component 1
    CHECK(x.phi[2] == Approx(1.0));
  }
  SECTION("invalid simplex rejected") {
    CHECK_THROWS_AS(make_state_point((Eigen::VectorXd(2) << 0.6, 0.6).finished(),
                                     Eigen::VectorXd::Zero(2)),
                    std::invalid_argument);
  }
}
