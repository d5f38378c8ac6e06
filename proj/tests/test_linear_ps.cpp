#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pskit/linear_ps.hpp"

using namespace pskit;
using namespace pskit::linear;

namespace {

// scalar no-feature system: a_t = Gamma v_t, y_t = rho y_{t-1} + g0a a_t + w_t
LinearStructural scalar_nofeature(double rho, double g0a, double Gamma = 1.0) {
  auto ls = LinearStructural::zeros(0, 1, 1, 0, 1, 1);
  ls.gamma0A(0, 0) = g0a;
  ls.gamma1(0, 1) = rho;  // lag block over (a, y); y is the second coordinate
  ls.Gamma(0, 0) = Gamma;
  ls.Omega(0, 0) = 1.0;
  return ls;
}

}  // namespace

TEST_CASE("companion matrix of the scalar no-feature system") {
  auto lr = assemble(scalar_nofeature(0.5, 2.0));
  REQUIRE(lr.phi.rows() == 2);
  CHECK(lr.phi(0, 0) == 0.0);
  CHECK(lr.phi(0, 1) == 0.0);
  CHECK(lr.phi(1, 0) == 0.0);
  CHECK(lr.phi(1, 1) == 0.5);
  CHECK(lr.spectral_radius == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(lr.stable);

  // noise loading: a-row picks up Gamma, y-row picks up gamma0A * Gamma
  REQUIRE(lr.B.rows() == 2);
  REQUIRE(lr.B.cols() == 2);  // (V, W)
  CHECK(lr.B(0, 0) == 1.0);
  CHECK(lr.B(0, 1) == 0.0);
  CHECK(lr.B(1, 0) == 2.0);
  CHECK(lr.B(1, 1) == 1.0);
}

TEST_CASE("unit-root system is flagged unstable") {
  auto lr = assemble(scalar_nofeature(1.1, 1.0));
  CHECK(lr.spectral_radius == doctest::Approx(1.1).epsilon(1e-8));
  CHECK_FALSE(lr.stable);
}

TEST_CASE("scalar assignment IRF is gamma0A * rho^h") {
  auto ls = scalar_nofeature(0.5, 2.0);
  auto lr = assemble(ls);
  auto tab = irf(lr, ls.gamma0A, 4);
  REQUIRE(tab.Psi.size() == 5);
  // outcome row of Psi_h: 2, 1, 0.5, 0.25, 0.125
  double expect = 2.0;
  for (int h = 0; h <= 4; ++h) {
    CHECK(tab.Psi[std::size_t(h)](1, 0) ==
          doctest::Approx(expect).epsilon(1e-14));
    // assignment row responds only at h = 0
    CHECK(tab.Psi[std::size_t(h)](0, 0) == (h == 0 ? 1.0 : 0.0));
    expect *= 0.5;
  }
  // H = 0 table has exactly the impact response
  auto tab0 = irf(lr, ls.gamma0A, 0);
  CHECK(tab0.Psi.size() == 1);
  CHECK(tab0.Psi[0](1, 0) == 2.0);
}

TEST_CASE("assignment-shock column of Theta equals Psi when Gamma = I") {
  std::mt19937 gen(31);
  auto ls = testutil::random_stable_linear(2, 1, 1, gen);
  auto lr = assemble(ls);
  auto tab = irf(lr, ls.gamma0A, 20);
  int dU = ls.dU;
  for (int h = 0; h <= 20; ++h) {
    const Mat& theta = tab.Theta[std::size_t(h)];
    const Mat& psi = tab.Psi[std::size_t(h)];
    // V-shock columns of Theta against Psi * Gamma (here Gamma = I)
    CHECK((theta.middleCols(dU, ls.dV) - psi).lpNorm<Eigen::Infinity>() <=
          1e-12);
  }
}

TEST_CASE("impact responses carry the structural loadings") {
  auto ls = scalar_nofeature(0.0, 1.0, 2.0);
  auto lr = assemble(ls);
  auto tab = irf(lr, ls.gamma0A, 1);
  // Theta_0: assignment row, V column = Gamma
  CHECK(tab.Theta[0](0, 0) == 2.0);
  // outcome row, V column = gamma0A * Gamma
  CHECK(tab.Theta[0](1, 0) == 2.0);
  // relative IRF normalizes the h=0 assignment response away
  auto rel = relative_irf(lr, ls.gamma0A, 2);
  CHECK(rel[0](0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rel[1](0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("relative IRF agrees with the Psi outcome rows") {
  std::mt19937 gen(17);
  auto ls = testutil::random_stable_linear(1, 1, 2, gen);
  auto lr = assemble(ls);
  auto tab = irf(lr, ls.gamma0A, 8);
  auto rel = relative_irf(lr, ls.gamma0A, 8);
  for (int h = 0; h <= 8; ++h) {
    Mat psi_y = tab.Psi[std::size_t(h)].bottomRows(ls.dY);
    CHECK((rel[std::size_t(h)] - psi_y).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("Psi satisfies the companion recursion exactly") {
  std::mt19937 gen(47);
  auto ls = testutil::random_stable_linear(2, 2, 2, gen);
  auto lr = assemble(ls);
  auto tab = irf(lr, ls.gamma0A, 12);
  for (int h = 1; h <= 12; ++h) {
    Mat lhs = tab.Psi[std::size_t(h)];
    Mat rhs = lr.phi * tab.Psi[std::size_t(h - 1)];
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("SVMA truncation bound decays geometrically in the norm") {
  auto lr = assemble(scalar_nofeature(0.5, 2.0));
  double b0 = svma_truncation_error(lr, 0);
  double b10 = svma_truncation_error(lr, 10);
  CHECK(b0 > 0.0);
  CHECK(b10 / b0 == doctest::Approx(std::pow(0.5, 10)).epsilon(1e-10));

  // near-zero dynamics: the tail past L = 1 is essentially gone
  auto lr0 = assemble(scalar_nofeature(1e-12, 1.0));
  CHECK(svma_truncation_error(lr0, 1) <= 1e-10);
}

TEST_CASE("SVMA bound rejects unstable systems") {
  auto lr = assemble(scalar_nofeature(1.1, 1.0));
  CHECK_THROWS(svma_truncation_error(lr, 5));
}

TEST_CASE("SVAR round trip restores phi and B") {
  std::mt19937 gen(53);
  for (int rep = 0; rep < 20; ++rep) {
    auto ls = testutil::random_stable_linear(1, 1, 1, gen);
    auto lr = assemble(ls);
    auto sf = to_svar(lr);
    auto back = from_svar(sf, ls.dX, ls.dA, ls.dY);
    CHECK((back.phi - lr.phi).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((back.B - lr.B).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("spectral radius agrees with known eigenvalues") {
  Mat m(2, 2);
  m << 0.0, 1.0, -0.25, 1.0;  // eigenvalues 0.5, 0.5
  CHECK(spectral_radius(m) == doctest::Approx(0.5).epsilon(1e-6));
  Mat z = Mat::Zero(3, 3);
  CHECK(spectral_radius(z) == doctest::Approx(0.0).epsilon(1e-12));
}
