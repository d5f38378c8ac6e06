#include "pskit/linear_ps.hpp"

#include <cmath>
#include <stdexcept>

namespace pskit::linear {

LinearStructural LinearStructural::zeros(int dX, int dA, int dY, int dU,
                                         int dV, int dW) {
  LinearStructural ls;
  ls.dX = dX;
  ls.dA = dA;
  ls.dY = dY;
  ls.dU = dU;
  ls.dV = dV;
  ls.dW = dW;
  int dD = dX + dA + dY;
  ls.chi1 = Mat::Zero(dX, dD);
  ls.alpha0 = Mat::Zero(dA, dX);
  ls.alpha1 = Mat::Zero(dA, dD);
  ls.Gamma = Mat::Zero(dA, dV);
  ls.Delta = Mat::Zero(dX, dU);
  ls.gamma0X = Mat::Zero(dY, dX);
  ls.gamma0A = Mat::Zero(dY, dA);
  ls.gamma1 = Mat::Zero(dY, dD);
  ls.Omega = Mat::Zero(dY, dW);
  return ls;
}

double spectral_radius(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  // power iteration on a fixed start vector; deterministic
  Vec v = Vec::Ones(m.rows());
  v.normalize();
  double lam = 0.0, prev = -1.0;
  for (int it = 0; it < 10000; ++it) {
    Vec w = m * v;
    double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    lam = n;
    if (std::abs(lam - prev) < 1e-12 * std::max(1.0, lam)) return lam;
    prev = lam;
  }
  // non-convergence (complex dominant pair etc.): fall back to eigenvalues
  Eigen::EigenSolver<Mat> es(m);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

static void check_dims(const LinearStructural& ls) {
  int dD = ls.dD();
  auto want = [&](const Mat& m, int r, int c, const char* name) {
    if (m.rows() != r || m.cols() != c)
      throw std::invalid_argument(std::string("linear block ") + name +
                                  " has wrong shape");
  };
  want(ls.chi1, ls.dX, dD, "chi1");
  want(ls.alpha0, ls.dA, ls.dX, "alpha0");
  want(ls.alpha1, ls.dA, dD, "alpha1");
  want(ls.Gamma, ls.dA, ls.dV, "Gamma");
  want(ls.Delta, ls.dX, ls.dU, "Delta");
  want(ls.gamma0X, ls.dY, ls.dX, "gamma0X");
  want(ls.gamma0A, ls.dY, ls.dA, "gamma0A");
  want(ls.gamma1, ls.dY, dD, "gamma1");
  want(ls.Omega, ls.dY, ls.dW, "Omega");
}

LinearReduced assemble(const LinearStructural& ls) {
  check_dims(ls);
  int dD = ls.dD();
  LinearReduced lr;
  lr.dX = ls.dX;
  lr.dA = ls.dA;
  lr.dY = ls.dY;
  lr.dU = ls.dU;
  lr.dV = ls.dV;
  lr.dW = ls.dW;

  Mat a_row = ls.alpha1 + ls.alpha0 * ls.chi1;
  lr.phi = Mat(dD, dD);
  lr.phi.topRows(ls.dX) = ls.chi1;
  lr.phi.middleRows(ls.dX, ls.dA) = a_row;
  lr.phi.bottomRows(ls.dY) =
      ls.gamma1 + ls.gamma0X * ls.chi1 + ls.gamma0A * a_row;

  lr.B = Mat::Zero(dD, ls.dEps());
  lr.B.block(0, 0, ls.dX, ls.dU) = ls.Delta;
  lr.B.block(ls.dX, 0, ls.dA, ls.dU) = ls.alpha0 * ls.Delta;
  lr.B.block(ls.dX, ls.dU, ls.dA, ls.dV) = ls.Gamma;
  lr.B.block(ls.dX + ls.dA, 0, ls.dY, ls.dU) =
      (ls.gamma0X + ls.gamma0A * ls.alpha0) * ls.Delta;
  lr.B.block(ls.dX + ls.dA, ls.dU, ls.dY, ls.dV) = ls.gamma0A * ls.Gamma;
  lr.B.block(ls.dX + ls.dA, ls.dU + ls.dV, ls.dY, ls.dW) = ls.Omega;

  lr.spectral_radius = spectral_radius(lr.phi);
  lr.stable = lr.spectral_radius < 1.0;
  return lr;
}

Mat assignment_loading(const LinearStructural& ls) {
  Mat load = Mat::Zero(ls.dD(), ls.dA);
  load.middleRows(ls.dX, ls.dA) = Mat::Identity(ls.dA, ls.dA);
  load.bottomRows(ls.dY) = ls.gamma0A;
  return load;
}

Mat intervened_transition(const LinearStructural& ls) {
  Mat tr = Mat::Zero(ls.dD(), ls.dD());
  tr.topRows(ls.dX) = ls.chi1;
  tr.bottomRows(ls.dY) = ls.gamma1 + ls.gamma0X * ls.chi1;
  return tr;
}

Mat intervened_noise_loading(const LinearStructural& ls) {
  Mat b = Mat::Zero(ls.dD(), ls.dEps());
  b.block(0, 0, ls.dX, ls.dU) = ls.Delta;
  b.block(ls.dX + ls.dA, 0, ls.dY, ls.dU) = ls.gamma0X * ls.Delta;
  b.block(ls.dX + ls.dA, ls.dU + ls.dV, ls.dY, ls.dW) = ls.Omega;
  return b;
}

IrfTable irf(const LinearReduced& lr, const Mat& gamma0A, int H) {
  if (H < 0) throw std::invalid_argument("irf: H must be >= 0");
  int dD = int(lr.phi.rows());
  Mat load = Mat::Zero(dD, lr.dA);
  load.middleRows(lr.dX, lr.dA) = Mat::Identity(lr.dA, lr.dA);
  load.bottomRows(lr.dY) = gamma0A;

  IrfTable table;
  table.horizon_H = H;
  table.Psi.reserve(H + 1);
  table.Theta.reserve(H + 1);
  Mat psi = load, theta = lr.B;
  for (int h = 0; h <= H; ++h) {
    table.Psi.push_back(psi);
    table.Theta.push_back(theta);
    if (h < H) {
      psi = lr.phi * psi;
      theta = lr.phi * theta;
    }
  }
  return table;
}

std::vector<Mat> relative_irf(const LinearReduced& lr, const Mat& gamma0A,
                              int H) {
  IrfTable table = irf(lr, gamma0A, H);
  if (lr.dV != lr.dA)
    throw std::invalid_argument("relative_irf: Gamma must be square");
  // assignment rows of Theta_0 in the V columns equal Gamma
  Mat Gamma = table.Theta[0].block(lr.dX, lr.dU, lr.dA, lr.dV);
  Eigen::FullPivLU<Mat> lu(Gamma);
  if (!lu.isInvertible())
    throw std::invalid_argument("relative_irf: singular Gamma");
  Mat Gamma_inv = lu.inverse();

  std::vector<Mat> out;
  out.reserve(H + 1);
  for (int h = 0; h <= H; ++h) {
    Mat rel =
        table.Theta[h].bottomRows(lr.dY).middleCols(lr.dU, lr.dV) * Gamma_inv;
    Mat psi_y = table.Psi[h].bottomRows(lr.dY);
    if ((rel - psi_y).cwiseAbs().maxCoeff() > 1e-12)
      throw std::logic_error("relative_irf: ratio disagrees with Psi rows");
    out.push_back(rel);
  }
  return out;
}

double svma_truncation_error(const LinearReduced& lr, int L) {
  if (L < 0) throw std::invalid_argument("svma_truncation_error: L >= 0");
  double phi_norm = lr.phi.operatorNorm();
  if (phi_norm >= 1.0)
    throw std::invalid_argument("svma_truncation_error: unstable system");
  double c = lr.B.operatorNorm();
  return std::pow(phi_norm, L) * c / (1.0 - phi_norm);
}

SvarForm to_svar(const LinearReduced& lr) {
  Eigen::FullPivLU<Mat> lu(lr.B);
  if (lr.B.rows() != lr.B.cols() || !lu.isInvertible())
    throw std::invalid_argument("to_svar: B must be square invertible");
  SvarForm sf;
  sf.B_tilde = lu.inverse();
  sf.phi_tilde = sf.B_tilde * lr.phi;
  return sf;
}

LinearReduced from_svar(const SvarForm& sf, int dX, int dA, int dY) {
  Eigen::FullPivLU<Mat> lu(sf.B_tilde);
  if (!lu.isInvertible())
    throw std::invalid_argument("from_svar: B_tilde singular");
  LinearReduced lr;
  lr.B = lu.inverse();
  lr.phi = lr.B * sf.phi_tilde;
  lr.dX = dX;
  lr.dA = dA;
  lr.dY = dY;
  lr.spectral_radius = spectral_radius(lr.phi);
  lr.stable = lr.spectral_radius < 1.0;
  return lr;
}

NoiseModel standard_gaussian_noise(const LinearStructural& ls) {
  NoiseModel nm;
  nm.u = DistSpec::gaussian(Vec::Zero(ls.dU), Mat::Identity(ls.dU, ls.dU));
  nm.v = DistSpec::gaussian(Vec::Zero(ls.dV), Mat::Identity(ls.dV, ls.dV));
  nm.w = DistSpec::gaussian(Vec::Zero(ls.dW), Mat::Identity(ls.dW, ls.dW));
  return nm;
}

SystemSpec to_system_spec(const LinearStructural& ls, int horizon_T,
                          NoiseModel noise) {
  check_dims(ls);
  SystemSpec spec;
  spec.spaces.dX = ls.dX;
  spec.spaces.dA = ls.dA;
  spec.spaces.dY = ls.dY;
  spec.spaces.assignment_kind = AssignmentKind::Continuous;
  spec.horizon_T = horizon_T;
  spec.noise = std::move(noise);

  LinearStructural cp = ls;
  int dD = ls.dD();
  spec.sem.order = 1;
  spec.sem.chi = [cp, dD](History h, const Vec& u) -> Vec {
    Vec d = h.empty() ? Vec::Zero(dD) : h.back().stacked();
    return cp.chi1 * d + cp.Delta * u;
  };
  spec.sem.alpha = [cp, dD](History h, const Vec& x, const Vec& v) -> Vec {
    Vec d = h.empty() ? Vec::Zero(dD) : h.back().stacked();
    return cp.alpha1 * d + cp.alpha0 * x + cp.Gamma * v;
  };
  spec.sem.gamma = [cp, dD](History h, const Vec& x, const Vec& a,
                            const Vec& w) -> Vec {
    Vec d = h.empty() ? Vec::Zero(dD) : h.back().stacked();
    return cp.gamma1 * d + cp.gamma0X * x + cp.gamma0A * a + cp.Omega * w;
  };
  return spec;
}

}  // namespace pskit::linear
