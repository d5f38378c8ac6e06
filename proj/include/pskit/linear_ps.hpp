#pragma once

#include "pskit/ps_core.hpp"

// Exact algebra for the homogeneous linear Markov system: companion matrix
// phi and noise loading B from the structural blocks, impulse responses
// Psi_h (to the assignment) and Theta_h (to the structural shocks), the
// SVAR round trip and the moving-average truncation bound.

namespace pskit::linear {

struct LinearStructural {
  int dX = 0, dA = 1, dY = 1;
  int dU = 0, dV = 1, dW = 1;
  Mat chi1;      // dX x (dX+dA+dY)
  Mat alpha0;    // dA x dX
  Mat alpha1;    // dA x (dX+dA+dY)
  Mat Gamma;     // dA x dV
  Mat Delta;     // dX x dU
  Mat gamma0X;   // dY x dX
  Mat gamma0A;   // dY x dA
  Mat gamma1;    // dY x (dX+dA+dY)
  Mat Omega;     // dY x dW

  int dD() const { return dX + dA + dY; }
  int dEps() const { return dU + dV + dW; }
  // zero blocks of the right shapes; fill what the scenario needs
  static LinearStructural zeros(int dX, int dA, int dY, int dU, int dV,
                                int dW);
};

struct LinearReduced {
  Mat phi;   // dD x dD
  Mat B;     // dD x dEps
  double spectral_radius = 0.0;
  bool stable = false;
  int dX = 0, dA = 1, dY = 1;
  int dU = 0, dV = 1, dW = 1;
};

struct IrfTable {
  int horizon_H = 0;
  std::vector<Mat> Psi;    // (dX+dA+dY) x dA, h = 0..H
  std::vector<Mat> Theta;  // (dX+dA+dY) x dEps, h = 0..H
};

LinearReduced assemble(const LinearStructural& ls);

// Psi_h = phi^h (0; I; gamma0A), Theta_h = phi^h B, by repeated
// multiplication.
IrfTable irf(const LinearReduced& lr, const Mat& gamma0A, int H);

// Outcome-block response normalized by the h=0 assignment response
// (Theta-ratio form); asserts agreement with the Psi outcome rows.
std::vector<Mat> relative_irf(const LinearReduced& lr, const Mat& gamma0A,
                              int H);

// Operator-norm tail bound ||phi||^L * c / (1 - ||phi||) on the truncated
// moving-average representation; requires a stable system.
double svma_truncation_error(const LinearReduced& lr, int L);

struct SvarForm {
  Mat B_tilde;    // B^{-1}
  Mat phi_tilde;  // B^{-1} phi
};
SvarForm to_svar(const LinearReduced& lr);
LinearReduced from_svar(const SvarForm& sf, int dX, int dA, int dY);

// Spectral radius by power iteration, eigenvalue fallback on stagnation.
double spectral_radius(const Mat& m);

// The intervened h=0 transition (alpha rows zeroed), used by the
// multi-period branch recursion.
Mat intervened_transition(const LinearStructural& ls);
Mat assignment_loading(const LinearStructural& ls);  // (0; I; gamma0A)
Mat intervened_noise_loading(const LinearStructural& ls);

// Builds a simulable SystemSpec (order m = 1) whose SEM components evaluate
// the structural equations; noise defaults to standard Gaussian blocks.
SystemSpec to_system_spec(const LinearStructural& ls, int horizon_T,
                          NoiseModel noise);
NoiseModel standard_gaussian_noise(const LinearStructural& ls);

}  // namespace pskit::linear
