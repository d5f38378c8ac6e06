#pragma once

#include <functional>
#include <random>
#include <utility>

#include "pskit/linear_ps.hpp"
#include "pskit/ps_core.hpp"

// Shared builders for small hand-specified systems used across the tests.

namespace testutil {

inline pskit::Vec vec1(double v) {
  pskit::Vec out(1);
  out << v;
  return out;
}

inline pskit::Mat mat1(double v) {
  pskit::Mat out(1, 1);
  out << v;
  return out;
}

// Scalar order-1 system without features: a_t = assign(y_{t-1}, v_t),
// y_t = outcome(y_{t-1}, a_t, w_t).
inline pskit::SystemSpec scalar_spec(
    std::function<double(double, double)> assign,
    std::function<double(double, double, double)> outcome, pskit::DistSpec v,
    pskit::DistSpec w, int T,
    pskit::AssignmentKind kind = pskit::AssignmentKind::Continuous) {
  pskit::SystemSpec spec;
  spec.spaces.dX = 0;
  spec.spaces.dA = 1;
  spec.spaces.dY = 1;
  spec.spaces.assignment_kind = kind;
  spec.noise.u = pskit::DistSpec::degenerate(0);
  spec.noise.v = std::move(v);
  spec.noise.w = std::move(w);
  spec.horizon_T = T;
  spec.sem.order = 1;
  spec.sem.chi = [](pskit::History, const pskit::Vec&) {
    return pskit::Vec(0);
  };
  spec.sem.alpha = [assign](pskit::History h, const pskit::Vec&,
                            const pskit::Vec& v_) {
    double yp = h.empty() ? 0.0 : h.back().y(0);
    return vec1(assign(yp, v_.size() ? v_(0) : 0.0));
  };
  spec.sem.gamma = [outcome](pskit::History h, const pskit::Vec&,
                             const pskit::Vec& a, const pskit::Vec& w_) {
    double yp = h.empty() ? 0.0 : h.back().y(0);
    return vec1(outcome(yp, a(0), w_.size() ? w_(0) : 0.0));
  };
  return spec;
}

inline pskit::DistSpec point_mass(double v) {
  return pskit::DistSpec::discrete({vec1(v)}, vec1(1.0));
}

inline pskit::DistSpec coin(double p1, double lo = 0.0, double hi = 1.0) {
  pskit::Vec probs(2);
  probs << 1.0 - p1, p1;
  return pskit::DistSpec::discrete({vec1(lo), vec1(hi)}, probs);
}

// Random stable homogeneous linear structure. The companion matrix is linear
// in the lag blocks (chi1, alpha1, gamma1) for fixed contemporaneous blocks,
// so rescaling those blocks rescales the spectral radius directly.
inline pskit::linear::LinearStructural random_stable_linear(
    int dX, int dA, int dY, std::mt19937& gen, double target_radius = 0.8) {
  std::uniform_real_distribution<double> d(-0.6, 0.6);
  auto rnd = [&](Eigen::Index r, Eigen::Index c) {
    pskit::Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(gen);
    return m;
  };
  auto ls = pskit::linear::LinearStructural::zeros(dX, dA, dY, dX, dA, dY);
  int dD = dX + dA + dY;
  ls.chi1 = rnd(dX, dD);
  ls.alpha0 = rnd(dA, dX);
  ls.alpha1 = rnd(dA, dD);
  ls.gamma0X = rnd(dY, dX);
  ls.gamma0A = rnd(dY, dA);
  ls.gamma1 = rnd(dY, dD);
  ls.Delta = pskit::Mat::Identity(dX, dX);
  ls.Gamma = pskit::Mat::Identity(dA, dA);
  ls.Omega = pskit::Mat::Identity(dY, dY);

  auto lr = pskit::linear::assemble(ls);
  if (lr.spectral_radius > target_radius) {
    double c = target_radius / lr.spectral_radius;
    ls.chi1 *= c;
    ls.alpha1 *= c;
    ls.gamma1 *= c;
  }
  return ls;
}

}  // namespace testutil
