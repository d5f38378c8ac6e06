#pragma once

#include <functional>
#include <optional>
#include <string>

#include "pskit/simulator.hpp"

// Design-based randomization inference: assignment resampling under a
// composite causal null, outcome imputation, test statistics, rejection
// calibration, and confidence-region inversion over the null parameter.

namespace pskit::design {

struct DegenerateSam : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Homogeneous linear null: g_t = sum_j psi_j (a*_{t-j} - a_{t-j})
//                                + sum_j vartheta_j g_{t-j}
struct NullSpec {
  int Q = 0, P = 0;
  std::vector<Mat> psi;       // Q+1 blocks, each dY x dA
  std::vector<Mat> vartheta;  // P blocks, each dY x dY
  bool is_sharp_null() const;  // theta == 0

  static NullSpec sharp(int dY, int dA, int Q = 0, int P = 0);
};

void validate_null(const NullSpec& null, int dY, int dA);

// g_{1:T} by forward recursion; a_star/a are assignment paths of length T.
std::vector<Vec> null_g(const NullSpec& null, const std::vector<Vec>& a_star,
                        const std::vector<Vec>& a);

// Conditional assignment law; draws A*_t given the imputed history
// (records carry x = observed features, a = A*, y = Y*) and X_t.
struct SamSampler {
  std::function<Vec(const std::vector<DataRecord>& imputed_hist, const Vec& x,
                    rng::Stream&)>
      draw;
};

SamSampler iid_bernoulli_sam(double p1);

struct ResampledPath {
  std::vector<Vec> a_star;  // A*_{1:T}
  std::vector<Vec> y_star;  // Y_t + g_t(A*, A; theta)
  int b = 0;
};

ResampledPath resample_assignments(const Trajectory& observed,
                                   const SamSampler& sam, const NullSpec& null,
                                   std::uint64_t seed, int b);

// Horizon-0 IPW statistic at time t for binary scalar assignment.
double ipw_statistic(const ResampledPath& path, int t, double p_star);

// Stacks diff-in-means horizon contrasts h = 0..H and applies W.
Vec weighted_horizon_statistic(const std::vector<Vec>& a,
                               const std::vector<Vec>& y, const Mat& W, int H);

struct StatisticSpec {
  enum class Kind { WeightedHorizonDiff, Ipw } kind = Kind::WeightedHorizonDiff;
  Mat W;               // WeightedHorizonDiff: k x ((H+1)*dY)
  int H = 0;           // max horizon
  double p_star = 0.5; // Ipw: known assignment probability of atom 1
};

Vec evaluate_statistic(const StatisticSpec& stat, const std::vector<Vec>& a,
                       const std::vector<Vec>& y);

struct TestResult {
  Vec observed;        // T_hat
  Mat null_draws;      // B x k
  Vec l_star;          // T_hat - T*_b (scalar statistics only)
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  double q_lo = 0.0, q_hi = 0.0;  // bracketing quantiles of L* (scalar case)
  int B = 0;
  std::uint64_t seed = 0;
  int resample_retries = 0;
  // Theorem-5-style conditional independence of A*_t and the branch
  // potentials is assumed, not tested.
  bool assumes_conditional_independence = true;
};

TestResult randomization_test(const Trajectory& observed, const SamSampler& sam,
                              const NullSpec& null, const StatisticSpec& stat,
                              int B, double alpha, std::uint64_t seed,
                              int workers = 1);

struct ConfidenceRegion {
  std::vector<NullSpec> grid;
  std::vector<char> accepted;
  std::vector<double> p_values;
  double alpha = 0.05;
};

ConfidenceRegion invert_to_region(const Trajectory& observed,
                                  const SamSampler& sam,
                                  const std::vector<NullSpec>& grid,
                                  const StatisticSpec& stat, int B,
                                  double alpha, std::uint64_t seed,
                                  int workers = 1);

enum class SamFamily { IidEmpirical, LogisticInLagsAndFeatures };

SamSampler fit_sam_sampler(const std::vector<Trajectory>& trajs,
                           SamFamily family, int m = 1);

// Fitted logistic coefficients, exposed for recovery checks.
Vec fit_sam_logistic_coefficients(const std::vector<Trajectory>& trajs, int m);

}  // namespace pskit::design
