#pragma once

#include <functional>
#include <string>

#include "pskit/simulator.hpp"

// Data-facing estimators over pooled trajectory panels: difference in means,
// (local) linear projections with HAC errors, conditional projections, kernel
// regression, IV-Wald ratios, AIPW, and the proxy-attenuation check.

namespace pskit::est {

struct SingularDesign : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyCell : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct WeakFirstStage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Panel

struct Panel {
  int dX = 0, dA = 1, dY = 1;
  int m = 0;  // history window length per row
  std::vector<int> horizons;
  Mat X;                    // n x dX
  Mat A;                    // n x dA
  std::vector<Mat> Ylead;   // one n x dY block per horizon
  Mat Hist;                 // n x (m*(dX+dA+dY)), oldest block first
  std::vector<int> t_index;
  std::vector<int> cluster;  // source replication per row
  int dropped_rows = 0;
  int n_clusters = 1;

  Eigen::Index n() const { return A.rows(); }
  int horizon_slot(int h) const;
  const Mat& y_at(int h) const { return Ylead[std::size_t(horizon_slot(h))]; }
  // last lagged assignment / outcome of the history window
  Vec last_assignment(Eigen::Index row) const;
  Vec last_outcome(Eigen::Index row) const;
};

Panel build_panel(const std::vector<Trajectory>& trajs,
                  const std::vector<int>& horizons, int m);

struct EffectEstimate {
  Estimand estimand = Estimand::ATE;
  int horizon = 0;
  Vec contrast_a, contrast_a_prime;
  Vec point;
  Vec se;
  std::string method;
  Eigen::Index n_obs = 0;
};

// ---------------------------------------------------------------------------
// Variance machinery

struct HacOptions {
  // Bartlett truncation lag; -1 picks h + ceil(T^(1/3)). Panels pooled from
  // several replications use the replication-cluster variance instead.
  int lag = -1;
};

int default_hac_lag(int h, Eigen::Index n);
// Bartlett long-run variance of a scalar score series.
double hac_lrv(std::span<const double> g, int lag);
// Bartlett long-run covariance of a k-dim score series (rows = time).
Mat hac_lrv(const Mat& g, int lag);

// ---------------------------------------------------------------------------
// Estimators

EffectEstimate diff_in_means(const Panel& p, int h, const Vec& a,
                             const Vec& a_prime, HacOptions hac = {});

enum class Residualize { Joint, FWL };

struct ProjectionFit {
  int horizon = 0;
  Vec kappa;  // dY
  Mat beta;   // dY x dA
  Mat delta;  // dY x dX (empty when features excluded)
  Mat beta_se;  // dY x dA
  std::vector<Mat> beta_cov;  // per outcome coordinate, dA x dA
  std::string cov_method;
  Eigen::Index n_obs = 0;
};

ProjectionFit lp_fit(const Panel& p, int h, bool include_features,
                     Residualize mode, HacOptions hac = {});

struct ClpFit {
  Vec kappa;  // dY
  Mat beta;   // dY x dX
  Eigen::Index n_obs = 0;
};

ClpFit clp_fit(const Panel& p, int h, const Vec& atom);

// ---------------------------------------------------------------------------
// Kernel regression

enum class KernelConditioning { AOnly, AX, AXHistory };
enum class KernelKind { DiffInMeans, NadarayaWatson, LocalLinear };

struct BandwidthSpec {
  double value = -1.0;  // <= 0: per-dimension 1.06 sigma n^(-1/5)
};

struct RegressionFit {
  int horizon = 0;
  KernelConditioning cond = KernelConditioning::AOnly;
  KernelKind kind = KernelKind::NadarayaWatson;
  // mu(a, x, hist); unused conditioning slots may be empty
  std::function<Vec(const Vec&, const Vec&, const Vec&)> mu;
};

RegressionFit kernel_mu(const Panel& p, int h, KernelConditioning cond,
                        KernelKind kind, BandwidthSpec bw = {});

// Plug-in ATE: average of mu(a, .) - mu(a', .) over the empirical law of the
// conditioning set.
EffectEstimate plug_in_ate(const Panel& p, const RegressionFit& fit, int h,
                           const Vec& a, const Vec& a_prime);

// ---------------------------------------------------------------------------
// Propensity and AIPW

struct PropensityModel {
  std::function<double(const Vec& atom, const Vec& x, const Vec& hist)> prob;
  double clip_eps = 0.01;
  double clipped(const Vec& atom, const Vec& x, const Vec& hist) const;
};

PropensityModel empirical_frequency(const Panel& p);
// Logistic P(A = 1 | 1, X) for binary assignment, Newton-fitted.
PropensityModel logistic_on_features(const Panel& p);

EffectEstimate aipw_ate(const Panel& p, int h, const Vec& a,
                        const Vec& a_prime, const RegressionFit& outcome,
                        const PropensityModel& propensity);

// ---------------------------------------------------------------------------
// IV-Wald

struct IvOptions {
  double relevance_floor = 0.01;
  // history coarsening into finite cells; default: last assignment atom and
  // sign of last outcome (a declared approximation to full-history
  // conditioning)
  std::function<int(const Panel&, Eigen::Index row)> coarsen;
};

EffectEstimate iv_wald(const Panel& p, int h, IvOptions opt = {});

// ---------------------------------------------------------------------------
// Proxy attenuation

struct ProxyScenario {
  double intercept = 0.0;   // proxy intercept a
  double slope_B = 1.0;     // proxy loading B
  double var_astar = 1.0;   // Var(A*)
  double var_vbar = 1.0;    // Var(V_bar)
  double beta_true = 2.0;   // outcome loading on A*
  double outcome_noise_sd = 1.0;
  int T = 10000;
};

struct AttenuationReport {
  double beta_on_true = 0.0;
  double beta_on_proxy = 0.0;
  double measured_factor = 0.0;
  double predicted_factor = 0.0;
  double factor_se = 0.0;
};

AttenuationReport attenuation_check(const ProxyScenario& sc, int h,
                                    std::uint64_t seed);

}  // namespace pskit::est
