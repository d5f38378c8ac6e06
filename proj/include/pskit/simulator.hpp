#pragma once

#include "pskit/ps_core.hpp"

// Realized trajectories, counterfactual branches under common random numbers,
// and Monte Carlo oracles for the dynamic-effect estimands.

namespace pskit {

struct Trajectory {
  std::vector<DataRecord> records;  // t = 1..T
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
};

enum class NoisePolicy { CommonRandomNumbers, FreshDraws };

struct Branch {
  int t = 1;          // intervention time
  int horizon_H = 0;  // records cover h = 0..H
  std::vector<Vec> a_path;  // a_{t:t+s}
  std::vector<DataRecord> records;
};

enum class Estimand { ATE, CATE, FTE, CFTE, Marginal };

enum class ConditioningKind { None, OnFeature, OnHistory, Both };

struct Conditioning {
  ConditioningKind kind = ConditioningKind::None;
  Vec feature;                       // pinned X_t
  std::vector<DataRecord> history;   // pinned D_{t-m:t-1}, oldest first
};

struct EffectSample {
  Estimand estimand = Estimand::ATE;
  int horizon = 0;
  Vec contrast_a;
  Vec contrast_a_prime;
  Vec value;   // dY
  Vec stderr_; // per outcome coordinate
  int n_reps = 0;
};

Trajectory simulate_trajectory(const SystemSpec& spec, std::uint64_t seed,
                               std::uint64_t replication = 0);

// s-potential branch at time t. a_path holds a_{t:t+s}; horizons s < h <= H
// use the assignment mechanism on the branch history. Under
// CommonRandomNumbers the branch reuses the trajectory's noise streams.
Branch simulate_branch(const SystemSpec& spec, const Trajectory& traj, int t,
                       const std::vector<Vec>& a_path, int H,
                       NoisePolicy policy = NoisePolicy::CommonRandomNumbers,
                       std::uint64_t fresh_seed = 0);

struct OracleOptions {
  int n_reps = 1000;
  std::uint64_t seed = 1;
  bool paired = true;  // CRN pairing of the two branches within a replication
  int workers = 1;
};

// Monte Carlo oracle for E[Y_{t,h}(a) - Y_{t,h}(a')] with the requested
// conditioning realized by pinning.
EffectSample oracle_effect(const SystemSpec& spec, Estimand estimand, int t,
                           int h, const Vec& a, const Vec& a_prime,
                           const Conditioning& cond, const OracleOptions& opt);

// Central finite difference [Y(a+d) - Y(a-d)]/(2d) on a scalar bump
// direction, averaged over replications with CRN.
EffectSample marginal_effect(const SystemSpec& spec, int t, int h, const Vec& a,
                             double delta, const OracleOptions& opt);
double default_bump(const Vec& a);

struct ExogeneityReport {
  bool exogenous = true;
  int probes_run = 0;
  double max_abs_deviation = 0.0;
};

// True iff the masked Z = (X, Y) coordinates of the branch are invariant to
// the intervened assignment, over random (t, a, a', seed) probes, all h <= H.
ExogeneityReport check_ps_exogeneity(const SystemSpec& spec,
                                     const std::vector<bool>& z_mask,
                                     int n_probes, int H,
                                     std::uint64_t seed = 7);

}  // namespace pskit
