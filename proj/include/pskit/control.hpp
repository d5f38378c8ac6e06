#pragma once

#include <functional>
#include <string>

#include "pskit/ps_core.hpp"

// Finite-horizon tabular control: backward-induction policies and value
// tables on a finite potential system (no features, order-1 history), plus
// the causal effect and regret of deviating from the optimal assignment.

namespace pskit::ctrl {

struct StateCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tabular order-1 system: state is (previous outcome atom, previous
// assignment atom); the transition maps it with the current action and a
// noise atom to the next outcome atom.
struct FinitePS {
  std::vector<Vec> actions;
  std::vector<Vec> outcomes;
  std::vector<double> noise_probs;  // exact finite noise law
  std::function<int(int y_prev, int a_prev, int a, int w)> transition;
  int T = 1;
  int init_y = 0;  // pre-sample state
  int init_a = 0;
  std::size_t state_cap = 1000000;
};

void validate_finite_ps(const FinitePS& fps);

struct LossSpec {
  // per_period[t-1](y_prev, a) for t = 1..T; terminal(y) applies to Y_T
  std::vector<Mat> per_period;
  Vec terminal;
};

struct PolicyTable {
  std::vector<Eigen::MatrixXi> action;  // action[t-1](y_prev, a_prev)
  std::vector<Mat> value;               // value[t-1](y_prev, a_prev)
  Vec terminal_value;                   // V_{T+1}(y) = terminal loss
  std::string tie_break = "lowest-atom-index";
};

PolicyTable solve_backward(const FinitePS& fps, const LossSpec& loss);

// Q_t(s, a) = l_t(y, a) + E_w[V_{t+1}(next state)]
double q_value(const FinitePS& fps, const LossSpec& loss,
               const PolicyTable& policy, int t, int y_prev, int a_prev,
               int a);

struct DeviationEffect {
  int t = 1;
  int action = 0;          // deviated a_t
  std::vector<Vec> contrast;  // E[Y_{t,h}(a) - Y_{t,h}(a_hat)], h = 0..T-t
  double regret = 0.0;        // E[J | deviate] - V_t, averaged over states
};

// Deviation at time t to action a, future assignments re-optimized from the
// unchanged value tables; expectations are exact over the policy-induced
// time-t state distribution and all noise paths.
DeviationEffect deviation_effect(const FinitePS& fps, const LossSpec& loss,
                                 const PolicyTable& policy, int t, int a);

// Realized run under the policy for one noise-atom path (drawn by atom index
// from the exact law); used to check that the policy is a degenerate SAM.
struct PolicyRun {
  std::vector<int> y;  // outcome atom per t = 1..T
  std::vector<int> a;  // assignment atom per t = 1..T
};

std::vector<int> draw_noise_path(const FinitePS& fps, std::uint64_t seed,
                                 std::uint64_t replication = 0);
PolicyRun run_policy(const FinitePS& fps, const PolicyTable& policy,
                     const std::vector<int>& noise_path);

// Open-loop brute force: minimum over all |A|^T assignment paths of the
// exact expected loss. Matches the closed-loop value when the transition
// and loss make feedback worthless.
double brute_force_value(const FinitePS& fps, const LossSpec& loss);

}  // namespace pskit::ctrl
