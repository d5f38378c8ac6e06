#include "pskit/control.hpp"

#include <cmath>

namespace pskit::ctrl {

namespace {

double check_prob_sum(const std::vector<double>& p) {
  double s = 0;
  for (double v : p) {
    if (v < 0) throw std::invalid_argument("noise probabilities must be >= 0");
    s += v;
  }
  return s;
}

}  // namespace

void validate_finite_ps(const FinitePS& fps) {
  if (fps.actions.empty() || fps.outcomes.empty() || fps.noise_probs.empty())
    throw std::invalid_argument("FinitePS: empty atom set");
  if (!fps.transition) throw std::invalid_argument("FinitePS: no transition");
  if (fps.T < 1) throw std::invalid_argument("FinitePS: T >= 1");
  if (std::abs(check_prob_sum(fps.noise_probs) - 1.0) > 1e-12)
    throw std::invalid_argument("FinitePS: noise probabilities must sum to 1");
  if (fps.outcomes.size() * fps.actions.size() > fps.state_cap)
    throw StateCapExceeded("FinitePS: tabular state count exceeds cap");
  if (fps.init_y < 0 || fps.init_y >= int(fps.outcomes.size()) ||
      fps.init_a < 0 || fps.init_a >= int(fps.actions.size()))
    throw std::invalid_argument("FinitePS: initial state out of range");
}

PolicyTable solve_backward(const FinitePS& fps, const LossSpec& loss) {
  validate_finite_ps(fps);
  int nY = int(fps.outcomes.size());
  int nA = int(fps.actions.size());
  int nW = int(fps.noise_probs.size());
  if (int(loss.per_period.size()) != fps.T)
    throw std::invalid_argument("LossSpec: per-period table count != T");
  for (const Mat& l : loss.per_period)
    if (l.rows() != nY || l.cols() != nA)
      throw std::invalid_argument("LossSpec: per-period table shape");
  if (loss.terminal.size() != nY)
    throw std::invalid_argument("LossSpec: terminal table length");

  PolicyTable pol;
  pol.terminal_value = loss.terminal;
  pol.action.assign(std::size_t(fps.T), Eigen::MatrixXi::Zero(nY, nA));
  pol.value.assign(std::size_t(fps.T), Mat::Zero(nY, nA));

  for (int t = fps.T; t >= 1; --t) {
    Eigen::MatrixXi& act = pol.action[std::size_t(t - 1)];
    Mat& val = pol.value[std::size_t(t - 1)];
    for (int y = 0; y < nY; ++y)
      for (int ap = 0; ap < nA; ++ap) {
        double best = 0;
        int best_a = 0;
        for (int a = 0; a < nA; ++a) {
          double q = loss.per_period[std::size_t(t - 1)](y, a);
          for (int w = 0; w < nW; ++w) {
            int y_next = fps.transition(y, ap, a, w);
            double cont = t == fps.T
                              ? loss.terminal[y_next]
                              : pol.value[std::size_t(t)](y_next, a);
            q += fps.noise_probs[std::size_t(w)] * cont;
          }
          if (a == 0 || q < best) {
            best = q;
            best_a = a;
          }
        }
        act(y, ap) = best_a;
        val(y, ap) = best;
      }
  }
  return pol;
}

double q_value(const FinitePS& fps, const LossSpec& loss,
               const PolicyTable& policy, int t, int y_prev, int a_prev,
               int a) {
  int nW = int(fps.noise_probs.size());
  double q = loss.per_period[std::size_t(t - 1)](y_prev, a);
  for (int w = 0; w < nW; ++w) {
    int y_next = fps.transition(y_prev, a_prev, a, w);
    double cont = t == fps.T ? policy.terminal_value[y_next]
                             : policy.value[std::size_t(t)](y_next, a);
    q += fps.noise_probs[std::size_t(w)] * cont;
  }
  return q;
}

namespace {

// distribution over tabular states (y_prev, a_prev), flattened y * nA + a
using StateDist = Vec;

StateDist initial_dist(const FinitePS& fps) {
  int nA = int(fps.actions.size());
  StateDist d = Vec::Zero(Eigen::Index(fps.outcomes.size()) * nA);
  d[Eigen::Index(fps.init_y) * nA + fps.init_a] = 1.0;
  return d;
}

// one policy step: propagate the state distribution and accumulate the
// expected outcome at this time; forced >= 0 overrides the policy action
StateDist step_dist(const FinitePS& fps, const PolicyTable& policy, int t,
                    const StateDist& d, int forced, Vec* e_outcome) {
  int nY = int(fps.outcomes.size());
  int nA = int(fps.actions.size());
  int nW = int(fps.noise_probs.size());
  StateDist next = Vec::Zero(d.size());
  if (e_outcome) e_outcome->setZero();
  for (int y = 0; y < nY; ++y)
    for (int ap = 0; ap < nA; ++ap) {
      double p = d[Eigen::Index(y) * nA + ap];
      if (p == 0.0) continue;
      int a = forced >= 0 ? forced : policy.action[std::size_t(t - 1)](y, ap);
      for (int w = 0; w < nW; ++w) {
        int y_next = fps.transition(y, ap, a, w);
        double pw = p * fps.noise_probs[std::size_t(w)];
        next[Eigen::Index(y_next) * nA + a] += pw;
        if (e_outcome) *e_outcome += pw * fps.outcomes[std::size_t(y_next)];
      }
    }
  return next;
}

}  // namespace

DeviationEffect deviation_effect(const FinitePS& fps, const LossSpec& loss,
                                 const PolicyTable& policy, int t, int a) {
  validate_finite_ps(fps);
  if (t < 1 || t > fps.T)
    throw std::out_of_range("deviation_effect: t out of range");
  if (a < 0 || a >= int(fps.actions.size()))
    throw DomainViolation("deviation_effect: action out of domain");
  int nY = int(fps.outcomes.size());
  int nA = int(fps.actions.size());
  int dY = int(fps.outcomes.front().size());

  // policy-induced state distribution entering time t
  StateDist d = initial_dist(fps);
  for (int s = 1; s < t; ++s) d = step_dist(fps, policy, s, d, -1, nullptr);

  DeviationEffect out;
  out.t = t;
  out.action = a;
  for (int y = 0; y < nY; ++y)
    for (int ap = 0; ap < nA; ++ap) {
      double p = d[Eigen::Index(y) * nA + ap];
      if (p == 0.0) continue;
      out.regret += p * (q_value(fps, loss, policy, t, y, ap, a) -
                         policy.value[std::size_t(t - 1)](y, ap));
    }

  // per-horizon outcome contrast between the deviated and optimal branches;
  // both re-optimize from t+1 using the same value tables
  StateDist dev = d, opt = d;
  Vec e_dev(dY), e_opt(dY);
  for (int h = 0; t + h <= fps.T; ++h) {
    dev = step_dist(fps, policy, t + h, dev, h == 0 ? a : -1, &e_dev);
    opt = step_dist(fps, policy, t + h, opt, -1, &e_opt);
    out.contrast.push_back(e_dev - e_opt);
  }
  return out;
}

std::vector<int> draw_noise_path(const FinitePS& fps, std::uint64_t seed,
                                 std::uint64_t replication) {
  std::vector<int> path(std::size_t(fps.T));
  for (int t = 1; t <= fps.T; ++t) {
    rng::Stream s(seed, replication, std::uint64_t(t), 2);
    double u = s.uniform(), acc = 0;
    int w = 0;
    for (std::size_t i = 0; i < fps.noise_probs.size(); ++i) {
      acc += fps.noise_probs[i];
      if (u <= acc) {
        w = int(i);
        break;
      }
      w = int(i);
    }
    path[std::size_t(t - 1)] = w;
  }
  return path;
}

PolicyRun run_policy(const FinitePS& fps, const PolicyTable& policy,
                     const std::vector<int>& noise_path) {
  PolicyRun run;
  int y = fps.init_y, ap = fps.init_a;
  for (int t = 1; t <= fps.T; ++t) {
    int a = policy.action[std::size_t(t - 1)](y, ap);
    y = fps.transition(y, ap, a, noise_path[std::size_t(t - 1)]);
    ap = a;
    run.y.push_back(y);
    run.a.push_back(a);
  }
  return run;
}

double brute_force_value(const FinitePS& fps, const LossSpec& loss) {
  validate_finite_ps(fps);
  int nY = int(fps.outcomes.size());
  int nA = int(fps.actions.size());
  int nW = int(fps.noise_probs.size());
  std::size_t n_paths = 1;
  for (int t = 0; t < fps.T; ++t) {
    n_paths *= std::size_t(nA);
    if (n_paths > 1u << 20)
      throw std::invalid_argument("brute_force_value: path space too large");
  }

  double best = 0;
  for (std::size_t code = 0; code < n_paths; ++code) {
    std::vector<int> a_path(std::size_t(fps.T));
    std::size_t c = code;
    for (int t = 0; t < fps.T; ++t) {
      a_path[std::size_t(t)] = int(c % std::size_t(nA));
      c /= std::size_t(nA);
    }
    StateDist d = initial_dist(fps);
    double total = 0;
    for (int t = 1; t <= fps.T; ++t) {
      int a = a_path[std::size_t(t - 1)];
      StateDist next = Vec::Zero(d.size());
      for (int y = 0; y < nY; ++y)
        for (int ap = 0; ap < nA; ++ap) {
          double p = d[Eigen::Index(y) * nA + ap];
          if (p == 0.0) continue;
          total += p * loss.per_period[std::size_t(t - 1)](y, a);
          for (int w = 0; w < nW; ++w) {
            int y_next = fps.transition(y, ap, a, w);
            next[Eigen::Index(y_next) * nA + a] +=
                p * fps.noise_probs[std::size_t(w)];
          }
        }
      d = next;
    }
    for (int y = 0; y < nY; ++y)
      for (int ap = 0; ap < nA; ++ap)
        total += d[Eigen::Index(y) * nA + ap] * loss.terminal[y];
    if (code == 0 || total < best) best = total;
  }
  return best;
}

}  // namespace pskit::ctrl
