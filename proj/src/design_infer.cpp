#include "pskit/design_infer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "pskit/estimators.hpp"
#include "pskit/parallel.hpp"

namespace pskit::design {

namespace {

constexpr int kSamComponent = 5;
constexpr std::uint64_t kRetryStride = 1000003;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sample_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  auto idx = std::size_t(std::ceil(p * double(v.size())));
  idx = std::min(std::max<std::size_t>(idx, 1), v.size());
  return v[idx - 1];
}

}  // namespace

bool NullSpec::is_sharp_null() const {
  for (const Mat& m : psi)
    if (m.size() && m.cwiseAbs().maxCoeff() != 0.0) return false;
  for (const Mat& m : vartheta)
    if (m.size() && m.cwiseAbs().maxCoeff() != 0.0) return false;
  return true;
}

NullSpec NullSpec::sharp(int dY, int dA, int Q, int P) {
  NullSpec n;
  n.Q = Q;
  n.P = P;
  n.psi.assign(std::size_t(Q + 1), Mat::Zero(dY, dA));
  n.vartheta.assign(std::size_t(P), Mat::Zero(dY, dY));
  return n;
}

void validate_null(const NullSpec& null, int dY, int dA) {
  if (int(null.psi.size()) != null.Q + 1)
    throw std::invalid_argument("null: psi must hold Q+1 blocks");
  if (int(null.vartheta.size()) != null.P)
    throw std::invalid_argument("null: vartheta must hold P blocks");
  for (const Mat& m : null.psi)
    if (m.rows() != dY || m.cols() != dA)
      throw std::invalid_argument("null: psi block dims");
  for (const Mat& m : null.vartheta)
    if (m.rows() != dY || m.cols() != dY)
      throw std::invalid_argument("null: vartheta block dims");
}

std::vector<Vec> null_g(const NullSpec& null, const std::vector<Vec>& a_star,
                        const std::vector<Vec>& a) {
  if (a_star.size() != a.size())
    throw std::invalid_argument("null_g: path length mismatch");
  int T = int(a.size());
  std::vector<Vec> g{std::size_t(T)};
  int dY = int(null.psi.at(0).rows());
  for (int t = 1; t <= T; ++t) {
    Vec gt = Vec::Zero(dY);
    for (int j = 0; j <= null.Q && j < t; ++j)
      gt += null.psi[std::size_t(j)] *
            (a_star[std::size_t(t - 1 - j)] - a[std::size_t(t - 1 - j)]);
    for (int j = 1; j <= null.P && j < t; ++j)
      gt += null.vartheta[std::size_t(j - 1)] * g[std::size_t(t - 1 - j)];
    g[std::size_t(t - 1)] = gt;
  }
  return g;
}

SamSampler iid_bernoulli_sam(double p1) {
  if (p1 <= 0.0 || p1 >= 1.0)
    throw std::invalid_argument("iid_bernoulli_sam: p in (0,1)");
  SamSampler s;
  s.draw = [p1](const std::vector<DataRecord>&, const Vec&, rng::Stream& st) {
    return Vec::Constant(1, st.uniform() < p1 ? 1.0 : 0.0);
  };
  return s;
}

ResampledPath resample_assignments(const Trajectory& observed,
                                   const SamSampler& sam, const NullSpec& null,
                                   std::uint64_t seed, int b) {
  int T = int(observed.records.size());
  if (T == 0) throw std::invalid_argument("resample_assignments: empty data");
  int dY = int(observed.records.front().y.size());
  int dA = int(observed.records.front().a.size());
  validate_null(null, dY, dA);

  ResampledPath path;
  path.b = b;
  path.a_star.reserve(std::size_t(T));
  path.y_star.reserve(std::size_t(T));
  std::vector<DataRecord> imputed;
  std::vector<Vec> g{std::size_t(T)};

  for (int t = 1; t <= T; ++t) {
    const DataRecord& obs = observed.records[std::size_t(t - 1)];
    rng::Stream stream(seed, std::uint64_t(b), std::uint64_t(t),
                       kSamComponent);
    Vec a_star = sam.draw(imputed, obs.x, stream);
    if (a_star.size() != dA)
      throw DomainViolation("resample_assignments: sampler dimension");
    Vec gt = Vec::Zero(dY);
    for (int j = 0; j <= null.Q && j < t; ++j) {
      const Vec& as = j == 0 ? a_star : path.a_star[std::size_t(t - 1 - j)];
      gt += null.psi[std::size_t(j)] *
            (as - observed.records[std::size_t(t - 1 - j)].a);
    }
    for (int j = 1; j <= null.P && j < t; ++j)
      gt += null.vartheta[std::size_t(j - 1)] * g[std::size_t(t - 1 - j)];
    g[std::size_t(t - 1)] = gt;

    DataRecord rec;
    rec.t = t;
    rec.x = obs.x;
    rec.a = a_star;
    rec.y = obs.y + gt;
    imputed.push_back(rec);
    path.a_star.push_back(a_star);
    path.y_star.push_back(rec.y);
  }
  return path;
}

double ipw_statistic(const ResampledPath& path, int t, double p_star) {
  if (p_star <= 0.0 || p_star >= 1.0)
    throw std::invalid_argument("ipw_statistic: pStar in (0,1)");
  if (t < 1 || t > int(path.a_star.size()))
    throw std::out_of_range("ipw_statistic: t");
  double a = path.a_star[std::size_t(t - 1)][0];
  double y = path.y_star[std::size_t(t - 1)][0];
  return a == 1.0 ? y / p_star : -y / (1.0 - p_star);
}

Vec weighted_horizon_statistic(const std::vector<Vec>& a,
                               const std::vector<Vec>& y, const Mat& W,
                               int H) {
  int T = int(a.size());
  if (T - H < 1)
    throw std::invalid_argument("weighted_horizon_statistic: H too large");
  int dY = int(y.front().size());
  Vec stacked((H + 1) * dY);
  for (int h = 0; h <= H; ++h) {
    Vec s1 = Vec::Zero(dY), s0 = Vec::Zero(dY);
    Eigen::Index n1 = 0, n0 = 0;
    for (int t = 1; t + h <= T; ++t) {
      if (a[std::size_t(t - 1)][0] == 1.0) {
        s1 += y[std::size_t(t - 1 + h)];
        ++n1;
      } else {
        s0 += y[std::size_t(t - 1 + h)];
        ++n0;
      }
    }
    if (n1 == 0 || n0 == 0)
      throw est::EmptyCell("weighted_horizon_statistic: empty cell");
    stacked.segment(h * dY, dY) = s1 / double(n1) - s0 / double(n0);
  }
  if (W.size() == 0) return stacked;
  if (W.cols() != stacked.size())
    throw std::invalid_argument("weighted_horizon_statistic: W shape");
  return W * stacked;
}

Vec evaluate_statistic(const StatisticSpec& stat, const std::vector<Vec>& a,
                       const std::vector<Vec>& y) {
  if (stat.kind == StatisticSpec::Kind::WeightedHorizonDiff)
    return weighted_horizon_statistic(a, y, stat.W, stat.H);
  // time-averaged IPW statistic (each term has the same expectation)
  int T = int(a.size());
  double s = 0;
  for (int t = 1; t <= T; ++t) {
    double at = a[std::size_t(t - 1)][0];
    double yt = y[std::size_t(t - 1)][0];
    s += at == 1.0 ? yt / stat.p_star : -yt / (1.0 - stat.p_star);
  }
  return Vec::Constant(1, s / double(T));
}

TestResult randomization_test(const Trajectory& observed, const SamSampler& sam,
                              const NullSpec& null, const StatisticSpec& stat,
                              int B, double alpha, std::uint64_t seed,
                              int workers) {
  if (B < 100) throw std::invalid_argument("randomization_test: B >= 100");
  if (alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("randomization_test: alpha in (0,1)");

  std::vector<Vec> a_obs, y_obs;
  for (const DataRecord& r : observed.records) {
    a_obs.push_back(r.a);
    y_obs.push_back(r.y);
  }
  TestResult res;
  res.observed = evaluate_statistic(stat, a_obs, y_obs);
  res.alpha = alpha;
  res.B = B;
  res.seed = seed;
  Eigen::Index k = res.observed.size();
  res.null_draws = Mat(B, k);
  std::vector<int> retries(std::size_t(B), 0);

  parallel_for(std::size_t(B), workers, [&](std::size_t b) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 50)
        throw est::EmptyCell("randomization_test: persistent empty cells");
      int b_eff = int(b + std::size_t(attempt) * kRetryStride);
      try {
        ResampledPath path =
            resample_assignments(observed, sam, null, seed, b_eff);
        res.null_draws.row(Eigen::Index(b)) =
            evaluate_statistic(stat, path.a_star, path.y_star).transpose();
        retries[b] = attempt;
        break;
      } catch (const est::EmptyCell&) {
        continue;
      }
    }
  });
  for (int r : retries) res.resample_retries += r;

  if (k == 1) {
    double t_hat = res.observed[0];
    std::vector<double> tstar(std::size_t(B), 0.0), lstar(std::size_t(B), 0.0);
    res.l_star = Vec(B);
    for (int b = 0; b < B; ++b) {
      tstar[std::size_t(b)] = res.null_draws(b, 0);
      lstar[std::size_t(b)] = t_hat - tstar[std::size_t(b)];
      res.l_star[b] = lstar[std::size_t(b)];
    }
    res.q_lo = sample_quantile(lstar, alpha / 2.0);
    res.q_hi = sample_quantile(lstar, 1.0 - alpha / 2.0);
    res.reject = !(res.q_lo <= 0.0 && 0.0 <= res.q_hi);
    double med = median_of(tstar);
    int ge = 0;
    for (double t : tstar)
      if (std::abs(t - med) >= std::abs(t_hat - med)) ++ge;
    res.p_value = double(1 + ge) / double(B + 1);
    return res;
  }

  // vector statistic: max-abs after studentizing by the componentwise MAD
  Vec med(k), mad(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> col(std::size_t(B), 0.0);
    for (int b = 0; b < B; ++b) col[std::size_t(b)] = res.null_draws(b, j);
    med[j] = median_of(col);
    for (double& v : col) v = std::abs(v - med[j]);
    mad[j] = median_of(col);
    if (mad[j] == 0.0) mad[j] = 1.0;
  }
  auto max_stud = [&](const Vec& v) {
    double s = 0;
    for (Eigen::Index j = 0; j < k; ++j)
      s = std::max(s, std::abs(v[j] - med[j]) / mad[j]);
    return s;
  };
  double s_hat = max_stud(res.observed);
  std::vector<double> s_star(std::size_t(B), 0.0);
  int ge = 0;
  for (int b = 0; b < B; ++b) {
    s_star[std::size_t(b)] = max_stud(res.null_draws.row(b).transpose());
    if (s_star[std::size_t(b)] >= s_hat) ++ge;
  }
  res.p_value = double(1 + ge) / double(B + 1);
  res.reject = res.p_value <= alpha;
  return res;
}

ConfidenceRegion invert_to_region(const Trajectory& observed,
                                  const SamSampler& sam,
                                  const std::vector<NullSpec>& grid,
                                  const StatisticSpec& stat, int B,
                                  double alpha, std::uint64_t seed,
                                  int workers) {
  if (grid.empty()) throw std::invalid_argument("invert_to_region: empty grid");
  ConfidenceRegion region;
  region.grid = grid;
  region.alpha = alpha;
  for (const NullSpec& null : grid) {
    // shared base seed gives common draws across the grid
    TestResult tr =
        randomization_test(observed, sam, null, stat, B, alpha, seed, workers);
    region.accepted.push_back(!tr.reject);
    region.p_values.push_back(tr.p_value);
  }
  return region;
}

namespace {

struct LogisticSamFit {
  Vec theta;
  int m = 1;
  int dX = 0, dA = 1, dY = 1;
};

Vec logistic_features(const LogisticSamFit& fit,
                      const std::vector<DataRecord>& hist, const Vec& x) {
  int dD = fit.dX + fit.dA + fit.dY;
  Vec z = Vec::Zero(1 + fit.dX + fit.m * dD);
  z[0] = 1.0;
  z.segment(1, fit.dX) = x;
  int have = int(hist.size());
  for (int j = 0; j < fit.m; ++j) {
    int idx = have - fit.m + j;  // oldest-first within the window
    Eigen::Index off = 1 + fit.dX + Eigen::Index(j) * dD;
    if (idx < 0) continue;  // zero-padded pre-sample
    const DataRecord& r = hist[std::size_t(idx)];
    z.segment(off, fit.dX) = r.x;
    z.segment(off + fit.dX, fit.dA) = r.a;
    z.segment(off + fit.dX + fit.dA, fit.dY) = r.y;
  }
  return z;
}

LogisticSamFit fit_logistic_sam(const std::vector<Trajectory>& trajs, int m) {
  LogisticSamFit fit;
  fit.m = m;
  const auto& first = trajs.front().records.front();
  fit.dX = int(first.x.size());
  fit.dA = int(first.a.size());
  fit.dY = int(first.y.size());
  if (fit.dA != 1)
    throw std::invalid_argument("logistic SAM: scalar binary assignment only");

  std::vector<Vec> rows;
  std::vector<double> labels;
  for (const Trajectory& tr : trajs) {
    std::vector<DataRecord> hist;
    for (const DataRecord& r : tr.records) {
      rows.push_back(logistic_features(fit, hist, r.x));
      labels.push_back(r.a[0]);
      hist.push_back(r);
    }
  }
  bool any0 = false, any1 = false;
  for (double l : labels) (l == 1.0 ? any1 : any0) = true;
  if (!any0 || !any1)
    throw DegenerateSam("logistic SAM: assignment has no variation");

  Eigen::Index n = Eigen::Index(rows.size()), k = rows.front().size();
  Mat Z(n, k);
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Z.row(i) = rows[std::size_t(i)].transpose();
    y[i] = labels[std::size_t(i)];
  }
  Vec theta = Vec::Zero(k);
  for (int it = 0; it < 100; ++it) {
    Vec eta = Z * theta;
    Vec mu = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    Vec w = (mu.array() * (1.0 - mu.array())).cwiseMax(1e-10).matrix();
    Mat hess = Z.transpose() * w.asDiagonal() * Z;
    hess.diagonal().array() += 1e-10;
    Vec step = hess.ldlt().solve(Z.transpose() * (y - mu));
    theta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  fit.theta = theta;
  return fit;
}

}  // namespace

Vec fit_sam_logistic_coefficients(const std::vector<Trajectory>& trajs,
                                  int m) {
  return fit_logistic_sam(trajs, m).theta;
}

SamSampler fit_sam_sampler(const std::vector<Trajectory>& trajs,
                           SamFamily family, int m) {
  if (trajs.empty() || trajs.front().records.empty())
    throw std::invalid_argument("fit_sam_sampler: no data");

  if (family == SamFamily::IidEmpirical) {
    std::vector<Vec> atoms;
    std::vector<double> counts;
    double total = 0;
    for (const Trajectory& tr : trajs)
      for (const DataRecord& r : tr.records) {
        bool found = false;
        for (std::size_t i = 0; i < atoms.size(); ++i)
          if ((atoms[i] - r.a).cwiseAbs().maxCoeff() == 0.0) {
            counts[i] += 1.0;
            found = true;
            break;
          }
        if (!found) {
          atoms.push_back(r.a);
          counts.push_back(1.0);
        }
        total += 1.0;
      }
    if (atoms.size() < 2)
      throw DegenerateSam("IidEmpirical: single observed atom");
    std::vector<double> cum(counts.size());
    double acc = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      acc += counts[i] / total;
      cum[i] = acc;
    }
    cum.back() = 1.0;
    SamSampler s;
    s.draw = [atoms, cum](const std::vector<DataRecord>&, const Vec&,
                          rng::Stream& st) {
      double u = st.uniform();
      for (std::size_t i = 0; i < cum.size(); ++i)
        if (u <= cum[i]) return atoms[i];
      return atoms.back();
    };
    return s;
  }

  LogisticSamFit fit = fit_logistic_sam(trajs, m);
  SamSampler s;
  s.draw = [fit](const std::vector<DataRecord>& hist, const Vec& x,
                 rng::Stream& st) {
    Vec z = logistic_features(fit, hist, x);
    double p1 = 1.0 / (1.0 + std::exp(-fit.theta.dot(z)));
    return Vec::Constant(1, st.uniform() < p1 ? 1.0 : 0.0);
  };
  return s;
}

}  // namespace pskit::design
