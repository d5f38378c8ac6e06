#include "pskit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

#include "pskit/kernels.hpp"

namespace pskit::est {

namespace {

bool rows_equal(const Eigen::RowVectorXd& r, const Vec& v) {
  if (r.size() != v.size()) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (r[i] != v[i]) return false;
  return true;
}

constexpr double kCondLimit = 1e12;

Mat solve_normal_equations(const Mat& Z, const Mat& Y) {
  Mat ztz = Z.transpose() * Z;
  Eigen::JacobiSVD<Mat> svd(ztz);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0 || smax / smin > kCondLimit)
    throw SingularDesign("design second-moment matrix ill-conditioned");
  return ztz.ldlt().solve(Z.transpose() * Y);
}

}  // namespace

int Panel::horizon_slot(int h) const {
  auto it = std::find(horizons.begin(), horizons.end(), h);
  if (it == horizons.end())
    throw std::invalid_argument("panel does not store horizon h");
  return int(it - horizons.begin());
}

Vec Panel::last_assignment(Eigen::Index row) const {
  int dD = dX + dA + dY;
  if (m < 1) throw std::logic_error("panel has no history window");
  Eigen::Index off = Eigen::Index((m - 1) * dD + dX);
  return Hist.row(row).segment(off, dA).transpose();
}

Vec Panel::last_outcome(Eigen::Index row) const {
  int dD = dX + dA + dY;
  if (m < 1) throw std::logic_error("panel has no history window");
  Eigen::Index off = Eigen::Index((m - 1) * dD + dX + dA);
  return Hist.row(row).segment(off, dY).transpose();
}

Panel build_panel(const std::vector<Trajectory>& trajs,
                  const std::vector<int>& horizons, int m) {
  if (trajs.empty()) throw std::invalid_argument("build_panel: no data");
  if (horizons.empty()) throw std::invalid_argument("build_panel: no horizons");
  Panel p;
  const auto& first = trajs.front().records;
  if (first.empty()) throw std::invalid_argument("build_panel: empty trajectory");
  p.dX = int(first.front().x.size());
  p.dA = int(first.front().a.size());
  p.dY = int(first.front().y.size());
  p.m = m;
  p.horizons = horizons;
  int max_h = *std::max_element(horizons.begin(), horizons.end());
  int dD = p.dX + p.dA + p.dY;

  Eigen::Index total = 0;
  for (const auto& tr : trajs) {
    int T = int(tr.records.size());
    int usable = T - max_h - m;
    if (usable > 0) total += usable;
    p.dropped_rows += std::min(T, max_h + m);
  }
  if (total == 0) throw std::invalid_argument("build_panel: no usable rows");

  p.X = Mat(total, p.dX);
  p.A = Mat(total, p.dA);
  p.Hist = Mat(total, Eigen::Index(m) * dD);
  p.Ylead.assign(horizons.size(), Mat(total, p.dY));
  p.t_index.reserve(std::size_t(total));
  p.cluster.reserve(std::size_t(total));

  Eigen::Index row = 0;
  for (std::size_t c = 0; c < trajs.size(); ++c) {
    const auto& rec = trajs[c].records;
    int T = int(rec.size());
    for (int t = m + 1; t + max_h <= T; ++t) {
      // t is 1-based; rec[t-1] is the time-t record
      p.X.row(row) = rec[std::size_t(t - 1)].x.transpose();
      p.A.row(row) = rec[std::size_t(t - 1)].a.transpose();
      for (std::size_t s = 0; s < horizons.size(); ++s)
        p.Ylead[s].row(row) =
            rec[std::size_t(t - 1 + horizons[s])].y.transpose();
      for (int j = 0; j < m; ++j) {
        const DataRecord& hrec = rec[std::size_t(t - 1 - m + j)];
        p.Hist.row(row).segment(Eigen::Index(j) * dD, p.dX) =
            hrec.x.transpose();
        p.Hist.row(row).segment(Eigen::Index(j) * dD + p.dX, p.dA) =
            hrec.a.transpose();
        p.Hist.row(row).segment(Eigen::Index(j) * dD + p.dX + p.dA, p.dY) =
            hrec.y.transpose();
      }
      p.t_index.push_back(t);
      p.cluster.push_back(int(c));
      ++row;
    }
  }
  p.n_clusters = int(trajs.size());
  return p;
}

// ---------------------------------------------------------------------------
// HAC

int default_hac_lag(int h, Eigen::Index n) {
  // tolerance keeps exact cubes (8, 27, ...) from rounding up a full step
  return h + int(std::ceil(std::cbrt(double(n)) - 1e-9));
}

double hac_lrv(std::span<const double> g, int lag) {
  Eigen::Index n = Eigen::Index(g.size());
  double s = kernels::sumsq(g) / double(n);
  for (int l = 1; l <= lag && l < n; ++l) {
    double w = 1.0 - double(l) / double(lag + 1);
    double gamma =
        kernels::dot(g.subspan(std::size_t(l)), g.first(g.size() - l)) /
        double(n);
    s += 2.0 * w * gamma;
  }
  return s;
}

Mat hac_lrv(const Mat& g, int lag) {
  Eigen::Index n = g.rows();
  Mat s = g.transpose() * g / double(n);
  for (int l = 1; l <= lag && l < n; ++l) {
    double w = 1.0 - double(l) / double(lag + 1);
    Mat gamma = g.bottomRows(n - l).transpose() * g.topRows(n - l) / double(n);
    s += w * (gamma + gamma.transpose());
  }
  return s;
}

namespace {

// Long-run variance of a demeaned scalar influence series; clusters by
// replication when the panel pools several, else Bartlett HAC.
double score_variance(const Panel& p, const Vec& score, int h,
                      const HacOptions& hac) {
  Eigen::Index n = score.size();
  if (p.n_clusters > 1) {
    std::vector<double> cluster_sums(std::size_t(p.n_clusters), 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
      cluster_sums[std::size_t(p.cluster[std::size_t(i)])] += score[i];
    double s = 0;
    for (double cs : cluster_sums) s += cs * cs;
    return s / double(n);
  }
  int lag = hac.lag >= 0 ? hac.lag : default_hac_lag(h, n);
  return hac_lrv(std::span<const double>(score.data(), std::size_t(n)), lag);
}

}  // namespace

// ---------------------------------------------------------------------------
// diff_in_means

EffectEstimate diff_in_means(const Panel& p, int h, const Vec& a,
                             const Vec& a_prime, HacOptions hac) {
  const Mat& Y = p.y_at(h);
  Eigen::Index n = p.n();
  std::vector<char> in_a(std::size_t(n), 0), in_b(std::size_t(n), 0);
  Eigen::Index na = 0, nb = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    in_a[std::size_t(i)] = rows_equal(p.A.row(i), a);
    in_b[std::size_t(i)] = rows_equal(p.A.row(i), a_prime);
    na += in_a[std::size_t(i)];
    nb += in_b[std::size_t(i)];
  }
  if (na == 0 || nb == 0)
    throw EmptyCell("diff_in_means: empty assignment cell");

  EffectEstimate out;
  out.estimand = Estimand::ATE;
  out.horizon = h;
  out.contrast_a = a;
  out.contrast_a_prime = a_prime;
  out.method = "diff_in_means";
  out.n_obs = n;
  out.point = Vec(p.dY);
  out.se = Vec(p.dY);
  double pa = double(na) / double(n), pb = double(nb) / double(n);
  for (int k = 0; k < p.dY; ++k) {
    double mean_a = 0, mean_b = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_a[std::size_t(i)]) mean_a += Y(i, k);
      if (in_b[std::size_t(i)]) mean_b += Y(i, k);
    }
    mean_a /= double(na);
    mean_b /= double(nb);
    out.point[k] = mean_a - mean_b;
    // influence representation of the two-group difference
    Vec score(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0;
      if (in_a[std::size_t(i)]) s += (Y(i, k) - mean_a) / pa;
      if (in_b[std::size_t(i)]) s -= (Y(i, k) - mean_b) / pb;
      score[i] = s;
    }
    out.se[k] = std::sqrt(score_variance(p, score, h, hac) / double(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// lp_fit

ProjectionFit lp_fit(const Panel& p, int h, bool include_features,
                     Residualize mode, HacOptions hac) {
  const Mat& Y = p.y_at(h);
  Eigen::Index n = p.n();
  if (n < p.dA + p.dX + 2) throw SingularDesign("lp_fit: too few rows");

  int k_features = include_features ? p.dX : 0;
  int k = 1 + p.dA + k_features;
  Mat Z(n, k);
  Z.col(0).setOnes();
  Z.middleCols(1, p.dA) = p.A;
  if (include_features) Z.middleCols(1 + p.dA, p.dX) = p.X;

  Mat coef = solve_normal_equations(Z, Y);  // k x dY

  ProjectionFit fit;
  fit.horizon = h;
  fit.n_obs = n;
  fit.kappa = coef.row(0).transpose();
  fit.beta = coef.middleRows(1, p.dA).transpose();  // dY x dA
  if (include_features)
    fit.delta = coef.middleRows(1 + p.dA, p.dX).transpose();

  if (mode == Residualize::FWL) {
    // residualize A on [1, X]; the projected slope must match the joint fit
    Mat Zx(n, 1 + k_features);
    Zx.col(0).setOnes();
    if (include_features) Zx.middleCols(1, p.dX) = p.X;
    Mat a_hat = Zx * solve_normal_equations(Zx, p.A);
    Mat a_perp = p.A - a_hat;
    Mat beta_fwl = solve_normal_equations(a_perp, Y).transpose();  // dY x dA
    fit.beta = beta_fwl;
  }

  // HAC / cluster sandwich per outcome coordinate
  Mat residuals = Y - Z * coef;
  Mat bread = (Z.transpose() * Z / double(n)).ldlt().solve(
      Mat::Identity(k, k));
  fit.beta_se = Mat(p.dY, p.dA);
  fit.beta_cov.clear();
  int lag = hac.lag >= 0 ? hac.lag : default_hac_lag(h, n);
  for (int c = 0; c < p.dY; ++c) {
    Mat g = Z.array().colwise() * residuals.col(c).array();  // n x k
    Mat meat;
    if (p.n_clusters > 1) {
      Mat cluster_sums = Mat::Zero(p.n_clusters, k);
      for (Eigen::Index i = 0; i < n; ++i)
        cluster_sums.row(p.cluster[std::size_t(i)]) += g.row(i);
      meat = cluster_sums.transpose() * cluster_sums / double(n);
      fit.cov_method = "cluster";
    } else {
      meat = hac_lrv(g, lag);
      fit.cov_method = "hac_bartlett";
    }
    Mat cov = bread * meat * bread / double(n);
    fit.beta_cov.push_back(cov.block(1, 1, p.dA, p.dA));
    for (int j = 0; j < p.dA; ++j)
      fit.beta_se(c, j) = std::sqrt(std::max(0.0, cov(1 + j, 1 + j)));
  }
  return fit;
}

// ---------------------------------------------------------------------------
// clp_fit

ClpFit clp_fit(const Panel& p, int h, const Vec& atom) {
  const Mat& Y = p.y_at(h);
  Eigen::Index n = p.n();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; ++i)
    if (rows_equal(p.A.row(i), atom)) rows.push_back(i);
  if (rows.empty()) throw EmptyCell("clp_fit: empty atom cell");

  Mat Z(Eigen::Index(rows.size()), 1 + p.dX);
  Mat Yc(Eigen::Index(rows.size()), p.dY);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Z(Eigen::Index(i), 0) = 1.0;
    Z.row(Eigen::Index(i)).segment(1, p.dX) = p.X.row(rows[i]);
    Yc.row(Eigen::Index(i)) = Y.row(rows[i]);
  }
  Mat coef = solve_normal_equations(Z, Yc);
  ClpFit fit;
  fit.kappa = coef.row(0).transpose();
  fit.beta = coef.middleRows(1, p.dX).transpose();
  fit.n_obs = Eigen::Index(rows.size());
  return fit;
}

// ---------------------------------------------------------------------------
// kernel regression

namespace {

struct KernelPlan {
  bool indicator_a = false;  // exact match on A (finite-atom panels)
  Vec bw_a;                  // when A enters the product kernel
  Vec bw_x;
  Vec bw_h;
  bool use_x = false;
  bool use_hist = false;
};

Vec rule_of_thumb(const Mat& cols, double override_value) {
  Vec bw(cols.cols());
  double n = double(cols.rows());
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    if (override_value > 0) {
      bw[j] = override_value;
      continue;
    }
    double mean = cols.col(j).mean();
    double sd =
        std::sqrt((cols.col(j).array() - mean).square().sum() / (n - 1.0));
    bw[j] = std::max(1.06 * sd * std::pow(n, -0.2), 1e-8);
  }
  return bw;
}

bool few_unique_assignments(const Mat& A) {
  std::vector<Eigen::RowVectorXd> uniq;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    bool found = false;
    for (const auto& u : uniq)
      if ((u - A.row(i)).cwiseAbs().maxCoeff() == 0.0) {
        found = true;
        break;
      }
    if (!found) {
      uniq.push_back(A.row(i));
      if (uniq.size() > 32) return false;
    }
  }
  return true;
}

inline double gauss(double z) { return std::exp(-0.5 * z * z); }

}  // namespace

RegressionFit kernel_mu(const Panel& p, int h, KernelConditioning cond,
                        KernelKind kind, BandwidthSpec bw) {
  // closure owns copies of the columns it needs
  auto A = std::make_shared<Mat>(p.A);
  auto X = std::make_shared<Mat>(p.X);
  auto H = std::make_shared<Mat>(p.Hist);
  auto Y = std::make_shared<Mat>(p.y_at(h));

  KernelPlan plan;
  plan.indicator_a =
      (kind == KernelKind::DiffInMeans) || few_unique_assignments(*A);
  if (!plan.indicator_a) plan.bw_a = rule_of_thumb(*A, bw.value);
  plan.use_x = (cond == KernelConditioning::AX ||
                cond == KernelConditioning::AXHistory) &&
               p.dX > 0 && kind != KernelKind::DiffInMeans;
  plan.use_hist =
      cond == KernelConditioning::AXHistory && p.m > 0 &&
      kind != KernelKind::DiffInMeans;
  if (plan.use_x) plan.bw_x = rule_of_thumb(*X, bw.value);
  if (plan.use_hist) plan.bw_h = rule_of_thumb(*H, bw.value);

  RegressionFit fit;
  fit.horizon = h;
  fit.cond = cond;
  fit.kind = kind;
  fit.mu = [A, X, H, Y, plan, kind](const Vec& a, const Vec& x,
                                    const Vec& hist) -> Vec {
    Eigen::Index n = A->rows();
    Vec wgt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double w = 1.0;
      if (plan.indicator_a) {
        w = rows_equal(A->row(i), a) ? 1.0 : 0.0;
      } else {
        for (Eigen::Index j = 0; j < a.size(); ++j)
          w *= gauss(((*A)(i, j) - a[j]) / plan.bw_a[j]);
      }
      if (w > 0 && plan.use_x)
        for (Eigen::Index j = 0; j < x.size(); ++j)
          w *= gauss(((*X)(i, j) - x[j]) / plan.bw_x[j]);
      if (w > 0 && plan.use_hist)
        for (Eigen::Index j = 0; j < hist.size(); ++j)
          w *= gauss(((*H)(i, j) - hist[j]) / plan.bw_h[j]);
      wgt[i] = w;
    }
    double wsum = kernels::sum({wgt.data(), std::size_t(n)});
    if (wsum <= 0.0)
      throw EmptyCell("kernel_mu: zero kernel mass at evaluation point");

    if (kind != KernelKind::LocalLinear) {
      Vec out = Vec::Zero(Y->cols());
      for (Eigen::Index c = 0; c < Y->cols(); ++c)
        out[c] = kernels::dot({wgt.data(), std::size_t(n)},
                              {Y->col(c).data(), std::size_t(n)}) /
                 wsum;
      return out;
    }

    // local linear: weighted regression on deviations of the continuous
    // conditioning coordinates
    int k = 1;
    if (!plan.indicator_a) k += int(a.size());
    if (plan.use_x) k += int(x.size());
    if (plan.use_hist) k += int(hist.size());
    Mat Z(n, k);
    Z.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i) {
      int col = 1;
      if (!plan.indicator_a)
        for (Eigen::Index j = 0; j < a.size(); ++j)
          Z(i, col++) = (*A)(i, j) - a[j];
      if (plan.use_x)
        for (Eigen::Index j = 0; j < x.size(); ++j)
          Z(i, col++) = (*X)(i, j) - x[j];
      if (plan.use_hist)
        for (Eigen::Index j = 0; j < hist.size(); ++j)
          Z(i, col++) = (*H)(i, j) - hist[j];
    }
    Mat ZtW = Z.transpose() * wgt.asDiagonal();
    Mat lhs = ZtW * Z;
    Eigen::LDLT<Mat> ldlt(lhs);
    if (ldlt.info() != Eigen::Success)
      throw SingularDesign("kernel_mu: singular local-linear system");
    Mat coef = ldlt.solve(ZtW * (*Y));
    return coef.row(0).transpose();
  };
  return fit;
}

EffectEstimate plug_in_ate(const Panel& p, const RegressionFit& fit, int h,
                           const Vec& a, const Vec& a_prime) {
  Eigen::Index n = p.n();
  EffectEstimate out;
  out.horizon = h;
  out.contrast_a = a;
  out.contrast_a_prime = a_prime;
  out.method = "kernel_plug_in";
  out.n_obs = n;

  if (fit.cond == KernelConditioning::AOnly) {
    out.estimand = Estimand::ATE;
    Vec mu_a = fit.mu(a, Vec(), Vec());
    Vec mu_b = fit.mu(a_prime, Vec(), Vec());
    out.point = mu_a - mu_b;
    // two-cell variance on the exact-match path; kernel path approximates
    const Mat& Y = p.y_at(h);
    out.se = Vec::Zero(p.dY);
    for (int c = 0; c < p.dY; ++c) {
      double va = 0, vb = 0;
      Eigen::Index na = 0, nb = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (rows_equal(p.A.row(i), a)) {
          va += (Y(i, c) - mu_a[c]) * (Y(i, c) - mu_a[c]);
          ++na;
        }
        if (rows_equal(p.A.row(i), a_prime)) {
          vb += (Y(i, c) - mu_b[c]) * (Y(i, c) - mu_b[c]);
          ++nb;
        }
      }
      if (na > 1 && nb > 1)
        out.se[c] = std::sqrt(va / double(na - 1) / double(na) +
                              vb / double(nb - 1) / double(nb));
    }
    return out;
  }

  out.estimand = fit.cond == KernelConditioning::AX ? Estimand::CATE
                                                    : Estimand::CFTE;
  Mat contrasts(n, p.dY);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec x = p.X.row(i).transpose();
    Vec hist = p.Hist.row(i).transpose();
    contrasts.row(i) = (fit.mu(a, x, hist) - fit.mu(a_prime, x, hist))
                           .transpose();
  }
  out.estimand = Estimand::ATE;  // averaged over the conditioning law
  out.point = contrasts.colwise().mean();
  out.se = Vec(p.dY);
  for (int c = 0; c < p.dY; ++c) {
    double ss = (contrasts.col(c).array() - out.point[c]).square().sum();
    out.se[c] = std::sqrt(ss / double(n - 1) / double(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// propensity / AIPW

double PropensityModel::clipped(const Vec& atom, const Vec& x,
                                const Vec& hist) const {
  double pr = prob(atom, x, hist);
  return std::min(1.0 - clip_eps, std::max(clip_eps, pr));
}

PropensityModel empirical_frequency(const Panel& p) {
  auto A = std::make_shared<Mat>(p.A);
  PropensityModel model;
  model.prob = [A](const Vec& atom, const Vec&, const Vec&) {
    Eigen::Index n = A->rows(), cnt = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (rows_equal(A->row(i), atom)) ++cnt;
    return double(cnt) / double(n);
  };
  return model;
}

PropensityModel logistic_on_features(const Panel& p) {
  if (p.dA != 1)
    throw std::invalid_argument("logistic_on_features: scalar binary A only");
  Eigen::Index n = p.n();
  Mat Z(n, 1 + p.dX);
  Z.col(0).setOnes();
  Z.middleCols(1, p.dX) = p.X;
  Vec y = p.A.col(0);

  Vec theta = Vec::Zero(1 + p.dX);
  for (int it = 0; it < 50; ++it) {
    Vec eta = Z * theta;
    Vec mu = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    Vec wdiag = (mu.array() * (1.0 - mu.array())).cwiseMax(1e-10).matrix();
    Mat hess = Z.transpose() * wdiag.asDiagonal() * Z;
    Vec grad = Z.transpose() * (y - mu);
    Vec step = hess.ldlt().solve(grad);
    theta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }

  PropensityModel model;
  model.prob = [theta](const Vec& atom, const Vec& x, const Vec&) {
    Vec z(1 + x.size());
    z[0] = 1.0;
    z.tail(x.size()) = x;
    double p1 = 1.0 / (1.0 + std::exp(-theta.dot(z)));
    return atom[0] == 1.0 ? p1 : 1.0 - p1;
  };
  return model;
}

EffectEstimate aipw_ate(const Panel& p, int h, const Vec& a,
                        const Vec& a_prime, const RegressionFit& outcome,
                        const PropensityModel& propensity) {
  const Mat& Y = p.y_at(h);
  Eigen::Index n = p.n();
  Mat infl(n, p.dY);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec x = p.X.row(i).transpose();
    Vec hist = p.Hist.row(i).transpose();
    Vec m_a = outcome.mu(a, x, hist);
    Vec m_b = outcome.mu(a_prime, x, hist);
    double la = propensity.clipped(a, x, hist);
    double lb = propensity.clipped(a_prime, x, hist);
    if (la <= 0.0 || lb <= 0.0)
      throw std::invalid_argument("aipw_ate: zero propensity after clipping");
    Vec term = m_a - m_b;
    if (rows_equal(p.A.row(i), a))
      term += (Y.row(i).transpose() - m_a) / la;
    if (rows_equal(p.A.row(i), a_prime))
      term -= (Y.row(i).transpose() - m_b) / lb;
    infl.row(i) = term.transpose();
  }

  EffectEstimate out;
  out.estimand = Estimand::ATE;
  out.horizon = h;
  out.contrast_a = a;
  out.contrast_a_prime = a_prime;
  out.method = "aipw";
  out.n_obs = n;
  out.point = infl.colwise().mean();
  out.se = Vec(p.dY);
  for (int c = 0; c < p.dY; ++c) {
    double ss = (infl.col(c).array() - out.point[c]).square().sum();
    out.se[c] = std::sqrt(ss / double(n - 1) / double(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// iv_wald

EffectEstimate iv_wald(const Panel& p, int h, IvOptions opt) {
  if (p.dX != 1 || p.dA != 1)
    throw std::invalid_argument("iv_wald: scalar binary instrument/assignment");
  const Mat& Y = p.y_at(h);
  Eigen::Index n = p.n();

  auto coarsen = opt.coarsen;
  if (!coarsen) {
    coarsen = [](const Panel& pp, Eigen::Index row) {
      int last_a = pp.m > 0 && pp.last_assignment(row)[0] == 1.0 ? 1 : 0;
      int y_sign = pp.m > 0 && pp.last_outcome(row)[0] >= 0.0 ? 1 : 0;
      return last_a * 2 + y_sign;
    };
  }

  struct Cell {
    Eigen::Index n1 = 0, n0 = 0;
    double sy1 = 0, sy0 = 0, sa1 = 0, sa0 = 0;
    double syy1 = 0, syy0 = 0, saa1 = 0, saa0 = 0, sya1 = 0, sya0 = 0;
  };
  std::map<int, Cell> cells;
  for (Eigen::Index i = 0; i < n; ++i) {
    Cell& c = cells[coarsen(p, i)];
    double yi = Y(i, 0), ai = p.A(i, 0);
    if (p.X(i, 0) == 1.0) {
      ++c.n1;
      c.sy1 += yi;
      c.sa1 += ai;
      c.syy1 += yi * yi;
      c.saa1 += ai * ai;
      c.sya1 += yi * ai;
    } else {
      ++c.n0;
      c.sy0 += yi;
      c.sa0 += ai;
      c.syy0 += yi * yi;
      c.saa0 += ai * ai;
      c.sya0 += yi * ai;
    }
  }

  // pooled first stage guards relevance before any per-cell ratio
  double fs1 = 0, fs0 = 0;
  Eigen::Index m1 = 0, m0 = 0;
  for (auto& [id, c] : cells) {
    fs1 += c.sa1;
    fs0 += c.sa0;
    m1 += c.n1;
    m0 += c.n0;
  }
  if (m1 == 0 || m0 == 0) throw EmptyCell("iv_wald: empty instrument arm");
  double pooled_fs = fs1 / double(m1) - fs0 / double(m0);
  if (pooled_fs <= opt.relevance_floor)
    throw WeakFirstStage("iv_wald: first-stage difference below floor");

  double point = 0, var = 0;
  for (auto& [id, c] : cells) {
    if (c.n1 == 0 || c.n0 == 0)
      throw EmptyCell("iv_wald: empty instrument cell after coarsening");
    double w = double(c.n1 + c.n0) / double(n);
    double ym1 = c.sy1 / double(c.n1), ym0 = c.sy0 / double(c.n0);
    double am1 = c.sa1 / double(c.n1), am0 = c.sa0 / double(c.n0);
    double num = ym1 - ym0, den = am1 - am0;
    if (std::abs(den) < 1e-12)
      throw WeakFirstStage("iv_wald: zero first stage in a cell");
    double r = num / den;
    point += w * r;

    auto var_of = [](double s, double ss, Eigen::Index cnt) {
      double mean = s / double(cnt);
      return std::max(0.0, ss / double(cnt) - mean * mean);
    };
    auto cov_of = [](double sx, double sy, double sxy, Eigen::Index cnt) {
      return sxy / double(cnt) -
             (sx / double(cnt)) * (sy / double(cnt));
    };
    double vnum = var_of(c.sy1, c.syy1, c.n1) / double(c.n1) +
                  var_of(c.sy0, c.syy0, c.n0) / double(c.n0);
    double vden = var_of(c.sa1, c.saa1, c.n1) / double(c.n1) +
                  var_of(c.sa0, c.saa0, c.n0) / double(c.n0);
    double cnd = cov_of(c.sy1, c.sa1, c.sya1, c.n1) / double(c.n1) +
                 cov_of(c.sy0, c.sa0, c.sya0, c.n0) / double(c.n0);
    double vr = (vnum + r * r * vden - 2.0 * r * cnd) / (den * den);
    var += w * w * std::max(0.0, vr);
  }

  EffectEstimate out;
  out.estimand = Estimand::ATE;
  out.horizon = h;
  out.contrast_a = Vec::Ones(1);
  out.contrast_a_prime = Vec::Zero(1);
  out.method = "iv_wald";
  out.n_obs = n;
  out.point = Vec::Constant(1, point);
  out.se = Vec::Constant(1, std::sqrt(var));
  return out;
}

// ---------------------------------------------------------------------------
// attenuation

AttenuationReport attenuation_check(const ProxyScenario& sc, int h,
                                    std::uint64_t seed) {
  if (sc.slope_B * sc.slope_B * sc.var_astar + sc.var_vbar <= 0)
    throw std::invalid_argument("attenuation_check: zero proxy variance");
  if (h != 0)
    throw std::invalid_argument(
        "attenuation_check: contemporaneous proxy scenario has h = 0");
  int T = sc.T;
  Vec astar(T), abar(T), y(T);
  rng::Stream s1(seed, 0, 0, 0), s2(seed, 0, 0, 1), s3(seed, 0, 0, 2);
  for (int t = 0; t < T; ++t) {
    astar[t] = std::sqrt(sc.var_astar) * s1.normal();
    abar[t] = sc.intercept + sc.slope_B * astar[t] +
              std::sqrt(sc.var_vbar) * s2.normal();
    y[t] = sc.beta_true * astar[t] + sc.outcome_noise_sd * s3.normal();
  }

  auto simple_lp = [T](const Vec& reg, const Vec& dep, double* se) {
    double rm = reg.mean(), dm = dep.mean();
    double cov = 0, var = 0;
    for (int t = 0; t < T; ++t) {
      cov += (reg[t] - rm) * (dep[t] - dm);
      var += (reg[t] - rm) * (reg[t] - rm);
    }
    double b = cov / var;
    if (se) {
      double ssr = 0;
      for (int t = 0; t < T; ++t) {
        double u = (dep[t] - dm) - b * (reg[t] - rm);
        ssr += u * u * (reg[t] - rm) * (reg[t] - rm);
      }
      *se = std::sqrt(ssr) / var;
    }
    return b;
  };

  AttenuationReport rep;
  double se_proxy = 0;
  rep.beta_on_true = simple_lp(astar, y, nullptr);
  rep.beta_on_proxy = simple_lp(abar, y, &se_proxy);
  rep.measured_factor = rep.beta_on_proxy / sc.beta_true;
  rep.factor_se = se_proxy / std::abs(sc.beta_true);
  rep.predicted_factor =
      sc.slope_B * sc.var_astar /
      (sc.slope_B * sc.slope_B * sc.var_astar + sc.var_vbar);
  return rep;
}

}  // namespace pskit::est
