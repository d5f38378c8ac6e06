#include "pskit/ps_core.hpp"

#include <cmath>
#include <stdexcept>

namespace pskit {

bool BoxBounds::contains(const Vec& v) const {
  if (unbounded) return true;
  if (lo.size() != v.size() || hi.size() != v.size()) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] < lo[i] || v[i] > hi[i]) return false;
  return true;
}

std::vector<Vec> Spaces::atoms() const {
  if (assignment_kind == AssignmentKind::Binary) {
    Vec a0 = Vec::Zero(dA), a1 = Vec::Ones(dA);
    return {a0, a1};
  }
  return assignment_atoms;
}

bool Spaces::assignment_in_domain(const Vec& a) const {
  if (a.size() != dA) return false;
  switch (assignment_kind) {
    case AssignmentKind::Continuous:
      return assignment_box.contains(a);
    case AssignmentKind::Binary:
    case AssignmentKind::FiniteAtoms:
      for (const Vec& atom : atoms())
        if ((atom - a).lpNorm<Eigen::Infinity>() == 0.0) return true;
      return false;
  }
  return false;
}

int DistSpec::dim() const {
  switch (kind) {
    case DistKind::Gaussian:
      return int(mean.size());
    case DistKind::Uniform:
      return int(lo.size());
    case DistKind::Discrete:
      return points.empty() ? 0 : int(points.front().size());
  }
  return 0;
}

DistSpec DistSpec::gaussian(Vec mean, Mat cov) {
  DistSpec d;
  d.kind = DistKind::Gaussian;
  d.mean = std::move(mean);
  d.cov = std::move(cov);
  return d;
}

DistSpec DistSpec::uniform(Vec lo, Vec hi) {
  DistSpec d;
  d.kind = DistKind::Uniform;
  d.lo = std::move(lo);
  d.hi = std::move(hi);
  return d;
}

DistSpec DistSpec::discrete(std::vector<Vec> points, Vec probs) {
  DistSpec d;
  d.kind = DistKind::Discrete;
  d.points = std::move(points);
  d.probs = std::move(probs);
  return d;
}

DistSpec DistSpec::degenerate(int dim) {
  return gaussian(Vec::Zero(dim), Mat::Zero(dim, dim));
}

Vec DataRecord::stacked() const {
  Vec d(x.size() + a.size() + y.size());
  d << x, a, y;
  return d;
}

std::vector<DataRecord> SystemSpec::padded_initial_history() const {
  std::vector<DataRecord> hist = initial_history;
  int m = sem.order;
  while (int(hist.size()) < m) {
    DataRecord zero;
    zero.x = Vec::Zero(spaces.dX);
    zero.a = Vec::Zero(spaces.dA);
    zero.y = Vec::Zero(spaces.dY);
    zero.t = -int(hist.size());
    hist.insert(hist.begin(), zero);
  }
  return hist;
}

History order_window(const SystemSpec& spec, History full) {
  std::size_t m = std::size_t(spec.sem.order);
  if (full.size() <= m) return full;
  return full.subspan(full.size() - m, m);
}

// ---------------------------------------------------------------------------

namespace {

bool symmetric_psd(const Mat& s, std::string* why) {
  if (s.rows() != s.cols()) {
    if (why) *why = "covariance not square";
    return false;
  }
  if (s.size() == 0) return true;
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    if (why) *why = "covariance not symmetric";
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  if (es.eigenvalues().minCoeff() < -1e-10) {
    if (why) *why = "covariance not positive semidefinite";
    return false;
  }
  return true;
}

void check_dist(const DistSpec& d, const std::string& label,
                std::vector<Violation>& out) {
  switch (d.kind) {
    case DistKind::Gaussian: {
      std::string why;
      if (!symmetric_psd(d.cov, &why))
        out.push_back({"CovarianceViolation", label + ": " + why});
      if (d.cov.rows() != d.mean.size())
        out.push_back({"DimensionViolation", label + ": mean/cov mismatch"});
      break;
    }
    case DistKind::Uniform:
      if (d.lo.size() != d.hi.size() ||
          (d.lo.size() > 0 && (d.hi - d.lo).minCoeff() < 0))
        out.push_back({"BoundsViolation", label + ": lo > hi"});
      break;
    case DistKind::Discrete: {
      if (d.points.empty()) {
        out.push_back({"EmptySupportViolation", label + ": no atoms"});
        break;
      }
      if (d.probs.size() != Eigen::Index(d.points.size()))
        out.push_back({"DimensionViolation", label + ": points/probs length"});
      else if (std::abs(d.probs.sum() - 1.0) > 1e-12)
        out.push_back({"ProbSumViolation",
                       label + ": probabilities sum to " +
                           std::to_string(d.probs.sum())});
      if (d.probs.size() > 0 && d.probs.minCoeff() < 0)
        out.push_back({"ProbSignViolation", label + ": negative probability"});
      break;
    }
  }
}

// Cholesky-like factor of a PSD matrix (LDLT based, tolerant of zero modes).
Mat psd_factor(const Mat& s) {
  if (s.size() == 0) return s;
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Vec lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

Vec draw_component(const DistSpec& d, const Mat& factor, rng::Stream& stream) {
  switch (d.kind) {
    case DistKind::Gaussian: {
      Vec z(d.dim());
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = stream.normal();
      return d.mean + factor * z;
    }
    case DistKind::Uniform: {
      Vec z(d.dim());
      for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = d.lo[i] + (d.hi[i] - d.lo[i]) * stream.uniform();
      return z;
    }
    case DistKind::Discrete: {
      double u = stream.uniform();
      double c = 0;
      for (std::size_t i = 0; i < d.points.size(); ++i) {
        c += d.probs[Eigen::Index(i)];
        if (u <= c) return d.points[i];
      }
      return d.points.back();
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

std::vector<Violation> validate_system(const SystemSpec& spec) {
  std::vector<Violation> out;
  const Spaces& sp = spec.spaces;
  if (sp.dA < 1) out.push_back({"DimensionViolation", "dA must be >= 1"});
  if (sp.dX < 0 || sp.dY < 0)
    out.push_back({"DimensionViolation", "negative dimension"});
  if (spec.horizon_T < 1)
    out.push_back({"HorizonViolation", "horizonT must be >= 1"});
  if (spec.sem.order < 0)
    out.push_back({"OrderViolation", "order m must be >= 0"});

  if (sp.assignment_kind == AssignmentKind::FiniteAtoms) {
    if (sp.assignment_atoms.empty())
      out.push_back({"EmptySupportViolation", "FiniteAtoms list empty"});
    for (std::size_t i = 0; i < sp.assignment_atoms.size(); ++i) {
      if (sp.assignment_atoms[i].size() != sp.dA)
        out.push_back({"DimensionViolation", "atom dimension != dA"});
      for (std::size_t j = i + 1; j < sp.assignment_atoms.size(); ++j)
        if ((sp.assignment_atoms[i] - sp.assignment_atoms[j])
                .lpNorm<Eigen::Infinity>() == 0.0)
          out.push_back({"DuplicateAtomViolation", "duplicate atom"});
    }
  }
  auto check_box = [&](const BoxBounds& b, const char* label) {
    if (b.unbounded) return;
    if (b.lo.size() != b.hi.size() ||
        (b.lo.size() > 0 && (b.hi - b.lo).minCoeff() < 0))
      out.push_back({"BoundsViolation", std::string(label) + ": lo > hi"});
  };
  check_box(sp.assignment_box, "assignment box");
  check_box(sp.feature_domain, "feature domain");
  check_box(sp.outcome_domain, "outcome domain");

  check_dist(spec.noise.u, "U", out);
  check_dist(spec.noise.v, "V", out);
  check_dist(spec.noise.w, "W", out);
  if (spec.noise.cross == CrossDependence::Custom) {
    std::string why;
    if (!symmetric_psd(spec.noise.joint_cov, &why))
      out.push_back({"CovarianceViolation", std::string("joint: ") + why});
  }

  for (const DataRecord& r : spec.initial_history) {
    if (r.x.size() != sp.dX || r.a.size() != sp.dA || r.y.size() != sp.dY) {
      out.push_back({"DimensionViolation", "initialHistory record dims"});
      break;
    }
  }

  if (!spec.sem.chi || !spec.sem.alpha || !spec.sem.gamma) {
    out.push_back({"ComponentViolation", "missing SEM component"});
    return out;
  }
  if (!out.empty()) return out;

  // probe: zero noise on the initial history must evaluate and land in-domain
  std::vector<DataRecord> hist = spec.padded_initial_history();
  NoiseDraw zero;
  zero.u = Vec::Zero(spec.noise.u.dim());
  zero.v = Vec::Zero(spec.noise.v.dim());
  zero.w = Vec::Zero(spec.noise.w.dim());
  zero.t = 1;
  try {
    History win = order_window(spec, hist);
    Vec x = spec.sem.chi(win, zero.u);
    if (x.size() != sp.dX)
      out.push_back({"DimensionViolation", "chi output dimension"});
    Vec a = spec.sem.alpha(win, x, zero.v);
    if (a.size() != sp.dA)
      out.push_back({"DimensionViolation", "alpha output dimension"});
    Vec y = spec.sem.gamma(win, x, a, zero.w);
    if (y.size() != sp.dY)
      out.push_back({"DimensionViolation", "gamma output dimension"});
    if (out.empty()) {
      if (!sp.feature_domain.contains(x))
        out.push_back({"DomainViolation", "probe feature out of domain"});
      if (!sp.outcome_domain.contains(y))
        out.push_back({"DomainViolation", "probe outcome out of domain"});
    }
  } catch (const std::exception& e) {
    out.push_back({"ProbeFailure", e.what()});
  }
  return out;
}

NoiseSampler::NoiseSampler(const NoiseModel& model) : model_(model) {
  switch (model_.cross) {
    case CrossDependence::FullyIndependent:
      if (model_.u.kind == DistKind::Gaussian) chol_u_ = psd_factor(model_.u.cov);
      if (model_.v.kind == DistKind::Gaussian) chol_v_ = psd_factor(model_.v.cov);
      if (model_.w.kind == DistKind::Gaussian) chol_w_ = psd_factor(model_.w.cov);
      break;
    case CrossDependence::VWCorrelated: {
      if (model_.v.kind != DistKind::Gaussian ||
          model_.w.kind != DistKind::Gaussian)
        throw std::invalid_argument("VWCorrelated requires Gaussian V and W");
      if (model_.u.kind == DistKind::Gaussian) chol_u_ = psd_factor(model_.u.cov);
      int dv = model_.v.dim(), dw = model_.w.dim();
      Mat joint(dv + dw, dv + dw);
      Vec sv = model_.v.cov.diagonal().cwiseSqrt();
      Vec sw = model_.w.cov.diagonal().cwiseSqrt();
      joint.topLeftCorner(dv, dv) = model_.v.cov;
      joint.bottomRightCorner(dw, dw) = model_.w.cov;
      Mat cross = sv.asDiagonal() * model_.vw_corr * sw.asDiagonal();
      joint.topRightCorner(dv, dw) = cross;
      joint.bottomLeftCorner(dw, dv) = cross.transpose();
      chol_vw_ = psd_factor(joint);
      break;
    }
    case CrossDependence::Custom:
      chol_joint_ = psd_factor(model_.joint_cov);
      break;
  }
}

NoiseDraw NoiseSampler::draw(std::uint64_t seed, std::uint64_t replication,
                             int t) const {
  NoiseDraw out;
  out.replication = replication;
  out.t = t;
  switch (model_.cross) {
    case CrossDependence::FullyIndependent: {
      rng::Stream su(seed, replication, t, 0);
      rng::Stream sv(seed, replication, t, 1);
      rng::Stream sw(seed, replication, t, 2);
      out.u = draw_component(model_.u, chol_u_, su);
      out.v = draw_component(model_.v, chol_v_, sv);
      out.w = draw_component(model_.w, chol_w_, sw);
      break;
    }
    case CrossDependence::VWCorrelated: {
      rng::Stream su(seed, replication, t, 0);
      rng::Stream svw(seed, replication, t, 3);
      out.u = draw_component(model_.u, chol_u_, su);
      int dv = model_.v.dim(), dw = model_.w.dim();
      Vec z(dv + dw);
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = svw.normal();
      Vec mean(dv + dw);
      mean << model_.v.mean, model_.w.mean;
      Vec vw = mean + chol_vw_ * z;
      out.v = vw.head(dv);
      out.w = vw.tail(dw);
      break;
    }
    case CrossDependence::Custom: {
      rng::Stream s(seed, replication, t, 4);
      int du = model_.u.dim(), dv = model_.v.dim(), dw = model_.w.dim();
      Vec z(du + dv + dw);
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = s.normal();
      Vec e = chol_joint_ * z;
      out.u = e.head(du);
      out.v = e.segment(du, dv);
      out.w = e.tail(dw);
      break;
    }
  }
  return out;
}

NoiseDraw draw_noise(const SystemSpec& spec, std::uint64_t seed,
                     std::uint64_t replication, int t) {
  if (t < 1 || t > spec.horizon_T)
    throw std::out_of_range("draw_noise: t outside 1..horizonT");
  return NoiseSampler(spec.noise).draw(seed, replication, t);
}

DataRecord step_dgp(const SystemSpec& spec, History history,
                    const NoiseDraw& noise) {
  History win = order_window(spec, history);
  if (int(win.size()) < spec.sem.order)
    throw std::invalid_argument("step_dgp: history shorter than order m");
  DataRecord rec;
  rec.t = noise.t;
  rec.x = spec.sem.chi(win, noise.u);
  if (rec.x.size() != spec.spaces.dX)
    throw DomainViolation("chi output dimension mismatch");
  if (!spec.spaces.feature_domain.contains(rec.x))
    throw DomainViolation("feature out of domain");
  rec.a = spec.sem.alpha(win, rec.x, noise.v);
  if (!spec.spaces.assignment_in_domain(rec.a))
    throw DomainViolation("assignment out of domain");
  rec.y = spec.sem.gamma(win, rec.x, rec.a, noise.w);
  if (rec.y.size() != spec.spaces.dY)
    throw DomainViolation("gamma output dimension mismatch");
  if (!spec.spaces.outcome_domain.contains(rec.y))
    throw DomainViolation("outcome out of domain");
  return rec;
}

}  // namespace pskit
