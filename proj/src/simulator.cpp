#include "pskit/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "pskit/parallel.hpp"

namespace pskit {

namespace {

// One branch step; assignment comes from a_path while h <= s, else from the
// assignment mechanism on the branch history.
DataRecord branch_step(const SystemSpec& spec, History full_hist,
                       const NoiseDraw& noise, const Vec* forced_a,
                       const Vec* forced_x) {
  History win = order_window(spec, full_hist);
  DataRecord rec;
  rec.t = noise.t;
  rec.x = forced_x ? *forced_x : spec.sem.chi(win, noise.u);
  if (rec.x.size() != spec.spaces.dX)
    throw DomainViolation("chi output dimension mismatch");
  if (!spec.spaces.feature_domain.contains(rec.x))
    throw DomainViolation("feature out of domain");
  rec.a = forced_a ? *forced_a : spec.sem.alpha(win, rec.x, noise.v);
  if (!spec.spaces.assignment_in_domain(rec.a))
    throw DomainViolation("assignment out of domain");
  rec.y = spec.sem.gamma(win, rec.x, rec.a, noise.w);
  if (rec.y.size() != spec.spaces.dY)
    throw DomainViolation("gamma output dimension mismatch");
  if (!spec.spaces.outcome_domain.contains(rec.y))
    throw DomainViolation("outcome out of domain");
  return rec;
}

struct BranchContext {
  std::vector<DataRecord> history;  // padded initial + realized D_{1:t-1}
  std::uint64_t noise_seed = 0;
  std::uint64_t noise_replication = 0;
};

Branch run_branch(const SystemSpec& spec, const NoiseSampler& sampler,
                  const BranchContext& ctx, int t,
                  const std::vector<Vec>& a_path, int H,
                  const Vec* feature_pin) {
  Branch br;
  br.t = t;
  br.horizon_H = H;
  br.a_path = a_path;
  std::vector<DataRecord> full = ctx.history;
  for (int h = 0; h <= H; ++h) {
    NoiseDraw noise =
        sampler.draw(ctx.noise_seed, ctx.noise_replication, t + h);
    const Vec* forced_a = (h < int(a_path.size())) ? &a_path[h] : nullptr;
    const Vec* forced_x = (h == 0) ? feature_pin : nullptr;
    DataRecord rec = branch_step(spec, full, noise, forced_a, forced_x);
    br.records.push_back(rec);
    full.push_back(rec);
  }
  return br;
}

}  // namespace

Trajectory simulate_trajectory(const SystemSpec& spec, std::uint64_t seed,
                               std::uint64_t replication) {
  NoiseSampler sampler(spec.noise);
  Trajectory traj;
  traj.seed = seed;
  traj.replication = replication;
  std::vector<DataRecord> full = spec.padded_initial_history();
  std::size_t pad = full.size();
  for (int t = 1; t <= spec.horizon_T; ++t) {
    NoiseDraw noise = sampler.draw(seed, replication, t);
    DataRecord rec = step_dgp(spec, full, noise);
    full.push_back(rec);
  }
  traj.records.assign(full.begin() + std::ptrdiff_t(pad), full.end());
  return traj;
}

Branch simulate_branch(const SystemSpec& spec, const Trajectory& traj, int t,
                       const std::vector<Vec>& a_path, int H,
                       NoisePolicy policy, std::uint64_t fresh_seed) {
  if (t < 1 || t + H > spec.horizon_T)
    throw std::out_of_range("simulate_branch: t + H exceeds horizonT");
  if (int(a_path.size()) - 1 > H)
    throw std::invalid_argument("simulate_branch: s exceeds H");
  if (a_path.empty())
    throw std::invalid_argument("simulate_branch: empty assignment path");
  for (const Vec& a : a_path)
    if (!spec.spaces.assignment_in_domain(a))
      throw DomainViolation("simulate_branch: a_path out of domain");

  NoiseSampler sampler(spec.noise);
  BranchContext ctx;
  ctx.history = spec.padded_initial_history();
  ctx.history.insert(ctx.history.end(), traj.records.begin(),
                     traj.records.begin() + (t - 1));
  if (policy == NoisePolicy::CommonRandomNumbers) {
    ctx.noise_seed = traj.seed;
    ctx.noise_replication = traj.replication;
  } else {
    ctx.noise_seed = fresh_seed;
    ctx.noise_replication = traj.replication;
  }
  return run_branch(spec, sampler, ctx, t, a_path, H, nullptr);
}

EffectSample oracle_effect(const SystemSpec& spec, Estimand estimand, int t,
                           int h, const Vec& a, const Vec& a_prime,
                           const Conditioning& cond, const OracleOptions& opt) {
  if (opt.n_reps < 2)
    throw std::invalid_argument("oracle_effect: nReps must be >= 2");
  if (t < 1 || t + h > spec.horizon_T)
    throw std::out_of_range("oracle_effect: horizon beyond T");
  if (cond.kind == ConditioningKind::OnFeature ||
      cond.kind == ConditioningKind::Both) {
    if (cond.feature.size() != spec.spaces.dX)
      throw std::invalid_argument("oracle_effect: conditioning feature dims");
  }
  bool pin_history = cond.kind == ConditioningKind::OnHistory ||
                     cond.kind == ConditioningKind::Both;
  bool pin_feature = cond.kind == ConditioningKind::OnFeature ||
                     cond.kind == ConditioningKind::Both;
  if (pin_history) {
    for (const DataRecord& r : cond.history)
      if (r.x.size() != spec.spaces.dX || r.a.size() != spec.spaces.dA ||
          r.y.size() != spec.spaces.dY)
        throw std::invalid_argument("oracle_effect: conditioning history dims");
  }

  NoiseSampler sampler(spec.noise);
  int dY = spec.spaces.dY;
  Mat diffs(dY, opt.n_reps);
  std::vector<Vec> path_a{a}, path_b{a_prime};

  parallel_for(std::size_t(opt.n_reps), opt.workers, [&](std::size_t r) {
    BranchContext ctx;
    ctx.noise_seed = opt.seed;
    ctx.noise_replication = r;
    if (pin_history) {
      // pinned conditioning variables; only downstream noise varies
      ctx.history = cond.history;
      std::vector<DataRecord> pad;
      SystemSpec tmp = spec;  // reuse zero-padding helper for short pins
      tmp.initial_history = ctx.history;
      ctx.history = tmp.padded_initial_history();
    } else {
      Trajectory traj = simulate_trajectory(spec, opt.seed, r);
      ctx.history = spec.padded_initial_history();
      ctx.history.insert(ctx.history.end(), traj.records.begin(),
                         traj.records.begin() + (t - 1));
    }
    const Vec* fpin = pin_feature ? &cond.feature : nullptr;
    Branch ba = run_branch(spec, sampler, ctx, t, path_a, h, fpin);
    BranchContext ctx_b = ctx;
    if (!opt.paired) ctx_b.noise_replication = r + std::uint64_t(opt.n_reps);
    Branch bb = run_branch(spec, sampler, ctx_b, t, path_b, h, fpin);
    diffs.col(Eigen::Index(r)) = ba.records[h].y - bb.records[h].y;
  });

  EffectSample out;
  out.estimand = estimand;
  out.horizon = h;
  out.contrast_a = a;
  out.contrast_a_prime = a_prime;
  out.n_reps = opt.n_reps;
  out.value = diffs.rowwise().mean();
  out.stderr_ = Vec(dY);
  for (int i = 0; i < dY; ++i) {
    double m = out.value[i];
    double ss = (diffs.row(i).array() - m).square().sum();
    double sd = std::sqrt(ss / (opt.n_reps - 1));
    out.stderr_[i] = sd / std::sqrt(double(opt.n_reps));
  }
  return out;
}

double default_bump(const Vec& a) { return 1e-3 * (1.0 + a.norm()); }

EffectSample marginal_effect(const SystemSpec& spec, int t, int h, const Vec& a,
                             double delta, const OracleOptions& opt) {
  if (spec.spaces.assignment_kind != AssignmentKind::Continuous)
    throw std::invalid_argument(
        "marginal_effect: requires a continuous assignment domain");
  if (delta <= 0) throw std::invalid_argument("marginal_effect: delta > 0");
  if (spec.spaces.dA != 1)
    throw std::invalid_argument("marginal_effect: scalar assignment only");

  Vec up = a, dn = a;
  up[0] += delta;
  dn[0] -= delta;
  Conditioning none;
  EffectSample diff =
      oracle_effect(spec, Estimand::Marginal, t, h, up, dn, none, opt);
  diff.value /= (2.0 * delta);
  diff.stderr_ /= (2.0 * delta);
  diff.contrast_a = a;
  diff.contrast_a_prime = a;
  return diff;
}

ExogeneityReport check_ps_exogeneity(const SystemSpec& spec,
                                     const std::vector<bool>& z_mask,
                                     int n_probes, int H, std::uint64_t seed) {
  int dZ = spec.spaces.dX + spec.spaces.dY;
  if (int(z_mask.size()) != dZ)
    throw std::invalid_argument("check_ps_exogeneity: mask length != dX+dY");
  ExogeneityReport rep;
  std::vector<Vec> atoms = spec.spaces.atoms();
  for (int p = 0; p < n_probes; ++p) {
    rng::Stream probe(seed, std::uint64_t(p), 0, 99);
    int t_max = std::max(1, spec.horizon_T - H);
    int t = 1 + int(probe.uniform() * t_max);
    t = std::min(t, t_max);
    Vec a(spec.spaces.dA), ap(spec.spaces.dA);
    if (!atoms.empty()) {
      std::size_t i = std::size_t(probe.uniform() * double(atoms.size()));
      std::size_t j = std::size_t(probe.uniform() * double(atoms.size()));
      a = atoms[std::min(i, atoms.size() - 1)];
      ap = atoms[std::min(j, atoms.size() - 1)];
    } else {
      for (int k = 0; k < spec.spaces.dA; ++k) {
        a[k] = 4.0 * probe.uniform() - 2.0;
        ap[k] = 4.0 * probe.uniform() - 2.0;
      }
    }
    Trajectory traj = simulate_trajectory(spec, seed + 1000 + p, 0);
    Branch ba = simulate_branch(spec, traj, t, {a}, H);
    Branch bb = simulate_branch(spec, traj, t, {ap}, H);
    for (int h = 0; h <= H; ++h) {
      Vec za(dZ), zb(dZ);
      za << ba.records[h].x, ba.records[h].y;
      zb << bb.records[h].x, bb.records[h].y;
      for (int k = 0; k < dZ; ++k) {
        if (!z_mask[std::size_t(k)]) continue;
        double dev = std::abs(za[k] - zb[k]);
        rep.max_abs_deviation = std::max(rep.max_abs_deviation, dev);
        if (dev != 0.0) rep.exogenous = false;
      }
    }
    ++rep.probes_run;
  }
  return rep;
}

}  // namespace pskit
