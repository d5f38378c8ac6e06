#include "pskit/cli_run.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pskit/design_infer.hpp"
#include "pskit/estimators.hpp"
#include "pskit/scenarios.hpp"

namespace pskit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kTasks = {"simulate", "irf",    "oracle",
                                         "estimate", "randtest", "invert",
                                         "control"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Writer {
  fs::path dir;
  std::vector<std::string>* outputs;

  void text(const std::string& name, const std::string& body) const {
    fs::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary);
    os << body;
    outputs->push_back((dir / name).string());
  }
  void js(const std::string& name, const json& j) const {
    text(name, j.dump(2) + "\n");
  }
};

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

std::vector<Trajectory> simulate_data(const json& config, const json& task,
                                      std::uint64_t seed, SystemSpec* out_spec,
                                      int default_T = 1000) {
  if (!config.contains("system"))
    throw ConfigError("config requires a system for this task");
  int T = task.value("T", default_T);
  int reps = task.value("reps", 1);
  SystemSpec spec = scen::make_system(config.at("system"), T);
  auto violations = validate_system(spec);
  if (!violations.empty())
    throw ValidationError("system validation failed: " +
                          violations.front().code + ": " +
                          violations.front().message);
  std::vector<Trajectory> trajs;
  for (int r = 0; r < reps; ++r)
    trajs.push_back(simulate_trajectory(spec, seed, std::uint64_t(r)));
  if (out_spec) *out_spec = spec;
  return trajs;
}

std::string trajectory_csv(const std::vector<Trajectory>& trajs) {
  std::ostringstream os;
  const auto& first = trajs.front().records.front();
  os << "rep,t";
  for (Eigen::Index i = 0; i < first.x.size(); ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < first.a.size(); ++i) os << ",a" << i;
  for (Eigen::Index i = 0; i < first.y.size(); ++i) os << ",y" << i;
  os << "\n";
  for (std::size_t r = 0; r < trajs.size(); ++r)
    for (const DataRecord& rec : trajs[r].records) {
      os << r << "," << rec.t;
      for (Eigen::Index i = 0; i < rec.x.size(); ++i)
        os << "," << fmt(rec.x[i]);
      for (Eigen::Index i = 0; i < rec.a.size(); ++i)
        os << "," << fmt(rec.a[i]);
      for (Eigen::Index i = 0; i < rec.y.size(); ++i)
        os << "," << fmt(rec.y[i]);
      os << "\n";
    }
  return os.str();
}

// ---------------------------------------------------------------------------

std::string run_simulate(const json& config, const json& task,
                         std::uint64_t seed, const Writer& w, int) {
  auto trajs = simulate_data(config, task, seed, nullptr);
  w.text("trajectory.csv", trajectory_csv(trajs));
  std::ostringstream sum;
  sum << "simulate reps=" << trajs.size()
      << " T=" << trajs.front().records.size() << " -> trajectory.csv\n";
  return sum.str();
}

std::string run_irf(const json& config, const json& task, std::uint64_t,
                    const Writer& w, int) {
  if (!config.contains("system") ||
      config.at("system").value("kind", "linear") != "linear")
    throw ValidationError("irf task requires a linear system");
  auto ls = scen::linear_from_json(config.at("system"));
  auto lr = linear::assemble(ls);
  int H = task.value("H", 10);
  auto table = linear::irf(lr, ls.gamma0A, H);

  std::ostringstream os;
  os << "h,block,row,col,psi,theta\n";
  auto block_of = [&](Eigen::Index r) {
    if (r < ls.dX) return std::make_pair(std::string("x"), r);
    if (r < ls.dX + ls.dA)
      return std::make_pair(std::string("a"), r - ls.dX);
    return std::make_pair(std::string("y"), r - ls.dX - ls.dA);
  };
  Eigen::Index max_c = std::max<Eigen::Index>(ls.dA, ls.dEps());
  for (int h = 0; h <= H; ++h)
    for (Eigen::Index r = 0; r < ls.dD(); ++r)
      for (Eigen::Index c = 0; c < max_c; ++c) {
        auto [blk, br] = block_of(r);
        os << h << "," << blk << "," << br << "," << c << ",";
        if (c < ls.dA) os << fmt(table.Psi[std::size_t(h)](r, c));
        os << ",";
        if (c < ls.dEps()) os << fmt(table.Theta[std::size_t(h)](r, c));
        os << "\n";
      }
  w.text("irf.csv", os.str());
  std::ostringstream sum;
  sum << "irf H=" << H << " spectralRadius=" << fmt(lr.spectral_radius)
      << " stable=" << (lr.stable ? "true" : "false") << " -> irf.csv\n";
  return sum.str();
}

std::string run_oracle(const json& config, const json& task,
                       std::uint64_t seed, const Writer& w, int workers) {
  SystemSpec spec;
  simulate_data(config, task, seed, &spec, 50);  // validates the system
  std::string est_name = task.value("estimand", "ate");
  int t = task.value("t", 1);
  int h = task.value("h", 0);
  Vec a = scen::json_to_vec(task.at("a"));
  Vec ap = scen::json_to_vec(task.at("aPrime"));
  OracleOptions opt;
  opt.n_reps = task.value("nReps", 1000);
  opt.seed = seed;
  opt.workers = workers;

  Estimand est = Estimand::ATE;
  Conditioning cond;
  if (est_name == "cate" || est_name == "cfte") {
    if (!task.contains("conditionFeature"))
      throw ConfigError("conditional oracle requires conditionFeature");
    cond.kind = ConditioningKind::OnFeature;
    cond.feature = scen::json_to_vec(task.at("conditionFeature"));
    est = est_name == "cate" ? Estimand::CATE : Estimand::CFTE;
  }
  EffectSample sample = oracle_effect(spec, est, t, h, a, ap, cond, opt);

  json out = {{"estimand", est_name},
              {"t", t},
              {"h", h},
              {"a", vec_to_json(a)},
              {"aPrime", vec_to_json(ap)},
              {"value", vec_to_json(sample.value)},
              {"stderr", vec_to_json(sample.stderr_)},
              {"nReps", sample.n_reps},
              {"seed", seed}};
  w.js("oracle.json", out);
  std::ostringstream sum;
  sum << "oracle " << est_name << " h=" << h << " value="
      << fmt(sample.value[0]) << " stderr=" << fmt(sample.stderr_[0])
      << " -> oracle.json\n";
  return sum.str();
}

json effect_json(const est::EffectEstimate& e) {
  return {{"estimand", "ate"},
          {"h", e.horizon},
          {"a", vec_to_json(e.contrast_a)},
          {"aPrime", vec_to_json(e.contrast_a_prime)},
          {"point", vec_to_json(e.point)},
          {"stderr", vec_to_json(e.se)},
          {"method", e.method},
          {"nObs", Eigen::Index(e.n_obs)}};
}

std::string run_estimate(const json& config, const json& task,
                         std::uint64_t seed, const Writer& w, int) {
  std::string method = task.value("method", "lp");
  json results = json::array();
  std::ostringstream sum;

  if (method == "attenuation") {
    est::ProxyScenario sc;
    sc.intercept = task.value("interceptA", 0.0);
    sc.slope_B = task.value("slopeB", 1.0);
    sc.var_astar = task.value("varAstar", 1.0);
    sc.var_vbar = task.value("varVbar", 1.0);
    sc.beta_true = task.value("betaTrue", 2.0);
    sc.outcome_noise_sd = task.value("outcomeNoiseSd", 1.0);
    sc.T = task.value("T", 100000);
    auto rep = est::attenuation_check(sc, 0, seed);
    json out = {{"betaOnTrue", rep.beta_on_true},
                {"betaOnProxy", rep.beta_on_proxy},
                {"measuredFactor", rep.measured_factor},
                {"predictedFactor", rep.predicted_factor},
                {"factorStderr", rep.factor_se}};
    w.js("estimates.json", out);
    sum << "attenuation measured=" << fmt(rep.measured_factor)
        << " predicted=" << fmt(rep.predicted_factor)
        << " -> estimates.json\n";
    return sum.str();
  }

  auto trajs = simulate_data(config, task, seed, nullptr, 10000);
  std::vector<int> horizons =
      task.value("horizons", std::vector<int>{0});
  int m = task.value("m", 1);
  est::Panel panel = est::build_panel(trajs, horizons, m);
  Vec a = task.contains("a") ? scen::json_to_vec(task.at("a"))
                             : Vec(Vec::Ones(panel.dA));
  Vec ap = task.contains("aPrime") ? scen::json_to_vec(task.at("aPrime"))
                                   : Vec(Vec::Zero(panel.dA));

  for (int h : horizons) {
    if (method == "diff_in_means") {
      results.push_back(effect_json(est::diff_in_means(panel, h, a, ap)));
    } else if (method == "lp") {
      auto fit = est::lp_fit(panel, h, task.value("includeFeatures", true),
                             est::Residualize::Joint);
      results.push_back({{"method", "lp"},
                         {"h", h},
                         {"kappa", vec_to_json(fit.kappa)},
                         {"beta", fit.beta(0, 0)},
                         {"betaStderr", fit.beta_se(0, 0)},
                         {"covMethod", fit.cov_method},
                         {"nObs", Eigen::Index(fit.n_obs)}});
    } else if (method == "kernel") {
      auto fit = est::kernel_mu(panel, h, est::KernelConditioning::AOnly,
                                est::KernelKind::NadarayaWatson);
      results.push_back(effect_json(est::plug_in_ate(panel, fit, h, a, ap)));
    } else if (method == "aipw") {
      auto outcome = est::kernel_mu(panel, h, est::KernelConditioning::AX,
                                    est::KernelKind::DiffInMeans);
      auto prop = panel.dX > 0 ? est::logistic_on_features(panel)
                               : est::empirical_frequency(panel);
      results.push_back(
          effect_json(est::aipw_ate(panel, h, a, ap, outcome, prop)));
    } else if (method == "iv_wald") {
      est::Panel iv_panel = panel;
      iv_panel.X = panel.X.leftCols(1);  // column 0 is the instrument
      iv_panel.dX = 1;
      results.push_back(effect_json(est::iv_wald(iv_panel, h)));
    } else {
      throw ConfigError("unknown estimate method: " + method);
    }
  }
  w.js("estimates.json", results);
  for (const json& r : results) {
    sum << "estimate " << method << " h=" << r.at("h").get<int>();
    if (r.contains("point"))
      sum << " point=" << fmt(r.at("point").at(0).get<double>())
          << " stderr=" << fmt(r.at("stderr").at(0).get<double>());
    else
      sum << " beta=" << fmt(r.at("beta").get<double>())
          << " stderr=" << fmt(r.at("betaStderr").get<double>());
    sum << "\n";
  }
  return sum.str();
}

design::NullSpec null_from_json(const json& j, int dY, int dA) {
  design::NullSpec null;
  null.Q = j.value("Q", 0);
  null.P = j.value("P", 0);
  if (j.contains("psi"))
    for (const json& m : j.at("psi"))
      null.psi.push_back(scen::json_to_mat(m, dY, dA));
  else
    null.psi.assign(std::size_t(null.Q + 1), Mat::Zero(dY, dA));
  if (j.contains("vartheta"))
    for (const json& m : j.at("vartheta"))
      null.vartheta.push_back(scen::json_to_mat(m, dY, dY));
  else
    null.vartheta.assign(std::size_t(null.P), Mat::Zero(dY, dY));
  design::validate_null(null, dY, dA);
  return null;
}

design::SamSampler sam_from_json(const json& j,
                                 const std::vector<Trajectory>& trajs) {
  std::string kind = j.value("kind", "bernoulli");
  if (kind == "bernoulli")
    return design::iid_bernoulli_sam(j.value("p1", 0.5));
  if (kind == "fitIid")
    return design::fit_sam_sampler(trajs, design::SamFamily::IidEmpirical);
  if (kind == "fitLogistic")
    return design::fit_sam_sampler(
        trajs, design::SamFamily::LogisticInLagsAndFeatures, j.value("m", 1));
  throw ConfigError("unknown sam kind: " + kind);
}

design::StatisticSpec statistic_from_json(const json& j) {
  design::StatisticSpec stat;
  std::string kind = j.value("kind", "weightedHorizonDiff");
  if (kind == "weightedHorizonDiff") {
    stat.kind = design::StatisticSpec::Kind::WeightedHorizonDiff;
    stat.H = j.value("H", 0);
    if (j.contains("W")) {
      const json& wj = j.at("W");
      stat.W = scen::json_to_mat(wj, Eigen::Index(wj.size()),
                                 Eigen::Index(wj.at(0).size()));
    }
  } else if (kind == "ipw") {
    stat.kind = design::StatisticSpec::Kind::Ipw;
    stat.p_star = j.value("pStar", 0.5);
  } else {
    throw ConfigError("unknown statistic kind: " + kind);
  }
  return stat;
}

json test_result_json(const design::TestResult& tr) {
  return {{"observed", vec_to_json(tr.observed)},
          {"pValue", tr.p_value},
          {"reject", tr.reject},
          {"alpha", tr.alpha},
          {"qLo", tr.q_lo},
          {"qHi", tr.q_hi},
          {"B", tr.B},
          {"seed", tr.seed},
          {"resampleRetries", tr.resample_retries},
          {"assumesConditionalIndependence",
           tr.assumes_conditional_independence}};
}

std::string run_randtest(const json& config, const json& task,
                         std::uint64_t seed, const Writer& w, int workers) {
  auto trajs = simulate_data(config, task, seed, nullptr, 200);
  const Trajectory& obs = trajs.front();
  int dY = int(obs.records.front().y.size());
  int dA = int(obs.records.front().a.size());
  auto null = null_from_json(task.value("null", json::object()), dY, dA);
  auto sam = sam_from_json(task.value("sam", json::object()), trajs);
  auto stat = statistic_from_json(task.value("statistic", json::object()));
  int B = task.value("B", 500);
  double alpha = task.value("alpha", 0.05);

  auto tr = design::randomization_test(obs, sam, null, stat, B, alpha,
                                       seed + 1, workers);
  w.js("randtest.json", test_result_json(tr));
  std::ostringstream os;
  os << "b";
  for (Eigen::Index c = 0; c < tr.null_draws.cols(); ++c) os << ",t" << c;
  os << "\n";
  for (int b = 0; b < tr.B; ++b) {
    os << b;
    for (Eigen::Index c = 0; c < tr.null_draws.cols(); ++c)
      os << "," << fmt(tr.null_draws(b, c));
    os << "\n";
  }
  w.text("nulldraws.csv", os.str());
  std::ostringstream sum;
  sum << "randtest B=" << tr.B << " pValue=" << fmt(tr.p_value)
      << " reject=" << (tr.reject ? "true" : "false")
      << " -> randtest.json nulldraws.csv\n";
  return sum.str();
}

std::string run_invert(const json& config, const json& task,
                       std::uint64_t seed, const Writer& w, int workers) {
  auto trajs = simulate_data(config, task, seed, nullptr, 200);
  const Trajectory& obs = trajs.front();
  int dY = int(obs.records.front().y.size());
  int dA = int(obs.records.front().a.size());
  if (dY != 1 || dA != 1)
    throw ValidationError("invert task supports scalar psi0 grids only");
  auto sam = sam_from_json(task.value("sam", json::object()), trajs);
  auto stat = statistic_from_json(task.value("statistic", json::object()));
  int B = task.value("B", 300);
  double alpha = task.value("alpha", 0.05);
  std::vector<double> grid = task.at("grid").get<std::vector<double>>();

  std::vector<design::NullSpec> nulls;
  for (double v : grid) {
    auto n = design::NullSpec::sharp(1, 1);
    n.psi[0](0, 0) = v;
    nulls.push_back(n);
  }
  auto region = design::invert_to_region(obs, sam, nulls, stat, B, alpha,
                                         seed + 1, workers);
  std::ostringstream os;
  os << "theta,accepted,pValue\n";
  int n_acc = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << fmt(grid[i]) << "," << int(region.accepted[i]) << ","
       << fmt(region.p_values[i]) << "\n";
    n_acc += region.accepted[i];
  }
  w.text("region.csv", os.str());
  std::ostringstream sum;
  sum << "invert grid=" << grid.size() << " accepted=" << n_acc
      << " alpha=" << fmt(alpha) << " -> region.csv\n";
  return sum.str();
}

std::string run_control(const json& config, const json& task, std::uint64_t,
                        const Writer& w, int) {
  const json& cj = config.contains("control") ? config.at("control") : task;
  auto fps = scen::finite_ps_from_json(cj);
  auto loss = scen::loss_from_json(cj, fps);
  auto policy = ctrl::solve_backward(fps, loss);

  std::ostringstream os;
  os << "t,yPrev,aPrev,action,value\n";
  for (int t = 1; t <= fps.T; ++t)
    for (int y = 0; y < int(fps.outcomes.size()); ++y)
      for (int ap = 0; ap < int(fps.actions.size()); ++ap)
        os << t << "," << y << "," << ap << ","
           << policy.action[std::size_t(t - 1)](y, ap) << ","
           << fmt(policy.value[std::size_t(t - 1)](y, ap)) << "\n";
  w.text("policy.csv", os.str());
  double v1 = policy.value[0](fps.init_y, fps.init_a);
  w.js("control.json",
       {{"valueAtStart", v1}, {"tieBreak", policy.tie_break}});
  std::ostringstream sum;
  sum << "control T=" << fps.T << " valueAtStart=" << fmt(v1)
      << " -> policy.csv control.json\n";
  return sum.str();
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

json load_config(const std::string& path_or_name) {
  if (fs::exists(path_or_name)) {
    std::ifstream is(path_or_name);
    json config;
    try {
      is >> config;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config;
  }
  try {
    return scen::bundled(path_or_name).config;
  } catch (const std::invalid_argument&) {
    throw ConfigError("config not found: " + path_or_name);
  }
}

std::string task_of(const json& config) {
  std::string found;
  int count = 0;
  for (const std::string& t : kTasks)
    if (config.contains(t)) {
      found = t;
      ++count;
    }
  if (count != 1) throw ConfigError("exactly one task");
  return found;
}

RunManifest run_config(const json& config, const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override,
                       int workers) {
  auto start = std::chrono::steady_clock::now();
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  std::string task_name = task_of(config);
  std::uint64_t seed =
      seed_override ? *seed_override : config.value("seed", std::uint64_t(1));

  RunManifest man;
  man.seed = seed;
  man.config_hash = fnv1a_hex(config.dump());
  Writer w{fs::path(out_dir), &man.outputs};
  const json& task = config.at(task_name);

  if (task_name == "simulate")
    man.summary = run_simulate(config, task, seed, w, workers);
  else if (task_name == "irf")
    man.summary = run_irf(config, task, seed, w, workers);
  else if (task_name == "oracle")
    man.summary = run_oracle(config, task, seed, w, workers);
  else if (task_name == "estimate")
    man.summary = run_estimate(config, task, seed, w, workers);
  else if (task_name == "randtest")
    man.summary = run_randtest(config, task, seed, w, workers);
  else if (task_name == "invert")
    man.summary = run_invert(config, task, seed, w, workers);
  else
    man.summary = run_control(config, task, seed, w, workers);

  man.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  json outputs = json::array();
  for (const std::string& path : man.outputs) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream body;
    body << is.rdbuf();
    outputs.push_back({{"path", fs::path(path).filename().string()},
                       {"hash", fnv1a_hex(body.str())}});
  }
  json mj = {{"configHash", man.config_hash},
             {"seed", man.seed},
             {"version", man.version},
             {"wallSeconds", man.wall_seconds},
             {"outputs", outputs}};
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "manifest.json", std::ios::binary);
  os << mj.dump(2) << "\n";
  return man;
}

RunManifest run(const std::string& config_path_or_name,
                const std::string& out_dir,
                std::optional<std::uint64_t> seed_override, int workers) {
  return run_config(load_config(config_path_or_name), out_dir, seed_override,
                    workers);
}

}  // namespace pskit::cli
