#include "pskit/scenarios.hpp"

#include <cmath>
#include <memory>

namespace pskit::scen {

Mat json_to_mat(const json& j, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  if (Eigen::Index(j.size()) != rows)
    throw std::invalid_argument("matrix row count mismatch");
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(std::size_t(r));
    if (Eigen::Index(row.size()) != cols)
      throw std::invalid_argument("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row.at(std::size_t(c)).get<double>();
  }
  return m;
}

Vec json_to_vec(const json& j) {
  Vec v(Eigen::Index(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = j.at(std::size_t(i)).get<double>();
  return v;
}

namespace {

DistSpec dist_from_json(const json& j, int dim) {
  if (dim == 0 || j.is_null()) return DistSpec::degenerate(dim);
  std::string kind = j.value("kind", "gaussian");
  if (kind == "gaussian") {
    Vec mean = j.contains("mean") ? json_to_vec(j.at("mean"))
                                  : Vec(Vec::Zero(dim));
    Mat cov = j.contains("cov")
                  ? json_to_mat(j.at("cov"), dim, dim)
                  : Mat(Mat::Identity(dim, dim));
    return DistSpec::gaussian(mean, cov);
  }
  if (kind == "uniform")
    return DistSpec::uniform(json_to_vec(j.at("lo")), json_to_vec(j.at("hi")));
  if (kind == "discrete") {
    std::vector<Vec> points;
    for (const json& p : j.at("points")) points.push_back(json_to_vec(p));
    return DistSpec::discrete(points, json_to_vec(j.at("probs")));
  }
  throw std::invalid_argument("unknown distribution kind: " + kind);
}

NoiseModel noise_from_json(const json& j, int dU, int dV, int dW) {
  NoiseModel n;
  n.u = dist_from_json(j.contains("u") ? j.at("u") : json(), dU);
  n.v = dist_from_json(j.contains("v") ? j.at("v") : json(), dV);
  n.w = dist_from_json(j.contains("w") ? j.at("w") : json(), dW);
  return n;
}

SystemSpec make_news_impact(const json& sys, int T) {
  double rho = sys.value("rho", 0.5);
  double zeta1 = sys.value("zeta1", 2.0);
  double zeta2 = sys.value("zeta2", 0.0);
  double p1 = sys.value("p1", 0.5);
  double sigma = sys.value("sigma", 1.0);

  SystemSpec spec;
  spec.spaces.dX = 0;
  spec.spaces.dA = 1;
  spec.spaces.dY = 1;
  spec.spaces.assignment_kind = AssignmentKind::Binary;
  spec.noise.u = DistSpec::degenerate(0);
  spec.noise.v = DistSpec::uniform(Vec::Zero(1), Vec::Ones(1));
  spec.noise.w = DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  spec.sem.order = 1;
  spec.sem.chi = [](History, const Vec&) { return Vec(0); };
  spec.sem.alpha = [p1](History, const Vec&, const Vec& v) {
    return Vec::Constant(1, v[0] < p1 ? 1.0 : 0.0);
  };
  spec.sem.gamma = [rho, zeta1, zeta2, sigma](History hist, const Vec&,
                                              const Vec& a, const Vec& w) {
    double y_prev = hist.empty() ? 0.0 : hist.back().y[0];
    double zeta = zeta1 * a[0] + zeta2 * a[0] * a[0];
    return Vec::Constant(1, rho * y_prev + zeta + sigma * w[0]);
  };
  spec.horizon_T = T;
  return spec;
}

SystemSpec make_iv_encouragement(const json& sys, int T) {
  double rho = sys.value("rho", 0.3);
  double complier_effect = sys.value("complierEffect", 2.0);
  double compliance = sys.value("compliance", 0.5);
  double sigma = sys.value("sigma", 1.0);

  // X = (instrument, type) with type 0 never / 1 complier / 2 always;
  // the type channel makes complier status visible to gamma.
  SystemSpec spec;
  spec.spaces.dX = 2;
  spec.spaces.dA = 1;
  spec.spaces.dY = 1;
  spec.spaces.assignment_kind = AssignmentKind::Binary;
  spec.noise.u = DistSpec::uniform(Vec::Zero(3), Vec::Ones(3));
  spec.noise.v = DistSpec::degenerate(1);
  spec.noise.w = DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  spec.sem.order = 1;
  spec.sem.chi = [compliance](History, const Vec& u) {
    Vec x(2);
    x[0] = u[0] < 0.5 ? 1.0 : 0.0;
    x[1] = u[1] < compliance ? 1.0 : (u[2] < 0.5 ? 2.0 : 0.0);
    return x;
  };
  spec.sem.alpha = [](History, const Vec& x, const Vec&) {
    double a = x[1] == 1.0 ? x[0] : (x[1] == 2.0 ? 1.0 : 0.0);
    return Vec::Constant(1, a);
  };
  spec.sem.gamma = [rho, complier_effect, sigma](History hist, const Vec& x,
                                                 const Vec& a, const Vec& w) {
    double y_prev = hist.empty() ? 0.0 : hist.back().y[0];
    double effect = x[1] == 1.0 ? complier_effect : 0.0;
    return Vec::Constant(1, rho * y_prev + effect * a[0] + sigma * w[0]);
  };
  spec.horizon_T = T;
  return spec;
}

}  // namespace

linear::LinearStructural linear_from_json(const json& sys) {
  int dX = sys.value("dX", 0), dA = sys.value("dA", 1),
      dY = sys.value("dY", 1);
  int dU = sys.value("dU", dX), dV = sys.value("dV", dA),
      dW = sys.value("dW", dY);
  auto ls = linear::LinearStructural::zeros(dX, dA, dY, dU, dV, dW);
  int dD = ls.dD();
  auto load = [&](const char* key, Mat& dst, Eigen::Index r, Eigen::Index c) {
    if (sys.contains(key)) dst = json_to_mat(sys.at(key), r, c);
  };
  load("chi1", ls.chi1, dX, dD);
  load("alpha0", ls.alpha0, dA, dX);
  load("alpha1", ls.alpha1, dA, dD);
  load("Gamma", ls.Gamma, dA, dV);
  load("Delta", ls.Delta, dX, dU);
  load("gamma0X", ls.gamma0X, dY, dX);
  load("gamma0A", ls.gamma0A, dY, dA);
  load("gamma1", ls.gamma1, dY, dD);
  load("Omega", ls.Omega, dY, dW);
  return ls;
}

SystemSpec make_system(const json& sys, int horizon_T) {
  std::string kind = sys.value("kind", "linear");
  if (kind == "linear") {
    auto ls = linear_from_json(sys);
    NoiseModel noise = sys.contains("noise")
                           ? noise_from_json(sys.at("noise"), ls.dU, ls.dV,
                                             ls.dW)
                           : linear::standard_gaussian_noise(ls);
    return linear::to_system_spec(ls, horizon_T, noise);
  }
  if (kind == "news-impact") return make_news_impact(sys, horizon_T);
  if (kind == "iv-encouragement") return make_iv_encouragement(sys, horizon_T);
  throw std::invalid_argument("unknown system kind: " + kind);
}

ctrl::FinitePS finite_ps_from_json(const json& control) {
  ctrl::FinitePS fps;
  for (const json& a : control.at("actions"))
    fps.actions.push_back(json_to_vec(a));
  for (const json& y : control.at("outcomes"))
    fps.outcomes.push_back(json_to_vec(y));
  for (const json& p : control.at("noiseProbs"))
    fps.noise_probs.push_back(p.get<double>());
  fps.T = control.at("T").get<int>();
  fps.init_y = control.value("initY", 0);
  fps.init_a = control.value("initA", 0);

  // transition[y][ap][a][w] -> next outcome index
  auto table = std::make_shared<std::vector<std::vector<
      std::vector<std::vector<int>>>>>(
      control.at("transition")
          .get<std::vector<std::vector<std::vector<std::vector<int>>>>>());
  int nY = int(fps.outcomes.size());
  fps.transition = [table, nY](int y, int ap, int a, int w) {
    int out = table->at(std::size_t(y))
                  .at(std::size_t(ap))
                  .at(std::size_t(a))
                  .at(std::size_t(w));
    if (out < 0 || out >= nY)
      throw std::invalid_argument("transition table index out of range");
    return out;
  };
  return fps;
}

ctrl::LossSpec loss_from_json(const json& control, const ctrl::FinitePS& fps) {
  ctrl::LossSpec loss;
  Eigen::Index nY = Eigen::Index(fps.outcomes.size());
  Eigen::Index nA = Eigen::Index(fps.actions.size());
  for (const json& l : control.at("loss"))
    loss.per_period.push_back(json_to_mat(l, nY, nA));
  loss.terminal = json_to_vec(control.at("terminalLoss"));
  return loss;
}

std::vector<Scenario> bundled() {
  std::vector<Scenario> out;

  {
    Scenario s;
    s.name = "linear-confounded";
    s.description =
        "Linear Markov system with a discrete feature that drives both the "
        "assignment and the outcome; diff-in-means is biased, "
        "feature-conditional projections are not.";
    s.config = json{
        {"seed", 42},
        {"system",
         {{"kind", "linear"},
          {"dX", 1},
          {"dA", 1},
          {"dY", 1},
          {"Delta", {{1.0}}},
          {"alpha0", {{0.5}}},
          {"Gamma", {{1.0}}},
          {"gamma0X", {{1.0}}},
          {"gamma0A", {{2.0}}},
          {"gamma1", {{0.0, 0.0, 0.3}}},
          {"Omega", {{1.0}}},
          {"noise",
           {{"u",
             {{"kind", "discrete"},
              {"points", {{0.0}, {1.0}}},
              {"probs", {0.5, 0.5}}}},
            {"v",
             {{"kind", "discrete"},
              {"points", {{0.0}, {0.5}}},
              {"probs", {0.5, 0.5}}}},
            {"w", {{"kind", "gaussian"}}}}}}},
        {"estimate",
         {{"method", "lp"},
          {"T", 200000},
          {"horizons", {0, 1, 2}},
          {"includeFeatures", true}}}};
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "news-impact";
    s.description =
        "AR(1) outcome with an i.i.d. binary news assignment entering "
        "through zeta(a); the dynamic effect is the non-stochastic "
        "rho^h * {zeta(a) - zeta(a')}.";
    s.config = json{
        {"seed", 7},
        {"system",
         {{"kind", "news-impact"},
          {"rho", 0.5},
          {"zeta1", 2.0},
          {"zeta2", 0.0},
          {"p1", 0.5},
          {"sigma", 1.0}}},
        {"oracle",
         {{"estimand", "ate"},
          {"t", 10},
          {"h", 2},
          {"T", 20},
          {"a", {1.0}},
          {"aPrime", {0.0}},
          {"nReps", 2000}}}};
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "iv-encouragement";
    s.description =
        "Binary instrument encourages a half-complier population; the "
        "cell-weighted Wald ratio recovers the complier effect 2.";
    s.config = json{
        {"seed", 11},
        {"system",
         {{"kind", "iv-encouragement"},
          {"rho", 0.3},
          {"complierEffect", 2.0},
          {"compliance", 0.5},
          {"sigma", 1.0}}},
        {"estimate",
         {{"method", "iv_wald"}, {"T", 200000}, {"horizons", {0}}}}};
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "randtest-fisher";
    s.description =
        "Fisher-type sharp null on a no-effect news system: design-based "
        "randomization test with a known i.i.d. Bernoulli assignment law.";
    s.config = json{
        {"seed", 5},
        {"system",
         {{"kind", "news-impact"},
          {"rho", 0.5},
          {"zeta1", 0.0},
          {"p1", 0.5},
          {"sigma", 1.0}}},
        {"randtest",
         {{"T", 200},
          {"B", 200},
          {"alpha", 0.05},
          {"sam", {{"kind", "bernoulli"}, {"p1", 0.5}}},
          {"statistic", {{"kind", "weightedHorizonDiff"}, {"H", 0}}},
          {"null", {{"Q", 0}, {"P", 0}, {"psi", {{{0.0}}}}}}}}};
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "proxy-attenuation";
    s.description =
        "Noisy-assignment proxy: the projection on the proxy shrinks by "
        "B*Var(A*)/(B^2*Var(A*)+Var(Vbar)).";
    s.config = json{{"seed", 3},
                    {"estimate",
                     {{"method", "attenuation"},
                      {"T", 100000},
                      {"interceptA", 0.0},
                      {"slopeB", 1.0},
                      {"varAstar", 1.0},
                      {"varVbar", 1.0},
                      {"betaTrue", 2.0},
                      {"outcomeNoiseSd", 1.0}}}};
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "control-toy";
    s.description =
        "Four-period binary-action tabular control problem with two noise "
        "atoms; backward induction matches exhaustive path enumeration.";
    s.config = json{
        {"seed", 1},
        {"control",
         {{"actions", {{0.0}, {1.0}}},
          {"outcomes", {{-1.0}, {1.0}}},
          {"noiseProbs", {0.5, 0.5}},
          {"T", 4},
          {"initY", 0},
          {"initA", 0},
          // y' = a XOR w, independent of the current state
          {"transition",
           {{{{0, 1}, {1, 0}}, {{0, 1}, {1, 0}}},
            {{{0, 1}, {1, 0}}, {{0, 1}, {1, 0}}}}},
          // l_t(y, a) = (t mod 2 ? 1 : 2) * 1(y == 1) + 0.25 * a
          {"loss",
           {{{0.0, 0.25}, {1.0, 1.25}},
            {{0.0, 0.25}, {2.0, 2.25}},
            {{0.0, 0.25}, {1.0, 1.25}},
            {{0.0, 0.25}, {2.0, 2.25}}}},
          {"terminalLoss", {0.0, 1.5}}}}};
    out.push_back(s);
  }
  return out;
}

const Scenario& bundled(const std::string& name) {
  static const std::vector<Scenario> all = bundled();
  for (const Scenario& s : all)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown bundled scenario: " + name);
}

}  // namespace pskit::scen
