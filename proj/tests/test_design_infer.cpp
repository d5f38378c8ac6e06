#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pskit/design_infer.hpp"
#include "pskit/estimators.hpp"
#include "pskit/scenarios.hpp"

using namespace pskit;
using namespace pskit::design;
using testutil::vec1;

namespace {

NullSpec scalar_null(double psi0) {
  NullSpec n = NullSpec::sharp(1, 1, 0, 0);
  n.psi[0](0, 0) = psi0;
  return n;
}

Trajectory no_effect_news(int T, std::uint64_t seed, double zeta1 = 0.0) {
  auto cfg = scen::bundled("randtest-fisher").config["system"];
  cfg["zeta1"] = zeta1;
  auto sys = scen::make_system(cfg, T);
  return simulate_trajectory(sys, seed, 0);
}

StatisticSpec diff_stat(int H = 0) {
  StatisticSpec s;
  s.kind = StatisticSpec::Kind::WeightedHorizonDiff;
  s.H = H;
  return s;
}

}  // namespace

TEST_CASE("null recursion unrolls the distributed-lag imputation") {
  NullSpec n = NullSpec::sharp(1, 1, 1, 1);
  n.psi[0](0, 0) = 1.0;
  n.psi[1](0, 0) = 0.5;
  n.vartheta[0](0, 0) = 0.25;
  std::vector<Vec> a = {vec1(0.0), vec1(0.0), vec1(0.0)};
  std::vector<Vec> astar = {vec1(1.0), vec1(0.0), vec1(0.0)};
  auto g = null_g(n, astar, a);
  CHECK(g[0](0) == doctest::Approx(1.0));
  CHECK(g[1](0) == doctest::Approx(0.5 + 0.25));
  CHECK(g[2](0) == doctest::Approx(0.25 * 0.75));

  // zero feedback blocks reduce the P > 0 recursion to the pure lag sum
  NullSpec n0 = n;
  n0.vartheta[0](0, 0) = 0.0;
  NullSpec nq = NullSpec::sharp(1, 1, 1, 0);
  nq.psi = n0.psi;
  auto g0 = null_g(n0, astar, a);
  auto gq = null_g(nq, astar, a);
  for (int t = 0; t < 3; ++t) CHECK(g0[std::size_t(t)](0) == gq[std::size_t(t)](0));

  CHECK(n.is_sharp_null() == false);
  CHECK(NullSpec::sharp(1, 1, 2, 1).is_sharp_null());
  CHECK_THROWS(validate_null(scalar_null(1.0), 2, 1));
}

TEST_CASE("sharp-null resampling leaves the outcomes untouched") {
  Trajectory traj = no_effect_news(50, 3);
  auto sam = iid_bernoulli_sam(0.5);
  NullSpec sharp = NullSpec::sharp(1, 1, 0, 0);
  for (int b = 0; b < 5; ++b) {
    ResampledPath path = resample_assignments(traj, sam, sharp, 9, b);
    REQUIRE(path.y_star.size() == 50);
    for (int t = 0; t < 50; ++t)
      CHECK(path.y_star[std::size_t(t)](0) ==
            traj.records[std::size_t(t)].y(0));
  }
}

TEST_CASE("contemporaneous null shifts outcomes by psi0 (a* - a)") {
  Trajectory traj = no_effect_news(40, 4);
  auto sam = iid_bernoulli_sam(0.5);
  NullSpec n = scalar_null(1.5);
  ResampledPath path = resample_assignments(traj, sam, n, 11, 2);
  for (int t = 0; t < 40; ++t) {
    double want = traj.records[std::size_t(t)].y(0) +
                  1.5 * (path.a_star[std::size_t(t)](0) -
                         traj.records[std::size_t(t)].a(0));
    CHECK(path.y_star[std::size_t(t)](0) == doctest::Approx(want).epsilon(1e-12));
  }

  // replaying the same (seed, b) reproduces the path bit-for-bit
  ResampledPath again = resample_assignments(traj, sam, n, 11, 2);
  for (int t = 0; t < 40; ++t)
    CHECK(path.a_star[std::size_t(t)](0) == again.a_star[std::size_t(t)](0));
}

TEST_CASE("horizon-0 IPW statistic on a single period") {
  ResampledPath path;
  path.a_star = {vec1(1.0)};
  path.y_star = {vec1(4.0)};
  CHECK(ipw_statistic(path, 1, 0.5) == 8.0);
  path.a_star[0] = vec1(0.0);
  CHECK(ipw_statistic(path, 1, 0.5) == -8.0);
  CHECK_THROWS(ipw_statistic(path, 2, 0.5));
  CHECK_THROWS(ipw_statistic(path, 1, 1.0));
}

TEST_CASE("IPW redraw mean recovers the null effect parameter") {
  Trajectory traj = no_effect_news(30, 6);
  auto sam = iid_bernoulli_sam(0.5);
  StatisticSpec stat;
  stat.kind = StatisticSpec::Kind::Ipw;
  stat.p_star = 0.5;
  for (double psi0 : {0.0, 1.5}) {
    NullSpec n = scalar_null(psi0);
    const int B = 20000;
    double sum = 0, sumsq = 0;
    for (int b = 0; b < B; ++b) {
      ResampledPath path = resample_assignments(traj, sam, n, 21, b);
      double s = evaluate_statistic(stat, path.a_star, path.y_star)(0);
      sum += s;
      sumsq += s * s;
    }
    double mean = sum / B;
    double sd = std::sqrt(sumsq / B - mean * mean);
    CHECK(std::abs(mean - psi0) <= 3.0 * sd / std::sqrt(double(B)));
  }
}

TEST_CASE("weighted horizon statistic stacks diff-in-means contrasts") {
  std::vector<Vec> a = {vec1(1.0), vec1(0.0), vec1(1.0), vec1(0.0)};
  std::vector<Vec> y = {vec1(4.0), vec1(2.0), vec1(6.0), vec1(0.0)};
  Vec s0 = weighted_horizon_statistic(a, y, Mat(), 0);
  REQUIRE(s0.size() == 1);
  CHECK(s0(0) == doctest::Approx(4.0));

  Mat W(1, 1);
  W << 2.0;
  CHECK(weighted_horizon_statistic(a, y, W, 0)(0) == doctest::Approx(8.0));

  Vec s1 = weighted_horizon_statistic(a, y, Mat(), 1);
  REQUIRE(s1.size() == 2);
  CHECK(s1(0) == doctest::Approx(4.0));
  CHECK(s1(1) == doctest::Approx(1.0 - 6.0));

  Mat bad(1, 3);
  bad.setOnes();
  CHECK_THROWS(weighted_horizon_statistic(a, y, bad, 0));
  std::vector<Vec> a1 = {vec1(1.0), vec1(1.0)};
  std::vector<Vec> y1 = {vec1(1.0), vec1(2.0)};
  CHECK_THROWS_AS(weighted_horizon_statistic(a1, y1, Mat(), 0),
                  est::EmptyCell);
}

TEST_CASE("randomization test under a true sharp null is sane and replayable") {
  Trajectory traj = no_effect_news(200, 5);
  auto sam = iid_bernoulli_sam(0.5);
  NullSpec sharp = NullSpec::sharp(1, 1, 0, 0);
  TestResult r1 =
      randomization_test(traj, sam, sharp, diff_stat(), 200, 0.05, 13);
  TestResult r2 =
      randomization_test(traj, sam, sharp, diff_stat(), 200, 0.05, 13);
  CHECK(r1.p_value == r2.p_value);
  CHECK(r1.reject == r2.reject);
  CHECK(r1.observed(0) == r2.observed(0));
  CHECK(r1.B == 200);
  CHECK(r1.null_draws.rows() == 200);
  CHECK(r1.q_lo <= r1.q_hi);
  CHECK(r1.p_value > 0.0);
  CHECK(r1.p_value <= 1.0);
  CHECK(r1.assumes_conditional_independence);
  CHECK_FALSE(r1.reject);

  CHECK_THROWS(randomization_test(traj, sam, sharp, diff_stat(), 50, 0.05, 1));
}

TEST_CASE("constant outcomes give the degenerate p-value of one") {
  auto spec = testutil::scalar_spec(
      [](double, double v) { return v < 0.5 ? 0.0 : 1.0; },
      [](double, double, double) { return 3.0; },
      DistSpec::uniform(vec1(0.0), vec1(1.0)), testutil::point_mass(0.0), 120);
  Trajectory traj = simulate_trajectory(spec, 8, 0);
  auto sam = iid_bernoulli_sam(0.5);
  TestResult r = randomization_test(traj, sam, NullSpec::sharp(1, 1, 0, 0),
                                    diff_stat(), 150, 0.05, 2);
  CHECK(r.p_value == 1.0);
  CHECK_FALSE(r.reject);
  CHECK(r.observed(0) == 0.0);
}

TEST_CASE("a large true effect is rejected at theta = 0") {
  Trajectory traj = no_effect_news(500, 23, /*zeta1=*/2.0);
  auto sam = iid_bernoulli_sam(0.5);
  TestResult r = randomization_test(traj, sam, NullSpec::sharp(1, 1, 0, 0),
                                    diff_stat(), 200, 0.05, 17);
  CHECK(r.reject);
  CHECK(r.p_value <= 0.05);
}

TEST_CASE("vector statistics are calibrated through the studentized max") {
  Trajectory traj = no_effect_news(300, 41);
  auto sam = iid_bernoulli_sam(0.5);
  TestResult r = randomization_test(traj, sam, NullSpec::sharp(1, 1, 0, 0),
                                    diff_stat(2), 200, 0.05, 19);
  CHECK(r.observed.size() == 3);
  CHECK(r.null_draws.cols() == 3);
  CHECK(r.l_star.size() == 0);  // bracketing applies to scalars only
  CHECK(r.p_value > 0.0);
  CHECK(r.p_value <= 1.0);
}

TEST_CASE("region inversion accepts the true parameter on a no-effect path") {
  Trajectory traj = no_effect_news(200, 7);
  auto sam = iid_bernoulli_sam(0.5);
  std::vector<NullSpec> grid = {scalar_null(-1.0), scalar_null(0.0),
                                scalar_null(1.0)};
  ConfidenceRegion region =
      invert_to_region(traj, sam, grid, diff_stat(), 200, 0.05, 33);
  REQUIRE(region.accepted.size() == 3);
  REQUIRE(region.p_values.size() == 3);
  CHECK(region.accepted[1] == 1);   // true value 0 accepted
  CHECK(region.accepted[0] == 0);   // far-off values rejected
  CHECK(region.accepted[2] == 0);
}

TEST_CASE("empirical i.i.d. SAM reproduces the observed atom frequencies") {
  auto spec = testutil::scalar_spec(
      [](double, double v) { return v < 0.3 ? 1.0 : 0.0; },
      [](double yp, double, double w) { return 0.5 * yp + w; },
      DistSpec::uniform(vec1(0.0), vec1(1.0)),
      DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1)), 10000);
  std::vector<Trajectory> trajs = {simulate_trajectory(spec, 61, 0)};
  auto sam = fit_sam_sampler(trajs, SamFamily::IidEmpirical, 1);

  int hits = 0;
  const int n = 10000;
  std::vector<DataRecord> empty_hist;
  for (int i = 0; i < n; ++i) {
    rng::Stream st(99, std::uint64_t(i), 0, 5);
    if (sam.draw(empty_hist, Vec(0), st)(0) == 1.0) ++hits;
  }
  CHECK(std::abs(double(hits) / n - 0.3) < 0.02);
}

TEST_CASE("logistic SAM recovers assignment dependence on the lagged state") {
  // a_t ~ Bernoulli(sigmoid(0.3 + 0.8 y_{t-1})), y_t = 0.5 y_{t-1} + w_t
  auto spec = testutil::scalar_spec(
      [](double yp, double v) {
        double p1 = 1.0 / (1.0 + std::exp(-(0.3 + 0.8 * yp)));
        return v < p1 ? 1.0 : 0.0;
      },
      [](double yp, double, double w) { return 0.5 * yp + w; },
      DistSpec::uniform(vec1(0.0), vec1(1.0)),
      DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1)), 400);
  std::vector<Trajectory> trajs;
  for (int r = 0; r < 30; ++r)
    trajs.push_back(simulate_trajectory(spec, 71, std::uint64_t(r)));
  Vec theta = fit_sam_logistic_coefficients(trajs, 1);
  // features: [1, a_{t-1}, y_{t-1}]
  REQUIRE(theta.size() == 3);
  CHECK(std::abs(theta(0) - 0.3) < 0.1);
  CHECK(std::abs(theta(1)) < 0.15);
  CHECK(std::abs(theta(2) - 0.8) < 0.15);
}

TEST_CASE("degenerate assignment data is refused by both SAM families") {
  auto spec = testutil::scalar_spec(
      [](double, double) { return 1.0; },
      [](double yp, double, double w) { return 0.5 * yp + w; },
      testutil::point_mass(0.0),
      DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1)), 200);
  std::vector<Trajectory> trajs = {simulate_trajectory(spec, 81, 0)};
  CHECK_THROWS_AS(fit_sam_sampler(trajs, SamFamily::IidEmpirical, 1),
                  DegenerateSam);
  CHECK_THROWS_AS(
      fit_sam_sampler(trajs, SamFamily::LogisticInLagsAndFeatures, 1),
      DegenerateSam);
}
