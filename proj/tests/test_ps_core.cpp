#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "pskit/ps_core.hpp"

using namespace pskit;
using testutil::point_mass;
using testutil::scalar_spec;
using testutil::vec1;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(),
                     [&](const Violation& x) { return x.code == code; });
}

SystemSpec identity_spec() {
  // x = u, a = v, y = w; pure pass-through of the noise coordinates
  SystemSpec spec;
  spec.spaces.dX = 1;
  spec.spaces.dA = 1;
  spec.spaces.dY = 1;
  spec.noise.u = DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  spec.noise.v = DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  spec.noise.w = DistSpec::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  spec.horizon_T = 3;
  spec.sem.order = 1;
  spec.sem.chi = [](History, const Vec& u) { return u; };
  spec.sem.alpha = [](History, const Vec&, const Vec& v) { return v; };
  spec.sem.gamma = [](History, const Vec&, const Vec&, const Vec& w) {
    return w;
  };
  return spec;
}

}  // namespace

TEST_CASE("well-formed system validates cleanly") {
  auto spec = identity_spec();
  CHECK(validate_system(spec).empty());

  auto sc = scalar_spec([](double, double v) { return v; },
                        [](double yp, double a, double w) {
                          return 0.5 * yp + a + w;
                        },
                        point_mass(1.0), point_mass(0.0), 5);
  CHECK(validate_system(sc).empty());
}

TEST_CASE("validator flags malformed probability vectors and dimensions") {
  auto spec = identity_spec();
  Vec probs(2);
  probs << 0.45, 0.45;  // sums to 0.9
  spec.noise.v = DistSpec::discrete({vec1(0.0), vec1(1.0)}, probs);
  CHECK(has_code(validate_system(spec), "ProbSumViolation"));

  auto spec2 = identity_spec();
  spec2.sem.gamma = [](History, const Vec&, const Vec&, const Vec&) {
    return Vec::Zero(3);  // dY is 1
  };
  CHECK(has_code(validate_system(spec2), "DimensionViolation"));

  auto spec3 = identity_spec();
  spec3.sem.alpha = nullptr;
  CHECK(has_code(validate_system(spec3), "ComponentViolation"));

  auto spec4 = identity_spec();
  spec4.horizon_T = 0;
  CHECK(has_code(validate_system(spec4), "HorizonViolation"));
}

TEST_CASE("step_dgp passes noise through the identity components") {
  auto spec = identity_spec();
  NoiseDraw nd;
  nd.u = vec1(1.0);
  nd.v = vec1(2.0);
  nd.w = vec1(3.0);
  auto hist = spec.padded_initial_history();
  DataRecord r = step_dgp(spec, hist, nd);
  CHECK(r.x(0) == 1.0);
  CHECK(r.a(0) == 2.0);
  CHECK(r.y(0) == 3.0);
}

TEST_CASE("assignment loading scales the outcome as specified") {
  // y = 2a with a pinned to 3 by the assignment component
  auto spec = scalar_spec([](double, double) { return 3.0; },
                          [](double, double a, double) { return 2.0 * a; },
                          point_mass(0.0), point_mass(0.0), 1);
  NoiseDraw nd;
  nd.u = Vec(0);
  nd.v = vec1(0.0);
  nd.w = vec1(0.0);
  auto hist = spec.padded_initial_history();
  DataRecord r = step_dgp(spec, hist, nd);
  CHECK(r.a(0) == 3.0);
  CHECK(r.y(0) == 6.0);
}

TEST_CASE("evaluation is triangular: x before a before y") {
  SystemSpec spec = identity_spec();
  spec.sem.chi = [](History, const Vec&) { return vec1(1.0); };
  spec.sem.alpha = [](History, const Vec& x, const Vec&) {
    return vec1(10.0 * x(0));
  };
  spec.sem.gamma = [](History, const Vec& x, const Vec& a, const Vec&) {
    return vec1(x(0) + a(0));
  };
  NoiseDraw nd;
  nd.u = vec1(0.0);
  nd.v = vec1(0.0);
  nd.w = vec1(0.0);
  auto hist = spec.padded_initial_history();
  DataRecord r = step_dgp(spec, hist, nd);
  CHECK(r.x(0) == 1.0);
  CHECK(r.a(0) == 10.0);
  CHECK(r.y(0) == 11.0);
}

TEST_CASE("order window enforces m-history locality") {
  SystemSpec spec = identity_spec();
  spec.sem.order = 2;
  spec.sem.gamma = [](History h, const Vec&, const Vec&, const Vec&) {
    // uses the oldest record of the (trimmed) window
    return vec1(h.front().y(0));
  };

  auto rec = [](double y, int t) {
    DataRecord r;
    r.x = vec1(0.0);
    r.a = vec1(0.0);
    r.y = vec1(y);
    r.t = t;
    return r;
  };
  std::vector<DataRecord> full_a = {rec(99.0, 1), rec(2.0, 2), rec(3.0, 3)};
  std::vector<DataRecord> full_b = {rec(-5.0, 1), rec(2.0, 2), rec(3.0, 3)};

  History wa = order_window(spec, full_a);
  History wb = order_window(spec, full_b);
  CHECK(wa.size() == 2);
  // records older than the window cannot influence the step
  NoiseDraw nd;
  nd.u = vec1(0.0);
  nd.v = vec1(0.0);
  nd.w = vec1(0.0);
  DataRecord ra = step_dgp(spec, wa, nd);
  DataRecord rb = step_dgp(spec, wb, nd);
  CHECK(ra.y(0) == rb.y(0));
  CHECK(ra.y(0) == 2.0);
}

TEST_CASE("noise draws are a pure function of (seed, replication, t)") {
  auto spec = identity_spec();
  NoiseDraw a = draw_noise(spec, 5, 2, 2);
  NoiseDraw b = draw_noise(spec, 5, 2, 2);
  CHECK(a.u(0) == b.u(0));
  CHECK(a.v(0) == b.v(0));
  CHECK(a.w(0) == b.w(0));
  NoiseDraw c = draw_noise(spec, 5, 2, 3);
  CHECK(a.w(0) != c.w(0));
  NoiseDraw d = draw_noise(spec, 6, 2, 2);
  CHECK(a.w(0) != d.w(0));
}

TEST_CASE("discrete sampler matches its probabilities") {
  NoiseModel model;
  model.u = DistSpec::degenerate(0);
  model.v = testutil::coin(0.5);
  model.w = DistSpec::degenerate(1);
  NoiseSampler sampler(model);
  const int n = 1000000;
  double sum = 0.0;
  for (int t = 1; t <= n; ++t) sum += sampler.draw(77, 0, t).v(0);
  CHECK(std::abs(sum / n - 0.5) < 0.002);
}

TEST_CASE("gaussian sampler reproduces the requested covariance") {
  NoiseModel model;
  model.u = DistSpec::degenerate(0);
  model.v = DistSpec::degenerate(1);
  Mat cov(2, 2);
  cov << 1.0, 0.5, 0.5, 1.0;
  model.w = DistSpec::gaussian(Vec::Zero(2), cov);
  NoiseSampler sampler(model);
  const int n = 400000;
  double s00 = 0, s01 = 0, s11 = 0, m0 = 0, m1 = 0;
  for (int t = 1; t <= n; ++t) {
    Vec w = sampler.draw(88, 0, t).w;
    m0 += w(0);
    m1 += w(1);
    s00 += w(0) * w(0);
    s01 += w(0) * w(1);
    s11 += w(1) * w(1);
  }
  m0 /= n;
  m1 /= n;
  CHECK(std::abs(s00 / n - m0 * m0 - 1.0) < 0.01);
  CHECK(std::abs(s01 / n - m0 * m1 - 0.5) < 0.01);
  CHECK(std::abs(s11 / n - m1 * m1 - 1.0) < 0.01);
  CHECK(std::abs(m0) < 0.01);
  CHECK(std::abs(m1) < 0.01);
}
