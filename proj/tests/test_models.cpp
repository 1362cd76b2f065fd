#include <cmath>
#include <vector>

#include "doctest.h"
#include "rgbsde/errors.hpp"
#include "rgbsde/forward_sde.hpp"
#include "rgbsde/models.hpp"

using namespace rgbsde;

namespace {

DriverParams linear_params(double fy, double gy) {
  DriverParams p;
  p.f = [fy](double, StateView, double y, StateView) { return fy * y; };
  p.g = [gy](double, StateView, double y) { return gy * y; };
  p.mu = fy;
  p.beta = gy;
  p.growth = std::max(std::abs(fy), std::abs(gy));
  return p;
}

}  // namespace

TEST_CASE("linear monotone driver passes every clause") {
  const DriverSpec driver(linear_params(-1.0, -1.0));
  const auto report = check_assumptions(driver, 2000, 11);
  CHECK(report.all_passed());
  CHECK(report.clauses.size() == 5);
}

TEST_CASE("under-declared z-Lipschitz constant is caught") {
  DriverParams p = linear_params(0.0, -1.0);
  p.f = [](double, StateView, double, StateView z) { return z[0]; };
  p.lambda = 0.5;
  p.growth = 1.0;
  const auto report = check_assumptions(DriverSpec(p), 2000, 3);
  const auto& iii = report.clause("iii");
  CHECK_FALSE(iii.passed);
  // worst case is 0.5 |z - z'| with |z - z'| < 20 on the default box
  CHECK(iii.worst_violation > 0.0);
  CHECK(iii.worst_violation <= 0.5 * 20.0);
  CHECK(iii.worst_violation > 0.5 * 15.0);
}

TEST_CASE("cubic driver is monotone with mu = 0") {
  DriverParams p = linear_params(0.0, -1.0);
  p.f = [](double, StateView, double y, StateView) { return -y * y * y; };
  p.mu = 0.0;
  const auto report = check_assumptions(DriverSpec(p), 2000, 5);
  CHECK(report.clause("iv").passed);
  CHECK(report.clause("iv").worst_violation <= 0.0);
  // not of linear growth with M = 0
  CHECK_FALSE(report.clause("v").passed);

  // brute-force sign check on a grid
  for (double y = -3.0; y <= 3.0; y += 0.25) {
    for (double y2 = -3.0; y2 <= 3.0; y2 += 0.25) CHECK((y - y2) * (y2 * y2 * y2 - y * y * y) <= 0.0);
  }
}

TEST_CASE("driver construction validates beta, p and callables") {
  DriverParams p = linear_params(-1.0, -1.0);
  p.beta = 0.0;
  CHECK_THROWS_AS(DriverSpec{p}, InvalidArgument);
  p.beta = -1.0;
  p.p = 2.0;
  CHECK_THROWS_AS(DriverSpec{p}, InvalidArgument);
  p.p = 1.0;
  CHECK_THROWS_AS(DriverSpec{p}, InvalidArgument);
  p.p = 1.5;
  p.f = nullptr;
  CHECK_THROWS_AS(DriverSpec{p}, NonCallableDriver);
  const DriverSpec ok(linear_params(-1.0, -1.0));
  CHECK_THROWS_AS(ok.with_p(2.5), InvalidArgument);
  CHECK(ok.with_p(1.2).p() == 1.2);
}

TEST_CASE("throwing driver surfaces as NonCallableDriver") {
  DriverParams p = linear_params(-1.0, -1.0);
  p.f = [](double, StateView, double, StateView) -> double { throw std::domain_error("boom"); };
  CHECK_THROWS_AS(check_assumptions(DriverSpec(p), 10, 1), NonCallableDriver);
}

TEST_CASE("half-line domain") {
  const auto d = half_line_domain();
  const double two = 2.0, zero = 0.0;
  CHECK(d.psi(StateView(&two, 1)) == 2.0);
  CHECK(d.psi(StateView(&zero, 1)) == 0.0);
  CHECK(d.gradient(StateView(&zero, 1))[0] == 1.0);
  CHECK(check_unit_normal(d, 0.5, 200, 1) < 1e-12);
}

TEST_CASE("interval and ball domains have unit normals near the boundary") {
  const auto iv = interval_domain(2.0);
  const double left = 0.0, right = 2.0;
  CHECK(iv.gradient(StateView(&left, 1))[0] == doctest::Approx(1.0));
  CHECK(iv.gradient(StateView(&right, 1))[0] == doctest::Approx(-1.0));
  CHECK(check_unit_normal(iv, 0.25, 500, 2, 3.0) < 1e-12);
  const auto ball = ball_domain({0.0, 0.0}, 1.0);
  CHECK(check_unit_normal(ball, 0.2, 500, 3, 2.0) < 1e-12);
  CHECK_THROWS_AS(interval_domain(0.0), InvalidArgument);
}

TEST_CASE("time grid") {
  const TimeGrid g(1.0, 4);
  CHECK(g.dt() == 0.25);
  CHECK(g.nodes() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK_THROWS_AS(TimeGrid(0.0, 4), InvalidArgument);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), InvalidArgument);
}

TEST_CASE("materialize enforces S_T <= xi") {
  const auto fwd = simulate_reflected(free_space_domain(1), constant_drift({0.0}),
                                      scalar_diffusion(1.0, 1), std::vector<double>{0.0},
                                      TimeGrid(1.0, 8), 50, 1);
  auto bad = ObstacleSpec::markovian([](double, StateView) { return 1.0; },
                                     [](StateView) { return 0.0; });
  CHECK_THROWS_AS(materialize(bad, fwd), ObstacleTerminalViolation);
  auto good = ObstacleSpec::markovian([](double, StateView x) { return x[0]; },
                                      [](StateView x) { return std::max(x[0], 0.0); });
  const auto data = materialize(good, fwd);
  CHECK(data.paths == 50);
  CHECK(data.nodes == 9);
  CHECK(data.S(3, 4) == fwd.X(3, 4)[0]);
  CHECK(data.xi(7) == std::max(fwd.X(7, 8)[0], 0.0));
  CHECK_FALSE(data.unconstrained());
  const auto free = materialize(ObstacleSpec::unconstrained([](StateView) { return 1.0; }), fwd);
  CHECK(free.unconstrained());
}
