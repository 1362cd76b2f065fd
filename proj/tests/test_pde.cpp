#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles/binomial.hpp"
#include "rgbsde/config.hpp"
#include "rgbsde/errors.hpp"
#include "rgbsde/pde_oracle.hpp"

using namespace rgbsde;

namespace {

PdeProblem heat(double c) {
  PdeProblem p;
  p.x_min = 0.0;
  p.x_max = 2.0;
  p.drift = [](double) { return 0.0; };
  p.volatility = [](double) { return 1.0; };
  p.f = [](double, double, double, double) { return 0.0; };
  p.g = [](double, double, double) { return 0.0; };
  p.barrier = [](double, double) { return no_barrier; };
  p.terminal = [c](double) { return c; };
  return p;
}

PdeGridParams coarse(std::size_t nodes = 41, std::size_t steps = 40) {
  PdeGridParams g;
  g.space_nodes = nodes;
  g.time_steps = steps;
  return g;
}

}  // namespace

TEST_CASE("constant terminal value is stationary") {
  const auto u = solve_obstacle_pde(heat(1.75), coarse());
  for (std::size_t n = 0; n < u.t().size(); ++n) {
    for (std::size_t j = 0; j < u.x().size(); ++j) CHECK(u.u(n, j) == doctest::Approx(1.75).epsilon(1e-12));
  }
  CHECK(u.max_complementarity_residual < 1e-8);
}

TEST_CASE("dominant obstacle binds everywhere") {
  auto p = heat(0.0);
  p.terminal = [](double x) { return 100.0 + x * x; };
  p.barrier = [](double, double x) { return 100.0 + x * x; };
  p.f = [](double, double, double u, double) { return -u; };
  const auto u = solve_obstacle_pde(p, coarse());
  for (std::size_t n = 0; n < u.t().size(); ++n) {
    for (std::size_t j = 0; j < u.x().size(); ++j) CHECK(u.u(n, j) == doctest::Approx(100.0 + u.x()[j] * u.x()[j]));
  }
}

TEST_CASE("American put against the binomial tree") {
  const auto cfg = catalog_config("american_put_analog");
  const auto u = solve_obstacle_pde(build_pde(cfg), pde_grid_params(cfg));
  const double tree = oracle::american_put_crr(100.0, 100.0, 0.05, 0.2, 1.0, 1000);
  const double pde = u.interpolate(0, std::log(100.0));
  CHECK(std::abs(pde - tree) / tree < 5e-3);
  CHECK(u.max_complementarity_residual < 1e-6);
  // never below the exercise value
  for (std::size_t j = 0; j < u.x().size(); ++j) {
    CHECK(u.u(0, j) >= std::max(100.0 - std::exp(u.x()[j]), 0.0) - 1e-12);
  }
}

TEST_CASE("binomial oracle sanity") {
  CHECK(oracle::american_put_crr(100.0, 100.0, 0.05, 0.2, 1.0, 1000) == doctest::Approx(6.0896).epsilon(2e-4));
  CHECK(oracle::american_put_crr(100.0, 100.0, 0.05, 0.2, 1.0, 1) >= 0.0);
}

TEST_CASE("comparison principle in the terminal value") {
  auto low = heat(0.0);
  low.terminal = [](double x) { return std::sin(3.0 * x); };
  low.f = [](double, double, double u, double z) { return -0.2 * u + 0.1 * z; };
  low.g = [](double, double, double u) { return -0.5 * u; };
  auto high = low;
  high.terminal = [](double x) { return std::sin(3.0 * x) + 0.3 * std::exp(-10.0 * (x - 1.0) * (x - 1.0)); };
  const auto ul = solve_obstacle_pde(low, coarse());
  const auto uh = solve_obstacle_pde(high, coarse());
  for (std::size_t n = 0; n < ul.t().size(); ++n) {
    for (std::size_t j = 0; j < ul.x().size(); ++j) CHECK(uh.u(n, j) >= ul.u(n, j) - 1e-9);
  }
}

TEST_CASE("grid refinement contracts") {
  const auto cfg = catalog_config("american_put_analog");
  const auto pde = build_pde(cfg);
  const double mid = 0.5 * (pde.x_min + pde.x_max);
  std::vector<double> values;
  for (std::size_t k : {100, 200, 400}) values.push_back(solve_obstacle_pde(pde, coarse(k + 1, k)).interpolate(0, mid));
  CHECK(std::abs(values[2] - values[1]) < std::abs(values[1] - values[0]));
}

TEST_CASE("constant Neumann flux") {
  auto p = heat(0.0);
  p.g = [](double, double, double) { return -0.5; };
  const auto u = solve_obstacle_pde(p, coarse(81, 80));
  // u = -0.5 E[L^0_T + L^2_T]: negative and symmetric about the midpoint
  const double left = u.interpolate(0, 0.5), right = u.interpolate(0, 1.5);
  CHECK(left < 0.0);
  CHECK(left == doctest::Approx(right).epsilon(1e-6));
  CHECK(u.interpolate(0, 0.0) < u.interpolate(0, 1.0));
}

TEST_CASE("PDE errors") {
  auto p = heat(0.0);
  p.drift = [](double) { return 50.0; };
  CHECK_THROWS_AS(solve_obstacle_pde(p, coarse(11, 10)), GridTooCoarse);
  auto q = heat(0.0);
  q.terminal = nullptr;
  CHECK_THROWS_AS(solve_obstacle_pde(q, coarse()), NonCallableDriver);
  PdeGridParams tight = coarse();
  tight.max_sweeps = 1;
  auto r = heat(0.0);
  r.terminal = [](double x) { return x; };
  CHECK_THROWS_AS(solve_obstacle_pde(r, tight), LcpNotConverged);
}

TEST_CASE("cross validation budget") {
  const auto u = solve_obstacle_pde(heat(2.0), coarse(21, 10));
  const double dx = 0.1;
  const auto cv = cross_validate(u, {{1.0, 2.01, 0.001, 0.01}, {0.5, 2.5, 0.01, 0.01}}, 1.0);
  REQUIRE(cv.points.size() == 2);
  CHECK(cv.points[0].budget == doctest::Approx(0.003 + 0.1 + dx * dx));
  CHECK(cv.points[0].within_budget);
  CHECK_FALSE(cv.points[1].within_budget);
  CHECK_FALSE(cv.all_within_budget);
  CHECK(cv.max_rel_error == doctest::Approx(0.5 / 3.0));
  CHECK_THROWS_AS(cross_validate(u, {{3.0, 2.0, 0.0, 0.01}}), MismatchedProblem);
  CHECK_THROWS_AS(u.interpolate(0, -1.0), MismatchedProblem);
}

TEST_CASE("CSV matrix layout") {
  const auto u = solve_obstacle_pde(heat(1.0), coarse(3, 2));
  std::ostringstream out;
  u.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.front() == ',');
  CHECK(std::count(line.begin(), line.end(), ',') == 3);
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}
