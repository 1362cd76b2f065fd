#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "rgbsde/errors.hpp"
#include "rgbsde/forward_sde.hpp"

using namespace rgbsde;

namespace {

ForwardBundle half_line_bm(std::size_t steps, std::size_t paths, std::uint64_t seed,
                           ReflectionScheme scheme, double x0 = 0.0, bool bridge = true) {
  ForwardOptions opt;
  opt.scheme = scheme;
  opt.bridge = bridge;
  return simulate_reflected(half_line_domain(), constant_drift({0.0}), scalar_diffusion(1.0, 1),
                            std::vector<double>{x0}, TimeGrid(1.0, steps), paths, seed, opt);
}

}  // namespace

TEST_CASE("half-line reflected Brownian motion has the law of |W_T|") {
  const auto fwd = half_line_bm(64, 100000, 21, ReflectionScheme::projection);
  for (std::size_t m = 0; m < fwd.paths(); m += 97) {
    for (std::size_t i = 0; i <= fwd.steps(); ++i) CHECK(fwd.X(m, i)[0] >= 0.0);
  }
  const auto est = terminal_mean(fwd);
  const double target = std::sqrt(2.0 / std::numbers::pi);
  CHECK(std::abs(est.mean - target) < 3.0 * est.standard_error);
  // Tanaka: E L_T = E |W_T|, with L = G here
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t m = 0; m < fwd.paths(); ++m) {
    sum += fwd.G_total(m);
    sum2 += fwd.G_total(m) * fwd.G_total(m);
  }
  const double mean = sum / fwd.paths();
  const double se = std::sqrt((sum2 / fwd.paths() - mean * mean) / fwd.paths());
  CHECK(expected_local_time(fwd) == doctest::Approx(mean));
  CHECK(std::abs(mean - target) < 3.0 * se);
}

TEST_CASE("explicit Skorokhod map on the half-line") {
  const auto fwd = half_line_bm(32, 200, 3, ReflectionScheme::skorokhod_explicit, 0.3);
  for (std::size_t m = 0; m < fwd.paths(); ++m) {
    double free = 0.3, running_min = 0.0, g = 0.0;
    for (std::size_t i = 0; i < fwd.steps(); ++i) {
      free += fwd.dW(m, i)[0];
      running_min = std::min(running_min, free);
      CHECK(fwd.X(m, i + 1)[0] == doctest::Approx(free - running_min).epsilon(1e-12));
      CHECK(fwd.dG(m, i) >= 0.0);
      g += fwd.dG(m, i);
      CHECK(g == doctest::Approx(-running_min).epsilon(1e-12));
    }
  }
  // G grows only near the boundary
  double weighted = 0.0, total = 0.0;
  for (std::size_t m = 0; m < fwd.paths(); ++m) {
    for (std::size_t i = 0; i < fwd.steps(); ++i) {
      weighted += fwd.X(m, i + 1)[0] * fwd.dG(m, i);
      total += fwd.dG(m, i);
    }
  }
  CHECK(total > 0.0);
  CHECK(weighted / total <= fwd.band());
}

TEST_CASE("grid projection without the bridge equals the grid Skorokhod map") {
  const auto proj = half_line_bm(16, 300, 9, ReflectionScheme::projection, 0.2, false);
  const auto expl = half_line_bm(16, 300, 9, ReflectionScheme::skorokhod_explicit, 0.2);
  for (std::size_t m = 0; m < proj.paths(); ++m) {
    CHECK(proj.X(m, 16)[0] == doctest::Approx(expl.X(m, 16)[0]).epsilon(1e-12));
  }
  // the bridge run shares the Brownian increments
  const auto bridged = half_line_bm(16, 300, 9, ReflectionScheme::projection, 0.2);
  CHECK(std::vector<double>(bridged.brownian_increments().begin(), bridged.brownian_increments().end()) ==
        std::vector<double>(proj.brownian_increments().begin(), proj.brownian_increments().end()));
}

TEST_CASE("motionless start stays put") {
  const std::vector<double> x0{1.0};
  const auto fwd = simulate_reflected(half_line_domain(), constant_drift({0.0}), scalar_diffusion(0.0, 1), x0,
                                      TimeGrid(1.0, 10), 5, 1);
  for (std::size_t m = 0; m < 5; ++m) {
    for (std::size_t i = 0; i <= 10; ++i) CHECK(fwd.X(m, i)[0] == 1.0);
    CHECK(fwd.G_total(m) == 0.0);
  }
  CHECK(expected_local_time(fwd) == 0.0);
}

TEST_CASE("interval and ball stay in the closure") {
  const std::vector<double> x0{1.0};
  const auto fwd = simulate_reflected(interval_domain(2.0), constant_drift({0.0}), scalar_diffusion(1.0, 1), x0,
                                      TimeGrid(1.0, 64), 500, 4);
  for (std::size_t m = 0; m < fwd.paths(); ++m) {
    for (std::size_t i = 0; i <= fwd.steps(); ++i) {
      CHECK(fwd.X(m, i)[0] >= -1e-12);
      CHECK(fwd.X(m, i)[0] <= 2.0 + 1e-12);
    }
  }
  const auto ball = simulate_reflected(ball_domain({0.0, 0.0}, 1.0), constant_drift({0.0, 0.0}),
                                       scalar_diffusion(1.0, 2), std::vector<double>{0.0, 0.0},
                                       TimeGrid(1.0, 32), 200, 5);
  for (std::size_t m = 0; m < ball.paths(); ++m) {
    const auto x = ball.X(m, 32);
    CHECK(std::hypot(x[0], x[1]) <= 1.0 + 1e-9);
  }
  CHECK(expected_local_time(ball) > 0.0);
}

TEST_CASE("explicit scheme, penalization and input errors") {
  const std::vector<double> x0{1.0};
  ForwardOptions opt;
  opt.scheme = ReflectionScheme::skorokhod_explicit;
  CHECK_THROWS_AS(simulate_reflected(interval_domain(2.0), constant_drift({0.0}), scalar_diffusion(1.0, 1), x0,
                                     TimeGrid(1.0, 8), 10, 1, opt),
                  UnsupportedScheme);
  const std::vector<double> outside{-0.5};
  CHECK_THROWS_AS(simulate_reflected(half_line_domain(), constant_drift({0.0}), scalar_diffusion(1.0, 1), outside,
                                     TimeGrid(1.0, 8), 10, 1),
                  StartOutsideDomain);
  opt.scheme = ReflectionScheme::penalization;
  const auto pen = simulate_reflected(half_line_domain(), constant_drift({0.0}), scalar_diffusion(1.0, 1), x0,
                                      TimeGrid(1.0, 64), 200, 2, opt);
  for (std::size_t m = 0; m < pen.paths(); ++m) {
    for (std::size_t i = 0; i <= pen.steps(); ++i) CHECK(pen.X(m, i)[0] >= -pen.outside_tolerance());
  }
}

TEST_CASE("concatenation and mean of G") {
  const auto a = half_line_bm(16, 300, 1, ReflectionScheme::projection);
  const auto b = half_line_bm(16, 100, 2, ReflectionScheme::projection);
  const auto ab = ForwardBundle::concatenate(a, b);
  CHECK(ab.paths() == 400);
  CHECK(expected_local_time(ab) ==
        doctest::Approx((300.0 * expected_local_time(a) + 100.0 * expected_local_time(b)) / 400.0));
  CHECK(ab.X(350, 7)[0] == b.X(50, 7)[0]);
  const auto c = half_line_bm(8, 10, 1, ReflectionScheme::projection);
  CHECK_THROWS_AS(ForwardBundle::concatenate(a, c), MismatchedGrids);
}

TEST_CASE("bundle is reproducible and round-trips through the binary format") {
  const auto a = half_line_bm(8, 700, 5, ReflectionScheme::projection);
  const auto b = half_line_bm(8, 700, 5, ReflectionScheme::projection);
  CHECK(std::vector<double>(a.states().begin(), a.states().end()) ==
        std::vector<double>(b.states().begin(), b.states().end()));
  std::stringstream ss;
  a.write(ss);
  const auto back = ForwardBundle::read(ss);
  CHECK(back.paths() == a.paths());
  CHECK(back.grid() == a.grid());
  CHECK(back.scheme() == a.scheme());
  CHECK(back.band() == a.band());
  CHECK(std::vector<double>(back.states().begin(), back.states().end()) ==
        std::vector<double>(a.states().begin(), a.states().end()));
  CHECK(std::vector<double>(back.g_increments().begin(), back.g_increments().end()) ==
        std::vector<double>(a.g_increments().begin(), a.g_increments().end()));
  std::stringstream junk("not a bundle");
  CHECK_THROWS_AS(ForwardBundle::read(junk), FormatError);
}
