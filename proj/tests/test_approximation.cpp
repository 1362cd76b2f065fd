#include <cmath>
#include <vector>

#include "doctest.h"
#include "rgbsde/approximation.hpp"
#include "rgbsde/errors.hpp"

using namespace rgbsde;

namespace {

double square(std::span<const double> x) { return x[0] * x[0]; }

DriverSpec scalar_driver(DriverF f, double lambda = 0.0, double mu = 0.0) {
  DriverParams p;
  p.f = std::move(f);
  p.g = [](double, StateView, double y) { return -y; };
  p.lambda = lambda;
  p.mu = mu;
  p.growth = 1.0;
  p.state_dependent = false;
  return DriverSpec(std::move(p));
}

// Exact minimizer of y^2 + n |x - y| over the real line.
double square_infconv(double x, double n) {
  const double a = std::abs(x);
  return a <= 0.5 * n ? x * x : n * a - 0.25 * n * n;
}

const std::vector<double> kZero{0.0};

}  // namespace

TEST_CASE("inf-convolution of |x| is |x|") {
  const auto f = infconv([](std::span<const double> x) { return std::abs(x[0]); }, 2.0,
                         CandidateGrid(1, 4.0, 1e-3));
  for (double x = -3.5; x <= 3.5; x += 0.125) CHECK(f(x) == doctest::Approx(std::abs(x)).epsilon(1e-12));
}

TEST_CASE("inf-convolution of x^2 at n = 4") {
  const auto f = infconv(square, 4.0, CandidateGrid(1, 4.0, 1e-3));
  for (double x : {0.0, 0.5, -1.25, 2.0, 2.5, 3.0, -3.5, 3.999}) {
    const double expected = std::abs(x) <= 2.0 ? x * x : 4.0 * std::abs(x) - 4.0;
    CHECK(f(x) == doctest::Approx(expected).epsilon(1e-9));
  }
  // brute-force minimum over a finer independent grid
  for (double x = -3.0; x <= 3.0; x += 0.37) {
    double best = 1e300;
    for (int k = -40000; k <= 40000; ++k) {
      const double y = k * 1e-4;
      best = std::min(best, y * y + 4.0 * std::abs(x - y));
    }
    CHECK(std::abs(f(x) - best) < 4e-3);
  }
}

TEST_CASE("inf-convolution of a constant is the constant") {
  const auto f = infconv([](std::span<const double>) { return 1.5; }, 2.0, CandidateGrid(1, 4.0, 1e-2));
  for (double x = -3.0; x <= 3.0; x += 0.5) CHECK(f(x) == 1.5);
}

TEST_CASE("inf-convolution errors") {
  CHECK_THROWS_AS(infconv(square, 1.0, CandidateGrid(1, 4.0, 1e-2)), GrowthExceedsIndex);
  CHECK_THROWS_AS(CandidateGrid(1, -1.0, 1e-2), EmptyGrid);
  CHECK_THROWS_AS(CandidateGrid(1, 1.0, 0.0), InvalidArgument);
  const auto f = infconv(square, 4.0, CandidateGrid(1, 4.0, 1e-2));
  CHECK(f.growth_constant() == doctest::Approx(16.0 / 5.0));
}

TEST_CASE("inf-convolution in two dimensions") {
  const auto f = infconv([](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; }, 6.0,
                         CandidateGrid(2, 3.0, 0.125));
  const std::vector<double> p{0.5, -0.25};
  CHECK(f(p) == doctest::Approx(0.3125));
  const std::vector<double> far{2.5, 2.5};
  // radial profile: n |x| - n^2 / 4 beyond |x| = n / 2, up to grid error
  CHECK(std::abs(f(far) - (6.0 * std::sqrt(12.5) - 9.0)) < 6.0 * 0.125);
}

TEST_CASE("q_n") {
  CHECK(truncate_q(std::vector<double>{4.0, 0.0}, 3.0) == std::vector<double>{3.0, 0.0});
  CHECK(truncate_q(std::vector<double>{3.0, 4.0}, 5.0) == std::vector<double>{3.0, 4.0});
  const auto q = truncate_q(std::vector<double>{3.0, 4.0}, 2.0);
  CHECK(q[0] == doctest::Approx(1.2));
  CHECK(q[1] == doctest::Approx(1.6));
  CHECK(truncate_q(7.0, 3.0) == 3.0);
  CHECK(truncate_q(-HUGE_VAL, 2.0) == -2.0);
  CHECK_THROWS_AS(truncate_q(1.0, 0.0), InvalidArgument);
}

TEST_CASE("theta_r") {
  CHECK(cutoff_theta(1.5, 2.0) == 1.0);
  CHECK(cutoff_theta(3.5, 2.0) == 0.0);
  CHECK(cutoff_theta(2.5, 2.0) == 0.5);
  CHECK(cutoff_theta(-2.5, 2.0) == 0.5);
  double prev = 1.0;
  for (double y = 2.0; y <= 3.0; y += 0.01) {
    const double v = cutoff_theta(y, 2.0);
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
}

TEST_CASE("pi_r") {
  const auto lin = scalar_driver([](double, StateView, double y, StateView) { return -0.7 * y; });
  CHECK(pi_r(lin, 3.0, 0.0, {}) == doctest::Approx(2.1));
  const auto zonly = scalar_driver([](double, StateView, double, StateView z) { return z[0]; }, 1.0);
  CHECK(pi_r(zonly, 3.0, 0.0, {}) == 0.0);
  const auto cubic = scalar_driver([](double, StateView, double y, StateView) { return -y * y * y; });
  CHECK(pi_r(cubic, 2.0, 0.0, {}) == doctest::Approx(8.0));
}

TEST_CASE("h_n") {
  const auto flat = scalar_driver([](double t, StateView, double, StateView) { return 1.0 + t; });
  const auto h_flat = build_h_n(flat, 3.0, 1.0);
  for (double y : {-5.0, 0.0, 0.7, 9.0}) CHECK(h_flat.f(0.5, {}, y, std::vector<double>{4.0}) == 1.5);

  const auto zonly = scalar_driver([](double, StateView, double, StateView z) { return z[0]; }, 1.0);
  const auto h_z = build_h_n(zonly, 1e6, 2.0);
  for (double y : {-2.0, 0.0, 1.5}) {
    for (double z : {-30.0, 0.0, 4.5}) CHECK(h_z.f(0.0, {}, y, std::vector<double>{z}) == z);
  }

  const auto cubic = scalar_driver([](double, StateView, double y, StateView) { return -y * y * y; });
  const auto h1 = build_h_n(cubic, 1.0, 1.0);
  // theta_1(0.5) (-0.125) (1 / 8) + 0, evaluated independently
  const double expected = 1.0 * (-(0.5 * 0.5 * 0.5)) * (1.0 / 8.0);
  CHECK(expected == -0.015625);
  CHECK(h1.f(0.0, {}, 0.5, kZero) == doctest::Approx(expected).epsilon(1e-12));
  // constant beyond r + 1
  CHECK(h1.f(0.0, {}, 2.5, kZero) == 0.0);
}

TEST_CASE("step-1 f_n") {
  const auto zonly =
      scalar_driver([](double, StateView, double, StateView z) { return 2.0 * z[0] + 1.0; }, 2.0);
  const auto fz = build_f_n_step1(zonly, 3.0, 1.0);
  CHECK(fz.f(0.0, {}, 4.0, std::vector<double>{10.0}) == 7.0);
  CHECK(fz.f(0.0, {}, -1.0, std::vector<double>{-1.0}) == -1.0);

  const auto lin = scalar_driver([](double, StateView, double y, StateView z) { return -0.5 * y + z[0]; },
                                 1.0, -0.5);
  const auto fl = build_f_n_step1(lin, 8.0, 2.0);
  for (double y : {-3.0, 0.0, 5.0}) {
    for (double z : {-7.0, 2.0}) {
      const std::vector<double> zz{z};
      CHECK(fl.f(0.0, {}, y, zz) == doctest::Approx(lin.f(0.0, {}, y, zz)).epsilon(1e-15));
    }
  }

  const auto cubic = scalar_driver([](double, StateView, double y, StateView) { return -y * y * y; });
  const auto f1 = build_f_n_step1(cubic, 1.0, 1.0);
  CHECK(f1.f(0.0, {}, 1.0, kZero) == doctest::Approx(-0.125).epsilon(1e-12));
  CHECK(f1.mu() <= 0.0);
  CHECK_THROWS_AS(build_f_n_step1(cubic, 0.5, 1.0), InvalidArgument);
}

TEST_CASE("step-2 truncation") {
  const auto driver = scalar_driver([](double, StateView, double y, StateView) { return 7.0 - y; }, 0.0, -1.0);
  const std::vector<double> xi{0.5, 9.0};
  const std::vector<double> barrier{-10.0, 0.0, -10.0, 8.0};
  auto one = truncate_data_step2(xi, driver, barrier, 2, 1.0);
  CHECK(one.terminal[0] == 0.5);
  auto three = truncate_data_step2(xi, driver, barrier, 2, 3.0);
  CHECK(three.driver->f(0.0, {}, 0.0, kZero) == 3.0);
  CHECK(three.driver->f(0.0, {}, 1.0, kZero) == 2.0);
  CHECK(three.driver->g(0.0, {}, 2.0) == -2.0);
  auto two = truncate_data_step2(xi, driver, barrier, 2, 2.0);
  CHECK(two.barrier[0] == -2.0);
  CHECK(two.terminal[1] == 2.0);
  CHECK(two.barrier[3] == 2.0);
  CHECK(two.repaired_paths == 0);

  const std::vector<double> bad_barrier{0.0, 1.0, 0.0, 0.0};
  const std::vector<double> low_xi{0.5, 0.0};
  CHECK_THROWS_AS(truncate_data_step2(low_xi, driver, bad_barrier, 2, 2.0, false), ObstacleTerminalViolation);
  auto repaired = truncate_data_step2(low_xi, driver, bad_barrier, 2, 2.0, true);
  CHECK(repaired.repaired_paths == 1);
  CHECK(repaired.terminal[0] == 1.0);
}

TEST_CASE("Lipschitz approximation properties on x^2") {
  const CandidateGrid grid(1, 4.0, 1.0 / 1024.0);
  std::vector<InfConvApproximant> fs;
  for (double n : {4.0, 8.0, 16.0, 32.0}) fs.push_back(infconv(square, n, grid));

  // exact values at grid points
  for (const auto& f : fs) {
    for (double x = -3.5; x <= 3.5; x += 0.25) CHECK(f(x) == square_infconv(x, f.index()));
  }
  // n-Lipschitz, below f, nondecreasing in n on grid pairs
  for (std::size_t k = 0; k < fs.size(); ++k) {
    const double n = fs[k].index();
    for (double x = -3.0; x <= 3.0; x += 0.0625) {
      const double fx = fs[k](x);
      CHECK(fx <= x * x);
      if (k + 1 < fs.size()) CHECK(fx <= fs[k + 1](x));
      for (double y = -3.0; y <= 3.0; y += 0.5) CHECK(std::abs(fx - fs[k](y)) <= n * std::abs(x - y));
    }
  }
  // along x_n = x + 1/n the error halves per doubling of n
  const double x = 1.0;
  std::vector<double> err;
  for (const auto& f : fs) err.push_back(std::abs(f(x + 1.0 / f.index()) - x * x));
  for (std::size_t k = 0; k + 1 < err.size(); ++k) {
    const double ratio = err[k] / err[k + 1];
    CHECK(ratio >= 2.0);
    CHECK(ratio <= 2.25);
  }
}
