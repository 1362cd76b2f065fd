#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rgbsde/errors.hpp"
#include "rgbsde/regression.hpp"

using namespace rgbsde;

namespace {

std::vector<double> normal_states(std::size_t n, std::size_t dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n * dim);
  for (auto& v : x) v = nd(rng);
  return x;
}

}  // namespace

TEST_CASE("constant response is fitted exactly") {
  const auto x = normal_states(1000, 1, 1);
  const StepRegression reg(RegressionBasis{}, x, 1000, 1);
  const std::vector<double> c(1000, 2.0);
  for (double v : reg.fit(c)) CHECK(v == 2.0);
  CHECK(stable_mean(c) == 2.0);
}

TEST_CASE("polynomial basis reproduces polynomials") {
  const auto x = normal_states(2000, 2, 2);
  const StepRegression reg(RegressionBasis{BasisFamily::polynomial, 2}, x, 2000, 2);
  std::vector<double> y(2000);
  for (std::size_t m = 0; m < 2000; ++m) {
    const double a = x[2 * m], b = x[2 * m + 1];
    y[m] = 1.0 + 2.0 * a - b + 0.5 * a * b + a * a;
  }
  const auto fit = reg.fit(y);
  for (std::size_t m = 0; m < 2000; ++m) CHECK(fit[m] == doctest::Approx(y[m]).epsilon(1e-8));
  CHECK_FALSE(reg.ridge_applied());
}

TEST_CASE("piecewise-linear basis reproduces linear responses") {
  const auto x = normal_states(5000, 1, 3);
  const StepRegression reg(RegressionBasis{BasisFamily::piecewise_linear, 16}, x, 5000, 1);
  std::vector<double> y(5000);
  for (std::size_t m = 0; m < 5000; ++m) y[m] = 3.0 - 0.5 * x[m];
  const auto fit = reg.fit(y);
  for (std::size_t m = 0; m < 5000; ++m) CHECK(fit[m] == doctest::Approx(y[m]).epsilon(1e-8));
  // noisy conditional mean of |x| is recovered to within a few percent
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (std::size_t m = 0; m < 5000; ++m) y[m] = std::abs(x[m]) + noise(rng);
  const auto fit2 = reg.fit(y);
  double err = 0.0;
  for (std::size_t m = 0; m < 5000; ++m) err += std::abs(fit2[m] - std::abs(x[m]));
  CHECK(err / 5000.0 < 0.05);
}

TEST_CASE("degenerate coordinates fall back to the constant") {
  const std::vector<double> x(300, 1.25);
  const StepRegression reg(RegressionBasis{}, x, 300, 1);
  CHECK(reg.features() == 0);
  std::vector<double> y(300);
  for (std::size_t m = 0; m < 300; ++m) y[m] = static_cast<double>(m % 7);
  const auto fit = reg.fit(y);
  CHECK(fit[0] == doctest::Approx(stable_mean(y)));
}

TEST_CASE("regression errors") {
  const std::vector<double> none;
  CHECK_THROWS_AS(StepRegression(RegressionBasis{}, none, 0, 1), RegressionSingular);
  const auto x = normal_states(10, 1, 5);
  const StepRegression reg(RegressionBasis{}, x, 10, 1);
  CHECK_THROWS_AS(reg.fit(std::vector<double>(9, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(basis_family_from_string("spline"), InvalidArgument);
  CHECK(basis_family_from_string(to_string(BasisFamily::piecewise_linear)) == BasisFamily::piecewise_linear);
}
