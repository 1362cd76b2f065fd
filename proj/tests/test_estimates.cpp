#include <cmath>
#include <vector>

#include "doctest.h"
#include "rgbsde/errors.hpp"
#include "rgbsde/estimates.hpp"
#include "support.hpp"

using namespace rgbsde;
using nlohmann::json;
using testing_support::make_problem;

namespace {

json linear_problem(double scale, std::size_t paths = 4000) {
  return {{"problem", "linear_discount"},
          {"forward", {{"steps", 32}, {"paths", paths}}},
          {"obstacle", {{"terminal", {{"kind", "linear"}, {"a", scale}, {"b", 0.5 * scale}}}}}};
}

}  // namespace

TEST_CASE("c(p) and the p-power weight") {
  for (double p : {1.1, 1.5, 1.9}) CHECK(c_p(p) == p * (p - 1.0) / 2.0);
  CHECK(c_p(3.0) == 1.5);
  CHECK(unit_direction(-2.0) == -1.0);
  CHECK(unit_direction(0.0) == 0.0);
  CHECK(p_power_weight(4.0, 1.5) == doctest::Approx(2.0));
  CHECK(p_power_weight(-4.0, 1.5) == doctest::Approx(-2.0));
}

TEST_CASE("L^p norms") {
  const std::vector<double> two(10 * 5, 2.0);
  CHECK(lp_sup_norm(two, 10, 5, 1.5).norm == doctest::Approx(2.0).epsilon(1e-15));
  const std::vector<double> zero(10 * 4, 0.0);
  CHECK(lp_quadvar_norm(zero, 10, 4, 1, 0.25, 1.5).norm == 0.0);
  std::vector<double> ramp(11);
  for (std::size_t i = 0; i <= 10; ++i) ramp[i] = 0.1 * static_cast<double>(i);
  CHECK(lp_sup_norm(ramp, 1, 11, 1.5).moment == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> ones(4, 1.0);
  CHECK(lp_quadvar_norm(ones, 1, 4, 1, 0.25, 1.5).moment == doctest::Approx(1.0));
  CHECK_THROWS_AS(lp_sup_norm(two, 10, 5, 2.0), InvalidArgument);
  CHECK_THROWS_AS(lp_sup_norm({}, 0, 5, 1.5), EmptyBundle);
}

TEST_CASE("a priori audits on the constant solution") {
  const auto pr = make_problem({{"problem", "trivial_constant"}, {"forward", {{"steps", 16}, {"paths", 1000}}}});
  const auto sol = solve_reflected(pr.forward, pr.driver, pr.data);
  const ProblemView view{pr.forward, pr.driver, pr.data};
  const auto z = audit_Z_control(sol, view, 1.5);
  CHECK(z.lhs == 0.0);
  CHECK(z.ratio == 0.0);
  CHECK(z.pass);
  const auto a = audit_apriori_bound(sol, view, 1.5);
  CHECK(a.ratio == 1.0);
  CHECK(a.lhs == doctest::Approx(std::pow(2.0, 1.5)));
  CHECK(a.pass);
  CHECK_FALSE(a.degenerate);
}

TEST_CASE("zero data gives degenerate passing audits") {
  json doc = {{"problem", "custom"},
              {"forward", {{"steps", 8}, {"paths", 500}}},
              {"obstacle", {{"terminal", {{"kind", "constant"}, {"value", 0.0}}}}}};
  const auto pr = make_problem(doc);
  const auto sol = solve_reflected(pr.forward, pr.driver, pr.data);
  const ProblemView view{pr.forward, pr.driver, pr.data};
  for (const auto& r : {audit_Z_control(sol, view, 1.5), audit_apriori_bound(sol, view, 1.5),
                        audit_stability(sol, sol, view, view, 1.5)}) {
    CHECK(r.ratio == 0.0);
    CHECK(r.degenerate);
    CHECK(r.pass);
  }
}

TEST_CASE("constant estimate is scale invariant on a linear problem") {
  std::vector<double> z_est, a_est;
  for (double s : {1.0, 2.0, 4.0}) {
    const auto pr = make_problem(linear_problem(s));
    const auto sol = solve_reflected(pr.forward, pr.driver, pr.data);
    const ProblemView view{pr.forward, pr.driver, pr.data};
    z_est.push_back(audit_Z_control(sol, view, 1.5).constant_estimate);
    a_est.push_back(audit_apriori_bound(sol, view, 1.5).constant_estimate);
  }
  for (std::size_t k = 1; k < 3; ++k) {
    CHECK(z_est[k] == doctest::Approx(z_est[0]).epsilon(1e-6));
    CHECK(a_est[k] == doctest::Approx(a_est[0]).epsilon(1e-6));
  }
  CHECK(std::isfinite(a_est[0]));
}

TEST_CASE("binding obstacle audits are finite") {
  const auto pr = make_problem({{"problem", "binding_obstacle"}, {"forward", {{"steps", 16}, {"paths", 2000}}}});
  const auto sol = solve_reflected(pr.forward, pr.driver, pr.data);
  const ProblemView view{pr.forward, pr.driver, pr.data};
  const auto a = audit_apriori_bound(sol, view, 1.5);
  CHECK(std::isfinite(a.ratio));
  CHECK(a.ratio > 0.0);
  CHECK(a.rhs_components.at("sup_S_plus") > 0.0);
  CHECK(audit_skorokhod(sol, pr.data) == 0.0);

  json shifted = {{"problem", "binding_obstacle"},
                  {"forward", {{"steps", 16}, {"paths", 2000}}},
                  {"obstacle", {{"barrier", {{"a", 0.9}}}}}};
  const auto pr2 = make_problem(shifted);
  const auto sol2 = solve_reflected(pr2.forward, pr2.driver, pr2.data);
  const ProblemView view2{pr2.forward, pr2.driver, pr2.data};
  const auto st = audit_stability(sol, sol2, view, view2, 1.5);
  CHECK(st.lhs > 0.0);
  CHECK(std::isfinite(st.ratio));
  CHECK(st.rhs_components.at("delta_S") > 0.0);
  CHECK(st.rhs_components.count("delta_S_alt") == 1);
}

TEST_CASE("stability: identical inputs and terminal perturbation decay") {
  const auto base = make_problem(linear_problem(1.0));
  const auto sol = solve_reflected(base.forward, base.driver, base.data);
  const ProblemView view{base.forward, base.driver, base.data};
  const auto same = audit_stability(sol, sol, view, view, 1.5);
  CHECK(same.lhs == 0.0);
  CHECK(same.pass);

  std::vector<AuditReport> reports;
  for (double eps : {0.1, 0.05}) {
    auto data = base.data;
    for (auto& v : data.terminal) v += eps;
    const auto moved = solve_reflected(base.forward, base.driver, data);
    const ProblemView mv{base.forward, base.driver, data};
    reports.push_back(audit_stability(moved, sol, mv, view, 1.5));
    // closed form for a constant shift: eps e^{-0.05 (T - t)}, sup at t = T
    CHECK(reports.back().lhs == doctest::Approx(std::pow(eps, 1.5)).epsilon(1e-6));
    CHECK(reports.back().pass);
  }
  const auto decay = check_stability_decay(reports[0], reports[1]);
  CHECK(decay.required == doctest::Approx(std::pow(2.0, 1.5) / 1.5));
  CHECK(decay.factor == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-6));
  CHECK(decay.pass);

  const auto other = make_problem(linear_problem(1.0, 3000));
  const auto sol_other = solve_reflected(other.forward, other.driver, other.data);
  const ProblemView ov{other.forward, other.driver, other.data};
  CHECK_THROWS_AS(audit_stability(sol, sol_other, view, ov, 1.5), MismatchedGrids);
}

TEST_CASE("comparison audit") {
  const auto pr = make_problem({{"problem", "binding_obstacle"}, {"forward", {{"steps", 16}, {"paths", 2000}}}});
  const auto a = solve_penalized(pr.forward, pr.driver, pr.data, 10.0);
  const auto b = solve_penalized(pr.forward, pr.driver, pr.data, 250.0);
  const auto dup = audit_comparison({&a, &a});
  CHECK(dup.violations == 0);
  CHECK(dup.pass);
  const auto ok = audit_comparison({&a, &b});
  CHECK(ok.pass);
  const auto swapped = audit_comparison({&b, &a}, 0.0);
  CHECK(swapped.violations > 0);
  CHECK_FALSE(swapped.pass);
}

TEST_CASE("Skorokhod score without K is zero") {
  const auto pr = make_problem({{"problem", "linear_discount"}, {"forward", {{"steps", 8}, {"paths", 300}}}});
  const auto sol = solve_reflected(pr.forward, pr.driver, pr.data);
  CHECK(audit_skorokhod(sol, pr.data) == 0.0);
}

TEST_CASE("audit CSV row") {
  AuditReport r;
  r.lemma = "Z_control";
  r.lhs = 1.0;
  r.rhs_components = {{"a", 0.5}, {"b", 1.5}};
  r.rhs = 2.0;
  r.ratio = 0.5;
  const auto row = r.csv_row();
  CHECK(row.rfind("Z_control,1.00000000000000000e+00,2.00000000000000000e+00,a=", 0) == 0);
  CHECK(row.find(";b=") != std::string::npos);
  CHECK(row.substr(row.size() - 4) == ",0,1");
}
