#include "rgbsde/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "rgbsde/errors.hpp"
#include "rgbsde/regression.hpp"

namespace rgbsde {

double c_p(double p) { return p * std::min(p - 1.0, 1.0) / 2.0; }

double unit_direction(double x) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return -1.0;
  return 0.0;
}

double p_power_weight(double y, double p) { return std::pow(std::abs(y), p - 1.0) * unit_direction(y); }

namespace {

void require_exponent(double p) {
  if (!(p > 1.0 && p < 2.0)) throw InvalidArgument("exponent p must lie in (1, 2)");
}

NormEstimate summarize(const std::vector<double>& samples, double p) {
  NormEstimate out;
  out.moment = stable_mean(samples);
  out.norm = std::pow(out.moment, 1.0 / p);
  if (samples.size() > 1) {
    double s = 0.0;
    for (double v : samples) s += (v - out.moment) * (v - out.moment);
    out.standard_error = std::sqrt(s / static_cast<double>(samples.size() - 1) /
                                   static_cast<double>(samples.size()));
  }
  return out;
}

double positive_part(double v) { return v > 0.0 ? v : 0.0; }

/// Per-path p-th powers of the data terms on the right of the a priori bounds.
struct DataMoments {
  double xi = 0.0;
  double f0 = 0.0;
  double g0 = 0.0;
  double s_plus = 0.0;
  double sup_y = 0.0;
  double quadvar = 0.0;
};

DataMoments data_moments(const SolutionBundle& solution, const ProblemView& data, double p) {
  const auto& fwd = data.forward;
  const auto& obs = data.obstacle;
  if (!(solution.grid() == fwd.grid()) || solution.paths() != fwd.paths() ||
      obs.paths != fwd.paths() || obs.nodes != fwd.steps() + 1) {
    throw MismatchedGrids("solution, forward bundle and obstacle data differ in shape");
  }
  const std::size_t paths = solution.paths();
  const std::size_t n = solution.steps();
  const double dt = fwd.grid().dt();
  std::vector<double> xi(paths), f0(paths), g0(paths), sp(paths), sy(paths), qv(paths);
  for (std::size_t m = 0; m < paths; ++m) {
    xi[m] = std::pow(std::abs(obs.xi(m)), p);
    double fi = 0.0, gi = 0.0, s_sup = 0.0, y_sup = 0.0, q = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      s_sup = std::max(s_sup, positive_part(obs.S(m, i)));
      y_sup = std::max(y_sup, std::abs(solution.Y(m, i)));
      if (i == n) break;
      const double t = fwd.grid().node(i);
      fi += std::abs(data.driver.f_at_origin(t, fwd.X(m, i))) * dt;
      if (fwd.dG(m, i) != 0.0) gi += std::abs(data.driver.g_at_origin(t, fwd.X(m, i))) * fwd.dG(m, i);
      const auto z = solution.Z(m, i);
      for (double c : z) q += c * c * dt;
    }
    f0[m] = std::pow(fi, p);
    g0[m] = std::pow(gi, p);
    sp[m] = std::pow(s_sup, p);
    sy[m] = std::pow(y_sup, p);
    qv[m] = std::pow(q, p / 2.0);
  }
  return {stable_mean(xi), stable_mean(f0), stable_mean(g0),
          stable_mean(sp), stable_mean(sy), stable_mean(qv)};
}

void finish(AuditReport& report, const AuditOptions& options) {
  report.ceiling = options.ceiling;
  report.c_p = c_p(report.p);
  report.rhs = 0.0;
  for (const auto& [name, value] : report.rhs_components) {
    if (name != "delta_S_alt" && name != "psi") report.rhs += value;
  }
  if (report.rhs > 0.0) {
    report.ratio = report.lhs / report.rhs;
    report.degenerate = false;
  } else if (report.lhs == 0.0) {
    report.ratio = 0.0;
    report.degenerate = true;
  } else {
    report.ratio = std::numeric_limits<double>::infinity();
    report.degenerate = false;
  }
  report.constant_estimate = report.ratio;
  report.pass = std::isfinite(report.ratio) && report.ratio <= report.ceiling;
}

}  // namespace

NormEstimate lp_sup_norm(std::span<const double> paths_by_nodes, std::size_t paths,
                         std::size_t nodes, double p) {
  require_exponent(p);
  if (paths == 0 || nodes == 0) throw EmptyBundle("no paths to take a norm over");
  if (paths_by_nodes.size() != paths * nodes) throw InvalidArgument("array does not match paths x nodes");
  std::vector<double> samples(paths);
  for (std::size_t m = 0; m < paths; ++m) {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) s = std::max(s, std::abs(paths_by_nodes[m * nodes + i]));
    samples[m] = std::pow(s, p);
  }
  return summarize(samples, p);
}

NormEstimate lp_quadvar_norm(std::span<const double> z, std::size_t paths, std::size_t steps,
                             std::size_t dim, double dt, double p) {
  require_exponent(p);
  if (paths == 0) throw EmptyBundle("no paths to take a norm over");
  if (z.size() != paths * steps * dim) throw InvalidArgument("array does not match paths x steps x dim");
  std::vector<double> samples(paths);
  for (std::size_t m = 0; m < paths; ++m) {
    double q = 0.0;
    for (std::size_t k = 0; k < steps * dim; ++k) {
      const double c = z[m * steps * dim + k];
      q += c * c * dt;
    }
    samples[m] = std::pow(q, p / 2.0);
  }
  return summarize(samples, p);
}

std::string AuditReport::csv_header() {
  return "lemma,lhs,rhs,rhs_components,ratio,p,c_p,constant_estimate,ceiling,degenerate,pass";
}

std::string AuditReport::csv_row() const {
  std::ostringstream out;
  out << std::scientific << std::setprecision(17);
  out << lemma << ',' << lhs << ',' << rhs << ',';
  bool first = true;
  for (const auto& [name, value] : rhs_components) {
    if (!first) out << ';';
    out << name << '=' << value;
    first = false;
  }
  out << ',' << ratio << ',' << p << ',' << c_p << ',' << constant_estimate << ',' << ceiling
      << ',' << (degenerate ? 1 : 0) << ',' << (pass ? 1 : 0);
  return out.str();
}

AuditReport audit_Z_control(const SolutionBundle& solution, const ProblemView& data, double p,
                            const AuditOptions& options) {
  require_exponent(p);
  const auto mom = data_moments(solution, data, p);
  AuditReport report;
  report.lemma = "Z_control";
  report.p = p;
  report.lhs = mom.quadvar;
  report.rhs_components = {{"sup_Y", mom.sup_y},
                           {"f0", mom.f0},
                           {"g0", mom.g0},
                           {"sup_S_plus", mom.s_plus}};
  finish(report, options);
  return report;
}

AuditReport audit_apriori_bound(const SolutionBundle& solution, const ProblemView& data, double p,
                                const AuditOptions& options) {
  require_exponent(p);
  const auto mom = data_moments(solution, data, p);
  AuditReport report;
  report.lemma = "apriori_bound";
  report.p = p;
  report.lhs = mom.sup_y + mom.quadvar;
  report.rhs_components = {{"xi", mom.xi},
                           {"f0", mom.f0},
                           {"g0", mom.g0},
                           {"sup_S_plus", mom.s_plus}};
  finish(report, options);
  return report;
}

AuditReport audit_stability(const SolutionBundle& a, const SolutionBundle& b,
                            const ProblemView& data_a, const ProblemView& data_b, double p,
                            const AuditOptions& options) {
  require_exponent(p);
  if (!(a.grid() == b.grid()) || a.paths() != b.paths() || a.dim() != b.dim() ||
      a.seed() != b.seed() || !data_a.forward.compatible_with(data_b.forward)) {
    throw MismatchedGrids("stability audit needs solutions on a shared grid, seed and path set");
  }
  const auto mom_a = data_moments(a, data_a, p);
  const auto mom_b = data_moments(b, data_b, p);
  const auto& fwd = data_a.forward;
  const std::size_t paths = a.paths();
  const std::size_t n = a.steps();
  const double dt = fwd.grid().dt();

  std::vector<double> dy(paths), dxi(paths), df(paths), dg(paths), ds(paths);
  for (std::size_t m = 0; m < paths; ++m) {
    double y_sup = 0.0, s_sup = 0.0, fi = 0.0, gi = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      y_sup = std::max(y_sup, std::abs(a.Y(m, i) - b.Y(m, i)));
      const double sa = data_a.obstacle.S(m, i), sb = data_b.obstacle.S(m, i);
      if (sa != sb) s_sup = std::max(s_sup, std::abs(sa - sb));
      if (i == n) break;
      const double t = fwd.grid().node(i);
      const auto x = fwd.X(m, i);
      const double y = a.Y(m, i);
      const auto z = a.Z(m, i);
      fi += std::abs(data_a.driver.f(t, x, y, z) - data_b.driver.f(t, x, y, z)) * dt;
      if (fwd.dG(m, i) != 0.0) {
        gi += std::abs(data_a.driver.g(t, x, y) - data_b.driver.g(t, x, y)) * fwd.dG(m, i);
      }
    }
    dy[m] = std::pow(y_sup, p);
    dxi[m] = std::pow(std::abs(data_a.obstacle.xi(m) - data_b.obstacle.xi(m)), p);
    df[m] = std::pow(fi, p);
    dg[m] = std::pow(gi, p);
    ds[m] = std::pow(s_sup, p);
  }
  const double psi = mom_a.xi + mom_a.f0 + mom_a.g0 + mom_a.s_plus + mom_b.xi + mom_b.f0 +
                     mom_b.g0 + mom_b.s_plus;
  const double ds_moment = stable_mean(ds);

  AuditReport report;
  report.lemma = "stability";
  report.p = p;
  report.lhs = stable_mean(dy);
  report.rhs_components = {
      {"delta_xi", stable_mean(dxi)},
      {"delta_f", stable_mean(df)},
      {"delta_g", stable_mean(dg)},
      {"delta_S", std::pow(psi, 1.0 / p) * std::pow(ds_moment, (p - 1.0) / p)},
      {"delta_S_alt", std::pow(psi, 1.0 / p) * std::pow(ds_moment, p / (p - 1.0))},
      {"psi", psi},
  };
  finish(report, options);
  return report;
}

StabilityDecay check_stability_decay(const AuditReport& full, const AuditReport& half) {
  StabilityDecay out;
  out.required = std::pow(2.0, full.p) / 1.5;
  if (half.lhs > 0.0) {
    out.factor = full.lhs / half.lhs;
  } else {
    out.factor = full.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  out.pass = out.factor >= out.required;
  return out;
}

double audit_skorokhod(const SolutionBundle& solution, const ObstacleData& obstacle) {
  if (obstacle.paths != solution.paths() || obstacle.nodes != solution.steps() + 1) {
    throw MismatchedGrids("obstacle data does not match the solution");
  }
  double worst = 0.0;
  for (std::size_t m = 0; m < solution.paths(); ++m) {
    double s = 0.0;
    for (std::size_t i = 0; i < solution.steps(); ++i) {
      const double dk = solution.dK(m, i);
      if (dk == 0.0) continue;
      s += (solution.Y(m, i) - obstacle.S(m, i)) * dk;
    }
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

ComparisonReport audit_comparison(const std::vector<const SolutionBundle*>& ladder,
                                  double se_multiplier, double max_fraction) {
  ComparisonReport report;
  for (std::size_t j = 1; j < ladder.size(); ++j) {
    if (!(ladder[j]->grid() == ladder[0]->grid()) || ladder[j]->paths() != ladder[0]->paths() ||
        ladder[j]->seed() != ladder[0]->seed()) {
      throw MismatchedGrids("comparison ladder mixes grids, seeds or path counts");
    }
  }
  for (std::size_t lo = 0; lo < ladder.size(); ++lo) {
    const auto& low = *ladder[lo];
    const std::size_t n = low.steps();
    std::vector<double> se(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      se[i] = low.node_standard_error(i);
      if (se[i] == 0.0 && i < n) se[i] = low.node_standard_error(i + 1);
    }
    for (std::size_t hi = lo + 1; hi < ladder.size(); ++hi) {
      const auto& high = *ladder[hi];
      for (std::size_t m = 0; m < low.paths(); ++m) {
        for (std::size_t i = 0; i <= n; ++i) {
          ++report.comparisons;
          if (high.Y(m, i) < low.Y(m, i) - se_multiplier * se[i]) ++report.violations;
        }
      }
    }
  }
  report.violation_fraction =
      report.comparisons > 0
          ? static_cast<double>(report.violations) / static_cast<double>(report.comparisons)
          : 0.0;
  report.pass = report.violation_fraction < max_fraction;
  return report;
}

}  // namespace rgbsde
