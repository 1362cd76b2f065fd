#include "rgbsde/pde_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#include "rgbsde/errors.hpp"

namespace rgbsde {

PdeGrid::PdeGrid(std::vector<double> t, std::vector<double> x)
    : t_(std::move(t)), x_(std::move(x)), u_(t_.size() * x_.size(), 0.0) {}

double PdeGrid::interpolate(std::size_t n, double x) const {
  if (x_.empty() || n >= t_.size()) throw InvalidArgument("interpolation outside the grid");
  const double tol = 1e-12 * (1.0 + std::abs(x));
  if (x < x_.front() - tol || x > x_.back() + tol) {
    throw MismatchedProblem("point " + std::to_string(x) + " lies outside the PDE interval");
  }
  if (x_.size() == 1) return u(n, 0);
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t j = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  j = std::min(j, x_.size() - 2);
  const double w = std::clamp((x - x_[j]) / (x_[j + 1] - x_[j]), 0.0, 1.0);
  return (1.0 - w) * u(n, j) + w * u(n, j + 1);
}

void PdeGrid::write_csv(std::ostream& out) const {
  out << std::scientific << std::setprecision(17);
  for (double x : x_) out << ',' << x;
  out << '\n';
  for (std::size_t n = 0; n < t_.size(); ++n) {
    out << t_[n];
    for (std::size_t j = 0; j < x_.size(); ++j) out << ',' << u(n, j);
    out << '\n';
  }
}

PdeGrid solve_obstacle_pde(const PdeProblem& problem, const PdeGridParams& params) {
  if (!problem.drift || !problem.volatility || !problem.f || !problem.g || !problem.barrier ||
      !problem.terminal) {
    throw NonCallableDriver("PDE problem has an empty coefficient");
  }
  if (!(problem.x_max > problem.x_min)) throw InvalidArgument("empty PDE interval");
  if (!(problem.horizon > 0.0)) throw InvalidArgument("PDE horizon must be positive");
  if (params.space_nodes < 3 || params.time_steps == 0) throw InvalidArgument("PDE grid too small");
  if (!(params.relaxation > 0.0 && params.relaxation < 2.0)) {
    throw InvalidArgument("relaxation must lie in (0, 2)");
  }

  const std::size_t jn = params.space_nodes;
  const std::size_t nt = params.time_steps;
  const double dx = (problem.x_max - problem.x_min) / static_cast<double>(jn - 1);
  const double dt = problem.horizon / static_cast<double>(nt);
  std::vector<double> t(nt + 1), x(jn);
  for (std::size_t n = 0; n <= nt; ++n) t[n] = problem.horizon * static_cast<double>(n) / static_cast<double>(nt);
  for (std::size_t j = 0; j < jn; ++j) x[j] = problem.x_min + dx * static_cast<double>(j);
  x.back() = problem.x_max;
  PdeGrid grid(t, x);

  // Matrix rows of I - dt L; lo/up multiply u_{j-1}/u_{j+1}.
  std::vector<double> diag(jn), lo(jn), up(jn), sig(jn);
  for (std::size_t j = 0; j < jn; ++j) {
    const double b = problem.drift(x[j]);
    const double s = problem.volatility(x[j]);
    const double a = 0.5 * s * s / (dx * dx);
    const double half_conv = b / (2.0 * dx);
    if (std::abs(b) * dx > 2.0 * (0.5 * s * s) + 1e-15 * std::abs(b)) {
      throw GridTooCoarse("cell Peclet number " +
                          std::to_string(std::abs(b) * dx / std::max(0.5 * s * s, 1e-300)) +
                          " exceeds 2 at x = " + std::to_string(x[j]));
    }
    diag[j] = 1.0 + 2.0 * dt * a;
    lo[j] = -dt * (a - half_conv);
    up[j] = -dt * (a + half_conv);
    sig[j] = s;
  }

  for (std::size_t j = 0; j < jn; ++j) grid.u(nt, j) = problem.terminal(x[j]);

  std::vector<double> u(jn), next(jn), h(jn);
  for (std::size_t j = 0; j < jn; ++j) u[j] = grid.u(nt, j);

  // Neighbours of node j with the ghost values eliminated.
  auto neighbours = [&](std::size_t j, double tn, double& left, double& right) {
    if (j == 0) {
      right = u[1];
      left = u[1] + 2.0 * dx * problem.g(tn, x[0], u[0]);
    } else if (j == jn - 1) {
      left = u[jn - 2];
      right = u[jn - 2] + 2.0 * dx * problem.g(tn, x[jn - 1], u[jn - 1]);
    } else {
      left = u[j - 1];
      right = u[j + 1];
    }
  };
  auto rhs_at = [&](std::size_t j, double tn, double left, double right) {
    const double z = sig[j] * (right - left) / (2.0 * dx);
    return next[j] + dt * problem.f(tn, x[j], u[j], z);
  };

  double worst_residual = 0.0;
  for (std::size_t n = nt; n-- > 0;) {
    const double tn = t[n];
    next = u;
    for (std::size_t j = 0; j < jn; ++j) h[j] = problem.barrier(tn, x[j]);
    std::size_t sweeps = 0;
    for (;;) {
      double change = 0.0;
      for (std::size_t j = 0; j < jn; ++j) {
        double left = 0.0, right = 0.0;
        neighbours(j, tn, left, right);
        const double gs = (rhs_at(j, tn, left, right) - lo[j] * left - up[j] * right) / diag[j];
        const double candidate = std::max(h[j], u[j] + params.relaxation * (gs - u[j]));
        change = std::max(change, std::abs(candidate - u[j]) / (1.0 + std::abs(candidate)));
        u[j] = candidate;
      }
      ++sweeps;
      if (!std::isfinite(change)) throw LcpNotConverged("non-finite iterate at t = " + std::to_string(tn));
      if (change < params.tol_lcp) break;
      if (sweeps >= params.max_sweeps) {
        throw LcpNotConverged("projected SOR did not reach " + std::to_string(params.tol_lcp) +
                              " in " + std::to_string(params.max_sweeps) + " sweeps at t = " +
                              std::to_string(tn));
      }
    }
    grid.total_sweeps += sweeps;
    for (std::size_t j = 0; j < jn; ++j) {
      double left = 0.0, right = 0.0;
      neighbours(j, tn, left, right);
      const double residual =
          diag[j] * u[j] + lo[j] * left + up[j] * right - rhs_at(j, tn, left, right);
      worst_residual = std::max(worst_residual, std::abs(std::min(u[j] - h[j], residual)));
      grid.u(n, j) = u[j];
    }
  }
  grid.max_complementarity_residual = worst_residual;
  return grid;
}

CrossValidation cross_validate(const PdeGrid& u, const std::vector<ProbabilisticEstimate>& estimates,
                               double c_disc) {
  if (u.x().size() < 2) throw MismatchedProblem("PDE grid has no spatial extent");
  const double dx = u.x()[1] - u.x()[0];
  CrossValidation out;
  for (const auto& e : estimates) {
    if (!(e.x0 > u.x().front() && e.x0 < u.x().back())) {
      throw MismatchedProblem("start " + std::to_string(e.x0) + " is not interior to the PDE interval");
    }
    CrossValidationPoint p;
    p.x0 = e.x0;
    p.probabilistic = e.y0;
    p.standard_error = e.standard_error;
    p.pde = u.interpolate(0, e.x0);
    p.abs_error = std::abs(e.y0 - p.pde);
    p.rel_error = p.abs_error / (1.0 + std::abs(p.pde));
    p.budget = 3.0 * e.standard_error + c_disc * (std::sqrt(e.dt) + dx * dx);
    p.within_budget = p.abs_error <= p.budget;
    out.max_rel_error = std::max(out.max_rel_error, p.rel_error);
    out.all_within_budget = out.all_within_budget && p.within_budget;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace rgbsde
