#pragma once

// 1D finite-difference solver for the obstacle problem with a nonlinear
// Neumann boundary condition, used as an independent check of the
// probabilistic solver in Markovian mode.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

namespace rgbsde {

struct PdeProblem {
  double x_min = 0.0;
  double x_max = 1.0;
  double horizon = 1.0;
  std::function<double(double x)> drift;       // b(x)
  std::function<double(double x)> volatility;  // sigma(x)
  /// f(t, x, u, z) with z = sigma u_x.
  std::function<double(double t, double x, double u, double z)> f;
  /// g(t, x, u) in the boundary condition du/dn + g = 0 (n inward).
  std::function<double(double t, double x, double u)> g;
  std::function<double(double t, double x)> barrier;  // h; -inf for none
  std::function<double(double x)> terminal;           // l
};

struct PdeGridParams {
  std::size_t space_nodes = 401;  // J + 1
  std::size_t time_steps = 400;
  double tol_lcp = 1e-10;
  std::size_t max_sweeps = 100000;
  double relaxation = 1.2;
};

/// u on (N_t + 1) x (J + 1) nodes; row 0 is t = 0.
class PdeGrid {
 public:
  PdeGrid(std::vector<double> t, std::vector<double> x);

  const std::vector<double>& t() const { return t_; }
  const std::vector<double>& x() const { return x_; }
  double u(std::size_t n, std::size_t j) const { return u_[n * x_.size() + j]; }
  double& u(std::size_t n, std::size_t j) { return u_[n * x_.size() + j]; }
  /// Linear interpolation of u(t_n, .) at x.
  double interpolate(std::size_t n, double x) const;

  double max_complementarity_residual = 0.0;
  std::size_t total_sweeps = 0;

  /// CSV matrix: first row x nodes (after an empty corner), first column t.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<double> t_;
  std::vector<double> x_;
  std::vector<double> u_;
};

/// Implicit Euler in time; each step solves the complementarity problem
/// min{u - h, A u - rhs} = 0 by projected SOR. Neumann conditions enter
/// through ghost nodes, g lagged one sweep.
PdeGrid solve_obstacle_pde(const PdeProblem& problem, const PdeGridParams& params = {});

struct CrossValidationPoint {
  double x0 = 0.0;
  double probabilistic = 0.0;
  double standard_error = 0.0;
  double pde = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;  // |Y0 - u| / (1 + |u|)
  double budget = 0.0;
  bool within_budget = false;
};

struct CrossValidation {
  std::vector<CrossValidationPoint> points;
  double max_rel_error = 0.0;
  bool all_within_budget = true;
};

struct ProbabilisticEstimate {
  double x0 = 0.0;
  double y0 = 0.0;
  double standard_error = 0.0;
  double dt = 0.0;
};

/// Budget per point: 3 SE + c_disc (dt^{1/2} + dx^2), with dt the
/// probabilistic time step and dx the PDE space step.
CrossValidation cross_validate(const PdeGrid& u, const std::vector<ProbabilisticEstimate>& estimates,
                               double c_disc = 1.0);

}  // namespace rgbsde
