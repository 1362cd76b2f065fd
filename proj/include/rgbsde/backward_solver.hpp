#pragma once

// Regression-based backward induction for the discrete reflected generalized
// BSDE, its penalized approximation, and the two-step approximation pipeline
// for drivers that are only continuous in y.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rgbsde/approximation.hpp"
#include "rgbsde/forward_sde.hpp"
#include "rgbsde/models.hpp"
#include "rgbsde/regression.hpp"

namespace rgbsde {

enum class SolveMethod : std::uint64_t { reflected = 0, penalized = 1, pipeline = 2 };

std::string to_string(SolveMethod method);
SolveMethod solve_method_from_string(const std::string& name);

/// Discrete (Y, Z, K) on the grid of a forward bundle.
class SolutionBundle {
 public:
  SolutionBundle(TimeGrid grid, std::size_t paths, std::size_t dim, std::uint64_t seed,
                 SolveMethod method, double method_param);

  const TimeGrid& grid() const { return grid_; }
  std::size_t paths() const { return paths_; }
  std::size_t dim() const { return dim_; }
  std::size_t steps() const { return grid_.steps(); }
  std::uint64_t seed() const { return seed_; }
  SolveMethod method() const { return method_; }
  /// Penalty index for penalized solutions, final ladder index for pipeline.
  double method_param() const { return method_param_; }

  double Y(std::size_t path, std::size_t i) const { return y_[path * (steps() + 1) + i]; }
  double& Y(std::size_t path, std::size_t i) { return y_[path * (steps() + 1) + i]; }
  StateView Z(std::size_t path, std::size_t i) const {
    return {z_.data() + (path * steps() + i) * dim_, dim_};
  }
  double& Z(std::size_t path, std::size_t i, std::size_t k) {
    return z_[(path * steps() + i) * dim_ + k];
  }
  double dK(std::size_t path, std::size_t i) const { return k_[path * steps() + i]; }
  double& dK(std::size_t path, std::size_t i) { return k_[path * steps() + i]; }
  double K_total(std::size_t path) const;

  std::vector<double>& y_data() { return y_; }
  std::vector<double>& z_data() { return z_; }
  std::vector<double>& k_data() { return k_; }
  const std::vector<double>& y_data() const { return y_; }
  const std::vector<double>& z_data() const { return z_; }
  const std::vector<double>& k_data() const { return k_; }

  /// Mean of Y_0 over paths and its Monte Carlo standard error. The error
  /// is the spread of the pathwise realized value of Y_0 (terminal value
  /// plus accumulated driver and K increments minus the Z dW control
  /// variate), set by the solver.
  double y0_mean() const;
  double y0_standard_error() const { return y0_se_; }
  void set_y0_standard_error(double se) { y0_se_ = se; }
  /// Mean and standard error of Y_i over paths.
  double node_mean(std::size_t i) const;
  double node_standard_error(std::size_t i) const;
  double mean_K_T() const;

  void write(std::ostream& out) const;
  static SolutionBundle read(std::istream& in);

 private:
  TimeGrid grid_;
  std::size_t paths_;
  std::size_t dim_;
  std::uint64_t seed_;
  SolveMethod method_;
  double method_param_;
  double y0_se_ = 0.0;
  std::vector<double> y_;  // [paths x (N+1)]
  std::vector<double> z_;  // [paths x N x d]
  std::vector<double> k_;  // [paths x N]
};

/// What is regressed on X_i to form the continuation value.
enum class RegressionTarget {
  /// The computed Y_{i+1}.
  value,
  /// The pathwise realized value: Y_i where the constraint binds, otherwise
  /// the realized value at i+1 plus the step's driver terms.
  cashflow,
};

std::string to_string(RegressionTarget target);
RegressionTarget regression_target_from_string(const std::string& name);

struct SolverConfig {
  RegressionBasis basis{};
  RegressionTarget target = RegressionTarget::value;
  std::size_t picard_iterations = 2;
  /// Martingale control variate on Y_0 when the start is deterministic.
  bool control_variate = false;
  /// Sampled assumption check before solving; failures are logged only.
  bool check_driver = false;
  std::size_t check_samples = 256;
};

/// Backward recursion with reflection Y_i = max(Y~_i, S_i).
SolutionBundle solve_reflected(const ForwardBundle& forward, const DriverSpec& driver,
                               const ObstacleData& obstacle, const SolverConfig& config = {});

/// Same recursion with the constraint replaced by the penalty n (S - y)^+.
SolutionBundle solve_penalized(const ForwardBundle& forward, const DriverSpec& driver,
                               const ObstacleData& obstacle, double n,
                               const SolverConfig& config = {});

enum class RadiusPolicy {
  /// r slightly above the bound built from the sup norms of the truncated data.
  data_bound,
  /// r(n) = r_min 2^floor(n/8).
  doubling,
};

enum class InnerIndexPolicy {
  /// Step-1 index m = n 2^k, the first one with m >= sup pi_{r+1}.
  saturate,
  /// Step-1 index equal to the outer index n.
  coupled,
};

std::string to_string(RadiusPolicy policy);
RadiusPolicy radius_policy_from_string(const std::string& name);
std::string to_string(InnerIndexPolicy policy);
InnerIndexPolicy inner_policy_from_string(const std::string& name);

struct PipelineConfig {
  SolverConfig solver{};
  std::vector<double> ladder{1, 2, 4, 8, 16, 32};
  double tol_cauchy = 1e-3;
  RadiusPolicy r_policy = RadiusPolicy::data_bound;
  InnerIndexPolicy inner_policy = InnerIndexPolicy::saturate;
  double r_min = 1.0;
  double r_margin = 0.05;
  /// Cap on ||G_T||_inf in the radius bound; <= 0 means 1.5 x empirical max.
  double g_cap = 0.0;
  double inner_index_cap = 1048576.0;
  std::size_t pi_grid_points = 201;
  /// Reject drivers declaring mu > 0 instead of proceeding.
  bool require_nonpositive_mu = false;
  /// Raise PipelineNotCauchy when d_n fails to decrease 3 times in a row.
  bool strict = true;
};

struct PipelineStep {
  double n = 0.0;           // outer (truncation) index
  double inner_index = 0.0; // index used for the step-1 driver
  double radius = 0.0;
  double y0 = 0.0;
  double d_y = 0.0;         // distance to the previous iterate (0 for the first)
  double d_z = 0.0;
  std::size_t repaired_paths = 0;
  bool inner_cap_hit = false;
};

struct ConvergenceTrace {
  std::vector<PipelineStep> steps;
  double g_cap = 0.0;
  double g_empirical_max = 0.0;
  bool g_cap_exceeded = false;
  bool converged = false;
  /// Distances d_n between consecutive ladder entries.
  std::vector<double> distances() const;
};

struct PipelineResult {
  SolutionBundle solution;
  ConvergenceTrace trace;
};

/// Truncates the data (step 2), builds the Lipschitz-in-z driver of step 1
/// and solves each approximant with solve_reflected, walking the ladder until
/// the Cauchy distance falls below tol_cauchy.
PipelineResult solve_pipeline(const ForwardBundle& forward, const DriverSpec& driver,
                              const ObstacleData& obstacle, const PipelineConfig& config = {});

/// Radius bound sqrt(e^{(1+lambda^2)T}) (|xi| + T |f0| + G_cap |g0| + |S^+|).
double step_one_radius_bound(double horizon, double lambda, double xi_sup, double f0_sup,
                             double g_cap, double g0_sup, double barrier_plus_sup);

struct KResidual {
  std::vector<double> residual;  // [paths x (N+1)], K recomputed from the equation
  double score = 0.0;            // max over nodes of mean |K_residual - K_stored|
};

/// Recomputes K from K_i = Y_0 - Y_i - sum f dt - sum g dG + sum Z dW.
KResidual extract_K(const SolutionBundle& solution, const ForwardBundle& forward,
                    const DriverSpec& driver);

/// Max over nodes of the path-averaged |Y^a - Y^b|, and the Z analogue.
struct BundleDistance {
  double y = 0.0;
  double z = 0.0;
};
BundleDistance bundle_distance(const SolutionBundle& a, const SolutionBundle& b);

}  // namespace rgbsde
