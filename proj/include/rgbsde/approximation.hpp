#pragma once

// Lipschitz approximation toolkit: inf-convolution approximants, the radial
// truncation q_n, the smooth cutoff theta_r, the local modulus pi_r and the
// composite drivers used by the two-step approximation pipeline.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "rgbsde/models.hpp"

namespace rgbsde {

/// Finite candidate set replacing the rational points in the infimum:
/// a tensor grid of spacing `spacing` on [-radius, radius]^dim.
class CandidateGrid {
 public:
  CandidateGrid(std::size_t dim, double radius, double spacing);
  /// Defaults: radius 4 (1 + x_max), spacing 1e-3 in 1D (coarser above).
  static CandidateGrid for_range(std::size_t dim, double x_max);

  std::size_t dim() const { return dim_; }
  double radius() const { return radius_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return points_.size() / dim_; }
  std::span<const double> point(std::size_t k) const { return {points_.data() + k * dim_, dim_}; }

 private:
  std::size_t dim_;
  double radius_;
  double spacing_;
  std::vector<double> points_;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// x -> min over grid points y of base(y) + n |x - y|. Exactly n-Lipschitz,
/// nondecreasing in n, and at most base(x) + n * spacing on the grid hull.
class InfConvApproximant {
 public:
  /// Throws EmptyGrid, or GrowthExceedsIndex when the linear-growth constant
  /// of base on the grid exceeds n.
  InfConvApproximant(ScalarFunction base, double n, CandidateGrid grid);

  double operator()(std::span<const double> x) const;
  double operator()(double x) const { return (*this)(std::span<const double>(&x, 1)); }

  double index() const { return n_; }
  /// max |base(y)| / (1 + |y|) over the grid.
  double growth_constant() const { return growth_; }
  const CandidateGrid& grid() const { return grid_; }

 private:
  double n_;
  CandidateGrid grid_;
  std::vector<double> values_;
  double growth_;
};

InfConvApproximant infconv(ScalarFunction base, double n, CandidateGrid grid);

/// q_n(z) = z n / (|z| v n).
std::vector<double> truncate_q(std::span<const double> z, double n);
/// Scalar q_n, i.e. clamp to [-n, n] (also for infinite arguments).
double truncate_q(double z, double n);

/// 1 on [-r, r], 0 outside (-r-1, r+1), cubic smoothstep 1 - 3u^2 + 2u^3
/// in between (u = |y| - r).
double cutoff_theta(double y, double r);

/// Uniform grid on [-r, r] with an odd number of points (so 0 is included).
std::vector<double> symmetric_grid(double r, std::size_t points = 1001);

/// sup over y in grid of |f(t, x, y, 0) - f(t, x, 0, 0)|.
double pi_r(const DriverSpec& driver, double t, StateView x, std::span<const double> y_grid);
double pi_r(const DriverSpec& driver, double r, double t, StateView x,
            std::size_t points = 1001);

struct StepOneOptions {
  std::size_t pi_grid_points = 1001;
  /// When the driver does not depend on x, pi_{r+1} is tabulated on these
  /// nodes and looked up for matching t.
  std::optional<TimeGrid> time_nodes;
  /// Box for the sampled constant estimates and post-checks.
  SamplingBox box{};
  std::size_t check_samples = 512;
  std::uint64_t check_seed = 7;
};

/// h_n(t,y,z) = theta_r(y) (f(t,y,q_n(z)) - f0_t) n / (pi_{r+1}(t) v n) + f0_t.
/// g is kept. The returned spec carries sampled Lipschitz-type constants.
DriverSpec build_h_n(const DriverSpec& driver, double n, double r,
                     const StepOneOptions& options = {});

/// f_n(t,y,z) = (f(t,y,q_n(z)) - f0_t) n / (pi_{r+1}(t) v n) + f0_t.
/// When the input declares mu <= 0, the output is checked (sampled) to keep
/// the monotonicity clause with mu <= 0 (AssumptionViolated otherwise).
DriverSpec build_f_n_step1(const DriverSpec& driver, double n, double r,
                           const StepOneOptions& options = {});

struct TruncatedData {
  std::vector<double> terminal;  // xi_n
  std::vector<double> barrier;   // S^n, same layout as the input
  std::shared_ptr<const DriverSpec> driver;
  std::size_t repaired_paths = 0;  // paths where xi_n was raised to S^n_T
};

/// xi_n = q_n(xi), f_n = f - f0 + q_n(f0), g_n = g - g0 + q_n(g0), S^n = q_n(S).
/// `nodes` is the number of barrier columns per path. When truncation breaks
/// S^n_T <= xi_n on a path, xi_n is raised to S^n_T (repair = true) or
/// ObstacleTerminalViolation is thrown.
TruncatedData truncate_data_step2(std::span<const double> terminal, const DriverSpec& driver,
                                  std::span<const double> barrier, std::size_t nodes, double n,
                                  bool repair = true);

}  // namespace rgbsde
