#pragma once

// Reflected forward diffusion X in the closure of Theta together with its
// boundary increasing process G.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rgbsde/models.hpp"

namespace rgbsde {

enum class ReflectionScheme : std::uint64_t {
  projection = 0,
  skorokhod_explicit = 1,
  penalization = 2,
};

std::string to_string(ReflectionScheme scheme);
ReflectionScheme reflection_scheme_from_string(const std::string& name);

/// b(x) written into out[d].
using DriftFn = std::function<void(StateView x, std::span<double> out)>;
/// sigma(x) written row-major into out[d * d].
using DiffusionFn = std::function<void(StateView x, std::span<double> out)>;

DriftFn constant_drift(std::vector<double> b);
/// sigma = s * identity.
DiffusionFn scalar_diffusion(double s, std::size_t dim);

struct ForwardOptions {
  ReflectionScheme scheme = ReflectionScheme::projection;
  std::size_t max_projection_iterations = 20;
  /// Pushback intensity for the penalization scheme, in units of 1/dt.
  double penalty_rate = 1.0;
  /// Half-line projection only: reflect against the sampled minimum of the
  /// Brownian bridge over each step instead of the endpoint alone. Exact at
  /// the nodes for constant coefficients.
  bool bridge = true;
};

/// Simulated paths of X, the increments of G and the Brownian increments.
/// Immutable once built.
class ForwardBundle {
 public:
  ForwardBundle(TimeGrid grid, std::size_t paths, std::size_t dim, std::uint64_t seed,
                ReflectionScheme scheme, std::vector<double> states,
                std::vector<double> g_increments, std::vector<double> brownian_increments);

  const TimeGrid& grid() const { return grid_; }
  std::size_t paths() const { return paths_; }
  std::size_t dim() const { return dim_; }
  std::size_t steps() const { return grid_.steps(); }
  std::uint64_t seed() const { return seed_; }
  ReflectionScheme scheme() const { return scheme_; }

  StateView X(std::size_t path, std::size_t i) const {
    return {states_.data() + (path * (steps() + 1) + i) * dim_, dim_};
  }
  double dG(std::size_t path, std::size_t i) const { return g_incr_[path * steps() + i]; }
  StateView dW(std::size_t path, std::size_t i) const {
    return {dw_.data() + (path * steps() + i) * dim_, dim_};
  }
  double G_total(std::size_t path) const;

  std::span<const double> states() const { return states_; }
  std::span<const double> g_increments() const { return g_incr_; }
  std::span<const double> brownian_increments() const { return dw_; }

  /// Boundary band used to attribute G-growth to boundary contact.
  double band() const { return band_; }
  void set_band(double band) { band_ = band; }
  /// Tolerated depth outside the domain (0 except for penalization).
  double outside_tolerance() const { return outside_tol_; }
  void set_outside_tolerance(double tol) { outside_tol_ = tol; }

  /// Paths of `a` followed by paths of `b`; grids and dims must match.
  static ForwardBundle concatenate(const ForwardBundle& a, const ForwardBundle& b);

  /// Same grid, dim, seed and path count.
  bool compatible_with(const ForwardBundle& other) const;

  void write(std::ostream& out) const;
  static ForwardBundle read(std::istream& in);

 private:
  TimeGrid grid_;
  std::size_t paths_;
  std::size_t dim_;
  std::uint64_t seed_;
  ReflectionScheme scheme_;
  std::vector<double> states_;  // [paths x (N+1) x d]
  std::vector<double> g_incr_;  // [paths x N]
  std::vector<double> dw_;      // [paths x N x d]
  double band_ = 0.0;
  double outside_tol_ = 0.0;
};

/// Euler-Maruyama step followed by reflection onto the closure of Theta.
/// Path k uses the RNG substream keyed by (seed, k), so the bundle does not
/// depend on the number of workers.
ForwardBundle simulate_reflected(const DomainSpec& domain, const DriftFn& drift,
                                 const DiffusionFn& sigma, std::span<const double> x0,
                                 const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                                 const ForwardOptions& options = {});

/// Mean over paths of G_T.
double expected_local_time(const ForwardBundle& bundle);

/// Standard error of the mean of X_T along coordinate `coord`.
struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};
MeanEstimate terminal_mean(const ForwardBundle& bundle, std::size_t coord = 0);

}  // namespace rgbsde
