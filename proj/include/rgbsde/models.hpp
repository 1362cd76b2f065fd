#pragma once

// Problem data: time grids, drivers (f, g), obstacles, domains, and the
// sampled checker for the structural assumptions on the driver.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rgbsde {

using StateView = std::span<const double>;

class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps);

  double horizon() const { return horizon_; }
  std::size_t steps() const { return steps_; }
  double dt() const { return horizon_ / static_cast<double>(steps_); }
  double node(std::size_t i) const {
    return horizon_ * static_cast<double>(i) / static_cast<double>(steps_);
  }
  std::vector<double> nodes() const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double horizon_;
  std::size_t steps_;
};

/// f(t, x, y, z): x is the forward state, z has the Brownian dimension.
using DriverF = std::function<double(double t, StateView x, double y, StateView z)>;
/// g(t, x, y), integrated against the boundary increasing process.
using DriverG = std::function<double(double t, StateView x, double y)>;

struct DriverParams {
  DriverF f;
  DriverG g;
  double lambda = 0.0;   // z-Lipschitz constant of f
  double mu = 0.0;       // y-monotonicity constant of f
  double beta = -1.0;    // y-monotonicity constant of g, must be < 0
  double growth = 0.0;   // linear-growth constant M
  double p = 1.5;        // integrability exponent in (1, 2)
  std::size_t dim = 1;   // dimension of z
  bool state_dependent = true;  // false when f, g ignore x
  std::string name = "driver";
};

/// The driver pair (f, g) with its declared structural constants.
/// Construction rejects beta >= 0 and p outside (1, 2).
class DriverSpec {
 public:
  explicit DriverSpec(DriverParams params);

  double f(double t, StateView x, double y, StateView z) const {
    return params_.f(t, x, y, z);
  }
  double g(double t, StateView x, double y) const { return params_.g(t, x, y); }
  /// Signed baseline f(t, x, 0, 0).
  double f_at_origin(double t, StateView x) const;
  /// Signed baseline g(t, x, 0).
  double g_at_origin(double t, StateView x) const { return g(t, x, 0.0); }

  double lambda() const { return params_.lambda; }
  double mu() const { return params_.mu; }
  double beta() const { return params_.beta; }
  double growth() const { return params_.growth; }
  double p() const { return params_.p; }
  std::size_t dim() const { return params_.dim; }
  bool state_dependent() const { return params_.state_dependent; }
  const std::string& name() const { return params_.name; }
  const DriverParams& params() const { return params_; }

  /// Copy with the exponent replaced (validated).
  DriverSpec with_p(double p) const;

 private:
  DriverParams params_;
};

/// Sampling box used by the clause checks: t in [0, horizon],
/// y in [-radius, radius], z in [-radius, radius]^dim, x in
/// [-state_radius, state_radius]^state_dim.
struct SamplingBox {
  double horizon = 1.0;
  double radius = 10.0;
  double state_radius = 10.0;
  std::size_t state_dim = 1;
  double tol_scale = 1e-9;
};

struct ClauseResult {
  std::string clause;  // "iii", "iv", "v", "vi", "vii"
  bool passed = true;
  double worst_violation = 0.0;  // max of lhs - rhs over samples, <= 0 when passing
  std::size_t samples = 0;
};

struct AssumptionReport {
  std::vector<ClauseResult> clauses;
  bool all_passed() const;
  const ClauseResult& clause(const std::string& name) const;
};

/// Pseudo-random falsification of the Lipschitz, monotonicity and growth
/// clauses of the driver. Deterministic in (driver, samples, seed, box).
AssumptionReport check_assumptions(const DriverSpec& driver, std::size_t samples,
                                   std::uint64_t seed, const SamplingBox& box = {});

// ---------------------------------------------------------------------------
// Domains

using ScalarField = std::function<double(StateView x)>;
using VectorField = std::function<void(StateView x, std::span<double> out)>;

enum class DomainKind { free_space, half_line, interval, ball, custom };

/// Theta = {psi > 0}; grad_psi is the inward unit normal near the boundary.
struct DomainSpec {
  DomainKind kind = DomainKind::custom;
  std::size_t dim = 1;
  ScalarField psi;
  VectorField grad_psi;
  // Geometry of the built-in kinds (interval length / ball radius and centre).
  double length = 0.0;
  double radius = 0.0;
  std::vector<double> centre;

  bool bounded_boundary() const { return kind != DomainKind::free_space; }
  std::vector<double> gradient(StateView x) const;
};

/// Theta = (0, inf), psi(x) = x.
DomainSpec half_line_domain();
/// Theta = (0, L); psi = min(x, L - x) away from the midpoint, blended
/// quadratically on |x - L/2| < L/4.
DomainSpec interval_domain(double length);
/// Theta = open ball of radius R around c; psi = R - |x - c|.
DomainSpec ball_domain(std::vector<double> centre, double radius);
/// Whole space: no boundary, G == 0.
DomainSpec free_space_domain(std::size_t dim);

/// Checks Theta is nonempty (sampled) and |grad psi| = 1 on the band
/// {|psi| <= band} of sampled points. Returns the worst | |grad psi| - 1 |.
double check_unit_normal(const DomainSpec& domain, double band, std::size_t samples,
                         std::uint64_t seed, double sample_radius = 10.0);

// ---------------------------------------------------------------------------
// Obstacles

using BarrierFn = std::function<double(double t, StateView x)>;
using TerminalFn = std::function<double(StateView x)>;

inline constexpr double no_barrier = -std::numeric_limits<double>::infinity();

/// Barrier S and terminal value xi. Markovian mode uses h(t, x) and l(x);
/// path mode stores S [M x (N+1)] and xi [M] explicitly.
struct ObstacleSpec {
  BarrierFn h;
  TerminalFn l;
  std::vector<double> barrier_paths;
  std::vector<double> terminal_samples;

  static ObstacleSpec markovian(BarrierFn h, TerminalFn l);
  static ObstacleSpec unconstrained(TerminalFn l);
  static ObstacleSpec from_paths(std::vector<double> barrier, std::vector<double> terminal);
  bool is_markovian() const { return static_cast<bool>(l); }
};

class ForwardBundle;

/// Barrier and terminal data evaluated along a forward bundle.
struct ObstacleData {
  std::size_t paths = 0;
  std::size_t nodes = 0;          // N + 1
  std::vector<double> barrier;    // [paths x nodes]
  std::vector<double> terminal;   // [paths]

  double S(std::size_t path, std::size_t i) const { return barrier[path * nodes + i]; }
  double xi(std::size_t path) const { return terminal[path]; }
  bool unconstrained() const;
};

/// Evaluates the obstacle along the forward paths and enforces S_T <= xi on
/// every path (ObstacleTerminalViolation otherwise).
ObstacleData materialize(const ObstacleSpec& obstacle, const ForwardBundle& forward);

}  // namespace rgbsde
