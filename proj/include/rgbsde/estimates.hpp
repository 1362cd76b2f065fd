#pragma once

// Empirical audits of the a priori estimates: each inequality becomes a
// ratio lhs / rhs measured on simulated solutions.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rgbsde/backward_solver.hpp"
#include "rgbsde/forward_sde.hpp"
#include "rgbsde/models.hpp"

namespace rgbsde {

/// c(p) = p [(p - 1) ^ 1] / 2.
double c_p(double p);

/// x / |x|, and 0 at 0.
double unit_direction(double x);
/// |y|^{p-1} y^, the weight of the p-power decomposition.
double p_power_weight(double y, double p);

struct NormEstimate {
  double moment = 0.0;          // E[...]
  double norm = 0.0;            // moment^{1/p}
  double standard_error = 0.0;  // of the moment
};

/// E[sup_t |Y_t|^p]^{1/p} over paths of the [paths x nodes] array.
NormEstimate lp_sup_norm(std::span<const double> paths_by_nodes, std::size_t paths,
                         std::size_t nodes, double p);
/// E[(sum_i |Z_i|^2 dt)^{p/2}]^{1/p}; Z is [paths x steps x dim].
NormEstimate lp_quadvar_norm(std::span<const double> z, std::size_t paths, std::size_t steps,
                             std::size_t dim, double dt, double p);

struct AuditReport {
  std::string lemma;  // "Z_control", "apriori_bound", "stability", ...
  double lhs = 0.0;
  std::map<std::string, double> rhs_components;
  double rhs = 0.0;
  double ratio = 0.0;
  double p = 1.5;
  double c_p = 0.0;
  double constant_estimate = 0.0;
  double ceiling = 100.0;
  bool degenerate = false;  // 0 / 0, passes by convention
  bool pass = true;

  static std::string csv_header();
  std::string csv_row() const;
};

/// The data a solution was computed from.
struct ProblemView {
  const ForwardBundle& forward;
  const DriverSpec& driver;
  const ObstacleData& obstacle;
};

struct AuditOptions {
  double ceiling = 100.0;
};

AuditReport audit_Z_control(const SolutionBundle& solution, const ProblemView& data, double p,
                            const AuditOptions& options = {});

AuditReport audit_apriori_bound(const SolutionBundle& solution, const ProblemView& data, double p,
                                const AuditOptions& options = {});

/// Differences A - B; both solutions must share grid, seed and paths
/// (MismatchedGrids otherwise). The driver difference is evaluated along
/// the solution of A. The component "delta_S_alt" stores the term with
/// exponent p/(p-1) in place of (p-1)/p; it is not summed into rhs.
AuditReport audit_stability(const SolutionBundle& a, const SolutionBundle& b,
                            const ProblemView& data_a, const ProblemView& data_b, double p,
                            const AuditOptions& options = {});

struct StabilityDecay {
  double factor = 0.0;     // lhs(full) / lhs(half)
  double required = 0.0;   // 2^p / 1.5
  bool pass = false;
};

/// Halving the perturbation must divide the stability lhs by 2^p / 1.5.
StabilityDecay check_stability_decay(const AuditReport& full, const AuditReport& half);

/// Max over paths of |sum_i (Y_i - S_i) dK_i|; terms with dK_i = 0 are skipped.
double audit_skorokhod(const SolutionBundle& solution, const ObstacleData& obstacle);

struct ComparisonReport {
  std::size_t violations = 0;
  std::size_t comparisons = 0;
  double violation_fraction = 0.0;
  bool pass = true;
};

/// Counts (path, node) pairs with Y^n_i < Y^m_i - 2 SE_i(m) for every pair of
/// ladder entries with n > m (ladder ordered by increasing index).
ComparisonReport audit_comparison(const std::vector<const SolutionBundle*>& ladder,
                                  double se_multiplier = 2.0, double max_fraction = 1e-3);

}  // namespace rgbsde
