#pragma once

// Least-squares conditional expectation estimator used by the backward
// recursion: one global regression per time step on a basis of the state.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rgbsde {

enum class BasisFamily { polynomial, piecewise_linear };

std::string to_string(BasisFamily family);
BasisFamily basis_family_from_string(const std::string& name);

struct RegressionBasis {
  BasisFamily family = BasisFamily::polynomial;
  /// Total degree for polynomials, number of interior knots for the
  /// piecewise-linear family (1D only).
  std::size_t degree = 4;
  /// Ridge is added only when the Gram condition number exceeds this.
  double condition_threshold = 1e10;
  double ridge = 1e-10;        // relative to the largest Gram eigenvalue
  double max_ridge = 1e-2;     // ridge escalation stops here
};

/// Regression of several responses on the basis evaluated at the states of
/// one time step. Features are standardized per coordinate; coordinates with
/// no spread only contribute the constant. Fitted values of a constant
/// response are returned exactly.
class StepRegression {
 public:
  /// states: [paths x dim], row-major.
  StepRegression(const RegressionBasis& basis, std::span<const double> states, std::size_t paths,
                 std::size_t dim);

  /// Fitted values of the response at every sample.
  std::vector<double> fit(std::span<const double> response) const;

  std::size_t features() const { return static_cast<std::size_t>(design_.cols()); }
  bool ridge_applied() const { return ridge_applied_; }
  double condition_number() const { return condition_; }

 private:
  std::size_t paths_;
  Eigen::MatrixXd design_;  // centred features (constant handled separately)
  Eigen::MatrixXd solver_;  // (G + ridge)^{-1}
  bool ridge_applied_ = false;
  double condition_ = 1.0;
};

/// Mean that is exact for constant vectors.
double stable_mean(std::span<const double> values);

}  // namespace rgbsde
