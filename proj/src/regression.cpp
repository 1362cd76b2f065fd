#include "rgbsde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "rgbsde/errors.hpp"

namespace rgbsde {

std::string to_string(BasisFamily family) {
  return family == BasisFamily::polynomial ? "polynomial" : "piecewise_linear";
}

BasisFamily basis_family_from_string(const std::string& name) {
  if (name == "polynomial") return BasisFamily::polynomial;
  if (name == "piecewise_linear" || name == "piecewise-linear") return BasisFamily::piecewise_linear;
  throw InvalidArgument("unknown basis family '" + name + "'");
}

double stable_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double anchor = values[0];
  double acc = 0.0;
  for (double v : values) acc += v - anchor;
  return anchor + acc / static_cast<double>(values.size());
}

namespace {

/// Exponent tuples of total degree 1..degree in `vars` variables.
std::vector<std::vector<std::size_t>> monomials(std::size_t vars, std::size_t degree) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> current(vars, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t var, std::size_t left) {
    if (var == vars) {
      std::size_t total = 0;
      for (auto e : current) total += e;
      if (total > 0) out.push_back(current);
      return;
    }
    for (std::size_t e = 0; e <= left; ++e) {
      current[var] = e;
      rec(var + 1, left - e);
    }
    current[var] = 0;
  };
  rec(0, degree);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    std::size_t sa = 0, sb = 0;
    for (auto e : a) sa += e;
    for (auto e : b) sb += e;
    return sa < sb;
  });
  return out;
}

}  // namespace

StepRegression::StepRegression(const RegressionBasis& basis, std::span<const double> states,
                               std::size_t paths, std::size_t dim)
    : paths_(paths) {
  if (paths == 0) throw RegressionSingular("no samples");
  if (states.size() != paths * dim) throw InvalidArgument("state array does not match paths x dim");

  // Standardize each coordinate; drop coordinates without spread.
  std::vector<std::size_t> active;
  std::vector<double> centre(dim), scale(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    double sum = 0.0;
    for (std::size_t m = 0; m < paths; ++m) sum += states[m * dim + k];
    const double mean = sum / static_cast<double>(paths);
    double var = 0.0;
    for (std::size_t m = 0; m < paths; ++m) {
      const double dv = states[m * dim + k] - mean;
      var += dv * dv;
    }
    const double sd = std::sqrt(var / static_cast<double>(paths));
    centre[k] = mean;
    scale[k] = sd;
    if (std::isfinite(sd) && sd > 1e-12 * (1.0 + std::abs(mean))) active.push_back(k);
  }

  auto u = [&](std::size_t m, std::size_t k) { return (states[m * dim + k] - centre[k]) / scale[k]; };

  if (active.empty() || basis.degree == 0) {
    design_.resize(static_cast<Eigen::Index>(paths), 0);
    return;
  }

  if (basis.family == BasisFamily::polynomial) {
    const auto terms = monomials(active.size(), basis.degree);
    design_.resize(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t m = 0; m < paths; ++m) {
      for (std::size_t c = 0; c < terms.size(); ++c) {
        double v = 1.0;
        for (std::size_t a = 0; a < active.size(); ++a) {
          const double base = u(m, active[a]);
          for (std::size_t e = 0; e < terms[c][a]; ++e) v *= base;
        }
        design_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)) = v;
      }
    }
  } else {
    if (active.size() != 1) {
      throw InvalidArgument("piecewise-linear basis supports one active coordinate only");
    }
    const std::size_t k = active[0];
    std::vector<double> sorted(paths);
    for (std::size_t m = 0; m < paths; ++m) sorted[m] = u(m, k);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t knots = basis.degree;
    std::vector<double> knot(knots);
    for (std::size_t j = 0; j < knots; ++j) {
      knot[j] = sorted[(j + 1) * (paths - 1) / (knots + 1)];
    }
    knot.erase(std::unique(knot.begin(), knot.end()), knot.end());
    design_.resize(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(knot.size() + 1));
    for (std::size_t m = 0; m < paths; ++m) {
      const double v = u(m, k);
      design_(static_cast<Eigen::Index>(m), 0) = v;
      for (std::size_t j = 0; j < knot.size(); ++j) {
        design_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j + 1)) =
            std::max(v - knot[j], 0.0);
      }
    }
  }

  // Centre the columns; the intercept is carried by the response mean.
  const Eigen::RowVectorXd col_mean = design_.colwise().mean();
  design_.rowwise() -= col_mean;
  if (!design_.allFinite()) throw RegressionSingular("non-finite basis values");

  const Eigen::MatrixXd gram =
      (design_.transpose() * design_) / static_cast<double>(paths);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw RegressionSingular("eigen decomposition failed");
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double lmin = lambda.minCoeff();
  if (!(lmax > 0.0)) {
    design_.resize(static_cast<Eigen::Index>(paths), 0);
    return;
  }
  condition_ = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  double ridge = 0.0;
  if (condition_ > basis.condition_threshold) {
    ridge = basis.ridge * lmax;
    while ((lmax + ridge) / (std::max(lmin, 0.0) + ridge) > basis.condition_threshold) {
      if (ridge >= basis.max_ridge * lmax) {
        throw RegressionSingular("condition number " + std::to_string(condition_) +
                                 " not reduced by ridge");
      }
      ridge *= 100.0;
    }
    ridge_applied_ = true;
  }
  Eigen::VectorXd inv = (lambda.array() + ridge).inverse();
  solver_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

std::vector<double> StepRegression::fit(std::span<const double> response) const {
  if (response.size() != paths_) throw InvalidArgument("response length does not match samples");
  const double mean = stable_mean(response);
  std::vector<double> fitted(paths_, mean);
  if (design_.cols() == 0) return fitted;

  Eigen::VectorXd centred(static_cast<Eigen::Index>(paths_));
  bool all_zero = true;
  for (std::size_t m = 0; m < paths_; ++m) {
    centred(static_cast<Eigen::Index>(m)) = response[m] - mean;
    all_zero = all_zero && response[m] == mean;
  }
  if (all_zero) return fitted;
  const Eigen::VectorXd rhs = design_.transpose() * centred / static_cast<double>(paths_);
  const Eigen::VectorXd beta = solver_ * rhs;
  const Eigen::VectorXd correction = design_ * beta;
  for (std::size_t m = 0; m < paths_; ++m) fitted[m] = mean + correction(static_cast<Eigen::Index>(m));
  return fitted;
}

}  // namespace rgbsde
