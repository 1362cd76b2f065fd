#include "rgbsde/approximation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "rgbsde/errors.hpp"
#include "rgbsde/rng.hpp"

namespace rgbsde {

CandidateGrid::CandidateGrid(std::size_t dim, double radius, double spacing)
    : dim_(dim), radius_(radius), spacing_(spacing) {
  if (dim == 0) throw InvalidArgument("candidate grid dimension must be positive");
  if (!(spacing > 0.0)) throw InvalidArgument("candidate grid spacing must be positive");
  if (!(radius >= 0.0)) throw EmptyGrid("negative candidate grid radius");
  const auto half = static_cast<std::size_t>(std::floor(radius / spacing + 1e-9));
  const std::size_t per_axis = 2 * half + 1;
  std::size_t total = 1;
  for (std::size_t k = 0; k < dim; ++k) total *= per_axis;
  points_.resize(total * dim);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (std::size_t k = 0; k < dim; ++k) {
      const auto j = static_cast<double>(rest % per_axis);
      rest /= per_axis;
      points_[idx * dim + k] = (j - static_cast<double>(half)) * spacing;
    }
  }
}

CandidateGrid CandidateGrid::for_range(std::size_t dim, double x_max) {
  const double radius = 4.0 * (1.0 + std::abs(x_max));
  const double spacing = dim == 1 ? 1e-3 : 0.05 * (1.0 + std::abs(x_max));
  return CandidateGrid(dim, radius, spacing);
}

namespace {
double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}
}  // namespace

InfConvApproximant::InfConvApproximant(ScalarFunction base, double n, CandidateGrid grid)
    : n_(n), grid_(std::move(grid)), growth_(0.0) {
  if (grid_.size() == 0) throw EmptyGrid("inf-convolution over an empty candidate set");
  if (!(n > 0.0)) throw InvalidArgument("inf-convolution index must be positive");
  values_.resize(grid_.size());
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    const auto y = grid_.point(k);
    values_[k] = base(y);
    double norm_y = 0.0;
    for (double c : y) norm_y += c * c;
    growth_ = std::max(growth_, std::abs(values_[k]) / (1.0 + std::sqrt(norm_y)));
  }
  if (growth_ > n) {
    throw GrowthExceedsIndex("linear-growth constant " + std::to_string(growth_) +
                             " on the candidate grid exceeds the index " + std::to_string(n));
  }
}

double InfConvApproximant::operator()(std::span<const double> x) const {
  if (x.size() != grid_.dim()) throw InvalidArgument("point dimension does not match the grid");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values_.size(); ++k) {
    best = std::min(best, values_[k] + n_ * distance(x, grid_.point(k)));
  }
  return best;
}

InfConvApproximant infconv(ScalarFunction base, double n, CandidateGrid grid) {
  return InfConvApproximant(std::move(base), n, std::move(grid));
}

std::vector<double> truncate_q(std::span<const double> z, double n) {
  if (!(n > 0.0)) throw InvalidArgument("truncation index must be positive");
  double norm = 0.0;
  for (double c : z) norm += c * c;
  norm = std::sqrt(norm);
  std::vector<double> out(z.begin(), z.end());
  if (norm > n) {
    const double factor = n / norm;
    for (auto& c : out) c *= factor;
  }
  return out;
}

double truncate_q(double z, double n) {
  if (!(n > 0.0)) throw InvalidArgument("truncation index must be positive");
  return std::clamp(z, -n, n);
}

double cutoff_theta(double y, double r) {
  if (!(r > 0.0)) throw InvalidArgument("cutoff radius must be positive");
  const double a = std::abs(y);
  if (a <= r) return 1.0;
  if (a >= r + 1.0) return 0.0;
  const double u = a - r;
  return 1.0 - 3.0 * u * u + 2.0 * u * u * u;
}

std::vector<double> symmetric_grid(double r, std::size_t points) {
  if (points < 3) points = 3;
  if (points % 2 == 0) ++points;
  std::vector<double> grid(points);
  const std::size_t half = points / 2;
  for (std::size_t k = 0; k < points; ++k) {
    const double frac = (static_cast<double>(k) - static_cast<double>(half)) / static_cast<double>(half);
    grid[k] = r * frac;
  }
  grid[half] = 0.0;
  return grid;
}

double pi_r(const DriverSpec& driver, double t, StateView x, std::span<const double> y_grid) {
  std::vector<double> zero(driver.dim(), 0.0);
  const double f00 = driver.f(t, x, 0.0, zero);
  double best = 0.0;
  for (double y : y_grid) best = std::max(best, std::abs(driver.f(t, x, y, zero) - f00));
  return best;
}

double pi_r(const DriverSpec& driver, double r, double t, StateView x, std::size_t points) {
  const auto grid = symmetric_grid(r, points);
  return pi_r(driver, t, x, grid);
}

namespace {

/// Shared state of the step-1 drivers.
struct StepOneDriver {
  DriverSpec base;
  double n;
  double r;
  bool with_cutoff;
  std::vector<double> pi_grid;       // symmetric grid on [-(r+1), r+1]
  std::optional<TimeGrid> nodes;
  std::vector<double> pi_table;      // pi_{r+1}(t_i) for x-independent drivers

  double pi_at(double t, StateView x) const {
    if (!pi_table.empty()) {
      const double dt = nodes->dt();
      const auto i = static_cast<std::size_t>(std::llround(t / dt));
      if (i < pi_table.size() && std::abs(nodes->node(i) - t) <= 1e-12 * (1.0 + nodes->horizon())) {
        return pi_table[i];
      }
    }
    return pi_r(base, t, x, pi_grid);
  }

  double evaluate(double t, StateView x, double y, StateView z, double pi) const {
    const auto qz = truncate_q(z, n);
    const double f0 = base.f_at_origin(t, x);
    const double scale = n / std::max(pi, n);
    const double theta = with_cutoff ? cutoff_theta(y, r) : 1.0;
    return theta * (base.f(t, x, y, qz) - f0) * scale + f0;
  }
};

DriverSpec build_step_one(const DriverSpec& driver, double n, double r, bool with_cutoff,
                          const StepOneOptions& options) {
  if (!(n >= 1.0)) throw InvalidArgument("approximation index must be >= 1");
  if (!(r > 0.0)) throw InvalidArgument("radius must be positive");
  auto state = std::make_shared<StepOneDriver>(StepOneDriver{
      driver, n, r, with_cutoff, symmetric_grid(r + 1.0, options.pi_grid_points),
      options.time_nodes, {}});
  if (!driver.state_dependent() && options.time_nodes) {
    state->pi_table.resize(options.time_nodes->steps() + 1);
    for (std::size_t i = 0; i < state->pi_table.size(); ++i) {
      state->pi_table[i] = pi_r(driver, options.time_nodes->node(i), {}, state->pi_grid);
    }
  }

  DriverParams params = driver.params();
  params.name = driver.name() + (with_cutoff ? "/h_n" : "/f_n");
  params.f = [state](double t, StateView x, double y, StateView z) {
    return state->evaluate(t, x, y, z, state->pi_at(t, x));
  };
  params.lambda = driver.lambda();

  if (with_cutoff) {
    // Sampled one-sided and absolute y-slopes; h_n is constant for |y| >= r + 1.
    SplitMixStream rng(substream_seed(options.check_seed, 0x68));
    const auto ys = symmetric_grid(r + 2.0, 2001);
    std::vector<double> x(options.box.state_dim), zero(driver.dim(), 0.0);
    double slope_abs = 0.0, slope_signed = -std::numeric_limits<double>::infinity();
    const std::size_t samples = std::max<std::size_t>(1, options.check_samples / 8);
    for (std::size_t s = 0; s < samples; ++s) {
      const double t = rng.uniform(0.0, options.box.horizon);
      for (auto& v : x) v = rng.uniform(-options.box.state_radius, options.box.state_radius);
      const double pi = state->pi_at(t, x);
      double prev = state->evaluate(t, x, ys[0], zero, pi);
      for (std::size_t k = 1; k < ys.size(); ++k) {
        const double cur = state->evaluate(t, x, ys[k], zero, pi);
        const double slope = (cur - prev) / (ys[k] - ys[k - 1]);
        slope_abs = std::max(slope_abs, std::abs(slope));
        slope_signed = std::max(slope_signed, slope);
        prev = cur;
      }
    }
    const double margin = 1.1;
    params.mu = slope_signed > 0.0 ? margin * slope_signed + 1e-9 : 0.0;
    params.growth = margin * std::max(driver.lambda(), slope_abs) + 1e-9;
  } else {
    params.mu = std::max(driver.mu(), 0.0);
  }
  DriverSpec out(std::move(params));

  if (!with_cutoff && driver.mu() <= 0.0) {
    const auto report = check_assumptions(out, options.check_samples, options.check_seed, options.box);
    if (!report.clause("iv").passed) {
      throw AssumptionViolated("step-1 driver lost the monotonicity clause with mu <= 0 (worst " +
                               std::to_string(report.clause("iv").worst_violation) + ")");
    }
  }
  return out;
}

}  // namespace

DriverSpec build_h_n(const DriverSpec& driver, double n, double r, const StepOneOptions& options) {
  return build_step_one(driver, n, r, true, options);
}

DriverSpec build_f_n_step1(const DriverSpec& driver, double n, double r,
                           const StepOneOptions& options) {
  return build_step_one(driver, n, r, false, options);
}

TruncatedData truncate_data_step2(std::span<const double> terminal, const DriverSpec& driver,
                                  std::span<const double> barrier, std::size_t nodes, double n,
                                  bool repair) {
  if (!(n >= 1.0)) throw InvalidArgument("truncation index must be >= 1");
  if (nodes == 0 || barrier.size() != terminal.size() * nodes) {
    throw InvalidArgument("barrier layout does not match the terminal samples");
  }
  TruncatedData out;
  out.terminal.resize(terminal.size());
  out.barrier.resize(barrier.size());
  for (std::size_t k = 0; k < terminal.size(); ++k) out.terminal[k] = truncate_q(terminal[k], n);
  for (std::size_t k = 0; k < barrier.size(); ++k) out.barrier[k] = truncate_q(barrier[k], n);
  for (std::size_t m = 0; m < terminal.size(); ++m) {
    const double s_T = out.barrier[m * nodes + nodes - 1];
    if (s_T > out.terminal[m]) {
      if (!repair) {
        throw ObstacleTerminalViolation("q_n(S_T) > q_n(xi) on path " + std::to_string(m));
      }
      out.terminal[m] = s_T;
      ++out.repaired_paths;
    }
  }

  DriverParams params = driver.params();
  params.name = driver.name() + "/step2";
  const DriverSpec base = driver;
  params.f = [base, n](double t, StateView x, double y, StateView z) {
    const double f0 = base.f_at_origin(t, x);
    return base.f(t, x, y, z) - f0 + truncate_q(f0, n);
  };
  params.g = [base, n](double t, StateView x, double y) {
    const double g0 = base.g_at_origin(t, x);
    return base.g(t, x, y) - g0 + truncate_q(g0, n);
  };
  out.driver = std::make_shared<const DriverSpec>(std::move(params));
  return out;
}

}  // namespace rgbsde
