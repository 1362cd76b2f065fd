#include "rgbsde/backward_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <istream>
#include <limits>
#include <ostream>
#include <utility>

#include "rgbsde/binary_io.hpp"
#include "rgbsde/errors.hpp"
#include "rgbsde/parallel.hpp"

namespace rgbsde {

namespace {
constexpr char kSolutionMagic[9] = "RGBSDESL";
constexpr std::size_t kPathGrain = 512;
}  // namespace

std::string to_string(SolveMethod method) {
  switch (method) {
    case SolveMethod::reflected: return "reflected";
    case SolveMethod::penalized: return "penalized";
    case SolveMethod::pipeline: return "pipeline";
  }
  return "unknown";
}

SolveMethod solve_method_from_string(const std::string& name) {
  if (name == "reflected") return SolveMethod::reflected;
  if (name == "penalized") return SolveMethod::penalized;
  if (name == "pipeline") return SolveMethod::pipeline;
  throw InvalidArgument("unknown solve method '" + name + "'");
}

std::string to_string(RegressionTarget target) {
  return target == RegressionTarget::value ? "value" : "cashflow";
}

RegressionTarget regression_target_from_string(const std::string& name) {
  if (name == "value") return RegressionTarget::value;
  if (name == "cashflow") return RegressionTarget::cashflow;
  throw InvalidArgument("unknown regression target '" + name + "'");
}

std::string to_string(RadiusPolicy policy) {
  return policy == RadiusPolicy::data_bound ? "data_bound" : "doubling";
}

RadiusPolicy radius_policy_from_string(const std::string& name) {
  if (name == "data_bound") return RadiusPolicy::data_bound;
  if (name == "doubling") return RadiusPolicy::doubling;
  throw InvalidArgument("unknown radius policy '" + name + "'");
}

std::string to_string(InnerIndexPolicy policy) {
  return policy == InnerIndexPolicy::saturate ? "saturate" : "coupled";
}

InnerIndexPolicy inner_policy_from_string(const std::string& name) {
  if (name == "saturate") return InnerIndexPolicy::saturate;
  if (name == "coupled") return InnerIndexPolicy::coupled;
  throw InvalidArgument("unknown inner index policy '" + name + "'");
}

// ---------------------------------------------------------------------------

SolutionBundle::SolutionBundle(TimeGrid grid, std::size_t paths, std::size_t dim,
                               std::uint64_t seed, SolveMethod method, double method_param)
    : grid_(grid),
      paths_(paths),
      dim_(dim),
      seed_(seed),
      method_(method),
      method_param_(method_param),
      y_(paths * (grid.steps() + 1), 0.0),
      z_(paths * grid.steps() * dim, 0.0),
      k_(paths * grid.steps(), 0.0) {}

double SolutionBundle::K_total(std::size_t path) const {
  double k = 0.0;
  for (std::size_t i = 0; i < steps(); ++i) k += dK(path, i);
  return k;
}

double SolutionBundle::node_mean(std::size_t i) const {
  double s = 0.0;
  for (std::size_t m = 0; m < paths_; ++m) s += Y(m, i);
  return s / static_cast<double>(paths_);
}

double SolutionBundle::node_standard_error(std::size_t i) const {
  if (paths_ < 2) return 0.0;
  const double mean = node_mean(i);
  double s = 0.0;
  for (std::size_t m = 0; m < paths_; ++m) s += (Y(m, i) - mean) * (Y(m, i) - mean);
  return std::sqrt(s / static_cast<double>(paths_ - 1) / static_cast<double>(paths_));
}

double SolutionBundle::y0_mean() const { return node_mean(0); }

double SolutionBundle::mean_K_T() const {
  double s = 0.0;
  for (std::size_t m = 0; m < paths_; ++m) s += K_total(m);
  return s / static_cast<double>(paths_);
}

void SolutionBundle::write(std::ostream& out) const {
  io::write_magic(out, kSolutionMagic);
  io::write_f64(out, grid_.horizon());
  io::write_u64(out, grid_.steps());
  io::write_u64(out, paths_);
  io::write_u64(out, dim_);
  io::write_u64(out, seed_);
  io::write_u64(out, static_cast<std::uint64_t>(method_));
  io::write_f64(out, method_param_);
  io::write_f64(out, y0_se_);
  io::write_f64s(out, y_);
  io::write_f64s(out, z_);
  io::write_f64s(out, k_);
}

SolutionBundle SolutionBundle::read(std::istream& in) {
  io::expect_magic(in, kSolutionMagic);
  const double horizon = io::read_f64(in);
  const auto steps = io::read_u64(in);
  const auto paths = io::read_u64(in);
  const auto dim = io::read_u64(in);
  const auto seed = io::read_u64(in);
  const auto method = io::read_u64(in);
  if (method > 2) throw FormatError("unknown method tag");
  const double param = io::read_f64(in);
  SolutionBundle s(TimeGrid(horizon, steps), paths, dim, seed, static_cast<SolveMethod>(method),
                   param);
  s.y0_se_ = io::read_f64(in);
  s.y_ = io::read_f64s(in, s.y_.size());
  s.z_ = io::read_f64s(in, s.z_.size());
  s.k_ = io::read_f64s(in, s.k_.size());
  return s;
}

// ---------------------------------------------------------------------------

namespace {

enum class Constraint { reflect, penalize };

SolutionBundle backward_recursion(const ForwardBundle& forward, const DriverSpec& driver,
                                  const ObstacleData& obstacle, const SolverConfig& config,
                                  Constraint constraint, double penalty, SolveMethod tag) {
  const std::size_t paths = forward.paths();
  const std::size_t n_steps = forward.steps();
  const std::size_t d = forward.dim();
  if (obstacle.paths != paths || obstacle.nodes != n_steps + 1) {
    throw MismatchedGrids("obstacle data does not match the forward bundle");
  }
  if (driver.dim() != d) {
    throw InvalidArgument("driver z-dimension " + std::to_string(driver.dim()) +
                          " differs from the Brownian dimension " + std::to_string(d));
  }
  if (config.picard_iterations == 0) throw InvalidArgument("picard_iterations must be >= 1");
  if (!(penalty >= 0.0)) throw InvalidArgument("penalty index must be nonnegative");

  if (config.check_driver) {
    SamplingBox box;
    box.horizon = forward.grid().horizon();
    box.state_dim = d;
    const auto report = check_assumptions(driver, config.check_samples, forward.seed(), box);
    for (const auto& c : report.clauses) {
      if (!c.passed) {
        std::cerr << "warning: driver '" << driver.name() << "' fails clause (" << c.clause
                  << "), worst violation " << c.worst_violation << "\n";
      }
    }
  }

  const double dt = forward.grid().dt();
  SolutionBundle sol(forward.grid(), paths, d, forward.seed(), tag, penalty);
  // realized: regression target in cashflow mode; eta: realized Y_0 with the
  // Z dW control variate, for the standard error.
  std::vector<double> realized(paths), eta(paths), martingale(paths, 0.0);
  for (std::size_t m = 0; m < paths; ++m) {
    sol.Y(m, n_steps) = obstacle.xi(m);
    realized[m] = eta[m] = obstacle.xi(m);
  }
  const bool cashflow = config.target == RegressionTarget::cashflow;

  std::vector<double> states(paths * d), y_next(paths), response(paths);
  std::vector<std::vector<double>> z_fit(d);
  for (std::size_t i = n_steps; i-- > 0;) {
    const double t = forward.grid().node(i);
    for (std::size_t m = 0; m < paths; ++m) {
      const auto x = forward.X(m, i);
      std::copy(x.begin(), x.end(), states.begin() + m * d);
      y_next[m] = cashflow ? realized[m] : sol.Y(m, i + 1);
    }
    const StepRegression regression(config.basis, states, paths, d);
    auto continuation = regression.fit(y_next);
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t m = 0; m < paths; ++m) {
        response[m] = (y_next[m] - continuation[m]) * forward.dW(m, i)[k] / dt;
      }
      z_fit[k] = regression.fit(response);
    }
    for (std::size_t m = 0; m < paths; ++m) {
      for (std::size_t k = 0; k < d; ++k) martingale[m] += z_fit[k][m] * forward.dW(m, i)[k];
    }
    if (i == 0 && config.control_variate && regression.features() == 0) {
      // Deterministic start: E[sum Z dW] = 0, so subtracting its sample mean
      // removes most of the terminal sampling noise from Y_0.
      const double shift = stable_mean(martingale);
      for (auto& c : continuation) c -= shift;
    }

    std::atomic<bool> diverged{false};
    parallel_for(paths, kPathGrain, [&](std::size_t begin, std::size_t end) {
      std::vector<double> z(d);
      for (std::size_t m = begin; m < end; ++m) {
        for (std::size_t k = 0; k < d; ++k) {
          z[k] = z_fit[k][m];
          sol.Z(m, i, k) = z[k];
        }
        const auto x = forward.X(m, i);
        const double s = obstacle.S(m, i);
        const double dg = forward.dG(m, i);
        const double c = continuation[m];
        double y = c;
        double previous_delta = std::numeric_limits<double>::infinity();
        for (std::size_t it = 0; it < config.picard_iterations; ++it) {
          double v = c + driver.f(t, x, y, z) * dt;
          if (dg != 0.0) v += driver.g(t, x, y) * dg;
          if (constraint == Constraint::penalize && penalty > 0.0 && v < s) {
            // Exact solve of v' = v + penalty (s - v')^+ dt.
            v = (v + penalty * dt * s) / (1.0 + penalty * dt);
          }
          const double delta = std::abs(v - y);
          if (!std::isfinite(v) ||
              (it >= 1 && delta > previous_delta * (1.0 + 1e-9) + 1e-12 * (1.0 + std::abs(v)))) {
            diverged.store(true, std::memory_order_relaxed);
          }
          previous_delta = delta;
          y = v;
        }
        bool binds = false;
        if (constraint == Constraint::reflect) {
          const double reflected = std::max(y, s);
          sol.Y(m, i) = reflected;
          sol.dK(m, i) = reflected - y;
          binds = reflected > y;
        } else {
          sol.Y(m, i) = y;
          sol.dK(m, i) = penalty > 0.0 && s > y ? penalty * (s - y) * dt : 0.0;
        }
        realized[m] = binds ? sol.Y(m, i) : realized[m] + (y - c);
        double zdw = 0.0;
        for (std::size_t k = 0; k < d; ++k) zdw += z[k] * forward.dW(m, i)[k];
        eta[m] += sol.Y(m, i) - c - zdw;
      }
    });
    if (diverged.load()) {
      const double diag = (std::abs(driver.mu()) + driver.lambda() * driver.lambda()) * dt;
      throw PicardDiverged("implicit y-iteration failed to contract at step " + std::to_string(i) +
                           " (|mu| dt + lambda^2 dt = " + std::to_string(diag) + ")");
    }
  }
  if (paths > 1) {
    const double mean = stable_mean(eta);
    double s = 0.0;
    for (double v : eta) s += (v - mean) * (v - mean);
    sol.set_y0_standard_error(std::sqrt(s / static_cast<double>(paths - 1) / static_cast<double>(paths)));
  }
  return sol;
}

}  // namespace

SolutionBundle solve_reflected(const ForwardBundle& forward, const DriverSpec& driver,
                               const ObstacleData& obstacle, const SolverConfig& config) {
  return backward_recursion(forward, driver, obstacle, config, Constraint::reflect, 0.0,
                            SolveMethod::reflected);
}

SolutionBundle solve_penalized(const ForwardBundle& forward, const DriverSpec& driver,
                               const ObstacleData& obstacle, double n,
                               const SolverConfig& config) {
  return backward_recursion(forward, driver, obstacle, config, Constraint::penalize, n,
                            SolveMethod::penalized);
}

// ---------------------------------------------------------------------------

std::vector<double> ConvergenceTrace::distances() const {
  std::vector<double> d;
  for (std::size_t k = 1; k < steps.size(); ++k) d.push_back(steps[k].d_y);
  return d;
}

double step_one_radius_bound(double horizon, double lambda, double xi_sup, double f0_sup,
                             double g_cap, double g0_sup, double barrier_plus_sup) {
  return std::sqrt(std::exp((1.0 + lambda * lambda) * horizon)) *
         (xi_sup + horizon * f0_sup + g_cap * g0_sup + barrier_plus_sup);
}

BundleDistance bundle_distance(const SolutionBundle& a, const SolutionBundle& b) {
  if (!(a.grid() == b.grid()) || a.paths() != b.paths() || a.dim() != b.dim()) {
    throw MismatchedGrids("solutions live on different grids");
  }
  BundleDistance out;
  const std::size_t paths = a.paths();
  for (std::size_t i = 0; i <= a.steps(); ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < paths; ++m) s += std::abs(a.Y(m, i) - b.Y(m, i));
    out.y = std::max(out.y, s / static_cast<double>(paths));
  }
  for (std::size_t i = 0; i < a.steps(); ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < paths; ++m) {
      const auto za = a.Z(m, i);
      const auto zb = b.Z(m, i);
      double d2 = 0.0;
      for (std::size_t k = 0; k < a.dim(); ++k) d2 += (za[k] - zb[k]) * (za[k] - zb[k]);
      s += std::sqrt(d2);
    }
    out.z = std::max(out.z, s / static_cast<double>(paths));
  }
  return out;
}

PipelineResult solve_pipeline(const ForwardBundle& forward, const DriverSpec& driver,
                              const ObstacleData& obstacle, const PipelineConfig& config) {
  if (config.ladder.empty()) throw InvalidArgument("pipeline ladder is empty");
  if (!std::is_sorted(config.ladder.begin(), config.ladder.end())) {
    throw InvalidArgument("pipeline ladder must be increasing");
  }
  if (config.require_nonpositive_mu && driver.mu() > 0.0) {
    throw InvalidArgument("driver declares mu > 0 but the pipeline requires mu <= 0");
  }
  const std::size_t paths = forward.paths();
  const std::size_t n_steps = forward.steps();
  const auto& grid = forward.grid();

  ConvergenceTrace trace;
  for (std::size_t m = 0; m < paths; ++m) {
    trace.g_empirical_max = std::max(trace.g_empirical_max, forward.G_total(m));
  }
  trace.g_cap = config.g_cap > 0.0 ? config.g_cap : 1.5 * trace.g_empirical_max;
  trace.g_cap_exceeded = trace.g_empirical_max > trace.g_cap;

  // Sup norms of the untruncated data; truncation at n clamps each by n.
  double xi_sup = 0.0, s_plus_sup = 0.0, f0_sup = 0.0, g0_sup = 0.0;
  for (double v : obstacle.terminal) xi_sup = std::max(xi_sup, std::abs(v));
  for (double v : obstacle.barrier) s_plus_sup = std::max(s_plus_sup, std::max(v, 0.0));
  {
    const std::size_t stride = driver.state_dependent() ? 1 : paths;
    for (std::size_t m = 0; m < paths; m += stride) {
      for (std::size_t i = 0; i <= n_steps; ++i) {
        const double t = grid.node(i);
        f0_sup = std::max(f0_sup, std::abs(driver.f_at_origin(t, forward.X(m, i))));
        g0_sup = std::max(g0_sup, std::abs(driver.g_at_origin(t, forward.X(m, i))));
      }
    }
  }

  std::optional<SolutionBundle> previous;
  std::size_t non_decreasing_run = 0;
  for (const double n : config.ladder) {
    if (!(n >= 1.0)) throw InvalidArgument("ladder indices must be >= 1");
    auto truncated = truncate_data_step2(obstacle.terminal, driver, obstacle.barrier,
                                         obstacle.nodes, n);

    double r = 0.0;
    if (config.r_policy == RadiusPolicy::data_bound) {
      const double bound = step_one_radius_bound(
          grid.horizon(), driver.lambda(), std::min(n, xi_sup), std::min(n, f0_sup), trace.g_cap,
          std::min(n, g0_sup), std::min(n, s_plus_sup));
      r = bound * (1.0 + config.r_margin) + config.r_margin;
    } else {
      r = config.r_min * std::exp2(std::floor(n / 8.0));
    }

    double inner = n;
    bool cap_hit = false;
    if (config.inner_policy == InnerIndexPolicy::saturate) {
      const auto y_grid = symmetric_grid(r + 1.0, config.pi_grid_points);
      double pi_sup = 0.0;
      const std::size_t stride =
          driver.state_dependent() ? std::max<std::size_t>(1, paths / 256) : paths;
      for (std::size_t m = 0; m < paths; m += stride) {
        for (std::size_t i = 0; i <= n_steps; ++i) {
          pi_sup = std::max(pi_sup, pi_r(driver, grid.node(i), forward.X(m, i), y_grid));
        }
      }
      while (inner < pi_sup && inner < config.inner_index_cap) inner *= 2.0;
      cap_hit = inner < pi_sup;
    }

    StepOneOptions options;
    options.pi_grid_points = config.pi_grid_points;
    options.time_nodes = grid;
    options.box.horizon = grid.horizon();
    options.box.state_dim = forward.dim();
    options.check_samples = 256;
    const DriverSpec step_one = build_f_n_step1(*truncated.driver, inner, r, options);

    ObstacleData data;
    data.paths = obstacle.paths;
    data.nodes = obstacle.nodes;
    data.barrier = std::move(truncated.barrier);
    data.terminal = std::move(truncated.terminal);
    SolutionBundle current = solve_reflected(forward, step_one, data, config.solver);

    PipelineStep step;
    step.n = n;
    step.inner_index = inner;
    step.radius = r;
    step.y0 = current.y0_mean();
    step.repaired_paths = truncated.repaired_paths;
    step.inner_cap_hit = cap_hit;
    if (previous) {
      const auto dist = bundle_distance(*previous, current);
      step.d_y = dist.y;
      step.d_z = dist.z;
    }
    trace.steps.push_back(step);
    previous = std::move(current);

    if (trace.steps.size() >= 2) {
      const std::size_t k = trace.steps.size() - 1;
      if (trace.steps[k].d_y < config.tol_cauchy) {
        trace.converged = true;
        break;
      }
      if (k >= 2 && trace.steps[k].d_y >= trace.steps[k - 1].d_y) {
        ++non_decreasing_run;
      } else {
        non_decreasing_run = 0;
      }
      if (config.strict && non_decreasing_run >= 3) {
        throw PipelineNotCauchy("d_n failed to decrease over 3 consecutive ladder steps (last " +
                                std::to_string(trace.steps[k].d_y) + ")");
      }
    }
  }

  SolutionBundle out(grid, paths, forward.dim(), forward.seed(), SolveMethod::pipeline,
                     trace.steps.back().n);
  out.y_data() = previous->y_data();
  out.z_data() = previous->z_data();
  out.k_data() = previous->k_data();
  out.set_y0_standard_error(previous->y0_standard_error());
  return {std::move(out), std::move(trace)};
}

KResidual extract_K(const SolutionBundle& solution, const ForwardBundle& forward,
                    const DriverSpec& driver) {
  if (!(solution.grid() == forward.grid()) || solution.paths() != forward.paths() ||
      solution.dim() != forward.dim()) {
    throw MismatchedGrids("solution and forward bundle differ");
  }
  const std::size_t paths = solution.paths();
  const std::size_t n_steps = solution.steps();
  const std::size_t nodes = n_steps + 1;
  const double dt = forward.grid().dt();
  KResidual out;
  out.residual.assign(paths * nodes, 0.0);
  std::vector<double> abs_diff(paths * nodes, 0.0);
  parallel_for(paths, kPathGrain, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      double k_res = 0.0, k_stored = 0.0;
      for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = forward.grid().node(i);
        const auto x = forward.X(m, i);
        const auto z = solution.Z(m, i);
        const double y = solution.Y(m, i);
        double zdw = 0.0;
        for (std::size_t k = 0; k < solution.dim(); ++k) zdw += z[k] * forward.dW(m, i)[k];
        double increment = y - solution.Y(m, i + 1) - driver.f(t, x, y, z) * dt + zdw;
        if (forward.dG(m, i) != 0.0) increment -= driver.g(t, x, y) * forward.dG(m, i);
        k_res += increment;
        k_stored += solution.dK(m, i);
        out.residual[m * nodes + i + 1] = k_res;
        abs_diff[m * nodes + i + 1] = std::abs(k_res - k_stored);
      }
    }
  });
  for (std::size_t i = 0; i < nodes; ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < paths; ++m) s += abs_diff[m * nodes + i];
    out.score = std::max(out.score, s / static_cast<double>(paths));
  }
  return out;
}

}  // namespace rgbsde
