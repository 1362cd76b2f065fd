#include "rgbsde/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rgbsde/backward_solver.hpp"
#include "rgbsde/config.hpp"
#include "rgbsde/errors.hpp"
#include "rgbsde/estimates.hpp"
#include "rgbsde/pde_oracle.hpp"

namespace rgbsde {

namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::string config_path;
  std::string problem;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> steps;
  std::optional<std::string> out_dir;
  std::optional<std::string> method;
  std::optional<double> penalty;
  std::optional<double> p;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) {
    cfg = load_config_file(o.config_path);
    if (!o.problem.empty() && o.problem != cfg.problem) {
      throw ConfigInvalid("--problem '" + o.problem + "' conflicts with the config's problem '" +
                          cfg.problem + "'");
    }
  } else if (!o.problem.empty()) {
    cfg = catalog_config(o.problem);
  } else {
    throw ConfigInvalid("either --config or --problem is required");
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.paths) {
    if (*o.paths == 0) throw ConfigInvalid("--paths: must be >= 1");
    cfg.paths = *o.paths;
  }
  if (o.steps) {
    if (*o.steps == 0) throw ConfigInvalid("--steps: must be >= 1");
    cfg.steps = *o.steps;
  }
  if (o.out_dir) cfg.output_dir = *o.out_dir;
  if (o.method) {
    try {
      cfg.method = solve_method_from_string(*o.method);
    } catch (const Error& e) {
      throw ConfigInvalid(std::string("--method: ") + e.what());
    }
  }
  if (o.penalty) {
    if (!(*o.penalty >= 0.0)) throw ConfigInvalid("--penalty: must be >= 0");
    cfg.penalty = *o.penalty;
  }
  if (o.p) {
    if (!(*o.p > 1.0 && *o.p < 2.0)) throw ConfigInvalid("--p: must lie in (1, 2)");
    cfg.audit_p = *o.p;
  }
  return cfg;
}

std::string num(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(17) << v;
  return s.str();
}

/// Writes through a temporary file in the same directory, then renames.
void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body,
                  bool binary = false) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary : std::ios::out);
    if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing");
    body(out);
    out.flush();
    if (!out) throw FormatError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Solved {
  SolutionBundle solution;
  std::optional<ConvergenceTrace> trace;
};

Solved solve_with(const RunConfig& cfg, const ForwardBundle& forward, const DriverSpec& driver,
                  const ObstacleData& data) {
  const auto& solver = cfg.pipeline.solver;
  switch (cfg.method) {
    case SolveMethod::reflected: return {solve_reflected(forward, driver, data, solver), {}};
    case SolveMethod::penalized:
      return {solve_penalized(forward, driver, data, cfg.penalty, solver), {}};
    case SolveMethod::pipeline: {
      auto result = solve_pipeline(forward, driver, data, cfg.pipeline);
      return {std::move(result.solution), std::move(result.trace)};
    }
  }
  throw InvalidArgument("unknown method");
}

fs::path out_file(const RunConfig& cfg, const std::string& name) {
  return fs::path(cfg.output_dir) / name;
}

int cmd_catalog(std::ostream& out) {
  for (const auto& e : catalog()) out << std::left << std::setw(22) << e.name << e.description << '\n';
  return exit_ok;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto forward = simulate(cfg);
  const auto xt = terminal_mean(forward);
  const double runtime = seconds_since(start);
  write_atomic(out_file(cfg, "forward.bin"), [&](std::ostream& o) { forward.write(o); }, true);
  write_atomic(out_file(cfg, "simulate.csv"), [&](std::ostream& o) {
    o << "problem,N,M,scheme,XT_mean,XT_se,GT_mean,band,runtime_s\n";
    o << cfg.problem << ',' << forward.steps() << ',' << forward.paths() << ','
      << to_string(forward.scheme()) << ',' << num(xt.mean) << ',' << num(xt.standard_error)
      << ',' << num(expected_local_time(forward)) << ',' << num(forward.band()) << ','
      << num(runtime) << '\n';
  });
  out << cfg.problem << ": E[X_T] = " << xt.mean << " +- " << xt.standard_error
      << ", E[G_T] = " << expected_local_time(forward) << '\n';
  return exit_ok;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto forward = simulate(cfg);
  const auto driver = build_driver(cfg);
  const auto data = materialize(build_obstacle(cfg), forward);
  const auto solved = solve_with(cfg, forward, driver, data);
  const auto& sol = solved.solution;
  const double score = audit_skorokhod(sol, data);
  const double runtime = seconds_since(start);
  write_atomic(out_file(cfg, "solution.bin"), [&](std::ostream& o) { sol.write(o); }, true);
  write_atomic(out_file(cfg, "solve.csv"), [&](std::ostream& o) {
    o << "problem,method,n,Y0_mean,Y0_se,K_T_mean,skorokhod_score,runtime_s\n";
    o << cfg.problem << ',' << to_string(sol.method()) << ',' << num(sol.method_param()) << ','
      << num(sol.y0_mean()) << ',' << num(sol.y0_standard_error()) << ',' << num(sol.mean_K_T())
      << ',' << num(score) << ',' << num(runtime) << '\n';
  });
  out << cfg.problem << " [" << to_string(sol.method()) << "]: Y_0 = " << sol.y0_mean() << " +- "
      << sol.y0_standard_error() << ", E[K_T] = " << sol.mean_K_T()
      << ", skorokhod = " << score << '\n';
  return exit_ok;
}

int cmd_audit(const RunConfig& cfg, std::ostream& out) {
  const auto forward = simulate(cfg);
  const auto driver = build_driver(cfg);
  const auto data = materialize(build_obstacle(cfg), forward);
  const ProblemView view{forward, driver, data};
  const AuditOptions options{cfg.ceiling};
  const double p = cfg.audit_p;

  const auto first = solve_with(cfg, forward, driver, data);
  const auto second = solve_with(cfg, forward, driver, data);
  std::vector<AuditReport> reports;
  reports.push_back(audit_Z_control(first.solution, view, p, options));
  reports.push_back(audit_apriori_bound(first.solution, view, p, options));
  auto uniqueness = audit_stability(first.solution, second.solution, view, view, p, options);
  uniqueness.lemma = "stability_uniqueness";
  uniqueness.pass = uniqueness.pass && uniqueness.lhs == 0.0;
  reports.push_back(uniqueness);

  AuditReport skorokhod;
  skorokhod.lemma = "skorokhod";
  skorokhod.p = p;
  skorokhod.c_p = c_p(p);
  skorokhod.ceiling = options.ceiling;
  skorokhod.lhs = audit_skorokhod(first.solution, data);
  skorokhod.ratio = skorokhod.lhs;
  skorokhod.constant_estimate = skorokhod.lhs;
  skorokhod.pass = cfg.method == SolveMethod::penalized || skorokhod.lhs == 0.0;
  reports.push_back(skorokhod);

  if (cfg.perturbation > 0.0) {
    auto shifted = [&](double eps) {
      ObstacleData d = data;
      for (auto& v : d.terminal) v += eps;
      return d;
    };
    const auto data_full = shifted(cfg.perturbation);
    const auto data_half = shifted(0.5 * cfg.perturbation);
    const auto sol_full = solve_with(cfg, forward, driver, data_full);
    const auto sol_half = solve_with(cfg, forward, driver, data_half);
    auto full = audit_stability(first.solution, sol_full.solution, view,
                                ProblemView{forward, driver, data_full}, p, options);
    auto half = audit_stability(first.solution, sol_half.solution, view,
                                ProblemView{forward, driver, data_half}, p, options);
    full.lemma = "stability_perturbed";
    half.lemma = "stability_perturbed_half";
    const auto decay = check_stability_decay(full, half);
    AuditReport decay_row;
    decay_row.lemma = "stability_decay";
    decay_row.p = p;
    decay_row.c_p = c_p(p);
    decay_row.ceiling = options.ceiling;
    decay_row.lhs = full.lhs;
    decay_row.rhs_components = {{"half_lhs", half.lhs}, {"required_factor", decay.required}};
    decay_row.rhs = half.lhs;
    decay_row.ratio = decay.factor;
    decay_row.constant_estimate = decay.factor;
    decay_row.pass = decay.pass;
    reports.push_back(full);
    reports.push_back(half);
    reports.push_back(decay_row);
  }

  bool all_pass = true;
  for (const auto& r : reports) all_pass = all_pass && r.pass;
  write_atomic(out_file(cfg, "audit.csv"), [&](std::ostream& o) {
    o << "problem," << AuditReport::csv_header() << '\n';
    for (const auto& r : reports) o << cfg.problem << ',' << r.csv_row() << '\n';
  });
  for (const auto& r : reports) {
    out << std::left << std::setw(26) << r.lemma << " lhs=" << r.lhs << " rhs=" << r.rhs
        << " ratio=" << r.ratio << (r.pass ? "  pass" : "  FAIL") << '\n';
  }
  return all_pass ? exit_ok : exit_audit_failed;
}

int cmd_converge(const RunConfig& cfg, std::ostream& out) {
  std::ostringstream table;
  table << "problem,method,N,M,n,inner_index,radius,Y0_mean,Y0_se,d_y,d_z,runtime_s\n";
  const auto steps = cfg.converge_steps.empty() ? std::vector<std::size_t>{cfg.steps} : cfg.converge_steps;
  const auto paths = cfg.converge_paths.empty() ? std::vector<std::size_t>{cfg.paths} : cfg.converge_paths;
  const auto driver = build_driver(cfg);
  for (const auto n_steps : steps) {
    for (const auto m_paths : paths) {
      RunConfig run = cfg;
      run.steps = n_steps;
      run.paths = m_paths;
      const auto start = std::chrono::steady_clock::now();
      const auto forward = simulate(run);
      const auto data = materialize(build_obstacle(run), forward);
      if (cfg.method == SolveMethod::pipeline) {
        const auto result = solve_pipeline(forward, driver, data, run.pipeline);
        const double runtime = seconds_since(start);
        for (const auto& s : result.trace.steps) {
          table << cfg.problem << ",pipeline," << n_steps << ',' << m_paths << ',' << num(s.n) << ','
                << num(s.inner_index) << ',' << num(s.radius) << ',' << num(s.y0) << ','
                << num(result.solution.y0_standard_error()) << ',' << num(s.d_y) << ','
                << num(s.d_z) << ',' << num(runtime) << '\n';
          out << "N=" << n_steps << " M=" << m_paths << " n=" << s.n << " Y0=" << s.y0
              << " d_n=" << s.d_y << '\n';
        }
        continue;
      }
      std::vector<double> penalties{cfg.penalty};
      if (cfg.method == SolveMethod::penalized && !cfg.converge_penalties.empty()) {
        penalties = cfg.converge_penalties;
      }
      std::optional<SolutionBundle> previous;
      for (const double n : penalties) {
        RunConfig inner = run;
        inner.penalty = n;
        auto solved = solve_with(inner, forward, driver, data);
        const double runtime = seconds_since(start);
        BundleDistance dist;
        if (previous) dist = bundle_distance(*previous, solved.solution);
        const auto& sol = solved.solution;
        table << cfg.problem << ',' << to_string(sol.method()) << ',' << n_steps << ',' << m_paths
              << ',' << num(sol.method_param()) << ",0,0," << num(sol.y0_mean()) << ','
              << num(sol.y0_standard_error()) << ',' << num(dist.y) << ',' << num(dist.z) << ','
              << num(runtime) << '\n';
        out << "N=" << n_steps << " M=" << m_paths << " n=" << sol.method_param()
            << " Y0=" << sol.y0_mean() << " +- " << sol.y0_standard_error() << '\n';
        previous = std::move(solved.solution);
      }
    }
  }
  write_atomic(out_file(cfg, "converge.csv"), [&](std::ostream& o) { o << table.str(); });
  return exit_ok;
}

int cmd_pde_compare(const RunConfig& cfg, std::ostream& out) {
  const auto pde = build_pde(cfg);
  const auto grid = solve_obstacle_pde(pde, pde_grid_params(cfg));
  const auto driver = build_driver(cfg);
  std::vector<ProbabilisticEstimate> estimates;
  for (const double x0 : cfg.starts) {
    const std::vector<double> start{x0};
    const auto forward = simulate(cfg, start);
    const auto data = materialize(build_obstacle(cfg), forward);
    const auto solved = solve_with(cfg, forward, driver, data);
    estimates.push_back({x0, solved.solution.y0_mean(), solved.solution.y0_standard_error(),
                         forward.grid().dt()});
  }
  const auto cv = cross_validate(grid, estimates, cfg.c_disc);
  write_atomic(out_file(cfg, "pde_grid.csv"), [&](std::ostream& o) { grid.write_csv(o); });
  write_atomic(out_file(cfg, "pde_compare.csv"), [&](std::ostream& o) {
    o << "problem,x0,Y0_mean,Y0_se,u_pde,abs_error,rel_error,budget,within_budget\n";
    for (const auto& pt : cv.points) {
      o << cfg.problem << ',' << num(pt.x0) << ',' << num(pt.probabilistic) << ','
        << num(pt.standard_error) << ',' << num(pt.pde) << ',' << num(pt.abs_error) << ','
        << num(pt.rel_error) << ',' << num(pt.budget) << ',' << (pt.within_budget ? 1 : 0) << '\n';
    }
  });
  for (const auto& pt : cv.points) {
    out << "x0=" << pt.x0 << " Y0=" << pt.probabilistic << " u=" << pt.pde << " |err|=" << pt.abs_error
        << " budget=" << pt.budget << (pt.within_budget ? "  ok" : "  OUTSIDE") << '\n';
  }
  out << "max relative error " << cv.max_rel_error << '\n';
  return cv.all_within_budget ? exit_ok : exit_audit_failed;
}

bool is_validation_error(const Error& e) {
  return dynamic_cast<const ConfigInvalid*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
         dynamic_cast<const NonCallableDriver*>(&e) ||
         dynamic_cast<const ObstacleTerminalViolation*>(&e) ||
         dynamic_cast<const StartOutsideDomain*>(&e) || dynamic_cast<const UnsupportedScheme*>(&e) ||
         dynamic_cast<const MismatchedProblem*>(&e);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reflected generalized BSDE solver"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON problem/run configuration");
    sub->add_option("--problem", o.problem, "catalog problem name");
    sub->add_option("--seed", o.seed, "top-level seed");
    sub->add_option("--paths", o.paths, "Monte Carlo paths M");
    sub->add_option("--steps", o.steps, "time steps N");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--method", o.method, "reflected | penalized | pipeline");
    sub->add_option("--penalty", o.penalty, "penalty index n");
    sub->add_option("--p", o.p, "audit exponent in (1, 2)");
  };
  auto* sub_catalog = app.add_subcommand("catalog", "list built-in problems");
  auto* sub_simulate = app.add_subcommand("simulate", "simulate the reflected forward process");
  auto* sub_solve = app.add_subcommand("solve", "solve the backward equation");
  auto* sub_audit = app.add_subcommand("audit", "audit the a priori estimates");
  auto* sub_converge = app.add_subcommand("converge", "run an (N, M, n) ladder");
  auto* sub_pde = app.add_subcommand("pde-compare", "cross-validate against the PDE oracle");
  for (auto* s : {sub_simulate, sub_solve, sub_audit, sub_converge, sub_pde}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  }

  try {
    if (sub_catalog->parsed()) return cmd_catalog(out);
    const RunConfig cfg = resolve(o);
    if (sub_simulate->parsed()) return cmd_simulate(cfg, out);
    if (sub_solve->parsed()) return cmd_solve(cfg, out);
    if (sub_audit->parsed()) return cmd_audit(cfg, out);
    if (sub_converge->parsed()) return cmd_converge(cfg, out);
    if (sub_pde->parsed()) return cmd_pde_compare(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e) ? exit_validation : exit_solver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_solver;
  }
  return exit_validation;
}

}  // namespace rgbsde
