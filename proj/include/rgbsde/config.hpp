#pragma once

// Run configuration: JSON problem files, the built-in benchmark catalog and
// the builders turning a configuration into solver inputs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rgbsde/backward_solver.hpp"
#include "rgbsde/forward_sde.hpp"
#include "rgbsde/models.hpp"
#include "rgbsde/pde_oracle.hpp"
#include "rgbsde/regression.hpp"
#include "json.hpp"

namespace rgbsde {

/// Scalar payoff of the first state coordinate: none (-inf), constant,
/// linear a + b x, or put (strike - e^x)^+.
struct PayoffSpec {
  std::string kind = "constant";
  double value = 0.0;
  double a = 0.0;
  double b = 0.0;
  double strike = 0.0;

  double operator()(double x) const;
};

struct RunConfig {
  std::string problem = "custom";
  std::string description;
  std::uint64_t seed = 1;

  // forward
  std::string domain = "free_space";  // half_line | interval | ball | free_space
  std::size_t dim = 1;
  double length = 1.0;                // interval
  double radius = 1.0;                // ball
  std::vector<double> centre;         // ball
  std::vector<double> x0{0.0};
  std::vector<double> drift{0.0};
  double sigma = 1.0;
  double horizon = 1.0;
  std::size_t steps = 64;
  std::size_t paths = 10000;
  ReflectionScheme scheme = ReflectionScheme::projection;
  double penalty_rate = 1.0;
  bool bridge = true;

  // driver: f = f_const + f_y y + f_y3 y^3 + f_z . z, g = g_const + g_y y
  double f_const = 0.0;
  double f_y = 0.0;
  double f_y3 = 0.0;
  std::vector<double> f_z;
  double g_const = 0.0;
  double g_y = 0.0;
  DriverParams declared;  // lambda, mu, beta, growth, p after defaults

  // obstacle
  PayoffSpec terminal;
  PayoffSpec barrier{"none"};

  // solver
  SolveMethod method = SolveMethod::reflected;
  double penalty = 50.0;
  PipelineConfig pipeline;  // pipeline.solver carries basis and Picard count

  // audit
  double audit_p = 1.5;
  double ceiling = 100.0;
  double perturbation = 0.0;  // > 0 adds the perturbed-terminal stability audit

  // converge
  std::vector<std::size_t> converge_steps;
  std::vector<std::size_t> converge_paths;
  std::vector<double> converge_penalties;

  // pde
  double pde_x_min = 0.0;
  double pde_x_max = 1.0;
  std::size_t pde_space_nodes = 401;
  std::size_t pde_time_steps = 400;
  std::vector<double> starts;
  double c_disc = 1.0;

  std::string output_dir = ".";
};

struct CatalogEntry {
  std::string name;
  std::string description;
};

std::vector<CatalogEntry> catalog();
/// JSON definition of a catalog problem; ConfigInvalid for unknown names.
nlohmann::json catalog_json(const std::string& name);

/// Validates and parses a config document. A "problem" naming a catalog
/// entry (or an explicit "base") is merged under the document's keys.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config_file(const std::string& path);
RunConfig catalog_config(const std::string& name);

DomainSpec build_domain(const RunConfig& cfg);
DriverSpec build_driver(const RunConfig& cfg);
ObstacleSpec build_obstacle(const RunConfig& cfg);
/// Forward simulation from cfg; start overrides x0 when non-empty.
ForwardBundle simulate(const RunConfig& cfg, std::span<const double> start = {});
PdeProblem build_pde(const RunConfig& cfg);
PdeGridParams pde_grid_params(const RunConfig& cfg);

}  // namespace rgbsde
