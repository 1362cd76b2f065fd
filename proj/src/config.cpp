#include "rgbsde/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rgbsde/errors.hpp"
#include "rgbsde/rng.hpp"

namespace rgbsde {

using nlohmann::json;

double PayoffSpec::operator()(double x) const {
  if (kind == "none") return no_barrier;
  if (kind == "constant") return value;
  if (kind == "linear") return a + b * x;
  if (kind == "put") return std::max(strike - std::exp(x), 0.0);
  throw ConfigInvalid("unknown payoff kind '" + kind + "'");
}

namespace {

const double kLogSpot = std::log(100.0);

json base_problem() {
  return json{
      {"seed", 1},
      {"forward",
       {{"domain", "free_space"},
        {"x0", {0.0}},
        {"drift", {0.0}},
        {"sigma", 1.0},
        {"horizon", 1.0},
        {"steps", 64},
        {"paths", 10000},
        {"scheme", "projection"}}},
      {"driver", json::object()},
      {"obstacle", {{"terminal", {{"kind", "constant"}, {"value", 0.0}}}, {"barrier", {{"kind", "none"}}}}},
      {"solver", {{"method", "reflected"}}},
  };
}

json make_entry(const std::string& name) {
  json j = base_problem();
  j["problem"] = name;
  if (name == "trivial_constant") {
    j["description"] = "zero driver, no obstacle, constant terminal value 2";
    j["obstacle"]["terminal"] = {{"kind", "constant"}, {"value", 2.0}};
    j["pde"] = {{"x_min", -5.0}, {"x_max", 5.0}, {"starts", {0.0}}};
  } else if (name == "linear_discount") {
    j["description"] = "f = -0.05 y with terminal value 1, Y_0 = exp(-0.05)";
    j["driver"] = {{"f_y", -0.05}};
    j["obstacle"]["terminal"] = {{"kind", "constant"}, {"value", 1.0}};
    j["forward"]["paths"] = 50000;
    j["pde"] = {{"x_min", -6.0}, {"x_max", 6.0}, {"starts", {0.0}}};
  } else if (name == "american_put_analog") {
    j["description"] = "American put in log-price: r = 0.05, vol 0.2, strike 100, spot 100, T = 1";
    j["forward"]["x0"] = {kLogSpot};
    j["forward"]["drift"] = {0.05 - 0.5 * 0.2 * 0.2};
    j["forward"]["sigma"] = 0.2;
    j["forward"]["steps"] = 128;
    j["forward"]["paths"] = 100000;
    j["driver"] = {{"f_y", -0.05}};
    j["obstacle"]["terminal"] = {{"kind", "put"}, {"strike", 100.0}};
    j["obstacle"]["barrier"] = {{"kind", "put"}, {"strike", 100.0}};
    j["solver"] = {{"method", "reflected"}, {"basis", "piecewise_linear"}, {"degree", 32}, {"control_variate", true}};
    j["pde"] = {{"x_min", kLogSpot - 2.0}, {"x_max", kLogSpot + 2.0}, {"starts", {kLogSpot}}};
  } else if (name == "cubic_driver") {
    j["description"] = "f = -y^3 (monotone, not Lipschitz), terminal X_T of a Brownian motion";
    j["driver"] = {{"f_y3", -1.0}};
    j["obstacle"]["terminal"] = {{"kind", "linear"}, {"a", 0.0}, {"b", 1.0}};
    j["solver"] = {{"method", "pipeline"}, {"ladder", {1, 2, 4, 8}}};
    j["pde"] = {{"x_min", -6.0}, {"x_max", 6.0}, {"starts", {0.0}}};
  } else if (name == "reflected_bm_neumann") {
    j["description"] = "Brownian motion reflected in [0, 2], constant boundary flux g = -0.5";
    j["forward"]["domain"] = "interval";
    j["forward"]["length"] = 2.0;
    j["forward"]["x0"] = {1.0};
    j["forward"]["paths"] = 20000;
    j["driver"] = {{"g_const", -0.5}};
    j["pde"] = {{"x_min", 0.0}, {"x_max", 2.0}, {"starts", {0.5, 1.0, 1.5}}};
  } else if (name == "binding_obstacle") {
    j["description"] = "half-line reflection, f = -0.1 y, g = -0.5 y, barrier = terminal = 1 - x";
    j["forward"]["domain"] = "half_line";
    j["forward"]["x0"] = {0.5};
    j["driver"] = {{"f_y", -0.1}, {"g_y", -0.5}};
    j["obstacle"]["terminal"] = {{"kind", "linear"}, {"a", 1.0}, {"b", -1.0}};
    j["obstacle"]["barrier"] = {{"kind", "linear"}, {"a", 1.0}, {"b", -1.0}};
    j["pde"] = {{"x_min", 0.0}, {"x_max", 6.0}, {"starts", {0.5}}};
  } else {
    throw ConfigInvalid("problem: unknown catalog entry '" + name + "'");
  }
  return j;
}

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names{"trivial_constant",   "linear_discount",
                                              "american_put_analog", "cubic_driver",
                                              "reflected_bm_neumann", "binding_obstacle"};
  return names;
}

bool in_catalog(const std::string& name) {
  for (const auto& n : catalog_names()) {
    if (n == name) return true;
  }
  return false;
}

/// Typed, path-tracking reader that rejects unknown keys on finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigInvalid(label() + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigInvalid(field(key) + ": wrong type");
    }
  }

  void get_count(const char* key, std::size_t& out, std::size_t min_value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
      throw ConfigInvalid(field(key) + ": expected an integer >= " + std::to_string(min_value));
    }
    out = v.get<std::size_t>();
  }

  Section sub(const char* key) {
    seen_.insert(key);
    return Section(j_.contains(key) ? j_.at(key) : empty(), field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigInvalid(field(it.key().c_str()) + ": unknown key");
    }
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

PayoffSpec read_payoff(Section s, const std::string& default_kind) {
  PayoffSpec p;
  p.kind = default_kind;
  s.get("kind", p.kind);
  s.get("value", p.value);
  s.get("a", p.a);
  s.get("b", p.b);
  s.get("strike", p.strike);
  s.finish();
  if (p.kind != "none" && p.kind != "constant" && p.kind != "linear" && p.kind != "put") {
    throw ConfigInvalid(s.field("kind") + ": unknown payoff kind '" + p.kind + "'");
  }
  return p;
}

template <class F>
auto guarded(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ConfigInvalid&) {
    throw;
  } catch (const Error& e) {
    throw ConfigInvalid(field + ": " + e.what());
  }
}

}  // namespace

std::vector<CatalogEntry> catalog() {
  std::vector<CatalogEntry> out;
  for (const auto& name : catalog_names()) {
    out.push_back({name, make_entry(name).at("description").get<std::string>()});
  }
  return out;
}

nlohmann::json catalog_json(const std::string& name) { return make_entry(name); }

RunConfig parse_config(const nlohmann::json& input) {
  if (!input.is_object()) throw ConfigInvalid("config: expected an object");
  json doc = input;
  std::string base;
  if (doc.contains("base")) {
    if (!doc["base"].is_string()) throw ConfigInvalid("base: wrong type");
    base = doc["base"].get<std::string>();
    doc.erase("base");
  } else if (doc.contains("problem") && doc["problem"].is_string() &&
             in_catalog(doc["problem"].get<std::string>())) {
    base = doc["problem"].get<std::string>();
  } else if (doc.contains("problem") && doc["problem"].is_string() &&
             !(doc.contains("forward") && doc.contains("obstacle"))) {
    throw ConfigInvalid("problem: unknown catalog entry '" + doc["problem"].get<std::string>() +
                        "' and no inline definition");
  }
  if (!base.empty()) {
    json merged = make_entry(base);
    merged.merge_patch(doc);
    doc = std::move(merged);
  } else {
    json merged = base_problem();
    merged.merge_patch(doc);
    doc = std::move(merged);
  }

  RunConfig cfg;
  Section root(doc, "");
  root.get("problem", cfg.problem);
  root.get("description", cfg.description);
  root.get("seed", cfg.seed);
  root.get("output", cfg.output_dir);

  {
    auto s = root.sub("forward");
    s.get("domain", cfg.domain);
    s.get_count("dim", cfg.dim, 1);
    s.get("length", cfg.length);
    s.get("radius", cfg.radius);
    s.get("centre", cfg.centre);
    s.get("x0", cfg.x0);
    s.get("drift", cfg.drift);
    s.get("sigma", cfg.sigma);
    s.get("horizon", cfg.horizon);
    s.get_count("steps", cfg.steps, 1);
    s.get_count("paths", cfg.paths, 1);
    std::string scheme = to_string(cfg.scheme);
    s.get("scheme", scheme);
    cfg.scheme = guarded(s.field("scheme"), [&] { return reflection_scheme_from_string(scheme); });
    s.get("penalty_rate", cfg.penalty_rate);
    s.get("bridge", cfg.bridge);
    s.finish();
    if (cfg.domain != "half_line" && cfg.domain != "interval" && cfg.domain != "ball" &&
        cfg.domain != "free_space") {
      throw ConfigInvalid(s.field("domain") + ": unknown domain '" + cfg.domain + "'");
    }
    if (cfg.domain == "half_line" || cfg.domain == "interval") cfg.dim = 1;
    if (cfg.domain == "ball" && !s.has("dim")) cfg.dim = std::max<std::size_t>(1, cfg.centre.size());
    if (!s.has("dim") && cfg.domain == "free_space") cfg.dim = cfg.x0.size();
    if (cfg.x0.size() != cfg.dim) throw ConfigInvalid(s.field("x0") + ": length must equal dim");
    if (cfg.drift.size() == 1 && cfg.dim > 1) cfg.drift.assign(cfg.dim, cfg.drift[0]);
    if (cfg.drift.size() != cfg.dim) throw ConfigInvalid(s.field("drift") + ": length must equal dim");
    if (cfg.domain == "ball" && cfg.centre.empty()) cfg.centre.assign(cfg.dim, 0.0);
    if (cfg.domain == "ball" && cfg.centre.size() != cfg.dim) {
      throw ConfigInvalid(s.field("centre") + ": length must equal dim");
    }
    if (!(cfg.sigma >= 0.0)) throw ConfigInvalid(s.field("sigma") + ": must be >= 0");
    if (!(cfg.horizon > 0.0)) throw ConfigInvalid(s.field("horizon") + ": must be > 0");
    if (!(cfg.length > 0.0)) throw ConfigInvalid(s.field("length") + ": must be > 0");
    if (!(cfg.radius > 0.0)) throw ConfigInvalid(s.field("radius") + ": must be > 0");
  }

  {
    auto s = root.sub("driver");
    s.get("f_const", cfg.f_const);
    s.get("f_y", cfg.f_y);
    s.get("f_y3", cfg.f_y3);
    s.get("f_z", cfg.f_z);
    s.get("g_const", cfg.g_const);
    s.get("g_y", cfg.g_y);
    if (cfg.f_z.empty()) cfg.f_z.assign(cfg.dim, 0.0);
    if (cfg.f_z.size() != cfg.dim) throw ConfigInvalid(s.field("f_z") + ": length must equal dim");
    double zl = 0.0;
    for (double c : cfg.f_z) zl += c * c;
    auto& d = cfg.declared;
    d.lambda = std::sqrt(zl);
    d.mu = cfg.f_y;
    d.beta = cfg.g_y < 0.0 ? cfg.g_y : -1.0;
    d.growth = std::max({std::abs(cfg.f_y), d.lambda, std::abs(cfg.g_y)});
    s.get("lambda", d.lambda);
    s.get("mu", d.mu);
    s.get("beta", d.beta);
    s.get("growth", d.growth);
    s.get("p", d.p);
    s.finish();
    if (!(d.beta < 0.0)) throw ConfigInvalid(s.field("beta") + ": must be < 0");
    if (!(d.p > 1.0 && d.p < 2.0)) throw ConfigInvalid(s.field("p") + ": must lie in (1, 2)");
    if (!(d.lambda >= 0.0)) throw ConfigInvalid(s.field("lambda") + ": must be >= 0");
    if (!(d.growth >= 0.0)) throw ConfigInvalid(s.field("growth") + ": must be >= 0");
    cfg.audit_p = d.p;
  }

  {
    auto s = root.sub("obstacle");
    cfg.terminal = read_payoff(s.sub("terminal"), "constant");
    cfg.barrier = read_payoff(s.sub("barrier"), "none");
    s.finish();
    if (cfg.terminal.kind == "none") throw ConfigInvalid("obstacle.terminal.kind: terminal cannot be none");
  }

  {
    auto s = root.sub("solver");
    std::string method = to_string(cfg.method);
    s.get("method", method);
    cfg.method = guarded(s.field("method"), [&] { return solve_method_from_string(method); });
    s.get("penalty", cfg.penalty);
    auto& pc = cfg.pipeline;
    std::string basis = to_string(pc.solver.basis.family);
    s.get("basis", basis);
    pc.solver.basis.family = guarded(s.field("basis"), [&] { return basis_family_from_string(basis); });
    s.get_count("degree", pc.solver.basis.degree, 0);
    std::string target = to_string(pc.solver.target);
    s.get("target", target);
    pc.solver.target = guarded(s.field("target"), [&] { return regression_target_from_string(target); });
    s.get_count("picard_iterations", pc.solver.picard_iterations, 1);
    s.get("check_driver", pc.solver.check_driver);
    s.get("control_variate", pc.solver.control_variate);
    s.get("ladder", pc.ladder);
    s.get("tol_cauchy", pc.tol_cauchy);
    std::string r_policy = to_string(pc.r_policy);
    s.get("r_policy", r_policy);
    pc.r_policy = guarded(s.field("r_policy"), [&] { return radius_policy_from_string(r_policy); });
    std::string inner = to_string(pc.inner_policy);
    s.get("inner_policy", inner);
    pc.inner_policy = guarded(s.field("inner_policy"), [&] { return inner_policy_from_string(inner); });
    s.get("r_min", pc.r_min);
    s.get("r_margin", pc.r_margin);
    s.get("g_cap", pc.g_cap);
    s.get("require_nonpositive_mu", pc.require_nonpositive_mu);
    s.get("strict", pc.strict);
    s.finish();
    if (!(cfg.penalty >= 0.0)) throw ConfigInvalid(s.field("penalty") + ": must be >= 0");
    if (pc.ladder.empty()) throw ConfigInvalid(s.field("ladder") + ": must be nonempty");
    for (double n : pc.ladder) {
      if (!(n >= 1.0)) throw ConfigInvalid(s.field("ladder") + ": entries must be >= 1");
    }
    if (!(pc.tol_cauchy > 0.0)) throw ConfigInvalid(s.field("tol_cauchy") + ": must be > 0");
  }

  {
    auto s = root.sub("audit");
    s.get("p", cfg.audit_p);
    s.get("ceiling", cfg.ceiling);
    s.get("perturbation", cfg.perturbation);
    s.finish();
    if (!(cfg.audit_p > 1.0 && cfg.audit_p < 2.0)) throw ConfigInvalid(s.field("p") + ": must lie in (1, 2)");
    if (!(cfg.ceiling > 0.0)) throw ConfigInvalid(s.field("ceiling") + ": must be > 0");
    if (!(cfg.perturbation >= 0.0)) throw ConfigInvalid(s.field("perturbation") + ": must be >= 0");
  }

  {
    auto s = root.sub("converge");
    s.get("steps", cfg.converge_steps);
    s.get("paths", cfg.converge_paths);
    s.get("penalties", cfg.converge_penalties);
    s.finish();
    for (auto v : cfg.converge_steps) {
      if (v == 0) throw ConfigInvalid(s.field("steps") + ": entries must be >= 1");
    }
    for (auto v : cfg.converge_paths) {
      if (v == 0) throw ConfigInvalid(s.field("paths") + ": entries must be >= 1");
    }
  }

  {
    auto s = root.sub("pde");
    cfg.pde_x_min = cfg.domain == "interval" ? 0.0 : cfg.x0[0] - 5.0;
    cfg.pde_x_max = cfg.domain == "interval" ? cfg.length : cfg.x0[0] + 5.0;
    if (cfg.domain == "half_line") cfg.pde_x_min = 0.0;
    s.get("x_min", cfg.pde_x_min);
    s.get("x_max", cfg.pde_x_max);
    s.get_count("space_nodes", cfg.pde_space_nodes, 3);
    s.get_count("time_steps", cfg.pde_time_steps, 1);
    s.get("starts", cfg.starts);
    s.get("c_disc", cfg.c_disc);
    s.finish();
    if (cfg.starts.empty()) cfg.starts.push_back(cfg.x0[0]);
    if (!(cfg.pde_x_max > cfg.pde_x_min)) throw ConfigInvalid(s.field("x_max") + ": must exceed x_min");
  }
  root.finish();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigInvalid("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

RunConfig catalog_config(const std::string& name) { return parse_config(json{{"problem", name}}); }

DomainSpec build_domain(const RunConfig& cfg) {
  if (cfg.domain == "half_line") return half_line_domain();
  if (cfg.domain == "interval") return interval_domain(cfg.length);
  if (cfg.domain == "ball") return ball_domain(cfg.centre, cfg.radius);
  return free_space_domain(cfg.dim);
}

DriverSpec build_driver(const RunConfig& cfg) {
  DriverParams params = cfg.declared;
  const double c = cfg.f_const, a = cfg.f_y, a3 = cfg.f_y3;
  const std::vector<double> fz = cfg.f_z;
  params.f = [c, a, a3, fz](double, StateView, double y, StateView z) {
    double v = c + a * y + a3 * y * y * y;
    for (std::size_t k = 0; k < fz.size(); ++k) v += fz[k] * z[k];
    return v;
  };
  const double gc = cfg.g_const, gy = cfg.g_y;
  params.g = [gc, gy](double, StateView, double y) { return gc + gy * y; };
  params.dim = cfg.dim;
  params.state_dependent = false;
  params.name = cfg.problem;
  return DriverSpec(std::move(params));
}

ObstacleSpec build_obstacle(const RunConfig& cfg) {
  const PayoffSpec terminal = cfg.terminal;
  TerminalFn l = [terminal](StateView x) { return terminal(x[0]); };
  if (cfg.barrier.kind == "none") return ObstacleSpec::unconstrained(std::move(l));
  const PayoffSpec barrier = cfg.barrier;
  return ObstacleSpec::markovian([barrier](double, StateView x) { return barrier(x[0]); },
                                 std::move(l));
}

ForwardBundle simulate(const RunConfig& cfg, std::span<const double> start) {
  const auto domain = build_domain(cfg);
  ForwardOptions options;
  options.scheme = cfg.scheme;
  options.penalty_rate = cfg.penalty_rate;
  options.bridge = cfg.bridge;
  const std::span<const double> x0 = start.empty() ? std::span<const double>(cfg.x0) : start;
  return simulate_reflected(domain, constant_drift(cfg.drift), scalar_diffusion(cfg.sigma, cfg.dim),
                            x0, TimeGrid(cfg.horizon, cfg.steps), cfg.paths,
                            named_seed(cfg.seed, "forward"), options);
}

PdeProblem build_pde(const RunConfig& cfg) {
  if (cfg.dim != 1) throw MismatchedProblem("the PDE oracle is one-dimensional");
  PdeProblem pde;
  pde.x_min = cfg.pde_x_min;
  pde.x_max = cfg.pde_x_max;
  pde.horizon = cfg.horizon;
  const double b = cfg.drift[0], s = cfg.sigma;
  pde.drift = [b](double) { return b; };
  pde.volatility = [s](double) { return s; };
  const double c = cfg.f_const, a = cfg.f_y, a3 = cfg.f_y3, fz = cfg.f_z[0];
  pde.f = [c, a, a3, fz](double, double, double u, double z) { return c + a * u + a3 * u * u * u + fz * z; };
  const double gc = cfg.g_const, gy = cfg.g_y;
  // Only reflecting ends carry the flux g; truncation ends get zero flux.
  const bool left_reflects = cfg.domain == "half_line" || cfg.domain == "interval";
  const bool right_reflects = cfg.domain == "interval";
  const double x_min = cfg.pde_x_min, x_max = cfg.pde_x_max;
  pde.g = [=](double, double x, double u) {
    const bool left = std::abs(x - x_min) <= std::abs(x - x_max);
    if ((left && left_reflects) || (!left && right_reflects)) return gc + gy * u;
    return 0.0;
  };
  const PayoffSpec barrier = cfg.barrier, terminal = cfg.terminal;
  pde.barrier = [barrier](double, double x) { return barrier(x); };
  pde.terminal = [terminal](double x) { return terminal(x); };
  return pde;
}

PdeGridParams pde_grid_params(const RunConfig& cfg) {
  PdeGridParams p;
  p.space_nodes = cfg.pde_space_nodes;
  p.time_steps = cfg.pde_time_steps;
  return p;
}

}  // namespace rgbsde
