#include "rgbsde/models.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <utility>

#include "rgbsde/errors.hpp"
#include "rgbsde/forward_sde.hpp"
#include "rgbsde/parallel.hpp"
#include "rgbsde/rng.hpp"

namespace rgbsde {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidArgument("time horizon must be positive and finite");
  }
  if (steps == 0) throw InvalidArgument("time grid needs at least one step");
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> t(steps_ + 1);
  for (std::size_t i = 0; i <= steps_; ++i) t[i] = node(i);
  return t;
}

DriverSpec::DriverSpec(DriverParams params) : params_(std::move(params)) {
  if (!(params_.beta < 0.0)) throw InvalidArgument("beta must be negative");
  if (!(params_.p > 1.0 && params_.p < 2.0)) throw InvalidArgument("p must lie in (1, 2)");
  if (!(params_.lambda >= 0.0)) throw InvalidArgument("lambda must be nonnegative");
  if (!(params_.growth >= 0.0)) throw InvalidArgument("growth constant M must be nonnegative");
  if (!std::isfinite(params_.mu)) throw InvalidArgument("mu must be finite");
  if (params_.dim == 0) throw InvalidArgument("z dimension must be positive");
  if (!params_.f || !params_.g) throw NonCallableDriver("driver '" + params_.name + "' is empty");
}

double DriverSpec::f_at_origin(double t, StateView x) const {
  thread_local std::vector<double> zero;
  zero.assign(params_.dim, 0.0);
  return f(t, x, 0.0, zero);
}

DriverSpec DriverSpec::with_p(double p) const {
  DriverParams copy = params_;
  copy.p = p;
  return DriverSpec(std::move(copy));
}

bool AssumptionReport::all_passed() const {
  return std::all_of(clauses.begin(), clauses.end(), [](const auto& c) { return c.passed; });
}

const ClauseResult& AssumptionReport::clause(const std::string& name) const {
  for (const auto& c : clauses) {
    if (c.clause == name) return c;
  }
  throw InvalidArgument("no clause named " + name);
}

namespace {

constexpr std::size_t kClauses = 5;
const char* const kClauseNames[kClauses] = {"iii", "iv", "v", "vi", "vii"};

struct SampleOutcome {
  double raw[kClauses];      // lhs - rhs
  double allowed[kClauses];  // tolerance
};

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

SampleOutcome evaluate_sample(const DriverSpec& driver, const SamplingBox& box,
                              std::uint64_t stream_seed) {
  SplitMixStream rng(stream_seed);
  const std::size_t d = driver.dim();
  std::vector<double> x(box.state_dim), z(d), z2(d), zero(d, 0.0);
  const double t = rng.uniform(0.0, box.horizon);
  for (auto& v : x) v = rng.uniform(-box.state_radius, box.state_radius);
  const double y = rng.uniform(-box.radius, box.radius);
  const double y2 = rng.uniform(-box.radius, box.radius);
  for (auto& v : z) v = rng.uniform(-box.radius, box.radius);
  for (auto& v : z2) v = rng.uniform(-box.radius, box.radius);

  SampleOutcome out{};
  try {
    const double f_yz = driver.f(t, x, y, z);
    const double f_yz2 = driver.f(t, x, y, z2);
    const double f_y2z = driver.f(t, x, y2, z);
    const double f00 = driver.f(t, x, 0.0, zero);
    const double g_y = driver.g(t, x, y);
    const double g_y2 = driver.g(t, x, y2);
    const double g_0 = driver.g(t, x, 0.0);

    const double dz = distance(z, z2);
    const double dy = y - y2;
    const double tol = box.tol_scale;
    auto record = [&](std::size_t k, double lhs, double rhs, double scale) {
      double raw = lhs - rhs;
      if (std::isnan(raw)) raw = std::numeric_limits<double>::infinity();
      out.raw[k] = raw;
      out.allowed[k] = tol * (1.0 + scale);
    };

    const double lip_rhs = driver.lambda() * dz;
    record(0, std::abs(f_yz - f_yz2), lip_rhs,
           std::max({std::abs(f_yz), std::abs(f_yz2), lip_rhs}));
    const double mono_lhs = dy * (f_yz - f_y2z);
    record(1, mono_lhs, driver.mu() * dy * dy,
           std::max({std::abs(dy) * std::max(std::abs(f_yz), std::abs(f_y2z)),
                     std::abs(driver.mu()) * dy * dy}));
    const double growth_rhs = std::abs(f00) + driver.growth() * (std::abs(y) + norm2(z));
    record(2, std::abs(f_yz), growth_rhs, std::max(std::abs(f_yz), growth_rhs));
    const double gmono_lhs = dy * (g_y - g_y2);
    record(3, gmono_lhs, driver.beta() * dy * dy,
           std::max({std::abs(dy) * std::max(std::abs(g_y), std::abs(g_y2)),
                     std::abs(driver.beta()) * dy * dy}));
    const double ggrowth_rhs = std::abs(g_0) + driver.growth() * std::abs(y);
    record(4, std::abs(g_y), ggrowth_rhs, std::max(std::abs(g_y), ggrowth_rhs));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw NonCallableDriver("evaluation of '" + driver.name() + "' raised: " + e.what());
  }
  return out;
}

}  // namespace

AssumptionReport check_assumptions(const DriverSpec& driver, std::size_t samples,
                                   std::uint64_t seed, const SamplingBox& box) {
  if (samples == 0) throw InvalidArgument("check_assumptions needs at least one sample");
  std::vector<SampleOutcome> outcomes(samples);
  parallel_for(samples, 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      outcomes[k] = evaluate_sample(driver, box, substream_seed(seed, k));
    }
  });

  AssumptionReport report;
  for (std::size_t c = 0; c < kClauses; ++c) {
    ClauseResult result;
    result.clause = kClauseNames[c];
    result.samples = samples;
    result.worst_violation = -std::numeric_limits<double>::infinity();
    for (const auto& o : outcomes) {
      result.worst_violation = std::max(result.worst_violation, o.raw[c]);
      if (o.raw[c] > o.allowed[c]) result.passed = false;
    }
    report.clauses.push_back(result);
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<double> DomainSpec::gradient(StateView x) const {
  std::vector<double> g(dim, 0.0);
  grad_psi(x, g);
  return g;
}

DomainSpec half_line_domain() {
  DomainSpec d;
  d.kind = DomainKind::half_line;
  d.dim = 1;
  d.psi = [](StateView x) { return x[0]; };
  d.grad_psi = [](StateView, std::span<double> out) { out[0] = 1.0; };
  return d;
}

DomainSpec interval_domain(double length) {
  if (!(length > 0.0)) throw InvalidArgument("interval length must be positive");
  DomainSpec d;
  d.kind = DomainKind::interval;
  d.dim = 1;
  d.length = length;
  const double half = 0.5 * length;
  const double w = 0.25 * length;
  d.psi = [half, w](StateView x) {
    const double u = x[0] - half;
    if (std::abs(u) < w) return half - (u * u / (2.0 * w) + 0.5 * w);
    return half - std::abs(u);
  };
  d.grad_psi = [half, w](StateView x, std::span<double> out) {
    const double u = x[0] - half;
    if (std::abs(u) < w) {
      out[0] = -u / w;
    } else {
      out[0] = u < 0.0 ? 1.0 : -1.0;
    }
  };
  return d;
}

DomainSpec ball_domain(std::vector<double> centre, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("ball radius must be positive");
  if (centre.empty()) throw InvalidArgument("ball centre needs at least one coordinate");
  DomainSpec d;
  d.kind = DomainKind::ball;
  d.dim = centre.size();
  d.radius = radius;
  d.centre = centre;
  d.psi = [centre, radius](StateView x) { return radius - distance(x, centre); };
  d.grad_psi = [centre](StateView x, std::span<double> out) {
    const double r = distance(x, centre);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = r > 0.0 ? -(x[k] - centre[k]) / r : 0.0;
  };
  return d;
}

DomainSpec free_space_domain(std::size_t dim) {
  if (dim == 0) throw InvalidArgument("dimension must be positive");
  DomainSpec d;
  d.kind = DomainKind::free_space;
  d.dim = dim;
  d.psi = [](StateView) { return 1.0; };
  d.grad_psi = [](StateView, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  return d;
}

double check_unit_normal(const DomainSpec& domain, double band, std::size_t samples,
                         std::uint64_t seed, double sample_radius) {
  if (domain.kind == DomainKind::free_space) return 0.0;
  SplitMixStream rng(substream_seed(seed, 0));
  std::vector<double> x(domain.dim), g(domain.dim);
  std::size_t inside = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    for (auto& v : x) v = rng.uniform(-sample_radius, sample_radius);
    const double psi = domain.psi(x);
    if (psi > 0.0) ++inside;
    if (std::abs(psi) <= band) {
      domain.grad_psi(x, g);
      worst = std::max(worst, std::abs(norm2(g) - 1.0));
    }
  }
  if (inside == 0) throw InvalidArgument("domain interior is empty on the sampled box");
  return worst;
}

// ---------------------------------------------------------------------------

ObstacleSpec ObstacleSpec::markovian(BarrierFn h, TerminalFn l) {
  ObstacleSpec o;
  o.h = std::move(h);
  o.l = std::move(l);
  return o;
}

ObstacleSpec ObstacleSpec::unconstrained(TerminalFn l) {
  return markovian([](double, StateView) { return no_barrier; }, std::move(l));
}

ObstacleSpec ObstacleSpec::from_paths(std::vector<double> barrier, std::vector<double> terminal) {
  ObstacleSpec o;
  o.barrier_paths = std::move(barrier);
  o.terminal_samples = std::move(terminal);
  return o;
}

bool ObstacleData::unconstrained() const {
  return std::all_of(barrier.begin(), barrier.end(), [](double s) { return s == no_barrier; });
}

ObstacleData materialize(const ObstacleSpec& obstacle, const ForwardBundle& forward) {
  ObstacleData data;
  data.paths = forward.paths();
  data.nodes = forward.steps() + 1;
  const auto& grid = forward.grid();
  if (obstacle.is_markovian()) {
    data.barrier.resize(data.paths * data.nodes);
    data.terminal.resize(data.paths);
    parallel_for(data.paths, 1024, [&](std::size_t begin, std::size_t end) {
      for (std::size_t m = begin; m < end; ++m) {
        for (std::size_t i = 0; i < data.nodes; ++i) {
          data.barrier[m * data.nodes + i] =
              obstacle.h ? obstacle.h(grid.node(i), forward.X(m, i)) : no_barrier;
        }
        data.terminal[m] = obstacle.l(forward.X(m, data.nodes - 1));
      }
    });
  } else {
    if (obstacle.terminal_samples.size() != data.paths) {
      throw MismatchedGrids("terminal samples do not match the number of paths");
    }
    data.terminal = obstacle.terminal_samples;
    if (obstacle.barrier_paths.empty()) {
      data.barrier.assign(data.paths * data.nodes, no_barrier);
    } else if (obstacle.barrier_paths.size() != data.paths * data.nodes) {
      throw MismatchedGrids("barrier paths do not match the forward grid");
    } else {
      data.barrier = obstacle.barrier_paths;
    }
  }
  for (std::size_t m = 0; m < data.paths; ++m) {
    if (data.S(m, data.nodes - 1) > data.xi(m)) {
      throw ObstacleTerminalViolation("S_T > xi on path " + std::to_string(m));
    }
  }
  return data;
}

}  // namespace rgbsde
