#include "rgbsde/forward_sde.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <utility>

#include "rgbsde/binary_io.hpp"
#include "rgbsde/errors.hpp"
#include "rgbsde/parallel.hpp"
#include "rgbsde/rng.hpp"

namespace rgbsde {

namespace {
constexpr char kForwardMagic[9] = "RGBSDEFW";
}

std::string to_string(ReflectionScheme scheme) {
  switch (scheme) {
    case ReflectionScheme::projection: return "projection";
    case ReflectionScheme::skorokhod_explicit: return "skorokhod_explicit";
    case ReflectionScheme::penalization: return "penalization";
  }
  return "unknown";
}

ReflectionScheme reflection_scheme_from_string(const std::string& name) {
  if (name == "projection") return ReflectionScheme::projection;
  if (name == "skorokhod_explicit") return ReflectionScheme::skorokhod_explicit;
  if (name == "penalization") return ReflectionScheme::penalization;
  throw InvalidArgument("unknown reflection scheme '" + name + "'");
}

DriftFn constant_drift(std::vector<double> b) {
  return [b = std::move(b)](StateView, std::span<double> out) {
    std::copy(b.begin(), b.end(), out.begin());
  };
}

DiffusionFn scalar_diffusion(double s, std::size_t dim) {
  return [s, dim](StateView, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < dim; ++k) out[k * dim + k] = s;
  };
}

ForwardBundle::ForwardBundle(TimeGrid grid, std::size_t paths, std::size_t dim, std::uint64_t seed,
                             ReflectionScheme scheme, std::vector<double> states,
                             std::vector<double> g_increments,
                             std::vector<double> brownian_increments)
    : grid_(grid),
      paths_(paths),
      dim_(dim),
      seed_(seed),
      scheme_(scheme),
      states_(std::move(states)),
      g_incr_(std::move(g_increments)),
      dw_(std::move(brownian_increments)) {
  const std::size_t n = grid_.steps();
  if (paths_ == 0) throw EmptyBundle("forward bundle without paths");
  if (states_.size() != paths_ * (n + 1) * dim_ || g_incr_.size() != paths_ * n ||
      dw_.size() != paths_ * n * dim_) {
    throw InvalidArgument("forward bundle arrays do not match its shape");
  }
}

double ForwardBundle::G_total(std::size_t path) const {
  double g = 0.0;
  for (std::size_t i = 0; i < steps(); ++i) g += dG(path, i);
  return g;
}

bool ForwardBundle::compatible_with(const ForwardBundle& other) const {
  return grid_ == other.grid_ && paths_ == other.paths_ && dim_ == other.dim_ &&
         seed_ == other.seed_;
}

ForwardBundle ForwardBundle::concatenate(const ForwardBundle& a, const ForwardBundle& b) {
  if (!(a.grid_ == b.grid_) || a.dim_ != b.dim_) {
    throw MismatchedGrids("cannot concatenate bundles on different grids");
  }
  auto join = [](const std::vector<double>& u, const std::vector<double>& v) {
    std::vector<double> w(u);
    w.insert(w.end(), v.begin(), v.end());
    return w;
  };
  ForwardBundle out(a.grid_, a.paths_ + b.paths_, a.dim_, a.seed_, a.scheme_,
                    join(a.states_, b.states_), join(a.g_incr_, b.g_incr_), join(a.dw_, b.dw_));
  out.band_ = std::max(a.band_, b.band_);
  out.outside_tol_ = std::max(a.outside_tol_, b.outside_tol_);
  return out;
}

void ForwardBundle::write(std::ostream& out) const {
  io::write_magic(out, kForwardMagic);
  io::write_f64(out, grid_.horizon());
  io::write_u64(out, grid_.steps());
  io::write_u64(out, paths_);
  io::write_u64(out, dim_);
  io::write_u64(out, seed_);
  io::write_u64(out, static_cast<std::uint64_t>(scheme_));
  io::write_f64s(out, states_);
  io::write_f64s(out, g_incr_);
  io::write_f64s(out, dw_);
  io::write_f64(out, band_);
  io::write_f64(out, outside_tol_);
}

ForwardBundle ForwardBundle::read(std::istream& in) {
  io::expect_magic(in, kForwardMagic);
  const double horizon = io::read_f64(in);
  const auto steps = io::read_u64(in);
  const auto paths = io::read_u64(in);
  const auto dim = io::read_u64(in);
  const auto seed = io::read_u64(in);
  const auto scheme = io::read_u64(in);
  if (scheme > 2) throw FormatError("unknown scheme tag");
  auto states = io::read_f64s(in, paths * (steps + 1) * dim);
  auto g = io::read_f64s(in, paths * steps);
  auto dw = io::read_f64s(in, paths * steps * dim);
  ForwardBundle bundle(TimeGrid(horizon, steps), paths, dim, seed,
                       static_cast<ReflectionScheme>(scheme), std::move(states), std::move(g),
                       std::move(dw));
  bundle.band_ = io::read_f64(in);
  bundle.outside_tol_ = io::read_f64(in);
  return bundle;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

/// Largest row norm of a row-major d x d matrix.
double row_norm_max(std::span<const double> m, std::size_t d) {
  double best = 0.0;
  for (std::size_t r = 0; r < d; ++r) best = std::max(best, norm(m.subspan(r * d, d)));
  return best;
}

/// Pushes y back into the closure of Theta along grad psi; returns the
/// accumulated pushback distance.
double project(const DomainSpec& domain, std::span<double> y, std::size_t max_iterations) {
  double pushed = 0.0;
  std::vector<double> g(domain.dim);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const double psi = domain.psi(y);
    if (psi >= 0.0) return pushed;
    domain.grad_psi(y, g);
    double gg = 0.0;
    for (double c : g) gg += c * c;
    if (!(gg > 0.0)) throw ProjectionDiverged("vanishing grad psi outside the domain");
    const double step = -psi / gg;
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += step * g[k];
    pushed += step * std::sqrt(gg);
  }
  const double psi = domain.psi(y);
  if (psi < -1e-12 * (1.0 + norm(y))) {
    throw ProjectionDiverged("point still outside the domain after " +
                             std::to_string(max_iterations) + " projection steps (psi = " +
                             std::to_string(psi) + ")");
  }
  return pushed;
}

}  // namespace

ForwardBundle simulate_reflected(const DomainSpec& domain, const DriftFn& drift,
                                 const DiffusionFn& sigma, std::span<const double> x0,
                                 const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                                 const ForwardOptions& options) {
  const std::size_t d = domain.dim;
  const std::size_t n = grid.steps();
  if (paths == 0) throw InvalidArgument("need at least one path");
  if (x0.size() != d) throw InvalidArgument("initial state has the wrong dimension");
  if (domain.psi(x0) < 0.0) throw StartOutsideDomain("x0 lies outside the closure of the domain");
  if (options.scheme == ReflectionScheme::skorokhod_explicit &&
      domain.kind != DomainKind::half_line && domain.kind != DomainKind::free_space) {
    throw UnsupportedScheme("the explicit Skorokhod map is implemented for the half-line only");
  }

  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> states(paths * (n + 1) * d);
  std::vector<double> g_incr(paths * n, 0.0);
  std::vector<double> dw(paths * n * d);
  std::vector<double> sigma_max(paths, 0.0);
  std::vector<double> drift_max(paths, 0.0);
  const bool reflecting = domain.kind != DomainKind::free_space;
  const bool bridge = options.bridge && domain.kind == DomainKind::half_line;
  const std::uint64_t bridge_seed = named_seed(seed, "bridge");

  parallel_for(paths, 256, [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(d), b(d), s(d * d), w(d), grad(d), increment(d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t m = begin; m < end; ++m) {
      Engine engine(substream_seed(seed, m));
      SplitMixStream bridge_stream(substream_seed(bridge_seed, m));
      normal.reset();
      std::copy(x0.begin(), x0.end(), x.begin());
      double* path_states = states.data() + m * (n + 1) * d;
      std::copy(x.begin(), x.end(), path_states);
      double free_path = x[0];  // unreflected path for the Skorokhod map
      double g_running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        drift(x, b);
        sigma(x, s);
        sigma_max[m] = std::max(sigma_max[m], row_norm_max(s, d));
        drift_max[m] = std::max(drift_max[m], norm(b));
        for (std::size_t k = 0; k < d; ++k) w[k] = sqrt_dt * normal(engine);
        std::copy(w.begin(), w.end(), dw.begin() + (m * n + i) * d);

        for (std::size_t r = 0; r < d; ++r) {
          double acc = b[r] * dt;
          for (std::size_t c = 0; c < d; ++c) acc += s[r * d + c] * w[c];
          increment[r] = acc;
        }

        double dg = 0.0;
        if (!reflecting) {
          for (std::size_t k = 0; k < d; ++k) x[k] += increment[k];
        } else {
          switch (options.scheme) {
            case ReflectionScheme::projection: {
              if (bridge) {
                // Skorokhod map of the continuous path over the step, using
                // the sampled minimum of the Brownian bridge between the nodes.
                const double a = x[0], e = x[0] + increment[0];
                const double u = 1.0 - bridge_stream.uniform();
                const double low = 0.5 * (a + e - std::sqrt((e - a) * (e - a) - 2.0 * s[0] * s[0] * dt * std::log(u)));
                dg = std::max(0.0, -low);
                x[0] = e + dg;
                break;
              }
              for (std::size_t k = 0; k < d; ++k) x[k] += increment[k];
              dg = project(domain, x, options.max_projection_iterations);
              break;
            }
            case ReflectionScheme::skorokhod_explicit: {
              free_path += increment[0];
              const double g_next = std::max(g_running, -free_path);
              dg = g_next - g_running;
              g_running = g_next;
              x[0] = free_path + g_running;
              break;
            }
            case ReflectionScheme::penalization: {
              const double deficit = std::max(-domain.psi(x), 0.0);
              domain.grad_psi(x, grad);
              dg = options.penalty_rate * deficit;
              for (std::size_t k = 0; k < d; ++k) x[k] += increment[k] + grad[k] * dg;
              break;
            }
          }
        }
        g_incr[m * n + i] = dg;
        std::copy(x.begin(), x.end(), path_states + (i + 1) * d);
      }
    }
  });

  ForwardBundle bundle(grid, paths, d, seed, options.scheme, std::move(states), std::move(g_incr),
                       std::move(dw));
  const double smax = *std::max_element(sigma_max.begin(), sigma_max.end());
  const double bmax = *std::max_element(drift_max.begin(), drift_max.end());
  bundle.set_band(2.0 * smax * sqrt_dt);
  if (options.scheme == ReflectionScheme::penalization && reflecting) {
    bundle.set_outside_tolerance(8.0 * smax * sqrt_dt + bmax * dt);
  }
  return bundle;
}

double expected_local_time(const ForwardBundle& bundle) {
  double total = 0.0;
  for (std::size_t m = 0; m < bundle.paths(); ++m) total += bundle.G_total(m);
  return total / static_cast<double>(bundle.paths());
}

MeanEstimate terminal_mean(const ForwardBundle& bundle, std::size_t coord) {
  const std::size_t mpaths = bundle.paths();
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t m = 0; m < mpaths; ++m) {
    const double v = bundle.X(m, bundle.steps())[coord];
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / static_cast<double>(mpaths);
  const double var =
      mpaths > 1 ? std::max(0.0, (sum2 - mpaths * mean * mean) / static_cast<double>(mpaths - 1))
                 : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(mpaths))};
}

}  // namespace rgbsde
