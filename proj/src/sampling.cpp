#include "cbilab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

namespace cbilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Feller transitions switch to the deterministic mean flow once the Poisson
// mean would be astronomically large; the skipped branching noise is then
// below 1e-6 relative.
constexpr double kFellerMeanCap = 1e12;

void fill_from_magnitudes(PathSample& path, const std::vector<Magnitude>& mags) {
  path.values.resize(mags.size());
  path.log1p_values.resize(mags.size());
  path.log1p2_values.resize(mags.size());
  for (std::size_t i = 0; i < mags.size(); ++i) {
    path.values[i] = mags[i].v;
    path.log1p_values[i] = mags[i].l1;
    path.log1p2_values[i] = mags[i].l2;
  }
}

Magnitude draw_jump(const LevyMeasure& nu, double p) {
  if (nu.inverse_mag) return nu.inverse_mag(p);
  return Magnitude::from_value(nu.tail_inverse(p));
}

// One exact Feller transition over h given the current state.
double feller_step(RngStream& rng, double x, double b, double sigma2, double h) {
  if (x <= 0.0 || h <= 0.0) return std::max(x, 0.0);
  if (sigma2 == 0.0) return x * std::exp(-b * h);
  double rho, decay;
  if (b == 0.0) {
    rho = 2.0 / (sigma2 * h);
    decay = 1.0;
  } else {
    decay = std::exp(-b * h);
    rho = 2.0 * b / (sigma2 * (1.0 - decay));
  }
  double mean = rho * x * decay;
  if (mean > kFellerMeanCap) return x * decay;
  std::uint64_t n = rng.poisson(mean);
  if (n == 0) return 0.0;  // extinction atom of the transition law
  return rng.gamma(static_cast<double>(n)) / rho;
}

// Graft state for shot-noise CBIs. Values on the l2 scale never re-enter the
// stochastic regime; mid-range values evolve in log space until they fit.
struct Graft {
  Magnitude m;

  void evolve(RngStream& rng, const BranchingMechanism& psi, double h) {
    if (h <= 0.0) return;
    switch (psi.kind) {
      case BranchingMechanism::Kind::Zero:
        return;
      case BranchingMechanism::Kind::Linear:
        m = m.decayed(psi.b * h);
        return;
      case BranchingMechanism::Kind::Feller: {
        if (!m.finite_value() || m.v > kFellerMeanCap) {
          m = m.decayed(psi.b * h);  // mean flow; noise below double precision
          return;
        }
        m = Magnitude::from_value(feller_step(rng, m.v, psi.b, psi.sigma2, h));
        return;
      }
      default:
        throw CapabilityError(
            "sample_cbi_shotnoise: branching family not supported by the path sampler; "
            "use the transform oracle instead");
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------

double pick_truncation_eps(const ImmigrationMechanism& phi, double rate_cap) {
  if (phi.nu.is_zero()) return 1e-12;
  if (phi.nu.total_mass <= rate_cap) return 1e-12;
  double eps = phi.nu.tail_inverse(rate_cap);
  return std::max(eps, 1e-12);
}

PathSample sample_subordinator(const ImmigrationMechanism& phi, double T,
                               std::span<const double> grid, double eps,
                               RngStreamSpec rng_spec, bool record_atoms) {
  if (T <= 0.0) throw std::domain_error("sample_subordinator: T must be > 0");
  if (eps <= 0.0) throw std::domain_error("sample_subordinator: eps must be > 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1]) throw std::domain_error("grid must be strictly increasing");

  PathSample path;
  path.times.assign(grid.begin(), grid.end());
  path.meta = {rng_spec.seed, rng_spec.stream, eps, 0.0, false};

  double rate = 0.0, comp = 0.0;
  if (!phi.nu.is_zero()) {
    rate = phi.nu.truncated_mass(eps);
    if (!std::isfinite(rate))
      throw std::domain_error("sample_subordinator: nu tail infinite at eps");
    comp = phi.nu.truncated_mean(eps);
  }
  path.meta.bias_bound = comp * T;

  std::vector<MagnitudeSum> acc(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) acc[i].add_base((phi.beta + comp) * grid[i]);

  RngStream rng(rng_spec.seed, rng_spec.stream);
  if (rate > 0.0) {
    std::uint64_t n = rng.poisson(rate * T);
    for (std::uint64_t k = 0; k < n; ++k) {
      double u = rng.uniform() * T;
      Magnitude jump = draw_jump(phi.nu, rng.uniform() * rate);
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] >= u) acc[i].add(jump);
      if (record_atoms) path.atoms.emplace_back(u, jump.v);
    }
  }
  std::vector<Magnitude> mags(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mags[i] = acc[i].total();
  fill_from_magnitudes(path, mags);
  if (record_atoms) std::sort(path.atoms.begin(), path.atoms.end());
  return path;
}

PathSample sample_cb(const BranchingMechanism& psi, double x0,
                     std::span<const double> grid, RngStreamSpec rng_spec) {
  if (x0 < 0.0) throw std::domain_error("sample_cb: x0 must be >= 0");
  if (psi.kind != BranchingMechanism::Kind::Linear &&
      psi.kind != BranchingMechanism::Kind::Feller &&
      psi.kind != BranchingMechanism::Kind::Zero) {
    throw CapabilityError(
        "sample_cb: exact path sampling covers linear and Feller families only; "
        "verify other mechanisms through the transform oracle");
  }
  PathSample path;
  path.times.assign(grid.begin(), grid.end());
  path.meta = {rng_spec.seed, rng_spec.stream, 0.0, 0.0, false};
  RngStream rng(rng_spec.seed, rng_spec.stream);
  std::vector<Magnitude> mags(grid.size());
  double x = x0;
  double prev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double h = grid[i] - prev;
    if (h < 0.0) throw std::domain_error("grid must be increasing");
    switch (psi.kind) {
      case BranchingMechanism::Kind::Zero: break;
      case BranchingMechanism::Kind::Linear: x *= std::exp(-psi.b * h); break;
      default: x = feller_step(rng, x, psi.b, psi.sigma2, h); break;
    }
    mags[i] = Magnitude::from_value(x);
    prev = grid[i];
  }
  fill_from_magnitudes(path, mags);
  return path;
}

PathSample sample_cbi_shotnoise(const BranchingMechanism& psi,
                                const ImmigrationMechanism& phi,
                                std::span<const double> grid, double eps,
                                RngStreamSpec rng_spec, bool record_atoms) {
  if (phi.beta != 0.0)
    throw CapabilityError("sample_cbi_shotnoise: requires beta = 0 (no continuous immigration)");
  if (grid.empty()) throw std::domain_error("sample_cbi_shotnoise: empty grid");
  if (eps <= 0.0) throw std::domain_error("sample_cbi_shotnoise: eps must be > 0");
  const double T = grid.back();

  PathSample path;
  path.times.assign(grid.begin(), grid.end());
  path.meta = {rng_spec.seed, rng_spec.stream, eps, 0.0, false};

  std::vector<MagnitudeSum> acc(grid.size());
  RngStream rng(rng_spec.seed, rng_spec.stream);

  if (!phi.nu.is_zero()) {
    double rate = phi.nu.truncated_mass(eps);
    if (!std::isfinite(rate))
      throw std::domain_error("sample_cbi_shotnoise: nu tail infinite at eps");
    path.meta.bias_bound = phi.nu.truncated_mean(eps) * T;  // mean of discarded grafts at birth
    std::uint64_t n = rng.poisson(rate * T);
    for (std::uint64_t k = 0; k < n; ++k) {
      double u = rng.uniform() * T;
      Graft graft{draw_jump(phi.nu, rng.uniform() * rate)};
      if (record_atoms) path.atoms.emplace_back(u, graft.m.v);
      double prev = u;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < u) continue;
        graft.evolve(rng, psi, grid[i] - prev);
        prev = grid[i];
        acc[i].add(graft.m);
      }
    }
  }
  std::vector<Magnitude> mags(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mags[i] = acc[i].total();
  fill_from_magnitudes(path, mags);
  if (record_atoms) std::sort(path.atoms.begin(), path.atoms.end());
  return path;
}

// ---------------------------------------------------------------------------
// ESN

EsnMeasure EsnMeasure::reciprocal_tail(double scale) {
  EsnMeasure m;
  m.reciprocal = true;
  m.scale = scale;
  m.tail = [scale](double x) { return scale / x; };
  m.tail_inverse = [scale](double p) { return scale / p; };
  return m;
}

EsnMeasure EsnMeasure::from_tail(std::function<double(double)> tail,
                                 std::function<double(double)> tail_inverse) {
  EsnMeasure m;
  m.tail = std::move(tail);
  m.tail_inverse = std::move(tail_inverse);
  return m;
}

double EsnMeasure::void_exponent(double y, double gamma, double h) const {
  if (y <= 0.0 || y + gamma * h <= 0.0)
    throw std::domain_error("void_exponent: level crosses zero on the window");
  if (reciprocal) {
    if (gamma == 0.0) return scale * h / y;
    return (scale / gamma) * std::log1p(gamma * h / y);
  }
  double total = 0.0;
  int n = 200;  // composite panels; generic tails are test-scale only
  double step = h / n;
  for (int i = 0; i < n; ++i) {
    double v0 = i * step, v1 = v0 + step, vm = v0 + 0.5 * step;
    total += step / 6.0 * (tail(y + gamma * v0) + 4.0 * tail(y + gamma * vm) + tail(y + gamma * v1));
  }
  return total;
}

double EsnMeasure::fresh_sup_quantile(double u, double gamma, double h) const {
  if (u <= 0.0 || u >= 1.0) throw std::domain_error("fresh_sup_quantile: u in (0,1)");
  if (reciprocal) {
    if (gamma == 0.0) return -scale * h / std::log(u);
    return gamma * h / (std::pow(u, -gamma / scale) - 1.0);
  }
  // bisection on the monotone CDF
  double target = -std::log(u);
  double lo = std::max(1e-12, gamma < 0 ? -gamma * h * (1.0 + 1e-12) : 1e-300);
  double hi = 1.0;
  while (void_exponent(hi, gamma, h) > target && hi < 1e300) hi *= 2.0;
  while (lo < 1e-290 && void_exponent(std::max(lo, 1e-300), gamma, h) < target) lo *= 0.5;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (void_exponent(mid, gamma, h) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

PathSample sample_esn_grid(double gamma, const EsnMeasure& mu,
                           std::span<const double> times, RngStreamSpec rng_spec) {
  if (times.empty()) throw std::domain_error("sample_esn_grid: empty grid");
  PathSample path;
  path.times.assign(times.begin(), times.end());
  path.meta = {rng_spec.seed, rng_spec.stream, 0.0, 0.0, false};
  RngStream rng(rng_spec.seed, rng_spec.stream);
  std::vector<Magnitude> mags(times.size());
  double m = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    double h = times[i] - prev;
    if (h < 0.0) throw std::domain_error("times must be increasing");
    if (h > 0.0) {
      double z = mu.fresh_sup_quantile(rng.uniform(), gamma, h);
      m = std::max(i == 0 && prev == 0.0 ? -kInf : m - gamma * h, z);
    }
    mags[i] = Magnitude::from_value(std::max(m, 0.0));
    prev = times[i];
  }
  fill_from_magnitudes(path, mags);
  return path;
}

std::pair<double, bool> esn_sup_over_atoms(
    std::span<const std::pair<double, double>> atoms, double gamma, double s,
    double eps) {
  double best = -kInf;
  for (const auto& [u, mark] : atoms) {
    if (u <= s) best = std::max(best, mark - gamma * (s - u));
  }
  if (best == -kInf) {
    return {eps + std::max(-gamma, 0.0) * s, true};  // censored-below-eps convention
  }
  return {best, false};
}

PathSample sample_esn_atoms(double gamma, const EsnMeasure& mu, double T,
                            std::span<const double> times, double eps,
                            RngStreamSpec rng_spec) {
  if (eps <= 0.0) throw std::domain_error("sample_esn_atoms: eps must be > 0");
  PathSample path;
  path.times.assign(times.begin(), times.end());
  double rate = mu.tail(eps);
  path.meta = {rng_spec.seed, rng_spec.stream, eps,
               eps + std::max(-gamma, 0.0) * T, false};
  RngStream rng(rng_spec.seed, rng_spec.stream);
  std::uint64_t n = rng.poisson(rate * T);
  path.atoms.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    double u = rng.uniform() * T;
    double mark = mu.tail_inverse(rng.uniform() * rate);
    path.atoms.emplace_back(u, mark);
  }
  std::vector<Magnitude> mags(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    auto [value, censored] = esn_sup_over_atoms(path.atoms, gamma, times[i], eps);
    if (censored) path.meta.censored = true;
    mags[i] = Magnitude::from_value(std::max(value, 0.0));
  }
  fill_from_magnitudes(path, mags);
  std::sort(path.atoms.begin(), path.atoms.end());
  return path;
}

// ---------------------------------------------------------------------------

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CBILAB_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<PathSample> sample_ensemble(std::size_t n_paths,
                                        const std::function<PathSample(std::uint64_t)>& make_path,
                                        int thread_count) {
  std::vector<PathSample> out(n_paths);
  int threads = std::min<std::size_t>(resolve_thread_count(thread_count), std::max<std::size_t>(n_paths, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n_paths; ++i) out[i] = make_path(i);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n_paths; i += threads) out[i] = make_path(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace cbilab
