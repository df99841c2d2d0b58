#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cbilab/magnitude.hpp"
#include "cbilab/mechanisms.hpp"
#include "cbilab/rng.hpp"

namespace cbilab {

struct RngStreamSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct PathMeta {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double eps = 0.0;
  double bias_bound = 0.0;
  bool censored = false;
};

// A cadlag path evaluated on a fixed grid. Values are carried on the three
// magnitude scales so renormalisation maps stay exact when the raw value
// exceeds double range.
struct PathSample {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> log1p_values;   // ln(1 + Y)
  std::vector<double> log1p2_values;  // ln(1 + ln(1 + Y))
  std::vector<std::pair<double, double>> atoms;  // (time, mark), optional
  PathMeta meta;

  Magnitude at(std::size_t i) const {
    Magnitude m;
    m.v = values[i];
    m.l1 = log1p_values[i];
    m.l2 = log1p2_values[i];
    return m;
  }
};

// Subordinator with Laplace exponent Phi: jumps >= eps exactly, small jumps
// compensated by their mean drift.
PathSample sample_subordinator(const ImmigrationMechanism& phi, double T,
                               std::span<const double> grid, double eps,
                               RngStreamSpec rng, bool record_atoms = false);

// Exact CB path on the grid; linear and Feller families only.
PathSample sample_cb(const BranchingMechanism& psi, double x0,
                     std::span<const double> grid, RngStreamSpec rng);

// CBI via the Poissonian shot-noise construction (beta = 0 only): immigration
// atoms from nu truncated at eps, each grafted with an independent CB started
// from the atom mark, evaluated lazily at the grid times.
PathSample sample_cbi_shotnoise(const BranchingMechanism& psi,
                                const ImmigrationMechanism& phi,
                                std::span<const double> grid, double eps,
                                RngStreamSpec rng, bool record_atoms = false);

// Intensity measure of an ESN driving point process: tail and, when the tail
// is c/x, closed-form void integrals and inverses.
struct EsnMeasure {
  std::function<double(double)> tail;          // mū(x)
  std::function<double(double)> tail_inverse;  // inf{x : mū(x) < p}
  bool reciprocal = false;                     // mū(x) = scale / x
  double scale = 1.0;

  // ∫_0^h mū(y + gamma v) dv
  double void_exponent(double y, double gamma, double h) const;
  // inverse of y -> exp(-void_exponent(y, gamma, h)) at probability u
  double fresh_sup_quantile(double u, double gamma, double h) const;

  static EsnMeasure reciprocal_tail(double scale = 1.0);
  static EsnMeasure from_tail(std::function<double(double)> tail,
                              std::function<double(double)> tail_inverse);
};

// Exact sequential sampling of the ESN on a grid: M_{s+h} = max(M_s - gamma h, Z_h)
// with Z_h the fresh supremum over the window.
PathSample sample_esn_grid(double gamma, const EsnMeasure& mu,
                           std::span<const double> times, RngStreamSpec rng);

// Atom-based ESN sampler: atoms with marks above eps over [0, T].
PathSample sample_esn_atoms(double gamma, const EsnMeasure& mu, double T,
                            std::span<const double> times, double eps,
                            RngStreamSpec rng);

// max over recorded atoms of mark - gamma (s - u); censored when no atom
// is in play (returns the truncation floor and sets the flag).
std::pair<double, bool> esn_sup_over_atoms(
    std::span<const std::pair<double, double>> atoms, double gamma, double s,
    double eps);

// Path-level fan-out: results indexed by path, so aggregation is independent
// of the worker count. thread_count <= 0 reads CBILAB_THREADS / hardware.
std::vector<PathSample> sample_ensemble(std::size_t n_paths,
                                        const std::function<PathSample(std::uint64_t)>& make_path,
                                        int thread_count = 0);

int resolve_thread_count(int requested);

// default truncation policy: smallest eps with nū(eps) <= rate_cap
double pick_truncation_eps(const ImmigrationMechanism& phi, double rate_cap = 1e6);

}  // namespace cbilab
