#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbilab/magnitude.hpp"

namespace cbilab {

// thrown when a requested operation needs an unsupported mechanism family
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// thrown when a Levy integral fails its integrability condition
struct IntegrabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Regime { None, Log, SuperLog, SubLog };

std::string regime_name(Regime r);

// A Levy measure on (0, inf) described through its tail m̄(u) = m((u, inf)).
struct LevyMeasure {
  std::function<double(double)> tail;          // m̄(u), u > 0
  std::function<double(double)> tail_inverse;  // inf{u > 0 : m̄(u) < p}
  std::function<double(double)> density;       // optional, may be empty
  // tail evaluated at l1 = ln(1+u); exact route for astronomically large u
  std::function<double(double)> tail_of_l1;
  // inverse returning all three scales; defaults to wrapping tail_inverse
  std::function<Magnitude(double)> inverse_mag;

  bool finite_small_mean = true;   // ∫_0^1 u m(du) < inf
  bool finite_log_moment = true;   // ∫_1^inf ln u m(du) < inf
  double total_mass = 0.0;         // m̄(0+), +inf for infinite activity

  bool is_zero() const { return !tail; }
  double truncated_mass(double eps) const;  // m̄(eps)
  double truncated_mean(double eps) const;  // ∫_0^eps u m(du) by tail quadrature

  // moments used by generator numerics: ∫_0^C u^2 m(du) and ∫_C^inf u m(du)
  double second_moment_below(double cutoff) const;
  double mean_above(double cutoff) const;

  static LevyMeasure zero();
};

// Branching mechanism Psi(q) = b q + (sigma^2/2) q^2 + ∫ (e^{-qx} - 1 + qx) pi(dx).
struct BranchingMechanism {
  enum class Kind { Zero, Linear, Feller, Stable, Custom };

  Kind kind = Kind::Zero;
  double b = 0.0;
  double sigma2 = 0.0;
  double d = 0.0;      // stable: Psi = d x^{1+alpha}
  double alpha = 1.0;
  LevyMeasure jumps;   // pi

  double psi(double q) const;             // closed form when the family has one
  double psi_quadrature(double q) const;  // tail-form quadrature route
  bool has_closed_v() const;
  double v_closed(double lambda, double t) const;

  static BranchingMechanism zero();
  static BranchingMechanism linear(double b);
  static BranchingMechanism feller(double b, double sigma2);
  static BranchingMechanism stable(double d, double alpha);
  static BranchingMechanism from_tail(double b, double sigma2,
                                      std::function<double(double)> pi_tail);
};

// Immigration mechanism Phi(q) = beta q + ∫ (1 - e^{-qx}) nu(dx).
//
// Slowly varying presets (log / iterated-log / delta / sublog) are defined
// through tau(L), the tail as a function of L = ln(1+u), clamped to a
// constant below u0 = 1e-6 so the measure is Levy-integrable at 0. Their
// analytic Phi is the matching closed form tau(ln(1+1/q)); it agrees with
// the measure's true Laplace exponent only asymptotically (a few percent
// at moderate q), which is the documented price of the closed form.
struct ImmigrationMechanism {
  enum class Kind { Drift, Stable, ExpTail, LogSV, IterLogSV, DeltaSV, SubLogSV, Custom };

  Kind kind = Kind::Drift;
  double beta = 0.0;      // drift
  double c = 1.0;         // log preset level
  double dprime = 1.0;    // stable: Phi = d' q^beta_index
  double beta_index = 0.5;
  double delta = 0.5;     // delta preset exponent
  LevyMeasure nu;

  Regime regime = Regime::None;
  double rv_index_at0 = 0.0;
  bool log_moment = true;
  bool has_closed_phi = false;

  double phi(double q) const;            // closed form if present, else quadrature
  double phi_closed(double q) const;
  double phi_from_tail(double q) const;  // beta q + q ∫ e^{-qu} nū(u) du
  double phi_prime(double q) const;      // closed presets only
  double phi_second(double q) const;
  double phi_inverse(double y) const;
  double phi_of_exp_neg(double x) const;  // Phi(e^{-x}) without underflow

  // log-domain tail interface, present for the slowly varying presets
  bool has_tau = false;
  double tau(double L) const;
  double tau_prime(double L) const;
  double tau_second(double L) const;
  double tau_inverse(double p) const;  // generalized inverse in L
  double tau_clamp_L = 0.0;            // plateau edge in L

  // same mechanism with the closed form stripped: phi() routes through the
  // measure, which is what sampler-vs-transform oracles need
  ImmigrationMechanism measure_only() const;

  static ImmigrationMechanism drift(double beta);
  static ImmigrationMechanism stable(double dprime, double beta_index);
  static ImmigrationMechanism exp_tail();                 // nū(u) = e^{-u}
  static ImmigrationMechanism log_sv(double c);           // nū ~ c/ln(1+u)
  static ImmigrationMechanism iterlog_sv();               // nū ~ 1/ln(1+ln(1+u))
  static ImmigrationMechanism delta_sv(double delta);     // nū ~ ln(1+ln(1+u))/ln(1+u)^delta
  static ImmigrationMechanism sublog_sv();                // nū ~ 1/ln(1+u)^2
  static ImmigrationMechanism from_tail(double beta, std::function<double(double)> nu_tail,
                                        std::function<double(double)> nu_tail_inverse);
};

// spec-level operation names
double psi_eval(const BranchingMechanism& mech, double q);
double phi_eval(const ImmigrationMechanism& mech, double q);
double phi_inverse(const ImmigrationMechanism& mech, double y);
double nu_tail(const ImmigrationMechanism& mech, double u);
double nu_tail_inverse(const ImmigrationMechanism& mech, double p);

struct RvProbe {
  double index = 0.0;
  double dispersion = 0.0;
  double level = 0.0;  // f at the largest probe point
};

enum class ProbeEnd { Zero, Infinity };

RvProbe rv_index_probe(const std::function<double(double)>& f, ProbeEnd at);

// preset registry for config files / the catalogue
struct PresetInfo {
  std::string name;
  std::string parameters;
  std::string classification;
  bool log_moment;
};

std::vector<PresetInfo> immigration_preset_catalogue();
ImmigrationMechanism make_immigration_preset(const std::string& name,
                                             const std::map<std::string, double>& params);
BranchingMechanism make_branching_preset(const std::string& name,
                                         const std::map<std::string, double>& params);

}  // namespace cbilab
