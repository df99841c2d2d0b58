#include "cbilab/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cbilab/quadrature.hpp"

namespace cbilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHeadClampU = 1e-6;  // no mass below this jump size in SV presets

// ∫_lo^hi f with panels shrinking geometrically toward 0; integrable
// singularities at the origin are fine.
double integrate_down_to_zero(const Integrand& f, double hi, double rel_tol) {
  double total = 0.0;
  double b = hi;
  int small_run = 0;
  for (int k = 0; k < 400 && small_run < 2 && b > 1e-300; ++k) {
    double a = b / 8.0;
    double piece = integrate(f, a, b, rel_tol * 0.1, rel_tol * 0.02 * std::abs(total));
    total += piece;
    small_run = (std::abs(piece) <= rel_tol * 0.1 * std::abs(total)) ? small_run + 1 : 0;
    b = a;
  }
  if (small_run < 2) throw IntegrabilityError("head integral does not converge near 0");
  return total;
}

// ∫_lo^inf f with geometric panels; throws IntegrabilityError when the
// panel contributions do not decay.
double integrate_up_to_infinity(const Integrand& f, double lo, double rel_tol) {
  double total = 0.0;
  double a = lo;
  double prev_piece = kInf;
  for (int k = 0; k < 260; ++k) {
    double b = a * 8.0;
    double piece = integrate(f, a, b, rel_tol * 0.1, rel_tol * 0.02 * std::abs(total));
    total += piece;
    if (std::abs(piece) <= rel_tol * 0.1 * std::abs(total) &&
        std::abs(prev_piece) <= rel_tol * 0.1 * std::abs(total)) {
      return total;
    }
    prev_piece = piece;
    a = b;
  }
  throw IntegrabilityError("tail integral does not converge");
}

double bisect_increasing(const std::function<double(double)>& f, double target,
                         double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    double mid = std::sqrt(lo * hi);  // multiplicative midpoint, spans decades
    if (f(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::Log: return "Log";
    case Regime::SuperLog: return "Super-log";
    case Regime::SubLog: return "Sub-log (no convergence)";
    default: return "none";
  }
}

// ---------------------------------------------------------------------------
// LevyMeasure

LevyMeasure LevyMeasure::zero() {
  LevyMeasure m;
  m.total_mass = 0.0;
  return m;
}

double LevyMeasure::truncated_mass(double eps) const {
  if (is_zero()) return 0.0;
  if (eps <= 0.0) throw std::domain_error("truncated_mass: eps must be positive");
  return tail(eps);
}

double LevyMeasure::truncated_mean(double eps) const {
  if (is_zero()) return 0.0;
  if (eps <= 0.0) throw std::domain_error("truncated_mean: eps must be positive");
  // ∫_0^eps u m(du) = ∫_0^eps m̄(v) dv - eps m̄(eps)
  double head = integrate_down_to_zero([this](double v) { return tail(v); }, eps, 1e-8);
  return std::max(0.0, head - eps * tail(eps));
}

double LevyMeasure::second_moment_below(double cutoff) const {
  if (is_zero()) return 0.0;
  double tc = tail(cutoff);
  double head = integrate_down_to_zero(
      [this, tc](double v) { return 2.0 * v * (tail(v) - tc); }, cutoff, 1e-8);
  return std::max(0.0, head);
}

double LevyMeasure::mean_above(double cutoff) const {
  if (is_zero()) return 0.0;
  double t = integrate_up_to_infinity([this](double v) { return tail(v); }, cutoff, 1e-8);
  return cutoff * tail(cutoff) + t;
}

// ---------------------------------------------------------------------------
// BranchingMechanism

BranchingMechanism BranchingMechanism::zero() {
  BranchingMechanism m;
  m.kind = Kind::Zero;
  m.jumps = LevyMeasure::zero();
  return m;
}

BranchingMechanism BranchingMechanism::linear(double b) {
  BranchingMechanism m;
  m.kind = Kind::Linear;
  m.b = b;
  m.jumps = LevyMeasure::zero();
  return m;
}

BranchingMechanism BranchingMechanism::feller(double b, double sigma2) {
  if (sigma2 < 0.0) throw std::domain_error("feller: sigma2 must be >= 0");
  BranchingMechanism m;
  m.kind = Kind::Feller;
  m.b = b;
  m.sigma2 = sigma2;
  m.jumps = LevyMeasure::zero();
  return m;
}

BranchingMechanism BranchingMechanism::stable(double d, double alpha) {
  if (d < 0.0 || alpha <= 0.0 || alpha > 1.0)
    throw std::domain_error("stable branching: need d >= 0 and alpha in (0, 1]");
  BranchingMechanism m;
  m.kind = Kind::Stable;
  m.d = d;
  m.alpha = alpha;
  if (alpha == 1.0) {
    m.sigma2 = 2.0 * d;  // Psi = d x^2 is pure diffusion
    m.jumps = LevyMeasure::zero();
  } else {
    double scale = d * alpha / std::tgamma(1.0 - alpha);
    LevyMeasure pi;
    pi.tail = [scale, alpha](double u) { return scale * std::pow(u, -1.0 - alpha); };
    pi.tail_inverse = [scale, alpha](double p) {
      return std::pow(scale / p, 1.0 / (1.0 + alpha));
    };
    pi.density = [scale, alpha](double u) {
      return scale * (1.0 + alpha) * std::pow(u, -2.0 - alpha);
    };
    pi.total_mass = kInf;
    m.jumps = pi;
    // build-time check of ∫ u ∧ u^2 pi(du) < inf
    double t1 = pi.tail(1.0);
    integrate_down_to_zero([&pi, t1](double v) { return 2.0 * v * (pi.tail(v) - t1); }, 1.0, 1e-6);
    integrate_up_to_infinity([&pi](double v) { return pi.tail(v); }, 1.0, 1e-6);
  }
  return m;
}

BranchingMechanism BranchingMechanism::from_tail(double b, double sigma2,
                                                 std::function<double(double)> pi_tail) {
  BranchingMechanism m;
  m.kind = Kind::Custom;
  m.b = b;
  m.sigma2 = sigma2;
  LevyMeasure pi;
  pi.tail = std::move(pi_tail);
  pi.total_mass = kInf;
  m.jumps = pi;
  // build-time integrability: ∫ u ∧ u^2 pi(du) < inf
  double t1 = pi.tail(1.0);
  integrate_down_to_zero([&pi, t1](double v) { return 2.0 * v * (pi.tail(v) - t1); }, 1.0, 1e-6);
  integrate_up_to_infinity([&pi](double v) { return pi.tail(v); }, 1.0, 1e-6);
  return m;
}

double BranchingMechanism::psi(double q) const {
  if (q < 0.0) throw std::domain_error("psi: q must be >= 0");
  if (q == 0.0) return 0.0;
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Linear: return b * q;
    case Kind::Feller: return b * q + 0.5 * sigma2 * q * q;
    case Kind::Stable: return d * std::pow(q, 1.0 + alpha);
    case Kind::Custom: return psi_quadrature(q);
  }
  return 0.0;
}

double BranchingMechanism::psi_quadrature(double q) const {
  if (q < 0.0) throw std::domain_error("psi: q must be >= 0");
  if (q == 0.0) return 0.0;
  double base = b * q + 0.5 * sigma2 * q * q;
  if (jumps.is_zero()) return base;
  // ∫ (e^{-qx} - 1 + qx) pi(dx) = q ∫ (1 - e^{-qu}) pī(u) du
  double integral = integrate_positive_axis(
      [this, q](double u) { return -std::expm1(-q * u) * jumps.tail(u); }, 1e-9);
  return base + q * integral;
}

bool BranchingMechanism::has_closed_v() const { return kind != Kind::Custom; }

double BranchingMechanism::v_closed(double lambda, double t) const {
  if (lambda < 0.0 || t < 0.0) throw std::domain_error("v_closed: negative argument");
  if (lambda == 0.0) return 0.0;
  switch (kind) {
    case Kind::Zero:
      return lambda;
    case Kind::Linear:
      return lambda * std::exp(-b * t);
    case Kind::Feller: {
      if (sigma2 == 0.0) return lambda * std::exp(-b * t);
      if (b == 0.0) return lambda / (1.0 + 0.5 * sigma2 * lambda * t);
      double e = std::exp(-b * t);
      return lambda * e / (1.0 + lambda * (0.5 * sigma2 / b) * (1.0 - e));
    }
    case Kind::Stable: {
      if (d == 0.0) return lambda;
      return std::pow(std::pow(lambda, -alpha) + alpha * d * t, -1.0 / alpha);
    }
    default:
      throw CapabilityError("v_closed: no closed form for custom mechanism");
  }
}

// ---------------------------------------------------------------------------
// ImmigrationMechanism: tau layer

double ImmigrationMechanism::tau(double L) const {
  double Lc = std::max(L, tau_clamp_L);
  switch (kind) {
    case Kind::LogSV: return c / Lc;
    case Kind::IterLogSV: return 1.0 / std::log1p(Lc);
    case Kind::DeltaSV: return std::log1p(Lc) / std::pow(Lc, delta);
    case Kind::SubLogSV: return 1.0 / (Lc * Lc);
    default: throw CapabilityError("tau: not a slowly varying preset");
  }
}

double ImmigrationMechanism::tau_prime(double L) const {
  if (L < tau_clamp_L) return 0.0;
  switch (kind) {
    case Kind::LogSV: return -c / (L * L);
    case Kind::IterLogSV: {
      double w = std::log1p(L);
      return -1.0 / ((1.0 + L) * w * w);
    }
    case Kind::DeltaSV: {
      double w = std::log1p(L);
      return 1.0 / ((1.0 + L) * std::pow(L, delta)) - delta * w / std::pow(L, 1.0 + delta);
    }
    case Kind::SubLogSV: return -2.0 / (L * L * L);
    default: throw CapabilityError("tau_prime: not a slowly varying preset");
  }
}

double ImmigrationMechanism::tau_second(double L) const {
  if (L < tau_clamp_L) return 0.0;
  switch (kind) {
    case Kind::LogSV: return 2.0 * c / (L * L * L);
    case Kind::IterLogSV: {
      double w = std::log1p(L);
      double q = 1.0 + L;
      return (w + 2.0) / (q * q * w * w * w);
    }
    case Kind::DeltaSV: {
      double w = std::log1p(L);
      double q = 1.0 + L;
      return -1.0 / (q * q * std::pow(L, delta)) -
             2.0 * delta / (q * std::pow(L, 1.0 + delta)) +
             delta * (1.0 + delta) * w / std::pow(L, 2.0 + delta);
    }
    case Kind::SubLogSV: return 6.0 / (L * L * L * L);
    default: throw CapabilityError("tau_second: not a slowly varying preset");
  }
}

double ImmigrationMechanism::tau_inverse(double p) const {
  double plateau = tau(tau_clamp_L);
  if (p >= plateau) return p > plateau ? 0.0 : tau_clamp_L;
  switch (kind) {
    case Kind::LogSV: return c / p;
    case Kind::IterLogSV: return std::expm1(1.0 / p);
    case Kind::SubLogSV: return 1.0 / std::sqrt(p);
    case Kind::DeltaSV: {
      // decreasing branch, bisect in L
      auto f = [this](double L) { return -tau(L); };
      return bisect_increasing(f, -p, tau_clamp_L, 1e300);
    }
    default: throw CapabilityError("tau_inverse: not a slowly varying preset");
  }
}

// ---------------------------------------------------------------------------
// ImmigrationMechanism: factories

namespace {

void validate_immigration_measure(const LevyMeasure& nu) {
  if (nu.is_zero()) return;
  // ∫ (1 ∧ u) nu(du) = ∫_0^1 nū(v) dv
  double i = integrate_down_to_zero([&nu](double v) { return nu.tail(v); }, 1.0, 1e-6);
  if (!std::isfinite(i)) throw IntegrabilityError("immigration measure: ∫ (1∧u) nu(du) diverges");
}

void attach_sv_measure(ImmigrationMechanism& m) {
  // tail, inverse and density all flow from tau through L = ln(1+u);
  // the lambdas copy what they need rather than referencing the mechanism
  LevyMeasure nu;
  auto kind = m.kind;
  double c = m.c, delta = m.delta, clampL = m.tau_clamp_L;
  auto tau_at = [kind, c, delta, clampL](double L) {
    double Lc = std::max(L, clampL);
    switch (kind) {
      case ImmigrationMechanism::Kind::LogSV: return c / Lc;
      case ImmigrationMechanism::Kind::IterLogSV: return 1.0 / std::log1p(Lc);
      case ImmigrationMechanism::Kind::DeltaSV: return std::log1p(Lc) / std::pow(Lc, delta);
      default: return 1.0 / (Lc * Lc);  // SubLogSV
    }
  };
  nu.tail = [tau_at](double u) { return tau_at(std::log1p(u)); };
  nu.tail_of_l1 = tau_at;
  nu.density = [kind, c, delta, clampL](double u) {
    double L = std::log1p(u);
    if (L < clampL) return 0.0;
    double tp;
    switch (kind) {
      case ImmigrationMechanism::Kind::LogSV: tp = -c / (L * L); break;
      case ImmigrationMechanism::Kind::IterLogSV: {
        double w = std::log1p(L);
        tp = -1.0 / ((1.0 + L) * w * w);
        break;
      }
      case ImmigrationMechanism::Kind::DeltaSV: {
        double w = std::log1p(L);
        tp = 1.0 / ((1.0 + L) * std::pow(L, delta)) - delta * w / std::pow(L, 1.0 + delta);
        break;
      }
      default: tp = -2.0 / (L * L * L); break;
    }
    return -tp / (1.0 + u);
  };
  nu.total_mass = tau_at(clampL);
  nu.finite_small_mean = true;
  m.nu = nu;
}

}  // namespace

ImmigrationMechanism ImmigrationMechanism::drift(double beta) {
  if (beta < 0.0) throw std::domain_error("drift: beta must be >= 0");
  ImmigrationMechanism m;
  m.kind = Kind::Drift;
  m.beta = beta;
  m.nu = LevyMeasure::zero();
  m.has_closed_phi = true;
  m.rv_index_at0 = 1.0;
  m.log_moment = true;
  return m;
}

ImmigrationMechanism ImmigrationMechanism::stable(double dprime, double beta_index) {
  if (dprime <= 0.0 || beta_index <= 0.0 || beta_index > 1.0)
    throw std::domain_error("stable immigration: need d' > 0 and beta in (0, 1]");
  ImmigrationMechanism m;
  m.kind = Kind::Stable;
  m.dprime = dprime;
  m.beta_index = beta_index;
  m.has_closed_phi = true;
  m.rv_index_at0 = beta_index;
  m.log_moment = true;
  if (beta_index == 1.0) {
    m.beta = dprime;  // pure drift
    m.nu = LevyMeasure::zero();
    return m;
  }
  double scale = dprime / std::tgamma(1.0 - beta_index);
  LevyMeasure nu;
  nu.tail = [scale, beta_index](double u) { return scale * std::pow(u, -beta_index); };
  nu.tail_inverse = [scale, beta_index](double p) {
    return std::pow(scale / p, 1.0 / beta_index);
  };
  nu.density = [scale, beta_index](double u) {
    return scale * beta_index * std::pow(u, -1.0 - beta_index);
  };
  nu.total_mass = kInf;
  m.nu = nu;
  validate_immigration_measure(m.nu);
  return m;
}

ImmigrationMechanism ImmigrationMechanism::exp_tail() {
  ImmigrationMechanism m;
  m.kind = Kind::ExpTail;
  m.has_closed_phi = true;
  m.rv_index_at0 = 1.0;
  m.log_moment = true;
  LevyMeasure nu;
  nu.tail = [](double u) { return std::exp(-u); };
  nu.tail_inverse = [](double p) { return p >= 1.0 ? 0.0 : -std::log(p); };
  nu.density = [](double u) { return std::exp(-u); };
  nu.total_mass = 1.0;
  m.nu = nu;
  validate_immigration_measure(m.nu);
  return m;
}

ImmigrationMechanism ImmigrationMechanism::log_sv(double c) {
  if (c <= 0.0) throw std::domain_error("log_immigration: c must be > 0");
  ImmigrationMechanism m;
  m.kind = Kind::LogSV;
  m.c = c;
  m.has_closed_phi = true;
  m.has_tau = true;
  m.tau_clamp_L = std::log1p(kHeadClampU);
  m.regime = Regime::Log;
  m.rv_index_at0 = 0.0;
  m.log_moment = false;
  attach_sv_measure(m);
  m.nu.inverse_mag = [c, clampL = m.tau_clamp_L, plateau = m.nu.total_mass](double p) {
    if (p >= plateau) return p > plateau ? Magnitude{} : Magnitude::from_l1(clampL);
    return Magnitude::from_l1(c / p);
  };
  m.nu.tail_inverse = [m2 = m](double p) { return std::expm1(m2.tau_inverse(p)); };
  m.nu.finite_log_moment = false;
  validate_immigration_measure(m.nu);
  return m;
}

ImmigrationMechanism ImmigrationMechanism::iterlog_sv() {
  ImmigrationMechanism m;
  m.kind = Kind::IterLogSV;
  m.has_closed_phi = true;
  m.has_tau = true;
  m.tau_clamp_L = std::log1p(kHeadClampU);
  m.regime = Regime::SuperLog;
  m.rv_index_at0 = 0.0;
  m.log_moment = false;
  attach_sv_measure(m);
  m.nu.inverse_mag = [clampL = m.tau_clamp_L, plateau = m.nu.total_mass](double p) {
    if (p >= plateau) return p > plateau ? Magnitude{} : Magnitude::from_l1(clampL);
    return Magnitude::from_l2(1.0 / p);
  };
  m.nu.tail_inverse = [m2 = m](double p) { return std::expm1(m2.tau_inverse(p)); };
  m.nu.finite_log_moment = false;
  validate_immigration_measure(m.nu);
  return m;
}

ImmigrationMechanism ImmigrationMechanism::delta_sv(double delta) {
  if (delta <= 0.0 || delta > 1.0)
    throw std::domain_error("superlog_delta: delta must be in (0, 1]");
  ImmigrationMechanism m;
  m.kind = Kind::DeltaSV;
  m.delta = delta;
  m.has_closed_phi = true;
  m.has_tau = true;
  m.regime = Regime::SuperLog;
  m.rv_index_at0 = 0.0;
  m.log_moment = false;
  // the raw formula ln(1+L)/L^delta peaks; clamp the head at the peak so the
  // tail is monotone
  double lo = 1e-9, hi = 1e9;
  for (int i = 0; i < 200; ++i) {
    double mid = std::sqrt(lo * hi);
    double g = mid / (1.0 + mid) - delta * std::log1p(mid);
    (g > 0.0 ? lo : hi) = mid;
  }
  m.tau_clamp_L = std::max(std::sqrt(lo * hi), std::log1p(kHeadClampU));
  attach_sv_measure(m);
  m.nu.inverse_mag = [m2 = m, plateau = m.nu.total_mass](double p) {
    if (p >= plateau) return p > plateau ? Magnitude{} : Magnitude::from_l1(m2.tau_clamp_L);
    double L = m2.tau_inverse(p);
    if (!std::isfinite(L)) throw std::domain_error("superlog_delta: jump beyond representable range");
    return Magnitude::from_l1(L);
  };
  m.nu.tail_inverse = [m2 = m](double p) { return std::expm1(m2.tau_inverse(p)); };
  m.nu.finite_log_moment = false;
  validate_immigration_measure(m.nu);
  return m;
}

ImmigrationMechanism ImmigrationMechanism::sublog_sv() {
  ImmigrationMechanism m;
  m.kind = Kind::SubLogSV;
  m.has_closed_phi = true;
  m.has_tau = true;
  // clamped where the squared-log closed form stops being concave; the
  // preset only ever probes the deep tail, so operationally inert
  m.tau_clamp_L = 3.0;
  m.regime = Regime::SubLog;
  m.rv_index_at0 = 0.0;
  m.log_moment = true;  // ∫ Phi(x)/x dx converges for the squared-log tail
  attach_sv_measure(m);
  m.nu.inverse_mag = [clampL = m.tau_clamp_L, plateau = m.nu.total_mass](double p) {
    if (p >= plateau) return p > plateau ? Magnitude{} : Magnitude::from_l1(clampL);
    return Magnitude::from_l1(1.0 / std::sqrt(p));
  };
  m.nu.tail_inverse = [m2 = m](double p) { return std::expm1(m2.tau_inverse(p)); };
  validate_immigration_measure(m.nu);
  return m;
}

ImmigrationMechanism ImmigrationMechanism::from_tail(double beta,
                                                     std::function<double(double)> nu_tail,
                                                     std::function<double(double)> nu_tail_inverse) {
  if (beta < 0.0) throw std::domain_error("immigration: beta must be >= 0");
  ImmigrationMechanism m;
  m.kind = Kind::Custom;
  m.beta = beta;
  LevyMeasure nu;
  nu.tail = std::move(nu_tail);
  nu.tail_inverse = std::move(nu_tail_inverse);
  nu.total_mass = kInf;
  m.nu = nu;
  validate_immigration_measure(m.nu);
  return m;
}

ImmigrationMechanism ImmigrationMechanism::measure_only() const {
  ImmigrationMechanism m = *this;
  m.kind = Kind::Custom;
  m.has_closed_phi = false;
  m.has_tau = false;
  return m;
}

// ---------------------------------------------------------------------------
// ImmigrationMechanism: evaluation

double ImmigrationMechanism::phi(double q) const {
  if (q < 0.0) throw std::domain_error("phi: q must be >= 0");
  if (q == 0.0) return 0.0;
  if (!has_closed_phi) return phi_from_tail(q);
  return phi_closed(q);
}

double ImmigrationMechanism::phi_closed(double q) const {
  if (q < 0.0) throw std::domain_error("phi: q must be >= 0");
  if (q == 0.0) return 0.0;
  switch (kind) {
    case Kind::Drift: return beta * q;
    case Kind::Stable: return dprime * std::pow(q, beta_index);
    case Kind::ExpTail: return q / (1.0 + q);
    case Kind::LogSV:
    case Kind::IterLogSV:
    case Kind::DeltaSV:
    case Kind::SubLogSV:
      return tau(std::log1p(1.0 / q));
    default: throw CapabilityError("phi_closed: no closed form");
  }
}

double ImmigrationMechanism::phi_from_tail(double q) const {
  if (q < 0.0) throw std::domain_error("phi: q must be >= 0");
  if (q == 0.0) return 0.0;
  if (nu.is_zero()) return beta * q;
  // Phi(q) = beta q + q ∫ e^{-qu} nū(u) du = beta q + ∫ e^{-w} nū(w/q) dw
  auto integrand = [this, q](double w) {
    if (w > 710.0) return 0.0;
    double u = w / q;
    double t = nu.tail_of_l1 ? nu.tail_of_l1(std::log1p(u)) : nu.tail(u);
    return std::exp(-w) * t;
  };
  double integral = integrate_positive_axis(integrand, 1e-8, 1e-18, 1e4);
  return beta * q + integral;
}

double ImmigrationMechanism::phi_prime(double q) const {
  if (q <= 0.0) throw std::domain_error("phi_prime: q must be > 0");
  switch (kind) {
    case Kind::Drift: return beta;
    case Kind::Stable: return dprime * beta_index * std::pow(q, beta_index - 1.0);
    case Kind::ExpTail: {
      double s = 1.0 + q;
      return 1.0 / (s * s);
    }
    case Kind::LogSV:
    case Kind::IterLogSV:
    case Kind::DeltaSV:
    case Kind::SubLogSV: {
      double M = std::log1p(1.0 / q);
      double Mp = -1.0 / (q * (1.0 + q));
      return tau_prime(M) * Mp;
    }
    default: throw CapabilityError("phi_prime: no closed form");
  }
}

double ImmigrationMechanism::phi_second(double q) const {
  if (q <= 0.0) throw std::domain_error("phi_second: q must be > 0");
  switch (kind) {
    case Kind::Drift: return 0.0;
    case Kind::Stable:
      return dprime * beta_index * (beta_index - 1.0) * std::pow(q, beta_index - 2.0);
    case Kind::ExpTail: {
      double s = 1.0 + q;
      return -2.0 / (s * s * s);
    }
    case Kind::LogSV:
    case Kind::IterLogSV:
    case Kind::DeltaSV:
    case Kind::SubLogSV: {
      double M = std::log1p(1.0 / q);
      double Mp = -1.0 / (q * (1.0 + q));
      double Mpp = (2.0 * q + 1.0) / (q * q * (1.0 + q) * (1.0 + q));
      return tau_second(M) * Mp * Mp + tau_prime(M) * Mpp;
    }
    default: throw CapabilityError("phi_second: no closed form");
  }
}

double ImmigrationMechanism::phi_inverse(double y) const {
  if (y < 0.0) throw std::domain_error("phi_inverse: y must be >= 0");
  if (y == 0.0) return 0.0;
  switch (kind) {
    case Kind::Drift:
      if (beta <= 0.0) throw std::domain_error("phi_inverse: zero mechanism has no inverse");
      return y / beta;
    case Kind::Stable: return std::pow(y / dprime, 1.0 / beta_index);
    case Kind::ExpTail:
      if (y >= 1.0) throw std::domain_error("phi_inverse: y above sup Phi");
      return y / (1.0 - y);
    case Kind::LogSV:
    case Kind::IterLogSV:
    case Kind::DeltaSV:
    case Kind::SubLogSV: {
      if (y >= tau(tau_clamp_L)) throw std::domain_error("phi_inverse: y above sup Phi");
      double L = tau_inverse(y);
      return 1.0 / std::expm1(L);
    }
    default: {
      // monotone bracket + multiplicative bisection
      auto f = [this](double q) { return phi(q); };
      double lo = 1e-300, hi = 1e300;
      if (f(hi) < y) throw std::domain_error("phi_inverse: y above sup Phi");
      double q = bisect_increasing(f, y, lo, hi, 220);
      return q;
    }
  }
}

double ImmigrationMechanism::phi_of_exp_neg(double x) const {
  if (has_tau) return tau(x + std::log1p(std::exp(-std::min(x, 700.0))));
  switch (kind) {
    case Kind::Drift: return beta * std::exp(-x);
    case Kind::Stable: return dprime * std::exp(-beta_index * x);
    case Kind::ExpTail: {
      double e = std::exp(-x);
      return e / (1.0 + e);
    }
    default:
      if (x > 700.0) return 0.0;
      return phi(std::exp(-x));
  }
}

// ---------------------------------------------------------------------------
// free operations

double psi_eval(const BranchingMechanism& mech, double q) { return mech.psi(q); }
double phi_eval(const ImmigrationMechanism& mech, double q) { return mech.phi(q); }
double phi_inverse(const ImmigrationMechanism& mech, double y) { return mech.phi_inverse(y); }

double nu_tail(const ImmigrationMechanism& mech, double u) {
  if (u <= 0.0) throw std::domain_error("nu_tail: u must be > 0");
  if (mech.nu.is_zero()) return 0.0;
  return mech.nu.tail(u);
}

double nu_tail_inverse(const ImmigrationMechanism& mech, double p) {
  if (p <= 0.0) throw std::domain_error("nu_tail_inverse: p must be > 0");
  if (mech.nu.is_zero()) return 0.0;
  return mech.nu.tail_inverse(p);
}

RvProbe rv_index_probe(const std::function<double(double)>& f, ProbeEnd at) {
  const double lambdas[] = {2.0, 4.0, 8.0};
  std::vector<double> xs;
  if (at == ProbeEnd::Infinity) {
    for (double x = 1e2; x <= 1e8 * 1.0001; x *= 10.0) xs.push_back(x);
  } else {
    for (double x = 1e-4; x >= 1e-12 * 0.9999; x /= 10.0) xs.push_back(x);
  }
  std::vector<double> estimates;
  for (std::size_t i = xs.size() >= 3 ? xs.size() - 3 : 0; i < xs.size(); ++i) {
    double fx = f(xs[i]);
    if (!std::isfinite(fx) || fx <= 0.0) throw std::runtime_error("rv_index_probe: non-finite evaluation");
    for (double lam : lambdas) {
      double x2 = at == ProbeEnd::Infinity ? xs[i] * lam : xs[i] / lam;
      double f2 = f(x2);
      if (!std::isfinite(f2) || f2 <= 0.0) throw std::runtime_error("rv_index_probe: non-finite evaluation");
      double est = std::log(f2 / fx) / std::log(lam);
      if (at == ProbeEnd::Zero) est = -est;
      estimates.push_back(est);
    }
  }
  RvProbe probe;
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= static_cast<double>(estimates.size());
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  var /= std::max<std::size_t>(1, estimates.size() - 1);
  probe.index = mean;
  probe.dispersion = std::sqrt(var);
  probe.level = f(xs.back());
  return probe;
}

// ---------------------------------------------------------------------------
// preset registry

namespace {

double param_or(const std::map<std::string, double>& params, const std::string& key,
                double fallback, bool required = false) {
  auto it = params.find(key);
  if (it == params.end()) {
    if (required) throw std::invalid_argument("missing parameter '" + key + "'");
    return fallback;
  }
  return it->second;
}

}  // namespace

std::vector<PresetInfo> immigration_preset_catalogue() {
  return {
      {"log_immigration", "c", "Log", false},
      {"superlog_iterlog", "", "Super-log", false},
      {"superlog_delta", "delta", "Super-log", false},
      {"sublog", "", "Sub-log (no convergence)", true},
      {"stable_immigration", "dprime, beta", "none (regularly varying, index beta)", true},
      {"exp_immigration", "", "none (finite activity)", true},
      {"drift", "beta", "none (pure drift)", true},
  };
}

ImmigrationMechanism make_immigration_preset(const std::string& name,
                                             const std::map<std::string, double>& params) {
  if (name == "log_immigration") return ImmigrationMechanism::log_sv(param_or(params, "c", 1.0));
  if (name == "superlog_iterlog") return ImmigrationMechanism::iterlog_sv();
  if (name == "superlog_delta") return ImmigrationMechanism::delta_sv(param_or(params, "delta", 0.5));
  if (name == "sublog") return ImmigrationMechanism::sublog_sv();
  if (name == "stable_immigration")
    return ImmigrationMechanism::stable(param_or(params, "dprime", 1.0),
                                        param_or(params, "beta", 0.5));
  if (name == "exp_immigration") return ImmigrationMechanism::exp_tail();
  if (name == "drift") return ImmigrationMechanism::drift(param_or(params, "beta", 1.0));
  throw std::invalid_argument("unknown mechanism preset '" + name + "'");
}

BranchingMechanism make_branching_preset(const std::string& name,
                                         const std::map<std::string, double>& params) {
  if (name == "zero") return BranchingMechanism::zero();
  if (name == "linear") return BranchingMechanism::linear(param_or(params, "b", 1.0));
  if (name == "feller")
    return BranchingMechanism::feller(param_or(params, "b", 1.0),
                                      param_or(params, "sigma2", 2.0));
  if (name == "stable_branching")
    return BranchingMechanism::stable(param_or(params, "d", 1.0),
                                      param_or(params, "alpha", 1.0));
  throw std::invalid_argument("unknown mechanism preset '" + name + "'");
}

}  // namespace cbilab
