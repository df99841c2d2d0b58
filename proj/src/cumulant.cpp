#include "cbilab/cumulant.hpp"

#include <algorithm>
#include <cmath>

#include "cbilab/quadrature.hpp"

namespace cbilab {

namespace {

constexpr double kGenericHorizonCap = 1e4;

// Dormand-Prince 5(4) coefficients.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                 B5 = -2187.0 / 6784, B6 = 11.0 / 84;
constexpr double E1 = 5179.0 / 57600, E3 = 7571.0 / 16695, E4 = 393.0 / 640,
                 E5 = -92097.0 / 339200, E6 = 187.0 / 2100, E7 = 1.0 / 40;

struct State {
  double v;
  double integral;
};

// Integrates dv/dt = -Psi(v), dI/dt = g(v) with embedded error control on
// both components.
template <typename Rhs, typename OnStep>
SolverStats dopri5(const Rhs& g_of_v, const BranchingMechanism& psi, State& y,
                   double t_end, double tol, const OnStep& on_step) {
  SolverStats stats;
  double t = 0.0;
  double h = std::min(t_end, 0.01 * (t_end > 0 ? t_end : 1.0));
  if (h <= 0.0) return stats;
  auto f = [&](const State& s) {
    return State{-psi.psi(std::max(s.v, 0.0)), g_of_v(std::max(s.v, 0.0))};
  };
  State k1 = f(y);
  while (t < t_end) {
    double remaining = t_end - t;
    if (remaining <= 1e-14 * t_end) break;
    h = std::min(h, remaining);
    if (h < 1e-14 * std::max(1e-6, remaining)) {
      throw SolverError("cumulant solver: step underflow at t=" + std::to_string(t) +
                        ", v=" + std::to_string(y.v));
    }
    auto axpy = [&](std::initializer_list<std::pair<double, const State*>> terms) {
      State s = y;
      for (auto& [a, k] : terms) {
        s.v += h * a * k->v;
        s.integral += h * a * k->integral;
      }
      return s;
    };
    State k2 = f(axpy({{A21, &k1}}));
    State k3 = f(axpy({{A31, &k1}, {A32, &k2}}));
    State k4 = f(axpy({{A41, &k1}, {A42, &k2}, {A43, &k3}}));
    State k5 = f(axpy({{A51, &k1}, {A52, &k2}, {A53, &k3}, {A54, &k4}}));
    State k6 = f(axpy({{A61, &k1}, {A62, &k2}, {A63, &k3}, {A64, &k4}, {A65, &k5}}));
    State y5 = axpy({{B1, &k1}, {B3, &k3}, {B4, &k4}, {B5, &k5}, {B6, &k6}});
    State k7 = f(y5);
    State y4 = axpy({{E1, &k1}, {E3, &k3}, {E4, &k4}, {E5, &k5}, {E6, &k6}});
    y4.v += h * E7 * k7.v;
    y4.integral += h * E7 * k7.integral;

    double err_v = std::abs(y5.v - y4.v) / (tol + tol * std::abs(y5.v));
    double err_i = std::abs(y5.integral - y4.integral) / (tol + tol * std::abs(y5.integral));
    double err = std::max(err_v, err_i);
    if (err <= 1.0) {
      t += h;
      y = y5;
      y.v = std::max(y.v, 0.0);
      k1 = k7;  // FSAL
      ++stats.steps_accepted;
      stats.max_local_error = std::max(stats.max_local_error, err * tol);
      on_step(t, y);
    } else {
      ++stats.steps_rejected;
    }
    double factor = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    h *= std::clamp(factor, 0.2, 5.0);
  }
  return stats;
}

bool phi_integral_closed(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                         double lambda, double t, double* out) {
  // ∫_0^t Phi(v_s(lambda)) ds in closed form for the preset combinations the
  // long-horizon checks need.
  using BK = BranchingMechanism::Kind;
  using IK = ImmigrationMechanism::Kind;
  if (lambda == 0.0) {
    *out = 0.0;
    return true;
  }
  if (psi.kind == BK::Zero) {
    *out = t * phi.phi(lambda);
    return true;
  }
  bool phi_power = phi.kind == IK::Stable || phi.kind == IK::Drift;
  if (!phi_power) return false;
  double dp = phi.kind == IK::Drift ? phi.beta : phi.dprime;
  double bi = phi.kind == IK::Drift ? 1.0 : phi.beta_index;
  if (psi.kind == BK::Linear) {
    if (psi.b == 0.0) {
      *out = t * dp * std::pow(lambda, bi);
      return true;
    }
    // ∫ d' (lambda e^{-bu})^bi du
    *out = dp * std::pow(lambda, bi) * -std::expm1(-bi * psi.b * t) / (bi * psi.b);
    return true;
  }
  if (psi.kind == BK::Stable || (psi.kind == BK::Feller && psi.b == 0.0)) {
    double alpha = psi.kind == BK::Stable ? psi.alpha : 1.0;
    double d = psi.kind == BK::Stable ? psi.d : 0.5 * psi.sigma2;
    if (d == 0.0) {
      *out = t * dp * std::pow(lambda, bi);
      return true;
    }
    // v_u = (lambda^{-alpha} + alpha d u)^{-1/alpha}; ∫ d' v_u^bi du
    double A = std::pow(lambda, -alpha);
    double B = alpha * d;
    double r = bi / alpha;
    if (std::abs(r - 1.0) < 1e-14) {
      *out = dp / B * std::log1p(B * t / A);
    } else {
      *out = dp / (B * (1.0 - r)) * (std::pow(A + B * t, 1.0 - r) - std::pow(A, 1.0 - r));
    }
    return true;
  }
  return false;
}

}  // namespace

double solve_v(const BranchingMechanism& psi, double lambda, double t, double tol,
               VRoute route) {
  if (lambda < 0.0 || t < 0.0) throw std::domain_error("solve_v: negative argument");
  if (t == 0.0 || lambda == 0.0) return lambda;
  bool closed = route == VRoute::Closed ||
                (route == VRoute::Auto && psi.has_closed_v());
  if (closed) {
    if (!psi.has_closed_v()) throw CapabilityError("solve_v: no closed form");
    return psi.v_closed(lambda, t);
  }
  if (t > kGenericHorizonCap) {
    throw SolverError("solve_v: the numeric route is capped at t <= 1e4");
  }
  State y{lambda, 0.0};
  dopri5([](double) { return 0.0; }, psi, y, t, tol, [](double, const State&) {});
  return y.v;
}

CumulantSolution solve_v_path(const BranchingMechanism& psi, double lambda, double t,
                              const ImmigrationMechanism* phi_for_integral, double tol) {
  if (lambda < 0.0 || t < 0.0) throw std::domain_error("solve_v_path: negative argument");
  CumulantSolution sol;
  sol.lambda = lambda;
  sol.horizon = t;
  sol.values.emplace_back(0.0, lambda);
  if (t == 0.0) return sol;
  State y{lambda, 0.0};
  auto g = [phi_for_integral](double v) {
    return phi_for_integral ? phi_for_integral->phi(v) : 0.0;
  };
  sol.stats = dopri5(g, psi, y, t, tol, [&sol](double s, const State& st) {
    sol.values.emplace_back(s, st.v);
  });
  sol.integral_phi = y.integral;
  return sol;
}

double laplace_cbi(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                   double x0, double t, double lambda, double tol, VRoute route) {
  if (x0 < 0.0 || t < 0.0 || lambda < 0.0)
    throw std::domain_error("laplace_cbi: negative argument");
  if (lambda == 0.0) return 1.0;
  if (t == 0.0) return std::exp(-lambda * x0);

  double v_t, integral;
  bool want_closed = route != VRoute::Numeric && psi.has_closed_v();
  if (want_closed) {
    v_t = psi.v_closed(lambda, t);
    if (!phi_integral_closed(psi, phi, lambda, t, &integral)) {
      // closed v, adaptive quadrature of the smooth map s -> Phi(v_s)
      integral = integrate(
          [&](double s) { return phi.phi(psi.v_closed(lambda, s)); }, 0.0, t,
          std::min(tol, 1e-9), tol * 0.1);
    }
  } else {
    if (t > kGenericHorizonCap)
      throw SolverError("laplace_cbi: generic route capped at t <= 1e4");
    State y{lambda, 0.0};
    dopri5([&phi](double v) { return phi.phi(v); }, psi, y, t,
           std::min(tol, 1e-10), [](double, const State&) {});
    v_t = y.v;
    integral = y.integral;
  }
  return std::exp(-x0 * v_t - integral);
}

double limit_laplace_prop1(double alpha, double beta, double d, double dprime,
                           double s, double lambda) {
  if (!(beta > 0.0 && beta <= alpha && alpha <= 1.0))
    throw std::domain_error("limit_laplace_prop1: need 0 < beta <= alpha <= 1");
  if (d < 0.0 || dprime <= 0.0)
    throw std::domain_error("limit_laplace_prop1: need d >= 0, d' > 0");
  if (lambda < 0.0 || s < 0.0)
    throw std::domain_error("limit_laplace_prop1: negative argument");
  if (lambda == 0.0 || s == 0.0) return 1.0;
  if (beta < alpha || d == 0.0) {
    // subordinator limit, PhiBar(x) = x^beta
    return std::exp(-s * std::pow(lambda, beta));
  }
  BranchingMechanism psi_bar = BranchingMechanism::stable(d / dprime, alpha);
  ImmigrationMechanism phi_bar = ImmigrationMechanism::stable(1.0, alpha);
  return laplace_cbi(psi_bar, phi_bar, 0.0, s, lambda, 1e-10, VRoute::Auto);
}

}  // namespace cbilab
