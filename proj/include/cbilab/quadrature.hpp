#pragma once

#include <functional>

namespace cbilab {

using Integrand = std::function<double(double)>;

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
};

// Adaptive quadrature on [a, b] with an embedded 15/7-point Gauss pair
// per panel and bisection of the worst panel. Throws std::runtime_error
// when the panel budget is exhausted before the tolerance is met, which
// is how divergent Levy integrals surface.
QuadResult integrate_adaptive(const Integrand& f, double a, double b,
                              double rel_tol = 1e-10, double abs_tol = 0.0,
                              int max_panels = 4000);

double integrate(const Integrand& f, double a, double b,
                 double rel_tol = 1e-10, double abs_tol = 0.0);

// Fixed composite 15-point Gauss rule: deterministic, jitter-free, suited to
// smooth inner integrands of nested quadratures.
double integrate_fixed(const Integrand& f, double a, double b, int subpanels = 8);

// Integral of f over (0, inf) via the substitution x = e^u with panels
// extended outward until their relative contribution is negligible.
// Handles integrable power singularities at 0 and fast decay at infinity.
double integrate_positive_axis(const Integrand& f, double rel_tol = 1e-9,
                               double x_lo = 1e-16, double x_hi = 1e16);

}  // namespace cbilab
