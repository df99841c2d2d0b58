#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cbilab/quadrature.hpp"

using namespace cbilab;

namespace {

// independent scheme for cross-checks: recursive adaptive Simpson
double simpson_rec(const Integrand& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth > 60 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1);
}

double adaptive_simpson(const Integrand& f, double a, double b, double tol) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 0);
}

}  // namespace

TEST_CASE("smooth definite integrals") {
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate([](double x) { return x * x; }, 0.0, 3.0) == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("positive axis handles endpoint singularity and exponential decay") {
  double v = integrate_positive_axis([](double x) { return x <= 1.0 ? 1.0 / std::sqrt(x) : 0.0; });
  CHECK(v == doctest::Approx(2.0).epsilon(1e-7));
  double e = integrate_positive_axis([](double x) { return std::exp(-x); });
  CHECK(e == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("agrees with an independent adaptive Simpson oracle") {
  // ∫_0^inf (e^{-u} - 1 + u) e^{-u} du = 1/2
  auto f = [](double u) { return (std::exp(-u) - 1.0 + u) * std::exp(-u); };
  double gk = integrate_positive_axis(f, 1e-10);
  double simpson = adaptive_simpson(f, 1e-12, 60.0, 1e-12);
  CHECK(gk == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(gk == doctest::Approx(simpson).epsilon(1e-8));
}

TEST_CASE("divergent integrand raises") {
  CHECK_THROWS_AS(integrate([](double x) { return 1.0 / x; }, 0.0, 1.0), std::runtime_error);
}

TEST_CASE("error estimate is reported") {
  auto res = integrate_adaptive([](double x) { return std::exp(-x * x); }, -8.0, 8.0, 1e-12);
  CHECK(res.value == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-11));
  CHECK(res.abs_error >= 0.0);
}
