#pragma once

#include <cmath>
#include <limits>

namespace cbilab {

// A nonnegative quantity tracked on three scales at once:
//   v  = x            (saturates to +inf past double range)
//   l1 = ln(1 + x)    (+inf once l1 itself exceeds double range)
//   l2 = ln(1 + l1)   (finite for everything this library produces)
// Heavy-tailed immigration puts jump sizes far beyond double range; the
// renormalisation maps only ever consume ln(1+x) or ln(1+ln(1+x)), so a
// path value is carried at whichever depth is still representable. The
// coarser scales are exact up to corrections below double precision
// whenever the finer scale has overflowed (the overflow threshold alone
// makes e^{-l1} resp. e^{-l2} corrections vanish).
struct Magnitude {
  double v = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;

  static Magnitude from_value(double x) {
    Magnitude m;
    m.v = x;
    m.l1 = std::log1p(x);
    m.l2 = std::log1p(m.l1);
    return m;
  }

  static Magnitude from_l1(double l1) {
    Magnitude m;
    m.l1 = l1;
    m.v = std::expm1(l1);  // +inf past ~709, as intended
    m.l2 = std::log1p(l1);
    return m;
  }

  static Magnitude from_l2(double l2) {
    Magnitude m;
    m.l2 = l2;
    m.l1 = std::expm1(l2);
    m.v = std::isinf(m.l1) ? std::numeric_limits<double>::infinity() : std::expm1(m.l1);
    return m;
  }

  bool finite_value() const { return std::isfinite(v); }

  // x -> x * e^{-drop}. Negative drop grows the value.
  Magnitude decayed(double drop) const {
    if (drop == 0.0 || (v == 0.0 && l1 == 0.0)) return *this;
    if (std::isinf(l1)) return *this;  // l2 scale: shift invisible below precision
    if (std::isfinite(v)) {
      double nv = v * std::exp(-drop);
      if (std::isfinite(nv)) return from_value(nv);
    }
    // log-domain: ln x = l1 + ln(1 - e^{-l1})
    double lx = (std::isfinite(v) && v > 0.0) ? std::log(v) : l1 + std::log1p(-std::exp(-l1));
    double nlx = lx - drop;
    if (nlx < 700.0) return from_value(std::exp(nlx));
    return from_l1(nlx + std::log1p(std::exp(-nlx)));
  }
};

// Order-independent sum of a drift part and many Magnitudes, reconstructed
// at the coarsest still-exact scale.
struct MagnitudeSum {
  double base = 0.0;
  double sum_v = 0.0;
  long long count = 0;
  double m1 = -std::numeric_limits<double>::infinity();
  double r1 = 0.0;  // sum of exp(l1_i - m1) over finite-l1 terms
  bool l1_overflow = false;
  double m2 = -std::numeric_limits<double>::infinity();

  void add_base(double x) { base += x; }

  void add(const Magnitude& m) {
    ++count;
    sum_v += m.v;  // saturates naturally
    if (std::isinf(m.l1)) {
      l1_overflow = true;
    } else if (m.l1 > m1) {
      r1 = r1 * std::exp(m1 - m.l1) + 1.0;
      m1 = m.l1;
    } else {
      r1 += std::exp(m.l1 - m1);
    }
    if (m.l2 > m2) m2 = m.l2;
  }

  Magnitude total() const {
    double v = base + sum_v;
    if (std::isfinite(v)) return Magnitude::from_value(v);
    if (!l1_overflow) {
      // 1 + Y = sum_i e^{l1_i} + (1 + base - n); the additive correction is
      // dead because m1 >= ~709 here.
      double l1 = m1 + std::log(r1);
      Magnitude m;
      m.v = std::numeric_limits<double>::infinity();
      m.l1 = l1;
      m.l2 = std::log1p(l1);
      return m;
    }
    Magnitude m;
    m.v = std::numeric_limits<double>::infinity();
    m.l1 = std::numeric_limits<double>::infinity();
    m.l2 = m2;
    return m;
  }
};

}  // namespace cbilab
