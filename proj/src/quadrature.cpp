#include "cbilab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace cbilab {

namespace {

struct Rule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre nodes by Newton iteration on the Legendre recurrence.
Rule gauss_legendre(int n) {
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double w = 2.0 / ((1.0 - z * z) * pp * pp);
    r.nodes[i] = -z;
    r.weights[i] = w;
    r.nodes[n - 1 - i] = z;
    r.weights[n - 1 - i] = w;
  }
  return r;
}

const Rule& rule15() {
  static const Rule r = gauss_legendre(15);
  return r;
}
const Rule& rule7() {
  static const Rule r = gauss_legendre(7);
  return r;
}

struct Panel {
  double a, b;
  double value;   // 15-point estimate
  double error;   // |15pt - 7pt|
};

Panel eval_panel(const Integrand& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double v15 = 0.0, v7 = 0.0;
  const Rule& r15 = rule15();
  const Rule& r7 = rule7();
  for (int i = 0; i < 15; ++i) v15 += r15.weights[i] * f(mid + half * r15.nodes[i]);
  for (int i = 0; i < 7; ++i) v7 += r7.weights[i] * f(mid + half * r7.nodes[i]);
  v15 *= half;
  v7 *= half;
  return Panel{a, b, v15, std::abs(v15 - v7)};
}

}  // namespace

QuadResult integrate_adaptive(const Integrand& f, double a, double b,
                              double rel_tol, double abs_tol, int max_panels) {
  QuadResult res;
  if (a == b) return res;
  auto cmp = [](const Panel& x, const Panel& y) { return x.error < y.error; };
  std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> queue(cmp);
  Panel p0 = eval_panel(f, a, b);
  res.evaluations = 22;
  double total = p0.value;
  double err = p0.error;
  queue.push(p0);
  int panels = 1;
  while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (panels >= max_panels || !std::isfinite(total)) {
      throw std::runtime_error("integrate_adaptive: failed to converge (divergent or pathological integrand)");
    }
    Panel worst = queue.top();
    queue.pop();
    double mid = 0.5 * (worst.a + worst.b);
    Panel left = eval_panel(f, worst.a, mid);
    Panel right = eval_panel(f, mid, worst.b);
    res.evaluations += 44;
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    err = std::max(err, 0.0);
    queue.push(left);
    queue.push(right);
    ++panels;
  }
  if (!std::isfinite(total)) {
    throw std::runtime_error("integrate_adaptive: integrand is not integrable on the panel");
  }
  res.value = total;
  res.abs_error = err;
  return res;
}

double integrate(const Integrand& f, double a, double b, double rel_tol, double abs_tol) {
  return integrate_adaptive(f, a, b, rel_tol, abs_tol).value;
}

double integrate_fixed(const Integrand& f, double a, double b, int subpanels) {
  const Rule& r = rule15();
  double total = 0.0;
  double h = (b - a) / subpanels;
  for (int p = 0; p < subpanels; ++p) {
    double mid = a + (p + 0.5) * h;
    double half = 0.5 * h;
    for (int i = 0; i < 15; ++i) total += r.weights[i] * f(mid + half * r.nodes[i]) * half;
  }
  return total;
}

double integrate_positive_axis(const Integrand& f, double rel_tol, double x_lo, double x_hi) {
  // integrate f(e^u) e^u du, panels of width 2 in u
  auto g = [&f](double u) {
    double x = std::exp(u);
    return f(x) * x;
  };
  const double width = 2.0;
  const double core = 20.0;  // always scanned: x in [e^-20, e^20]
  double total = 0.0;
  // middle-out so the running total supplies an absolute cushion for edge
  // panels whose integrand is pure rounding noise
  for (int k = 0; k < static_cast<int>(core / width); ++k) {
    for (int sign : {+1, -1}) {
      double a = sign > 0 ? k * width : -(k + 1) * width;
      total += integrate(g, a, a + width, rel_tol * 0.1,
                         rel_tol * 0.02 * std::abs(total));
    }
  }
  const double u_min = std::log(x_lo), u_max = std::log(x_hi);
  // extend outward until two consecutive panels are negligible
  for (int dir : {+1, -1}) {
    double edge = dir > 0 ? core : -core;
    int small_run = 0;
    while ((dir > 0 ? edge < u_max : edge > u_min) && small_run < 2) {
      double a = dir > 0 ? edge : edge - width;
      double b = a + width;
      double piece = integrate(g, a, b, rel_tol * 0.1,
                               rel_tol * 0.02 * std::abs(total));
      total += piece;
      edge += dir * width;
      small_run = (std::abs(piece) <= rel_tol * 0.1 * std::abs(total)) ? small_run + 1 : 0;
    }
  }
  return total;
}

}  // namespace cbilab
