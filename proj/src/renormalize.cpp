#include "cbilab/renormalize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbilab {

namespace {

// g evaluated from the magnitude scales for the slowly varying presets;
// exact even when the raw value is far beyond double range.
double g_from_levels(const ImmigrationMechanism& phi, double t, const Magnitude& m) {
  if (m.l1 == 0.0) return 0.0;
  using K = ImmigrationMechanism::Kind;
  switch (phi.kind) {
    case K::LogSV:
      return m.l1 / (phi.c * t);
    case K::IterLogSV:
      return m.l2 / t;
    case K::DeltaSV: {
      double l1 = m.l1;
      if (std::isinf(l1)) throw std::overflow_error("g_map: delta preset value beyond range");
      return std::pow(l1, phi.delta) / (t * m.l2);
    }
    case K::SubLogSV:
      return m.l1 * m.l1 / t;
    default: {
      // 1 / (t Phi(1/y)); tau route keeps it exact for large l1
      double f = phi.has_tau ? phi.tau(m.l1) : phi.phi(1.0 / m.v);
      return f <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (t * f);
    }
  }
}

}  // namespace

RenormMap RenormMap::linear(const ImmigrationMechanism& phi, double t) {
  if (t <= 0.0) throw std::domain_error("linear map: t must be > 0");
  RenormMap map;
  map.kind = Kind::Linear;
  map.t = t;
  map.scale = phi.phi_inverse(1.0 / t);
  return map;
}

RenormMap RenormMap::g_of(const ImmigrationMechanism& phi, double t) {
  if (t <= 0.0) throw std::domain_error("g map: t must be > 0");
  RenormMap map;
  map.kind = Kind::NonlinearG;
  map.t = t;
  map.mech = std::make_shared<ImmigrationMechanism>(phi);
  return map;
}

RenormMap RenormMap::g_of_function(std::function<double(double)> F, double t) {
  if (t <= 0.0) throw std::domain_error("g map: t must be > 0");
  RenormMap map;
  map.kind = Kind::NonlinearG;
  map.t = t;
  map.F = std::move(F);
  return map;
}

RenormMap RenormMap::log_case(double c, double t) {
  if (t <= 0.0 || c <= 0.0) throw std::domain_error("log case map: need c, t > 0");
  RenormMap map;
  map.kind = Kind::LogCase;
  map.t = t;
  map.scale = c;
  return map;
}

double RenormMap::apply(const Magnitude& m) const {
  switch (kind) {
    case Kind::Linear:
      return scale * m.v;
    case Kind::LogCase:
      return m.l1 / (scale * t);
    case Kind::NonlinearG: {
      if (mech) return g_from_levels(*mech, t, m);
      if (m.v == 0.0) return 0.0;  // convention 1/0 = inf, F(inf)... g(0) = 0
      double f = F(1.0 / m.v);
      return f <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (t * f);
    }
  }
  return 0.0;
}

double g_map(const std::function<double(double)>& F, double t, double y) {
  if (t <= 0.0) throw std::domain_error("g_map: t must be > 0");
  if (y < 0.0) throw std::domain_error("g_map: y must be >= 0");
  if (y == 0.0) return 0.0;
  double f = F(1.0 / y);
  return f <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (t * f);
}

double linear_map(const ImmigrationMechanism& phi, double t, double y) {
  if (t <= 0.0) throw std::domain_error("linear_map: t must be > 0");
  return phi.phi_inverse(1.0 / t) * y;
}

RenormalizedSamples apply_to_ensemble(const RenormMap& map,
                                      const std::vector<PathSample>& paths,
                                      std::span<const double> s_grid) {
  RenormalizedSamples out;
  out.s_grid.assign(s_grid.begin(), s_grid.end());
  out.by_s.assign(s_grid.size(), {});
  for (auto& v : out.by_s) v.reserve(paths.size());
  out.joint.reserve(paths.size());
  for (const PathSample& p : paths) {
    std::vector<double> tuple(s_grid.size());
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      double target = s_grid[k] * map.t;
      if (p.times.empty() || p.times.back() < target * (1.0 - 1e-12) ||
          p.times.front() > target * (1.0 + 1e-12))
        throw std::domain_error("apply_to_ensemble: path does not cover s*t");
      // cadlag evaluation at the largest grid time <= s*t
      std::size_t idx = 0;
      for (std::size_t i = 0; i < p.times.size(); ++i) {
        if (p.times[i] <= target * (1.0 + 1e-12)) idx = i;
      }
      double value = map.apply(p.at(idx));
      out.by_s[k].push_back(value);
      tuple[k] = value;
    }
    out.joint.push_back(std::move(tuple));
  }
  return out;
}

}  // namespace cbilab
