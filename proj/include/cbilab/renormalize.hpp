#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "cbilab/mechanisms.hpp"
#include "cbilab/sampling.hpp"

namespace cbilab {

// Space maps applied to path values at rescaled times s*t:
//   linear:      y -> Phi^{-1}(1/t) * y
//   nonlinear g: y -> 1 / (t F(1/y)), with the convention g(0) = 0
//   log case:    y -> ln(1+y) / (c t)
struct RenormMap {
  enum class Kind { Linear, NonlinearG, LogCase };

  Kind kind = Kind::NonlinearG;
  double t = 1.0;
  double scale = 1.0;  // linear: Phi^{-1}(1/t); log case: c
  std::shared_ptr<const ImmigrationMechanism> mech;  // preset-backed g
  std::function<double(double)> F;                   // generic increasing F

  double apply(const Magnitude& m) const;
  double apply_value(double y) const { return apply(Magnitude::from_value(y)); }

  static RenormMap linear(const ImmigrationMechanism& phi, double t);
  static RenormMap g_of(const ImmigrationMechanism& phi, double t);
  static RenormMap g_of_function(std::function<double(double)> F, double t);
  static RenormMap log_case(double c, double t);
};

double g_map(const std::function<double(double)>& F, double t, double y);
double linear_map(const ImmigrationMechanism& phi, double t, double y);

// Renormalised marginals: by_s[i][p] is the mapped value of path p at time
// s_grid[i]*t; joint[p] is the tuple across the s grid for f.d.d. checks.
struct RenormalizedSamples {
  std::vector<double> s_grid;
  std::vector<std::vector<double>> by_s;
  std::vector<std::vector<double>> joint;
};

RenormalizedSamples apply_to_ensemble(const RenormMap& map,
                                      const std::vector<PathSample>& paths,
                                      std::span<const double> s_grid);

}  // namespace cbilab
