#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "cbilab/mechanisms.hpp"

namespace cbilab {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverStats {
  int steps_accepted = 0;
  int steps_rejected = 0;
  double max_local_error = 0.0;
};

// Numerically solved flow t -> v_t(lambda) of dv/dt = -Psi(v), v_0 = lambda,
// on the solver's accepted mesh.
struct CumulantSolution {
  double lambda = 0.0;
  double horizon = 0.0;
  std::vector<std::pair<double, double>> values;  // (t, v_t)
  double integral_phi = 0.0;                      // ∫_0^T Phi(v_s) ds when requested
  SolverStats stats;
};

enum class VRoute { Auto, Numeric, Closed };

// v_t(lambda) with local error control <= tol. Numeric route is an adaptive
// embedded Dormand-Prince pair; Auto prefers the preset closed form.
double solve_v(const BranchingMechanism& psi, double lambda, double t,
               double tol = 1e-10, VRoute route = VRoute::Auto);

// Full path with the Phi integral carried as an augmented quadrature state.
CumulantSolution solve_v_path(const BranchingMechanism& psi, double lambda, double t,
                              const ImmigrationMechanism* phi_for_integral = nullptr,
                              double tol = 1e-10);

// E_x0[e^{-lambda Y_t}] = exp(-x0 v_t(lambda) - ∫_0^t Phi(v_s(lambda)) ds).
double laplace_cbi(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                   double x0, double t, double lambda, double tol = 1e-8,
                   VRoute route = VRoute::Auto);

// Laplace transform at time s of the limiting CBI started from 0:
// PsiBar = (d/d') x^{1+alpha}, PhiBar = x^alpha when beta == alpha;
// PsiBar = 0, PhiBar = x^beta when beta < alpha.
double limit_laplace_prop1(double alpha, double beta, double d, double dprime,
                           double s, double lambda);

}  // namespace cbilab
