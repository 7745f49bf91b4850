#pragma once

// Method-of-lines solver for the limit equation
//
//   d/dt rho = (2/3) Delta rho + Phi(rho)    on K \ V_0
//
// at level M. Because (3/2) Delta_M -> Delta, the operator (2/3) Delta is
// discretized as Delta_M itself; there is no separate 2/3 factor in the scheme.
//
// Boundary regimes:
//   Dirichlet  rho(a) = rho_B(a)
//   Robin      d^perp rho(a) = -r(a) (rho(a) - rho_B(a)),  r = lambda_+ + lambda_-
//   Neumann    d^perp rho(a) = 0
// Robin and Neumann are imposed by eliminating rho(a) at every stage:
//   rho(a) = [(5/3)^M sum_{y~a} rho(y) + r(a) rho_B(a)] / [2 (5/3)^M + r(a)].

#include <array>
#include <string>
#include <vector>

#include "sgk/calculus.hpp"
#include "sgk/gasket.hpp"
#include "sgk/rates.hpp"

namespace sgk {

enum class Regime { Dirichlet, Robin, Neumann };

std::string to_string(Regime r);
Regime parse_regime(const std::string& name);
// Limit regime selected by the boundary slowdown b.
Regime regime_for(double b);

struct BoundaryCondition {
  Regime regime = Regime::Dirichlet;
  std::array<double, 3> rho_B{0.5, 0.5, 0.5};
  std::array<double, 3> r{0.0, 0.0, 0.0};

  static BoundaryCondition dirichlet(std::array<double, 3> rho_B);
  static BoundaryCondition robin(std::array<double, 3> rho_B, std::array<double, 3> r);
  static BoundaryCondition neumann();
  // Throws ParameterError on inconsistent regime data.
  void validate() const;
};

struct DensityField {
  int level = 0;
  double time = 0.0;
  std::vector<double> values;
};

struct SolveOptions {
  double T = 1.0;
  // Time step; 0 selects max_stable_dt. Steps are shrunk so every record time is hit.
  double dt = 0.0;
  // States to record besides t = 0 and t = T.
  std::vector<double> record_times;
  bool record_every_step = false;
  // Stop early once sup_x |d rho / dt| falls below this (0 disables).
  double steady_tolerance = 0.0;
  // Allowed excursion outside [0, 1] before InstabilityError.
  double slack = 1e-9;
};

struct Trajectory {
  int level = 0;
  BoundaryCondition bc;
  double dt = 0.0;
  std::vector<DensityField> states;
  bool stopped_early = false;

  const DensityField& at(double t, double tol = 1e-12) const;
};

// dt <= 0.8 / (8 * 5^M + L_Phi); equals 0.1 * 5^-M when L_Phi = 0.
double max_stable_dt(int level, double lipschitz);

// Classical RK4 from rho0 (a level-M function; boundary values are replaced
// by the regime's constraint at t = 0).
Trajectory solve(const GasketGraph& g, const BoundaryCondition& bc, const ReactionFn& phi, const SiteFunction& rho0,
                 const SolveOptions& opts);

// Applies the boundary constraint of `bc` to a level-M state in place.
void apply_boundary(const GasketGraph& g, const BoundaryCondition& bc, std::vector<double>& rho);

struct WeakResidual {
  std::vector<double> times;
  std::vector<double> theta;
  double max_abs = 0.0;
};

// Discrete weak residual
//   Theta_t = S(rho_t F_t) - S(rho_0 F_0) - int_0^t [S(rho Delta_M F) + S(rho dF/ds) + S(Phi(rho) F)] ds
//             + (3^M / |V_M|) int_0^t sum_a [rho(a) d^perp F(a) + r(a) (rho(a) - rho_B(a)) F(a)] ds,
// S(g) = |V_M|^-1 sum_{V_M \ V_0} g, time integrals by the trapezoidal rule
// over the recorded states. Dirichlet requires F = 0 on V_0 (ContractError).
WeakResidual weak_residual(const GasketGraph& g, const Trajectory& traj, const FunctionPath& f, const ReactionFn& phi);

// sup over V_M of |A(t) - B(t)| at each time; B is at a finer level than A.
std::vector<double> compare_levels(const Trajectory& a, const Trajectory& b, const std::vector<double>& times);

// <f, rho>_m = |V_M|^-1 sum_x f(x) rho(x).
double pairing(const SiteFunction& f, const DensityField& rho);

}  // namespace sgk
