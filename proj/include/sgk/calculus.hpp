#pragma once

// Discrete analysis on G_N:
//
//   Delta_N f(x)      = 5^N sum_{y~x} (f(y) - f(x))              x in V_N \ V_0
//   d_N^perp f(a)     = (5/3)^N sum_{y~a} (f(a) - f(y))          a in V_0
//   E_N(f)            = (1/2) (5/3)^N sum_x sum_{y~x} (f(y) - f(x))^2
//
// The energy counts every edge twice, once per ordered pair.

#include <cstddef>
#include <functional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "sgk/gasket.hpp"

namespace sgk {

struct SiteFunction {
  int level = 0;
  std::vector<double> values;

  double operator[](SiteId x) const { return values[static_cast<std::size_t>(x)]; }
  double& operator[](SiteId x) { return values[static_cast<std::size_t>(x)]; }
  std::size_t size() const { return values.size(); }
};

// Samples a function of the planar position at every site of g.
SiteFunction sample(const GasketGraph& g, const std::function<double(Point2)>& fn);
SiteFunction constant_function(const GasketGraph& g, double value);

// Delta_N f on V_N^0; the entries at V_0 are zero.
std::vector<double> laplacian(const GasketGraph& g, const SiteFunction& f);
double normal_derivative(const GasketGraph& g, const SiteFunction& f, SiteId a);
double dirichlet_energy(const GasketGraph& g, const SiteFunction& f);
// E_N(f, h) = (E_N(f + h) - E_N(f - h)) / 4.
double energy_form(const GasketGraph& g, const SiteFunction& f, const SiteFunction& h);

struct LinearSolveOptions {
  double tolerance = 1e-12;       // relative residual for conjugate gradient
  std::size_t dense_limit = 400;  // direct Cholesky at or below this many unknowns
};

// Extends values on V_M (M = coarse.level <= g.level()) to V_N, solving
// Delta_{M'} f = 0 on V_{M'} \ V_{M'-1} for each M' = M+1, ..., N.
SiteFunction harmonic_extension(const GasketGraph& g, const SiteFunction& coarse,
                                const LinearSolveOptions& opts = {});

// Restriction to V_level (a prefix of the values).
SiteFunction restrict_to(const SiteFunction& f, const GasketGraph& g, int level);
// Restricts or harmonically extends f to g.level().
SiteFunction to_level(const GasketGraph& g, const SiteFunction& f);

// Indicator of V_{M+k} cap K_w as a level-(M+k) function (M = |w|). Its
// (M+k)-harmonic extension is 1 on K_w, 0 away from the cells adjacent to K_w,
// and harmonic in between. Requires k >= 1 and g.level() >= M + k.
SiteFunction harmonic_bump(const GasketGraph& g, const CellAddress& w, int k);

struct ResistanceSolution {
  double resistance = 0.0;
  std::vector<SiteId> sites;     // connected component that was solved
  std::vector<double> potential; // unit-current potential, grounded at the sink
};

// Effective resistance between z and z2 in the unit-conductance graph induced
// on `subset`. Throws DomainError when z and z2 are not connected.
ResistanceSolution effective_resistance_solution(const GasketGraph& g, std::span<const SiteId> subset,
                                                 SiteId z, SiteId z2,
                                                 const LinearSolveOptions& opts = {});
double effective_resistance(const GasketGraph& g, std::span<const SiteId> subset, SiteId z, SiteId z2,
                            const LinearSolveOptions& opts = {});
double effective_resistance(const GasketGraph& g, SiteId z, SiteId z2, const LinearSolveOptions& opts = {});

// Solves A x = b for a symmetric positive definite A given as (row, col, value)
// triplets (duplicates are summed).
std::vector<double> solve_spd(std::size_t n, const std::vector<std::tuple<int, int, double>>& triplets,
                              std::span<const double> rhs, const LinearSolveOptions& opts = {});

// F_t piecewise linear in t between knots, constant outside [t_0, t_last].
class FunctionPath {
 public:
  FunctionPath() = default;
  explicit FunctionPath(SiteFunction constant);
  FunctionPath(std::vector<double> times, std::vector<SiteFunction> knots);

  std::size_t num_knots() const { return knots_.size(); }
  double knot_time(std::size_t k) const { return times_[k]; }
  const SiteFunction& knot(std::size_t k) const { return knots_[k]; }
  int level() const { return knots_.front().level; }
  // Index k of the segment [t_k, t_{k+1}) containing t, clamped to the valid range.
  std::size_t segment(double t) const;
  SiteFunction value(double t) const;
  // d/dt F_t inside a segment (zero outside the knot range).
  SiteFunction derivative(double t) const;
  bool vanishes_on_boundary(double tol = 0.0) const;

 private:
  std::vector<double> times_;
  std::vector<SiteFunction> knots_;
};

}  // namespace sgk
