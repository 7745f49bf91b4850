#include <doctest.h>

#include <cmath>

#include "sgk/errors.hpp"
#include "sgk/harness.hpp"
#include "sgk/pde.hpp"
#include "sgk/profile.hpp"

using namespace sgk;

namespace {

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace

TEST_CASE("regimes") {
  CHECK(regime_for(1.0) == Regime::Dirichlet);
  CHECK(regime_for(5.0 / 3.0) == Regime::Robin);
  CHECK(regime_for(3.0) == Regime::Neumann);
  CHECK(parse_regime(to_string(Regime::Robin)) == Regime::Robin);
  CHECK_THROWS_AS(parse_regime("periodic"), ConfigError);
  auto bc = BoundaryCondition::neumann();
  bc.r = {1.0, 0.0, 0.0};
  CHECK_THROWS_AS(bc.validate(), ParameterError);
  CHECK_THROWS_AS(BoundaryCondition::dirichlet({1.5, 0.0, 0.0}).validate(), ParameterError);
}

TEST_CASE("stability bound") {
  CHECK(max_stable_dt(3, 0.0) == doctest::Approx(0.1 / 125.0));
  const auto g = build(2);
  SolveOptions opts;
  opts.T = 0.01;
  opts.dt = 2.0 * max_stable_dt(2, 0.0);
  CHECK_THROWS_AS(solve(g, BoundaryCondition::dirichlet({0.5, 0.5, 0.5}), ReactionFn::zero(),
                        constant_function(g, 0.5), opts),
                  ParameterError);
  opts.dt = 0.0;
  CHECK_THROWS_AS(solve(build(0), BoundaryCondition::neumann(), ReactionFn::zero(), SiteFunction{0, {0.5, 0.5, 0.5}},
                        opts),
                  ParameterError);
}

TEST_CASE("Dirichlet steady state is the harmonic extension") {
  const int m = 3;
  const auto g = build(m);
  const std::array<double, 3> rho_B{0.8, 0.2, 0.5};
  SolveOptions opts;
  opts.T = 20.0;
  opts.steady_tolerance = 1e-10;
  const auto traj = solve(g, BoundaryCondition::dirichlet(rho_B), ReactionFn::zero(), constant_function(g, 0.3), opts);
  const auto h = harmonic_extension(g, SiteFunction{0, {rho_B[0], rho_B[1], rho_B[2]}});
  CHECK(traj.stopped_early);
  CHECK(sup_diff(traj.states.back().values, h.values) <= 1e-8);
}

TEST_CASE("uniform Neumann solution follows the logistic ODE") {
  // Constant family: Phi(rho) = 1 - 2 rho, so rho_t = 1/2 - 0.3 e^{-2t} from rho_0 = 0.2.
  const auto g = build(3);
  const auto phi = make_reaction(RateFamily::constant(1.0), 3);
  SolveOptions opts;
  opts.T = 1.0;
  opts.record_times = {0.25, 0.5, 0.75};
  const auto traj = solve(g, BoundaryCondition::neumann(), phi, constant_function(g, 0.2), opts);
  for (const auto& s : traj.states) {
    const double exact = 0.5 - 0.3 * std::exp(-2.0 * s.time);
    for (double v : s.values) CHECK(std::abs(v - exact) <= 1e-6);
  }
  CHECK(traj.states.size() == 5);
}

TEST_CASE("Neumann without reaction conserves the interior mass") {
  const auto g = build(3);
  SolveOptions opts;
  opts.T = 0.2;
  opts.record_every_step = true;
  const auto rho0 = Profile::parse("affine:0.2,0.5,0.1").density(g);
  const auto traj = solve(g, BoundaryCondition::neumann(), ReactionFn::zero(), rho0, opts);
  auto interior_sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 3; i < v.size(); ++i) s += v[i];
    return s;
  };
  const double m0 = interior_sum(traj.states.front().values);
  for (const auto& s : traj.states) CHECK(std::abs(interior_sum(s.values) - m0) <= 1e-11);
}

TEST_CASE("Robin elimination satisfies the discrete Robin condition") {
  const int m = 3;
  const auto g = build(m);
  const auto bc = BoundaryCondition::robin({0.9, 0.1, 0.4}, {2.0, 5.0, 0.5});
  SolveOptions opts;
  opts.T = 0.05;
  const auto traj = solve(g, bc, make_reaction(RateFamily::dfl(0.4), m), constant_function(g, 0.3), opts);
  const SiteFunction last{m, traj.states.back().values};
  for (SiteId a : GasketGraph::boundary()) {
    const auto i = static_cast<std::size_t>(a);
    CHECK(std::abs(normal_derivative(g, last, a) + bc.r[i] * (last[a] - bc.rho_B[i])) <= 1e-10);
  }
}

TEST_CASE("densities stay in [0, 1]") {
  const int m = 3;
  const auto g = build(m);
  for (const auto& family : {RateFamily::dfl(0.9), RateFamily::ising(1.0), RateFamily::constant(3.0)}) {
    const auto phi = make_reaction(family, m);
    for (auto bc : {BoundaryCondition::dirichlet({1.0, 0.0, 1.0}), BoundaryCondition::robin({1.0, 0.0, 0.5}, {50, 50, 50}),
                    BoundaryCondition::neumann()}) {
      SolveOptions opts;
      opts.T = 0.3;
      opts.record_every_step = true;
      opts.slack = 0.0;
      const auto traj = solve(g, bc, phi, Profile::parse("affine:0,1,0").density(g), opts);
      for (const auto& s : traj.states) {
        for (double v : s.values) CHECK((v >= 0.0 && v <= 1.0));
      }
    }
  }
}

TEST_CASE("RK4 is fourth order") {
  const int m = 2;
  const auto g = build(m);
  const auto phi = make_reaction(RateFamily::dfl(0.4), m);
  const auto bc = BoundaryCondition::dirichlet({0.8, 0.2, 0.5});
  const auto rho0 = Profile::parse("affine:0.3,0.2,0.1").density(g);
  auto final_state = [&](double dt) {
    SolveOptions opts;
    opts.T = 0.02;
    opts.dt = dt;
    return solve(g, bc, phi, rho0, opts).states.back().values;
  };
  const double base = max_stable_dt(m, phi.lipschitz());
  const auto ref = final_state(base / 256.0);
  const double e1 = sup_diff(final_state(base / 2.0), ref);
  const double e2 = sup_diff(final_state(base / 4.0), ref);
  CHECK(std::log2(e1 / e2) >= 3.5);
}

TEST_CASE("weak residual vanishes at second order in dt") {
  // The solution is exact up to RK4 error; what remains is the trapezoidal
  // quadrature of the time integral, which is O(dt^2).
  const int m = 3;
  const auto g = build(m);
  const auto phi = make_reaction(RateFamily::dfl(0.4), m);
  const auto rho0 = constant_function(g, 0.3);
  const auto bump = to_level(g, harmonic_bump(g, CellAddress::parse("01"), 1));
  const auto x = sample(g, [](Point2 p) { return p.x; });
  const double base = max_stable_dt(m, phi.lipschitz());

  struct Case {
    BoundaryCondition bc;
    FunctionPath f;
  };
  const std::vector<Case> cases{
      {BoundaryCondition::dirichlet({0.8, 0.2, 0.5}), FunctionPath(bump)},
      {BoundaryCondition::robin({0.8, 0.2, 0.5}, {3.0, 1.0, 2.0}), FunctionPath(x)},
      {BoundaryCondition::neumann(), FunctionPath({0.0, 0.05}, {x, bump})},
  };
  for (const auto& c : cases) {
    double prev = 0.0;
    for (double scale : {1.0, 0.5}) {
      SolveOptions opts;
      opts.T = 0.05;
      opts.dt = base * scale;
      opts.record_every_step = true;
      const double r = weak_residual(g, solve(g, c.bc, phi, rho0, opts), c.f, phi).max_abs;
      CHECK(r <= 2e-5);
      if (scale < 1.0) CHECK(prev / r == doctest::Approx(4.0).epsilon(0.1));
      prev = r;
    }
  }

  SolveOptions opts;
  opts.T = 0.01;
  const auto traj = solve(g, BoundaryCondition::dirichlet({0.8, 0.2, 0.5}), phi, rho0, opts);
  CHECK_THROWS_AS(weak_residual(g, traj, FunctionPath(constant_function(g, 1.0)), phi), ContractError);
}

TEST_CASE("level comparison and pairing") {
  const auto bc = BoundaryCondition::dirichlet({0.8, 0.2, 0.5});
  SolveOptions opts;
  opts.T = 0.1;
  opts.record_times = {0.05};
  const auto phi = make_reaction(RateFamily::dfl(0.4), 4);
  const auto ga = build(3);
  const auto gb = build(4);
  const auto a = solve(ga, bc, phi, constant_function(ga, 0.3), opts);
  const auto b = solve(gb, bc, phi, constant_function(gb, 0.3), opts);
  const auto d = compare_levels(a, b, {0.05, 0.1});
  CHECK(d.size() == 2);
  for (double v : d) CHECK(v < 0.1);
  CHECK_THROWS_AS(compare_levels(b, a, {0.1}), ContractError);
  CHECK(pairing(constant_function(gb, 1.0), b.at(0.0)) == doctest::Approx((0.8 + 0.2 + 0.5 + 0.3 * (gb.num_sites() - 3)) / gb.num_sites()));
  CHECK_THROWS_AS(b.at(0.07), DomainError);
}
