#include "sgk/pde.hpp"

#include <algorithm>
#include <cmath>

#include "sgk/errors.hpp"

namespace sgk {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Dirichlet:
      return "dirichlet";
    case Regime::Robin:
      return "robin";
    case Regime::Neumann:
      return "neumann";
  }
  return "unknown";
}

Regime parse_regime(const std::string& name) {
  if (name == "dirichlet") return Regime::Dirichlet;
  if (name == "robin") return Regime::Robin;
  if (name == "neumann") return Regime::Neumann;
  throw ConfigError("unknown boundary regime '" + name + "'");
}

Regime regime_for(double b) {
  constexpr double critical = 5.0 / 3.0;
  if (std::abs(b - critical) <= 1e-9) return Regime::Robin;
  return b < critical ? Regime::Dirichlet : Regime::Neumann;
}

BoundaryCondition BoundaryCondition::dirichlet(std::array<double, 3> rho_B) {
  return {Regime::Dirichlet, rho_B, {0.0, 0.0, 0.0}};
}

BoundaryCondition BoundaryCondition::robin(std::array<double, 3> rho_B, std::array<double, 3> r) {
  return {Regime::Robin, rho_B, r};
}

BoundaryCondition BoundaryCondition::neumann() { return {Regime::Neumann, {0.5, 0.5, 0.5}, {0.0, 0.0, 0.0}}; }

void BoundaryCondition::validate() const {
  for (std::size_t a = 0; a < 3; ++a) {
    if (regime != Regime::Neumann && !(rho_B[a] >= 0.0 && rho_B[a] <= 1.0)) {
      throw ParameterError("boundary density must lie in [0, 1]");
    }
    if (regime == Regime::Robin && !(r[a] >= 0.0 && std::isfinite(r[a]))) {
      throw ParameterError("Robin coefficient must be finite and >= 0");
    }
    if (regime == Regime::Neumann && r[a] != 0.0) throw ParameterError("Neumann condition requires r = 0");
  }
}

const DensityField& Trajectory::at(double t, double tol) const {
  for (const auto& s : states) {
    if (std::abs(s.time - t) <= tol) return s;
  }
  throw DomainError("trajectory has no state recorded at t = " + std::to_string(t));
}

double max_stable_dt(int level, double lipschitz) { return 0.8 / (8.0 * std::pow(5.0, level) + lipschitz); }

void apply_boundary(const GasketGraph& g, const BoundaryCondition& bc, std::vector<double>& rho) {
  if (bc.regime == Regime::Dirichlet) {
    for (std::size_t a = 0; a < 3; ++a) rho[a] = bc.rho_B[a];
    return;
  }
  const double k = std::pow(5.0 / 3.0, g.level());
  for (SiteId a : GasketGraph::boundary()) {
    const auto i = static_cast<std::size_t>(a);
    double sum = 0.0;
    for (auto y : g.neighbors(a)) sum += rho[static_cast<std::size_t>(y)];
    rho[i] = (k * sum + bc.r[i] * bc.rho_B[i]) / (2.0 * k + bc.r[i]);
  }
}

namespace {

void derivative(const GasketGraph& g, const ReactionFn& phi, const std::vector<double>& rho, std::vector<double>& out) {
  const double scale = std::pow(5.0, g.level());
  out[0] = out[1] = out[2] = 0.0;
  for (std::size_t i = 3; i < rho.size(); ++i) {
    double acc = 0.0;
    for (auto y : g.neighbors(static_cast<SiteId>(i))) acc += rho[static_cast<std::size_t>(y)];
    acc -= 4.0 * rho[i];
    out[i] = scale * acc + phi(rho[i]);
  }
}

void check_range(const std::vector<double>& rho, double slack, double t) {
  for (double v : rho) {
    if (!(v >= -slack && v <= 1.0 + slack)) {
      throw InstabilityError("density left [0, 1] (value " + std::to_string(v) + " at t = " + std::to_string(t) + ")");
    }
  }
}

}  // namespace

Trajectory solve(const GasketGraph& g, const BoundaryCondition& bc, const ReactionFn& phi, const SiteFunction& rho0,
                 const SolveOptions& opts) {
  bc.validate();
  const int m = g.level();
  if (rho0.values.size() != g.num_sites()) throw DomainError("initial density is not at the solver level");
  if (bc.regime != Regime::Dirichlet && m < 1) throw ParameterError("Robin and Neumann conditions need M >= 1");
  if (!(opts.T > 0.0)) throw ParameterError("final time must be positive");
  const double dt_max = max_stable_dt(m, phi.lipschitz());
  if (opts.dt > dt_max * (1.0 + 1e-12)) {
    throw ParameterError("time step " + std::to_string(opts.dt) + " exceeds the stability bound " +
                         std::to_string(dt_max));
  }
  if (opts.dt < 0.0) throw ParameterError("time step must be positive");
  const double dt = opts.dt > 0.0 ? opts.dt : dt_max;
  for (double v : rho0.values) {
    if (!(v >= -opts.slack && v <= 1.0 + opts.slack)) throw DomainError("initial density must lie in [0, 1]");
  }

  std::vector<double> stops;
  for (double t : opts.record_times) {
    if (t > 0.0 && t < opts.T) stops.push_back(t);
  }
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  stops.push_back(opts.T);

  Trajectory traj;
  traj.level = m;
  traj.bc = bc;
  traj.dt = dt;
  std::vector<double> y = rho0.values;
  apply_boundary(g, bc, y);
  traj.states.push_back({m, 0.0, y});

  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  double t = 0.0;
  for (double stop : stops) {
    const double len = stop - t;
    const auto steps = static_cast<std::int64_t>(std::max(1.0, std::ceil(len / dt - 1e-9)));
    const double h = len / static_cast<double>(steps);
    const double t_start = t;
    for (std::int64_t s = 0; s < steps; ++s) {
      derivative(g, phi, y, k1);
      if (opts.steady_tolerance > 0.0) {
        double sup = 0.0;
        for (double v : k1) sup = std::max(sup, std::abs(v));
        if (sup < opts.steady_tolerance) {
          traj.stopped_early = true;
          if (traj.states.back().time != t) traj.states.push_back({m, t, y});
          return traj;
        }
      }
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
      apply_boundary(g, bc, tmp);
      derivative(g, phi, tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
      apply_boundary(g, bc, tmp);
      derivative(g, phi, tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
      apply_boundary(g, bc, tmp);
      derivative(g, phi, tmp, k4);
      for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      apply_boundary(g, bc, y);
      t = s + 1 == steps ? stop : t_start + static_cast<double>(s + 1) * h;
      check_range(y, opts.slack, t);
      if (opts.record_every_step && s + 1 < steps) traj.states.push_back({m, t, y});
    }
    traj.states.push_back({m, t, y});
  }
  return traj;
}

WeakResidual weak_residual(const GasketGraph& g, const Trajectory& traj, const FunctionPath& f, const ReactionFn& phi) {
  const int m = g.level();
  if (traj.level != m || f.level() != m) throw DomainError("trajectory, test function and graph levels differ");
  if (f.knot(0).values.size() != g.num_sites()) throw DomainError("test function is not at the graph level");
  if (traj.bc.regime == Regime::Dirichlet && !f.vanishes_on_boundary()) {
    throw ContractError("Dirichlet weak form requires test functions vanishing on V_0");
  }
  const double n = static_cast<double>(g.num_sites());
  const double boundary_weight = std::pow(3.0, m) / n;

  auto interior_mean = [&](auto&& term) {
    double acc = 0.0;
    for (std::size_t i = 3; i < g.num_sites(); ++i) acc += term(i);
    return acc / n;
  };

  // dF/dt is piecewise constant, so it is taken at the midpoint of each
  // trapezoid interval rather than at the (possibly knot) endpoints.
  std::vector<double> static_part;
  std::vector<double> pairings;
  for (const auto& state : traj.states) {
    const auto& rho = state.values;
    const auto ft = f.value(state.time);
    const auto lap = laplacian(g, ft);
    double j = interior_mean([&](std::size_t i) { return rho[i] * lap[i] + phi(rho[i]) * ft.values[i]; });
    double bsum = 0.0;
    for (SiteId a : GasketGraph::boundary()) {
      const auto i = static_cast<std::size_t>(a);
      bsum += rho[i] * normal_derivative(g, ft, a) + traj.bc.r[i] * (rho[i] - traj.bc.rho_B[i]) * ft.values[i];
    }
    static_part.push_back(j - boundary_weight * bsum);
    pairings.push_back(interior_mean([&](std::size_t i) { return rho[i] * ft.values[i]; }));
  }

  WeakResidual out;
  double integral = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (k > 0) {
      const double t0 = traj.states[k - 1].time;
      const double t1 = traj.states[k].time;
      const auto dft = f.derivative(0.5 * (t0 + t1));
      const auto& r0 = traj.states[k - 1].values;
      const auto& r1 = traj.states[k].values;
      const double d0 = interior_mean([&](std::size_t i) { return r0[i] * dft.values[i]; });
      const double d1 = interior_mean([&](std::size_t i) { return r1[i] * dft.values[i]; });
      integral += 0.5 * (t1 - t0) * (static_part[k] + static_part[k - 1] + d0 + d1);
    }
    const double theta = pairings[k] - pairings[0] - integral;
    out.times.push_back(traj.states[k].time);
    out.theta.push_back(theta);
    out.max_abs = std::max(out.max_abs, std::abs(theta));
  }
  return out;
}

std::vector<double> compare_levels(const Trajectory& a, const Trajectory& b, const std::vector<double>& times) {
  if (b.level < a.level) throw ContractError("second trajectory must be at the finer level");
  if (a.bc.regime != b.bc.regime || a.bc.rho_B != b.bc.rho_B || a.bc.r != b.bc.r) {
    throw ContractError("trajectories use different boundary conditions");
  }
  std::vector<double> out;
  for (double t : times) {
    const auto& sa = a.at(t);
    const auto& sb = b.at(t);
    double sup = 0.0;
    for (std::size_t i = 0; i < sa.values.size(); ++i) sup = std::max(sup, std::abs(sa.values[i] - sb.values[i]));
    out.push_back(sup);
  }
  return out;
}

double pairing(const SiteFunction& f, const DensityField& rho) {
  if (f.values.size() != rho.values.size()) throw DomainError("test function and density sizes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) acc += f.values[i] * rho.values[i];
  return acc / static_cast<double>(f.values.size());
}

}  // namespace sgk
