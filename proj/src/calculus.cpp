#include "sgk/calculus.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgk/errors.hpp"

namespace sgk {

namespace {

void check_size(const GasketGraph& g, const SiteFunction& f) {
  if (f.values.size() != g.num_sites()) {
    throw DomainError("site function has " + std::to_string(f.values.size()) + " values, graph has " +
                      std::to_string(g.num_sites()) + " sites");
  }
}

}  // namespace

SiteFunction sample(const GasketGraph& g, const std::function<double(Point2)>& fn) {
  SiteFunction f{g.level(), std::vector<double>(g.num_sites())};
  for (std::size_t i = 0; i < g.num_sites(); ++i) f.values[i] = fn(g.position(static_cast<SiteId>(i)));
  return f;
}

SiteFunction constant_function(const GasketGraph& g, double value) {
  return {g.level(), std::vector<double>(g.num_sites(), value)};
}

std::vector<double> laplacian(const GasketGraph& g, const SiteFunction& f) {
  check_size(g, f);
  const double scale = std::pow(5.0, g.level());
  std::vector<double> out(g.num_sites(), 0.0);
  for (std::size_t i = 3; i < g.num_sites(); ++i) {
    const auto x = static_cast<SiteId>(i);
    double acc = 0.0;
    for (auto y : g.neighbors(x)) acc += f[y] - f[x];
    out[i] = scale * acc;
  }
  return out;
}

double normal_derivative(const GasketGraph& g, const SiteFunction& f, SiteId a) {
  check_size(g, f);
  if (!GasketGraph::is_boundary(a)) throw DomainError("normal derivative is defined on V_0 only");
  double acc = 0.0;
  for (auto y : g.neighbors(a)) acc += f[a] - f[y];
  return std::pow(5.0 / 3.0, g.level()) * acc;
}

double dirichlet_energy(const GasketGraph& g, const SiteFunction& f) {
  check_size(g, f);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.num_sites(); ++i) {
    const auto x = static_cast<SiteId>(i);
    for (auto y : g.neighbors(x)) {
      const double d = f[y] - f[x];
      acc += d * d;
    }
  }
  return 0.5 * std::pow(5.0 / 3.0, g.level()) * acc;
}

double energy_form(const GasketGraph& g, const SiteFunction& f, const SiteFunction& h) {
  check_size(g, f);
  check_size(g, h);
  SiteFunction sum{g.level(), f.values};
  SiteFunction diff{g.level(), f.values};
  for (std::size_t i = 0; i < g.num_sites(); ++i) {
    sum.values[i] += h.values[i];
    diff.values[i] -= h.values[i];
  }
  return 0.25 * (dirichlet_energy(g, sum) - dirichlet_energy(g, diff));
}

std::vector<double> solve_spd(std::size_t n, const std::vector<std::tuple<int, int, double>>& triplets,
                              std::span<const double> rhs, const LinearSolveOptions& opts) {
  if (rhs.size() != n) throw DomainError("right-hand side size mismatch");
  if (n == 0) return {};
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd x;
  if (n <= opts.dense_limit) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& [r, c, v] : triplets) a(r, c) += v;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw DomainError("system matrix is not positive definite");
    x = llt.solve(b);
  } else {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(triplets.size());
    for (const auto& [r, c, v] : triplets) trips.emplace_back(r, c, v);
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(opts.tolerance);
    cg.setMaxIterations(static_cast<Eigen::Index>(std::max<std::size_t>(10 * n, 1000)));
    cg.compute(a);
    x = cg.solve(b);
    if (cg.info() != Eigen::Success) {
      throw std::runtime_error("conjugate gradient did not converge (error " + std::to_string(cg.error()) + ")");
    }
  }
  return {x.data(), x.data() + x.size()};
}

SiteFunction restrict_to(const SiteFunction& f, const GasketGraph& g, int level) {
  if (level > f.level) throw DomainError("cannot restrict to a finer level");
  const auto n = g.sites_at_level(level);
  return {level, std::vector<double>(f.values.begin(), f.values.begin() + static_cast<std::ptrdiff_t>(n))};
}

SiteFunction harmonic_extension(const GasketGraph& g, const SiteFunction& coarse, const LinearSolveOptions& opts) {
  if (coarse.level > g.level()) throw DomainError("coarse level exceeds the graph level");
  if (coarse.values.size() != g.sites_at_level(coarse.level)) {
    throw DomainError("coarse function size does not match |V_M|");
  }
  SiteFunction f{g.level(), coarse.values};
  f.values.resize(g.num_sites(), 0.0);
  for (int m = coarse.level + 1; m <= g.level(); ++m) {
    const auto first = static_cast<SiteId>(g.sites_at_level(m - 1));
    const auto count = g.sites_at_level(m) - static_cast<std::size_t>(first);
    // Level-m neighbors of each new site, collected from level-m cells.
    std::vector<std::vector<SiteId>> nbrs(count);
    for (const auto& c : g.cells(m)) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (i != j && c[static_cast<std::size_t>(i)] >= first) {
            nbrs[static_cast<std::size_t>(c[static_cast<std::size_t>(i)] - first)].push_back(
                c[static_cast<std::size_t>(j)]);
          }
        }
      }
    }
    std::vector<std::tuple<int, int, double>> trips;
    std::vector<double> rhs(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      const auto row = static_cast<int>(k);
      trips.emplace_back(row, row, static_cast<double>(nbrs[k].size()));
      for (auto y : nbrs[k]) {
        if (y >= first) {
          trips.emplace_back(row, static_cast<int>(y - first), -1.0);
        } else {
          rhs[k] += f[y];
        }
      }
    }
    const auto sol = solve_spd(count, trips, rhs, opts);
    for (std::size_t k = 0; k < count; ++k) f.values[static_cast<std::size_t>(first) + k] = sol[k];
  }
  return f;
}

SiteFunction to_level(const GasketGraph& g, const SiteFunction& f) {
  if (f.level == g.level()) return f;
  if (f.level > g.level()) return restrict_to(f, g, g.level());
  return harmonic_extension(g, f);
}

SiteFunction harmonic_bump(const GasketGraph& g, const CellAddress& w, int k) {
  if (k < 1) throw DomainError("harmonic bump needs k >= 1");
  const int level = w.length() + k;
  if (level > g.level()) throw BoundsError("graph too coarse for the requested bump");
  const auto n = g.sites_at_level(level);
  SiteFunction f{level, std::vector<double>(n, 0.0)};
  for (auto x : closed_cell_sites(g, w)) {
    if (static_cast<std::size_t>(x) < n) f[x] = 1.0;
  }
  return f;
}

ResistanceSolution effective_resistance_solution(const GasketGraph& g, std::span<const SiteId> subset,
                                                 SiteId z, SiteId z2, const LinearSolveOptions& opts) {
  std::vector<int> local(g.num_sites(), -1);
  for (auto x : subset) local[static_cast<std::size_t>(x)] = 0;
  if (local[static_cast<std::size_t>(z)] < 0 || local[static_cast<std::size_t>(z2)] < 0) {
    throw DomainError("resistance endpoints must belong to the site set");
  }
  ResistanceSolution out;
  // Connected component of z within the induced subgraph.
  std::vector<SiteId> comp{z};
  std::vector<char> seen(g.num_sites(), 0);
  seen[static_cast<std::size_t>(z)] = 1;
  for (std::size_t head = 0; head < comp.size(); ++head) {
    for (auto y : g.neighbors(comp[head])) {
      if (local[static_cast<std::size_t>(y)] >= 0 && !seen[static_cast<std::size_t>(y)]) {
        seen[static_cast<std::size_t>(y)] = 1;
        comp.push_back(y);
      }
    }
  }
  if (!seen[static_cast<std::size_t>(z2)]) throw DomainError("resistance endpoints are not connected");
  out.sites = comp;
  out.potential.assign(comp.size(), 0.0);
  if (z == z2) return out;

  // Unknowns: every component site except the grounded sink z2.
  std::vector<int> index(g.num_sites(), -1);
  int next = 0;
  for (auto x : comp) {
    if (x != z2) index[static_cast<std::size_t>(x)] = next++;
  }
  std::vector<std::tuple<int, int, double>> trips;
  for (auto x : comp) {
    const int row = index[static_cast<std::size_t>(x)];
    if (row < 0) continue;
    int deg = 0;
    for (auto y : g.neighbors(x)) {
      if (!seen[static_cast<std::size_t>(y)]) continue;
      ++deg;
      const int col = index[static_cast<std::size_t>(y)];
      if (col >= 0) trips.emplace_back(row, col, -1.0);
    }
    trips.emplace_back(row, row, static_cast<double>(deg));
  }
  std::vector<double> rhs(static_cast<std::size_t>(next), 0.0);
  rhs[static_cast<std::size_t>(index[static_cast<std::size_t>(z)])] = 1.0;
  const auto phi = solve_spd(static_cast<std::size_t>(next), trips, rhs, opts);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    const int k = index[static_cast<std::size_t>(comp[i])];
    out.potential[i] = k < 0 ? 0.0 : phi[static_cast<std::size_t>(k)];
  }
  out.resistance = phi[static_cast<std::size_t>(index[static_cast<std::size_t>(z)])];
  return out;
}

double effective_resistance(const GasketGraph& g, std::span<const SiteId> subset, SiteId z, SiteId z2,
                            const LinearSolveOptions& opts) {
  return effective_resistance_solution(g, subset, z, z2, opts).resistance;
}

double effective_resistance(const GasketGraph& g, SiteId z, SiteId z2, const LinearSolveOptions& opts) {
  std::vector<SiteId> all(g.num_sites());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<SiteId>(i);
  return effective_resistance(g, all, z, z2, opts);
}

FunctionPath::FunctionPath(SiteFunction constant) : times_{0.0}, knots_{std::move(constant)} {}

FunctionPath::FunctionPath(std::vector<double> times, std::vector<SiteFunction> knots)
    : times_(std::move(times)), knots_(std::move(knots)) {
  if (times_.empty() || times_.size() != knots_.size()) throw DomainError("function path needs one time per knot");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) throw DomainError("knot times must increase");
    if (knots_[k].values.size() != knots_[0].values.size()) throw DomainError("knots differ in size");
  }
}

std::size_t FunctionPath::segment(double t) const {
  if (times_.size() < 2 || t <= times_.front()) return 0;
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto k = static_cast<std::size_t>(it - times_.begin());
  return std::min(k - 1, times_.size() - 2);
}

SiteFunction FunctionPath::value(double t) const {
  if (times_.size() == 1 || t <= times_.front()) return knots_.front();
  if (t >= times_.back()) return knots_.back();
  const auto k = segment(t);
  const double theta = (t - times_[k]) / (times_[k + 1] - times_[k]);
  SiteFunction f = knots_[k];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    f.values[i] = (1.0 - theta) * knots_[k].values[i] + theta * knots_[k + 1].values[i];
  }
  return f;
}

SiteFunction FunctionPath::derivative(double t) const {
  SiteFunction d{knots_.front().level, std::vector<double>(knots_.front().values.size(), 0.0)};
  if (times_.size() == 1 || t < times_.front() || t >= times_.back()) return d;
  const auto k = segment(t);
  const double inv = 1.0 / (times_[k + 1] - times_[k]);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] = (knots_[k + 1].values[i] - knots_[k].values[i]) * inv;
  }
  return d;
}

bool FunctionPath::vanishes_on_boundary(double tol) const {
  for (const auto& f : knots_) {
    for (SiteId a : GasketGraph::boundary()) {
      if (std::abs(f[a]) > tol) return false;
    }
  }
  return true;
}

}  // namespace sgk
