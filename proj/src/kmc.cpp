#include "sgk/kmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgk/errors.hpp"

namespace sgk {

// -- Configuration -------------------------------------------------------------

Configuration::Configuration(const GasketGraph& g, std::vector<std::uint8_t> occupancy)
    : occ_(std::move(occupancy)), slot_(g.num_edges(), -1) {
  if (occ_.size() != g.num_sites()) throw DomainError("configuration size does not match the graph");
  for (auto& v : occ_) {
    if (v > 1) throw DomainError("occupancies must be 0 or 1");
    particles_ += v;
  }
  for (std::size_t e = 0; e < g.num_edges(); ++e) refresh_edge(g, static_cast<EdgeId>(e));
}

void Configuration::refresh_edge(const GasketGraph& g, EdgeId e) {
  const auto [x, y] = g.edge(e);
  const bool disc = occ_[static_cast<std::size_t>(x)] != occ_[static_cast<std::size_t>(y)];
  auto& s = slot_[static_cast<std::size_t>(e)];
  if (disc && s < 0) {
    s = static_cast<std::int32_t>(discordant_.size());
    discordant_.push_back(e);
  } else if (!disc && s >= 0) {
    const EdgeId last = discordant_.back();
    discordant_[static_cast<std::size_t>(s)] = last;
    slot_[static_cast<std::size_t>(last)] = s;
    discordant_.pop_back();
    s = -1;
  }
}

void Configuration::swap(const GasketGraph& g, EdgeId e) {
  if (!is_discordant(e)) throw PreconditionError("swap across a concordant edge");
  const auto [x, y] = g.edge(e);
  occ_[static_cast<std::size_t>(x)] ^= 1U;
  occ_[static_cast<std::size_t>(y)] ^= 1U;
  for (auto f : g.incident_edges(x)) refresh_edge(g, f);
  for (auto f : g.incident_edges(y)) refresh_edge(g, f);
}

void Configuration::flip(const GasketGraph& g, SiteId x) {
  auto& v = occ_[static_cast<std::size_t>(x)];
  v ^= 1U;
  particles_ += v ? 1 : -1;
  for (auto f : g.incident_edges(x)) refresh_edge(g, f);
}

bool Configuration::cache_consistent(const GasketGraph& g) const {
  std::int64_t count = 0;
  for (auto v : occ_) count += v;
  if (count != particles_) return false;
  std::size_t disc = 0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto [x, y] = g.edge(static_cast<EdgeId>(e));
    const bool d = occ_[static_cast<std::size_t>(x)] != occ_[static_cast<std::size_t>(y)];
    const auto s = slot_[e];
    if (d != (s >= 0)) return false;
    if (d) {
      if (discordant_[static_cast<std::size_t>(s)] != static_cast<EdgeId>(e)) return false;
      ++disc;
    }
  }
  return disc == discordant_.size();
}

Configuration init_config(const GasketGraph& g, const SiteFunction& rho, std::uint64_t seed) {
  if (rho.values.size() != g.num_sites()) throw DomainError("profile size does not match the graph");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x696e6974U};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::uint8_t> occ(g.num_sites());
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const double p = rho.values[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("initial density must lie in [0, 1]");
    occ[i] = unif(rng) < p ? 1 : 0;
  }
  return Configuration(g, std::move(occ));
}

double empirical(const Configuration& eta, const SiteFunction& f) {
  if (f.values.size() != eta.size()) throw DomainError("test function size does not match the configuration");
  double acc = 0.0;
  const auto occ = eta.occupancy();
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (occ[i]) acc += f.values[i];
  }
  return acc / static_cast<double>(occ.size());
}

double block_average(const Configuration& eta, std::span<const SiteId> sites) {
  if (sites.empty()) throw DomainError("block average over an empty cell");
  std::int64_t n = 0;
  for (auto x : sites) n += eta[x];
  return static_cast<double>(n) / static_cast<double>(sites.size());
}

double block_average(const GasketGraph& g, const Configuration& eta, const CellAddress& w) {
  if (w.length() >= g.level()) throw DomainError("block average needs |w| <= N - 1");
  const auto sites = cell_sites(g, w);
  return block_average(eta, sites);
}

// -- Model ---------------------------------------------------------------------

Model::Model(const GasketGraph& g, RateFamily family)
    : graph_(&g),
      family_(std::move(family)),
      shapes_(classify_neighborhoods(g, family_.range())),
      rates_(family_, shapes_.catalog) {
  std::vector<std::vector<SiteId>> deps(g.num_sites());
  for (std::size_t i = 3; i < g.num_sites(); ++i) {
    const auto y = static_cast<SiteId>(i);
    for (auto z : shapes_.neighborhood_of(y)) deps[static_cast<std::size_t>(z)].push_back(y);
  }
  dep_offsets_.push_back(0);
  for (auto& d : deps) {
    std::sort(d.begin(), d.end());
    dep_sites_.insert(dep_sites_.end(), d.begin(), d.end());
    dep_offsets_.push_back(static_cast<std::int32_t>(dep_sites_.size()));
  }
}

double Model::rate_at(const Configuration& eta, SiteId x) const {
  const int shape = shapes_.site_shape[static_cast<std::size_t>(x)];
  if (shape < 0) throw DomainError("Glauber rates are defined on interior sites only");
  std::uint64_t mask = 0;
  const auto nbhd = shapes_.neighborhood_of(x);
  for (std::size_t i = 0; i < nbhd.size(); ++i) {
    if (eta[nbhd[i]]) mask |= std::uint64_t{1} << i;
  }
  return rates_(shape, mask);
}

// -- Simulator -----------------------------------------------------------------

void SimParams::validate() const {
  if (!(b > 0.0) || !std::isfinite(b)) throw ParameterError("boundary scale b must be positive");
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(lambda_plus[a] > 0.0) || !(lambda_minus[a] > 0.0)) {
      throw ParameterError("reservoir rates must be positive");
    }
  }
}

Simulator::Simulator(const Model& model, SimParams params, Configuration init)
    : model_(&model), params_(params), eta_(std::move(init)), rng_(params.seed) {
  params_.validate();
  const int n = graph().level();
  if (eta_.size() != graph().num_sites()) throw DomainError("configuration size does not match the graph");
  speed_ = std::pow(5.0, n);
  boundary_speed_ = std::pow(5.0 / params_.b, n);
  if (!std::isfinite(boundary_speed_)) throw ParameterError("boundary rate overflows");
  max_rate_ = model.rates().max_rate();
}

double Simulator::boundary_rate(SiteId a) const {
  const auto i = static_cast<std::size_t>(a);
  return boundary_speed_ * (eta_[a] ? params_.lambda_minus[i] : params_.lambda_plus[i]);
}

double Simulator::total_rate() const {
  double r = speed_ * static_cast<double>(eta_.discordant().size());
  if (params_.glauber) r += max_rate_ * static_cast<double>(graph().num_interior());
  if (params_.boundary) {
    for (SiteId a : GasketGraph::boundary()) r += boundary_rate(a);
  }
  return r;
}

void Simulator::schedule_next() {
  const double r = total_rate();
  if (r <= 0.0) {
    next_ = std::numeric_limits<double>::infinity();
    return;
  }
  const double dt = std::exponential_distribution<double>(r)(rng_);
  // Compensated summation of the event clock.
  const double y = dt - next_comp_;
  const double t = next_ + y;
  next_comp_ = (t - next_) - y;
  next_ = t;
}

void Simulator::fire() {
  const auto& g = graph();
  const double rk = speed_ * static_cast<double>(eta_.discordant().size());
  const double rg = params_.glauber ? max_rate_ * static_cast<double>(g.num_interior()) : 0.0;
  std::array<double, 3> rb{};
  if (params_.boundary) {
    for (SiteId a : GasketGraph::boundary()) rb[static_cast<std::size_t>(a)] = boundary_rate(a);
  }
  const double total = rk + rg + rb[0] + rb[1] + rb[2];
  double u = std::uniform_real_distribution<double>(0.0, total)(rng_);

  Event ev;
  ev.time = next_;
  if (u < rk || (rg == 0.0 && !params_.boundary)) {
    const auto n = eta_.discordant().size();
    const auto k = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
    const EdgeId e = eta_.discordant()[k];
    const auto [x, y] = g.edge(e);
    ev.kind = EventKind::Swap;
    ev.x = x;
    ev.y = y;
    for (auto* o : observers_) o->before_event(*this, ev);
    eta_.swap(g, e);
    ++counts_.swaps;
  } else if (u < rk + rg) {
    const auto k = std::uniform_int_distribution<std::size_t>(0, g.num_interior() - 1)(rng_);
    const auto x = static_cast<SiteId>(3 + k);
    const double accept = glauber_rate(x) / max_rate_;
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) >= accept) {
      ++counts_.rejected;
      return;
    }
    ev.kind = EventKind::Flip;
    ev.x = x;
    for (auto* o : observers_) o->before_event(*this, ev);
    eta_.flip(g, x);
    ++counts_.flips;
  } else {
    u -= rk + rg;
    SiteId a = 2;
    if (u < rb[0]) {
      a = 0;
    } else if (u < rb[0] + rb[1]) {
      a = 1;
    }
    ev.kind = EventKind::Boundary;
    ev.x = a;
    for (auto* o : observers_) o->before_event(*this, ev);
    eta_.flip(g, a);
    ++counts_.boundary;
  }
  for (auto* o : observers_) o->after_event(*this, ev);
  if (params_.debug_check_interval > 0 && counts_.total() % params_.debug_check_interval == 0 &&
      !eta_.cache_consistent(g)) {
    throw ContractError("discordant-edge cache diverged from the configuration");
  }
}

void Simulator::advance_to(double t) {
  if (t < now_) throw DomainError("cannot advance the simulator backwards in time");
  if (!started_) {
    started_ = true;
    next_ = now_;
    for (auto* o : observers_) o->on_start(*this);
    schedule_next();
  }
  while (next_ < t) {
    for (auto* o : observers_) o->on_interval(*this, now_, next_);
    now_ = next_;
    fire();
    schedule_next();
  }
  if (t > now_) {
    for (auto* o : observers_) o->on_interval(*this, now_, t);
  }
  now_ = t;
}

Observation run(const Model& model, const SimParams& params, Configuration init, const ObservationSpec& spec,
                std::span<Observer* const> observers) {
  const auto& g = model.graph();
  for (const auto& f : spec.functions) {
    if (f.values.size() != g.num_sites()) throw DomainError("observed function is not at the simulation level");
  }
  std::vector<std::vector<SiteId>> cells;
  for (const auto& w : spec.cells) {
    if (w.length() >= g.level()) throw DomainError("block average needs |w| <= N - 1");
    cells.push_back(cell_sites(g, w));
    if (cells.back().empty()) throw DomainError("cell " + w.str() + " has no interior sites");
  }
  Simulator sim(model, params, std::move(init));
  for (auto* o : observers) sim.add_observer(*o);

  Observation obs;
  obs.times = spec.times;
  obs.empirical.assign(spec.functions.size(), {});
  obs.blocks.assign(cells.size(), {});
  for (double t : spec.times) {
    sim.advance_to(t);
    const auto& eta = sim.config();
    for (std::size_t i = 0; i < spec.functions.size(); ++i) obs.empirical[i].push_back(empirical(eta, spec.functions[i]));
    for (std::size_t i = 0; i < cells.size(); ++i) obs.blocks[i].push_back(block_average(eta, cells[i]));
    obs.boundary.push_back({eta[0], eta[1], eta[2]});
  }
  obs.counts = sim.counts();
  return obs;
}

// -- Martingale tracker --------------------------------------------------------

namespace {

constexpr std::uint64_t kRefreshInterval = std::uint64_t{1} << 18;

void push_unique(std::vector<SiteId>& v, SiteId x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

MartingaleTracker::MartingaleTracker(FunctionPath f) : path_(std::move(f)) {
  if (path_.num_knots() == 0) throw DomainError("martingale tracker needs a test function");
  if (!path_.vanishes_on_boundary()) warnings_.emplace_back("test function is nonzero on V_0");
}

double MartingaleTracker::phase_start() const { return path_.knot_time(phase_); }

double MartingaleTracker::phase_end() const {
  if (phase_ + 1 >= path_.num_knots()) return std::numeric_limits<double>::infinity();
  return path_.knot_time(phase_ + 1);
}

void MartingaleTracker::on_start(const Simulator& sim) {
  const auto& g = sim.graph();
  if (path_.knot(0).values.size() != g.num_sites()) throw DomainError("test function is not at the simulation level");
  if (sim.time() < path_.knot_time(0)) throw DomainError("test function path starts after the simulation");
  std::size_t k = path_.num_knots() - 1;
  if (sim.time() < path_.knot_time(k)) k = path_.segment(sim.time());
  enter_phase(sim, k);
  pi_initial_ = empirical(sim.config(), path_.value(sim.time()));
  drift_ = 0.0;
  qv_ = 0.0;
}

void MartingaleTracker::enter_phase(const Simulator& sim, std::size_t phase) {
  const auto& g = sim.graph();
  phase_ = phase;
  g0_ = &path_.knot(phase);
  g1_ = phase + 1 < path_.num_knots() ? &path_.knot(phase + 1) : g0_;
  lap0_ = laplacian(g, *g0_);
  lap1_ = laplacian(g, *g1_);
  for (SiteId a : GasketGraph::boundary()) {
    dperp0_[static_cast<std::size_t>(a)] = normal_derivative(g, *g0_, a);
    dperp1_[static_cast<std::size_t>(a)] = normal_derivative(g, *g1_, a);
  }
  recompute(sim);
}

double MartingaleTracker::linear_term(const Simulator& sim, SiteId x, const SiteFunction& gfun) const {
  const auto& eta = sim.config();
  const auto& g = sim.graph();
  const bool first = &gfun == g0_;
  const double n = static_cast<double>(g.num_sites());
  const double occ = eta[x];
  if (GasketGraph::is_boundary(x)) {
    const auto a = static_cast<std::size_t>(x);
    const double dperp = first ? dperp0_[a] : dperp1_[a];
    double v = -std::pow(3.0, g.level()) * occ * dperp;
    if (sim.params().boundary) {
      const double up = sim.params().lambda_plus[a] * (1.0 - occ) - sim.params().lambda_minus[a] * occ;
      v += std::pow(5.0 / sim.params().b, g.level()) * gfun[x] * up;
    }
    return v / n;
  }
  const double lap = first ? lap0_[static_cast<std::size_t>(x)] : lap1_[static_cast<std::size_t>(x)];
  double v = occ * lap;
  if (sim.params().glauber) v += sim.glauber_rate(x) * (1.0 - 2.0 * occ) * gfun[x];
  return v / n;
}

double MartingaleTracker::site_quadratic(const Simulator& sim, SiteId x, const SiteFunction& a,
                                         const SiteFunction& b) const {
  const double n = static_cast<double>(sim.graph().num_sites());
  double rate = 0.0;
  if (GasketGraph::is_boundary(x)) {
    if (sim.params().boundary) rate = sim.boundary_rate(x);
  } else if (sim.params().glauber) {
    rate = sim.glauber_rate(x);
  }
  return rate * a[x] * b[x] / (n * n);
}

void MartingaleTracker::recompute(const Simulator& sim) {
  const auto& g = sim.graph();
  const auto& eta = sim.config();
  const double n = static_cast<double>(g.num_sites());
  Sums s;
  for (std::size_t i = 0; i < g.num_sites(); ++i) {
    const auto x = static_cast<SiteId>(i);
    if (eta[x]) {
      s.pi0 += (*g0_)[x] / n;
      s.pi1 += (*g1_)[x] / n;
    }
    s.lin0 += linear_term(sim, x, *g0_);
    s.lin1 += g1_ == g0_ ? 0.0 : linear_term(sim, x, *g1_);
    s.q00 += site_quadratic(sim, x, *g0_, *g0_);
    s.q01 += site_quadratic(sim, x, *g0_, *g1_);
    s.q11 += site_quadratic(sim, x, *g1_, *g1_);
  }
  if (g1_ == g0_) s.lin1 = s.lin0;
  const double w = sim.swap_rate() / (n * n);
  for (auto e : eta.discordant()) {
    const auto [x, y] = g.edge(e);
    const double d0 = (*g0_)[y] - (*g0_)[x];
    const double d1 = (*g1_)[y] - (*g1_)[x];
    s.q00 += w * d0 * d0;
    s.q01 += w * d0 * d1;
    s.q11 += w * d1 * d1;
  }
  sums_ = s;
  events_since_refresh_ = 0;
}

void MartingaleTracker::apply_local(const Simulator& sim, const Event& e, double sign) {
  const auto& g = sim.graph();
  const auto& eta = sim.config();
  const double n = static_cast<double>(g.num_sites());
  scratch_sites_.clear();
  scratch_edges_.clear();
  std::array<SiteId, 2> changed{e.x, e.y};
  const std::size_t nchanged = e.kind == EventKind::Swap ? 2 : 1;
  for (std::size_t i = 0; i < nchanged; ++i) {
    const SiteId x = changed[i];
    push_unique(scratch_sites_, x);
    for (auto y : sim.model().dependents(x)) push_unique(scratch_sites_, y);
    for (auto f : g.incident_edges(x)) {
      if (std::find(scratch_edges_.begin(), scratch_edges_.end(), f) == scratch_edges_.end()) {
        scratch_edges_.push_back(f);
      }
    }
    if (eta[x]) {
      sums_.pi0 += sign * (*g0_)[x] / n;
      sums_.pi1 += sign * (*g1_)[x] / n;
    }
  }
  const bool same = g1_ == g0_;
  for (auto x : scratch_sites_) {
    const double l0 = linear_term(sim, x, *g0_);
    sums_.lin0 += sign * l0;
    sums_.lin1 += sign * (same ? l0 : linear_term(sim, x, *g1_));
    sums_.q00 += sign * site_quadratic(sim, x, *g0_, *g0_);
    if (!same) {
      sums_.q01 += sign * site_quadratic(sim, x, *g0_, *g1_);
      sums_.q11 += sign * site_quadratic(sim, x, *g1_, *g1_);
    }
  }
  const double w = sim.swap_rate() / (n * n);
  for (auto f : scratch_edges_) {
    if (!eta.is_discordant(f)) continue;
    const auto [x, y] = g.edge(f);
    const double d0 = (*g0_)[y] - (*g0_)[x];
    const double d1 = (*g1_)[y] - (*g1_)[x];
    sums_.q00 += sign * w * d0 * d0;
    if (!same) {
      sums_.q01 += sign * w * d0 * d1;
      sums_.q11 += sign * w * d1 * d1;
    }
  }
  if (same) {
    sums_.lin1 = sums_.lin0;
    sums_.q01 = sums_.q00;
    sums_.q11 = sums_.q00;
  }
}

void MartingaleTracker::before_event(const Simulator& sim, const Event& e) { apply_local(sim, e, -1.0); }

void MartingaleTracker::after_event(const Simulator& sim, const Event& e) {
  apply_local(sim, e, 1.0);
  if (++events_since_refresh_ >= kRefreshInterval) recompute(sim);
}

void MartingaleTracker::on_interval(const Simulator& sim, double t0, double t1) {
  while (t1 > phase_end()) {
    on_interval(sim, t0, phase_end());
    t0 = phase_end();
    enter_phase(sim, phase_ + 1);
  }
  if (t1 <= t0) return;
  const double len = t1 - t0;
  if (g1_ == g0_) {
    drift_ += len * sums_.lin0;
    qv_ += len * sums_.q00;
    return;
  }
  const double h = phase_end() - phase_start();
  const double a = (t0 - phase_start()) / h;
  const double b = (t1 - phase_start()) / h;
  const double dpi = (sums_.pi1 - sums_.pi0) / h;
  drift_ += len * (dpi + sums_.lin0 + (sums_.lin1 - sums_.lin0) * 0.5 * (a + b));
  // q(theta) = q00 + c1 theta + c2 theta^2, integrated exactly.
  const double c1 = 2.0 * (sums_.q01 - sums_.q00);
  const double c2 = sums_.q00 - 2.0 * sums_.q01 + sums_.q11;
  auto prim = [&](double th) { return sums_.q00 * th + c1 * th * th / 2.0 + c2 * th * th * th / 3.0; };
  qv_ += h * (prim(b) - prim(a));
}

double MartingaleTracker::value(double t) const {
  double pi_now = sums_.pi0;
  if (g1_ != g0_) {
    const double theta = (t - phase_start()) / (phase_end() - phase_start());
    pi_now = (1.0 - theta) * sums_.pi0 + theta * sums_.pi1;
  }
  return pi_now - pi_initial_ - drift_;
}

}  // namespace sgk
