#pragma once

// Exact continuous-time simulation of the boundary-driven Glauber-Kawasaki
// process on G_N with generator 5^N (L^K + 5^-N L^G + b^-N L^B). In macroscopic
// time the event classes fire at
//
//   swap across a discordant edge        5^N
//   flip at an interior site x           c_x(eta)          (thinned, clock ||c||_inf)
//   flip at a corner a                   (5/b)^N (lambda_-(a) eta(a) + lambda_+(a) (1 - eta(a)))

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sgk/calculus.hpp"
#include "sgk/gasket.hpp"
#include "sgk/rates.hpp"

namespace sgk {

class Configuration {
 public:
  Configuration() = default;
  Configuration(const GasketGraph& g, std::vector<std::uint8_t> occupancy);

  std::uint8_t operator[](SiteId x) const { return occ_[static_cast<std::size_t>(x)]; }
  std::span<const std::uint8_t> occupancy() const { return occ_; }
  std::size_t size() const { return occ_.size(); }
  std::int64_t particles() const { return particles_; }
  // Edges with eta(x) != eta(y), in arbitrary order.
  std::span<const EdgeId> discordant() const { return discordant_; }
  bool is_discordant(EdgeId e) const { return slot_[static_cast<std::size_t>(e)] >= 0; }

  // eta -> eta^{xy} across a discordant edge.
  void swap(const GasketGraph& g, EdgeId e);
  // eta -> eta^x.
  void flip(const GasketGraph& g, SiteId x);
  // Recomputes the discordant set and particle count from scratch and compares.
  bool cache_consistent(const GasketGraph& g) const;

 private:
  void refresh_edge(const GasketGraph& g, EdgeId e);

  std::vector<std::uint8_t> occ_;
  std::int64_t particles_ = 0;
  std::vector<EdgeId> discordant_;
  std::vector<std::int32_t> slot_;  // position in discordant_, -1 if concordant
};

// Independent Bernoulli(rho(x)) occupancies. The stream is derived from `seed`
// but differs from the simulator stream with the same seed.
Configuration init_config(const GasketGraph& g, const SiteFunction& rho, std::uint64_t seed);

// pi(f) = |V_N|^-1 sum_x eta(x) f(x).
double empirical(const Configuration& eta, const SiteFunction& f);
// Mean of eta over V_N^w; throws DomainError when V_N^w is empty.
double block_average(const GasketGraph& g, const Configuration& eta, const CellAddress& w);
double block_average(const Configuration& eta, std::span<const SiteId> sites);

// Immutable data shared by all replicas: the graph, per-site shapes and the
// tabulated rates. Keeps a reference to `g`, which must outlive it.
class Model {
 public:
  Model(const GasketGraph& g, RateFamily family);

  const GasketGraph& graph() const { return *graph_; }
  const RateFamily& family() const { return family_; }
  const LocalShapes& shapes() const { return shapes_; }
  const CompiledRates& rates() const { return rates_; }
  // Interior sites y whose rate c_y reads eta(x), x included when interior.
  std::span<const SiteId> dependents(SiteId x) const {
    const auto i = static_cast<std::size_t>(x);
    return {dep_sites_.data() + dep_offsets_[i], static_cast<std::size_t>(dep_offsets_[i + 1] - dep_offsets_[i])};
  }
  double rate_at(const Configuration& eta, SiteId x) const;

 private:
  const GasketGraph* graph_;
  RateFamily family_;
  LocalShapes shapes_;
  CompiledRates rates_;
  std::vector<std::int32_t> dep_offsets_;
  std::vector<SiteId> dep_sites_;
};

struct SimParams {
  double b = 1.0;
  std::array<double, 3> lambda_plus{1.0, 1.0, 1.0};
  std::array<double, 3> lambda_minus{1.0, 1.0, 1.0};
  bool glauber = true;
  bool boundary = true;
  std::uint64_t seed = 0;
  // Check the discordant-edge cache every this many events (0 = never).
  std::uint64_t debug_check_interval = 0;

  double rho_B(int a) const {
    const auto i = static_cast<std::size_t>(a);
    return lambda_plus[i] / (lambda_plus[i] + lambda_minus[i]);
  }
  // Throws ParameterError on b <= 0 or a nonpositive reservoir rate.
  void validate() const;
};

enum class EventKind : std::uint8_t { Swap, Flip, Boundary };

struct Event {
  EventKind kind = EventKind::Swap;
  SiteId x = -1;
  SiteId y = -1;  // second site of a swap
  double time = 0.0;
  friend bool operator==(const Event&, const Event&) = default;
};

struct EventCounts {
  std::uint64_t swaps = 0;
  std::uint64_t flips = 0;
  std::uint64_t rejected = 0;  // thinned Glauber proposals
  std::uint64_t boundary = 0;
  std::uint64_t total() const { return swaps + flips + boundary; }
};

class Simulator;

// Hooks into a trajectory. The configuration is constant on every interval
// passed to on_interval; events are reported before and after they mutate it.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_start(const Simulator&) {}
  virtual void on_interval(const Simulator&, double /*t0*/, double /*t1*/) {}
  virtual void before_event(const Simulator&, const Event&) {}
  virtual void after_event(const Simulator&, const Event&) {}
};

class Simulator {
 public:
  Simulator(const Model& model, SimParams params, Configuration init);

  // Observers must be added before the first advance_to.
  void add_observer(Observer& obs) { observers_.push_back(&obs); }
  // Runs every event with time < t, then sets the clock to t.
  void advance_to(double t);

  double time() const { return now_; }
  const Configuration& config() const { return eta_; }
  const Model& model() const { return *model_; }
  const GasketGraph& graph() const { return model_->graph(); }
  const SimParams& params() const { return params_; }
  const EventCounts& counts() const { return counts_; }

  double glauber_rate(SiteId x) const { return model_->rate_at(eta_, x); }
  double boundary_rate(SiteId a) const;
  double swap_rate() const { return speed_; }

 private:
  double total_rate() const;
  void schedule_next();
  void fire();

  const Model* model_;
  SimParams params_;
  Configuration eta_;
  std::mt19937_64 rng_;
  std::vector<Observer*> observers_;
  EventCounts counts_;
  double speed_;           // 5^N
  double boundary_speed_;  // (5/b)^N
  double max_rate_;
  double now_ = 0.0;
  double next_ = 0.0;
  double next_comp_ = 0.0;  // compensation term of the running event clock
  bool started_ = false;
};

struct ObservationSpec {
  std::vector<double> times;
  std::vector<SiteFunction> functions;  // at the simulation level
  std::vector<CellAddress> cells;
};

struct Observation {
  std::vector<double> times;
  std::vector<std::vector<double>> empirical;  // [function][time]
  std::vector<std::vector<double>> blocks;     // [cell][time]
  std::vector<std::array<std::uint8_t, 3>> boundary;
  EventCounts counts;
};

// Simulates from `init` and samples the spec at its (nondecreasing) times.
Observation run(const Model& model, const SimParams& params, Configuration init, const ObservationSpec& spec,
                std::span<Observer* const> observers = {});

// Records every event, for replaying and determinism checks.
class EventLog : public Observer {
 public:
  void after_event(const Simulator&, const Event& e) override { events.push_back(e); }
  std::vector<Event> events;
};

// M_t(F) = pi_t(F_t) - pi_0(F_0) - int_0^t (d/ds + 5^N L_N) pi_s(F_s) ds for a
// piecewise-linear-in-time F, with the integral accumulated exactly between
// events. Also integrates the predictable quadratic variation
//   <M>_t = int_0^t sum_events rate * (jump of pi_s(F_s))^2 ds.
class MartingaleTracker : public Observer {
 public:
  explicit MartingaleTracker(FunctionPath f);

  void on_start(const Simulator& sim) override;
  void on_interval(const Simulator& sim, double t0, double t1) override;
  void before_event(const Simulator& sim, const Event& e) override;
  void after_event(const Simulator& sim, const Event& e) override;

  // Value at time t, which must be the time of the last callback.
  double value(double t) const;
  double compensator() const { return qv_; }
  double drift_integral() const { return drift_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  struct Sums {
    double pi0 = 0.0, pi1 = 0.0;             // pi(G0), pi(G1)
    double lin0 = 0.0, lin1 = 0.0;           // generator applied to pi(G0), pi(G1)
    double q00 = 0.0, q01 = 0.0, q11 = 0.0;  // quadratic variation rates
  };
  void enter_phase(const Simulator& sim, std::size_t phase);
  void recompute(const Simulator& sim);
  void apply_local(const Simulator& sim, const Event& e, double sign);
  double linear_term(const Simulator& sim, SiteId x, const SiteFunction& gfun) const;
  double site_quadratic(const Simulator& sim, SiteId x, const SiteFunction& a, const SiteFunction& b) const;
  double phase_start() const;
  double phase_end() const;

  FunctionPath path_;
  std::size_t phase_ = 0;  // segment index; num_knots() - 1 is the final constant phase
  const SiteFunction* g0_ = nullptr;
  const SiteFunction* g1_ = nullptr;
  std::vector<double> lap0_, lap1_;
  std::array<double, 3> dperp0_{}, dperp1_{};
  Sums sums_;
  double pi_initial_ = 0.0;
  double drift_ = 0.0;
  double qv_ = 0.0;
  std::uint64_t events_since_refresh_ = 0;
  std::vector<SiteId> scratch_sites_;
  std::vector<EdgeId> scratch_edges_;
  std::vector<std::string> warnings_;
};

}  // namespace sgk
