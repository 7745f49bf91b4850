#include "sgk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "sgk/errors.hpp"
#include "sgk/profile.hpp"

#ifndef SGK_VERSION
#define SGK_VERSION "unknown"
#endif

namespace sgk {

namespace {

constexpr double kZ95 = 1.96;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> sample_times(const ExperimentConfig& cfg) {
  return cfg.sample_times.empty() ? std::vector<double>{cfg.T} : cfg.sample_times;
}

std::vector<CellAddress> all_words(int length) {
  std::vector<CellAddress> out;
  std::int64_t count = 1;
  for (int i = 0; i < length; ++i) count *= 3;
  for (std::int64_t k = 0; k < count; ++k) out.push_back(CellAddress::from_index(length, k));
  return out;
}

CellAddress concat(const CellAddress& a, const CellAddress& b) {
  CellAddress w = a;
  for (auto letter : b.letters()) w = w.child(letter);
  return w;
}

template <class T>
std::vector<T> json_vector(const nlohmann::json& doc, const char* key, std::vector<T> fallback) {
  return doc.contains(key) ? doc.at(key).get<std::vector<T>>() : fallback;
}

}  // namespace

std::string version_string() { return SGK_VERSION; }

// -- Config --------------------------------------------------------------------

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Converge:
      return "converge";
    case ExperimentKind::RegimeSweep:
      return "regime_sweep";
    case ExperimentKind::Replacement:
      return "replacement";
    case ExperimentKind::Martingale:
      return "martingale";
    case ExperimentKind::Resistance:
      return "resistance";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::Converge, ExperimentKind::RegimeSweep, ExperimentKind::Replacement,
                 ExperimentKind::Martingale, ExperimentKind::Resistance}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment kind '" + name + "'");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.kind = parse_experiment_kind(doc.at("kind").get<std::string>());
    c.levels = json_vector(doc, "levels", c.levels);
    c.replicas = doc.value("replicas", c.replicas);
    c.b = doc.value("b", c.b);
    c.b_values = json_vector(doc, "b_values", c.b_values);
    if (doc.contains("family")) c.family = doc.at("family");
    if (doc.contains("lambda_plus")) c.lambda_plus = doc.at("lambda_plus").get<std::array<double, 3>>();
    if (doc.contains("lambda_minus")) c.lambda_minus = doc.at("lambda_minus").get<std::array<double, 3>>();
    c.glauber = doc.value("glauber", c.glauber);
    c.boundary = doc.value("boundary", c.boundary);
    c.rho0 = doc.value("rho0", c.rho0);
    c.test_functions = json_vector(doc, "test_functions", c.test_functions);
    c.cells = json_vector(doc, "cells", c.cells);
    c.T = doc.value("T", c.T);
    c.sample_times = json_vector(doc, "sample_times", c.sample_times);
    c.seed = doc.value("seed", c.seed);
    c.reference_level = doc.value("reference_level", c.reference_level);
    c.pde_dt = doc.value("pde_dt", c.pde_dt);
    c.block_levels = json_vector(doc, "block_levels", c.block_levels);
    c.subcell_depth = doc.value("subcell_depth", c.subcell_depth);
    c.boundary_depth = doc.value("boundary_depth", c.boundary_depth);
    c.pairs = doc.value("pairs", c.pairs);
    c.threads = doc.value("threads", c.threads);
    c.output_dir = doc.value("output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"levels", levels},
          {"replicas", replicas},
          {"b", b},
          {"b_values", b_values},
          {"family", family},
          {"lambda_plus", lambda_plus},
          {"lambda_minus", lambda_minus},
          {"glauber", glauber},
          {"boundary", boundary},
          {"rho0", rho0},
          {"test_functions", test_functions},
          {"cells", cells},
          {"T", T},
          {"sample_times", sample_times},
          {"seed", seed},
          {"reference_level", reference_level},
          {"pde_dt", pde_dt},
          {"block_levels", block_levels},
          {"subcell_depth", subcell_depth},
          {"boundary_depth", boundary_depth},
          {"pairs", pairs},
          {"threads", threads},
          {"output_dir", output_dir}};
}

void ExperimentConfig::validate() const {
  if (levels.empty()) throw ConfigError("at least one level is required");
  if (!std::is_sorted(levels.begin(), levels.end()) ||
      std::adjacent_find(levels.begin(), levels.end()) != levels.end()) {
    throw ConfigError("levels must be strictly ascending");
  }
  if (levels.front() < 1 || levels.back() > kMaxLevel) throw ConfigError("levels must lie in [1, 12]");
  if (replicas < 1) throw ConfigError("replica count must be >= 1");
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (!std::is_sorted(sample_times.begin(), sample_times.end())) throw ConfigError("sample times must be sorted");
  for (double t : sample_times) {
    if (!(t >= 0.0 && t <= T)) throw ConfigError("sample times must lie in [0, T]");
  }
  if (reference_level < 1 || reference_level > kMaxLevel) throw ConfigError("reference level out of range");
  try {
    make_family(family);
    Profile::parse(rho0);
    sim_params(b, seed).validate();
    for (const auto& w : cells) CellAddress::parse(w);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
}

SimParams ExperimentConfig::sim_params(double b_value, std::uint64_t seed_value) const {
  SimParams p;
  p.b = b_value;
  p.lambda_plus = lambda_plus;
  p.lambda_minus = lambda_minus;
  p.glauber = glauber;
  p.boundary = boundary;
  p.seed = seed_value;
  return p;
}

RateFamily make_family(const nlohmann::json& spec) {
  try {
    const auto name = spec.at("family").get<std::string>();
    if (name == "constant") return RateFamily::constant(spec.value("c0", 1.0));
    if (name == "dfl") return RateFamily::dfl(spec.value("gamma", 0.0));
    if (name == "ising") return RateFamily::ising(spec.value("beta", 0.0));
    if (name == "table") return RateFamily::from_json(spec.at("table"), spec.value("L0", 1));
    throw ConfigError("unknown rate family '" + name + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed rate family: ") + e.what());
  }
}

ReactionFn make_reaction(const RateFamily& family, int level) {
  const int range = family.range();
  const int n = std::min(kMaxLevel, std::max(level, range + 2));
  const auto g = build(n);
  return reaction_function(family, shape_catalog(g, range));
}

BoundaryCondition boundary_for(Regime regime, const std::array<double, 3>& lambda_plus,
                               const std::array<double, 3>& lambda_minus) {
  std::array<double, 3> rho_B{};
  std::array<double, 3> r{};
  for (std::size_t a = 0; a < 3; ++a) {
    rho_B[a] = lambda_plus[a] / (lambda_plus[a] + lambda_minus[a]);
    r[a] = lambda_plus[a] + lambda_minus[a];
  }
  switch (regime) {
    case Regime::Dirichlet:
      return BoundaryCondition::dirichlet(rho_B);
    case Regime::Robin:
      return BoundaryCondition::robin(rho_B, r);
    case Regime::Neumann: {
      auto bc = BoundaryCondition::neumann();
      bc.rho_B = rho_B;
      return bc;
    }
  }
  throw DomainError("unknown regime");
}

BoundaryCondition limit_boundary(double b, const std::array<double, 3>& lambda_plus,
                                 const std::array<double, 3>& lambda_minus) {
  return boundary_for(regime_for(b), lambda_plus, lambda_minus);
}

std::vector<NamedFunction> test_functions(const GasketGraph& g, const std::vector<std::string>& specs) {
  std::vector<NamedFunction> out;
  auto add_bump = [&](const CellAddress& w, int k) {
    out.push_back({"bump:" + w.str() + ":" + std::to_string(k), to_level(g, harmonic_bump(g, w, k))});
  };
  for (const auto& s : specs) {
    if (s == "one") {
      out.push_back({s, constant_function(g, 1.0)});
    } else if (s == "x") {
      out.push_back({s, sample(g, [](Point2 p) { return p.x; })});
    } else if (s == "y") {
      out.push_back({s, sample(g, [](Point2 p) { return p.y; })});
    } else if (s.rfind("bump:", 0) == 0 || s.rfind("bumps:", 0) == 0) {
      const auto first = s.find(':');
      const auto second = s.find(':', first + 1);
      if (second == std::string::npos) throw ConfigError("bump spec '" + s + "' needs <word>:<k>");
      const auto arg = s.substr(first + 1, second - first - 1);
      const int k = std::stoi(s.substr(second + 1));
      if (s[4] == 's') {
        for (const auto& w : all_words(std::stoi(arg))) add_bump(w, k);
      } else {
        add_bump(CellAddress::parse(arg), k);
      }
    } else {
      throw ConfigError("unknown test function '" + s + "'");
    }
  }
  return out;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

// -- Convergence ---------------------------------------------------------------

namespace {

struct ReplicaSet {
  std::vector<Observation> obs;
  std::uint64_t events = 0;
};

ReplicaSet simulate_replicas(const ExperimentConfig& cfg, const Model& model, double b, const ObservationSpec& spec,
                             const SiteFunction& rho0) {
  ReplicaSet set;
  set.obs.resize(static_cast<std::size_t>(cfg.replicas));
  parallel_for(set.obs.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seed + i;
    set.obs[i] = run(model, cfg.sim_params(b, seed), init_config(model.graph(), rho0, seed), spec);
  });
  for (const auto& o : set.obs) set.events += o.counts.total();
  return set;
}

ReactionFn reaction_for(const ExperimentConfig& cfg, const RateFamily& family) {
  return cfg.glauber ? make_reaction(family, cfg.reference_level) : ReactionFn::zero();
}

BoundaryCondition boundary_of(const ExperimentConfig& cfg, double b) {
  if (!cfg.boundary) return boundary_for(Regime::Neumann, cfg.lambda_plus, cfg.lambda_minus);
  return limit_boundary(b, cfg.lambda_plus, cfg.lambda_minus);
}

Trajectory reference_solution(const ExperimentConfig& cfg, const GasketGraph& g, const BoundaryCondition& bc,
                              const ReactionFn& phi, const std::vector<double>& times) {
  SolveOptions opts;
  opts.T = cfg.T;
  opts.dt = cfg.pde_dt;
  opts.record_times = times;
  return solve(g, bc, phi, Profile::parse(cfg.rho0).density(g), opts);
}

}  // namespace

ConvergenceReport converge(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto family = make_family(cfg.family);
  const auto phi = reaction_for(cfg, family);
  const auto times = sample_times(cfg);
  const auto gref = build(cfg.reference_level);
  const auto traj = reference_solution(cfg, gref, boundary_of(cfg, cfg.b), phi, times);
  const auto ref_fns = test_functions(gref, cfg.test_functions);
  std::vector<std::vector<double>> pde(ref_fns.size());
  for (std::size_t f = 0; f < ref_fns.size(); ++f) {
    for (double t : times) pde[f].push_back(pairing(ref_fns[f].values, traj.at(t)));
  }
  const auto profile = Profile::parse(cfg.rho0);

  ConvergenceReport report;
  for (int n : cfg.levels) {
    const auto g = build(n);
    const Model model(g, family);
    const auto fns = test_functions(g, cfg.test_functions);
    ObservationSpec spec;
    spec.times = times;
    for (const auto& f : fns) spec.functions.push_back(f.values);
    const auto set = simulate_replicas(cfg, model, cfg.b, spec, profile.density(g));

    const std::size_t reps = set.obs.size();
    std::vector<double> worst(reps, 0.0);
    std::vector<double> worst_one(reps, 0.0);
    bool has_one = false;
    for (std::size_t f = 0; f < fns.size(); ++f) {
      for (std::size_t k = 0; k < times.size(); ++k) {
        std::vector<double> vals(reps);
        std::vector<double> errs(reps);
        for (std::size_t i = 0; i < reps; ++i) {
          vals[i] = set.obs[i].empirical[f][k];
          errs[i] = std::abs(vals[i] - pde[f][k]);
          worst[i] = std::max(worst[i], errs[i]);
          if (fns[f].name == "one") worst_one[i] = std::max(worst_one[i], errs[i]);
        }
        has_one = has_one || fns[f].name == "one";
        const auto v = mean_se(vals);
        const auto e = mean_se(errs);
        report.rows.push_back({n, fns[f].name, times[k], v.mean, v.se, pde[f][k], e.mean, e.se});
      }
    }
    LevelError le;
    le.level = n;
    const auto w = mean_se(worst);
    le.error = w.mean;
    le.se = w.se;
    if (has_one) {
      const auto w1 = mean_se(worst_one);
      le.error_one = w1.mean;
      le.se_one = w1.se;
    }
    const double rho = std::clamp(pairing(constant_function(gref, 1.0), traj.at(times.back())), 0.0, 1.0);
    le.noise_floor = std::sqrt(rho * (1.0 - rho) / static_cast<double>(g.num_sites()));
    le.events = set.events;
    report.levels.push_back(le);
  }
  report.monotone = true;
  for (std::size_t i = 1; i < report.levels.size(); ++i) {
    const auto& a = report.levels[i - 1];
    const auto& b = report.levels[i];
    if (!(b.error < a.error)) report.monotone = false;
    if (a.error - b.error < kZ95 * (a.se + b.se)) report.undersampled = true;
  }
  const auto& first = report.levels.front();
  const auto& last = report.levels.back();
  report.ci_separated =
      report.levels.size() > 1 && first.error - kZ95 * first.se > last.error + kZ95 * last.se;
  return report;
}

// -- Regime sweep --------------------------------------------------------------

RegimeReport regime_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto family = make_family(cfg.family);
  const auto phi = reaction_for(cfg, family);
  RegimeReport report;
  report.times = sample_times(cfg);
  report.cells = cfg.cells.empty() ? std::vector<std::string>{"00", "11", "22"} : cfg.cells;
  std::vector<CellAddress> words;
  for (const auto& c : report.cells) words.push_back(CellAddress::parse(c));

  const auto gref = build(cfg.reference_level);
  constexpr std::array<Regime, 3> regimes{Regime::Dirichlet, Regime::Robin, Regime::Neumann};
  std::array<std::vector<std::vector<double>>, 3> pde;
  for (std::size_t r = 0; r < 3; ++r) {
    const auto traj =
        reference_solution(cfg, gref, boundary_for(regimes[r], cfg.lambda_plus, cfg.lambda_minus), phi, report.times);
    for (const auto& w : words) {
      const auto sites = cell_sites(gref, w);
      std::vector<double> row;
      for (double t : report.times) {
        const auto& rho = traj.at(t).values;
        double acc = 0.0;
        for (auto x : sites) acc += rho[static_cast<std::size_t>(x)];
        row.push_back(acc / static_cast<double>(sites.size()));
      }
      pde[r].push_back(std::move(row));
    }
  }

  const int n = cfg.levels.back();
  const auto g = build(n);
  const Model model(g, family);
  const auto rho0 = Profile::parse(cfg.rho0).density(g);
  ObservationSpec spec;
  spec.times = report.times;
  spec.cells = words;

  report.all_separated = true;
  for (double b : cfg.b_values) {
    RegimeCase rc;
    rc.b = b;
    rc.expected = cfg.boundary ? regime_for(b) : Regime::Neumann;
    rc.pde = pde;
    const auto set = simulate_replicas(cfg, model, b, spec, rho0);
    rc.events = set.events;
    double se2 = 0.0;
    std::size_t count = 0;
    rc.sim_mean.assign(words.size(), {});
    rc.sim_se.assign(words.size(), {});
    for (std::size_t c = 0; c < words.size(); ++c) {
      for (std::size_t k = 0; k < report.times.size(); ++k) {
        std::vector<double> vals;
        for (const auto& o : set.obs) vals.push_back(o.blocks[c][k]);
        const auto ms = mean_se(vals);
        rc.sim_mean[c].push_back(ms.mean);
        rc.sim_se[c].push_back(ms.se);
        se2 += ms.se * ms.se;
        ++count;
      }
    }
    rc.ci = kZ95 * std::sqrt(se2 / static_cast<double>(count));
    for (std::size_t r = 0; r < 3; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < words.size(); ++c) {
        for (std::size_t k = 0; k < report.times.size(); ++k) {
          const double d = rc.sim_mean[c][k] - pde[r][c][k];
          sq += d * d;
        }
      }
      rc.fits[r] = {regimes[r], std::sqrt(sq / static_cast<double>(count))};
    }
    const double matched = rc.fits[static_cast<std::size_t>(rc.expected)].rms_error;
    rc.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < 3; ++r) {
      if (regimes[r] != rc.expected) rc.min_margin = std::min(rc.min_margin, rc.fits[r].rms_error - matched);
    }
    rc.separated = rc.min_margin >= 2.0 * rc.ci;
    report.all_separated = report.all_separated && rc.separated;
    report.cases.push_back(std::move(rc));
  }
  return report;
}

// -- Replacement diagnostics ---------------------------------------------------

BlockGeometry::BlockGeometry(const Model& model, int block_level, int subcell_depth)
    : model_(&model), m_(block_level) {
  const auto& g = model.graph();
  if (block_level < 0 || block_level >= g.level()) throw BoundsError("block level must lie in [0, N - 1]");
  std::vector<SiteId> coarse(g.sites_at_level(block_level));
  std::iota(coarse.begin(), coarse.end(), 0);
  const auto dist = distances_from(g, coarse);
  const int range = model.family().range();
  const bool with_subcells = subcell_depth >= 1 && block_level + subcell_depth <= g.level() - 1;
  for (const auto& w : all_words(block_level)) {
    Cell cell;
    cell.sites = cell_sites(g, w);
    if (cell.sites.size() < 6) {
      skipped_.push_back(w);
      continue;
    }
    for (auto x : cell.sites) {
      if (dist[static_cast<std::size_t>(x)] >= range + 1) cell.core.push_back(x);
    }
    if (with_subcells) {
      for (const auto& v : all_words(subcell_depth)) cell.subcells.push_back(cell_sites(g, concat(w, v)));
    }
    cells_.push_back(w);
    data_.push_back(std::move(cell));
  }
}

double BlockGeometry::one_block(const Configuration& eta, const ReactionFn& phi) const {
  if (data_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& c : data_) {
    double g = 0.0;
    for (auto x : c.core) g += model_->rate_at(eta, x) * (1.0 - 2.0 * eta[x]);
    const double n = static_cast<double>(c.sites.size());
    total += std::abs(g / n - phi(block_average(eta, c.sites)));
  }
  return total / static_cast<double>(data_.size());
}

double BlockGeometry::two_block(const Configuration& eta) const {
  if (data_.empty() || data_.front().subcells.empty()) return std::nan("");
  double total = 0.0;
  for (const auto& c : data_) {
    double acc = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < c.subcells.size(); ++i) {
      for (std::size_t j = i + 1; j < c.subcells.size(); ++j) {
        acc += std::abs(block_average(eta, c.subcells[i]) - block_average(eta, c.subcells[j]));
        ++pairs;
      }
    }
    total += acc / pairs;
  }
  return total / static_cast<double>(data_.size());
}

BlockObserver::BlockObserver(const BlockGeometry& geometry, const ReactionFn& phi) : geo_(&geometry), phi_(phi) {}

double BlockObserver::one_value(std::size_t c) const {
  const double n = static_cast<double>(geo_->cell_data()[c].sites.size());
  return std::abs(gsum_[c] / n - phi_(count_[c] / n));
}

double BlockObserver::two_value(std::size_t c) const {
  const auto& subs = geo_->cell_data()[c].subcells;
  if (subs.empty()) return 0.0;
  const auto first = static_cast<std::size_t>(subcell_first_[c]);
  double acc = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    for (std::size_t j = i + 1; j < subs.size(); ++j) {
      acc += std::abs(subcount_[first + i] / static_cast<double>(subs[i].size()) -
                      subcount_[first + j] / static_cast<double>(subs[j].size()));
      ++pairs;
    }
  }
  return acc / pairs;
}

void BlockObserver::on_start(const Simulator& sim) {
  const auto& g = sim.graph();
  const auto& cells = geo_->cell_data();
  cell_of_.assign(g.num_sites(), -1);
  in_core_.assign(g.num_sites(), 0);
  subcell_of_.assign(g.num_sites(), -1);
  subcell_first_.clear();
  std::int32_t next_sub = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (auto x : cells[c].sites) cell_of_[static_cast<std::size_t>(x)] = static_cast<std::int32_t>(c);
    for (auto x : cells[c].core) in_core_[static_cast<std::size_t>(x)] = 1;
    subcell_first_.push_back(next_sub);
    for (const auto& sub : cells[c].subcells) {
      for (auto x : sub) subcell_of_[static_cast<std::size_t>(x)] = next_sub;
      ++next_sub;
    }
  }
  subcount_.assign(static_cast<std::size_t>(next_sub), 0.0);
  one_int_ = two_int_ = 0.0;
  refresh(sim);
}

void BlockObserver::refresh(const Simulator& sim) {
  const auto& cells = geo_->cell_data();
  const auto& eta = sim.config();
  count_.assign(cells.size(), 0.0);
  gsum_.assign(cells.size(), 0.0);
  std::fill(subcount_.begin(), subcount_.end(), 0.0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (auto x : cells[c].sites) {
      count_[c] += eta[x];
      const auto s = subcell_of_[static_cast<std::size_t>(x)];
      if (s >= 0) subcount_[static_cast<std::size_t>(s)] += eta[x];
    }
    for (auto x : cells[c].core) gsum_[c] += sim.glauber_rate(x) * (1.0 - 2.0 * eta[x]);
  }
  one_.assign(cells.size(), 0.0);
  two_.assign(cells.size(), 0.0);
  one_total_ = two_total_ = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    one_[c] = one_value(c);
    two_[c] = two_value(c);
    one_total_ += one_[c];
    two_total_ += two_[c];
  }
  events_ = 0;
}

void BlockObserver::collect(const Simulator& sim, const Event& e) {
  changed_.clear();
  touched_.clear();
  changed_.push_back(e.x);
  if (e.kind == EventKind::Swap) changed_.push_back(e.y);
  for (auto x : changed_) {
    if (std::find(touched_.begin(), touched_.end(), x) == touched_.end()) touched_.push_back(x);
    for (auto y : sim.model().dependents(x)) {
      if (std::find(touched_.begin(), touched_.end(), y) == touched_.end()) touched_.push_back(y);
    }
  }
}

void BlockObserver::apply(const Simulator& sim, double sign) {
  const auto& eta = sim.config();
  for (auto x : changed_) {
    const auto c = cell_of_[static_cast<std::size_t>(x)];
    if (c < 0) continue;
    count_[static_cast<std::size_t>(c)] += sign * eta[x];
    const auto s = subcell_of_[static_cast<std::size_t>(x)];
    if (s >= 0) subcount_[static_cast<std::size_t>(s)] += sign * eta[x];
  }
  for (auto x : touched_) {
    const auto c = cell_of_[static_cast<std::size_t>(x)];
    if (c < 0 || !in_core_[static_cast<std::size_t>(x)]) continue;
    gsum_[static_cast<std::size_t>(c)] += sign * sim.glauber_rate(x) * (1.0 - 2.0 * eta[x]);
  }
}

void BlockObserver::before_event(const Simulator& sim, const Event& e) {
  collect(sim, e);
  apply(sim, -1.0);
}

void BlockObserver::after_event(const Simulator& sim, const Event&) {
  apply(sim, 1.0);
  touched_cells_.clear();
  for (auto x : touched_) {
    const auto c = cell_of_[static_cast<std::size_t>(x)];
    if (c >= 0 && std::find(touched_cells_.begin(), touched_cells_.end(), c) == touched_cells_.end()) {
      touched_cells_.push_back(c);
    }
  }
  for (auto c32 : touched_cells_) {
    const auto c = static_cast<std::size_t>(c32);
    const double o = one_value(c);
    const double t = two_value(c);
    one_total_ += o - one_[c];
    two_total_ += t - two_[c];
    one_[c] = o;
    two_[c] = t;
  }
  if (++events_ >= (std::uint64_t{1} << 20)) refresh(sim);
}

void BlockObserver::on_interval(const Simulator&, double t0, double t1) {
  if (one_.empty()) return;
  const double n = static_cast<double>(one_.size());
  one_int_ += (t1 - t0) * one_total_ / n;
  two_int_ += (t1 - t0) * two_total_ / n;
}

ReplacementReport replacement_diagnostic(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto family = make_family(cfg.family);
  const auto phi = make_reaction(family, cfg.reference_level);
  const auto profile = Profile::parse(cfg.rho0);
  ReplacementReport report;
  for (int n : cfg.levels) {
    const auto g = build(n);
    const Model model(g, family);
    std::vector<BlockGeometry> geos;
    for (int m : cfg.block_levels) {
      if (m < n) geos.emplace_back(model, m, cfg.subcell_depth);
    }
    if (geos.empty()) continue;
    const auto rho0 = profile.density(g);
    const auto reps = static_cast<std::size_t>(cfg.replicas);
    std::vector<std::vector<double>> one(geos.size(), std::vector<double>(reps));
    std::vector<std::vector<double>> two(geos.size(), std::vector<double>(reps));
    std::vector<std::uint64_t> events(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t i) {
      std::vector<BlockObserver> observers;
      observers.reserve(geos.size());
      for (const auto& geo : geos) observers.emplace_back(geo, phi);
      std::vector<Observer*> ptrs;
      for (auto& o : observers) ptrs.push_back(&o);
      const std::uint64_t seed = cfg.seed + i;
      ObservationSpec spec;
      spec.times = {cfg.T};
      events[i] = run(model, cfg.sim_params(cfg.b, seed), init_config(g, rho0, seed), spec, ptrs).counts.total();
      for (std::size_t k = 0; k < geos.size(); ++k) {
        one[k][i] = observers[k].one_block_integral() / cfg.T;
        two[k][i] = observers[k].two_block_integral() / cfg.T;
      }
    });
    report.events = std::accumulate(events.begin(), events.end(), report.events);
    for (std::size_t k = 0; k < geos.size(); ++k) {
      ReplacementRow row;
      row.level = n;
      row.block_level = geos[k].block_level();
      const auto o = mean_se(one[k]);
      row.one_block = o.mean;
      row.one_block_se = o.se;
      if (geos[k].cell_data().empty() || geos[k].cell_data().front().subcells.empty()) {
        row.two_block = row.two_block_se = std::nan("");
      } else {
        const auto t = mean_se(two[k]);
        row.two_block = t.mean;
        row.two_block_se = t.se;
      }
      row.cells = geos[k].num_cells();
      row.skipped = geos[k].skipped().size();
      report.rows.push_back(row);
    }
  }
  return report;
}

// -- Martingale scaling ----------------------------------------------------------

SiteFunction martingale_test_function(const GasketGraph& g) {
  if (g.level() < 1) throw BoundsError("martingale test function needs N >= 1");
  return harmonic_extension(g, SiteFunction{1, {0.0, 0.0, 0.0, 1.0, 1.0, 1.0}});
}

MartingaleReport martingale_scaling(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto family = make_family(cfg.family);
  const auto profile = Profile::parse(cfg.rho0);
  MartingaleReport report;
  report.threshold = -std::log(3.0) + 0.3;
  for (int n : cfg.levels) {
    const auto g = build(n);
    const Model model(g, family);
    const FunctionPath path(martingale_test_function(g));
    const auto rho0 = profile.density(g);
    const auto reps = static_cast<std::size_t>(cfg.replicas);
    std::vector<double> values(reps);
    std::vector<double> comp(reps);
    std::vector<std::uint64_t> events(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t i) {
      MartingaleTracker tracker(path);
      Observer* ptr = &tracker;
      const std::uint64_t seed = cfg.seed + i;
      ObservationSpec spec;
      spec.times = {cfg.T};
      const auto obs = run(model, cfg.sim_params(cfg.b, seed), init_config(g, rho0, seed), spec, {&ptr, 1});
      values[i] = tracker.value(cfg.T);
      comp[i] = tracker.compensator();
      events[i] = obs.counts.total();
    });
    MartingaleLevel lv;
    lv.level = n;
    const auto ms = mean_se(values);
    lv.mean = ms.mean;
    lv.mean_se = ms.se;
    lv.variance = ms.se * ms.se * static_cast<double>(reps);
    lv.compensator = mean_se(comp).mean;
    lv.events = std::accumulate(events.begin(), events.end(), std::uint64_t{0});
    report.levels.push_back(lv);
  }
  if (report.levels.size() >= 2) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double k = static_cast<double>(report.levels.size());
    for (const auto& lv : report.levels) {
      const double x = lv.level;
      const double y = std::log(lv.variance);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    report.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    report.passed = report.slope <= report.threshold;
  }
  return report;
}

// -- Resistance scaling ------------------------------------------------------------

ResistanceReport resistance_scaling(const ExperimentConfig& cfg) {
  cfg.validate();
  ResistanceReport report;
  const int top = cfg.levels.back();
  for (int n = 0; n <= top; ++n) report.corner_resistance.push_back(effective_resistance(build(n), 1, 2));
  for (std::size_t n = 1; n < report.corner_resistance.size(); ++n) {
    const double ratio = report.corner_resistance[n] / report.corner_resistance[n - 1];
    report.max_ratio_error = std::max(report.max_ratio_error, std::abs(ratio - 5.0 / 3.0));
  }
  constexpr std::size_t kMaxCellsPerLength = 9;
  for (int n : cfg.levels) {
    if (n <= cfg.boundary_depth) continue;
    const auto g = build(n);
    const auto region = interior_region(g, cfg.boundary_depth);
    std::vector<char> inside(g.num_sites(), 0);
    for (auto x : region) inside[static_cast<std::size_t>(x)] = 1;
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(n));
    for (int len = 1; len <= n - 1; ++len) {
      std::vector<CellAddress> candidates;
      for (const auto& w : all_words(len)) {
        const auto sites = closed_cell_sites(g, w);
        if (std::all_of(sites.begin(), sites.end(), [&](SiteId x) { return inside[static_cast<std::size_t>(x)]; })) {
          candidates.push_back(w);
        }
      }
      if (candidates.size() > kMaxCellsPerLength) {
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(kMaxCellsPerLength);
      }
      const double scale = std::pow(5.0 / 3.0, n - len);
      for (const auto& w : candidates) {
        const auto sites = closed_cell_sites(g, w);
        std::uniform_int_distribution<std::size_t> pick(0, sites.size() - 1);
        for (int p = 0; p < cfg.pairs; ++p) {
          const SiteId z = sites[pick(rng)];
          const SiteId z2 = sites[pick(rng)];
          const double r = effective_resistance(g, region, z, z2);
          report.samples.push_back({n, w.str(), z, z2, r, r / scale});
        }
      }
    }
  }
  for (const auto& s : report.samples) {
    if (s.level < top || cfg.levels.size() == 1) {
      report.fitted_c = std::max(report.fitted_c, s.normalized);
    }
    if (s.level == top) report.top_level_max = std::max(report.top_level_max, s.normalized);
  }
  report.envelope_holds = !report.samples.empty() && report.top_level_max <= report.fitted_c * (1.0 + 1e-9);
  return report;
}

// -- Persistence ---------------------------------------------------------------------

void Table::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = cfg;
  switch (cfg.kind) {
    case ExperimentKind::Converge: {
      const auto rep = converge(cfg);
      Table rows{"convergence", {"level", "function", "t", "sim_mean", "sim_se", "pde", "abs_error", "abs_error_se"}, {}};
      for (const auto& r : rep.rows) {
        rows.rows.push_back({std::to_string(r.level), r.function, fmt(r.time), fmt(r.sim_mean), fmt(r.sim_se),
                             fmt(r.pde), fmt(r.abs_error), fmt(r.abs_error_se)});
      }
      Table levels{"levels", {"level", "error", "se", "error_one", "se_one", "noise_floor", "events"}, {}};
      for (const auto& l : rep.levels) {
        levels.rows.push_back({std::to_string(l.level), fmt(l.error), fmt(l.se), fmt(l.error_one), fmt(l.se_one),
                               fmt(l.noise_floor), std::to_string(l.events)});
        res.events += l.events;
      }
      res.tables = {rows, levels};
      res.summary = {{"monotone", rep.monotone}, {"ci_separated", rep.ci_separated},
                     {"undersampled", rep.undersampled}};
      res.passed = rep.monotone && rep.ci_separated;
      break;
    }
    case ExperimentKind::RegimeSweep: {
      const auto rep = regime_sweep(cfg);
      Table fits{"regime_fits", {"b", "expected", "regime", "rms_error", "ci", "separated"}, {}};
      Table blocks{"regime_blocks", {"b", "cell", "t", "sim_mean", "sim_se", "dirichlet", "robin", "neumann"}, {}};
      for (const auto& c : rep.cases) {
        for (const auto& f : c.fits) {
          fits.rows.push_back({fmt(c.b), to_string(c.expected), to_string(f.regime), fmt(f.rms_error), fmt(c.ci),
                               c.separated ? "1" : "0"});
        }
        for (std::size_t w = 0; w < rep.cells.size(); ++w) {
          for (std::size_t k = 0; k < rep.times.size(); ++k) {
            blocks.rows.push_back({fmt(c.b), rep.cells[w], fmt(rep.times[k]), fmt(c.sim_mean[w][k]),
                                   fmt(c.sim_se[w][k]), fmt(c.pde[0][w][k]), fmt(c.pde[1][w][k]),
                                   fmt(c.pde[2][w][k])});
          }
        }
        res.events += c.events;
      }
      res.tables = {fits, blocks};
      res.summary = {{"all_separated", rep.all_separated}};
      res.passed = rep.all_separated;
      break;
    }
    case ExperimentKind::Replacement: {
      const auto rep = replacement_diagnostic(cfg);
      Table t{"replacement",
              {"level", "block_level", "one_block", "one_block_se", "two_block", "two_block_se", "cells", "skipped"},
              {}};
      for (const auto& r : rep.rows) {
        t.rows.push_back({std::to_string(r.level), std::to_string(r.block_level), fmt(r.one_block),
                          fmt(r.one_block_se), fmt(r.two_block), fmt(r.two_block_se), std::to_string(r.cells),
                          std::to_string(r.skipped)});
      }
      res.tables = {t};
      res.summary = {{"rows", rep.rows.size()}};
      res.events = rep.events;
      break;
    }
    case ExperimentKind::Martingale: {
      const auto rep = martingale_scaling(cfg);
      Table t{"martingale", {"level", "mean", "mean_se", "variance", "compensator", "events"}, {}};
      for (const auto& l : rep.levels) {
        t.rows.push_back({std::to_string(l.level), fmt(l.mean), fmt(l.mean_se), fmt(l.variance), fmt(l.compensator),
                          std::to_string(l.events)});
        res.events += l.events;
      }
      res.tables = {t};
      res.summary = {{"slope", rep.slope}, {"threshold", rep.threshold}, {"passed", rep.passed}};
      res.passed = rep.passed;
      break;
    }
    case ExperimentKind::Resistance: {
      const auto rep = resistance_scaling(cfg);
      Table t{"resistance", {"level", "cell", "z", "z2", "resistance", "normalized"}, {}};
      for (const auto& s : rep.samples) {
        t.rows.push_back({std::to_string(s.level), s.cell, std::to_string(s.z), std::to_string(s.z2),
                          fmt(s.resistance), fmt(s.normalized)});
      }
      Table corners{"corner_resistance", {"level", "resistance"}, {}};
      for (std::size_t n = 0; n < rep.corner_resistance.size(); ++n) {
        corners.rows.push_back({std::to_string(n), fmt(rep.corner_resistance[n])});
      }
      res.tables = {t, corners};
      res.summary = {{"fitted_c", rep.fitted_c},
                     {"top_level_max", rep.top_level_max},
                     {"max_ratio_error", rep.max_ratio_error},
                     {"envelope_holds", rep.envelope_holds}};
      res.passed = rep.envelope_holds && rep.max_ratio_error <= 1e-6;
      break;
    }
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

nlohmann::json manifest(const ExperimentResult& result) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : result.tables) tables.push_back(t.name + ".csv");
  const auto& cfg = result.config;
  return {{"config", cfg.to_json()},
          {"version", version_string()},
          {"seeds", {{"base", cfg.seed}, {"count", cfg.replicas}, {"rule", "seed_i = base + i"}}},
          {"wall_seconds", result.wall_seconds},
          {"events", result.events},
          {"summary", result.summary},
          {"passed", result.passed},
          {"tables", tables}};
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : result.tables) t.write_csv((std::filesystem::path(dir) / (t.name + ".csv")).string());
  std::ofstream out(std::filesystem::path(dir) / "manifest.json");
  out << manifest(result).dump(2) << '\n';
}

}  // namespace sgk
