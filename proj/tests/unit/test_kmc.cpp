#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "sgk/errors.hpp"
#include "sgk/harness.hpp"
#include "sgk/kmc.hpp"

using namespace sgk;

namespace {

SimParams params(std::uint64_t seed, double b = 1.0) {
  SimParams p;
  p.b = b;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("configuration caches follow swaps and flips") {
  const auto g = build(3);
  auto eta = init_config(g, constant_function(g, 0.5), 4);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 2000; ++k) {
    if (k % 3 == 0) {
      eta.flip(g, static_cast<SiteId>(rng() % g.num_sites()));
    } else if (!eta.discordant().empty()) {
      const auto e = eta.discordant()[rng() % eta.discordant().size()];
      const auto [x, y] = g.edge(e);
      const auto before = eta[x] + eta[y];
      eta.swap(g, e);
      CHECK(eta[x] + eta[y] == before);
    }
  }
  CHECK(eta.cache_consistent(g));
  std::int64_t count = 0;
  for (auto v : eta.occupancy()) count += v;
  CHECK(eta.particles() == count);
  for (EdgeId e = 0; e < static_cast<EdgeId>(g.num_edges()); ++e) {
    const auto [x, y] = g.edge(e);
    CHECK(eta.is_discordant(e) == (eta[x] != eta[y]));
    if (!eta.is_discordant(e)) CHECK_THROWS_AS(eta.swap(g, e), PreconditionError);
  }
}

TEST_CASE("initial configurations") {
  const auto g = build(6);
  const auto rho = constant_function(g, 0.3);
  const auto a = init_config(g, rho, 5);
  const auto b = init_config(g, rho, 5);
  const auto c = init_config(g, rho, 6);
  CHECK(std::equal(a.occupancy().begin(), a.occupancy().end(), b.occupancy().begin()));
  CHECK(!std::equal(a.occupancy().begin(), a.occupancy().end(), c.occupancy().begin()));
  const double n = static_cast<double>(g.num_sites());
  const double sd = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(static_cast<double>(a.particles()) / n - 0.3) <= 5.0 * sd);
  CHECK(init_config(g, constant_function(g, 1.0), 1).particles() == static_cast<std::int64_t>(g.num_sites()));
}

TEST_CASE("empirical measure and block averages") {
  const auto g = build(3);
  std::vector<std::uint8_t> occ(g.num_sites(), 0);
  for (std::size_t x = 0; x < occ.size(); x += 2) occ[x] = 1;
  const Configuration eta(g, occ);
  const auto f = sample(g, [](Point2 p) { return p.x; });
  double expect = 0.0;
  for (std::size_t x = 0; x < occ.size(); ++x) expect += occ[x] * f.values[x];
  CHECK(empirical(eta, f) == doctest::Approx(expect / occ.size()));
  const auto w = CellAddress::parse("12");
  const auto sites = cell_sites(g, w);
  double count = 0.0;
  for (auto x : sites) count += occ[static_cast<std::size_t>(x)];
  CHECK(block_average(g, eta, w) == doctest::Approx(count / sites.size()));
  CHECK_THROWS(block_average(g, eta, CellAddress::parse("012")));
}

TEST_CASE("model rates agree with the rate family") {
  const auto g = build(4);
  const auto family = RateFamily::dfl(0.3);
  const Model model(g, family);
  const auto eta = init_config(g, constant_function(g, 0.5), 2);
  for (SiteId x = 3; x < static_cast<SiteId>(g.num_sites()); ++x) {
    const auto shape_id = model.shapes().site_shape[static_cast<std::size_t>(x)];
    const auto& shape = model.shapes().catalog.shapes[static_cast<std::size_t>(shape_id)];
    std::vector<std::uint8_t> xi;
    for (auto y : model.shapes().neighborhood_of(x)) xi.push_back(eta[y]);
    CHECK(model.rate_at(eta, x) == rate(family, shape, xi));
    // x reads its own occupancy, so x is among its dependents.
    const auto deps = model.dependents(x);
    CHECK(std::find(deps.begin(), deps.end(), x) != deps.end());
  }
}

TEST_CASE("parameter validation") {
  auto p = params(1);
  p.b = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = params(1);
  p.lambda_minus[1] = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  CHECK(params(1).rho_B(0) == 0.5);
}

TEST_CASE("pure exclusion conserves particles") {
  const auto g = build(4);
  const Model model(g, RateFamily::constant(1.0));
  auto p = params(3);
  p.glauber = false;
  p.boundary = false;
  p.debug_check_interval = 1000;
  const auto init = init_config(g, constant_function(g, 0.4), 3);
  Simulator sim(model, p, init);
  for (double t : {0.01, 0.05, 0.1}) {
    sim.advance_to(t);
    CHECK(sim.config().particles() == init.particles());
  }
  CHECK(sim.counts().flips == 0);
  CHECK(sim.counts().boundary == 0);
  CHECK(sim.counts().swaps > 0);
}

TEST_CASE("trajectories do not depend on the sampling grid") {
  const auto g = build(3);
  const Model model(g, RateFamily::ising(0.4));
  auto p = params(17, 5.0 / 3.0);
  p.debug_check_interval = 1;
  const auto init = init_config(g, constant_function(g, 0.3), 17);

  EventLog one_shot;
  Simulator a(model, p, init);
  a.add_observer(one_shot);
  a.advance_to(0.2);

  EventLog stepped;
  Simulator b(model, p, init);
  b.add_observer(stepped);
  for (int k = 1; k <= 13; ++k) b.advance_to(0.2 * k / 13.0);

  REQUIRE(one_shot.events.size() == stepped.events.size());
  CHECK(one_shot.events == stepped.events);
  CHECK(std::equal(a.config().occupancy().begin(), a.config().occupancy().end(), b.config().occupancy().begin()));
  CHECK(a.time() == b.time());
}

TEST_CASE("run samples the requested observables") {
  const auto g = build(3);
  const Model model(g, RateFamily::constant(1.0));
  ObservationSpec spec;
  spec.times = {0.0, 0.05, 0.1};
  spec.functions = {constant_function(g, 1.0)};
  spec.cells = {CellAddress::parse("0")};
  const auto init = init_config(g, constant_function(g, 0.2), 1);
  const auto obs = run(model, params(1), init, spec);
  REQUIRE(obs.empirical.size() == 1);
  REQUIRE(obs.empirical[0].size() == 3);
  CHECK(obs.empirical[0][0] == doctest::Approx(static_cast<double>(init.particles()) / g.num_sites()));
  CHECK(obs.blocks[0].size() == 3);
  CHECK(obs.boundary.size() == 3);
  spec.times = {0.1, 0.05};
  CHECK_THROWS(run(model, params(1), init, spec));
}

TEST_CASE("symmetric reservoirs keep the density at one half") {
  // rho_B = 1/2 and Phi(1/2) = 0: Bernoulli(1/2) is invariant.
  const auto g = build(3);
  const Model model(g, RateFamily::constant(1.0));
  ObservationSpec spec;
  for (int k = 1; k <= 20; ++k) spec.times.push_back(k / 20.0);
  spec.functions = {constant_function(g, 1.0)};
  std::vector<double> means;
  for (std::uint64_t r = 0; r < 64; ++r) {
    const auto obs = run(model, params(100 + r), init_config(g, constant_function(g, 0.5), 100 + r), spec);
    means.push_back(std::accumulate(obs.empirical[0].begin(), obs.empirical[0].end(), 0.0) / spec.times.size());
  }
  const auto ms = mean_se(means);
  CHECK(std::abs(ms.mean - 0.5) <= 3.0 * ms.se);
}

TEST_CASE("martingale of the zero function vanishes") {
  const auto g = build(3);
  const Model model(g, RateFamily::dfl(0.4));
  MartingaleTracker tracker(FunctionPath(constant_function(g, 0.0)));
  Simulator sim(model, params(2), init_config(g, constant_function(g, 0.5), 2));
  sim.add_observer(tracker);
  sim.advance_to(0.3);
  CHECK(tracker.value(0.3) == 0.0);
  CHECK(tracker.compensator() == 0.0);
}

TEST_CASE("martingale has mean zero and variance equal to its compensator") {
  const auto g = build(3);
  const Model model(g, RateFamily::dfl(0.4));
  const FunctionPath path(martingale_test_function(g));
  auto p = params(0, 5.0 / 3.0);
  p.lambda_plus = {3.0, 1.0, 0.5};
  p.lambda_minus = {1.0, 2.0, 0.5};
  std::vector<double> values, comps;
  for (std::uint64_t r = 0; r < 600; ++r) {
    p.seed = 500 + r;
    MartingaleTracker tracker(path);
    Simulator sim(model, p, init_config(g, constant_function(g, 0.3), p.seed));
    sim.add_observer(tracker);
    sim.advance_to(0.2);
    values.push_back(tracker.value(0.2));
    comps.push_back(tracker.compensator());
    CHECK(tracker.warnings().empty());
  }
  const auto m = mean_se(values);
  CHECK(std::abs(m.mean) <= 4.0 * m.se);
  std::vector<double> squares;
  for (double v : values) squares.push_back(v * v);
  const auto sq = mean_se(squares);
  const auto qv = mean_se(comps);
  CHECK(std::abs(sq.mean - qv.mean) <= 4.0 * std::hypot(sq.se, qv.se));
}

TEST_CASE("time-dependent martingale integrand") {
  // F_t = (1 - t) F: the drift includes the d/dt term, so the mean must still vanish.
  const auto g = build(2);
  const Model model(g, RateFamily::constant(1.0));
  const auto f = martingale_test_function(g);
  SiteFunction zero{g.level(), std::vector<double>(g.num_sites(), 0.0)};
  const FunctionPath path({0.0, 1.0}, {f, zero});
  std::vector<double> values;
  for (std::uint64_t r = 0; r < 800; ++r) {
    MartingaleTracker tracker(path);
    Simulator sim(model, params(900 + r), init_config(g, constant_function(g, 0.8), 900 + r));
    sim.add_observer(tracker);
    sim.advance_to(0.5);
    values.push_back(tracker.value(0.5));
  }
  const auto m = mean_se(values);
  CHECK(std::abs(m.mean) <= 4.0 * m.se);
}
