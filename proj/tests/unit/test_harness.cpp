#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sgk/errors.hpp"
#include "sgk/harness.hpp"

using namespace sgk;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_converge() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Converge;
  cfg.levels = {2, 3};
  cfg.replicas = 6;
  cfg.family = {{"family", "dfl"}, {"gamma", 0.4}};
  cfg.lambda_plus = {0.8, 0.2, 0.5};
  cfg.lambda_minus = {0.2, 0.8, 0.5};
  cfg.rho0 = "const:0.3";
  cfg.T = 0.1;
  cfg.sample_times = {0.05, 0.1};
  cfg.reference_level = 3;
  cfg.test_functions = {"one", "x", "bumps:1:1"};
  cfg.threads = 1;
  return cfg;
}

SiteId other_end(const GasketGraph& g, EdgeId e, SiteId x) {
  const auto [u, v] = g.edge(e);
  return u == x ? v : u;
}

}  // namespace

TEST_CASE("config round trip and validation") {
  auto cfg = small_converge();
  cfg.cells = {"00", "12"};
  const auto back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  auto bad = cfg.to_json();
  bad["levels"] = {5, 4};
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
  bad = cfg.to_json();
  bad["replicas"] = 0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
  bad = cfg.to_json();
  bad["family"] = {{"family", "dfl"}, {"gamma", 2.0}};
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
  bad = cfg.to_json();
  bad["rho0"] = "const:1.5";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
  bad["rho0"] = "affine:0.5,1,0";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
  bad["rho0"] = "affine:1,-1,0";
  CHECK_NOTHROW(ExperimentConfig::from_json(bad));
  bad = cfg.to_json();
  bad["kind"] = "fluctuations";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
  bad = cfg.to_json();
  bad["sample_times"] = {0.5};
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
}

TEST_CASE("mean and standard error") {
  const auto ms = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == doctest::Approx(2.5));
  CHECK(ms.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(mean_se({7.0}).se == 0.0);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw DomainError("boom");
                               }),
                  DomainError);
}

TEST_CASE("test function specs") {
  const auto g = build(3);
  const auto fns = test_functions(g, {"one", "x", "bumps:1:2", "bump:01:1"});
  REQUIRE(fns.size() == 6);
  CHECK(fns[2].name == "bump:0:2");
  CHECK(fns[5].name == "bump:01:1");
  for (const auto& f : fns) CHECK(f.values.size() == g.num_sites());
  CHECK_THROWS_AS(test_functions(g, {"z"}), ConfigError);
}

TEST_CASE("boundary conditions from reservoir rates") {
  const std::array<double, 3> lp{9.0, 1.0, 2.0}, lm{1.0, 3.0, 2.0};
  const auto robin = limit_boundary(5.0 / 3.0, lp, lm);
  CHECK(robin.regime == Regime::Robin);
  CHECK(robin.rho_B[0] == doctest::Approx(0.9));
  CHECK(robin.r[1] == doctest::Approx(4.0));
  CHECK(limit_boundary(1.0, lp, lm).regime == Regime::Dirichlet);
  const auto neumann = limit_boundary(3.0, lp, lm);
  CHECK(neumann.regime == Regime::Neumann);
  CHECK(neumann.r == std::array<double, 3>{0.0, 0.0, 0.0});
}

TEST_CASE("block quantities on deterministic configurations") {
  const auto g = build(5);
  const Model model(g, RateFamily::constant(1.0));
  const auto phi = make_reaction(model.family(), 5);
  const BlockGeometry geo(model, 2, 1);
  CHECK(geo.num_cells() == 9);

  const Configuration ones(g, std::vector<std::uint8_t>(g.num_sites(), 1));
  // Every core site contributes c (1 - 2) = -1 and Phi(1) = -1.
  std::vector<SiteId> coarse(g.sites_at_level(2));
  std::iota(coarse.begin(), coarse.end(), 0);
  double expect = 0.0;
  for (std::int64_t k = 0; k < 9; ++k) {
    const auto sites = cell_sites(g, CellAddress::from_index(2, k));
    double core = 0.0;
    for (auto x : sites) {
      int d = 1 << 20;
      for (auto y : coarse) d = std::min(d, graph_distance(g, x, y));
      if (d >= 2) core += 1.0;
    }
    expect += std::abs(-core / sites.size() + 1.0);
  }
  CHECK(geo.one_block(ones, phi) == doctest::Approx(expect / 9.0));
  CHECK(geo.two_block(ones) == 0.0);

  const BlockGeometry tiny(model, 4, 1);
  CHECK(tiny.num_cells() == 0);
  CHECK(tiny.skipped().size() == 81);
}

TEST_CASE("block observer integrals match a brute-force replay") {
  const auto g = build(4);
  const Model model(g, RateFamily::dfl(0.5));
  const auto phi = make_reaction(model.family(), 4);
  const BlockGeometry geo(model, 1, 1);
  SimParams p;
  p.seed = 12;
  const auto init = init_config(g, constant_function(g, 0.3), 12);
  BlockObserver obs(geo, phi);
  EventLog log;
  Simulator sim(model, p, init);
  sim.add_observer(obs);
  sim.add_observer(log);
  const double T = 0.02;
  sim.advance_to(T);
  REQUIRE(log.events.size() > 100);

  auto eta = init;
  double one = 0.0, two = 0.0, last = 0.0;
  for (const auto& e : log.events) {
    one += (e.time - last) * geo.one_block(eta, phi);
    two += (e.time - last) * geo.two_block(eta);
    last = e.time;
    if (e.kind == EventKind::Swap) {
      for (auto edge : g.incident_edges(e.x)) {
        if (other_end(g, edge, e.x) == e.y) eta.swap(g, edge);
      }
    } else {
      eta.flip(g, e.x);
    }
  }
  one += (T - last) * geo.one_block(eta, phi);
  two += (T - last) * geo.two_block(eta);
  CHECK(obs.one_block_integral() == doctest::Approx(one).epsilon(1e-9));
  CHECK(obs.two_block_integral() == doctest::Approx(two).epsilon(1e-9));
}

TEST_CASE("replacement diagnostic reports skipped cells") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Replacement;
  cfg.levels = {4};
  cfg.block_levels = {1, 3};
  cfg.replicas = 2;
  cfg.T = 0.02;
  cfg.reference_level = 4;
  cfg.threads = 1;
  const auto rep = replacement_diagnostic(cfg);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].cells == 3);
  CHECK(rep.rows[0].skipped == 0);
  CHECK(rep.rows[1].cells == 0);
  CHECK(rep.rows[1].skipped == 27);
  CHECK(std::isnan(rep.rows[1].two_block));
}

TEST_CASE("equilibrium convergence error sits at the noise floor") {
  auto cfg = small_converge();
  cfg.levels = {3, 4};
  cfg.replicas = 32;
  cfg.family = {{"family", "constant"}, {"c0", 1.0}};
  cfg.lambda_plus = {1.0, 1.0, 1.0};
  cfg.lambda_minus = {1.0, 1.0, 1.0};
  cfg.rho0 = "const:0.5";
  cfg.test_functions = {"one"};
  cfg.reference_level = 4;
  const auto rep = converge(cfg);
  for (const auto& lv : rep.levels) {
    CHECK(lv.noise_floor == doctest::Approx(0.5 / std::sqrt(1.5 * (std::pow(3.0, lv.level) + 1))));
    CHECK(lv.error_one <= 3.0 * lv.noise_floor);
  }
}

TEST_CASE("results do not depend on the worker count") {
  auto a = small_converge();
  auto b = small_converge();
  b.threads = 3;
  const auto ra = run_experiment(a);
  const auto rb = run_experiment(b);
  REQUIRE(ra.tables.size() == rb.tables.size());
  for (std::size_t i = 0; i < ra.tables.size(); ++i) CHECK(ra.tables[i].rows == rb.tables[i].rows);
}

TEST_CASE("a manifest reproduces its CSV output") {
  const auto dir = fs::temp_directory_path() / "sgk_manifest_test";
  fs::remove_all(dir);
  const auto first = run_experiment(small_converge());
  write_outputs(first, (dir / "a").string());
  const auto doc = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(doc.at("seeds").at("base") == 1);
  CHECK(doc.contains("version"));
  const auto again = run_experiment(ExperimentConfig::from_json(doc.at("config")));
  write_outputs(again, (dir / "b").string());
  for (const auto& t : first.tables) {
    const auto name = t.name + ".csv";
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    CHECK(!slurp(dir / "a" / name).empty());
  }
  fs::remove_all(dir);
}

TEST_CASE("martingale variance grows linearly in time") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Martingale;
  cfg.levels = {3};
  cfg.replicas = 400;
  cfg.family = {{"family", "dfl"}, {"gamma", 0.4}};
  cfg.rho0 = "const:0.3";
  cfg.threads = 1;
  cfg.T = 0.1;
  const double v1 = martingale_scaling(cfg).levels[0].variance;
  cfg.T = 0.2;
  const double v2 = martingale_scaling(cfg).levels[0].variance;
  CHECK(v2 / v1 >= 1.5);
  CHECK(v2 / v1 <= 2.5);
}

TEST_CASE("resistance scaling on small levels") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Resistance;
  cfg.levels = {3, 4};
  cfg.pairs = 5;
  const auto rep = resistance_scaling(cfg);
  CHECK(rep.max_ratio_error <= 1e-9);
  CHECK(rep.corner_resistance.size() == 5);
  CHECK(!rep.samples.empty());
  for (const auto& s : rep.samples) {
    CHECK(s.resistance >= 0.0);
    if (s.z == s.z2) CHECK(s.resistance == 0.0);
  }
}

TEST_CASE("regime sweep structure") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::RegimeSweep;
  cfg.levels = {3};
  cfg.replicas = 4;
  cfg.glauber = false;
  cfg.lambda_plus = {9, 9, 9};
  cfg.lambda_minus = {1, 1, 1};
  cfg.rho0 = "const:0.2";
  cfg.T = 0.02;
  cfg.reference_level = 3;
  cfg.threads = 1;
  const auto rep = regime_sweep(cfg);
  REQUIRE(rep.cases.size() == 3);
  CHECK(rep.cases[0].expected == Regime::Dirichlet);
  CHECK(rep.cases[1].expected == Regime::Robin);
  CHECK(rep.cases[2].expected == Regime::Neumann);
  CHECK(rep.cells == std::vector<std::string>{"00", "11", "22"});
  // Without reaction the Neumann solution stays at the initial density.
  for (const auto& row : rep.cases[0].pde[2]) {
    for (double v : row) CHECK(v == doctest::Approx(0.2));
  }
}
