#include <doctest.h>

#include <cmath>

#include "sgk/errors.hpp"
#include "sgk/harness.hpp"
#include "sgk/rates.hpp"

using namespace sgk;

namespace {

double dfl_closed_form(double gamma, double rho) {
  const double u = 2.0 * rho - 1.0;
  return -gamma * gamma * u * u * u + (2.0 * gamma - 1.0) * u;
}

// Every interior site has four unit neighbors, so the Ising reaction term is
// shape independent: E[(1 - 2 xi_0) exp(-beta sigma_0 S)] with S a sum of
// four independent +-1 spins.
double ising_closed_form(double beta, double rho) {
  const double up = rho * std::exp(-beta) + (1.0 - rho) * std::exp(beta);
  const double down = rho * std::exp(beta) + (1.0 - rho) * std::exp(-beta);
  return (1.0 - rho) * std::pow(down, 4) - rho * std::pow(up, 4);
}

// Brute-force enumeration over the five occupancies of one neighborhood.
double ising_enumeration(double beta, double rho) {
  double acc = 0.0;
  for (int mask = 0; mask < 32; ++mask) {
    double weight = 1.0;
    int field = 0;
    for (int i = 0; i < 5; ++i) {
      const bool occ = (mask >> i) & 1;
      weight *= occ ? rho : 1.0 - rho;
      if (i > 0) field += occ ? 1 : -1;
    }
    const int s0 = (mask & 1) ? 1 : -1;
    acc += weight * (1.0 - 2.0 * (mask & 1)) * std::exp(-beta * s0 * field);
  }
  return acc;
}

}  // namespace

TEST_CASE("constant family") {
  const auto cat = shape_catalog(build(3), 1);
  for (double c0 : {0.5, 1.0, 2.5}) {
    const auto family = RateFamily::constant(c0);
    for (int i = 0; i <= 100; ++i) {
      const double rho = i / 100.0;
      CHECK(std::abs(phi(family, cat, rho) - c0 * (1.0 - 2.0 * rho)) <= 1e-14);
    }
    CHECK(validate(family, cat).max_rate == c0);
  }
  CHECK_THROWS_AS(RateFamily::constant(0.0), ParameterError);
}

TEST_CASE("DFL reaction term is the closed-form cubic") {
  const auto cat = shape_catalog(build(3), 1);
  for (double gamma : {0.0, 0.25, 0.5, 0.9}) {
    const auto family = RateFamily::dfl(gamma);
    const auto poly = phi_polynomial(family, cat);
    for (int i = 0; i <= 100; ++i) {
      const double rho = i / 100.0;
      CHECK(std::abs(phi(family, cat, rho) - dfl_closed_form(gamma, rho)) <= 1e-12);
      CHECK(std::abs(poly(rho) - dfl_closed_form(gamma, rho)) <= 1e-12);
    }
    CHECK(poly.degree(1e-12) == (gamma > 0.0 ? 3 : 1));
  }
  CHECK_THROWS_AS(RateFamily::dfl(1.0), ParameterError);
  CHECK_THROWS_AS(RateFamily::dfl(-0.1), ParameterError);
}

TEST_CASE("DFL rates take the three tabulated values") {
  const double g = 0.3;
  const auto cat = shape_catalog(build(3), 1);
  const auto family = RateFamily::dfl(g);
  for (const auto& s : cat.shapes) {
    for (std::uint64_t xi = 0; xi < 32; ++xi) {
      const double c = rate(family, s, xi);
      const bool ok = std::abs(c - (1 - g) * (1 - g)) < 1e-15 || std::abs(c - (1 + g) * (1 + g)) < 1e-15 ||
                      std::abs(c - (1 - g * g)) < 1e-15;
      CHECK(ok);
    }
  }
}

TEST_CASE("Ising reaction term") {
  const auto cat = shape_catalog(build(3), 1);
  for (double beta : {0.1, 0.5, 1.0}) {
    const auto family = RateFamily::ising(beta);
    const auto poly = phi_polynomial(family, cat);
    CHECK(poly.degree(1e-12) == 5);
    for (int i = 0; i <= 100; ++i) {
      const double rho = i / 100.0;
      const double oracle = ising_enumeration(beta, rho);
      CHECK(std::abs(oracle - ising_closed_form(beta, rho)) <= 1e-12);
      CHECK(std::abs(phi(family, cat, rho) - oracle) <= 1e-12);
      CHECK(std::abs(poly(rho) - oracle) <= 1e-11);
    }
  }
}

TEST_CASE("range-2 catalog reproduces range-independent families") {
  const auto cat = shape_catalog(build(5), 2);
  const auto family = RateFamily::dfl(0.4);
  for (int i = 0; i <= 20; ++i) {
    const double rho = i / 20.0;
    CHECK(std::abs(phi(family, cat, rho) - dfl_closed_form(0.4, rho)) <= 1e-12);
  }
}

TEST_CASE("Lipschitz bound dominates the derivative") {
  const auto cat = shape_catalog(build(3), 1);
  for (const auto& family : {RateFamily::dfl(0.8), RateFamily::ising(0.7), RateFamily::constant(2.0)}) {
    const auto r = reaction_function(family, cat);
    const auto d = r.polynomial().derivative();
    for (int i = 0; i <= 200; ++i) CHECK(std::abs(d(i / 200.0)) <= r.lipschitz() + 1e-12);
  }
}

TEST_CASE("table families") {
  const auto cat = shape_catalog(build(3), 1);
  const auto dfl = RateFamily::dfl(0.2);
  nlohmann::json doc;
  doc["L0"] = 1;
  for (const auto& s : cat.shapes) {
    for (std::uint64_t xi = 0; xi < 32; ++xi) doc[s.key()][occupancy_bits(xi, s.size())] = rate(dfl, s, xi);
  }
  const auto table = RateFamily::from_json(doc);
  CHECK(table.range() == 1);
  for (int i = 0; i <= 10; ++i) {
    CHECK(std::abs(phi(table, cat, i / 10.0) - phi(dfl, cat, i / 10.0)) <= 1e-15);
  }
  CHECK_NOTHROW(validate(table, cat));

  auto missing = doc;
  missing.erase(cat.shapes[1].key());
  CHECK_THROWS_AS(validate(RateFamily::from_json(missing), cat), ConfigError);

  auto negative = doc;
  negative[cat.shapes[0].key()]["10000"] = -1.0;
  CHECK_THROWS_AS(validate(RateFamily::from_json(negative), cat), ValidationError);

  CHECK_THROWS_AS(RateFamily::from_json(nlohmann::json::array()), ConfigError);
}

TEST_CASE("compiled rates match direct evaluation") {
  const auto cat = shape_catalog(build(4), 1);
  const auto family = RateFamily::ising(0.3);
  const CompiledRates compiled(family, cat);
  for (std::size_t s = 0; s < cat.shapes.size(); ++s) {
    for (std::uint64_t xi = 0; xi < 32; ++xi) {
      CHECK(compiled(static_cast<int>(s), xi) == rate(family, cat.shapes[s], xi));
    }
  }
  CHECK(compiled.max_rate() == doctest::Approx(std::exp(4 * 0.3)));
}

TEST_CASE("family JSON round trip") {
  for (const auto& family : {RateFamily::dfl(0.4), RateFamily::ising(0.5), RateFamily::constant(1.5)}) {
    const auto back = make_family(family.to_json());
    CHECK(back.name() == family.name());
  }
}
