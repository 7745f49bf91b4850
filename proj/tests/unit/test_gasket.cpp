#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "sgk/errors.hpp"
#include "sgk/gasket.hpp"

using namespace sgk;

namespace {

std::int64_t pow3(int n) {
  std::int64_t p = 1;
  while (n-- > 0) p *= 3;
  return p;
}

std::size_t sites_formula(int n) { return static_cast<std::size_t>(3 * (pow3(n) + 1) / 2); }

}  // namespace

TEST_CASE("site and edge counts") {
  for (int n = 0; n <= 8; ++n) {
    const auto g = build(n);
    CHECK(g.num_sites() == sites_formula(n));
    CHECK(g.num_edges() == static_cast<std::size_t>(pow3(n + 1)));
    for (int m = 0; m <= n; ++m) CHECK(g.sites_at_level(m) == sites_formula(m));
  }
  CHECK_THROWS_AS(build(-1), BoundsError);
  CHECK_THROWS_AS(build(kMaxLevel + 1), BoundsError);
}

TEST_CASE("degrees, edges and handshake") {
  const auto g = build(5);
  std::size_t deg_sum = 0;
  for (SiteId x = 0; x < static_cast<SiteId>(g.num_sites()); ++x) {
    CHECK(g.degree(x) == (GasketGraph::is_boundary(x) ? 2 : 4));
    deg_sum += static_cast<std::size_t>(g.degree(x));
  }
  CHECK(deg_sum == 2 * g.num_edges());
  std::set<std::pair<SiteId, SiteId>> seen;
  for (EdgeId e = 0; e < static_cast<EdgeId>(g.num_edges()); ++e) {
    auto [u, v] = g.edge(e);
    CHECK(u != v);
    const auto pu = g.lattice(u);
    const auto pv = g.lattice(v);
    const auto du = pu.u - pv.u;
    const auto dv = pu.v - pv.v;
    // Unit lattice step: (+-1, 0), (0, +-1) or +-(1, -1).
    CHECK(((std::abs(du) == 1 && dv == 0) || (du == 0 && std::abs(dv) == 1) || (du == -dv && std::abs(du) == 1)));
    CHECK(seen.insert({std::min(u, v), std::max(u, v)}).second);
  }
}

TEST_CASE("coarse levels are prefixes") {
  const auto fine = build(6);
  for (int m = 0; m <= 5; ++m) {
    const auto coarse = build(m);
    const std::int64_t scale = std::int64_t{1} << (6 - m);
    for (SiteId x = 0; x < static_cast<SiteId>(coarse.num_sites()); ++x) {
      CHECK(fine.lattice(x).u == coarse.lattice(x).u * scale);
      CHECK(fine.lattice(x).v == coarse.lattice(x).v * scale);
      CHECK(fine.birth_level(x) <= m);
    }
  }
}

TEST_CASE("corner coordinates and exact site table") {
  const auto g = build(3);
  CHECK(g.coordinates(0) == DyadicPoint{8, 16, 16});
  CHECK(g.coordinates(1) == DyadicPoint{0, 0, 16});
  CHECK(g.coordinates(2) == DyadicPoint{16, 0, 16});
  const auto p = g.position(0);
  CHECK(p.x == doctest::Approx(0.5));
  CHECK(p.y == doctest::Approx(std::sqrt(3.0) / 2.0));
}

TEST_CASE("cell addresses") {
  const auto w = CellAddress::parse("0212");
  CHECK(w.str() == "0212");
  CHECK(w.index() == 0 * 27 + 2 * 9 + 1 * 3 + 2);
  CHECK(CellAddress::from_index(4, w.index()) == w);
  CHECK(w.child(1).str() == "02121");
  CHECK(CellAddress::parse("").length() == 0);
  CHECK_THROWS(CellAddress::parse("013"));
}

TEST_CASE("cells and cell sites") {
  const int n = 5;
  const auto g = build(n);
  for (int m = 0; m <= n; ++m) CHECK(g.cells(m).size() == static_cast<std::size_t>(pow3(m)));
  for (int len = 1; len <= 3; ++len) {
    std::vector<int> cover(g.num_sites(), 0);
    for (std::int64_t k = 0; k < pow3(len); ++k) {
      const auto w = CellAddress::from_index(len, k);
      const auto inner = cell_sites(g, w);
      const auto closed = closed_cell_sites(g, w);
      CHECK(inner.size() == sites_formula(n - len) - 3);
      CHECK(closed.size() == sites_formula(n - len));
      for (auto x : inner) ++cover[static_cast<std::size_t>(x)];
    }
    // Open cells are disjoint; everything outside them is a cell corner, i.e. in V_len.
    for (std::size_t x = 0; x < g.num_sites(); ++x) {
      CHECK(cover[x] == (x < sites_formula(len) ? 0 : 1));
    }
  }
  // Corner j of K_w is phi_w(a_j): the cell "0" has a_0 as its corner 0.
  CHECK(g.cell(CellAddress::parse("0"))[0] == 0);
  CHECK(g.cell(CellAddress::parse("1"))[1] == 1);
  CHECK(g.cell(CellAddress::parse("2"))[2] == 2);
}

TEST_CASE("graph distances") {
  for (int n = 0; n <= 5; ++n) {
    const auto g = build(n);
    CHECK(graph_distance(g, 1, 2) == (1 << n));
    CHECK(graph_distance(g, 0, 0) == 0);
  }
  const auto g = build(4);
  const std::vector<SiteId> src{0, 1, 2};
  const auto d = distances_from(g, src);
  for (SiteId x = 0; x < static_cast<SiteId>(g.num_sites()); ++x) {
    CHECK(d[static_cast<std::size_t>(x)] ==
          std::min({graph_distance(g, x, 0), graph_distance(g, x, 1), graph_distance(g, x, 2)}));
  }
}

TEST_CASE("rotation is a graph automorphism of order 3") {
  const auto g = build(4);
  std::set<std::pair<SiteId, SiteId>> edges;
  for (EdgeId e = 0; e < static_cast<EdgeId>(g.num_edges()); ++e) {
    auto [u, v] = g.edge(e);
    edges.insert({std::min(u, v), std::max(u, v)});
  }
  CHECK(rotate_site(g, 0) == 1);
  CHECK(rotate_site(g, 1) == 2);
  CHECK(rotate_site(g, 2) == 0);
  for (SiteId x = 0; x < static_cast<SiteId>(g.num_sites()); ++x) {
    CHECK(rotate_site(g, rotate_site(g, rotate_site(g, x))) == x);
  }
  for (auto [u, v] : edges) {
    const auto ru = rotate_site(g, u);
    const auto rv = rotate_site(g, v);
    CHECK(edges.count({std::min(ru, rv), std::max(ru, rv)}) == 1);
  }
}

TEST_CASE("neighborhoods") {
  const auto g = build(4);
  for (SiteId x = 3; x < static_cast<SiteId>(g.num_sites()); ++x) {
    const auto nb = neighborhood(g, x, 1);
    CHECK(nb.size() == 5);
    CHECK(std::find(nb.begin(), nb.end(), x) != nb.end());
    for (auto y : nb) CHECK(graph_distance(g, x, y) <= 1);
  }
}

TEST_CASE("range-1 catalog: one shape in three rotations") {
  for (int n = 3; n <= 6; ++n) {
    const auto cat = shape_catalog(build(n), 1);
    REQUIRE(cat.shapes.size() == 3);
    Ratio total = 0;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(cat.ratios[i] == Ratio(1, 3));
      CHECK(cat.shapes[i].rotation_class == 0);
      CHECK(cat.shapes[i].size() == 5);
      total += cat.ratios[i];
      count += cat.counts[i];
    }
    CHECK(total == Ratio(1));
    CHECK(count == static_cast<std::int64_t>(sites_formula(n) - 3));
  }
}

TEST_CASE("range-2 catalog") {
  for (int n = 4; n <= 6; ++n) {
    const auto g = build(n);
    const auto cat = shape_catalog(g, 2);
    Ratio total = 0;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < cat.shapes.size(); ++i) {
      total += cat.ratios[i];
      count += cat.counts[i];
      CHECK(cat.ratios[i] == Ratio(cat.counts[i], static_cast<std::int64_t>(g.num_interior())));
      // The catalog is closed under rotation.
      CHECK(cat.find(rotate(cat.shapes[i], 1)) >= 0);
    }
    CHECK(total == Ratio(1));
    CHECK(count == static_cast<std::int64_t>(g.num_interior()));
    CHECK(cat.shapes.size() == 19);
  }
  CHECK_THROWS_AS(shape_catalog(build(3), 2), PreconditionError);
}

TEST_CASE("site shapes agree with direct neighborhoods") {
  const auto g = build(5);
  const auto local = classify_neighborhoods(g, 2);
  for (SiteId x = 3; x < static_cast<SiteId>(g.num_sites()); ++x) {
    const auto& s = local.catalog.shapes[static_cast<std::size_t>(local.site_shape[static_cast<std::size_t>(x)])];
    const auto nb = local.neighborhood_of(x);
    REQUIRE(nb.size() == s.size());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      CHECK(g.lattice(nb[i]).u - g.lattice(x).u == s.points[i].u);
      CHECK(g.lattice(nb[i]).v - g.lattice(x).v == s.points[i].v);
    }
  }
}

TEST_CASE("interior region") {
  for (int n = 3; n <= 6; ++n) {
    const auto g = build(n);
    for (int nb = 1; nb <= 2; ++nb) {
      const auto region = interior_region(g, nb);
      CHECK(region.size() == sites_formula(n) - 3 * (sites_formula(n - nb) - 2));
      CHECK(std::is_sorted(region.begin(), region.end()));
      for (auto x : region) CHECK(!GasketGraph::is_boundary(x));
    }
  }
}
