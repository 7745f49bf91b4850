#pragma once

// Level-N discretization of the Sierpinski gasket.
//
// Geometry is kept exact: every site is stored as integer coordinates in the
// triangular lattice basis e1 = (1, 0), e2 = (1/2, sin(pi/3)) scaled by 2^-N.
// The corners are a_0 = (0, 2^N), a_1 = (0, 0), a_2 = (2^N, 0) in that basis.
//
// Site ids are ordered by the level at which a site first appears: ids
// [0, |V_M|) are exactly V_M for every M <= N, with 0, 1, 2 = a_0, a_1, a_2.
// A function on V_M is therefore the prefix of a function on V_N.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

namespace sgk {

using SiteId = std::int32_t;
using EdgeId = std::int32_t;
using Ratio = boost::rational<std::int64_t>;

inline constexpr int kMaxLevel = 12;

// Integer offset/position in the triangular lattice basis (e1, e2).
struct LatticePoint {
  std::int64_t u = 0;
  std::int64_t v = 0;
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

// Exact site coordinates: x = x_num / denom, y = (y_num / denom) * sin(pi/3),
// with denom = 2^(N+1) shared by all sites of a level-N graph.
struct DyadicPoint {
  std::int64_t x_num = 0;
  std::int64_t y_num = 0;
  std::int64_t denom = 1;
  friend bool operator==(const DyadicPoint&, const DyadicPoint&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Word w = w_1 ... w_j over {0,1,2}, most significant letter first.
class CellAddress {
 public:
  CellAddress() = default;
  explicit CellAddress(std::vector<std::uint8_t> letters);
  // Parses "0120"; the empty string is the empty word.
  static CellAddress parse(std::string_view text);
  // Word of the given length whose base-3 value is `index`.
  static CellAddress from_index(int length, std::int64_t index);

  int length() const { return static_cast<int>(letters_.size()); }
  std::span<const std::uint8_t> letters() const { return letters_; }
  // Lexicographic (base-3) position among words of the same length.
  std::int64_t index() const;
  CellAddress child(int letter) const;
  std::string str() const;

  friend bool operator==(const CellAddress&, const CellAddress&) = default;

 private:
  std::vector<std::uint8_t> letters_;
};

// Corner j of the cell is phi_w(a_j).
using Triangle = std::array<SiteId, 3>;

class GasketGraph {
 public:
  int level() const { return level_; }
  std::size_t num_sites() const { return lattice_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  // |V_m| for 0 <= m <= level.
  std::size_t sites_at_level(int m) const;
  std::size_t num_interior() const { return num_sites() - 3; }

  static constexpr bool is_boundary(SiteId x) { return x < 3; }
  static constexpr std::array<SiteId, 3> boundary() { return {0, 1, 2}; }

  std::span<const SiteId> neighbors(SiteId x) const;
  std::span<const EdgeId> incident_edges(SiteId x) const;
  std::pair<SiteId, SiteId> edge(EdgeId e) const { return edges_[static_cast<std::size_t>(e)]; }
  int degree(SiteId x) const { return static_cast<int>(neighbors(x).size()); }

  // Lattice coordinates at this graph's resolution.
  LatticePoint lattice(SiteId x) const { return lattice_[static_cast<std::size_t>(x)]; }
  DyadicPoint coordinates(SiteId x) const;
  Point2 position(SiteId x) const;

  // Cells of level m in lexicographic word order.
  std::span<const Triangle> cells(int m) const;
  const Triangle& cell(const CellAddress& w) const;

  // Level at which site x first appears.
  int birth_level(SiteId x) const;

 private:
  friend GasketGraph build(int level);

  int level_ = 0;
  std::vector<LatticePoint> lattice_;
  std::vector<std::pair<SiteId, SiteId>> edges_;
  std::vector<std::int32_t> adj_offsets_;
  std::vector<SiteId> adj_sites_;
  std::vector<EdgeId> adj_edges_;
  std::vector<std::vector<Triangle>> cells_;
  std::vector<std::size_t> level_sizes_;
};

// Builds G_N for 0 <= N <= kMaxLevel; throws BoundsError otherwise.
GasketGraph build(int level);

// V_N^w = V_N cap K_w minus the corners of K_w, sorted by id.
std::vector<SiteId> cell_sites(const GasketGraph& g, const CellAddress& w);
// All of V_N cap K_w, corners included, sorted by id.
std::vector<SiteId> closed_cell_sites(const GasketGraph& g, const CellAddress& w);

// Shortest-path length L(x, y).
int graph_distance(const GasketGraph& g, SiteId x, SiteId y);
// Distances from a set of sources to every site.
std::vector<int> distances_from(const GasketGraph& g, std::span<const SiteId> sources);

// Lambda_x = { y : L(x, y) <= L0 } for interior x, sorted by id.
std::vector<SiteId> neighborhood(const GasketGraph& g, SiteId x, int range);

DyadicPoint coordinates(const GasketGraph& g, SiteId x);

// Image of x under the 120 degree rotation about the centroid (a_0 -> a_1 -> a_2 -> a_0).
SiteId rotate_site(const GasketGraph& g, SiteId x);

// V_N^I: V_N with the corner cells K_{aa...a} (|.| = boundary_depth) removed,
// keeping the two junction sites of each removed cell.
std::vector<SiteId> interior_region(const GasketGraph& g, int boundary_depth);

// -- Shapes ------------------------------------------------------------------

// Rescaled neighborhood 2^N (Lambda_x - x). Points are lattice offsets;
// canonical order puts the origin first, then lexicographic by (x, y).
struct Shape {
  std::vector<LatticePoint> points;
  int rotation_class = 0;  // index of the rotation orbit in the catalog
  int rotation = 0;        // shape = R^rotation(orbit representative)

  std::size_t size() const { return points.size(); }
  // Stable 16-hex-digit key used by table rate families.
  std::string key() const;
  // Indices (in canonical order) of the points at unit distance from the origin.
  std::vector<int> unit_neighbors() const;
  friend bool operator==(const Shape& a, const Shape& b) { return a.points == b.points; }
};

// Sorts points into canonical order; the origin must be present.
std::vector<LatticePoint> canonical_order(std::vector<LatticePoint> points);
// Rotation by 120 degrees about the origin, k times.
LatticePoint rotate_offset(LatticePoint p, int k);
Shape rotate(const Shape& s, int k);

struct ShapeCatalog {
  int range = 1;  // L0
  int level = 0;  // N the ratios were counted at
  std::vector<Shape> shapes;
  std::vector<std::int64_t> counts;
  std::vector<Ratio> ratios;  // r_Lambda^N, sums to exactly 1

  int find(const Shape& s) const;  // -1 if absent
  int find_key(std::string_view key) const;
};

// Per-site classification of neighborhoods; valid for any N >= 1.
struct LocalShapes {
  ShapeCatalog catalog;
  std::vector<int> site_shape;  // -1 on V_0
  // Neighborhood of each interior site, listed in its shape's canonical order.
  std::vector<std::int32_t> offsets;
  std::vector<SiteId> sites;

  std::span<const SiteId> neighborhood_of(SiteId x) const {
    const auto i = static_cast<std::size_t>(x);
    return {sites.data() + offsets[i], static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }
};

LocalShapes classify_neighborhoods(const GasketGraph& g, int range);

// Shape catalog with exact ratios. Requires N >= L0 + 2.
ShapeCatalog shape_catalog(const GasketGraph& g, int range);

}  // namespace sgk
