#include "sgk/gasket.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <unordered_map>

#include "sgk/errors.hpp"

namespace sgk {

namespace {

std::uint64_t pack(LatticePoint p) {
  return (static_cast<std::uint64_t>(p.u) << 32) | static_cast<std::uint64_t>(p.v);
}

}  // namespace

// -- CellAddress ----------------------------------------------------------------

CellAddress::CellAddress(std::vector<std::uint8_t> letters) : letters_(std::move(letters)) {
  for (auto l : letters_) {
    if (l > 2) throw DomainError("cell address letters must be 0, 1 or 2");
  }
}

CellAddress CellAddress::parse(std::string_view text) {
  std::vector<std::uint8_t> letters;
  letters.reserve(text.size());
  for (char c : text) {
    if (c < '0' || c > '2') throw DomainError("invalid cell address '" + std::string(text) + "'");
    letters.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return CellAddress(std::move(letters));
}

CellAddress CellAddress::from_index(int length, std::int64_t index) {
  std::vector<std::uint8_t> letters(static_cast<std::size_t>(length));
  for (int i = length - 1; i >= 0; --i) {
    letters[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(index % 3);
    index /= 3;
  }
  if (index != 0) throw BoundsError("word index out of range");
  return CellAddress(std::move(letters));
}

std::int64_t CellAddress::index() const {
  std::int64_t idx = 0;
  for (auto l : letters_) idx = idx * 3 + l;
  return idx;
}

CellAddress CellAddress::child(int letter) const {
  auto letters = letters_;
  letters.push_back(static_cast<std::uint8_t>(letter));
  return CellAddress(std::move(letters));
}

std::string CellAddress::str() const {
  std::string s;
  for (auto l : letters_) s.push_back(static_cast<char>('0' + l));
  return s;
}

// -- GasketGraph ----------------------------------------------------------------

GasketGraph build(int level) {
  if (level < 0 || level > kMaxLevel) {
    throw BoundsError("gasket level " + std::to_string(level) + " outside [0, " +
                      std::to_string(kMaxLevel) + "]");
  }
  GasketGraph g;
  g.level_ = level;
  const std::int64_t scale = std::int64_t{1} << level;
  const std::size_t total = 3 * ((static_cast<std::size_t>(std::pow(3, level)) + 1)) / 2;
  g.lattice_.reserve(total);
  g.lattice_.push_back({0, scale});  // a_0
  g.lattice_.push_back({0, 0});      // a_1
  g.lattice_.push_back({scale, 0});  // a_2
  g.cells_.push_back({Triangle{0, 1, 2}});
  g.level_sizes_.push_back(3);

  // Each edge of a level-(m-1) cell belongs to that cell only, so its midpoint
  // is created exactly once; shared corners are shared through their ids.
  for (int m = 1; m <= level; ++m) {
    const auto& parents = g.cells_.back();
    std::vector<Triangle> children;
    children.reserve(parents.size() * 3);
    for (const auto& c : parents) {
      auto midpoint = [&](SiteId a, SiteId b) {
        const auto pa = g.lattice_[static_cast<std::size_t>(a)];
        const auto pb = g.lattice_[static_cast<std::size_t>(b)];
        g.lattice_.push_back({(pa.u + pb.u) / 2, (pa.v + pb.v) / 2});
        return static_cast<SiteId>(g.lattice_.size() - 1);
      };
      const SiteId m01 = midpoint(c[0], c[1]);
      const SiteId m02 = midpoint(c[0], c[2]);
      const SiteId m12 = midpoint(c[1], c[2]);
      children.push_back({c[0], m01, m02});
      children.push_back({m01, c[1], m12});
      children.push_back({m02, m12, c[2]});
    }
    g.cells_.push_back(std::move(children));
    g.level_sizes_.push_back(g.lattice_.size());
  }

  const auto n = g.lattice_.size();
  const auto& top = g.cells_.back();
  g.edges_.reserve(top.size() * 3);
  for (const auto& c : top) {
    g.edges_.emplace_back(c[0], c[1]);
    g.edges_.emplace_back(c[0], c[2]);
    g.edges_.emplace_back(c[1], c[2]);
  }
  std::vector<std::int32_t> deg(n, 0);
  for (const auto& [a, b] : g.edges_) {
    ++deg[static_cast<std::size_t>(a)];
    ++deg[static_cast<std::size_t>(b)];
  }
  g.adj_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.adj_offsets_[i + 1] = g.adj_offsets_[i] + deg[i];
  g.adj_sites_.resize(static_cast<std::size_t>(g.adj_offsets_[n]));
  g.adj_edges_.resize(g.adj_sites_.size());
  std::vector<std::int32_t> fill(g.adj_offsets_.begin(), g.adj_offsets_.end() - 1);
  for (std::size_t e = 0; e < g.edges_.size(); ++e) {
    const auto [a, b] = g.edges_[e];
    auto put = [&](SiteId from, SiteId to) {
      const auto k = static_cast<std::size_t>(fill[static_cast<std::size_t>(from)]++);
      g.adj_sites_[k] = to;
      g.adj_edges_[k] = static_cast<EdgeId>(e);
    };
    put(a, b);
    put(b, a);
  }
  return g;
}

std::size_t GasketGraph::sites_at_level(int m) const {
  if (m < 0 || m > level_) throw BoundsError("level outside [0, N]");
  return level_sizes_[static_cast<std::size_t>(m)];
}

std::span<const SiteId> GasketGraph::neighbors(SiteId x) const {
  const auto i = static_cast<std::size_t>(x);
  return {adj_sites_.data() + adj_offsets_[i],
          static_cast<std::size_t>(adj_offsets_[i + 1] - adj_offsets_[i])};
}

std::span<const EdgeId> GasketGraph::incident_edges(SiteId x) const {
  const auto i = static_cast<std::size_t>(x);
  return {adj_edges_.data() + adj_offsets_[i],
          static_cast<std::size_t>(adj_offsets_[i + 1] - adj_offsets_[i])};
}

DyadicPoint GasketGraph::coordinates(SiteId x) const {
  const auto p = lattice(x);
  return {2 * p.u + p.v, 2 * p.v, std::int64_t{2} << level_};
}

Point2 GasketGraph::position(SiteId x) const {
  const auto d = coordinates(x);
  const double denom = static_cast<double>(d.denom);
  return {static_cast<double>(d.x_num) / denom,
          static_cast<double>(d.y_num) / denom * (std::numbers::sqrt3 / 2.0)};
}

std::span<const Triangle> GasketGraph::cells(int m) const {
  if (m < 0 || m > level_) throw BoundsError("cell level outside [0, N]");
  return cells_[static_cast<std::size_t>(m)];
}

const Triangle& GasketGraph::cell(const CellAddress& w) const {
  if (w.length() > level_) throw BoundsError("word longer than the graph level");
  return cells_[static_cast<std::size_t>(w.length())][static_cast<std::size_t>(w.index())];
}

int GasketGraph::birth_level(SiteId x) const {
  const auto id = static_cast<std::size_t>(x);
  for (int m = 0; m <= level_; ++m) {
    if (id < level_sizes_[static_cast<std::size_t>(m)]) return m;
  }
  throw BoundsError("site id out of range");
}

DyadicPoint coordinates(const GasketGraph& g, SiteId x) {
  if (x < 0 || static_cast<std::size_t>(x) >= g.num_sites()) throw BoundsError("site id out of range");
  return g.coordinates(x);
}

// -- Cells and distances ----------------------------------------------------------

std::vector<SiteId> closed_cell_sites(const GasketGraph& g, const CellAddress& w) {
  if (w.length() > g.level()) throw BoundsError("word longer than the graph level");
  const int depth = g.level() - w.length();
  std::int64_t span = 1;
  for (int i = 0; i < depth; ++i) span *= 3;
  const auto first = static_cast<std::size_t>(w.index() * span);
  const auto cells = g.cells(g.level());
  std::vector<SiteId> out;
  out.reserve(static_cast<std::size_t>(3 * span));
  for (std::size_t k = first; k < first + static_cast<std::size_t>(span); ++k) {
    out.insert(out.end(), cells[k].begin(), cells[k].end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<SiteId> cell_sites(const GasketGraph& g, const CellAddress& w) {
  auto all = closed_cell_sites(g, w);
  const auto& corners = g.cell(w);
  std::erase_if(all, [&](SiteId x) {
    return x == corners[0] || x == corners[1] || x == corners[2];
  });
  return all;
}

std::vector<int> distances_from(const GasketGraph& g, std::span<const SiteId> sources) {
  std::vector<int> dist(g.num_sites(), -1);
  std::deque<SiteId> queue;
  for (auto s : sources) {
    if (dist[static_cast<std::size_t>(s)] != 0) {
      dist[static_cast<std::size_t>(s)] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const SiteId x = queue.front();
    queue.pop_front();
    for (auto y : g.neighbors(x)) {
      auto& d = dist[static_cast<std::size_t>(y)];
      if (d < 0) {
        d = dist[static_cast<std::size_t>(x)] + 1;
        queue.push_back(y);
      }
    }
  }
  return dist;
}

int graph_distance(const GasketGraph& g, SiteId x, SiteId y) {
  if (x < 0 || y < 0 || static_cast<std::size_t>(x) >= g.num_sites() ||
      static_cast<std::size_t>(y) >= g.num_sites()) {
    throw BoundsError("site id out of range");
  }
  if (x == y) return 0;
  const SiteId src[] = {x};
  return distances_from(g, src)[static_cast<std::size_t>(y)];
}

namespace {

// Ball of radius `range` by breadth-first search limited to that depth.
std::vector<SiteId> ball(const GasketGraph& g, SiteId x, int range,
                         std::vector<int>& scratch) {
  std::vector<SiteId> visited{x};
  scratch[static_cast<std::size_t>(x)] = 0;
  for (std::size_t head = 0; head < visited.size(); ++head) {
    const SiteId z = visited[head];
    const int d = scratch[static_cast<std::size_t>(z)];
    if (d == range) continue;
    for (auto y : g.neighbors(z)) {
      auto& dy = scratch[static_cast<std::size_t>(y)];
      if (dy < 0) {
        dy = d + 1;
        visited.push_back(y);
      }
    }
  }
  for (auto z : visited) scratch[static_cast<std::size_t>(z)] = -1;
  return visited;
}

}  // namespace

std::vector<SiteId> neighborhood(const GasketGraph& g, SiteId x, int range) {
  if (x < 0 || static_cast<std::size_t>(x) >= g.num_sites()) throw BoundsError("site id out of range");
  if (GasketGraph::is_boundary(x)) throw DomainError("neighborhood requires an interior site");
  if (range < 0) throw DomainError("neighborhood range must be nonnegative");
  std::vector<int> scratch(g.num_sites(), -1);
  auto out = ball(g, x, range, scratch);
  std::sort(out.begin(), out.end());
  return out;
}

SiteId rotate_site(const GasketGraph& g, SiteId x) {
  static thread_local const GasketGraph* cached_graph = nullptr;
  static thread_local std::unordered_map<std::uint64_t, SiteId> index;
  if (cached_graph != &g || index.size() != g.num_sites()) {
    index.clear();
    index.reserve(g.num_sites());
    for (std::size_t i = 0; i < g.num_sites(); ++i) {
      index.emplace(pack(g.lattice(static_cast<SiteId>(i))), static_cast<SiteId>(i));
    }
    cached_graph = &g;
  }
  const std::int64_t scale = std::int64_t{1} << g.level();
  const auto p = g.lattice(x);
  return index.at(pack({scale - p.u - p.v, p.u}));
}

std::vector<SiteId> interior_region(const GasketGraph& g, int boundary_depth) {
  if (boundary_depth < 1 || boundary_depth >= g.level()) {
    throw BoundsError("boundary depth must satisfy 1 <= N_B <= N - 1");
  }
  std::vector<char> removed(g.num_sites(), 0);
  for (int a = 0; a < 3; ++a) {
    const CellAddress corner_cell(std::vector<std::uint8_t>(static_cast<std::size_t>(boundary_depth),
                                                            static_cast<std::uint8_t>(a)));
    const auto& corners = g.cell(corner_cell);
    for (auto x : closed_cell_sites(g, corner_cell)) {
      const bool junction = (x == corners[0] || x == corners[1] || x == corners[2]) && x != a;
      if (!junction) removed[static_cast<std::size_t>(x)] = 1;
    }
  }
  std::vector<SiteId> out;
  for (std::size_t i = 0; i < g.num_sites(); ++i) {
    if (!removed[i]) out.push_back(static_cast<SiteId>(i));
  }
  return out;
}

// -- Shapes ------------------------------------------------------------------------

LatticePoint rotate_offset(LatticePoint p, int k) {
  k = ((k % 3) + 3) % 3;
  for (int i = 0; i < k; ++i) p = {-p.u - p.v, p.u};
  return p;
}

std::vector<LatticePoint> canonical_order(std::vector<LatticePoint> points) {
  const LatticePoint origin{0, 0};
  auto it = std::find(points.begin(), points.end(), origin);
  if (it == points.end()) throw DomainError("shape must contain the origin");
  std::iter_swap(points.begin(), it);
  // Cartesian x is proportional to 2u + v and y to v.
  std::sort(points.begin() + 1, points.end(), [](const LatticePoint& a, const LatticePoint& b) {
    const auto ax = 2 * a.u + a.v;
    const auto bx = 2 * b.u + b.v;
    return ax != bx ? ax < bx : a.v < b.v;
  });
  return points;
}

Shape rotate(const Shape& s, int k) {
  std::vector<LatticePoint> pts;
  pts.reserve(s.points.size());
  for (const auto& p : s.points) pts.push_back(rotate_offset(p, k));
  Shape out;
  out.points = canonical_order(std::move(pts));
  out.rotation_class = s.rotation_class;
  out.rotation = (s.rotation + k) % 3;
  return out;
}

std::string Shape::key() const {
  // FNV-1a over the canonical point list.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::int64_t value) {
    auto bits = static_cast<std::uint64_t>(value);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::int64_t>(points.size()));
  for (const auto& p : points) {
    mix(p.u);
    mix(p.v);
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xfU];
    h >>= 4;
  }
  return out;
}

std::vector<int> Shape::unit_neighbors() const {
  std::vector<int> out;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& p = points[i];
    // Unit lattice vectors: +-e1, +-e2, +-(e1 - e2).
    const bool unit = (std::abs(p.u) + std::abs(p.v) == 1) || (p.u == 1 && p.v == -1) ||
                      (p.u == -1 && p.v == 1);
    if (unit) out.push_back(static_cast<int>(i));
  }
  return out;
}

int ShapeCatalog::find(const Shape& s) const {
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].points == s.points) return static_cast<int>(i);
  }
  return -1;
}

int ShapeCatalog::find_key(std::string_view key) const {
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].key() == key) return static_cast<int>(i);
  }
  return -1;
}

LocalShapes classify_neighborhoods(const GasketGraph& g, int range) {
  if (range < 1) throw DomainError("neighborhood range L0 must be >= 1");
  if (g.level() < 1) throw PreconditionError("neighborhoods need an interior site (N >= 1)");
  const auto n = g.num_sites();

  // Group interior sites by their canonical offset list.
  std::vector<std::vector<LatticePoint>> site_points(n);
  std::vector<std::vector<SiteId>> site_order(n);
  std::vector<int> scratch(n, -1);
  for (std::size_t i = 3; i < n; ++i) {
    const auto x = static_cast<SiteId>(i);
    const auto ball_sites = ball(g, x, range, scratch);
    const auto px = g.lattice(x);
    std::vector<std::pair<LatticePoint, SiteId>> pairs;
    pairs.reserve(ball_sites.size());
    for (auto y : ball_sites) {
      const auto py = g.lattice(y);
      pairs.push_back({{py.u - px.u, py.v - px.v}, y});
    }
    std::vector<LatticePoint> pts;
    for (const auto& p : pairs) pts.push_back(p.first);
    pts = canonical_order(std::move(pts));
    std::vector<SiteId> order;
    order.reserve(pts.size());
    for (const auto& p : pts) {
      for (const auto& [q, y] : pairs) {
        if (q == p) {
          order.push_back(y);
          break;
        }
      }
    }
    site_points[i] = std::move(pts);
    site_order[i] = std::move(order);
  }

  // Distinct shapes sorted by (size, point list) for a level-independent order.
  std::vector<std::vector<LatticePoint>> distinct;
  for (std::size_t i = 3; i < n; ++i) distinct.push_back(site_points[i]);
  auto point_list_less = [](const std::vector<LatticePoint>& a, const std::vector<LatticePoint>& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  };
  std::sort(distinct.begin(), distinct.end(), point_list_less);
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  LocalShapes out;
  auto& cat = out.catalog;
  cat.range = range;
  cat.level = g.level();
  for (auto& pts : distinct) cat.shapes.push_back(Shape{pts, 0, 0});

  // Rotation orbits: the representative is the smallest rotated point list.
  std::vector<std::vector<LatticePoint>> reps;
  for (auto& s : cat.shapes) {
    std::vector<LatticePoint> best = s.points;
    int best_k = 0;
    for (int k = 1; k < 3; ++k) {
      auto r = rotate(Shape{s.points, 0, 0}, 3 - k).points;  // R^{-k}(s)
      if (point_list_less(r, best)) {
        best = std::move(r);
        best_k = k;
      }
    }
    s.rotation = best_k;
    reps.push_back(std::move(best));
  }
  auto sorted_reps = reps;
  std::sort(sorted_reps.begin(), sorted_reps.end(), point_list_less);
  sorted_reps.erase(std::unique(sorted_reps.begin(), sorted_reps.end()), sorted_reps.end());
  for (std::size_t i = 0; i < cat.shapes.size(); ++i) {
    cat.shapes[i].rotation_class = static_cast<int>(
        std::lower_bound(sorted_reps.begin(), sorted_reps.end(), reps[i], point_list_less) -
        sorted_reps.begin());
  }

  cat.counts.assign(cat.shapes.size(), 0);
  out.site_shape.assign(n, -1);
  out.offsets.assign(n + 1, 0);
  for (std::size_t i = 3; i < n; ++i) {
    const auto idx = static_cast<int>(
        std::lower_bound(distinct.begin(), distinct.end(), site_points[i], point_list_less) -
        distinct.begin());
    out.site_shape[i] = idx;
    ++cat.counts[static_cast<std::size_t>(idx)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.offsets[i + 1] = out.offsets[i] + static_cast<std::int32_t>(site_order[i].size());
  }
  out.sites.reserve(static_cast<std::size_t>(out.offsets[n]));
  for (std::size_t i = 0; i < n; ++i) {
    out.sites.insert(out.sites.end(), site_order[i].begin(), site_order[i].end());
  }
  const auto interior = static_cast<std::int64_t>(g.num_interior());
  for (auto c : cat.counts) cat.ratios.emplace_back(c, interior);
  return out;
}

ShapeCatalog shape_catalog(const GasketGraph& g, int range) {
  if (range < 1) throw DomainError("neighborhood range L0 must be >= 1");
  if (g.level() < range + 2) {
    throw PreconditionError("shape catalog needs N >= L0 + 2 (got N = " + std::to_string(g.level()) +
                            ", L0 = " + std::to_string(range) + ")");
  }
  return classify_neighborhoods(g, range).catalog;
}

}  // namespace sgk
