#include "sgk/rates.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "sgk/errors.hpp"

namespace sgk {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool bit(std::uint64_t xi, int i) { return ((xi >> i) & 1U) != 0; }

// First pair of unit neighbors lying on a line through the origin.
std::pair<int, int> collinear_pair(const Shape& shape) {
  const auto nbrs = shape.unit_neighbors();
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    for (std::size_t j = i + 1; j < nbrs.size(); ++j) {
      const auto& p = shape.points[static_cast<std::size_t>(nbrs[i])];
      const auto& q = shape.points[static_cast<std::size_t>(nbrs[j])];
      if (p.u == -q.u && p.v == -q.v) return {nbrs[i], nbrs[j]};
    }
  }
  throw DomainError("shape " + shape.key() + " has no collinear neighbor pair through the origin");
}

constexpr int kMaxShapeSize = 24;

}  // namespace

RateFamily RateFamily::constant(double c0) {
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw ParameterError("constant rate must be positive");
  return RateFamily(ConstantRates{c0});
}

RateFamily RateFamily::dfl(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("DFL parameter gamma must lie in [0, 1)");
  return RateFamily(DflRates{gamma});
}

RateFamily RateFamily::ising(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ParameterError("Ising beta must be >= 0");
  return RateFamily(IsingRates{beta});
}

RateFamily RateFamily::table(TableRates t) {
  if (t.range < 1) throw ParameterError("table range L0 must be >= 1");
  return RateFamily(std::move(t));
}

RateFamily RateFamily::from_json(const nlohmann::json& doc, int range) {
  if (!doc.is_object()) throw ConfigError("rate table must be a JSON object");
  TableRates t;
  t.range = range;
  for (const auto& [key, value] : doc.items()) {
    if (key == "L0") {
      t.range = value.get<int>();
      continue;
    }
    if (!value.is_object()) throw ConfigError("rate table entry '" + key + "' must be an object");
    auto& row = t.entries[key];
    for (const auto& [bits, r] : value.items()) {
      if (!r.is_number()) throw ConfigError("rate for " + key + "/" + bits + " is not a number");
      row[bits] = r.get<double>();
    }
  }
  return table(std::move(t));
}

int RateFamily::range() const {
  if (const auto* t = std::get_if<TableRates>(&kind_)) return t->range;
  return 1;
}

std::string RateFamily::name() const {
  return std::visit(overloaded{
                        [](const ConstantRates& c) { return "constant(" + std::to_string(c.c0) + ")"; },
                        [](const DflRates& d) { return "dfl(" + std::to_string(d.gamma) + ")"; },
                        [](const IsingRates& i) { return "ising(" + std::to_string(i.beta) + ")"; },
                        [](const TableRates& t) { return "table(L0=" + std::to_string(t.range) + ")"; },
                    },
                    kind_);
}

nlohmann::json RateFamily::to_json() const {
  return std::visit(overloaded{
                        [](const ConstantRates& c) { return nlohmann::json{{"family", "constant"}, {"c0", c.c0}}; },
                        [](const DflRates& d) { return nlohmann::json{{"family", "dfl"}, {"gamma", d.gamma}}; },
                        [](const IsingRates& i) { return nlohmann::json{{"family", "ising"}, {"beta", i.beta}}; },
                        [](const TableRates& t) {
                          nlohmann::json table(t.entries);
                          table["L0"] = t.range;
                          return nlohmann::json{{"family", "table"}, {"table", table}};
                        },
                    },
                    kind_);
}

std::string occupancy_bits(std::uint64_t xi, std::size_t size) {
  std::string s(size, '0');
  for (std::size_t i = 0; i < size; ++i) {
    if (bit(xi, static_cast<int>(i))) s[i] = '1';
  }
  return s;
}

double rate(const RateFamily& family, const Shape& shape, std::uint64_t xi) {
  return std::visit(
      overloaded{
          [](const ConstantRates& c) { return c.c0; },
          [&](const DflRates& d) {
            const auto [i1, i2] = collinear_pair(shape);
            const bool x0 = bit(xi, 0);
            const bool x1 = bit(xi, i1);
            const bool x2 = bit(xi, i2);
            const double g = d.gamma;
            if (x1 != x2) return 1.0 - g * g;
            if (x0 == x1) return 1.0 - 2.0 * g + g * g;
            return 1.0 + 2.0 * g + g * g;
          },
          [&](const IsingRates& is) {
            const double s0 = bit(xi, 0) ? 1.0 : -1.0;
            double field = 0.0;
            for (int i : shape.unit_neighbors()) field += bit(xi, i) ? 1.0 : -1.0;
            return std::exp(-is.beta * s0 * field);
          },
          [&](const TableRates& t) {
            const auto key = shape.key();
            const auto row = t.entries.find(key);
            const auto bits = occupancy_bits(xi, shape.size());
            if (row == t.entries.end()) throw ConfigError("rate table has no entry for shape " + key);
            const auto it = row->second.find(bits);
            if (it == row->second.end()) {
              throw ConfigError("rate table has no entry for shape " + key + " occupancy " + bits);
            }
            return it->second;
          },
      },
      family.kind());
}

double rate(const RateFamily& family, const Shape& shape, std::span<const std::uint8_t> xi) {
  if (xi.size() != shape.size()) throw DomainError("occupancy vector size does not match the shape");
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (xi[i] != 0) mask |= std::uint64_t{1} << i;
  }
  return rate(family, shape, mask);
}

CompiledRates::CompiledRates(const RateFamily& family, const ShapeCatalog& catalog) {
  tables_.reserve(catalog.shapes.size());
  for (const auto& shape : catalog.shapes) {
    if (shape.size() > kMaxShapeSize) throw ParameterError("shape too large to tabulate rates");
    const std::uint64_t states = std::uint64_t{1} << shape.size();
    std::vector<double> table(states);
    for (std::uint64_t xi = 0; xi < states; ++xi) {
      const double c = rate(family, shape, xi);
      if (!(c > 0.0) || !std::isfinite(c)) {
        throw ValidationError("nonpositive rate " + std::to_string(c) + " at shape " + shape.key() +
                              " occupancy " + occupancy_bits(xi, shape.size()));
      }
      table[xi] = c;
      max_rate_ = std::max(max_rate_, c);
    }
    tables_.push_back(std::move(table));
  }
}

ValidationReport validate(const RateFamily& family, const ShapeCatalog& catalog) {
  ValidationReport report;
  for (const auto& shape : catalog.shapes) {
    if (shape.size() > kMaxShapeSize) throw ParameterError("shape too large to enumerate");
    const std::uint64_t states = std::uint64_t{1} << shape.size();
    for (std::uint64_t xi = 0; xi < states; ++xi) {
      const double c = rate(family, shape, xi);
      if (!(c > 0.0) || !std::isfinite(c)) {
        throw ValidationError("nonpositive rate " + std::to_string(c) + " at shape " + shape.key() +
                              " occupancy " + occupancy_bits(xi, shape.size()));
      }
      if (c > report.max_rate) {
        report.max_rate = c;
        report.argmax_shape = shape.key();
        report.argmax_bits = occupancy_bits(xi, shape.size());
      }
    }
  }
  return report;
}

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  Polynomial d;
  for (std::size_t k = 1; k < coeffs.size(); ++k) d.coeffs.push_back(static_cast<double>(k) * coeffs[k]);
  if (d.coeffs.empty()) d.coeffs.push_back(0.0);
  return d;
}

int Polynomial::degree(double tol) const {
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k) {
    if (std::abs(coeffs[static_cast<std::size_t>(k)]) > tol) return k;
  }
  return -1;
}

double phi(const RateFamily& family, const ShapeCatalog& catalog, double rho) {
  double total = 0.0;
  for (std::size_t s = 0; s < catalog.shapes.size(); ++s) {
    const auto& shape = catalog.shapes[s];
    const int n = static_cast<int>(shape.size());
    const std::uint64_t states = std::uint64_t{1} << n;
    double expectation = 0.0;
    for (std::uint64_t xi = 0; xi < states; ++xi) {
      const int k = std::popcount(xi);
      const double weight = std::pow(rho, k) * std::pow(1.0 - rho, n - k);
      const double sign = bit(xi, 0) ? -1.0 : 1.0;
      expectation += weight * sign * rate(family, shape, xi);
    }
    total += boost::rational_cast<double>(catalog.ratios[s]) * expectation;
  }
  return total;
}

Polynomial phi_polynomial(const RateFamily& family, const ShapeCatalog& catalog) {
  std::size_t max_size = 0;
  for (const auto& s : catalog.shapes) max_size = std::max(max_size, s.size());
  Polynomial p;
  p.coeffs.assign(max_size + 1, 0.0);
  for (std::size_t s = 0; s < catalog.shapes.size(); ++s) {
    const auto& shape = catalog.shapes[s];
    const int n = static_cast<int>(shape.size());
    // Bernstein coefficients: A_k = sum over |xi| = k of (1 - 2 xi_0) c(xi).
    std::vector<double> bernstein(static_cast<std::size_t>(n) + 1, 0.0);
    const std::uint64_t states = std::uint64_t{1} << n;
    for (std::uint64_t xi = 0; xi < states; ++xi) {
      const double sign = bit(xi, 0) ? -1.0 : 1.0;
      bernstein[static_cast<std::size_t>(std::popcount(xi))] += sign * rate(family, shape, xi);
    }
    const double r = boost::rational_cast<double>(catalog.ratios[s]);
    // rho^k (1 - rho)^(n-k) = sum_j C(n-k, j-k) (-1)^(j-k) rho^j.
    for (int k = 0; k <= n; ++k) {
      double binom = 1.0;
      for (int j = k; j <= n; ++j) {
        const int m = j - k;
        if (m > 0) binom = binom * static_cast<double>(n - k - m + 1) / static_cast<double>(m);
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        p.coeffs[static_cast<std::size_t>(j)] += r * bernstein[static_cast<std::size_t>(k)] * sign * binom;
      }
    }
  }
  return p;
}

ReactionFn::ReactionFn(Polynomial p) : poly_(std::move(p)) {
  // sup_{[0,1]} |Phi'| <= sum_k k |a_k|.
  lipschitz_ = 0.0;
  for (std::size_t k = 1; k < poly_.coeffs.size(); ++k) {
    lipschitz_ += static_cast<double>(k) * std::abs(poly_.coeffs[k]);
  }
}

ReactionFn reaction_function(const RateFamily& family, const ShapeCatalog& catalog) {
  return ReactionFn(phi_polynomial(family, catalog));
}

}  // namespace sgk
