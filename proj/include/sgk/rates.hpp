#pragma once

// Local Glauber rate families c(xi; Lambda) and the reaction term
//
//   Phi(rho) = sum_Lambda r_Lambda E_{nu_rho}[(1 - 2 xi_0) c(xi; Lambda)].
//
// Occupancies of a neighborhood are passed as a bit mask: bit i is the
// occupation of the i-th point of the shape in canonical order (bit 0 = origin).

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgk/gasket.hpp"

namespace sgk {

struct ConstantRates {
  double c0 = 1.0;
};

// Rates of De Masi-Ferrari-Lebowitz type on the 3-site line through the origin.
struct DflRates {
  double gamma = 0.0;
};

// c = exp(-beta sigma_0 sum_{unit neighbors} sigma_y), sigma = 2 xi - 1.
struct IsingRates {
  double beta = 0.0;
};

// User-supplied table keyed by Shape::key() and an occupancy bit string
// ("01101", character i = xi_i in canonical order).
struct TableRates {
  int range = 1;
  std::map<std::string, std::map<std::string, double>> entries;
};

class RateFamily {
 public:
  using Kind = std::variant<ConstantRates, DflRates, IsingRates, TableRates>;

  static RateFamily constant(double c0);
  static RateFamily dfl(double gamma);
  static RateFamily ising(double beta);
  static RateFamily table(TableRates t);
  // {"L0": 2, "<shape key>": {"<bits>": rate, ...}, ...}; L0 defaults to `range`.
  static RateFamily from_json(const nlohmann::json& doc, int range = 1);

  const Kind& kind() const { return kind_; }
  // Neighborhood range L0 the family reads.
  int range() const;
  std::string name() const;
  nlohmann::json to_json() const;

 private:
  explicit RateFamily(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

double rate(const RateFamily& family, const Shape& shape, std::uint64_t xi);
double rate(const RateFamily& family, const Shape& shape, std::span<const std::uint8_t> xi);

// Bit string "xi_0 xi_1 ..." of a mask for a shape with `size` points.
std::string occupancy_bits(std::uint64_t xi, std::size_t size);

// Rate lookup tables c(xi; Lambda) for every shape of a catalog, used by the simulator.
class CompiledRates {
 public:
  CompiledRates(const RateFamily& family, const ShapeCatalog& catalog);
  double operator()(int shape, std::uint64_t xi) const {
    return tables_[static_cast<std::size_t>(shape)][xi];
  }
  double max_rate() const { return max_rate_; }
  std::size_t num_shapes() const { return tables_.size(); }

 private:
  std::vector<std::vector<double>> tables_;
  double max_rate_ = 0.0;
};

struct ValidationReport {
  double max_rate = 0.0;  // ||c||_inf
  std::string argmax_shape;
  std::string argmax_bits;
};

// Enumerates every (Lambda, xi); throws ValidationError on a nonpositive or
// non-finite rate and ConfigError on a missing table entry.
ValidationReport validate(const RateFamily& family, const ShapeCatalog& catalog);

// Dense polynomial, coefficients in increasing degree.
struct Polynomial {
  std::vector<double> coeffs;

  double operator()(double x) const;
  Polynomial derivative() const;
  // Highest degree with |coefficient| > tol (-1 for the zero polynomial).
  int degree(double tol = 0.0) const;
};

// Phi(rho) by exhaustive enumeration of {0,1}^Lambda with product Bernoulli weights.
double phi(const RateFamily& family, const ShapeCatalog& catalog, double rho);

// Exact monomial coefficients of Phi (expansion of the Bernoulli weights).
Polynomial phi_polynomial(const RateFamily& family, const ShapeCatalog& catalog);

// Reaction term of the limit equation together with a Lipschitz bound on [0, 1].
class ReactionFn {
 public:
  ReactionFn() = default;
  explicit ReactionFn(Polynomial p);
  static ReactionFn zero() { return ReactionFn(Polynomial{{0.0}}); }

  double operator()(double rho) const { return poly_(rho); }
  const Polynomial& polynomial() const { return poly_; }
  double lipschitz() const { return lipschitz_; }

 private:
  Polynomial poly_{{0.0}};
  double lipschitz_ = 0.0;
};

ReactionFn reaction_function(const RateFamily& family, const ShapeCatalog& catalog);

}  // namespace sgk
