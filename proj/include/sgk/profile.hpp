#pragma once

// Density profiles on the gasket, parsed from short text specs:
//
//   const:0.3            constant value
//   affine:c0,cx,cy      c0 + cx*x + cy*y in planar coordinates
//   corners:v0,v1,v2     harmonic function with the given values at a_0, a_1, a_2

#include <array>
#include <string>
#include <string_view>
#include <variant>

#include "sgk/calculus.hpp"

namespace sgk {

struct ConstantProfile {
  double value = 0.0;
};
struct AffineProfile {
  double c0 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};
struct CornerProfile {
  std::array<double, 3> values{};
};

class Profile {
 public:
  using Kind = std::variant<ConstantProfile, AffineProfile, CornerProfile>;

  Profile() = default;
  explicit Profile(Kind k) : kind_(k) {}
  static Profile constant(double value) { return Profile(ConstantProfile{value}); }
  // Throws ConfigError on a malformed spec.
  static Profile parse(std::string_view spec);

  const Kind& kind() const { return kind_; }
  std::string spec() const;
  // Values at every site of g.
  SiteFunction evaluate(const GasketGraph& g) const;
  // As evaluate, but throws DomainError unless every value lies in [0, 1].
  SiteFunction density(const GasketGraph& g) const;

 private:
  Kind kind_ = ConstantProfile{};
};

}  // namespace sgk
