#include "sgk/profile.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include "sgk/errors.hpp"

namespace sgk {

namespace {

std::vector<double> parse_numbers(std::string_view text, std::string_view spec) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto token = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
      throw ConfigError("malformed number '" + std::string(token) + "' in profile '" + std::string(spec) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string join(std::initializer_list<double> xs) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (double x : xs) {
    if (!first) os << ',';
    os << x;
    first = false;
  }
  return os.str();
}

}  // namespace

Profile Profile::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ConfigError("profile '" + std::string(spec) + "' lacks a kind prefix");
  const auto kind = spec.substr(0, colon);
  const auto nums = parse_numbers(spec.substr(colon + 1), spec);
  auto in_range = [&](double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("profile '" + std::string(spec) + "' leaves [0, 1]");
  };
  auto expect = [&](std::size_t n) {
    if (nums.size() != n) {
      throw ConfigError("profile '" + std::string(spec) + "' expects " + std::to_string(n) + " numbers");
    }
  };
  if (kind == "const") {
    expect(1);
    in_range(nums[0]);
    return Profile(ConstantProfile{nums[0]});
  }
  if (kind == "affine") {
    expect(3);
    // Affine on the triangle: extreme values sit at the corners.
    in_range(nums[0]);
    in_range(nums[0] + nums[1]);
    in_range(nums[0] + 0.5 * nums[1] + std::sqrt(3.0) / 2.0 * nums[2]);
    return Profile(AffineProfile{nums[0], nums[1], nums[2]});
  }
  if (kind == "corners") {
    expect(3);
    for (double v : nums) in_range(v);
    return Profile(CornerProfile{{nums[0], nums[1], nums[2]}});
  }
  throw ConfigError("unknown profile kind '" + std::string(kind) + "'");
}

std::string Profile::spec() const {
  if (const auto* c = std::get_if<ConstantProfile>(&kind_)) return "const:" + join({c->value});
  if (const auto* a = std::get_if<AffineProfile>(&kind_)) return "affine:" + join({a->c0, a->cx, a->cy});
  const auto& k = std::get<CornerProfile>(kind_);
  return "corners:" + join({k.values[0], k.values[1], k.values[2]});
}

SiteFunction Profile::evaluate(const GasketGraph& g) const {
  if (const auto* c = std::get_if<ConstantProfile>(&kind_)) return constant_function(g, c->value);
  if (const auto* a = std::get_if<AffineProfile>(&kind_)) {
    return sample(g, [a](Point2 p) { return a->c0 + a->cx * p.x + a->cy * p.y; });
  }
  const auto& k = std::get<CornerProfile>(kind_);
  return harmonic_extension(g, SiteFunction{0, {k.values[0], k.values[1], k.values[2]}});
}

SiteFunction Profile::density(const GasketGraph& g) const {
  auto f = evaluate(g);
  for (double v : f.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("profile " + spec() + " leaves [0, 1]");
  }
  return f;
}

}  // namespace sgk
