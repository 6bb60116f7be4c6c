#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "abtest/aggregate.hpp"
#include "abtest/model.hpp"
#include "abtest/rng.hpp"

namespace testutil {

inline double rel_err(double value, double target) {
  return std::fabs(value - target) / std::fabs(target);
}

// |a - b| against a scale floor of 1; usable when the target can be 0.
inline bool close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

// One cheap synthetic user from a single keyed draw: y uniform on {1..8},
// x | y ~ Binomial(y, 1/2) via popcount, split bit independent of both.
struct CheapUser {
  double x;
  double y;
  bool in_a;
};

inline CheapUser cheap_user(std::uint64_t rep_seed, std::uint64_t index) {
  const std::uint64_t bits = abtest::rng::keyed_bits(rep_seed, index, 0);
  const int y = 1 + static_cast<int>((bits >> 8) & 7);
  const std::uint64_t low = bits & ((std::uint64_t{1} << y) - 1);
  const int x = __builtin_popcountll(low);
  return {static_cast<double>(x), static_cast<double>(y), (bits >> 63) != 0};
}

inline std::vector<abtest::UserAggregate> cheap_population(
    std::uint64_t rep_seed, std::size_t n) {
  std::vector<abtest::UserAggregate> users;
  users.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CheapUser u = cheap_user(rep_seed, i);
    users.push_back({"u" + std::to_string(i),
                     u.in_a ? abtest::Group::A : abtest::Group::B, u.x, u.y});
  }
  return users;
}

}  // namespace testutil
