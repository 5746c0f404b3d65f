#pragma once

#include <cstdint>
#include <string>

#include "morsenet/linalg.hpp"

namespace morsenet {

// Axis-aligned box lo <= x <= hi.
struct Box {
  Vec lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double slack = 0.0) const;
  Vec center() const { return 0.5 * (lo + hi); }
  Vec width() const { return hi - lo; }
  static Box cube(int n, double lo, double hi);
  void validate(const std::string& what) const;  // throws InvalidInput
};

// Radical-inverse Halton point in [0,1)^dim, index >= 1.
Vec halton(std::uint64_t index, int dim);

// Halton points mapped into the box, shifted modulo 1 by a seeded offset.
std::vector<Vec> quasi_random_points(const Box& box, int count,
                                     std::uint64_t seed = 0);

}  // namespace morsenet
