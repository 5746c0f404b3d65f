#pragma once

#include <initializer_list>
#include <string>

#include "doctest.h"
#include "morsenet/io.hpp"
#include "morsenet/mlp.hpp"

namespace testing {

using morsenet::Mat;
using morsenet::Vec;

inline std::string fixture(const std::string& name) {
  return std::string(MORSENET_FIXTURE_DIR) + "/" + name;
}

inline Mat mat(int r, int c, std::initializer_list<double> row_major) {
  Mat m(r, c);
  auto it = row_major.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

inline Vec vec(std::initializer_list<double> v) {
  Vec r(v.size());
  int i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

inline double softplus(double x) { return std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline morsenet::MLPNetwork load_mlp(const std::string& name) {
  return *morsenet::load_network(fixture(name)).mlp;
}

}  // namespace testing
