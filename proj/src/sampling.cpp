#include "morsenet/sampling.hpp"

#include <cmath>
#include <random>

namespace morsenet {

namespace {

const int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                       37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79,
                       83, 89, 97, 101, 103, 107, 109, 113};

}  // namespace

bool Box::contains(const Vec& x, double slack) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) < lo(i) - slack || x(i) > hi(i) + slack) return false;
  return true;
}

Box Box::cube(int n, double lo, double hi) {
  return Box{Vec::Constant(n, lo), Vec::Constant(n, hi)};
}

void Box::validate(const std::string& what) const {
  if (lo.size() == 0 || lo.size() != hi.size())
    throw Error(ErrorKind::InvalidInput, what + ": malformed box");
  if (!lo.allFinite() || !hi.allFinite())
    throw Error(ErrorKind::InvalidInput, what + ": non-finite box bound");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo(i) < hi(i)))
      throw Error(ErrorKind::InvalidInput,
                  what + ": empty box in coordinate " + std::to_string(i + 1));
}

Vec halton(std::uint64_t index, int dim) {
  if (dim > static_cast<int>(std::size(kPrimes)))
    throw Error(ErrorKind::Unsupported, "halton: dimension too large");
  Vec p(dim);
  for (int d = 0; d < dim; ++d) {
    const int base = kPrimes[d];
    double f = 1.0, r = 0.0;
    std::uint64_t i = index;
    while (i > 0) {
      f /= base;
      r += f * static_cast<double>(i % base);
      i /= base;
    }
    p(d) = r;
  }
  return p;
}

std::vector<Vec> quasi_random_points(const Box& box, int count,
                                     std::uint64_t seed) {
  box.validate("quasi_random_points");
  const int n = box.dim();
  Vec shift = Vec::Zero(n);
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) shift(i) = u(rng);
  }
  std::vector<Vec> pts;
  pts.reserve(count);
  for (int k = 0; k < count; ++k) {
    Vec h = halton(static_cast<std::uint64_t>(k) + 1, n) + shift;
    for (int i = 0; i < n; ++i) h(i) -= std::floor(h(i));
    pts.push_back(box.lo + h.cwiseProduct(box.width()));
  }
  return pts;
}

}  // namespace morsenet
