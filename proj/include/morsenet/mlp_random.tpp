#pragma once

#include <random>

namespace morsenet {

template <class Rng>
MLPNetwork random_mlp(const std::vector<int>& dims, Rng& rng,
                      ActivationKind act, double bias_scale) {
  if (dims.size() < 3 || dims.size() % 2 == 0 || dims.back() != 1)
    throw Error(ErrorKind::InvalidInput, "random_mlp: bad dims");
  std::normal_distribution<double> nd(0.0, 1.0);
  auto mat = [&](int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
  };
  auto vec = [&](int r) {
    Vec v(r);
    for (int i = 0; i < r; ++i) v(i) = bias_scale * nd(rng);
    return v;
  };
  std::vector<Layer> layers;
  for (size_t k = 1; k + 1 < dims.size(); k += 2) {
    Layer ly;
    ly.W = mat(dims[k], dims[k - 1]);
    ly.b = vec(dims[k]);
    ly.Wt = mat(dims[k + 1], dims[k]);
    ly.bt = vec(dims[k + 1]);
    ly.act.assign(dims[k], Activation{act});
    layers.push_back(std::move(ly));
  }
  return MLPNetwork(std::move(layers));
}

}  // namespace morsenet
