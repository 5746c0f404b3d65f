#include <cmath>
#include <random>

#include "helpers.hpp"
#include "morsenet/mlp.hpp"

using namespace morsenet;
using namespace testing;

namespace {

// One layer, dims (1,2,2,1): w = (1,1), w~ = (2,-1), zero biases.
MLPNetwork augmented_example() {
  return make_mlp({mat(2, 1, {1, 1})}, {vec({0, 0})}, {mat(1, 2, {2, -1})}, {vec({0})});
}

}  // namespace

TEST_CASE("forward on the coordinate-change example") {
  MLPNetwork net = load_mlp("ex_classes.json");
  CHECK(forward(net, vec({0, 0})) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  for (double t : {-1.0, 0.3, 2.0}) {
    Vec x = vec({t, -0.7});
    double ref = 2 * softplus(t - 1.4) - softplus(2 * t - 2.8);
    CHECK(forward(net, x) == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("forward of constant and one-layer nets") {
  MLPNetwork c = make_mlp({Mat::Zero(2, 3)}, {Vec::Zero(2)}, {Mat::Zero(1, 2)}, {vec({1.25})});
  CHECK(forward(c, vec({4, -1, 2})) == 1.25);
  CHECK(gradient(c, vec({4, -1, 2})).norm() == 0.0);
  CHECK(hessian(c, vec({4, -1, 2})).norm() == 0.0);
  CHECK(mixed_second_derivatives(c, vec({0.5, 0, 1})).norm() == 0.0);
  CHECK(forward(augmented_example(), vec({0})) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("gradient vanishes on the line of equilibria") {
  MLPNetwork net = load_mlp("ex_classes.json");
  for (double t : {-2.0, -0.5, 0.0, 1.5})
    CHECK(gradient(net, vec({-2 * t, t})).norm() < 1e-14);
  CHECK(gradient(net, vec({1, 1})).norm() > 0.1);
}

TEST_CASE("closed-form gradient and Hessian of a one-layer net") {
  MLPNetwork net = augmented_example();
  for (double x : {0.0, -1.2, 0.8}) {
    double a1 = x, a2 = x;  // w = (1,1)
    double g = 1 * 2 * sigmoid(a1) + 1 * -1 * sigmoid(a2);
    double h = 1 * 2 * std::exp(-a1) / std::pow(1 + std::exp(-a1), 2) -
               1 * std::exp(-a2) / std::pow(1 + std::exp(-a2), 2);
    CHECK(gradient(net, vec({x}))(0) == doctest::Approx(g).epsilon(1e-13));
    CHECK(hessian(net, vec({x}))(0, 0) == doctest::Approx(h).epsilon(1e-13));
  }
}

TEST_CASE("Hessian of the reduced coordinate-change net at 0") {
  MLPNetwork red = load_mlp("ex_classes_reduced.json");
  CHECK(gradient(red, vec({0}))(0) == doctest::Approx(0).epsilon(1e-15));
  CHECK(hessian(red, vec({0}))(0, 0) == doctest::Approx(-0.5).epsilon(1e-13));
}

TEST_CASE("mixed derivatives: output bias column and one-layer W~ columns") {
  std::mt19937_64 rng(3);
  MLPNetwork net = random_mlp({2, 3, 1}, rng);
  Vec x = vec({0.4, -0.3});
  Mat M = mixed_second_derivatives(net, x);
  REQUIRE(M.cols() == net.parameter_count());
  CHECK(M.col(M.cols() - 1).norm() == 0.0);
  EvalTrace tr = trace(net, x);
  const Layer& ly = net.layer(1);
  for (int j = 0; j < 3; ++j) {
    // d grad / d W~_{1j} = W1^T Psi_1 e_j
    Vec expect = ly.W.row(j).transpose() * tr.psi[0](j);
    CHECK((M.col(6 + j) - expect).norm() < 1e-14);
    Vec p = parameters(net);
    Vec e = Vec::Unit(p.size(), 6 + j) * 1e-6;
    Vec fd = (gradient(with_parameters(net, p + e), x) - gradient(with_parameters(net, p - e), x)) / 2e-6;
    CHECK((fd - expect).norm() < 1e-8);
  }
}

TEST_CASE("parameter vector round trip") {
  std::mt19937_64 rng(5);
  MLPNetwork net = random_mlp({3, 4, 2, 3, 1}, rng);
  Vec p = parameters(net);
  CHECK(p.size() == net.parameter_count());
  CHECK(parameters(with_parameters(net, p)) == p);
  CHECK(p(0) == net.layer(1).W(0, 0));
  CHECK(p(1) == net.layer(1).W(1, 0));
}

TEST_CASE("architecture classification") {
  ArchitectureReport a = classify_architecture(std::vector<int>{3, 2, 1});
  CHECK(a.verdict == ArchVerdict::NonAugmented);
  ArchitectureReport b = classify_architecture(std::vector<int>{1, 2, 1});
  CHECK(b.verdict == ArchVerdict::Augmented);
  CHECK(b.l_star == 1);
  ArchitectureReport c = classify_architecture(std::vector<int>{2, 1, 2, 1, 1});
  CHECK(c.verdict == ArchVerdict::Bottleneck);
  CHECK(c.j_star == 1);
  CHECK(c.flavor == BottleneckFlavor::NonAugmentedPrefix);
  ArchitectureReport d = classify_architecture(std::vector<int>{1, 2, 1, 2, 1});
  CHECK(d.verdict == ArchVerdict::Bottleneck);
  CHECK(d.flavor == BottleneckFlavor::AugmentedPrefix);
  CHECK(classify_architecture(load_mlp("ex_normalform.json")).verdict == ArchVerdict::Augmented);
  CHECK_THROWS_AS(classify_architecture(std::vector<int>{2, 1}), Error);
}

TEST_CASE("Z products of the bottleneck examples") {
  MLPNetwork a = load_mlp("ex_bottleneck_a.json");
  MLPNetwork b = load_mlp("ex_bottleneck_b.json");
  for (double s : {-1.5, 0.0, 0.7}) {
    Vec x = vec({s, 0.5 - s});
    EvalTrace tr = trace(a, x);
    double a2 = tr.a[1](0);
    double expect = 2 * sigmoid(a2);  // 2 sigma_2'(a_2) for softplus
    CHECK(z_product(a, x, 1)(0) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(z_product(a, x, 1)(0) > 0);
    CHECK(z_product(b, x, 1).norm() == 0.0);
  }
}

TEST_CASE("Z on a one-layer net is W~ and Z Y is the gradient") {
  std::mt19937_64 rng(8);
  MLPNetwork net = random_mlp({2, 3, 1}, rng);
  Vec x = vec({0.1, 0.9});
  RowVec z = z_product(net, x, 1);
  CHECK((z - net.layer(1).Wt).norm() == 0.0);
  EvalTrace tr = trace(net, x);
  Mat direct = tr.psi[0].asDiagonal() * net.layer(1).W;
  CHECK((y_product(net, x, 1) - direct).norm() < 1e-15);
  CHECK((z * y_product(net, x, 1) - gradient(net, x).transpose()).norm() < 1e-14);
}

TEST_CASE("gradient agrees with central differences on random nets") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> w(1, 6), depth(1, 3);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> dims;
    int L = depth(rng);
    for (int k = 0; k < 2 * L; ++k) dims.push_back(w(rng));
    dims.push_back(1);
    MLPNetwork net = random_mlp(dims, rng, t % 2 ? ActivationKind::Tanh : ActivationKind::Softplus);
    for (int s = 0; s < 10; ++s) {
      Vec x = Vec::Random(net.input_dim());
      Vec g = gradient(net, x);
      double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
      for (int i = 0; i < x.size(); ++i) {
        Vec e = Vec::Unit(x.size(), i) * 1e-5;
        double fd = (forward(net, x + e) - forward(net, x - e)) / 2e-5;
        CHECK(std::abs(fd - g(i)) / scale <= 1e-6);
      }
      Mat H = hessian(net, x);
      CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("activations") {
  Activation sp{ActivationKind::Softplus};
  CHECK(sp.value(0) == doctest::Approx(std::log(2.0)));
  CHECK(sp.value(800) == doctest::Approx(800));
  CHECK(sp.d1(0) == doctest::Approx(0.5));
  CHECK(sp.d2(0) == doctest::Approx(0.25));
  CHECK(Activation::parse("tanh").kind == ActivationKind::Tanh);
  CHECK(Activation::parse("identity").d1(3.0) == 1.0);
  CHECK_THROWS_AS(Activation::parse("relu"), Error);
}
