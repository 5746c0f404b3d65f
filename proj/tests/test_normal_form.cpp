#include <random>

#include "helpers.hpp"
#include "morsenet/morse.hpp"
#include "morsenet/normal_form.hpp"
#include "morsenet/verify.hpp"

using namespace morsenet;
using namespace testing;

namespace {

double max_gap(const MLPNetwork& a, const MLPNetwork& b, int n, std::uint64_t seed = 0) {
  double worst = 0.0;
  for (const Vec& x : quasi_random_points(Box::cube(n, -2, 2), 100, seed))
    worst = std::max(worst, std::abs(forward(a, x) - forward(b, x)));
  return worst;
}

}  // namespace

TEST_CASE("input coordinate reduction of the normal-form example") {
  MLPNetwork net = load_mlp("ex_normalform.json");
  InputReduction in = input_coordinate_reduction(net);
  CHECK((in.A - mat(1, 2, {1, -2})).norm() < 1e-14);
  CHECK((in.net.layer(1).W - mat(2, 1, {-1, 2})).norm() < 1e-14);
  CHECK(in.steps.size() == 1);
  for (const Vec& x : quasi_random_points(Box::cube(2, -1, 1), 200))
    CHECK(std::abs(forward(net, x) - forward(in.net, in.A * x)) < 1e-13);
}

TEST_CASE("inner and outer reduction steps of the normal-form example") {
  MLPNetwork net = input_coordinate_reduction(load_mlp("ex_normalform.json")).net;
  ReductionStep st;
  MLPNetwork inner = reduce_inner(net, 1, &st);
  CHECK(st.kind == StepKind::InnerReduction);
  CHECK(st.removed == 2);
  CHECK((st.alpha - vec({2, 1})).norm() < 1e-14);
  CHECK((inner.layer(1).Wt - mat(2, 2, {1, 2, 2, 4})).norm() < 1e-14);
  CHECK((inner.layer(2).W - mat(3, 2, {1, 0, 0, 2, 1, -1})).norm() < 1e-14);
  CHECK(max_gap(net, inner, 1) < 1e-13);

  MLPNetwork outer = reduce_outer(inner, 1, &st);
  CHECK(st.kind == StepKind::OuterReduction);
  CHECK((outer.layer(1).Wt - mat(1, 2, {1, 2})).norm() < 1e-14);
  CHECK((outer.layer(2).W - mat(3, 1, {1, 4, -1})).norm() < 1e-14);
  CHECK(max_gap(net, outer, 1) < 1e-13);
}

TEST_CASE("full normal form of the normal-form example") {
  MLPNetwork net = load_mlp("ex_normalform.json");
  NormalFormResult nf = normalize(net);
  CHECK((nf.coord_change - mat(1, 2, {1, -2})).norm() < 1e-14);
  CHECK((nf.reduced.layer(1).W - mat(2, 1, {-1, 2})).norm() < 1e-14);
  CHECK((nf.reduced.layer(1).Wt - mat(1, 2, {1, 2})).norm() < 1e-14);
  CHECK((nf.reduced.layer(2).W - mat(3, 1, {1, 4, -1})).norm() < 1e-14);
  CHECK((nf.reduced.layer(2).Wt - mat(1, 3, {-1, 1, 2})).norm() < 1e-14);
  CHECK(classify_architecture(nf.reduced).verdict == ArchVerdict::Bottleneck);
  CHECK(verify_equivalence(net, nf, Box::cube(2, -1, 1), 1000) <= 1e-9);
  CHECK_FALSE(nf.constant_value);
}

TEST_CASE("normal form of the coordinate-change example") {
  NormalFormResult nf = normalize(load_mlp("ex_classes.json"));
  CHECK((nf.coord_change - mat(1, 2, {1, 2})).norm() < 1e-14);
  CHECK((nf.reduced.layer(1).W - mat(2, 1, {1, 2})).norm() < 1e-14);
  CHECK((nf.reduced.layer(1).Wt - mat(1, 2, {2, -1})).norm() < 1e-14);
}

TEST_CASE("full-rank nets are left alone") {
  std::mt19937_64 rng(2);
  MLPNetwork net = random_mlp({3, 4, 2, 3, 1}, rng);
  NormalFormResult nf = normalize(net);
  CHECK(nf.steps.empty());
  CHECK(nf.coord_change == Mat::Identity(3, 3));
  CHECK(verify_equivalence(net, nf, Box::cube(3, -1, 1), 100) == 0.0);
  InputReduction in = input_coordinate_reduction(net);
  CHECK(in.A == Mat::Identity(3, 3));
}

TEST_CASE("zero column and zero row delete a node") {
  std::mt19937_64 rng(4);
  MLPNetwork net = random_mlp({2, 3, 3, 3, 1}, rng);
  std::vector<Layer> ls = net.layers();
  ls[1].W.col(1).setZero();
  MLPNetwork z(ls);
  ReductionStep st;
  MLPNetwork r = reduce_inner(z, 1, &st);
  CHECK(st.removed == 1);
  CHECK((r.layer(1).Wt - delete_row(z.layer(1).Wt, 1)).norm() == 0.0);
  CHECK((r.layer(2).b - z.layer(2).b).norm() == 0.0);
  CHECK(max_gap(z, r, 2) < 1e-13);

  ls = net.layers();
  ls[0].Wt.row(2).setZero();
  MLPNetwork zr(ls);
  MLPNetwork o = reduce_outer(zr, 1, &st);
  CHECK(st.removed == 2);
  CHECK(o.dims()[2] == 2);
  CHECK(max_gap(zr, o, 2) < 1e-13);
}

TEST_CASE("reductions require a deficiency") {
  std::mt19937_64 rng(6);
  MLPNetwork net = random_mlp({2, 3, 3, 3, 1}, rng);
  CHECK_THROWS_AS(reduce_inner(net, 1), Error);
  CHECK_THROWS_AS(reduce_outer(net, 1), Error);
}

TEST_CASE("planted rank-one layers reduce with exact outputs") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    MLPNetwork net = plant_rank_one(random_mlp({3, 4, 4, 4, 3, 3, 1}, rng), 3, rng);
    MLPNetwork r = reduce_inner(net, 1);
    CHECK(max_gap(net, r, 3, t) <= 1e-9);
    MLPNetwork o = plant_rank_one(random_mlp({3, 4, 4, 4, 3, 3, 1}, rng), 2, rng);
    CHECK(max_gap(o, reduce_outer(o, 1), 3, t) <= 1e-9);
  }
}

TEST_CASE("rank-one first layer in R^3 reduces to one input") {
  std::mt19937_64 rng(12);
  MLPNetwork net = plant_rank_one(random_mlp({3, 3, 1}, rng), 1, rng);
  InputReduction in = input_coordinate_reduction(net);
  CHECK(in.net.input_dim() == 1);
  CHECK(in.steps.size() == 2);
  for (const Vec& x : quasi_random_points(Box::cube(3, -2, 2), 100))
    CHECK(std::abs(forward(net, x) - forward(in.net, in.A * x)) < 1e-12);
}

TEST_CASE("constant networks collapse") {
  MLPNetwork b = load_mlp("ex_bottleneck_b.json");
  NormalFormResult nf = normalize(b);
  REQUIRE(nf.constant_value);
  CHECK(*nf.constant_value == doctest::Approx(forward(b, vec({0.3, -0.9}))));
  CHECK(nf.steps.back().kind == StepKind::ConstantCollapse);
  CHECK(verify_equivalence(b, nf, Box::cube(2, -2, 2), 200) < 1e-14);

  MLPNetwork c = load_mlp("constant_net.json");
  NormalFormResult nc = normalize(c);
  REQUIRE(nc.constant_value);
  CHECK(*nc.constant_value == 1.5);
  CHECK_THROWS_AS(input_coordinate_reduction(c), Error);
}

TEST_CASE("verify_equivalence reports a corrupted coordinate change") {
  MLPNetwork net = load_mlp("ex_normalform.json");
  NormalFormResult nf = normalize(net);
  nf.coord_change(0, 1) = 2.0;
  CHECK(verify_equivalence(net, nf, Box::cube(2, -1, 1), 1000) > 1e-3);
  nf.coord_change = Mat::Identity(2, 2);
  CHECK_THROWS_AS(verify_equivalence(net, nf, Box::cube(2, -1, 1)), Error);
}

TEST_CASE("class under coordinate change") {
  ClassReport c2;
  c2.verdict = MapClass::C2;
  c2.points.push_back(CriticalPoint{});
  ClassReport r = class_under_coordinate_change(c2, 1, 2);
  CHECK(r.verdict == MapClass::C3);
  CHECK(r.points.empty());
  ClassReport c1;
  c1.verdict = MapClass::C1;
  CHECK(class_under_coordinate_change(c1, 2, 2).verdict == MapClass::C1);
  CHECK(class_under_coordinate_change(c1, 1, 2).verdict == MapClass::C1);
  CHECK(class_under_coordinate_change(c2, 2, 2).verdict == MapClass::C2);
  CHECK_THROWS_AS(class_under_coordinate_change(c1, 3, 2), Error);
}
