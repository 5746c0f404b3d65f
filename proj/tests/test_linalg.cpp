#include <random>

#include "helpers.hpp"
#include "morsenet/linalg.hpp"

using namespace morsenet;
using namespace testing;

TEST_CASE("numerical_rank on small matrices") {
  CHECK(numerical_rank(Mat::Identity(3, 3)).rank == 3);
  CHECK(numerical_rank(mat(2, 2, {1, 2, 2, 4})).rank == 1);
  CHECK(numerical_rank(Mat::Zero(2, 3)).rank == 0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Mat m(5, 3);
    for (int i = 0; i < 15; ++i) m(i % 5, i / 5) = nd(rng);
    CHECK(numerical_rank(m).rank == 3);
  }
}

TEST_CASE("numerical_rank rejects bad input") {
  Mat m = Mat::Identity(2, 2);
  m(0, 1) = std::nan("");
  CHECK_THROWS_AS(numerical_rank(m), Error);
  CHECK_THROWS_AS(numerical_rank(Mat::Identity(2, 2), 0.0), Error);
}

TEST_CASE("left_null_row") {
  auto v = left_null_row(mat(2, 2, {1, 1, 2, 2}));
  REQUIRE(v);
  CHECK((*v * mat(2, 2, {1, 1, 2, 2})).norm() < 1e-12);
  CHECK(std::abs((*v)(0) / (*v)(1) + 2.0) < 1e-12);
  CHECK_FALSE(left_null_row(Mat::Identity(2, 2)));
  Mat m = mat(3, 2, {1, 0, 2, 0, 3, 0});
  auto w = left_null_row(m);
  REQUIRE(w);
  CHECK((*w * m).norm() <= 1e-12);
}

TEST_CASE("full_rank_solution examples") {
  RowVec a1(1), c1(1);
  a1 << 1;
  c1 << 5;
  CHECK(full_rank_solution(a1, c1)(0, 0) == doctest::Approx(5));

  RowVec a2(2), c2(2);
  a2 << 2, 0;
  c2 << 4, 6;
  Mat b2 = full_rank_solution(a2, c2);
  CHECK((a2 * b2 - c2).norm() < 1e-14);
  CHECK(b2(0, 0) == doctest::Approx(2));
  CHECK(b2(0, 1) == doctest::Approx(3));
  CHECK(numerical_rank(b2).rank == 2);

  RowVec a3(2), c3(3);
  a3 << 1, 1;
  c3 << 1, 0, 0;
  Mat b3 = full_rank_solution(a3, c3);
  CHECK((a3 * b3 - c3).norm() < 1e-14);
  CHECK(numerical_rank(b3).rank == 2);
  CHECK((b3 - mat(2, 3, {1, -1, 0, 0, 1, 0})).norm() < 1e-14);
}

TEST_CASE("full_rank_solution preconditions") {
  RowVec a(3), c(2);
  a << 1, 2, 3;
  c << 1, 1;
  CHECK_THROWS_AS(full_rank_solution(a, c), Error);
  CHECK_THROWS_AS(full_rank_solution(RowVec::Zero(2), c), Error);
}

TEST_CASE("minimum_norm_solve") {
  CHECK((minimum_norm_solve(Mat::Identity(2, 2), vec({3, 4})) - vec({3, 4})).norm() < 1e-14);
  CHECK((minimum_norm_solve(mat(1, 2, {1, 1}), vec({2})) - vec({1, 1})).norm() < 1e-14);
  CHECK((minimum_norm_solve(mat(2, 1, {1, 2}), vec({1, 2})) - vec({1})).norm() < 1e-14);
  try {
    minimum_norm_solve(mat(2, 1, {1, 2}), vec({1, 0}));
    FAIL("expected NoSolution");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoSolution);
  }
}

TEST_CASE("monotone_product_rank_check") {
  CHECK(monotone_product_rank_check({mat(1, 2, {1, 2}), mat(2, 3, {1, 0, 0, 0, 1, 0})}));
  CHECK_FALSE(monotone_product_rank_check({mat(3, 1, {1, 2, 3}), mat(1, 3, {1, 1, 1})}));
  CHECK(monotone_product_rank_check({Mat::Identity(2, 2), Mat::Identity(2, 2)}));
  CHECK_THROWS_AS(monotone_product_rank_check({Mat::Identity(2, 2), Mat::Identity(3, 3)}), Error);
}

TEST_CASE("row and column deletion") {
  Mat m = mat(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(delete_row(m, 1) == mat(2, 3, {1, 2, 3, 7, 8, 9}));
  CHECK(delete_col(m, 0) == mat(3, 2, {2, 3, 5, 6, 8, 9}));
  CHECK(delete_entry(vec({1, 2, 3}), 2) == vec({1, 2}));
}
