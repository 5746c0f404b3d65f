#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "morsenet/error.hpp"

namespace morsenet {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

inline constexpr double kRankTol = 1e-8;

struct RankResult {
  int rank = 0;
  Vec singular_values;    // descending
  double tolerance_used;  // absolute threshold rel_tol * sigma_max
};

// Throws InvalidInput on empty or non-finite input.
void require_finite(const Mat& m, const char* what);

RankResult numerical_rank(const Mat& m, double rel_tol = kRankTol);
bool has_full_rank(const Mat& m, double rel_tol = kRankTol);

// Unit left singular vector of the smallest singular value, or nullopt when
// the rows are independent at rel_tol.
std::optional<RowVec> left_null_row(const Mat& m, double rel_tol = kRankTol);

// Same for columns: unit v with m*v ~ 0, or nullopt.
std::optional<Vec> right_null_vector(const Mat& m, double rel_tol = kRankTol);

// B (n x m) with A*B = C and rank(B) = n, built from the non-zero index sets
// of A and C. Requires A != 0, C != 0, n <= m.
Mat full_rank_solution(const RowVec& a, const RowVec& c);

// Pseudoinverse solution of A c = d. Throws NoSolution if rank(A) != rank(A|d).
Vec minimum_norm_solve(const Mat& a, const Vec& d, double rel_tol = kRankTol);

// Least-squares variant that never throws on inconsistency.
Vec pinv_solve(const Mat& a, const Vec& d, double rel_tol = kRankTol);

// True iff every factor has full rank and the dimension chain is monotone.
bool monotone_product_rank_check(const std::vector<Mat>& factors,
                                 double rel_tol = kRankTol);

Mat delete_row(const Mat& m, int i);
Mat delete_col(const Mat& m, int j);
Vec delete_entry(const Vec& v, int i);

// Symmetric eigenvalues, ascending.
Vec symmetric_eigenvalues(const Mat& h);

}  // namespace morsenet
