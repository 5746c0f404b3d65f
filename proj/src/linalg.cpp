#include "morsenet/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <string>

namespace morsenet {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::NoSolution: return "no-solution";
    case ErrorKind::Integration: return "integration-failure";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Io: return "io";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

void require_finite(const Mat& m, const char* what) {
  if (m.size() == 0)
    throw Error(ErrorKind::InvalidInput, std::string(what) + ": empty matrix");
  if (!m.allFinite())
    throw Error(ErrorKind::InvalidInput,
                std::string(what) + ": non-finite entry");
}

namespace {

using Svd = Eigen::BDCSVD<Mat>;

int rank_from(const Vec& s, double rel_tol, double* tol_out) {
  double smax = s.size() ? s(0) : 0.0;
  double tol = rel_tol * smax;
  if (tol_out) *tol_out = tol;
  if (smax == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return r;
}

}  // namespace

RankResult numerical_rank(const Mat& m, double rel_tol) {
  require_finite(m, "numerical_rank");
  if (!(rel_tol > 0))
    throw Error(ErrorKind::InvalidInput, "numerical_rank: rel_tol must be > 0");
  Svd svd(m);
  RankResult r;
  r.singular_values = svd.singularValues();
  r.rank = rank_from(r.singular_values, rel_tol, &r.tolerance_used);
  return r;
}

bool has_full_rank(const Mat& m, double rel_tol) {
  return numerical_rank(m, rel_tol).rank ==
         static_cast<int>(std::min(m.rows(), m.cols()));
}

std::optional<RowVec> left_null_row(const Mat& m, double rel_tol) {
  require_finite(m, "left_null_row");
  Svd svd(m, Eigen::ComputeFullU);
  int r = rank_from(svd.singularValues(), rel_tol, nullptr);
  if (r == m.rows()) return std::nullopt;
  RowVec v = svd.matrixU().col(m.rows() - 1).transpose();
  return v / v.norm();
}

std::optional<Vec> right_null_vector(const Mat& m, double rel_tol) {
  require_finite(m, "right_null_vector");
  Svd svd(m, Eigen::ComputeFullV);
  int r = rank_from(svd.singularValues(), rel_tol, nullptr);
  if (r == m.cols()) return std::nullopt;
  Vec v = svd.matrixV().col(m.cols() - 1);
  return v / v.norm();
}

Mat full_rank_solution(const RowVec& a, const RowVec& c) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(c.size());
  if (n == 0 || m == 0)
    throw Error(ErrorKind::InvalidInput, "full_rank_solution: empty input");
  if (n > m)
    throw Error(ErrorKind::Precondition, "full_rank_solution: requires n <= m");
  const double amax = a.cwiseAbs().maxCoeff();
  const double cmax = c.cwiseAbs().maxCoeff();
  if (amax == 0.0 || cmax == 0.0)
    throw Error(ErrorKind::Precondition,
                "full_rank_solution: A and C must be non-zero");

  std::vector<int> ii, jj;
  for (int i = 0; i < n; ++i)
    if (std::abs(a(i)) > 1e-14 * amax) ii.push_back(i);
  for (int j = 0; j < m; ++j)
    if (std::abs(c(j)) > 1e-14 * cmax) jj.push_back(j);
  const int nb = static_cast<int>(ii.size());
  const int mb = static_cast<int>(jj.size());

  Mat b = Mat::Zero(n, m);
  std::vector<bool> used(m, false);
  if (mb >= nb) {
    for (int k = 0; k < nb; ++k) {
      b(ii[k], jj[k]) = c(jj[k]) / a(ii[k]);
      used[jj[k]] = true;
    }
    for (int k = nb; k < mb; ++k)
      b(ii[nb - 1], jj[k]) = c(jj[k]) / a(ii[nb - 1]);
  } else {
    for (int k = 0; k < mb; ++k) {
      b(ii[k], jj[k]) = c(jj[k]) / a(ii[k]);
      used[jj[k]] = true;
    }
    int next = 0;
    for (int k = mb; k < nb; ++k) {
      while (used[next]) ++next;
      used[next] = true;
      b(ii[k], next) = a(ii[0]);
      b(ii[0], next) = -a(ii[k]);
    }
  }

  // Rows where A vanishes: distinct unit rows outside the pivot columns.
  std::vector<bool> pivot_row(n, false);
  for (int i : ii) pivot_row[i] = true;
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (pivot_row[i]) continue;
    while (used[next]) ++next;
    used[next] = true;
    b(i, next) = 1.0;
  }
  return b;
}

Vec pinv_solve(const Mat& a, const Vec& d, double rel_tol) {
  Svd svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  double tol = 0;
  int r = rank_from(s, rel_tol, &tol);
  Vec ut_d = svd.matrixU().transpose() * d;
  Vec y = Vec::Zero(s.size());
  for (int i = 0; i < r; ++i) y(i) = ut_d(i) / s(i);
  return svd.matrixV() * y;
}

Vec minimum_norm_solve(const Mat& a, const Vec& d, double rel_tol) {
  require_finite(a, "minimum_norm_solve");
  if (d.size() != a.rows())
    throw Error(ErrorKind::InvalidInput, "minimum_norm_solve: size mismatch");
  Mat ext(a.rows(), a.cols() + 1);
  ext << a, d;
  int ra = numerical_rank(a, rel_tol).rank;
  int re = numerical_rank(ext, rel_tol).rank;
  if (ra != re)
    throw Error(ErrorKind::NoSolution,
                "minimum_norm_solve: inconsistent system, rank(A) = " +
                    std::to_string(ra) + ", rank(A|d) = " + std::to_string(re));
  return pinv_solve(a, d, rel_tol);
}

bool monotone_product_rank_check(const std::vector<Mat>& factors,
                                 double rel_tol) {
  if (factors.empty())
    throw Error(ErrorKind::InvalidInput, "monotone_product_rank_check: empty");
  for (size_t k = 1; k < factors.size(); ++k)
    if (factors[k - 1].cols() != factors[k].rows())
      throw Error(ErrorKind::InvalidInput,
                  "monotone_product_rank_check: dimension mismatch at factor " +
                      std::to_string(k));
  std::vector<Eigen::Index> dims{factors[0].rows()};
  for (const auto& f : factors) dims.push_back(f.cols());
  bool up = true, down = true;
  for (size_t k = 1; k < dims.size(); ++k) {
    if (dims[k] < dims[k - 1]) up = false;
    if (dims[k] > dims[k - 1]) down = false;
  }
  if (!up && !down) return false;
  for (const auto& f : factors)
    if (!has_full_rank(f, rel_tol)) return false;
  Mat p = factors[0];
  for (size_t k = 1; k < factors.size(); ++k) p = p * factors[k];
  if (numerical_rank(p, rel_tol).rank !=
      static_cast<int>(std::min(dims.front(), dims.back())))
    throw Error(ErrorKind::Internal,
                "monotone_product_rank_check: product rank below bound");
  return true;
}

Mat delete_row(const Mat& m, int i) {
  Mat r(m.rows() - 1, m.cols());
  r << m.topRows(i), m.bottomRows(m.rows() - i - 1);
  return r;
}

Mat delete_col(const Mat& m, int j) {
  Mat r(m.rows(), m.cols() - 1);
  r << m.leftCols(j), m.rightCols(m.cols() - j - 1);
  return r;
}

Vec delete_entry(const Vec& v, int i) {
  Vec r(v.size() - 1);
  r << v.head(i), v.tail(v.size() - i - 1);
  return r;
}

Vec symmetric_eigenvalues(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (h + h.transpose()),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace morsenet
