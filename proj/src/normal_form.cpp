#include "morsenet/normal_form.hpp"

#include <cmath>
#include <string>

namespace morsenet {

namespace {

struct Dependence {
  int pivot;
  Vec alpha;  // entries for j != pivot, in index order
};

// Unit null vector v; pivot = last i with |v_i| >= 0.1 max |v|,
// alpha_j = -v_j / v_pivot so that item_pivot = sum alpha_j item_j.
Dependence dependence_from(const Vec& v) {
  const double vmax = v.cwiseAbs().maxCoeff();
  int pivot = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) >= 0.1 * vmax) pivot = static_cast<int>(i);
  Vec alpha(v.size() - 1);
  for (Eigen::Index j = 0, k = 0; j < v.size(); ++j)
    if (j != pivot) alpha(k++) = -v(j) / v(pivot);
  return {pivot, alpha};
}

std::string rank_msg(const char* what, int l, int rank, Eigen::Index r,
                     Eigen::Index c) {
  return std::string(what) + std::to_string(l) + " has rank " +
         std::to_string(rank) + " (shape " + std::to_string(r) + "x" +
         std::to_string(c) + ")";
}

void check_layer_index(const MLPNetwork& net, int l, const char* op) {
  if (l < 1 || l > net.depth() - 1)
    throw Error(ErrorKind::Precondition,
                std::string(op) + ": layer index " + std::to_string(l) +
                    " outside 1.." + std::to_string(net.depth() - 1));
}

}  // namespace

MLPNetwork reduce_inner(const MLPNetwork& net, int l, ReductionStep* step) {
  check_layer_index(net, l, "reduce_inner");
  const Mat& W = net.layer(l + 1).W;
  int r = numerical_rank(W).rank;
  if (r == 0 || r >= std::min(W.rows(), W.cols()))
    throw Error(ErrorKind::Precondition,
                "reduce_inner: " + rank_msg("W", l + 1, r, W.rows(), W.cols()));
  Dependence dep = dependence_from(*right_null_vector(W));
  const int i = dep.pivot;

  std::vector<Layer> layers = net.layers();
  Layer& lo = layers[l - 1];
  Layer& hi = layers[l];
  for (Eigen::Index j = 0, k = 0; j < lo.Wt.rows(); ++j) {
    if (j == i) continue;
    lo.Wt.row(j) += dep.alpha(k) * net.layer(l).Wt.row(i);
    lo.bt(j) += dep.alpha(k) * net.layer(l).bt(i);
    ++k;
  }
  lo.Wt = delete_row(lo.Wt, i);
  lo.bt = delete_entry(lo.bt, i);
  hi.W = delete_col(hi.W, i);
  MLPNetwork out(std::move(layers));
  if (step) *step = {StepKind::InnerReduction, l, i, dep.alpha, out.dims()};
  return out;
}

MLPNetwork reduce_outer(const MLPNetwork& net, int l, ReductionStep* step) {
  check_layer_index(net, l, "reduce_outer");
  const Mat& Wt = net.layer(l).Wt;
  int r = numerical_rank(Wt).rank;
  if (r == 0 || r >= std::min(Wt.rows(), Wt.cols()))
    throw Error(ErrorKind::Precondition,
                "reduce_outer: " +
                    rank_msg("W_tilde", l, r, Wt.rows(), Wt.cols()));
  Dependence dep = dependence_from(left_null_row(Wt)->transpose());
  const int i = dep.pivot;

  std::vector<Layer> layers = net.layers();
  Layer& lo = layers[l - 1];
  Layer& hi = layers[l];
  const Mat W = hi.W;
  Mat Wbar = W;
  for (Eigen::Index j = 0, k = 0; j < W.cols(); ++j) {
    if (j == i) continue;
    Wbar.col(j) += dep.alpha(k++) * W.col(i);
  }
  Wbar = delete_col(Wbar, i);
  Vec y = delete_entry(lo.bt, i);
  // Match W_{l+1} b~_l with the reduced bias; any residual outside the range
  // of the reduced matrix moves into b_{l+1}.
  Vec d = W * lo.bt - Wbar * y;
  Vec c = pinv_solve(Wbar, d);
  Vec resid = d - Wbar * c;
  lo.bt = y + c;
  lo.Wt = delete_row(lo.Wt, i);
  hi.W = Wbar;
  hi.b += resid;
  MLPNetwork out(std::move(layers));
  if (step) *step = {StepKind::OuterReduction, l, i, dep.alpha, out.dims()};
  return out;
}

InputReduction input_coordinate_reduction(const MLPNetwork& net) {
  InputReduction res{net, Mat::Identity(net.input_dim(), net.input_dim()), {}};
  if (numerical_rank(net.layer(1).W).rank == 0)
    throw Error(ErrorKind::Precondition,
                "input_coordinate_reduction: W1 has rank 0, network is constant");
  while (true) {
    const Mat& W1 = res.net.layer(1).W;
    auto v = right_null_vector(W1);
    if (!v) break;
    Dependence dep = dependence_from(*v);
    const int i = dep.pivot;
    const int n = static_cast<int>(W1.cols());
    Mat Ar = Mat::Zero(n - 1, n);
    for (int j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      Ar(k, j) = 1.0;
      Ar(k, i) = dep.alpha(k);
      ++k;
    }
    std::vector<Layer> layers = res.net.layers();
    layers[0].W = delete_col(W1, i);
    res.net = MLPNetwork(std::move(layers));
    res.A = Ar * res.A;
    res.steps.push_back(
        {StepKind::InputCoordChange, 0, i, dep.alpha, res.net.dims()});
  }
  return res;
}

namespace {

bool is_constant(const MLPNetwork& net) {
  if (numerical_rank(net.layer(1).W).rank == 0) return true;
  if (numerical_rank(net.layer(net.depth()).Wt).rank == 0) return true;
  // Scale by the factor norms: a product of rounding size is zero.
  for (int l = 1; l < net.depth(); ++l) {
    const Mat& w = net.layer(l + 1).W;
    const Mat& wt = net.layer(l).Wt;
    double scale = numerical_rank(w).singular_values(0) *
                   numerical_rank(wt).singular_values(0);
    double pmax = numerical_rank(w * wt).singular_values(0);
    if (pmax <= kRankTol * scale) return true;
  }
  return false;
}

NormalFormResult collapse(const MLPNetwork& net, std::vector<ReductionStep> steps) {
  const int n = net.input_dim();
  const double c = forward(net, Vec::Zero(n));
  Layer ly{Mat::Zero(1, n), Vec::Zero(1), Mat::Zero(1, 1), Vec::Constant(1, c),
           {Activation{ActivationKind::Softplus}}};
  MLPNetwork red({ly});
  steps.push_back({StepKind::ConstantCollapse, 0, -1, Vec(), red.dims()});
  return {red, Mat::Identity(n, n), steps, c};
}

bool rank_deficient(const Mat& m) {
  return numerical_rank(m).rank < std::min(m.rows(), m.cols());
}

}  // namespace

NormalFormResult normalize(const MLPNetwork& net) {
  if (is_constant(net)) return collapse(net, {});

  InputReduction in = input_coordinate_reduction(net);
  MLPNetwork cur = in.net;
  std::vector<ReductionStep> steps = in.steps;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int l = 1; l < cur.depth(); ++l)
      while (rank_deficient(cur.layer(l + 1).W)) {
        ReductionStep st;
        cur = reduce_inner(cur, l, &st);
        steps.push_back(st);
        changed = true;
      }
    for (int l = 1; l < cur.depth(); ++l)
      while (rank_deficient(cur.layer(l).Wt)) {
        ReductionStep st;
        cur = reduce_outer(cur, l, &st);
        steps.push_back(st);
        changed = true;
      }
  }
  return {cur, in.A, steps, std::nullopt};
}

double verify_equivalence(const MLPNetwork& original,
                          const NormalFormResult& result, const Box& domain,
                          int samples) {
  if (domain.dim() != original.input_dim())
    throw Error(ErrorKind::InvalidInput,
                "verify_equivalence: domain dimension mismatch");
  if (result.coord_change.cols() != original.input_dim() ||
      result.coord_change.rows() != result.reduced.input_dim())
    throw Error(ErrorKind::InvalidInput,
                "verify_equivalence: coordinate change has wrong shape");
  double worst = 0.0;
  for (const Vec& x : quasi_random_points(domain, samples))
    worst = std::max(worst, std::abs(forward(original, x) -
                                     forward(result.reduced,
                                             result.coord_change * x)));
  return worst;
}

ClassReport class_under_coordinate_change(const ClassReport& reduced,
                                          int n_bar, int n) {
  if (n_bar > n || n_bar < 1)
    throw Error(ErrorKind::InvalidInput,
                "class_under_coordinate_change: need 1 <= n_bar <= n");
  ClassReport out = reduced;
  if (n_bar < n && (reduced.verdict == MapClass::C2 ||
                    reduced.verdict == MapClass::C3)) {
    out.verdict = MapClass::C3;
    out.notes.push_back(
        "reduced map has critical points and n_bar = " + std::to_string(n_bar) +
        " < n = " + std::to_string(n) +
        ": each is a degenerate affine family in the original coordinates; C2 "
        "impossible");
    out.points.clear();
  }
  return out;
}

std::string to_string(StepKind k) {
  switch (k) {
    case StepKind::InputCoordChange: return "InputCoordChange";
    case StepKind::InnerReduction: return "InnerReduction";
    case StepKind::OuterReduction: return "OuterReduction";
    case StepKind::ConstantCollapse: return "ConstantCollapse";
  }
  return "?";
}

}  // namespace morsenet
