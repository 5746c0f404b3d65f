#include "morsenet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "morsenet/io.hpp"
#include "morsenet/morse.hpp"
#include "morsenet/normal_form.hpp"

namespace morsenet {

namespace {

using Rng = std::mt19937_64;

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Vec gaussian(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

Mat gaussian(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (int j = 0; j < c; ++j) m.col(j) = gaussian(r, rng);
  return m;
}

int uniform(int lo, int hi, Rng& rng) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform(double lo, double hi, Rng& rng) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Depth <= max_depth, widths <= max_width.
std::vector<int> random_dims(int max_depth, int max_width, Rng& rng) {
  int L = uniform(1, max_depth, rng);
  std::vector<int> d;
  for (int k = 0; k < 2 * L; ++k) d.push_back(uniform(1, max_width, rng));
  d.push_back(1);
  return d;
}

// Rise to a peak wider than the input, then fall to 1.
std::vector<int> random_augmented_dims(Rng& rng) {
  for (;;) {
    int n = uniform(1, 3, rng), L = uniform(1, 2, rng);
    int peak = uniform(1, 2 * L - 1, rng);
    int top = uniform(n + 1, 6, rng);
    std::vector<int> d{n};
    for (int k = 1; k < 2 * L; ++k) {
      if (k < peak) d.push_back(uniform(d.back(), top, rng));
      else if (k == peak) d.push_back(top);
      else d.push_back(uniform(1, d.back(), rng));
    }
    d.push_back(1);
    if (classify_architecture(d).verdict == ArchVerdict::Augmented) return d;
  }
}

bool all_full_rank(const MLPNetwork& net) {
  for (int k = 1; k <= 2 * net.depth(); ++k)
    if (!has_full_rank(net.V(k))) return false;
  return true;
}

ActivationKind smooth_act(Rng& rng) {
  return uniform(0, 1, rng) ? ActivationKind::Tanh : ActivationKind::Softplus;
}

MLPNetwork full_rank_mlp(const std::vector<int>& dims, Rng& rng,
                         ActivationKind act = ActivationKind::Softplus) {
  for (;;) {
    MLPNetwork net = random_mlp(dims, rng, act);
    if (all_full_rank(net)) return net;
  }
}

// ---- linalg

CheckResult linalg_rank_invariance(Rng& rng) {
  int bad = 0;
  for (int t = 0; t < 100; ++t) {
    int r = uniform(1, 6, rng), c = uniform(1, 6, rng), k = uniform(1, std::min(r, c), rng);
    Mat m = gaussian(r, k, rng) * gaussian(k, c, rng);
    std::vector<int> pr(r), pc(c);
    std::iota(pr.begin(), pr.end(), 0);
    std::iota(pc.begin(), pc.end(), 0);
    std::shuffle(pr.begin(), pr.end(), rng);
    std::shuffle(pc.begin(), pc.end(), rng);
    Mat p(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) p(i, j) = m(pr[i], pc[j]);
    int r0 = numerical_rank(m).rank;
    bad += r0 != k || numerical_rank(p).rank != r0 ||
           numerical_rank(m.transpose()).rank != r0;
  }
  return {"linalg: rank invariant under permutation and transposition", bad == 0,
          fmt("%.0f of 100 matrices disagree", bad)};
}

CheckResult linalg_full_rank_solution(Rng& rng) {
  double worst = 0.0;
  int bad_rank = 0;
  for (int t = 0; t < 500; ++t) {
    int m = uniform(1, 8, rng), n = uniform(1, m, rng);
    RowVec a = gaussian(n, rng).transpose(), c = gaussian(m, rng).transpose();
    // Sparse entries reach the zero-row and zero-column branches.
    for (int i = 0; i < n; ++i)
      if (uniform(0, 3, rng) == 0) a(i) = 0.0;
    for (int j = 0; j < m; ++j)
      if (uniform(0, 3, rng) == 0) c(j) = 0.0;
    if (a.isZero()) a(uniform(0, n - 1, rng)) = 1.0;
    if (c.isZero()) c(uniform(0, m - 1, rng)) = 1.0;
    Mat b = full_rank_solution(a, c);
    worst = std::max(worst, (a * b - c).norm() / c.norm());
    bad_rank += numerical_rank(b).rank != n;
  }
  return {"linalg: full_rank_solution gives A B = C with rank(B) = n",
          worst <= 1e-12 && bad_rank == 0,
          fmt("500 pairs, max relative residual %.2e, rank failures %.0f", worst, bad_rank)};
}

CheckResult linalg_left_null_row(Rng& rng) {
  double worst = 0.0;
  int returned = 0;
  for (int t = 0; t < 200; ++t) {
    int r = uniform(1, 6, rng), c = uniform(1, 6, rng), k = uniform(1, std::min(r, c), rng);
    Mat m = gaussian(r, k, rng) * gaussian(k, c, rng);
    if (auto v = left_null_row(m)) {
      ++returned;
      worst = std::max(worst, (*v * m).norm());
    }
  }
  return {"linalg: left_null_row residual", worst <= 1e-10,
          fmt("%.0f rows returned, max |vM| %.2e", returned, worst)};
}

CheckResult linalg_monotone_chain(Rng& rng) {
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    int len = uniform(1, 5, rng);
    bool up = uniform(0, 1, rng);
    std::vector<int> d{uniform(1, 4, rng)};
    for (int k = 0; k < len; ++k)
      d.push_back(up ? uniform(d.back(), 6, rng) : uniform(1, d.back(), rng));
    std::vector<Mat> f;
    for (int k = 0; k < len; ++k) f.push_back(gaussian(d[k], d[k + 1], rng));
    bool ok = monotone_product_rank_check(f);
    Mat p = f[0];
    for (int k = 1; k < len; ++k) p = p * f[k];
    if (ok) bad += numerical_rank(p).rank != std::min(d.front(), d.back());
    else ++bad;
  }
  return {"linalg: monotone full-rank chains keep the end rank", bad == 0,
          fmt("%.0f of 200 chains failed", bad)};
}

// ---- mlp

CheckResult mlp_derivatives(Rng& rng) {
  double g_err = 0.0, h_err = 0.0, sym = 0.0;
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    MLPNetwork net = random_mlp(random_dims(3, 6, rng), rng, smooth_act(rng));
    for (int s = 0; s < 10; ++s) {
      Vec x = gaussian(net.input_dim(), rng);
      Vec g = gradient(net, x);
      Mat H = hessian(net, x);
      sym = std::max(sym, (H - H.transpose()).cwiseAbs().maxCoeff());
      for (int i = 0; i < x.size(); ++i) {
        Vec e = Vec::Unit(x.size(), i) * h;
        double fd = (forward(net, x + e) - forward(net, x - e)) / (2 * h);
        g_err = std::max(g_err, std::abs(fd - g(i)) / std::max(1.0, g.cwiseAbs().maxCoeff()));
        if (s == 0) {
          Vec gd = (gradient(net, x + e) - gradient(net, x - e)) / (2 * h);
          h_err = std::max(h_err, (gd - H.col(i)).cwiseAbs().maxCoeff() /
                                      std::max(1.0, H.cwiseAbs().maxCoeff()));
        }
      }
    }
  }
  return {"mlp: gradient and Hessian match central differences",
          g_err <= 1e-6 && h_err <= 1e-6 && sym <= 1e-9,
          fmt("grad %.1e, hess %.1e, asymmetry %.1e", g_err, h_err, sym)};
}

CheckResult mlp_mixed(Rng& rng) {
  double err = 0.0;
  const double h = 1e-6;
  for (int t = 0; t < 20; ++t) {
    MLPNetwork net = random_mlp(random_dims(2, 4, rng), rng, smooth_act(rng));
    Vec x = gaussian(net.input_dim(), rng);
    Mat M = mixed_second_derivatives(net, x);
    Vec p = parameters(net);
    for (int j = 0; j < p.size(); ++j) {
      Vec e = Vec::Unit(p.size(), j) * h;
      Vec gd = (gradient(with_parameters(net, p + e), x) -
                gradient(with_parameters(net, p - e), x)) / (2 * h);
      err = std::max(err, (gd - M.col(j)).cwiseAbs().maxCoeff() /
                              std::max(1.0, M.cwiseAbs().maxCoeff()));
    }
  }
  return {"mlp: mixed derivatives match differences in the weights", err <= 1e-6,
          fmt("max error %.1e", err)};
}

CheckResult mlp_factorisation(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    MLPNetwork net = random_mlp(random_dims(3, 6, rng), rng, smooth_act(rng));
    Vec x = gaussian(net.input_dim(), rng);
    RowVec g = gradient(net, x).transpose();
    for (int l = 1; l < 2 * net.depth(); ++l)
      worst = std::max(worst, (z_product(net, x, l) * y_product(net, x, l) - g).cwiseAbs().maxCoeff());
  }
  return {"mlp: Z_l Y_l reproduces the gradient", worst <= 1e-10, fmt("max residual %.2e", worst)};
}

CheckResult mlp_nonaugmented_gradient(Rng& rng) {
  double min_norm = 1e300;
  int rank_bad = 0;
  for (int t = 0; t < 100; ++t) {
    MLPNetwork net = full_rank_mlp(random_nonaugmented_dims(uniform(1, 4, rng), uniform(1, 3, rng), rng),
                                   rng, smooth_act(rng));
    for (const Vec& x : quasi_random_points(Box::cube(net.input_dim(), -2, 2), 1000, t)) {
      Vec g = gradient(net, x);
      min_norm = std::min(min_norm, g.norm());
      rank_bad += numerical_rank(g.transpose()).rank != 1;
    }
  }
  return {"mlp: non-augmented full-rank gradients never vanish", min_norm > 0 && rank_bad == 0,
          fmt("100 nets x 1000 points, min |grad| %.3e", min_norm)};
}

CheckResult mlp_mixed_rank(Rng& rng) {
  int bad = 0;
  for (int t = 0; t < 50; ++t) {
    MLPNetwork net = full_rank_mlp(random_augmented_dims(rng), rng, smooth_act(rng));
    Vec x = gaussian(net.input_dim(), rng);
    bad += numerical_rank(mixed_second_derivatives(net, x)).rank != net.input_dim();
  }
  return {"mlp: mixed derivatives have rank n for augmented nets", bad == 0,
          fmt("%.0f of 50 pairs rank-deficient", bad)};
}

// ---- normal_form

CheckResult nf_round_trip(Rng& rng) {
  double worst = 0.0;
  int not_full = 0, not_idem = 0, no_shrink = 0, planted = 0;
  for (int t = 0; t < 100; ++t) {
    MLPNetwork net = random_mlp(random_dims(3, 5, rng), rng, smooth_act(rng));
    int k = uniform(1, 2 * net.depth(), rng);
    net = plant_rank_one(net, k, rng);
    bool deficient = std::min(net.V(k).rows(), net.V(k).cols()) >= 2;
    NormalFormResult nf = normalize(net);
    worst = std::max(worst, verify_equivalence(net, nf, Box::cube(net.input_dim(), -2, 2), 200));
    if (nf.constant_value) continue;
    not_full += !all_full_rank(nf.reduced);
    not_idem += !normalize(nf.reduced).steps.empty();
    if (deficient) {
      ++planted;
      std::vector<int> d0 = net.dims(), d1 = nf.reduced.dims();
      no_shrink += std::accumulate(d1.begin(), d1.end(), 0) >= std::accumulate(d0.begin(), d0.end(), 0);
    }
  }
  bool ok = worst <= 1e-9 && not_full == 0 && not_idem == 0 && no_shrink == 0;
  return {"normal form: equivalent, full rank, idempotent, smaller", ok,
          fmt("max deviation %.2e; %.0f planted deficiencies, %.0f did not shrink", worst, planted,
              no_shrink) + fmt("; rank %.0f, idempotence %.0f failures", not_full, not_idem)};
}

CheckResult nf_constant(Rng& rng) {
  int missed = 0;
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    MLPNetwork net = random_mlp({2, 3, 2, 3, 1}, rng);
    std::vector<Layer> ls = net.layers();
    if (t % 3 == 0) {
      ls[0].W.setZero();
    } else if (t % 3 == 1) {
      ls[1].Wt.setZero();
    } else {
      Vec u = gaussian(2, rng);
      Vec w(2);
      w << -u(1), u(0);
      ls[1].W = gaussian(3, rng) * w.transpose();
      ls[0].Wt = u * gaussian(3, rng).transpose();
    }
    MLPNetwork c(ls);
    NormalFormResult nf = normalize(c);
    missed += !nf.constant_value.has_value();
    if (nf.constant_value)
      for (const Vec& x : quasi_random_points(Box::cube(2, -2, 2), 100, t))
        worst = std::max(worst, std::abs(forward(c, x) - *nf.constant_value));
  }
  return {"normal form: constant nets collapse to their value", missed == 0 && worst <= 1e-10,
          fmt("missed %.0f of 30, max deviation %.2e", missed, worst)};
}

CheckResult nf_step_ranks(Rng& rng) {
  int inner = 0, outer = 0, bad = 0;
  for (int t = 0; t < 60; ++t) {
    MLPNetwork net = random_mlp({3, 4, 4, 4, 1}, rng);
    bool inner_case = t % 2 == 0;
    net = plant_rank_one(net, inner_case ? 3 : 2, rng);
    if (inner_case) {
      int before = numerical_rank(net.layer(2).W).rank;
      MLPNetwork r = reduce_inner(net, 1);
      bad += numerical_rank(r.layer(2).W).rank != before;
      ++inner;
    } else {
      int before = numerical_rank(net.layer(1).Wt).rank;
      bool w_full = has_full_rank(net.layer(2).W);
      MLPNetwork r = reduce_outer(net, 1);
      bad += numerical_rank(r.layer(1).Wt).rank != before;
      bad += w_full && !has_full_rank(r.layer(2).W);
      ++outer;
    }
  }
  return {"normal form: reduction steps keep the stated ranks", bad == 0,
          fmt("%.0f inner, %.0f outer steps, %.0f violations", inner, outer, bad)};
}

// ---- morse

MLPNetwork example_bottleneck(char which) {
  auto row = [](std::initializer_list<double> v) {
    RowVec r(v.size());
    int i = 0;
    for (double x : v) r(i++) = x;
    return Mat(r);
  };
  auto col = [&](std::initializer_list<double> v) { return Mat(row(v).transpose()); };
  auto vec = [&](std::initializer_list<double> v) { return Vec(col(v)); };
  switch (which) {
    case 'a':
      return make_mlp({row({1, 1}), row({1, 1})}, {vec({0.2}), vec({-0.3})},
                      {col({1, 1}), row({1})}, {vec({0.1, -0.1}), vec({0})});
    case 'b':
      return make_mlp({row({1, 1}), row({0, 1})}, {vec({0.2}), vec({-0.3})},
                      {col({1, 0}), row({1})}, {vec({0.1, -0.1}), vec({0})});
    case 'c':
      return make_mlp({col({1, 1}), col({1, 1})}, {vec({1, -1}), vec({0, 0})},
                      {row({1, -2}), row({1, 1})}, {vec({0}), vec({0})});
    case 'd':  // degenerate choice of beta
      return make_mlp({col({1, 1}), col({1, 1})}, {vec({1, -1}), vec({0.5, -0.5})},
                      {row({1, -2}), row({1, -1.3799560523154286})}, {vec({0}), vec({0})});
    default:  // non-degenerate choice
      return make_mlp({col({1, 1}), col({1, 1})}, {vec({1, -1}), vec({0.5, -0.5})},
                      {row({1, 1}), row({1, -1.2})}, {vec({0}), vec({0})});
  }
}

CheckResult morse_nonaugmented_search(Rng& rng) {
  int found = 0;
  for (int t = 0; t < 100; ++t) {
    MLPNetwork net = full_rank_mlp(random_nonaugmented_dims(uniform(1, 4, rng), uniform(1, 2, rng), rng), rng);
    SearchConfig cfg = SearchConfig::on_box(Box::cube(net.input_dim(), -2, 2));
    cfg.seed = t;
    found += static_cast<int>(find_critical_points(mlp_map(net), cfg).size());
  }
  return {"morse: no critical points for non-augmented full-rank nets", found == 0,
          fmt("100 nets, 64 starts each, %.0f points found", found)};
}

CheckResult morse_planted_recovery(Rng& rng, std::vector<CriticalPoint>& corpus) {
  double worst = 0.0, worst_degenerate = 0.0;
  int failed = 0, isolated = 0;
  for (int t = 0; t < 30; ++t) {
    std::vector<int> dims = t % 3 == 2 ? std::vector<int>{2, 1, 2, 1, 1} : random_augmented_dims(rng);
    MLPNetwork base = full_rank_mlp(dims, rng);
    Vec x = gaussian(base.input_dim(), rng, 0.5);
    MLPNetwork w = construct_critical_weights(base, x);
    ScalarMap map = mlp_map(w);
    SearchConfig cfg = SearchConfig::on_box(Box{x.array() - 2.0, x.array() + 2.0});
    auto r = newton_solve(map, x + Vec::Constant(x.size(), 1e-3), cfg);
    if (!r) {
      ++failed;
      continue;
    }
    // A degenerate plant can lie on a curve of critical points; Newton then
    // stops elsewhere on it, at about the perturbation distance.
    if (annotate(map, x, cfg.degeneracy).regularity == Regularity::NonDegenerate) {
      ++isolated;
      worst = std::max(worst, (*r - x).norm());
    } else {
      worst_degenerate = std::max(worst_degenerate, (*r - x).norm());
    }
    cfg.starts = 16;
    for (auto& p : find_critical_points(map, cfg)) corpus.push_back(p);
  }
  return {"morse: Newton recovers planted critical points",
          failed == 0 && worst <= 1e-6 && worst_degenerate <= 1e-2 && isolated > 0,
          fmt("30 nets, %.0f failures; %.0f isolated plants, max distance %.2e", failed, isolated,
              worst) + fmt("; degenerate plants within %.2e", worst_degenerate)};
}

CheckResult morse_reported_points(const std::vector<CriticalPoint>& corpus) {
  SearchConfig def;
  int bad_grad = 0, bad_reg = 0;
  for (const auto& p : corpus) {
    bad_grad += !(p.grad_norm <= def.tol);
    if (p.regularity == Regularity::NonDegenerate) {
      double mx = p.eigenvalues.cwiseAbs().maxCoeff(), mn = p.eigenvalues.cwiseAbs().minCoeff();
      bad_reg += !(mn > def.degeneracy * std::max(1.0, mx));
    }
  }
  return {"morse: reported points are critical and correctly labelled",
          bad_grad == 0 && bad_reg == 0 && !corpus.empty(),
          fmt("%.0f points, %.0f above tolerance, %.0f mislabelled", corpus.size(), bad_grad, bad_reg)};
}

CheckResult morse_case_b(Rng& rng) {
  int nets = 0, points = 0, bad = 0;
  for (int t = 0; t < 40 && nets < 10; ++t) {
    std::vector<int> dims = t % 2 ? std::vector<int>{2, 1, 2, 2, 1} : std::vector<int>{3, 1, 3, 3, 1};
    MLPNetwork net = full_rank_mlp(dims, rng);
    SearchConfig cfg = SearchConfig::on_box(Box::cube(net.input_dim(), -2, 2));
    cfg.starts = 16;
    BottleneckAnalysis ba = bottleneck_case_analysis(net, cfg);
    if (ba.label != 'b') continue;
    ++nets;
    ScalarMap map = mlp_map(net);
    std::vector<Vec> xs = ba.witnesses;
    for (const auto& p : find_critical_points(map, cfg)) xs.push_back(p.x);
    for (const Vec& x : xs) {
      if (map.grad(x).norm() > 1e-8) continue;
      ++points;
      bad += numerical_rank(map.hess(x), 1e-6).rank >= net.input_dim();
    }
  }
  return {"morse: bottleneck case b critical points are degenerate", bad == 0 && points > 0,
          fmt("%.0f case-b nets, %.0f points, %.0f with full-rank Hessian", nets, points, bad)};
}

CheckResult morse_example_verdicts(Rng&) {
  const char* labels = "abcde";
  const MapClass expect[] = {MapClass::C1, MapClass::C3, MapClass::C2, MapClass::C3, MapClass::C2};
  std::string got;
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    MLPNetwork net = example_bottleneck(labels[i]);
    double r = net.input_dim() == 1 ? 3.0 : 2.0;
    MlpClassification c = classify_mlp(net, SearchConfig::on_box(Box::cube(net.input_dim(), -r, r)));
    ok = ok && c.report.verdict == expect[i];
    got += std::string(got.empty() ? "" : " ") + (i == 4 ? 'd' : labels[i]) + "=" + to_string(c.report.verdict);
  }
  return {"morse: example bottleneck nets classify as expected", ok, got};
}

// ---- node

CheckResult node_flows(Rng& rng) {
  double y_err = 0.0, liou = 0.0;
  int rank_bad = 0;
  for (int t = 0; t < 50; ++t) {
    FieldPtr f;
    int m = uniform(1, 3, rng);
    switch (t % 4) {
      case 0: f = std::make_shared<AffineField>(0.5 * gaussian(m, m, rng), gaussian(m, rng)); break;
      case 1: f = std::make_shared<ExpShearField>(); m = 2; break;
      case 2: f = std::make_shared<IdentityField>(m, uniform(-1.0, 1.0, rng)); break;
      default: f = random_mlp_field(m, 3, rng); break;
    }
    double T = uniform(0.1, 2.0, rng);
    Vec a = gaussian(m, rng, 0.5);
    FlowResult fr = flow_with_jacobian(*f, a, T);
    liou = std::max(liou, fr.liouville_residual());
    rank_bad += numerical_rank(fr.Y).rank != m;
    Mat fd(m, m);
    for (int i = 0; i < m; ++i) {
      double h = 1e-6 * std::max(1.0, std::abs(a(i)));
      Vec e = Vec::Unit(m, i) * h;
      fd.col(i) = (flow_state(*f, a + e, T) - flow_state(*f, a - e, T)) / (2 * h);
    }
    y_err = std::max(y_err, (fd - fr.Y).cwiseAbs().maxCoeff() / std::max(1.0, fr.Y.cwiseAbs().maxCoeff()));
  }
  return {"node: variational Jacobian, Liouville identity, full rank",
          y_err <= 1e-4 && liou <= 1e-6 && rank_bad == 0,
          fmt("50 flows, Y vs differences %.1e, Liouville %.1e, rank failures %.0f", y_err, liou, rank_bad)};
}

NeuralODE random_node(int n, int m, Rng& rng, const Mat* W = nullptr) {
  NeuralODE node;
  node.n = n;
  node.m = m;
  node.W = W ? *W : gaussian(m, n, rng);
  node.b = gaussian(m, rng, 0.5);
  node.Wt = gaussian(m, rng).transpose();
  node.bt = 0.1;
  node.T = 1.0;
  node.field = random_mlp_field(m, 3, rng);
  return node;
}

CheckResult node_nonaugmented(Rng& rng) {
  double min_norm = 1e300;
  int rank_bad = 0;
  for (int t = 0; t < 20; ++t) {
    int m = uniform(1, 2, rng), n = uniform(m, 3, rng);
    NeuralODE node = random_node(n, m, rng);
    for (const Vec& x : quasi_random_points(Box::cube(n, -2, 2), 1000, t)) {
      Vec g = node_gradient(node, x);
      min_norm = std::min(min_norm, g.norm());
      rank_bad += numerical_rank(g.transpose()).rank != 1;
    }
  }
  return {"node: non-augmented gradients never vanish", min_norm > 0 && rank_bad == 0,
          fmt("20 nodes x 1000 points, min |grad| %.3e", min_norm)};
}

CheckResult node_degenerate(Rng& rng) {
  int points = 0, bad = 0;
  for (int t = 0; t < 10; ++t) {
    int n = 2, m = uniform(2, 3, rng);
    Mat W = gaussian(m, 1, rng) * gaussian(1, n, rng);
    NeuralODE node = random_node(n, m, rng, &W);
    Vec x = gaussian(n, rng, 0.5);
    node.Wt = construct_node_critical_weights(node, x);
    SearchConfig cfg = SearchConfig::on_box(Box::cube(n, -2, 2));
    cfg.starts = 8;
    cfg.tol = 1e-8;
    for (const auto& p : find_critical_points(node_map(node), cfg)) {
      ++points;
      bad += numerical_rank(node_hessian(node, p.x), 1e-6).rank >= n;
    }
  }
  return {"node: degenerate nodes have only degenerate critical points", bad == 0 && points > 0,
          fmt("%.0f points, %.0f with full-rank Hessian", points, bad)};
}

CheckResult node_embedding(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    int n = uniform(1, 2, rng);
    MLPNetwork psi = random_mlp(random_augmented_dims(rng), rng);
    while (psi.input_dim() != n) psi = random_mlp(random_augmented_dims(rng), rng);
    NeuralODE node = build_embedding_node(mlp_map(psi), n, n + 1, 1.0);
    for (const Vec& x : quasi_random_points(Box::cube(n, -2, 2), 200, t))
      worst = std::max(worst, std::abs(node_forward(node, x) - forward(psi, x)));
  }
  return {"node: embedded nodes reproduce their target", worst <= 1e-6,
          fmt("10 targets x 200 points, max deviation %.2e", worst)};
}

CheckResult node_planted(Rng& rng) {
  double worst = 0.0;
  int failed = 0;
  for (int t = 0; t < 10; ++t) {
    int n = uniform(1, 2, rng), m = n + uniform(1, 2, rng);
    NeuralODE node = random_node(n, m, rng);
    Vec x = gaussian(n, rng, 0.5);
    node.Wt = construct_node_critical_weights(node, x);
    SearchConfig cfg = SearchConfig::on_box(Box{x.array() - 1.0, x.array() + 1.0});
    cfg.tol = 1e-8;
    auto r = newton_solve(node_map(node), x + Vec::Constant(n, 1e-3), cfg);
    if (!r) {
      ++failed;
      continue;
    }
    worst = std::max(worst, (*r - x).norm());
  }
  return {"node: Newton recovers planted critical points", failed == 0 && worst <= 1e-6,
          fmt("10 nodes, %.0f failures, max distance %.2e", failed, worst)};
}

// ---- io

CheckResult io_round_trip(Rng& rng) {
  double worst = 0.0;
  int changed = 0;
  for (int t = 0; t < 20; ++t) {
    NetworkDocument doc;
    if (t % 2 == 0) {
      doc.kind = "mlp";
      doc.mlp = random_mlp(random_dims(3, 4, rng), rng, smooth_act(rng));
    } else {
      int m = uniform(1, 3, rng), n = uniform(1, 3, rng);
      Mat A = gaussian(m, m, rng);
      Vec c = gaussian(m, rng);
      NeuralODE node = random_node(n, m, rng);
      node.field = std::make_shared<AffineField>(A, c);
      doc.kind = "node";
      doc.node = node;
      doc.field = Json{{"kind", "affine"}, {"A", to_json(A)}, {"c", to_json(c)}};
    }
    doc.domain = Box::cube(doc.mlp ? doc.mlp->input_dim() : doc.node->n, -1, 1);
    std::string s1 = dump_json(network_to_json(doc));
    NetworkDocument back = parse_network(s1);
    changed += dump_json(network_to_json(back)) != s1;
    Vec x = gaussian(back.mlp ? back.mlp->input_dim() : back.node->n, rng);
    double y0 = doc.mlp ? forward(*doc.mlp, x) : node_forward(*doc.node, x);
    double y1 = back.mlp ? forward(*back.mlp, x) : node_forward(*back.node, x);
    worst = std::max(worst, std::abs(y0 - y1));
  }
  return {"io: documents round-trip exactly", worst == 0.0 && changed == 0,
          fmt("20 documents, %.0f changed, max output deviation %.1e", changed, worst)};
}

}  // namespace

MLPNetwork plant_rank_one(const MLPNetwork& net, int k, Rng& rng) {
  std::vector<Layer> ls = net.layers();
  Mat& v = (k % 2) ? ls[(k - 1) / 2].W : ls[k / 2 - 1].Wt;
  v = gaussian(static_cast<int>(v.rows()), rng) *
      gaussian(static_cast<int>(v.cols()), rng).transpose();
  return MLPNetwork(std::move(ls));
}

std::vector<int> random_nonaugmented_dims(int n, int L, Rng& rng) {
  std::vector<int> d{n};
  for (int k = 1; k < 2 * L; ++k) d.push_back(uniform(1, d.back(), rng));
  d.push_back(1);
  return d;
}

std::shared_ptr<MLPField> random_mlp_field(int m, int hidden, Rng& rng, double scale) {
  std::vector<MLPNetwork> nets;
  for (int i = 0; i < m; ++i) {
    MLPNetwork net = random_mlp({m, hidden, 1}, rng, ActivationKind::Tanh);
    nets.push_back(with_parameters(net, scale * parameters(net)));
  }
  return std::make_shared<MLPField>(std::move(nets));
}

std::vector<CheckResult> run_property_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckResult> rows;
  std::vector<CriticalPoint> corpus;
  auto guarded = [&](const char* name, auto&& f) {
    try {
      rows.push_back(f());
    } catch (const std::exception& e) {
      rows.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };
  guarded("linalg: rank invariance", [&] { return linalg_rank_invariance(rng); });
  guarded("linalg: full_rank_solution", [&] { return linalg_full_rank_solution(rng); });
  guarded("linalg: left_null_row", [&] { return linalg_left_null_row(rng); });
  guarded("linalg: monotone chains", [&] { return linalg_monotone_chain(rng); });
  guarded("mlp: derivatives", [&] { return mlp_derivatives(rng); });
  guarded("mlp: mixed derivatives", [&] { return mlp_mixed(rng); });
  guarded("mlp: factorisation", [&] { return mlp_factorisation(rng); });
  guarded("mlp: non-augmented gradient", [&] { return mlp_nonaugmented_gradient(rng); });
  guarded("mlp: mixed rank", [&] { return mlp_mixed_rank(rng); });
  guarded("normal form: round trip", [&] { return nf_round_trip(rng); });
  guarded("normal form: constants", [&] { return nf_constant(rng); });
  guarded("normal form: step ranks", [&] { return nf_step_ranks(rng); });
  guarded("morse: non-augmented search", [&] { return morse_nonaugmented_search(rng); });
  guarded("morse: planted recovery", [&] { return morse_planted_recovery(rng, corpus); });
  guarded("morse: reported points", [&] { return morse_reported_points(corpus); });
  guarded("morse: case b", [&] { return morse_case_b(rng); });
  guarded("morse: example verdicts", [&] { return morse_example_verdicts(rng); });
  guarded("node: flows", [&] { return node_flows(rng); });
  guarded("node: non-augmented", [&] { return node_nonaugmented(rng); });
  guarded("node: degenerate", [&] { return node_degenerate(rng); });
  guarded("node: embedding", [&] { return node_embedding(rng); });
  guarded("node: planted", [&] { return node_planted(rng); });
  guarded("io: round trip", [&] { return io_round_trip(rng); });
  return rows;
}

void print_table(const std::vector<CheckResult>& rows, std::ostream& out) {
  size_t w = 0;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  int failed = 0;
  for (const auto& r : rows) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name
        << std::string(w - r.name.size() + 2, ' ') << r.detail << "\n";
    failed += !r.passed;
  }
  out << rows.size() - failed << "/" << rows.size() << " checks passed\n";
}

}  // namespace morsenet
