#include "morsenet/morse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "morsenet/normal_form.hpp"

namespace morsenet {

std::string to_string(MapClass c) {
  switch (c) {
    case MapClass::C1: return "C1";
    case MapClass::C2: return "C2";
    case MapClass::C3: return "C3";
    case MapClass::Undetermined: return "Undetermined";
  }
  return "?";
}

std::string to_string(Certification c) {
  return c == Certification::TheoremCertified ? "TheoremCertified"
                                              : "SearchBased";
}

std::string to_string(Regularity r) {
  switch (r) {
    case Regularity::NonDegenerate: return "NonDegenerate";
    case Regularity::Degenerate: return "Degenerate";
    case Regularity::Indeterminate: return "Indeterminate";
  }
  return "?";
}

ScalarMap mlp_map(const MLPNetwork& net) {
  ScalarMap m{net.input_dim(),
              [net](const Vec& x) { return forward(net, x); },
              [net](const Vec& x) { return gradient(net, x); },
              [net](const Vec& x) { return hessian(net, x); },
              nullptr};
  m.grad_noise = [net](const Vec& x) {
    EvalTrace tr = trace(net, x);
    RowVec r = net.layer(net.depth()).Wt.cwiseAbs();
    for (int l = net.depth(); l >= 1; --l) {
      r = r.cwiseProduct(tr.psi[l - 1].cwiseAbs().transpose()) * net.layer(l).W.cwiseAbs();
      if (l > 1) r = r * net.layer(l - 1).Wt.cwiseAbs();
    }
    return 64 * std::numeric_limits<double>::epsilon() * r.norm();
  };
  return m;
}

double gradient_fd_mismatch(const ScalarMap& map, const std::vector<Vec>& xs,
                            double h) {
  double worst = 0.0;
  for (const Vec& x : xs) {
    Vec g = map.grad(x);
    Vec fd(map.n);
    for (int i = 0; i < map.n; ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      fd(i) = (map.value(xp) - map.value(xm)) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
  }
  return worst;
}

void SearchConfig::validate() const {
  domain.validate("search domain");
  if (starts < 1 || !(tol > 0) || max_iter < 1 || !(dedupe_radius > 0) ||
      !(degeneracy > 0))
    throw Error(ErrorKind::InvalidInput,
                "search config: starts, tol, iterations, dedupe radius and "
                "degeneracy threshold must be positive");
}

CriticalPoint annotate(const ScalarMap& map, const Vec& x, double degeneracy) {
  CriticalPoint cp;
  cp.x = x;
  try {
    cp.grad_norm = map.grad(x).norm();
    Mat H = map.hess(x);
    if (!H.allFinite()) return cp;
    cp.eigenvalues = symmetric_eigenvalues(H);
  } catch (const Error&) {
    return cp;
  }
  const Vec& ev = cp.eigenvalues;
  double lo = ev.cwiseAbs().minCoeff(), hi = ev.cwiseAbs().maxCoeff();
  cp.regularity = lo <= degeneracy * std::max(1.0, hi) ? Regularity::Degenerate
                                                       : Regularity::NonDegenerate;
  cp.morse_index = static_cast<int>((ev.array() < 0).count());
  return cp;
}

namespace {

Vec newton_step(const Mat& H, const Vec& g, double rel) {
  return -pinv_solve(0.5 * (H + H.transpose()), g, rel);
}

bool in_expanded(const Box& b, const Vec& x) {
  Vec w = b.width();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) < b.lo(i) - w(i) || x(i) > b.hi(i) + w(i)) return false;
  return true;
}

// One damped step; returns false when no halving reduces |g|.
bool damped_step(const ScalarMap& map, const Box& box, Vec& x, Vec& g,
                 double& gn) {
  Mat H = map.hess(x);
  if (!H.allFinite()) return false;
  for (double rel : {1e-10, 1e-6}) {
    Vec step = newton_step(H, g, rel);
    if (!step.allFinite()) continue;
    double t = 1.0;
    for (int k = 0; k <= 30; ++k, t *= 0.5) {
      Vec xn = x + t * step;
      if (!in_expanded(box, xn)) continue;
      Vec gnew = map.grad(xn);
      double nn = gnew.norm();
      if (std::isfinite(nn) && nn < gn) {
        x = xn;
        g = gnew;
        gn = nn;
        return true;
      }
    }
  }
  return false;
}

}  // namespace

std::optional<Vec> newton_solve(const ScalarMap& map, const Vec& x0,
                                const SearchConfig& cfg) {
  try {
    Vec x = x0;
    Vec g = map.grad(x);
    double gn = g.norm();
    if (!std::isfinite(gn)) return std::nullopt;
    for (int it = 0; it < cfg.max_iter && gn > cfg.tol; ++it)
      if (!damped_step(map, cfg.domain, x, g, gn)) break;
    if (!(gn <= cfg.tol)) return std::nullopt;
    // Keep refining while progress is clear; degenerate roots converge slowly.
    // Refinement that runs out of the domain marks a saturated tail, not a
    // critical point. Below the rounding level of grad there is nothing left.
    auto noise = [&](const Vec& y) { return map.grad_noise ? map.grad_noise(y) : 0.0; };
    for (int k = 0; k < 50 && gn > noise(x); ++k) {
      Vec xs = x, gs = g;
      double before = gn;
      if (!damped_step(map, cfg.domain, xs, gs, gn) || gn > 0.9 * before) {
        gn = before;
        break;
      }
      x = xs;
      g = gs;
    }
    if (!cfg.domain.contains(x)) return std::nullopt;
    return x;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<CriticalPoint> find_critical_points(const ScalarMap& map,
                                                const SearchConfig& cfg) {
  cfg.validate();
  if (cfg.domain.dim() != map.n)
    throw Error(ErrorKind::InvalidInput,
                "find_critical_points: domain dimension " +
                    std::to_string(cfg.domain.dim()) + " vs map dimension " +
                    std::to_string(map.n));
  std::vector<CriticalPoint> found;
  for (const Vec& x0 : quasi_random_points(cfg.domain, cfg.starts, cfg.seed)) {
    auto x = newton_solve(map, x0, cfg);
    if (!x) continue;
    CriticalPoint cp = annotate(map, *x, cfg.degeneracy);
    bool dup = false;
    // Flat degenerate points are only located to within the flat region; two
    // of them joined by a segment with a critical midpoint are the same point.
    auto same = [&](const CriticalPoint& q) {
      if ((q.x - cp.x).norm() <= cfg.dedupe_radius) return true;
      if (q.regularity == Regularity::NonDegenerate ||
          cp.regularity == Regularity::NonDegenerate)
        return false;
      return map.grad(0.5 * (q.x + cp.x)).norm() <= cfg.tol;
    };
    for (auto& q : found)
      if (same(q)) {
        dup = true;
        if (cp.grad_norm < q.grad_norm) q = cp;
        break;
      }
    if (!dup) found.push_back(cp);
  }
  std::sort(found.begin(), found.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) {
              for (Eigen::Index i = 0; i < a.x.size(); ++i)
                if (a.x(i) != b.x(i)) return a.x(i) < b.x(i);
              return false;
            });
  return found;
}

namespace {

void verdict_from_points(ClassReport& rep) {
  if (rep.points.empty()) {
    rep.verdict = MapClass::C1;
    rep.notes.push_back("no critical point found in the search domain");
    return;
  }
  bool degenerate = false, indeterminate = false;
  for (const auto& p : rep.points) {
    degenerate |= p.regularity == Regularity::Degenerate;
    indeterminate |= p.regularity == Regularity::Indeterminate;
  }
  if (degenerate)
    rep.verdict = MapClass::C3;
  else if (indeterminate)
    rep.verdict = MapClass::Undetermined;
  else
    rep.verdict = MapClass::C2;
}

}  // namespace

ClassReport classify_map(const ScalarMap& map, Hypothesis h,
                         const SearchConfig& cfg) {
  ClassReport rep;
  rep.domain = cfg.domain;
  switch (h) {
    case Hypothesis::Constant:
      rep.verdict = MapClass::C3;
      rep.certification = Certification::TheoremCertified;
      rep.notes.push_back("constant map: every point is a degenerate critical point");
      return rep;
    case Hypothesis::NonAugmentedFullRank:
      rep.verdict = MapClass::C1;
      rep.certification = Certification::TheoremCertified;
      rep.notes.push_back("non-augmented with full-rank weights: no critical points");
      return rep;
    case Hypothesis::BottleneckCaseA:
      rep.verdict = MapClass::C1;
      rep.certification = Certification::TheoremCertified;
      rep.notes.push_back(
          "bottleneck case a: Z nonzero on all samples; the global "
          "hypothesis is checked on samples only");
      return rep;
    case Hypothesis::BottleneckCaseB:
      rep.points = find_critical_points(map, cfg);
      rep.verdict = MapClass::C3;
      rep.certification = Certification::TheoremCertified;
      rep.notes.push_back("bottleneck case b: zero of Z found, degenerate critical point exists");
      return rep;
    case Hypothesis::DegenerateNode:
      rep.points = find_critical_points(map, cfg);
      if (!rep.points.empty()) {
        rep.verdict = MapClass::C3;
        rep.certification = Certification::TheoremCertified;
        rep.notes.push_back("degenerate weights: every critical point is degenerate");
        return rep;
      }
      verdict_from_points(rep);
      return rep;
    case Hypothesis::None:
      break;
  }
  rep.points = find_critical_points(map, cfg);
  verdict_from_points(rep);
  return rep;
}

Vec levenberg_marquardt(const std::function<Vec(const Vec&)>& r, Vec x,
                        int max_iter) {
  Vec rv = r(x);
  double f = rv.squaredNorm();
  double mu = 1e-3;
  const Eigen::Index n = x.size();
  for (int it = 0; it < max_iter && f > 1e-28; ++it) {
    Mat J(rv.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double h = 1e-7 * std::max(1.0, std::abs(x(i)));
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      J.col(i) = (r(xp) - r(xm)) / (2 * h);
    }
    Mat A = J.transpose() * J;
    Vec g = J.transpose() * rv;
    bool improved = false;
    for (int k = 0; k < 12; ++k) {
      Mat M = A + mu * Mat::Identity(n, n);
      Vec d = M.ldlt().solve(-g);
      Vec xn = x + d;
      Vec rn = r(xn);
      double fn = rn.squaredNorm();
      if (std::isfinite(fn) && fn < f) {
        x = xn;
        rv = rn;
        f = fn;
        mu = std::max(mu / 3, 1e-12);
        improved = true;
        break;
      }
      mu *= 4;
    }
    if (!improved) break;
  }
  return x;
}

BottleneckAnalysis bottleneck_case_analysis(const MLPNetwork& net,
                                            const SearchConfig& cfg) {
  cfg.validate();
  ArchitectureReport arch = classify_architecture(net);
  if (arch.verdict != ArchVerdict::Bottleneck)
    throw Error(ErrorKind::Precondition,
                "bottleneck_case_analysis: architecture is " +
                    to_string(arch.verdict));
  BottleneckAnalysis out;
  out.flavor = *arch.flavor;
  out.z_index = arch.flavor == BottleneckFlavor::NonAugmentedPrefix
                    ? arch.first_j
                    : arch.prefix;
  const int l = out.z_index;
  auto resid = [&](const Vec& x) -> Vec {
    return z_product(net, x, l).transpose();
  };
  constexpr double kZero = 1e-12;
  auto add_witness = [&](const Vec& x) {
    for (const auto& w : out.witnesses)
      if ((w - x).norm() <= cfg.dedupe_radius) return;
    out.witnesses.push_back(x);
  };

  out.min_sampled_z = INFINITY;
  for (const Vec& x : quasi_random_points(cfg.domain, 256, cfg.seed)) {
    double z = resid(x).squaredNorm();
    out.min_sampled_z = std::min(out.min_sampled_z, z);
    if (z < kZero && out.witnesses.size() < 8) add_witness(x);
  }
  if (out.witnesses.empty()) {
    for (const Vec& x0 :
         quasi_random_points(cfg.domain, cfg.starts, cfg.seed + 101)) {
      Vec x = levenberg_marquardt(resid, x0);
      if (cfg.domain.contains(x) && resid(x).squaredNorm() < kZero)
        add_witness(x);
    }
  }
  const bool zero = !out.witnesses.empty();
  out.sample_based = !zero;
  if (out.flavor == BottleneckFlavor::NonAugmentedPrefix)
    out.label = zero ? 'b' : 'a';
  else
    out.label = zero ? 'd' : 'c';
  return out;
}

namespace {

// Bounding box of {A x : x in box}.
Box image_box(const Mat& A, const Box& b) {
  Vec c = A * b.center();
  Vec r = A.cwiseAbs() * (0.5 * b.width());
  return Box{c - r, c + r};
}

}  // namespace

MlpClassification classify_mlp(const MLPNetwork& net, const SearchConfig& cfg) {
  cfg.validate();
  if (cfg.domain.dim() != net.input_dim())
    throw Error(ErrorKind::InvalidInput,
                "domain dimension does not match the network input");
  MlpClassification out;
  out.original_arch = classify_architecture(net);
  NormalFormResult nf = normalize(net);
  out.n_bar = nf.reduced.input_dim();
  out.reduced_arch = classify_architecture(nf.reduced);
  SearchConfig rc = cfg;
  rc.domain = image_box(nf.coord_change, cfg.domain);
  ScalarMap red = mlp_map(nf.reduced);

  Hypothesis h = Hypothesis::None;
  if (nf.constant_value) {
    h = Hypothesis::Constant;
  } else if (out.reduced_arch.verdict == ArchVerdict::NonAugmented) {
    h = Hypothesis::NonAugmentedFullRank;
  } else if (out.reduced_arch.verdict == ArchVerdict::Bottleneck) {
    out.bottleneck = bottleneck_case_analysis(nf.reduced, rc);
    if (out.bottleneck->label == 'a') h = Hypothesis::BottleneckCaseA;
    if (out.bottleneck->label == 'b') h = Hypothesis::BottleneckCaseB;
  }
  out.reduced = classify_map(red, h, rc);
  if (nf.constant_value) {
    out.report = out.reduced;
  } else {
    out.report = class_under_coordinate_change(out.reduced, out.n_bar,
                                               net.input_dim());
  }
  // The reduction can remove the bottleneck; the case analysis still applies
  // to the original when all of its weights have full rank.
  if (!out.bottleneck && out.original_arch.verdict == ArchVerdict::Bottleneck) {
    out.bottleneck = bottleneck_case_analysis(net, cfg);
    bool full = true;
    for (int k = 1; k <= 2 * net.depth(); ++k) full = full && has_full_rank(net.V(k));
    const char lab = out.bottleneck->label;
    if (full && !nf.constant_value && (lab == 'a' || lab == 'b'))
      out.report = classify_map(mlp_map(net),
                                lab == 'a' ? Hypothesis::BottleneckCaseA
                                           : Hypothesis::BottleneckCaseB,
                                cfg);
  }
  out.report.domain = cfg.domain;
  return out;
}

MLPNetwork construct_critical_weights(const MLPNetwork& base, const Vec& x) {
  ArchitectureReport arch = classify_architecture(base);
  if (arch.verdict == ArchVerdict::NonAugmented)
    throw Error(ErrorKind::Unsupported,
                "construct_critical_weights: non-augmented architecture has no "
                "critical points");
  const int ls = arch.l_star;
  EvalTrace tr = trace(base, x);
  auto v = left_null_row(base.V(ls));
  if (!v)
    throw Error(ErrorKind::Precondition,
                "construct_critical_weights: V" + std::to_string(ls) +
                    " has independent rows");
  const int L = base.depth();
  std::vector<Layer> layers = base.layers();

  // Row vector of the factors above V_{ls+1}, evaluated at the base weights.
  RowVec P = RowVec::Ones(1);
  const bool even = ls % 2 == 0;
  for (int k = 2 * L; k >= ls + 2; --k) {
    if (k % 2 == 1) P = P.cwiseProduct(tr.psi[(k - 1) / 2].transpose());
    P = P * base.V(k);
  }
  RowVec target = *v;
  if (even) {
    // V_{ls+1} = W_{q}; Psi_q sits above it.
    const int q = ls / 2 + 1;
    P = P.cwiseProduct(tr.psi[q - 1].transpose());
    Mat B = full_rank_solution(P, target);
    Layer& ly = layers[q - 1];
    ly.b = tr.a[q - 1] - B * tr.h[q - 1];
    ly.W = B;
  } else {
    // V_{ls+1} = W~_k; Psi_k sits below it.
    const int k = (ls + 1) / 2;
    target = target.cwiseQuotient(tr.psi[k - 1].transpose());
    Mat B = full_rank_solution(P, target);
    Layer& ly = layers[k - 1];
    ly.bt = tr.h[k] - B * tr.s[k - 1];
    ly.Wt = B;
  }
  return MLPNetwork(std::move(layers));
}

PersistenceResult persistence_check(
    const std::function<ScalarMap(const Vec&)>& factory, const Vec& w_star,
    const Vec& x_star, double eps, std::uint64_t seed, int trials) {
  PersistenceResult res;
  ScalarMap base = factory(w_star);
  CriticalPoint cp = annotate(base, x_star, 1e-6);
  if (cp.grad_norm > 1e-6)
    throw Error(ErrorKind::Precondition,
                "persistence_check: x* is not a critical point (|grad| = " +
                    std::to_string(cp.grad_norm) + ")");
  if (cp.regularity != Regularity::NonDegenerate)
    throw Error(ErrorKind::Precondition,
                "persistence_check: critical point is not non-degenerate");
  if (eps == 0.0) {
    res.ok = true;
    return res;
  }
  const int p = static_cast<int>(w_star.size());
  Mat D(base.n, p);
  for (int j = 0; j < p; ++j) {
    double h = 1e-6 * std::max(1.0, std::abs(w_star(j)));
    Vec wp = w_star, wm = w_star;
    wp(j) += h;
    wm(j) -= h;
    D.col(j) = (factory(wp).grad(x_star) - factory(wm).grad(x_star)) / (2 * h);
  }
  const double hinv = 1.0 / cp.eigenvalues.cwiseAbs().minCoeff();
  Eigen::JacobiSVD<Mat> svd(D);
  res.radius = 10.0 * eps * hinv * svd.singularValues()(0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  SearchConfig cfg;
  cfg.domain = Box{x_star.array() - 1.0, x_star.array() + 1.0};
  res.trials = trials;
  for (int t = 0; t < trials; ++t) {
    Vec dir(p);
    for (int j = 0; j < p; ++j) dir(j) = nd(rng);
    Vec w = w_star + eps * dir / dir.norm();
    ScalarMap m = factory(w);
    auto x = newton_solve(m, x_star, cfg);
    if (!x) continue;
    double shift = (*x - x_star).norm();
    res.max_shift = std::max(res.max_shift, shift);
    if (shift <= res.radius + 1e-12 &&
        annotate(m, *x, 1e-6).regularity == Regularity::NonDegenerate)
      ++res.succeeded;
  }
  res.ok = res.succeeded == trials;
  return res;
}

RankCondition morse_rank_condition(const MLPNetwork& net, const Vec& x) {
  Mat D = mixed_second_derivatives(net, x);
  RankCondition rc;
  rc.n = net.input_dim();
  rc.rank = D.cwiseAbs().maxCoeff() == 0.0 ? 0 : numerical_rank(D).rank;
  rc.satisfied = rc.rank == rc.n;
  return rc;
}

LowerBoundResult approximation_lower_bound_experiment(
    const ScalarMap& map, const Vec& y, double r, int samples,
    const std::optional<Box>& domain, std::uint64_t seed) {
  if (!(r > 0) || samples < 1 || y.size() != map.n)
    throw Error(ErrorKind::InvalidInput,
                "lower bound experiment: need r > 0, samples >= 1, dim(y) = n");
  if (domain) {
    if (domain->dim() != map.n ||
        !domain->contains(y.array() - r) || !domain->contains(y.array() + r))
      throw Error(ErrorKind::Precondition,
                  "lower bound experiment: closed ball K_r(y) not inside domain");
  }
  LowerBoundResult res;
  res.bound = r * r / 2;
  res.slack = r * r / 20;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  auto probe = [&](const Vec& x) {
    double dev = std::abs(map.value(x) - (x - y).squaredNorm());
    if (dev > res.measured || res.argmax.size() == 0) {
      res.measured = std::max(res.measured, dev);
      res.argmax = x;
    }
  };
  probe(y);
  for (int s = 1; s < samples; ++s) {
    Vec d(map.n);
    for (int i = 0; i < map.n; ++i) d(i) = nd(rng);
    d /= d.norm();
    double rad = (s % 2 == 0) ? r : r * std::pow(ud(rng), 1.0 / map.n);
    probe(y + rad * d);
  }
  res.holds = res.measured >= res.bound - res.slack;
  return res;
}

}  // namespace morsenet
