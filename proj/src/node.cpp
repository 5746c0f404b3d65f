#include "morsenet/node.hpp"

#include <algorithm>
#include <cmath>

namespace morsenet {

Mat VectorField::jacobian(double t, const Vec& h) const {
  const int m = dim();
  Mat J(m, m);
  for (int j = 0; j < m; ++j) {
    double s = 1e-6 * std::max(1.0, std::abs(h(j)));
    Vec hp = h, hm = h;
    hp(j) += s;
    hm(j) -= s;
    J.col(j) = (eval(t, hp) - eval(t, hm)) / (2 * s);
  }
  return J;
}

AffineField::AffineField(Mat A, Vec c)
    : VectorField(static_cast<int>(A.rows())), A_(std::move(A)), c_(std::move(c)) {
  if (A_.rows() != A_.cols() || c_.size() != A_.rows())
    throw Error(ErrorKind::Shape, "affine field: A must be m x m and c length m");
}

Vec ExpShearField::eval(double, const Vec& h) const {
  return Vec{{0.0, std::exp(h(0))}};
}

Mat ExpShearField::jacobian(double, const Vec& h) const {
  Mat J = Mat::Zero(2, 2);
  J(1, 0) = std::exp(h(0));
  return J;
}

MLPField::MLPField(std::vector<MLPNetwork> nets)
    : VectorField(static_cast<int>(nets.size())), nets_(std::move(nets)) {
  if (nets_.empty()) throw Error(ErrorKind::InvalidInput, "mlp field: no components");
  for (size_t i = 0; i < nets_.size(); ++i)
    if (nets_[i].input_dim() != dim())
      throw Error(ErrorKind::Shape, "mlp field: component " + std::to_string(i + 1) +
                                        " must take " + std::to_string(dim()) +
                                        " inputs");
}

Vec MLPField::eval(double, const Vec& h) const {
  Vec f(dim());
  for (int i = 0; i < dim(); ++i) f(i) = forward(nets_[i], h);
  return f;
}

Mat MLPField::jacobian(double, const Vec& h) const {
  Mat J(dim(), dim());
  for (int i = 0; i < dim(); ++i) J.row(i) = gradient(nets_[i], h).transpose();
  return J;
}

EmbeddingField::EmbeddingField(ScalarMap target, int m, double T,
                               std::string name)
    : VectorField(m), target_(std::move(target)), T_(T), name_(std::move(name)) {
  if (target_.n >= m)
    throw Error(ErrorKind::Precondition,
                "embedding field: need m > n (m = " + std::to_string(m) +
                    ", n = " + std::to_string(target_.n) + ")");
  if (!(T > 0)) throw Error(ErrorKind::InvalidInput, "embedding field: T must be > 0");
}

Vec EmbeddingField::eval(double, const Vec& h) const {
  Vec f = Vec::Zero(dim());
  f(dim() - 1) = target_.value(h.head(target_.n)) / T_;
  return f;
}

Mat EmbeddingField::jacobian(double, const Vec& h) const {
  Mat J = Mat::Zero(dim(), dim());
  J.row(dim() - 1).head(target_.n) =
      target_.grad(h.head(target_.n)).transpose() / T_;
  return J;
}

LambdaField::LambdaField(int m, Fn f, Jac jac, std::vector<double> breakpoints)
    : VectorField(m), f_(std::move(f)), jac_(std::move(jac)), bps_(std::move(breakpoints)) {}

Mat LambdaField::jacobian(double t, const Vec& h) const {
  return jac_ ? jac_(t, h) : VectorField::jacobian(t, h);
}

void IntegratorConfig::validate() const {
  if (!(atol > 0) || !(rtol > 0) || max_steps < 1 || fixed_steps < 1 ||
      !(liouville_tol > 0))
    throw Error(ErrorKind::InvalidInput, "integrator config: all tolerances and "
                                         "step counts must be positive");
}

double FlowResult::liouville_residual() const {
  double e = std::exp(trace_integral);
  return std::abs(Y.determinant() - e) / e;
}

namespace {

using Rhs = std::function<Vec(double, const Vec&)>;

// Fehlberg 4(5) tableau.
constexpr double kC[6] = {0, 1.0 / 4, 3.0 / 8, 12.0 / 13, 1, 1.0 / 2};
constexpr double kA[6][5] = {
    {0, 0, 0, 0, 0},
    {1.0 / 4, 0, 0, 0, 0},
    {3.0 / 32, 9.0 / 32, 0, 0, 0},
    {1932.0 / 2197, -7200.0 / 2197, 7296.0 / 2197, 0, 0},
    {439.0 / 216, -8, 3680.0 / 513, -845.0 / 4104, 0},
    {-8.0 / 27, 2, -3544.0 / 2565, 1859.0 / 4104, -11.0 / 40}};
constexpr double kB5[6] = {16.0 / 135, 0, 6656.0 / 12825, 28561.0 / 56430,
                           -9.0 / 50, 2.0 / 55};
constexpr double kB4[6] = {25.0 / 216, 0, 1408.0 / 2565, 2197.0 / 4104,
                           -1.0 / 5, 0};

struct StepOut {
  Vec z;
  Vec err;
};

StepOut rkf_step(const Rhs& f, double t, const Vec& z, double h) {
  Vec k[6];
  for (int s = 0; s < 6; ++s) {
    Vec zs = z;
    for (int j = 0; j < s; ++j) zs += h * kA[s][j] * k[j];
    k[s] = f(t + kC[s] * h, zs);
  }
  StepOut o{z, Vec::Zero(z.size())};
  for (int s = 0; s < 6; ++s) {
    o.z += h * kB5[s] * k[s];
    o.err += h * (kB5[s] - kB4[s]) * k[s];
  }
  return o;
}

Vec rk4_step(const Rhs& f, double t, const Vec& z, double h) {
  Vec k1 = f(t, z);
  Vec k2 = f(t + h / 2, z + h / 2 * k1);
  Vec k3 = f(t + h / 2, z + h / 2 * k2);
  Vec k4 = f(t + h, z + h * k3);
  return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

struct RawFlow {
  Vec z;
  long steps = 0;
  double err = 0.0;
  std::vector<double> grid;
  std::vector<Vec> zs;
};

std::vector<double> segment_ends(const std::vector<double>& bps, double T) {
  std::vector<double> ends;
  for (double b : bps)
    if (b > 0 && b < T) ends.push_back(b);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  ends.push_back(T);
  return ends;
}

void fail(double t, const std::string& why) {
  throw Error(ErrorKind::Integration,
              "integration failed at t = " + std::to_string(t) + ": " + why);
}

RawFlow integrate(const Rhs& f, Vec z, double T, const IntegratorConfig& cfg,
                  const std::vector<double>& bps,
                  const std::vector<double>* grid) {
  RawFlow out;
  if (cfg.record_states) out.zs.push_back(z);
  auto accept = [&](double t) {
    out.grid.push_back(t);
    ++out.steps;
    if (cfg.record_states) out.zs.push_back(z);
  };

  if (grid || cfg.method == Method::RK4) {
    std::vector<double> times;
    if (grid) {
      times = *grid;
    } else {
      std::vector<double> ends = segment_ends(bps, T);
      double t0 = 0;
      for (double e : ends) {
        int k = std::max(1, static_cast<int>(std::ceil(cfg.fixed_steps * (e - t0) / T)));
        for (int i = 1; i <= k; ++i) times.push_back(i == k ? e : t0 + (e - t0) * i / k);
        t0 = e;
      }
    }
    double t = 0;
    for (double tn : times) {
      double h = tn - t;
      z = cfg.method == Method::RK4 ? rk4_step(f, t, z, h) : rkf_step(f, t, z, h).z;
      if (!z.allFinite()) fail(t, "non-finite state");
      t = tn;
      accept(t);
    }
    out.z = z;
    return out;
  }

  double t = 0;
  double h = T / 100;
  const double hmin = 1e-14 * std::max(1.0, T);
  for (double end : segment_ends(bps, T)) {
    while (t < end) {
      if (out.steps >= cfg.max_steps) fail(t, "step limit reached");
      double hh = std::min(h, end - t);
      bool last = hh >= end - t;
      StepOut s = rkf_step(f, t, z, hh);
      double en = 0.0;
      bool finite = s.z.allFinite() && s.err.allFinite();
      if (finite)
        for (Eigen::Index i = 0; i < z.size(); ++i)
          en = std::max(en, std::abs(s.err(i)) /
                                (cfg.atol + cfg.rtol * std::max(std::abs(z(i)),
                                                                std::abs(s.z(i)))));
      if (!finite) {
        h = hh * 0.25;
        if (h < hmin) fail(t, "non-finite state");
        continue;
      }
      double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (en <= 1.0) {
        z = s.z;
        t = last ? end : t + hh;
        out.err = std::max(out.err, en);
        accept(t);
        h = hh * factor;
      } else {
        h = hh * factor;
        if (h < hmin) fail(t, "step size underflow");
      }
    }
  }
  out.z = z;
  return out;
}

}  // namespace

FlowResult flow_with_jacobian(const VectorField& field, const Vec& a, double T,
                              const IntegratorConfig& cfg,
                              const std::vector<double>* grid) {
  cfg.validate();
  const int m = field.dim();
  if (a.size() != m)
    throw Error(ErrorKind::InvalidInput, "flow: initial value has dimension " +
                                             std::to_string(a.size()) +
                                             ", field has " + std::to_string(m));
  if (!(T > 0)) throw Error(ErrorKind::InvalidInput, "flow: T must be > 0");
  if (!a.allFinite()) throw Error(ErrorKind::InvalidInput, "flow: non-finite initial value");

  Rhs rhs = [&field, m](double t, const Vec& z) {
    Vec h = z.head(m);
    Mat J = field.jacobian(t, h);
    Eigen::Map<const Mat> Y(z.data() + m, m, m);
    Vec dz(z.size());
    dz.head(m) = field.eval(t, h);
    Eigen::Map<Mat>(dz.data() + m, m, m) = J * Y;
    dz(z.size() - 1) = J.trace();
    return dz;
  };
  Vec z0 = Vec::Zero(m + m * m + 1);
  z0.head(m) = a;
  Eigen::Map<Mat>(z0.data() + m, m, m).setIdentity();

  RawFlow raw = integrate(rhs, z0, T, cfg, field.breakpoints(), grid);
  FlowResult r;
  r.state = raw.z.head(m);
  r.Y = Eigen::Map<const Mat>(raw.z.data() + m, m, m);
  r.trace_integral = raw.z(raw.z.size() - 1);
  r.steps = raw.steps;
  r.error_estimate = raw.err;
  r.grid = std::move(raw.grid);
  for (const Vec& z : raw.zs) r.states.push_back(z.head(m));
  return r;
}

Vec flow_state(const VectorField& field, const Vec& a, double T,
               const IntegratorConfig& cfg) {
  cfg.validate();
  if (a.size() != field.dim())
    throw Error(ErrorKind::InvalidInput, "flow: dimension mismatch");
  Rhs rhs = [&field](double t, const Vec& h) { return field.eval(t, h); };
  return integrate(rhs, a, T, cfg, field.breakpoints(), nullptr).z;
}

void NeuralODE::validate() const {
  if (n < 1 || m < 1) throw Error(ErrorKind::InvalidInput, "node: n and m must be >= 1");
  if (W.rows() != m || W.cols() != n)
    throw Error(ErrorKind::Shape, "node: W must be " + std::to_string(m) + "x" +
                                      std::to_string(n));
  if (b.size() != m) throw Error(ErrorKind::Shape, "node: b must have length m");
  if (Wt.size() != m) throw Error(ErrorKind::Shape, "node: W_tilde must be 1 x m");
  if (!(T > 0)) throw Error(ErrorKind::InvalidInput, "node: T must be > 0");
  if (!field) throw Error(ErrorKind::InvalidInput, "node: missing field");
  if (field->dim() != m)
    throw Error(ErrorKind::Shape, "node: field dimension " +
                                      std::to_string(field->dim()) + " != m");
  if (!W.allFinite() || !b.allFinite() || !Wt.allFinite() || !std::isfinite(bt))
    throw Error(ErrorKind::InvalidInput, "node: non-finite weight");
}

namespace {

void check_x(const NeuralODE& node, const Vec& x) {
  if (x.size() != node.n)
    throw Error(ErrorKind::InvalidInput, "node: input has dimension " +
                                             std::to_string(x.size()) +
                                             ", expected " + std::to_string(node.n));
  if (!x.allFinite()) throw Error(ErrorKind::InvalidInput, "node: non-finite input");
}

}  // namespace

double node_forward(const NeuralODE& node, const Vec& x) {
  check_x(node, x);
  FlowResult r = flow_with_jacobian(*node.field, node.W * x + node.b, node.T, node.cfg);
  return node.Wt.dot(r.state) + node.bt;
}

Vec node_gradient(const NeuralODE& node, const Vec& x) {
  check_x(node, x);
  FlowResult r = flow_with_jacobian(*node.field, node.W * x + node.b, node.T, node.cfg);
  return node.W.transpose() * (r.Y.transpose() * node.Wt.transpose());
}

Mat node_hessian(const NeuralODE& node, const Vec& x) {
  check_x(node, x);
  const Vec a = node.W * x + node.b;
  FlowResult base = flow_with_jacobian(*node.field, a, node.T, node.cfg);
  const double s = std::max(1e-5, 1e-5 * a.norm());
  Mat He(node.m, node.m);
  for (int i = 0; i < node.m; ++i) {
    Vec ap = a, am = a;
    ap(i) += s;
    am(i) -= s;
    Mat Yp = flow_with_jacobian(*node.field, ap, node.T, node.cfg, &base.grid).Y;
    Mat Ym = flow_with_jacobian(*node.field, am, node.T, node.cfg, &base.grid).Y;
    He.col(i) = (Yp - Ym).transpose() * node.Wt.transpose() / (2 * s);
  }
  He = 0.5 * (He + He.transpose());
  return node.W.transpose() * He * node.W;
}

ScalarMap node_map(const NeuralODE& node) {
  node.validate();
  return {node.n, [node](const Vec& x) { return node_forward(node, x); },
          [node](const Vec& x) { return node_gradient(node, x); },
          [node](const Vec& x) { return node_hessian(node, x); },
          nullptr};
}

NodePartition classify_node(const NeuralODE& node) {
  node.validate();
  NodePartition p;
  p.rank_W = numerical_rank(node.W).rank;
  p.rank_Wt = node.Wt.cwiseAbs().maxCoeff() == 0.0 ? 0 : numerical_rank(node.Wt).rank;
  if (p.rank_W < std::min(node.m, node.n) || p.rank_Wt == 0)
    p.verdict = NodeVerdict::Degenerate;
  else
    p.verdict = node.n >= node.m ? NodeVerdict::NonAugmented : NodeVerdict::Augmented;
  return p;
}

std::string to_string(NodeVerdict v) {
  switch (v) {
    case NodeVerdict::NonAugmented: return "NonAugmented";
    case NodeVerdict::Augmented: return "Augmented";
    case NodeVerdict::Degenerate: return "Degenerate";
  }
  return "?";
}

ClassReport classify_node_map(const NeuralODE& node, const SearchConfig& cfg) {
  NodePartition p = classify_node(node);
  Hypothesis h = Hypothesis::None;
  if (p.rank_Wt == 0)
    h = Hypothesis::Constant;
  else if (p.verdict == NodeVerdict::NonAugmented)
    h = Hypothesis::NonAugmentedFullRank;
  else if (p.verdict == NodeVerdict::Degenerate)
    h = Hypothesis::DegenerateNode;
  return classify_map(node_map(node), h, cfg);
}

RowVec construct_node_critical_weights(const NeuralODE& node, const Vec& x) {
  NodePartition p = classify_node(node);
  if (p.verdict == NodeVerdict::NonAugmented)
    throw Error(ErrorKind::Unsupported,
                "construct_node_critical_weights: non-augmented node with full-rank "
                "weights has no critical points");
  check_x(node, x);
  FlowResult r = flow_with_jacobian(*node.field, node.W * x + node.b, node.T, node.cfg);
  auto v = left_null_row(r.Y * node.W);
  if (!v)
    throw Error(ErrorKind::Precondition,
                "construct_node_critical_weights: Y W has independent rows");
  return *v;
}

NeuralODE build_embedding_node(const ScalarMap& target, int n, int m, double T,
                               const std::string& name) {
  if (target.n != n)
    throw Error(ErrorKind::InvalidInput, "embedding: target dimension mismatch");
  if (m <= n)
    throw Error(ErrorKind::Precondition, "embedding: need m > n (m = " +
                                             std::to_string(m) + ", n = " +
                                             std::to_string(n) + ")");
  NeuralODE node;
  node.n = n;
  node.m = m;
  node.W = Mat::Zero(m, n);
  node.W.topRows(n).setIdentity();
  node.b = Vec::Zero(m);
  node.Wt = RowVec::Zero(m);
  node.Wt(m - 1) = 1.0;
  node.T = T;
  node.field = std::make_shared<EmbeddingField>(target, m, T, name);
  node.validate();
  return node;
}

PerturbationResult perturbation_bound_check(const NeuralODE& node,
                                            const VectorField& perturbed,
                                            double delta, const Box& domain,
                                            int samples, double slack) {
  node.validate();
  if (perturbed.dim() != node.m)
    throw Error(ErrorKind::Shape, "perturbation: field dimension mismatch");
  if (domain.dim() != node.n)
    throw Error(ErrorKind::InvalidInput, "perturbation: domain dimension mismatch");
  IntegratorConfig cfg = node.cfg;
  cfg.record_states = true;
  PerturbationResult res;
  auto gap_along = [&](const FlowResult& fr) {
    double g = 0.0;
    for (size_t k = 0; k < fr.states.size(); ++k) {
      double t = k == 0 ? 0.0 : fr.grid[k - 1];
      g = std::max(g, (node.field->eval(t, fr.states[k]) -
                       perturbed.eval(t, fr.states[k]))
                          .cwiseAbs()
                          .maxCoeff());
    }
    return g;
  };
  for (const Vec& x : quasi_random_points(domain, samples)) {
    Vec a = node.W * x + node.b;
    FlowResult f1 = flow_with_jacobian(*node.field, a, node.T, cfg);
    FlowResult f2 = flow_with_jacobian(perturbed, a, node.T, cfg);
    res.field_gap = std::max({res.field_gap, gap_along(f1), gap_along(f2)});
    res.output_gap =
        std::max(res.output_gap, std::abs(node.Wt.dot(f1.state - f2.state)));
  }
  const double wnorm = node.Wt.cwiseAbs().sum();
  res.bound = wnorm * node.T * res.field_gap;
  res.nominal_bound = wnorm * node.T * delta;
  res.holds = res.output_gap <= res.bound + slack;
  return res;
}

}  // namespace morsenet
