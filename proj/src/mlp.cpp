#include "morsenet/mlp.hpp"

#include <cmath>
#include <string>

namespace morsenet {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::string layer_name(const char* sym, int l) {
  return std::string(sym) + std::to_string(l);
}

}  // namespace

double Activation::value(double x) const {
  switch (kind) {
    case ActivationKind::Softplus:
      return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case ActivationKind::Tanh: return std::tanh(x);
    case ActivationKind::Sigmoid: return sigmoid(x);
    case ActivationKind::Identity: return x;
  }
  return x;
}

double Activation::d1(double x) const {
  switch (kind) {
    case ActivationKind::Softplus: return sigmoid(x);
    case ActivationKind::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::Sigmoid: {
      double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case ActivationKind::Identity: return 1.0;
  }
  return 1.0;
}

double Activation::d2(double x) const {
  switch (kind) {
    case ActivationKind::Softplus: {
      double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
    case ActivationKind::Sigmoid: {
      double s = sigmoid(x);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case ActivationKind::Identity: return 0.0;
  }
  return 0.0;
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::Softplus: return "softplus";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Identity: return "identity";
  }
  return "?";
}

Activation Activation::parse(const std::string& name) {
  if (name == "softplus") return {ActivationKind::Softplus};
  if (name == "tanh") return {ActivationKind::Tanh};
  if (name == "sigmoid") return {ActivationKind::Sigmoid};
  if (name == "identity") return {ActivationKind::Identity};
  throw Error(ErrorKind::Schema, "unknown activation \"" + name + "\"");
}

MLPNetwork::MLPNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty())
    throw Error(ErrorKind::InvalidInput, "network needs at least one layer");
  Eigen::Index prev = layers_[0].W.cols();
  if (prev < 1) throw Error(ErrorKind::InvalidInput, "input width must be >= 1");
  for (size_t k = 0; k < layers_.size(); ++k) {
    const Layer& ly = layers_[k];
    int l = static_cast<int>(k) + 1;
    Eigen::Index m = ly.W.rows(), nl = ly.Wt.rows();
    if (m < 1 || nl < 1)
      throw Error(ErrorKind::InvalidInput,
                  "empty layer at " + layer_name("W", l));
    if (ly.W.cols() != prev)
      throw Error(ErrorKind::Shape, layer_name("W", l) + " has " +
                                        std::to_string(ly.W.cols()) +
                                        " columns, expected " +
                                        std::to_string(prev));
    if (ly.b.size() != m)
      throw Error(ErrorKind::Shape, layer_name("b", l) + " length mismatch");
    if (ly.Wt.cols() != m)
      throw Error(ErrorKind::Shape, layer_name("W_tilde", l) + " has " +
                                        std::to_string(ly.Wt.cols()) +
                                        " columns, expected " +
                                        std::to_string(m));
    if (ly.bt.size() != nl)
      throw Error(ErrorKind::Shape,
                  layer_name("b_tilde", l) + " length mismatch");
    if (static_cast<Eigen::Index>(ly.act.size()) != m)
      throw Error(ErrorKind::Shape,
                  "activation count mismatch in layer " + std::to_string(l));
    if (!ly.W.allFinite() || !ly.Wt.allFinite() || !ly.b.allFinite() ||
        !ly.bt.allFinite())
      throw Error(ErrorKind::InvalidInput,
                  "non-finite weight in layer " + std::to_string(l));
    prev = nl;
  }
  if (prev != 1)
    throw Error(ErrorKind::Shape, "output width must be 1");
}

std::vector<int> MLPNetwork::dims() const {
  std::vector<int> d{input_dim()};
  for (const auto& ly : layers_) {
    d.push_back(static_cast<int>(ly.W.rows()));
    d.push_back(static_cast<int>(ly.Wt.rows()));
  }
  return d;
}

int MLPNetwork::parameter_count() const {
  int p = 0;
  for (const auto& ly : layers_)
    p += static_cast<int>(ly.W.size() + ly.Wt.size() + ly.b.size() +
                          ly.bt.size());
  return p;
}

int MLPNetwork::node_count() const {
  int c = 0;
  for (const auto& ly : layers_) c += static_cast<int>(ly.W.rows() + ly.Wt.rows());
  return c;
}

const Mat& MLPNetwork::V(int k) const {
  if (k < 1 || k > 2 * depth())
    throw Error(ErrorKind::InvalidInput, "V index out of range");
  const Layer& ly = layers_[(k - 1) / 2];
  return (k % 2 == 1) ? ly.W : ly.Wt;
}

MLPNetwork make_mlp(const std::vector<Mat>& W, const std::vector<Vec>& b,
                    const std::vector<Mat>& Wt, const std::vector<Vec>& bt,
                    ActivationKind act) {
  if (W.size() != b.size() || W.size() != Wt.size() || W.size() != bt.size())
    throw Error(ErrorKind::InvalidInput, "make_mlp: layer count mismatch");
  std::vector<Layer> layers;
  for (size_t k = 0; k < W.size(); ++k)
    layers.push_back(
        Layer{W[k], b[k], Wt[k], bt[k],
              std::vector<Activation>(W[k].rows(), Activation{act})});
  return MLPNetwork(std::move(layers));
}

EvalTrace trace(const MLPNetwork& net, const Vec& x) {
  if (x.size() != net.input_dim())
    throw Error(ErrorKind::InvalidInput,
                "input has dimension " + std::to_string(x.size()) +
                    ", network expects " + std::to_string(net.input_dim()));
  if (!x.allFinite()) throw Error(ErrorKind::InvalidInput, "non-finite input");
  EvalTrace tr;
  tr.h.push_back(x);
  for (const auto& ly : net.layers()) {
    Vec a = ly.W * tr.h.back() + ly.b;
    Eigen::Index m = a.size();
    Vec s(m), p(m), p2(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      s(i) = ly.act[i].value(a(i));
      p(i) = ly.act[i].d1(a(i));
      p2(i) = ly.act[i].d2(a(i));
    }
    tr.h.push_back(ly.Wt * s + ly.bt);
    tr.a.push_back(std::move(a));
    tr.s.push_back(std::move(s));
    tr.psi.push_back(std::move(p));
    tr.psi2.push_back(std::move(p2));
  }
  return tr;
}

double forward(const MLPNetwork& net, const Vec& x) {
  return trace(net, x).h.back()(0);
}

Vec gradient(const MLPNetwork& net, const EvalTrace& tr) {
  RowVec g = RowVec::Ones(1);
  for (int k = net.depth() - 1; k >= 0; --k) {
    const Layer& ly = net.layers()[k];
    g = (g * ly.Wt).cwiseProduct(tr.psi[k].transpose()) * ly.W;
  }
  return g.transpose();
}

Vec gradient(const MLPNetwork& net, const Vec& x) {
  return gradient(net, trace(net, x));
}

namespace {

// J[k] = d a_k / dx, K[k] = d h_k / dx, 0-based layers.
void input_jacobians(const MLPNetwork& net, const EvalTrace& tr,
                     std::vector<Mat>& J, std::vector<Mat>& K) {
  const int L = net.depth();
  J.resize(L);
  K.resize(L);
  Mat prev = Mat::Identity(net.input_dim(), net.input_dim());
  for (int k = 0; k < L; ++k) {
    const Layer& ly = net.layers()[k];
    J[k] = ly.W * prev;
    K[k] = ly.Wt * (tr.psi[k].asDiagonal() * J[k]);
    prev = K[k];
  }
}

}  // namespace

Mat hessian(const MLPNetwork& net, const Vec& x) {
  EvalTrace tr = trace(net, x);
  std::vector<Mat> J, K;
  input_jacobians(net, tr, J, K);
  const int L = net.depth();
  const int n = net.input_dim();
  Mat H = Mat::Zero(n, n);
  // z = dPhi / d sigma_k(a_k), propagated from the output.
  RowVec z = net.layers()[L - 1].Wt;
  for (int k = L - 1; k >= 0; --k) {
    const Layer& ly = net.layers()[k];
    Vec w = tr.psi2[k].cwiseProduct(z.transpose());
    H += J[k].transpose() * w.asDiagonal() * J[k];
    if (k > 0) {
      RowVec dh = z.cwiseProduct(tr.psi[k].transpose()) * ly.W;  // dPhi/dh_{k-1}
      z = dh * net.layers()[k - 1].Wt;
    }
  }
  return 0.5 * (H + H.transpose());
}

namespace {

struct Tangent {
  Vec adot;  // d a_q
  Mat Jdot;  // d J_q
  Vec hdot_extra;
  Mat Kdot_extra;
};

Vec propagate_tangent(const MLPNetwork& net, const EvalTrace& tr,
                      const std::vector<Mat>& J, int q, const Tangent& t) {
  const int L = net.depth();
  const Layer& lq = net.layers()[q];
  Vec adot = t.adot;
  Mat Jdot = t.Jdot;
  Vec hdot = lq.Wt * tr.psi[q].cwiseProduct(adot) + t.hdot_extra;
  Mat Kdot = lq.Wt * ((tr.psi2[q].cwiseProduct(adot)).asDiagonal() * J[q]) +
             lq.Wt * (tr.psi[q].asDiagonal() * Jdot) + t.Kdot_extra;
  for (int k = q + 1; k < L; ++k) {
    const Layer& ly = net.layers()[k];
    adot = ly.W * hdot;
    Jdot = ly.W * Kdot;
    hdot = ly.Wt * tr.psi[k].cwiseProduct(adot);
    Kdot = ly.Wt * ((tr.psi2[k].cwiseProduct(adot)).asDiagonal() * J[k]) +
           ly.Wt * (tr.psi[k].asDiagonal() * Jdot);
  }
  return Kdot.transpose();
}

}  // namespace

Mat mixed_second_derivatives(const MLPNetwork& net, const Vec& x) {
  EvalTrace tr = trace(net, x);
  std::vector<Mat> J, K;
  input_jacobians(net, tr, J, K);
  const int L = net.depth();
  const int n = net.input_dim();
  Mat D(n, net.parameter_count());
  int col = 0;
  auto zeros = [&](int q) {
    const Layer& ly = net.layers()[q];
    Tangent t;
    t.adot = Vec::Zero(ly.W.rows());
    t.Jdot = Mat::Zero(ly.W.rows(), n);
    t.hdot_extra = Vec::Zero(ly.Wt.rows());
    t.Kdot_extra = Mat::Zero(ly.Wt.rows(), n);
    return t;
  };
  for (int q = 0; q < L; ++q) {
    const Layer& ly = net.layers()[q];
    const Mat Kin = q == 0 ? Mat::Identity(n, n) : K[q - 1];
    for (Eigen::Index j = 0; j < ly.W.cols(); ++j)
      for (Eigen::Index i = 0; i < ly.W.rows(); ++i) {
        Tangent t = zeros(q);
        t.adot(i) = tr.h[q](j);
        t.Jdot.row(i) = Kin.row(j);
        D.col(col++) = propagate_tangent(net, tr, J, q, t);
      }
    for (Eigen::Index j = 0; j < ly.Wt.cols(); ++j)
      for (Eigen::Index i = 0; i < ly.Wt.rows(); ++i) {
        Tangent t = zeros(q);
        t.hdot_extra(i) = tr.s[q](j);
        t.Kdot_extra.row(i) = tr.psi[q](j) * J[q].row(j);
        D.col(col++) = propagate_tangent(net, tr, J, q, t);
      }
  }
  for (int q = 0; q < L; ++q) {
    const Layer& ly = net.layers()[q];
    for (Eigen::Index i = 0; i < ly.b.size(); ++i) {
      Tangent t = zeros(q);
      t.adot(i) = 1.0;
      D.col(col++) = propagate_tangent(net, tr, J, q, t);
    }
    // h_q enters later layers only; the derivative of K_q is zero.
    for (Eigen::Index i = 0; i < ly.bt.size(); ++i) {
      Tangent t = zeros(q);
      t.hdot_extra(i) = 1.0;
      D.col(col++) = propagate_tangent(net, tr, J, q, t);
    }
  }
  return D;
}

Vec parameters(const MLPNetwork& net) {
  Vec p(net.parameter_count());
  int k = 0;
  for (const auto& ly : net.layers()) {
    for (Eigen::Index c = 0; c < ly.W.cols(); ++c)
      for (Eigen::Index r = 0; r < ly.W.rows(); ++r) p(k++) = ly.W(r, c);
    for (Eigen::Index c = 0; c < ly.Wt.cols(); ++c)
      for (Eigen::Index r = 0; r < ly.Wt.rows(); ++r) p(k++) = ly.Wt(r, c);
  }
  for (const auto& ly : net.layers()) {
    for (Eigen::Index i = 0; i < ly.b.size(); ++i) p(k++) = ly.b(i);
    for (Eigen::Index i = 0; i < ly.bt.size(); ++i) p(k++) = ly.bt(i);
  }
  return p;
}

MLPNetwork with_parameters(const MLPNetwork& net, const Vec& p) {
  if (p.size() != net.parameter_count())
    throw Error(ErrorKind::InvalidInput, "parameter vector length mismatch");
  std::vector<Layer> layers = net.layers();
  int k = 0;
  for (auto& ly : layers) {
    for (Eigen::Index c = 0; c < ly.W.cols(); ++c)
      for (Eigen::Index r = 0; r < ly.W.rows(); ++r) ly.W(r, c) = p(k++);
    for (Eigen::Index c = 0; c < ly.Wt.cols(); ++c)
      for (Eigen::Index r = 0; r < ly.Wt.rows(); ++r) ly.Wt(r, c) = p(k++);
  }
  for (auto& ly : layers) {
    for (Eigen::Index i = 0; i < ly.b.size(); ++i) ly.b(i) = p(k++);
    for (Eigen::Index i = 0; i < ly.bt.size(); ++i) ly.bt(i) = p(k++);
  }
  return MLPNetwork(std::move(layers));
}

RowVec z_product(const MLPNetwork& net, const Vec& x, int l) {
  const int L = net.depth();
  if (l < 1 || l > 2 * L - 1)
    throw Error(ErrorKind::InvalidInput,
                "z_product: index " + std::to_string(l) + " outside 1.." +
                    std::to_string(2 * L - 1));
  EvalTrace tr = trace(net, x);
  RowVec z = RowVec::Ones(1);
  for (int v = 2 * L; v >= l + 1; --v) {
    if (v % 2 == 1) z = z.cwiseProduct(tr.psi[(v - 1) / 2].transpose());
    z = z * net.V(v);
  }
  return z;
}

Mat y_product(const MLPNetwork& net, const Vec& x, int l) {
  const int L = net.depth();
  if (l < 1 || l > 2 * L - 1)
    throw Error(ErrorKind::InvalidInput, "y_product: index out of range");
  EvalTrace tr = trace(net, x);
  Mat y = Mat::Identity(net.input_dim(), net.input_dim());
  for (int v = 1; v <= l; ++v) {
    y = net.V(v) * y;
    if (v % 2 == 1) y = tr.psi[(v - 1) / 2].asDiagonal() * y;
  }
  return y;
}

ArchitectureReport classify_architecture(const std::vector<int>& d) {
  if (d.size() < 3 || d.size() % 2 == 0)
    throw Error(ErrorKind::InvalidInput, "dims must have odd length >= 3");
  ArchitectureReport r;
  r.dims = d;
  const int top = static_cast<int>(d.size()) - 1;  // 2L
  int lstar = -1;
  for (int j = 1; j <= top; ++j)
    if (d[j - 1] < d[j]) lstar = j;
  if (lstar < 0) {
    r.verdict = ArchVerdict::NonAugmented;
    return r;
  }
  r.l_star = lstar;
  int jstar = -1;
  for (int j = 1; j <= lstar; ++j)
    if (d[j - 1] > d[j]) jstar = j;
  if (jstar < 0) {
    r.verdict = ArchVerdict::Augmented;
    return r;
  }
  r.verdict = ArchVerdict::Bottleneck;
  r.j_star = jstar;
  r.i_star = jstar - 1;

  // First bottleneck: follow the initial monotone runs.
  int k = 1;
  while (k <= top && d[k] == d[0]) ++k;
  auto descend = [&](int from) {
    int best = from;
    for (int j = from + 1; j <= top && d[j] <= d[j - 1]; ++j)
      if (d[j] < d[best]) best = j;
    return best;
  };
  if (d[k] < d[0]) {
    r.flavor = BottleneckFlavor::NonAugmentedPrefix;
    r.first_j = descend(0);
    r.prefix = r.first_j;
  } else {
    r.flavor = BottleneckFlavor::AugmentedPrefix;
    int peak = 0;
    int j = 1;
    for (; j <= top && d[j] >= d[j - 1]; ++j)
      if (d[j] > d[peak]) peak = j;
    r.prefix = peak;
    r.first_j = descend(peak);
  }
  return r;
}

ArchitectureReport classify_architecture(const MLPNetwork& net) {
  return classify_architecture(net.dims());
}

std::string to_string(ArchVerdict v) {
  switch (v) {
    case ArchVerdict::NonAugmented: return "NonAugmented";
    case ArchVerdict::Augmented: return "Augmented";
    case ArchVerdict::Bottleneck: return "Bottleneck";
  }
  return "?";
}

std::string to_string(BottleneckFlavor f) {
  return f == BottleneckFlavor::NonAugmentedPrefix ? "NonAugmentedPrefix"
                                                    : "AugmentedPrefix";
}

}  // namespace morsenet
