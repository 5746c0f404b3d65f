#pragma once

#include <optional>
#include <string>
#include <vector>

#include "morsenet/linalg.hpp"

namespace morsenet {

enum class ActivationKind { Softplus, Tanh, Sigmoid, Identity };

struct Activation {
  ActivationKind kind = ActivationKind::Softplus;

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  std::string name() const;
  static Activation parse(const std::string& name);  // throws Schema
};

struct Layer {
  Mat W;   // m_l x n_{l-1}
  Vec b;   // m_l
  Mat Wt;  // n_l x m_l
  Vec bt;  // n_l
  std::vector<Activation> act;  // m_l entries
};

struct EvalTrace {
  std::vector<Vec> h;     // h[0] = x, h[l] for l = 1..L
  std::vector<Vec> a;     // a[l-1] = pre-activation of layer l
  std::vector<Vec> s;     // sigma_l(a_l)
  std::vector<Vec> psi;   // sigma_l'(a_l)
  std::vector<Vec> psi2;  // sigma_l''(a_l)
};

class MLPNetwork {
 public:
  explicit MLPNetwork(std::vector<Layer> layers);

  int depth() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return static_cast<int>(layers_[0].W.cols()); }
  const Layer& layer(int l) const { return layers_.at(l - 1); }  // 1-based
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<int> dims() const;  // d_0 .. d_{2L}
  int parameter_count() const;
  int node_count() const;  // sum of all hidden widths

  // V_k for k = 1..2L: odd -> W_{(k+1)/2}, even -> W~_{k/2}.
  const Mat& V(int k) const;

 private:
  std::vector<Layer> layers_;
};

// Convenience constructor with one activation for every component.
MLPNetwork make_mlp(const std::vector<Mat>& W, const std::vector<Vec>& b,
                    const std::vector<Mat>& Wt, const std::vector<Vec>& bt,
                    ActivationKind act = ActivationKind::Softplus);

// Random network with standard normal weights and given dims d_0..d_{2L}.
template <class Rng>
MLPNetwork random_mlp(const std::vector<int>& dims, Rng& rng,
                      ActivationKind act = ActivationKind::Softplus,
                      double bias_scale = 0.5);

EvalTrace trace(const MLPNetwork& net, const Vec& x);
double forward(const MLPNetwork& net, const Vec& x);
Vec gradient(const MLPNetwork& net, const Vec& x);
Vec gradient(const MLPNetwork& net, const EvalTrace& tr);
Mat hessian(const MLPNetwork& net, const Vec& x);

// n x p, columns ordered vec(W1), vec(W~1), ..., vec(W~L), b1, b~1, ..., b~L
// with column-major vec.
Mat mixed_second_derivatives(const MLPNetwork& net, const Vec& x);
Vec parameters(const MLPNetwork& net);
MLPNetwork with_parameters(const MLPNetwork& net, const Vec& p);

// Z_l(x) for l in 1..2L-1 and its complement Y_l(x) with grad^T = Z_l Y_l.
RowVec z_product(const MLPNetwork& net, const Vec& x, int l);
Mat y_product(const MLPNetwork& net, const Vec& x, int l);

enum class ArchVerdict { NonAugmented, Augmented, Bottleneck };
enum class BottleneckFlavor { NonAugmentedPrefix, AugmentedPrefix };

struct ArchitectureReport {
  ArchVerdict verdict = ArchVerdict::NonAugmented;
  std::vector<int> dims;
  int l_star = -1;  // max J_<; first maximal-width layer when Augmented
  // Witness triple of the last bottleneck (i*, j*, l*) when Bottleneck.
  int i_star = -1, j_star = -1;
  // First bottleneck data used by the four-case analysis.
  std::optional<BottleneckFlavor> flavor;
  int first_j = -1;  // layer of the first bottleneck
  int prefix = -1;   // j* (non-augmented prefix) or i* (augmented prefix)
};

ArchitectureReport classify_architecture(const std::vector<int>& dims);
ArchitectureReport classify_architecture(const MLPNetwork& net);
std::string to_string(ArchVerdict v);
std::string to_string(BottleneckFlavor f);

}  // namespace morsenet

#include "morsenet/mlp_random.tpp"
