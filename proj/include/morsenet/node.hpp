#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "morsenet/classes.hpp"
#include "morsenet/mlp.hpp"
#include "morsenet/morse.hpp"

namespace morsenet {

class VectorField {
 public:
  explicit VectorField(int m) : m_(m) {}
  virtual ~VectorField() = default;

  int dim() const { return m_; }
  virtual Vec eval(double t, const Vec& h) const = 0;
  // Central differences unless overridden.
  virtual Mat jacobian(double t, const Vec& h) const;
  virtual std::string kind() const = 0;
  // Times in (0, T) where the field may jump; steps end exactly there.
  virtual std::vector<double> breakpoints() const { return {}; }

 private:
  int m_;
};

using FieldPtr = std::shared_ptr<const VectorField>;

// f(h) = A h + c
class AffineField : public VectorField {
 public:
  AffineField(Mat A, Vec c);
  Vec eval(double, const Vec& h) const override { return A_ * h + c_; }
  Mat jacobian(double, const Vec&) const override { return A_; }
  std::string kind() const override { return "affine"; }
  const Mat& A() const { return A_; }
  const Vec& c() const { return c_; }

 private:
  Mat A_;
  Vec c_;
};

// f(h) = (0, exp(h1)) on R^2
class ExpShearField : public VectorField {
 public:
  ExpShearField() : VectorField(2) {}
  Vec eval(double, const Vec& h) const override;
  Mat jacobian(double, const Vec& h) const override;
  std::string kind() const override { return "exp_shear"; }
};

// f(h) = scale * h
class IdentityField : public VectorField {
 public:
  IdentityField(int m, double scale = 1.0) : VectorField(m), scale_(scale) {}
  Vec eval(double, const Vec& h) const override { return scale_ * h; }
  Mat jacobian(double, const Vec&) const override {
    return scale_ * Mat::Identity(dim(), dim());
  }
  std::string kind() const override { return "identity"; }
  double scale() const { return scale_; }

 private:
  double scale_;
};

// Component i is the scalar network nets[i] applied to h.
class MLPField : public VectorField {
 public:
  explicit MLPField(std::vector<MLPNetwork> nets);
  Vec eval(double, const Vec& h) const override;
  Mat jacobian(double, const Vec& h) const override;
  std::string kind() const override { return "mlp"; }
  const std::vector<MLPNetwork>& nets() const { return nets_; }

 private:
  std::vector<MLPNetwork> nets_;
};

// f(h) = (0, ..., 0, target(h_1..h_n) / T) on R^m
class EmbeddingField : public VectorField {
 public:
  EmbeddingField(ScalarMap target, int m, double T, std::string name = "");
  Vec eval(double, const Vec& h) const override;
  Mat jacobian(double, const Vec& h) const override;
  std::string kind() const override { return "embedding"; }
  const std::string& target_name() const { return name_; }
  double T() const { return T_; }

 private:
  ScalarMap target_;
  double T_;
  std::string name_;
};

class LambdaField : public VectorField {
 public:
  using Fn = std::function<Vec(double, const Vec&)>;
  using Jac = std::function<Mat(double, const Vec&)>;
  LambdaField(int m, Fn f, Jac jac = nullptr,
              std::vector<double> breakpoints = {});
  Vec eval(double t, const Vec& h) const override { return f_(t, h); }
  Mat jacobian(double t, const Vec& h) const override;
  std::string kind() const override { return "lambda"; }
  std::vector<double> breakpoints() const override { return bps_; }

 private:
  Fn f_;
  Jac jac_;
  std::vector<double> bps_;
};

enum class Method { RKF45, RK4 };

struct IntegratorConfig {
  Method method = Method::RKF45;
  double atol = 1e-10;
  double rtol = 1e-9;
  long max_steps = 1000000;
  int fixed_steps = 1000;  // RK4 only
  double liouville_tol = 1e-6;
  bool record_states = false;

  void validate() const;
};

struct FlowResult {
  Vec state;  // h_a(T)
  Mat Y;      // d h_a(T) / d a
  double trace_integral = 0.0;
  long steps = 0;
  double error_estimate = 0.0;  // largest accepted local error norm
  std::vector<double> grid;     // accepted step end times, grid.back() = T
  std::vector<Vec> states;      // h at 0 and each grid time if recorded

  double liouville_residual() const;  // |det Y - e^tr| / e^tr
};

// Integrates state, variational matrix and trace integral jointly. With a
// grid the steps are taken exactly there (fifth-order stages, no control).
FlowResult flow_with_jacobian(const VectorField& field, const Vec& a, double T,
                              const IntegratorConfig& cfg = {},
                              const std::vector<double>* grid = nullptr);

// State only, for callers that do not need Y.
Vec flow_state(const VectorField& field, const Vec& a, double T,
               const IntegratorConfig& cfg = {});

struct NeuralODE {
  int n = 0, m = 0;
  Mat W;       // m x n
  Vec b;       // m
  RowVec Wt;   // 1 x m
  double bt = 0.0;
  double T = 1.0;
  FieldPtr field;
  IntegratorConfig cfg;

  void validate() const;
};

double node_forward(const NeuralODE& node, const Vec& x);
Vec node_gradient(const NeuralODE& node, const Vec& x);
Mat node_hessian(const NeuralODE& node, const Vec& x);
ScalarMap node_map(const NeuralODE& node);

enum class NodeVerdict { NonAugmented, Augmented, Degenerate };

struct NodePartition {
  NodeVerdict verdict = NodeVerdict::NonAugmented;
  int rank_W = 0;
  int rank_Wt = 0;
};

NodePartition classify_node(const NeuralODE& node);
std::string to_string(NodeVerdict v);

// Partition shortcuts, then critical-point search.
ClassReport classify_node_map(const NeuralODE& node, const SearchConfig& cfg);

// Nonzero W~ making x critical.
RowVec construct_node_critical_weights(const NeuralODE& node, const Vec& x);

NeuralODE build_embedding_node(const ScalarMap& target, int n, int m, double T,
                               const std::string& name = "");

struct PerturbationResult {
  double field_gap = 0.0;   // sup over sampled trajectories of |f - g|_inf
  double output_gap = 0.0;  // sup of |Phi - Phi_g|
  double bound = 0.0;       // |W~|_inf * T * field_gap
  double nominal_bound = 0.0;  // |W~|_inf * T * delta
  bool holds = false;
};

PerturbationResult perturbation_bound_check(const NeuralODE& node,
                                            const VectorField& perturbed,
                                            double delta, const Box& domain,
                                            int samples = 50,
                                            double slack = 1e-7);

}  // namespace morsenet
