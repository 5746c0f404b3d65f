#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "morsenet/classes.hpp"
#include "morsenet/mlp.hpp"

namespace morsenet {

// Anything with a value, gradient and Hessian on R^n.
struct ScalarMap {
  int n = 0;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
  // Rounding level of |grad| at x; optional.
  std::function<double(const Vec&)> grad_noise;
};

ScalarMap mlp_map(const MLPNetwork& net);

// Largest relative mismatch between grad and central differences of value
// over the given points.
double gradient_fd_mismatch(const ScalarMap& map, const std::vector<Vec>& xs,
                            double h = 1e-6);

struct SearchConfig {
  Box domain;
  int starts = 64;
  double tol = 1e-10;          // gradient norm
  int max_iter = 100;
  double dedupe_radius = 1e-6;
  double degeneracy = 1e-6;    // relative eigenvalue threshold
  std::uint64_t seed = 0;

  void validate() const;
  static SearchConfig on_box(const Box& b) {
    SearchConfig c;
    c.domain = b;
    return c;
  }
};

// Hessian spectrum and regularity at x.
CriticalPoint annotate(const ScalarMap& map, const Vec& x, double degeneracy);

// Damped Newton from one start; nullopt if it fails or leaves the domain.
std::optional<Vec> newton_solve(const ScalarMap& map, const Vec& x0,
                                const SearchConfig& cfg);

std::vector<CriticalPoint> find_critical_points(const ScalarMap& map,
                                                const SearchConfig& cfg);

// Theorem-level facts the caller has verified for the map.
enum class Hypothesis {
  None,
  NonAugmentedFullRank,  // no critical points anywhere
  BottleneckCaseA,       // Z nonzero on samples
  BottleneckCaseB,       // zero of Z found
  DegenerateNode,        // rank(W) < min(m, n)
  Constant,
};

ClassReport classify_map(const ScalarMap& map, Hypothesis h,
                         const SearchConfig& cfg);

struct BottleneckAnalysis {
  char label = '?';  // 'a'..'d'
  BottleneckFlavor flavor = BottleneckFlavor::NonAugmentedPrefix;
  int z_index = -1;  // j* for the non-augmented prefix, i* otherwise
  bool sample_based = true;
  double min_sampled_z = 0.0;  // min over samples of |Z|^2
  std::vector<Vec> witnesses;  // zeros of Z
};

BottleneckAnalysis bottleneck_case_analysis(const MLPNetwork& net,
                                            const SearchConfig& cfg);

// Local minimiser of |r(x)|^2 by Levenberg-Marquardt with difference Jacobian.
Vec levenberg_marquardt(const std::function<Vec(const Vec&)>& r, Vec x,
                        int max_iter = 200);

// Normal form, architecture and theorem shortcuts, then search.
struct MlpClassification {
  ArchitectureReport original_arch;
  ArchitectureReport reduced_arch;
  std::optional<BottleneckAnalysis> bottleneck;
  int n_bar = 0;
  ClassReport reduced;
  ClassReport report;  // for the original network
};
MlpClassification classify_mlp(const MLPNetwork& net, const SearchConfig& cfg);

// Weights with the same architecture and activations as base such that the
// gradient vanishes at x.
MLPNetwork construct_critical_weights(const MLPNetwork& base, const Vec& x);

struct PersistenceResult {
  bool ok = false;
  int trials = 0;
  int succeeded = 0;
  double radius = 0.0;     // allowed displacement
  double max_shift = 0.0;  // observed displacement
};

// factory(w) builds the map for weight vector w.
PersistenceResult persistence_check(
    const std::function<ScalarMap(const Vec&)>& factory, const Vec& w_star,
    const Vec& x_star, double eps, std::uint64_t seed = 1, int trials = 20);

struct RankCondition {
  int rank = 0;
  int n = 0;
  bool satisfied = false;
};
RankCondition morse_rank_condition(const MLPNetwork& net, const Vec& x);

struct LowerBoundResult {
  double measured = 0.0;
  double bound = 0.0;  // r^2 / 2
  double slack = 0.0;  // r^2 / 20
  bool holds = false;
  Vec argmax;
};

LowerBoundResult approximation_lower_bound_experiment(
    const ScalarMap& map, const Vec& y, double r, int samples,
    const std::optional<Box>& domain = std::nullopt, std::uint64_t seed = 7);

}  // namespace morsenet
