#pragma once

#include <optional>
#include <vector>

#include "morsenet/classes.hpp"
#include "morsenet/mlp.hpp"

namespace morsenet {

enum class StepKind { InputCoordChange, InnerReduction, OuterReduction, ConstantCollapse };

struct ReductionStep {
  StepKind kind = StepKind::InputCoordChange;
  int layer = 0;    // 0 for input, l for W_{l+1} / W~_l reductions
  int removed = -1; // 0-based index of the deleted column or row
  Vec alpha;        // coefficients of the kept indices, original order
  std::vector<int> dims;
};

struct NormalFormResult {
  MLPNetwork reduced;
  Mat coord_change;  // n_bar x n
  std::vector<ReductionStep> steps;
  std::optional<double> constant_value;
};

// Drop one node of h_l using a column dependence of W_{l+1}.
MLPNetwork reduce_inner(const MLPNetwork& net, int l,
                        ReductionStep* step = nullptr);
// Drop one node of h_l using a row dependence of W~_l.
MLPNetwork reduce_outer(const MLPNetwork& net, int l,
                        ReductionStep* step = nullptr);

struct InputReduction {
  MLPNetwork net;
  Mat A;
  std::vector<ReductionStep> steps;
};
InputReduction input_coordinate_reduction(const MLPNetwork& net);

NormalFormResult normalize(const MLPNetwork& net);

// max |Phi(x) - Phi_bar(A x)| over quasi-random points of the box.
double verify_equivalence(const MLPNetwork& original,
                          const NormalFormResult& result, const Box& domain,
                          int samples = 1000);

ClassReport class_under_coordinate_change(const ClassReport& reduced,
                                          int n_bar, int n);

std::string to_string(StepKind k);

}  // namespace morsenet
