#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "morsenet/mlp.hpp"
#include "morsenet/node.hpp"

namespace morsenet {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Property suite over randomized networks and flows; deterministic per seed.
std::vector<CheckResult> run_property_suite(std::uint64_t seed);

void print_table(const std::vector<CheckResult>& rows, std::ostream& out);

// Random net with a rank-one outer product planted in V_k.
MLPNetwork plant_rank_one(const MLPNetwork& net, int k, std::mt19937_64& rng);

// Non-augmented dims d_0 >= d_1 >= ... >= d_{2L} = 1 starting at width n.
std::vector<int> random_nonaugmented_dims(int n, int L, std::mt19937_64& rng);

// Random MLP field on R^m with small weights and a rank check on nothing.
std::shared_ptr<MLPField> random_mlp_field(int m, int hidden,
                                           std::mt19937_64& rng,
                                           double scale = 0.5);

}  // namespace morsenet
