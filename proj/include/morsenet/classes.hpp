#pragma once

#include <optional>
#include <string>
#include <vector>

#include "morsenet/sampling.hpp"

namespace morsenet {

enum class MapClass { C1, C2, C3, Undetermined };
enum class Certification { TheoremCertified, SearchBased };
enum class Regularity { NonDegenerate, Degenerate, Indeterminate };

struct CriticalPoint {
  Vec x;
  double grad_norm = 0.0;
  Vec eigenvalues;  // ascending
  Regularity regularity = Regularity::Indeterminate;
  int morse_index = 0;
};

struct ClassReport {
  MapClass verdict = MapClass::Undetermined;
  Certification certification = Certification::SearchBased;
  std::vector<CriticalPoint> points;
  std::optional<Box> domain;
  std::vector<std::string> notes;
};

std::string to_string(MapClass c);
std::string to_string(Certification c);
std::string to_string(Regularity r);

}  // namespace morsenet
