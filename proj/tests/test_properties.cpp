#include "helpers.hpp"
#include "morsenet/verify.hpp"

using namespace morsenet;

TEST_CASE("property suite") {
  for (const auto& row : run_property_suite(42)) {
    CAPTURE(row.name);
    CAPTURE(row.detail);
    CHECK(row.passed);
  }
}
