#include <doctest.h>

#include "oracles.hpp"

using namespace hmtm;

TEST_CASE("randomized invariants hold") {
  for (const auto& c : oracle::invariant_suite(20261018, 1000)) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.pass);
  }
}
