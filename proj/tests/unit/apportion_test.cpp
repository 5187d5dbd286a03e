#include <doctest.h>

#include <numeric>

#include "tlab/apportion.hpp"

using tlab::apportion;

TEST_SUITE("apportion") {
  TEST_CASE("equal weights give the remainder to the lowest indices") {
    const std::vector<double> w(3, 1.0);
    CHECK(apportion(10, w) == std::vector<std::size_t>{4, 3, 3});
  }

  TEST_CASE("proportional weights are reproduced exactly when integral") {
    const std::vector<double> w = {30, 20, 50};
    CHECK(apportion(100, w) == std::vector<std::size_t>{30, 20, 50});
  }

  TEST_CASE("sum is preserved") {
    const std::vector<double> w = {0.1, 0.7, 0.2, 0.0, 3.3};
    for (std::size_t total : {0u, 1u, 7u, 999u}) {
      const auto q = apportion(total, w);
      CHECK(std::accumulate(q.begin(), q.end(), std::size_t{0}) == total);
      CHECK(q[3] == 0);
    }
  }
}
