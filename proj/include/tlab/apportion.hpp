#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tlab {

// Largest-remainder apportionment of `total` over non-negative weights.
// Remainder ties go to the lowest index. Sum of result == total.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

}  // namespace tlab
