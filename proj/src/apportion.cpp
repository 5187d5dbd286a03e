#include "tlab/apportion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tlab/error.hpp"

namespace tlab {

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  if (weights.empty()) throw ValidationError("apportion: no weights");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("apportion: negative weight");
    sum += w;
  }
  if (sum <= 0.0) throw ValidationError("apportion: weights sum to zero");

  std::vector<std::size_t> out(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % order.size()]];
  return out;
}

}  // namespace tlab
