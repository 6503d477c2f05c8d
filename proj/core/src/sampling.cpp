#include "pidon/sampling.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "pidon/errors.hpp"

namespace pidon {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::MatrixXd lhs_sample(std::span<const Range> ranges, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("lhs_sample requires n >= 1");
  for (std::size_t d = 0; d < ranges.size(); ++d) {
    if (!(ranges[d].lo <= ranges[d].hi)) {
      throw EmptyRange("range of dimension " + std::to_string(d) + " is empty (lo > hi)");
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ranges.size()));
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < ranges.size(); ++d) {
    std::mt19937_64 rng(mix_seed(seed, d));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Fisher-Yates with an explicit draw so results do not depend on the standard library.
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
    const Range r = ranges[d];
    for (std::size_t i = 0; i < n; ++i) {
      double v = r.lo;
      if (!r.fixed()) {
        const double u = (static_cast<double>(perm[i]) + uniform01(rng)) / static_cast<double>(n);
        v = std::min(r.lo + (r.hi - r.lo) * u, r.hi);
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v;
    }
  }
  return out;
}

}  // namespace pidon
