#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace pidon {

/// Closed interval; lo == hi denotes a fixed value.
struct Range {
  double lo{0.0};
  double hi{0.0};

  bool fixed() const { return lo == hi; }
  bool operator==(const Range&) const = default;
};

/// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& rng);

/// Latin hypercube sample: row i is one point. For every dimension each of the
/// n equal-width strata holds exactly one point, the offset inside the stratum
/// is uniform and the stratum permutations are independent across dimensions.
/// Fixed ranges (lo == hi) yield that value exactly. Throws EmptyRange when
/// lo > hi and InvalidArgument when n == 0.
Eigen::MatrixXd lhs_sample(std::span<const Range> ranges, std::size_t n, std::uint64_t seed);

}  // namespace pidon
