#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace netdiff {

using Rng = std::mt19937_64;
using BinaryVector = std::vector<int>;

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based child seed: a pure function of the master seed and an
/// ordered list of keys. Distinct key tuples give unrelated streams, so work
/// items can be seeded independently of execution order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

/// Stable 64-bit key for a real-valued grid coordinate (e.g. a rho value).
std::uint64_t key_of(double value);

/// Standard normal CDF and its inverse.
double normal_cdf(double z);
double normal_quantile(double p);

/// Logistic CDF 1 / (1 + e^-x), evaluated without overflow.
double logistic(double x);

}  // namespace netdiff
