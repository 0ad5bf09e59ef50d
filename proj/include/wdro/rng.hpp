#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace wdro {

/// Derives a consumer-specific seed from one master seed and a stable label.
/// Every random consumer in the library (parameter init, batch shuffling,
/// generators, masking, Monte Carlo shards) draws its seed through this, so a
/// single master seed reproduces a whole experiment component-wise.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  // FNV-1a over the label bytes, mixed with the master via splitmix64.
  std::uint64_t h = 14695981039346656037ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::string_view label) {
  return Rng(derive_seed(master, label));
}

/// Multinomial counts via sequential binomial splitting; O(M) per call
/// regardless of n.
inline std::vector<long long> multinomial_counts(Rng& rng, long long n,
                                                 std::span<const double> probs) {
  std::vector<long long> counts(probs.size(), 0);
  long long remaining = n;
  double mass = 1.0;
  for (std::size_t j = 0; j + 1 < probs.size() && remaining > 0; ++j) {
    double p = probs[j] / mass;
    if (p >= 1.0) {
      counts[j] = remaining;
      remaining = 0;
      break;
    }
    std::binomial_distribution<long long> bin(remaining, p);
    counts[j] = bin(rng);
    remaining -= counts[j];
    mass -= probs[j];
  }
  if (!counts.empty() && remaining > 0) counts.back() += remaining;
  return counts;
}

inline int sample_index(Rng& rng, std::span<const double> probs) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace wdro
