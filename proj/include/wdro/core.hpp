#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace wdro {

/// Dense row-major matrix of doubles. Small helper type shared across the
/// library; not a linear-algebra abstraction.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  std::span<double> row(int i) { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int i) const { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
};

inline double sum(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

inline double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : sum(v) / static_cast<double>(v.size());
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

/// Checks that `p` is a probability vector: entries positive, sum 1 within tol.
inline bool is_simplex(std::span<const double> p, double tol = 1e-9) {
  if (p.empty()) return false;
  for (double x : p) {
    if (!(x > 0.0)) return false;
  }
  return std::abs(sum(p) - 1.0) <= tol;
}

}  // namespace wdro
