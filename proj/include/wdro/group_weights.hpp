#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wdro/core.hpp"
#include "wdro/errors.hpp"

namespace wdro {

// Adversarial weights over groups. Invariant: values sum to 1 and every entry
// is strictly positive, so exponentiated-gradient updates can never get stuck
// on a zeroed coordinate.
struct GroupWeights {
  std::vector<double> values;

  static GroupWeights uniform(int num_groups) {
    GroupWeights q;
    q.values.assign(static_cast<std::size_t>(num_groups), 1.0 / num_groups);
    return q;
  }

  int size() const { return static_cast<int>(values.size()); }

  void validate(double tol = 1e-9) const {
    if (values.empty()) throw ShapeMismatch("group weights are empty");
    double s = 0.0;
    for (double v : values) {
      if (!std::isfinite(v) || v <= 0.0) throw InvalidConfig("group weight must be finite and > 0");
      s += v;
    }
    if (std::abs(s - 1.0) > tol) throw InvalidConfig("group weights must sum to 1");
  }
};

// Multiplicative-weights ascent step: q_j <- q_j * exp(eta * L_j), then
// renormalize. Computed in log space so large losses saturate toward a vertex
// of the simplex instead of overflowing.
inline GroupWeights exp_ascent(const GroupWeights& q, std::span<const double> group_losses,
                               double eta) {
  if (q.size() != static_cast<int>(group_losses.size()))
    throw ShapeMismatch("exp_ascent: weights and losses disagree on group count");
  for (double l : group_losses)
    if (!std::isfinite(l)) throw NonFiniteLoss("exp_ascent: non-finite group loss");

  std::vector<double> logits(q.values.size());
  for (std::size_t j = 0; j < logits.size(); ++j)
    logits[j] = std::log(q.values[j]) + eta * group_losses[j];
  double top = *std::max_element(logits.begin(), logits.end());

  GroupWeights out;
  out.values.resize(logits.size());
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    // Floor keeps every coordinate strictly positive even when the gap to the
    // leading group exceeds the exp underflow threshold.
    out.values[j] = std::max(std::exp(logits[j] - top), 1e-300);
    total += out.values[j];
  }
  for (double& v : out.values) v /= total;
  return out;
}

// Per-group average losses under a soft assignment: L_j = sum_i g_ij l_i over
// the soft count sum_i g_ij. A group whose soft count is (numerically) zero
// contributes a loss of 0 rather than 0/0.
inline std::vector<double> soft_group_losses(const Matrix& assignment,
                                             std::span<const double> losses) {
  if (assignment.rows != static_cast<int>(losses.size()))
    throw ShapeMismatch("soft_group_losses: assignment rows != loss count");
  std::vector<double> out(static_cast<std::size_t>(assignment.cols), 0.0);
  std::vector<double> colsum(static_cast<std::size_t>(assignment.cols), 0.0);
  for (int i = 0; i < assignment.rows; ++i) {
    for (int j = 0; j < assignment.cols; ++j) {
      out[j] += assignment(i, j) * losses[i];
      colsum[j] += assignment(i, j);
    }
  }
  for (int j = 0; j < assignment.cols; ++j) out[j] = colsum[j] < 1e-12 ? 0.0 : out[j] / colsum[j];
  return out;
}

// Per-sample weights realizing the weighted objective sum_j q_j L_j as a
// single weighted sum over samples: w_i = sum_j q_j g_ij / colsum_j. Groups
// with a vanishing soft count are skipped, matching soft_group_losses.
inline std::vector<double> soft_sample_weights(const Matrix& assignment, const GroupWeights& q) {
  if (assignment.cols != q.size())
    throw ShapeMismatch("soft_sample_weights: assignment cols != group count");
  std::vector<double> colsum(static_cast<std::size_t>(assignment.cols), 0.0);
  for (int i = 0; i < assignment.rows; ++i)
    for (int j = 0; j < assignment.cols; ++j) colsum[j] += assignment(i, j);
  std::vector<double> w(static_cast<std::size_t>(assignment.rows), 0.0);
  for (int i = 0; i < assignment.rows; ++i) {
    for (int j = 0; j < assignment.cols; ++j) {
      if (colsum[j] < 1e-12) continue;
      w[i] += q.values[j] * assignment(i, j) / colsum[j];
    }
  }
  return w;
}

}  // namespace wdro
