#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wdro/core.hpp"
#include "wdro/errors.hpp"
#include "wdro/group_weights.hpp"
#include "wdro/simplex.hpp"

namespace wdro {

// Constraint set for soft group assignments: every row lies in the simplex,
// labeled rows are pinned one-hot, and each column's mean mass stays within
// epsilon of the corresponding marginal.
struct ConstraintSpec {
  std::vector<double> marginals;
  double epsilon = 0.0;
  std::vector<std::pair<int, int>> pinned;  // (row, group)

  int num_groups() const { return static_cast<int>(marginals.size()); }

  void validate(int num_rows) const {
    if (marginals.size() < 2) throw ShapeMismatch("constraint spec needs at least 2 groups");
    double s = 0.0;
    for (double p : marginals) {
      if (!std::isfinite(p) || p < 1e-6)
        throw DegenerateMarginal("marginal below 1e-6 cannot be constrained");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidConfig("marginals must sum to 1");
    if (!std::isfinite(epsilon) || epsilon < 0.0)
      throw InvalidConfig("epsilon must be finite and >= 0");
    std::vector<char> seen(static_cast<std::size_t>(num_rows), 0);
    for (auto [i, j] : pinned) {
      if (i < 0 || i >= num_rows) throw InvalidConfig("pinned row index out of range");
      if (j < 0 || j >= num_groups()) throw InvalidConfig("pinned group index out of range");
      if (seen[i]) throw InvalidConfig("pinned row indices must be unique");
      seen[i] = 1;
    }
  }
};

// Row-stochastic soft assignment of samples to groups.
struct AssignmentMatrix {
  Matrix values;

  int num_samples() const { return values.rows; }
  int num_groups() const { return values.cols; }
};

struct SolveProblem {
  std::vector<double> losses;
  GroupWeights weights;
  ConstraintSpec constraints;

  int num_samples() const { return static_cast<int>(losses.size()); }

  void validate() const {
    if (losses.empty()) throw ShapeMismatch("solve problem needs at least one sample");
    for (double l : losses) {
      if (!std::isfinite(l)) throw NonFiniteLoss("per-sample loss is not finite");
      if (l < 0.0) throw InvalidConfig("per-sample losses must be nonnegative");
    }
    weights.validate();
    if (weights.size() != constraints.num_groups())
      throw ShapeMismatch("group weights and marginals disagree on group count");
    constraints.validate(num_samples());
  }
};

struct FeasibilityReport {
  bool feasible = false;
  double min_epsilon = 0.0;
};

struct SolveResult {
  AssignmentMatrix assignment;
  double objective = 0.0;
};

// Linearized column prices theta_j = q_j / (n * marginal_j). Under the
// linearization the value of placing mass from sample i into column j is
// theta_j * l_i, so columns are ranked by price alone.
inline std::vector<double> column_prices(const GroupWeights& q,
                                         std::span<const double> marginals, int n) {
  if (q.size() != static_cast<int>(marginals.size()))
    throw ShapeMismatch("column_prices: weights and marginals disagree on group count");
  std::vector<double> theta(marginals.size());
  for (std::size_t j = 0; j < marginals.size(); ++j) {
    if (marginals[j] < 1e-6) throw DegenerateMarginal("marginal below 1e-6 cannot be priced");
    theta[j] = q.values[j] / (static_cast<double>(n) * marginals[j]);
  }
  return theta;
}

inline double assignment_objective(const AssignmentMatrix& a, const SolveProblem& problem) {
  if (a.num_samples() != problem.num_samples() ||
      a.num_groups() != problem.constraints.num_groups())
    throw ShapeMismatch("assignment_objective: matrix shape does not match problem");
  std::vector<double> theta =
      column_prices(problem.weights, problem.constraints.marginals, problem.num_samples());
  double obj = 0.0;
  for (int i = 0; i < a.num_samples(); ++i)
    for (int j = 0; j < a.num_groups(); ++j) obj += a.values(i, j) * theta[j] * problem.losses[i];
  return obj;
}

namespace detail {

inline std::vector<int> pin_counts(const ConstraintSpec& spec) {
  std::vector<int> counts(static_cast<std::size_t>(spec.num_groups()), 0);
  for (auto [i, j] : spec.pinned) {
    (void)i;
    ++counts[j];
  }
  return counts;
}

}  // namespace detail

// Feasibility of the constraint set for n rows. The free mass n - #pins must
// fit the per-column windows [n(p_j - eps) - pins_j, n(p_j + eps) - pins_j]
// after clamping lower ends at zero. min_epsilon is the smallest slack for
// which that holds; it does not depend on the epsilon stored in the spec.
inline FeasibilityReport check_feasible(const ConstraintSpec& spec, int n) {
  spec.validate(n);
  constexpr double tol = 1e-9;
  const int m = spec.num_groups();
  const std::vector<int> pins = detail::pin_counts(spec);
  const int k = static_cast<int>(spec.pinned.size());
  const double free_mass = static_cast<double>(n - k);

  FeasibilityReport report;
  report.feasible = true;
  double demand = 0.0;
  for (int j = 0; j < m; ++j) {
    const double upper_slack = n * (spec.marginals[j] + spec.epsilon) - pins[j];
    if (upper_slack < -tol) report.feasible = false;
    demand += std::max(0.0, n * (spec.marginals[j] - spec.epsilon) - pins[j]);
  }
  if (demand > free_mass + tol) report.feasible = false;

  // Smallest eps satisfying the upper bounds: n(p_j + eps) >= pins_j.
  double eps_upper = 0.0;
  for (int j = 0; j < m; ++j)
    eps_upper = std::max(eps_upper, pins[j] / static_cast<double>(n) - spec.marginals[j]);

  // Smallest eps with n * sum_j max(0, a_j - eps) <= free_mass, where
  // a_j = p_j - pins_j / n. The left side is piecewise linear and decreasing
  // in eps, so walk the sorted breakpoints and solve on the active segment.
  std::vector<double> a(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) a[j] = spec.marginals[j] - pins[j] / static_cast<double>(n);
  std::sort(a.begin(), a.end(), std::greater<double>());
  double eps_lower = 0.0;
  double demand_at_zero = 0.0;
  for (double v : a) demand_at_zero += std::max(0.0, v);
  if (n * demand_at_zero > free_mass) {
    double prefix = 0.0;
    for (int t = 1; t <= m; ++t) {
      prefix += a[t - 1];
      const double candidate = (prefix - free_mass / static_cast<double>(n)) / t;
      if (t == m || candidate >= a[t]) {
        eps_lower = candidate;
        break;
      }
    }
  }
  report.min_epsilon = std::max(0.0, std::max(eps_upper, eps_lower));
  return report;
}

// First violated assignment invariant, or nullopt if the matrix is valid
// under the spec. Column bounds are checked against the epsilon stored in the
// spec, so pass the spec the solver actually ran with.
inline std::optional<std::string> check_assignment(const AssignmentMatrix& a,
                                                   const ConstraintSpec& spec,
                                                   double tol = 1e-9) {
  const int n = a.num_samples();
  const int m = a.num_groups();
  if (m != spec.num_groups()) return "group count mismatch";
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < m; ++j) {
      const double v = a.values(i, j);
      if (!(v >= -tol && v <= 1.0 + tol)) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") = " << v << " outside [0,1]";
        return os.str();
      }
      row_sum += v;
    }
    if (std::abs(row_sum - 1.0) > tol) {
      std::ostringstream os;
      os << "row " << i << " sums to " << row_sum;
      return os.str();
    }
  }
  for (auto [i, j] : spec.pinned) {
    if (i < 0 || i >= n) return "pinned row out of range";
    if (std::abs(a.values(i, j) - 1.0) > tol) {
      std::ostringstream os;
      os << "pinned row " << i << " is not one-hot at group " << j;
      return os.str();
    }
  }
  for (int j = 0; j < m; ++j) {
    double col = 0.0;
    for (int i = 0; i < n; ++i) col += a.values(i, j);
    if (std::abs(col / n - spec.marginals[j]) > spec.epsilon + tol) {
      std::ostringstream os;
      os << "column " << j << " mean " << col / n << " violates |. - " << spec.marginals[j]
         << "| <= " << spec.epsilon;
      return os.str();
    }
  }
  return std::nullopt;
}

// Maximizes sum_ij g_ij * theta_j * l_i over the constraint set. The cost is
// rank-1, so the optimum pours the highest losses into the highest-priced
// columns: with columns in price order, take cumulative column totals as
// large as the upper bounds and the reservations for later columns' lower
// bounds allow, then cut the loss-sorted free rows at those totals. Runs in
// O(n log n + m log m + nnz).
inline SolveResult solve_assignments(const SolveProblem& problem) {
  problem.validate();
  const int n = problem.num_samples();
  const int m = problem.constraints.num_groups();

  const FeasibilityReport feas = check_feasible(problem.constraints, n);
  if (!feas.feasible) {
    std::ostringstream os;
    os << "constraint set is empty; smallest feasible epsilon is " << feas.min_epsilon;
    throw InfeasibleConstraints(os.str(), feas.min_epsilon);
  }

  const std::vector<double> theta =
      column_prices(problem.weights, problem.constraints.marginals, n);
  const std::vector<int> pins = detail::pin_counts(problem.constraints);

  std::vector<int> pinned_group(static_cast<std::size_t>(n), -1);
  for (auto [i, j] : problem.constraints.pinned) pinned_group[i] = j;

  std::vector<int> free_rows;
  free_rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    if (pinned_group[i] < 0) free_rows.push_back(i);
  std::stable_sort(free_rows.begin(), free_rows.end(), [&](int a, int b) {
    return problem.losses[a] > problem.losses[b];
  });

  std::vector<int> cols(static_cast<std::size_t>(m));
  std::iota(cols.begin(), cols.end(), 0);
  std::stable_sort(cols.begin(), cols.end(), [&](int a, int b) { return theta[a] > theta[b]; });

  // Free-mass bounds per column in price order.
  const double free_mass = static_cast<double>(free_rows.size());
  std::vector<double> lo(static_cast<std::size_t>(m)), hi(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const int j = cols[k];
    const double p = problem.constraints.marginals[j];
    lo[k] = std::max(0.0, n * (p - problem.constraints.epsilon) - pins[j]);
    hi[k] = std::max(0.0, n * (p + problem.constraints.epsilon) - pins[j]);
  }
  std::vector<double> suffix_lo(static_cast<std::size_t>(m) + 1, 0.0);
  for (int k = m - 1; k >= 0; --k) suffix_lo[k] = suffix_lo[k + 1] + lo[k];

  // Cumulative totals: greedy upper fill with reservation for later lower
  // bounds. Feasibility guarantees the lower-bound clamp never exceeds the
  // upper fill except through rounding, and the final total is exactly the
  // free mass so every row gets placed.
  std::vector<double> cum(static_cast<std::size_t>(m) + 1, 0.0);
  for (int k = 0; k < m; ++k) {
    double c = std::min(cum[k] + hi[k], free_mass - suffix_lo[k + 1]);
    c = std::max(c, cum[k] + lo[k]);
    cum[k + 1] = std::max(c, cum[k]);
  }
  cum[m] = free_mass;

  // Row r in sorted order occupies the mass interval [r, r+1); column k in
  // price order occupies [cum[k], cum[k+1]). Each entry is the overlap.
  AssignmentMatrix out;
  out.values = Matrix(n, m, 0.0);
  for (int i = 0; i < n; ++i)
    if (pinned_group[i] >= 0) out.values(i, pinned_group[i]) = 1.0;
  int k = 0;
  for (std::size_t r = 0; r < free_rows.size(); ++r) {
    const double row_lo = static_cast<double>(r);
    const double row_hi = row_lo + 1.0;
    while (k + 1 < m && cum[k + 1] <= row_lo) ++k;
    for (int t = k; t < m && cum[t] < row_hi; ++t) {
      const double overlap = std::min(row_hi, cum[t + 1]) - std::max(row_lo, cum[t]);
      if (overlap > 0.0) out.values(free_rows[r], cols[t]) = overlap;
    }
  }

  SolveResult result;
  result.assignment = std::move(out);
  result.objective = assignment_objective(result.assignment, problem);
  return result;
}

// Same optimum via a generic exact LP over the free entries. Deliberately
// shares no logic with the greedy path beyond the feasibility pre-check;
// kept small so the tableau stays tractable.
inline SolveResult brute_force_oracle(const SolveProblem& problem) {
  problem.validate();
  const int n = problem.num_samples();
  const int m = problem.constraints.num_groups();
  if (n > 10 || m > 4)
    throw SizeLimitExceeded("oracle accepts at most 10 samples and 4 groups");

  const FeasibilityReport feas = check_feasible(problem.constraints, n);
  if (!feas.feasible) {
    std::ostringstream os;
    os << "constraint set is empty; smallest feasible epsilon is " << feas.min_epsilon;
    throw InfeasibleConstraints(os.str(), feas.min_epsilon);
  }

  const std::vector<double> theta =
      column_prices(problem.weights, problem.constraints.marginals, n);
  const std::vector<int> pins = detail::pin_counts(problem.constraints);

  std::vector<int> pinned_group(static_cast<std::size_t>(n), -1);
  for (auto [i, j] : problem.constraints.pinned) pinned_group[i] = j;
  std::vector<int> free_rows;
  for (int i = 0; i < n; ++i)
    if (pinned_group[i] < 0) free_rows.push_back(i);
  const int f = static_cast<int>(free_rows.size());

  AssignmentMatrix out;
  out.values = Matrix(n, m, 0.0);
  for (int i = 0; i < n; ++i)
    if (pinned_group[i] >= 0) out.values(i, pinned_group[i]) = 1.0;

  if (f > 0) {
    lp::Problem p;
    p.num_vars = f * m;
    p.objective.assign(static_cast<std::size_t>(p.num_vars), 0.0);
    for (int r = 0; r < f; ++r)
      for (int j = 0; j < m; ++j)
        p.objective[static_cast<std::size_t>(r) * m + j] = theta[j] * problem.losses[free_rows[r]];

    for (int r = 0; r < f; ++r) {
      lp::Row row;
      row.coeffs.assign(static_cast<std::size_t>(p.num_vars), 0.0);
      for (int j = 0; j < m; ++j) row.coeffs[static_cast<std::size_t>(r) * m + j] = 1.0;
      row.type = lp::RowType::kEq;
      row.rhs = 1.0;
      p.rows.push_back(std::move(row));
    }
    for (int j = 0; j < m; ++j) {
      const double p_j = problem.constraints.marginals[j];
      const double hi = n * (p_j + problem.constraints.epsilon) - pins[j];
      const double lo = n * (p_j - problem.constraints.epsilon) - pins[j];
      lp::Row upper;
      upper.coeffs.assign(static_cast<std::size_t>(p.num_vars), 0.0);
      for (int r = 0; r < f; ++r) upper.coeffs[static_cast<std::size_t>(r) * m + j] = 1.0;
      upper.type = lp::RowType::kLe;
      upper.rhs = std::max(0.0, hi);
      p.rows.push_back(upper);
      if (lo > 0.0) {
        lp::Row lower = upper;
        lower.type = lp::RowType::kGe;
        lower.rhs = lo;
        p.rows.push_back(std::move(lower));
      }
    }

    lp::Solution sol = lp::solve(p);
    if (sol.status != lp::Status::kOptimal) {
      std::ostringstream os;
      os << "constraint set is empty; smallest feasible epsilon is " << feas.min_epsilon;
      throw InfeasibleConstraints(os.str(), feas.min_epsilon);
    }
    for (int r = 0; r < f; ++r)
      for (int j = 0; j < m; ++j)
        out.values(free_rows[r], j) = sol.x[static_cast<std::size_t>(r) * m + j];
  }

  SolveResult result;
  result.assignment = std::move(out);
  result.objective = assignment_objective(result.assignment, problem);
  return result;
}

inline std::vector<double> soft_group_losses(const AssignmentMatrix& a,
                                             std::span<const double> losses) {
  return soft_group_losses(a.values, losses);
}

inline std::vector<double> soft_sample_weights(const AssignmentMatrix& a, const GroupWeights& q) {
  return soft_sample_weights(a.values, q);
}

}  // namespace wdro
