#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wdro/assignment.hpp"
#include "wdro/errors.hpp"
#include "wdro/group_weights.hpp"
#include "wdro/rng.hpp"

namespace wdro {

// Chance that a single empirical group frequency over n draws stays within
// eps of its true value: 1 - 2*exp(-2*n*eps^2). Negative values mean the
// bound is vacuous at these settings; returned as-is.
inline double bound_true_marginal(long long n, double eps) {
  if (n < 1) throw InvalidConfig("n must be >= 1");
  if (!(eps > 0.0)) throw InvalidConfig("eps must be > 0");
  return 1.0 - 2.0 * std::exp(-2.0 * static_cast<double>(n) * eps * eps);
}

// Same containment when the reference marginal is itself estimated from k
// labeled draws with slack delta; the two failure chances union-bound.
inline double bound_estimated_marginal(long long n, long long k, double eps, double delta) {
  if (n < 1 || k < 1) throw InvalidConfig("n and k must be >= 1");
  if (!(eps > 0.0) || !(delta > 0.0)) throw InvalidConfig("eps and delta must be > 0");
  return 1.0 - 2.0 * std::exp(-2.0 * static_cast<double>(n) * eps * eps) -
         2.0 * std::exp(-2.0 * static_cast<double>(k) * delta * delta);
}

struct CoverageReport {
  std::vector<double> per_group_frequency;
  double joint_frequency = 0.0;
  double analytic_bound = 0.0;
  long long trials = 0;
};

// Samples n group labels per trial and measures how often each empirical
// frequency lands within eps of the truth. The analytic bound speaks per
// coordinate; the joint (all groups at once) frequency is reported alongside
// without a claim attached.
inline CoverageReport monte_carlo_coverage(std::span<const double> p_star, long long n,
                                           double eps, long long trials, std::uint64_t seed) {
  if (!is_simplex(p_star)) throw InvalidConfig("p_star must be a probability vector");
  if (trials < 100) throw InvalidConfig("need at least 100 trials");
  const std::size_t m = p_star.size();
  Rng rng(seed);
  std::vector<long long> hits(m, 0);
  long long joint_hits = 0;
  for (long long t = 0; t < trials; ++t) {
    const std::vector<long long> counts = multinomial_counts(rng, n, p_star);
    bool all = true;
    for (std::size_t j = 0; j < m; ++j) {
      const double emp = counts[j] / static_cast<double>(n);
      if (std::abs(emp - p_star[j]) <= eps)
        ++hits[j];
      else
        all = false;
    }
    if (all) ++joint_hits;
  }
  CoverageReport report;
  report.trials = trials;
  report.analytic_bound = bound_true_marginal(n, eps);
  report.joint_frequency = joint_hits / static_cast<double>(trials);
  report.per_group_frequency.resize(m);
  for (std::size_t j = 0; j < m; ++j)
    report.per_group_frequency[j] = hits[j] / static_cast<double>(trials);
  return report;
}

// Two-sample variant: k labeled draws form the estimate p_bar, n fresh draws
// form the empirical frequency, and containment widens to delta + eps.
// share_sample reuses the n draws as the labeled sample (requires k == n),
// the degenerate case where containment is certain.
inline CoverageReport monte_carlo_coverage_estimated(std::span<const double> p_star, long long n,
                                                     long long k, double eps, double delta,
                                                     long long trials, std::uint64_t seed,
                                                     bool share_sample = false) {
  if (!is_simplex(p_star)) throw InvalidConfig("p_star must be a probability vector");
  if (trials < 100) throw InvalidConfig("need at least 100 trials");
  if (share_sample && k != n) throw InvalidConfig("share_sample requires k == n");
  const std::size_t m = p_star.size();
  Rng rng(seed);
  std::vector<long long> hits(m, 0);
  long long joint_hits = 0;
  for (long long t = 0; t < trials; ++t) {
    const std::vector<long long> sample = multinomial_counts(rng, n, p_star);
    const std::vector<long long> labeled =
        share_sample ? sample : multinomial_counts(rng, k, p_star);
    bool all = true;
    for (std::size_t j = 0; j < m; ++j) {
      const double emp = sample[j] / static_cast<double>(n);
      const double p_bar = labeled[j] / static_cast<double>(k);
      if (std::abs(p_bar - emp) <= delta + eps)
        ++hits[j];
      else
        all = false;
    }
    if (all) ++joint_hits;
  }
  CoverageReport report;
  report.trials = trials;
  report.analytic_bound = bound_estimated_marginal(n, k, eps, delta);
  report.joint_frequency = joint_hits / static_cast<double>(trials);
  report.per_group_frequency.resize(m);
  for (std::size_t j = 0; j < m; ++j)
    report.per_group_frequency[j] = hits[j] / static_cast<double>(trials);
  return report;
}

struct LowerBoundReport {
  int instances = 0;
  int violations = 0;
  std::vector<std::string> counterexamples;

  bool pass() const { return violations == 0; }
};

// The assignment optimum upper-bounds the hard-label group objective: on
// instances whose marginals equal the exact empirical counts (so the
// linearized objective at the true labeling coincides with
// sum_j q_j * mean_j), the solver value must dominate that labeling's value.
// Random pins are drawn consistent with the truth, which keeps it feasible.
inline LowerBoundReport verify_groupdro_lower_bound(int instances, std::uint64_t seed) {
  if (instances < 1) throw InvalidConfig("need at least one instance");
  Rng rng(seed);
  std::uniform_real_distribution<double> loss_dist(0.0, 5.0);
  std::exponential_distribution<double> exp_dist(1.0);
  LowerBoundReport report;
  for (int t = 0; t < instances; ++t) {
    const int m = 2 + static_cast<int>(rng() % 2);
    const int n = m + 1 + static_cast<int>(rng() % static_cast<unsigned>(8 - m));

    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int j = 0; j < m; ++j) labels[j] = j;
    for (int i = m; i < n; ++i) labels[i] = static_cast<int>(rng() % m);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    for (int g : labels) ++counts[g];

    SolveProblem problem;
    problem.losses.resize(static_cast<std::size_t>(n));
    for (double& l : problem.losses) l = loss_dist(rng);
    problem.weights.values.resize(static_cast<std::size_t>(m));
    double qsum = 0.0;
    for (double& v : problem.weights.values) {
      v = 0.05 + exp_dist(rng);
      qsum += v;
    }
    for (double& v : problem.weights.values) v /= qsum;
    problem.constraints.marginals.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
      problem.constraints.marginals[j] = counts[j] / static_cast<double>(n);
    problem.constraints.epsilon = 0.0;
    for (int i = 0; i < n; ++i)
      if (rng() % 2) problem.constraints.pinned.emplace_back(i, labels[i]);

    const SolveResult solved = solve_assignments(problem);
    std::vector<double> group_mean(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < n; ++i) group_mean[labels[i]] += problem.losses[i];
    double hard_objective = 0.0;
    for (int j = 0; j < m; ++j)
      hard_objective += problem.weights.values[j] * group_mean[j] / counts[j];

    ++report.instances;
    if (solved.objective < hard_objective - 1e-8) {
      ++report.violations;
      if (report.counterexamples.size() < 10) {
        std::ostringstream os;
        os << "instance " << t << ": solver " << solved.objective << " < hard "
           << hard_objective;
        report.counterexamples.push_back(os.str());
      }
    }
  }
  return report;
}

}  // namespace wdro
