#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace wdro {

/// A small dense exact LP solver: maximize c'x subject to linear rows and
/// x >= 0. Two-phase primal simplex on a full tableau with Bland's rule, so it
/// terminates on degenerate instances. Intended for tiny problems (tens of
/// variables); everything is O(rows * cols) per pivot.
namespace lp {

enum class RowType { kLe, kGe, kEq };

struct Row {
  std::vector<double> coeffs;
  RowType type;
  double rhs;
};

struct Problem {
  int num_vars = 0;
  std::vector<double> objective;  // maximize objective . x
  std::vector<Row> rows;
};

enum class Status { kOptimal, kInfeasible, kUnbounded };

struct Solution {
  Status status = Status::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
};

namespace detail {

constexpr double kTol = 1e-9;

class Tableau {
 public:
  // Columns: [structural | slack/surplus | artificial | rhs].
  Tableau(const Problem& p) : n_(p.num_vars), m_(static_cast<int>(p.rows.size())) {
    int n_slack = 0;
    for (const Row& r : p.rows)
      if (r.type != RowType::kEq) ++n_slack;
    slack_base_ = n_;
    art_base_ = n_ + n_slack;
    // Every row gets an artificial column; unused ones simply stay nonbasic.
    width_ = art_base_ + m_ + 1;
    t_.assign(static_cast<std::size_t>(m_ + 1) * width_, 0.0);
    basis_.assign(m_, -1);

    int slack_idx = 0;
    for (int i = 0; i < m_; ++i) {
      const Row& r = p.rows[i];
      double sign = 1.0;
      if (r.rhs < 0.0) sign = -1.0;  // normalize rhs >= 0
      for (int j = 0; j < n_; ++j) at(i, j) = sign * r.coeffs[j];
      rhs(i) = sign * r.rhs;
      RowType t = r.type;
      if (sign < 0.0) {
        if (t == RowType::kLe)
          t = RowType::kGe;
        else if (t == RowType::kGe)
          t = RowType::kLe;
      }
      if (r.type != RowType::kEq) {
        double s = (t == RowType::kLe) ? 1.0 : -1.0;
        at(i, slack_base_ + slack_idx) = s;
        if (t == RowType::kLe) basis_[i] = slack_base_ + slack_idx;
        ++slack_idx;
      }
      if (basis_[i] < 0) {
        at(i, art_base_ + i) = 1.0;
        basis_[i] = art_base_ + i;
      }
    }
  }

  Status run_two_phase(const std::vector<double>& objective) {
    // Phase 1: maximize -sum(artificials).
    std::vector<double> phase1(width_ - 1, 0.0);
    for (int j = art_base_; j < width_ - 1; ++j) phase1[j] = -1.0;
    set_costs(phase1);
    Status s = iterate(art_base_ + m_);
    if (s != Status::kOptimal) return Status::kInfeasible;
    if (objective_value() < -kTol) return Status::kInfeasible;
    drive_out_artificials();

    // Phase 2 over structural + slack columns only.
    std::vector<double> phase2(width_ - 1, 0.0);
    for (int j = 0; j < n_ && j < static_cast<int>(objective.size()); ++j)
      phase2[j] = objective[j];
    set_costs(phase2);
    return iterate(art_base_);
  }

  double objective_value() const { return t_[static_cast<std::size_t>(m_) * width_ + width_ - 1]; }

  std::vector<double> extract(int count) const {
    std::vector<double> x(count, 0.0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < count) x[basis_[i]] = rhs(i);
    return x;
  }

 private:
  double& at(int i, int j) { return t_[static_cast<std::size_t>(i) * width_ + j]; }
  double at(int i, int j) const { return t_[static_cast<std::size_t>(i) * width_ + j]; }
  double& rhs(int i) { return t_[static_cast<std::size_t>(i) * width_ + width_ - 1]; }
  double rhs(int i) const { return t_[static_cast<std::size_t>(i) * width_ + width_ - 1]; }

  // Rebuilds the reduced-cost row for the given costs and the current basis.
  void set_costs(const std::vector<double>& c) {
    for (int j = 0; j < width_; ++j) at(m_, j) = 0.0;
    for (int j = 0; j < width_ - 1; ++j) at(m_, j) = -c[j];
    for (int i = 0; i < m_; ++i) {
      double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      for (int j = 0; j < width_; ++j) at(m_, j) += cb * at(i, j);
    }
  }

  // Bland's rule: entering = lowest-index column with negative reduced cost
  // (restricted to columns < col_limit), leaving = ratio test with lowest
  // basis index on ties.
  Status iterate(int col_limit) {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < col_limit && j < width_ - 1; ++j) {
        if (at(m_, j) < -kTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return Status::kOptimal;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        double a = at(i, enter);
        if (a > kTol) {
          double ratio = rhs(i) / a;
          if (ratio < best - kTol || (ratio < best + kTol && (leave < 0 || basis_[i] < basis_[leave]))) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return Status::kUnbounded;
      pivot(leave, enter);
    }
  }

  void pivot(int row, int col) {
    double p = at(row, col);
    for (int j = 0; j < width_; ++j) at(row, j) /= p;
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      double f = at(i, col);
      if (f == 0.0) continue;
      for (int j = 0; j < width_; ++j) at(i, j) -= f * at(row, j);
    }
    basis_[row] = col;
  }

  // After phase 1, pivot surviving zero-valued artificials out of the basis
  // where possible; rows with no eligible pivot are redundant and harmless.
  void drive_out_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < art_base_) continue;
      for (int j = 0; j < art_base_; ++j) {
        if (std::abs(at(i, j)) > kTol) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  int n_;
  int m_;
  int slack_base_;
  int art_base_;
  int width_;
  std::vector<double> t_;
  std::vector<int> basis_;
};

}  // namespace detail

inline Solution solve(const Problem& p) {
  detail::Tableau tab(p);
  Solution sol;
  sol.status = tab.run_two_phase(p.objective);
  if (sol.status == Status::kOptimal) {
    sol.x = tab.extract(p.num_vars);
    sol.objective = 0.0;
    for (int j = 0; j < p.num_vars; ++j) sol.objective += p.objective[j] * sol.x[j];
  }
  return sol;
}

}  // namespace lp
}  // namespace wdro
