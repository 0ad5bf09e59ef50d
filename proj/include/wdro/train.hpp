#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wdro/assignment.hpp"
#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/eval.hpp"
#include "wdro/group_weights.hpp"
#include "wdro/predictor.hpp"
#include "wdro/rng.hpp"

namespace wdro {

enum class Algorithm { kErm, kUnsupDro, kGroupDroOracle, kGroupDroPartial, kWorstoffDro };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kErm: return "erm";
    case Algorithm::kUnsupDro: return "unsup_dro";
    case Algorithm::kGroupDroOracle: return "group_dro_oracle";
    case Algorithm::kGroupDroPartial: return "group_dro_partial";
    case Algorithm::kWorstoffDro: return "worstoff_dro";
  }
  return "?";
}

inline Algorithm algorithm_from_name(const std::string& name) {
  if (name == "erm") return Algorithm::kErm;
  if (name == "unsup_dro") return Algorithm::kUnsupDro;
  if (name == "group_dro_oracle") return Algorithm::kGroupDroOracle;
  if (name == "group_dro_partial") return Algorithm::kGroupDroPartial;
  if (name == "worstoff_dro") return Algorithm::kWorstoffDro;
  throw ConfigError("unknown algorithm: " + name);
}

constexpr int kFullBatch = 0;

struct TrainConfig {
  Algorithm algorithm = Algorithm::kErm;
  double eta_w = 0.1;
  double eta_q = 0.1;
  double weight_decay = 0.0;
  double epsilon = 0.01;
  double eta_udro = 0.5;
  int batch_size = kFullBatch;
  int epochs = 100;
  std::uint64_t seed = 0;
  ArchSpec model;
  // Marginals to constrain against; estimated from the labeled subset when
  // absent. Supplying them explicitly covers datasets with no labeled rows.
  std::optional<std::vector<double>> marginals;
  // When set, every assignment solve is checked against the ground-truth
  // labeling: if the truth is feasible, the solver value must dominate it.
  bool audit_ground_truth = false;

  void validate() const {
    if (eta_w < 0.0 || eta_q < 0.0) throw ConfigError("learning rates must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
    if (algorithm == Algorithm::kUnsupDro && !(eta_udro > 0.0 && eta_udro < 1.0))
      throw ConfigError("eta_udro must lie in (0, 1)");
    if (batch_size < 0) throw ConfigError("batch_size must be >= 0 (0 meaning full batch)");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    model.validate();
  }
};

struct TrainedRun {
  ModelParams params;
  std::vector<RunRecord> records;  // one per epoch, train split
  GroupWeights q;
  int eps_relaxations_total = 0;
  int audit_checks = 0;
  int audit_violations = 0;
  std::vector<std::string> warnings;
};

namespace detail {

struct Batch {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> indices;  // positions in the source dataset
};

inline Batch gather_batch(const GroupedDataset& ds, const std::vector<int>& order,
                          std::size_t begin, std::size_t end) {
  Batch b;
  b.indices.assign(order.begin() + begin, order.begin() + end);
  const int bn = static_cast<int>(b.indices.size());
  b.features = Matrix(bn, ds.dim());
  b.labels.resize(static_cast<std::size_t>(bn));
  for (int r = 0; r < bn; ++r) {
    const int i = b.indices[r];
    std::copy_n(ds.features.row(i).data(), ds.dim(), b.features.row(r).data());
    b.labels[r] = ds.labels[i];
  }
  return b;
}

// Top-(1 - eta) batch-loss fraction: keep samples at or above the eta-level
// order statistic, weight them equally, drop the rest for this step.
inline std::vector<double> cvar_weights(const std::vector<double>& losses, double eta) {
  const int bn = static_cast<int>(losses.size());
  std::vector<double> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  const double threshold = sorted[static_cast<std::size_t>(eta * bn)];
  int kept = 0;
  for (double l : losses)
    if (l >= threshold) ++kept;
  std::vector<double> w(losses.size(), 0.0);
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (losses[i] >= threshold) w[i] = 1.0 / kept;
  return w;
}

inline AssignmentMatrix hard_assignment(const std::vector<int>& batch_groups, int num_groups) {
  AssignmentMatrix a;
  a.values = Matrix(static_cast<int>(batch_groups.size()), num_groups, 0.0);
  for (std::size_t r = 0; r < batch_groups.size(); ++r) a.values(static_cast<int>(r), batch_groups[r]) = 1.0;
  return a;
}

}  // namespace detail

// Trains one model on the train split of `ds`. All five algorithms share the
// same epoch loop, batch shuffling, and record layout; they differ in how
// per-sample weights are formed and whether q is updated. The q update reads
// losses at the post-step parameters, mirroring the descent-then-ascent
// ordering of the alternating scheme.
inline TrainedRun train(const GroupedDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  if (ds.split != Split::kTrain) throw ConfigError("training expects the train split");
  const int m = ds.num_groups;

  const bool maintains_q =
      cfg.algorithm == Algorithm::kGroupDroOracle ||
      cfg.algorithm == Algorithm::kGroupDroPartial || cfg.algorithm == Algorithm::kWorstoffDro;

  // Partial-variant training sees only the labeled rows.
  std::vector<int> pool;
  if (cfg.algorithm == Algorithm::kGroupDroPartial) {
    for (int i = 0; i < ds.n(); ++i)
      if (ds.groups[i] != kMissingGroup) pool.push_back(i);
    if (pool.empty()) throw EmptyTrainSet("no labeled samples for the partial variant");
  } else {
    pool.resize(static_cast<std::size_t>(ds.n()));
    std::iota(pool.begin(), pool.end(), 0);
  }

  std::vector<double> p_bar;
  if (cfg.algorithm == Algorithm::kWorstoffDro) {
    if (cfg.marginals) {
      p_bar = *cfg.marginals;
      if (static_cast<int>(p_bar.size()) != m)
        throw ConfigError("marginals length does not match the group count");
    } else {
      p_bar = estimate_marginals(ds).p_bar;
    }
  }

  Rng init_rng = make_rng(cfg.seed, "init");
  TrainedRun run;
  run.params = init_params(cfg.model, ds.dim(), init_rng);
  run.q = GroupWeights::uniform(m);
  Rng batch_rng = make_rng(cfg.seed, "batch");

  const std::size_t batch_len =
      cfg.batch_size == kFullBatch ? pool.size() : static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), batch_rng);
    int epoch_relaxations = 0;

    for (std::size_t start = 0; start < pool.size(); start += batch_len) {
      const std::size_t stop = std::min(start + batch_len, pool.size());
      detail::Batch batch = detail::gather_batch(ds, pool, start, stop);
      const int bn = static_cast<int>(batch.indices.size());
      const LossBatch losses = forward_loss(run.params, batch.features, batch.labels);

      std::vector<double> sample_weights;
      AssignmentMatrix assignment;
      switch (cfg.algorithm) {
        case Algorithm::kErm:
          sample_weights.assign(static_cast<std::size_t>(bn), 1.0 / bn);
          break;
        case Algorithm::kUnsupDro:
          sample_weights = detail::cvar_weights(losses.per_sample, cfg.eta_udro);
          break;
        case Algorithm::kGroupDroOracle:
        case Algorithm::kGroupDroPartial: {
          std::vector<int> batch_groups(static_cast<std::size_t>(bn));
          for (int r = 0; r < bn; ++r) {
            const int i = batch.indices[r];
            batch_groups[r] = cfg.algorithm == Algorithm::kGroupDroOracle ? ds.true_groups[i]
                                                                          : ds.groups[i];
          }
          assignment = detail::hard_assignment(batch_groups, m);
          sample_weights = soft_sample_weights(assignment, run.q);
          break;
        }
        case Algorithm::kWorstoffDro: {
          SolveProblem problem;
          problem.losses = losses.per_sample;
          problem.weights = run.q;
          problem.constraints.marginals = p_bar;
          problem.constraints.epsilon = cfg.epsilon;
          for (int r = 0; r < bn; ++r) {
            const int g = ds.groups[batch.indices[r]];
            if (g != kMissingGroup) problem.constraints.pinned.emplace_back(r, g);
          }
          const FeasibilityReport feas = check_feasible(problem.constraints, bn);
          if (!feas.feasible) {
            problem.constraints.epsilon = feas.min_epsilon + 1e-9;
            ++epoch_relaxations;
          }
          SolveResult solved = solve_assignments(problem);

          if (cfg.audit_ground_truth) {
            std::vector<int> truth_counts(static_cast<std::size_t>(m), 0);
            for (int r = 0; r < bn; ++r) ++truth_counts[ds.true_groups[batch.indices[r]]];
            bool truth_feasible = true;
            for (int j = 0; j < m; ++j) {
              const double dev =
                  std::abs(truth_counts[j] / static_cast<double>(bn) - p_bar[j]);
              if (dev > problem.constraints.epsilon + 1e-9) truth_feasible = false;
            }
            if (truth_feasible) {
              const std::vector<double> theta = column_prices(run.q, p_bar, bn);
              double truth_value = 0.0;
              for (int r = 0; r < bn; ++r)
                truth_value += theta[ds.true_groups[batch.indices[r]]] * losses.per_sample[r];
              ++run.audit_checks;
              if (solved.objective < truth_value - 1e-8) ++run.audit_violations;
            }
          }

          assignment = std::move(solved.assignment);
          sample_weights = soft_sample_weights(assignment, run.q);
          break;
        }
      }

      const std::vector<double> grad =
          weighted_grad(run.params, batch.features, batch.labels, sample_weights,
                        cfg.weight_decay);
      run.params = sgd_step(run.params, grad, cfg.eta_w);

      if (maintains_q) {
        const LossBatch stepped = forward_loss(run.params, batch.features, batch.labels);
        const std::vector<double> group_losses = soft_group_losses(assignment, stepped.per_sample);
        run.q = exp_ascent(run.q, group_losses, cfg.eta_q);
      }
    }

    const EvalResult eval = evaluate(run.params, ds);
    RunRecord record;
    record.epoch = epoch;
    record.split = split_name(Split::kTrain);
    record.loss = eval.loss;
    record.acc_overall = eval.acc_overall;
    record.acc_group = eval.acc_group;
    record.q = run.q.values;
    record.eps_relaxations = epoch_relaxations;
    run.records.push_back(std::move(record));

    if (epoch_relaxations > 0) {
      std::ostringstream os;
      os << "epoch " << epoch << ": relaxed epsilon on " << epoch_relaxations << " batch"
         << (epoch_relaxations == 1 ? "" : "es");
      run.warnings.push_back(os.str());
      run.eps_relaxations_total += epoch_relaxations;
    }
  }
  return run;
}

}  // namespace wdro
