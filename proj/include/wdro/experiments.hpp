#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/eval.hpp"
#include "wdro/train.hpp"

namespace wdro {

namespace detail {

// Runs fn(0..count-1) across up to `jobs` threads. Tasks are independent and
// write only to their own slot, so the schedule cannot change results. The
// first exception from any task is rethrown once every thread has joined.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        if (failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

struct SweepEntry {
  TrainConfig config;
  TrainedRun run;
  RunRecord val_record;
  RunRecord test_record;
  std::string error;  // nonempty when this run failed; other runs proceed

  bool ok() const { return error.empty(); }
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // same order as the config list
};

// Trains every config on the train split and evaluates the final parameters
// on val and test. Runs are independent, so they parallelize freely; results
// merge back in config order regardless of the worker count.
inline SweepResult run_sweep(const GroupedDataset& train_ds, const GroupedDataset& val_ds,
                             const GroupedDataset& test_ds,
                             const std::vector<TrainConfig>& configs, int jobs = 1) {
  SweepResult result;
  result.entries.resize(configs.size());
  detail::parallel_for(configs.size(), jobs, [&](std::size_t i) {
    SweepEntry& entry = result.entries[i];
    entry.config = configs[i];
    try {
      entry.run = train(train_ds, configs[i]);
      const int last_epoch = std::max(0, configs[i].epochs - 1);
      for (const auto [ds, name] :
           {std::pair{&val_ds, Split::kVal}, std::pair{&test_ds, Split::kTest}}) {
        const EvalResult ev = evaluate(entry.run.params, *ds);
        RunRecord rec;
        rec.epoch = last_epoch;
        rec.split = split_name(name);
        rec.loss = ev.loss;
        rec.acc_overall = ev.acc_overall;
        rec.acc_group = ev.acc_group;
        rec.q = entry.run.q.values;
        rec.eps_relaxations = entry.run.eps_relaxations_total;
        (name == Split::kVal ? entry.val_record : entry.test_record) = std::move(rec);
      }
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
  });
  return result;
}

// Validation-only selection: shortlist the top_k entries by overall accuracy,
// then pick the shortlisted entry with the best minority-group accuracy. Both
// rankings break ties toward the earlier config. Returns an index into
// entries; throws when every run failed.
inline int nvp_select(const SweepResult& sweep, int minority, int top_k = 5) {
  std::vector<int> ranked;
  for (int i = 0; i < static_cast<int>(sweep.entries.size()); ++i)
    if (sweep.entries[i].ok()) ranked.push_back(i);
  if (ranked.empty()) throw EmptySplit("no successful runs to select from");
  std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    return sweep.entries[a].val_record.acc_overall > sweep.entries[b].val_record.acc_overall;
  });
  if (static_cast<int>(ranked.size()) > top_k) ranked.resize(static_cast<std::size_t>(top_k));
  int best = ranked[0];
  for (int i : ranked) {
    const auto& cand = sweep.entries[i].val_record.acc_group;
    if (minority < 0 || minority >= static_cast<int>(cand.size()))
      throw ShapeMismatch("minority group id out of range for the sweep's group count");
    const double lead = sweep.entries[best].val_record.acc_group[minority];
    if (cand[minority] > lead || (cand[minority] == lead && i < best)) best = i;
  }
  return best;
}

struct AblationRow {
  std::string config_id;
  double fraction_or_eps = 0.0;
  int seed_count = 0;
  double min_acc_mean = 0.0;
  double min_acc_sd = 0.0;
  double avg_acc_mean = 0.0;
  double avg_acc_sd = 0.0;
};

namespace detail {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

// Sample standard deviation (n - 1 denominator); zero for a single value.
inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

inline AblationRow summarize_setting(const std::string& config_id, double setting,
                                     const std::vector<double>& min_accs,
                                     const std::vector<double>& avg_accs) {
  AblationRow row;
  row.config_id = config_id;
  row.fraction_or_eps = setting;
  row.seed_count = static_cast<int>(min_accs.size());
  const MeanSd mn = mean_sd(min_accs);
  const MeanSd av = mean_sd(avg_accs);
  row.min_acc_mean = mn.mean;
  row.min_acc_sd = mn.sd;
  row.avg_acc_mean = av.mean;
  row.avg_acc_sd = av.sd;
  return row;
}

}  // namespace detail

// Re-masks the fully annotated train split at each labeled fraction and
// trains `base` across the seeds. Test-set minority and overall accuracies
// aggregate per fraction; the minority group is fixed by the train split.
inline std::vector<AblationRow> ablate_labeled_fraction(
    const GroupedDataset& train_full, const GroupedDataset& test_ds, const TrainConfig& base,
    const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds, int jobs = 1) {
  if (fractions.empty() || seeds.empty())
    throw InvalidConfig("ablation needs at least one fraction and one seed");
  const int minority = minority_group(train_full);
  const std::size_t runs = fractions.size() * seeds.size();
  std::vector<double> min_accs(runs), avg_accs(runs);
  detail::parallel_for(runs, jobs, [&](std::size_t i) {
    const std::size_t fi = i / seeds.size();
    const std::uint64_t seed = seeds[i % seeds.size()];
    const GroupedDataset masked =
        mask_mcar(train_full, fractions[fi], derive_seed(seed, "mask"));
    TrainConfig cfg = base;
    cfg.seed = seed;
    const TrainedRun run = train(masked, cfg);
    const EvalResult ev = evaluate(run.params, test_ds);
    min_accs[i] = ev.acc_group[minority];
    avg_accs[i] = ev.acc_overall;
  });
  std::vector<AblationRow> rows;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const std::size_t lo = fi * seeds.size();
    rows.push_back(detail::summarize_setting(
        algorithm_name(base.algorithm), fractions[fi],
        {min_accs.begin() + lo, min_accs.begin() + lo + seeds.size()},
        {avg_accs.begin() + lo, avg_accs.begin() + lo + seeds.size()}));
  }
  return rows;
}

// Sweeps the constraint slack on a fixed (already masked) train split.
inline std::vector<AblationRow> ablate_epsilon(const GroupedDataset& train_ds,
                                               const GroupedDataset& test_ds,
                                               const TrainConfig& base,
                                               const std::vector<double>& eps_values,
                                               const std::vector<std::uint64_t>& seeds,
                                               int jobs = 1) {
  if (eps_values.empty() || seeds.empty())
    throw InvalidConfig("ablation needs at least one epsilon and one seed");
  const int minority = minority_group(train_ds);
  const std::size_t runs = eps_values.size() * seeds.size();
  std::vector<double> min_accs(runs), avg_accs(runs);
  detail::parallel_for(runs, jobs, [&](std::size_t i) {
    const std::size_t ei = i / seeds.size();
    TrainConfig cfg = base;
    cfg.epsilon = eps_values[ei];
    cfg.seed = seeds[i % seeds.size()];
    const TrainedRun run = train(train_ds, cfg);
    const EvalResult ev = evaluate(run.params, test_ds);
    min_accs[i] = ev.acc_group[minority];
    avg_accs[i] = ev.acc_overall;
  });
  std::vector<AblationRow> rows;
  for (std::size_t ei = 0; ei < eps_values.size(); ++ei) {
    const std::size_t lo = ei * seeds.size();
    rows.push_back(detail::summarize_setting(
        algorithm_name(base.algorithm), eps_values[ei],
        {min_accs.begin() + lo, min_accs.begin() + lo + seeds.size()},
        {avg_accs.begin() + lo, avg_accs.begin() + lo + seeds.size()}));
  }
  return rows;
}

// Fixed column set; one row per setting, ready for plotting.
inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "config_id,fraction_or_eps,seed_count,min_acc_mean,min_acc_sd,avg_acc_mean,avg_acc_sd\n";
  char buf[256];
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%d,%.9g,%.9g,%.9g,%.9g\n", r.config_id.c_str(),
                  r.fraction_or_eps, r.seed_count, r.min_acc_mean, r.min_acc_sd, r.avg_acc_mean,
                  r.avg_acc_sd);
    out += buf;
  }
  return out;
}

}  // namespace wdro
