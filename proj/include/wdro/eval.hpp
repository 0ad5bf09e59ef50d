#pragma once

#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/predictor.hpp"

namespace wdro {

// One line of the metrics stream. Serialized field order is part of the file
// format; see run_record_json.
struct RunRecord {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double acc_overall = 0.0;
  std::vector<double> acc_group;
  std::vector<double> q;
  int eps_relaxations = 0;
};

struct EvalResult {
  double loss = 0.0;
  double acc_overall = 0.0;
  std::vector<double> acc_group;
  std::vector<bool> absent;  // group had no samples; its accuracy reads 1
};

// Per-group accuracies against true groups. A group absent from the split is
// reported as accuracy 1 with its absent flag set, so min-aggregation skips
// it rather than tripping on a vacuous 0/0.
inline EvalResult evaluate(const ModelParams& params, const GroupedDataset& ds) {
  if (ds.n() == 0) throw EmptySplit("cannot evaluate an empty split");
  ds.validate();
  const std::vector<int> preds = predict(params, ds.features);
  const LossBatch batch = forward_loss(params, ds.features, ds.labels);

  std::vector<int> correct(static_cast<std::size_t>(ds.num_groups), 0);
  std::vector<int> total(static_cast<std::size_t>(ds.num_groups), 0);
  int correct_all = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const int g = ds.true_groups[i];
    ++total[g];
    if (preds[i] == ds.labels[i]) {
      ++correct[g];
      ++correct_all;
    }
  }

  EvalResult out;
  out.loss = batch.mean;
  out.acc_overall = correct_all / static_cast<double>(ds.n());
  out.acc_group.resize(static_cast<std::size_t>(ds.num_groups));
  out.absent.resize(static_cast<std::size_t>(ds.num_groups));
  for (int j = 0; j < ds.num_groups; ++j) {
    out.absent[j] = total[j] == 0;
    out.acc_group[j] = total[j] == 0 ? 1.0 : correct[j] / static_cast<double>(total[j]);
  }
  return out;
}

// The group with the fewest training samples; ties resolve to the lowest id.
inline int minority_group(const GroupedDataset& train_ds) {
  std::vector<int> counts(static_cast<std::size_t>(train_ds.num_groups), 0);
  for (int g : train_ds.true_groups) ++counts[g];
  int best = 0;
  for (int j = 1; j < train_ds.num_groups; ++j)
    if (counts[j] < counts[best]) best = j;
  return best;
}

inline std::string run_record_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["loss"] = r.loss;
  j["acc_overall"] = r.acc_overall;
  j["acc_group"] = r.acc_group;
  j["q"] = r.q;
  j["eps_relaxations"] = r.eps_relaxations;
  return j.dump();
}

inline RunRecord parse_run_record(const std::string& line) {
  RunRecord r;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    r.epoch = j.at("epoch").get<int>();
    r.split = j.at("split").get<std::string>();
    r.loss = j.at("loss").get<double>();
    r.acc_overall = j.at("acc_overall").get<double>();
    r.acc_group = j.at("acc_group").get<std::vector<double>>();
    r.q = j.at("q").get<std::vector<double>>();
    r.eps_relaxations = j.at("eps_relaxations").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

}  // namespace wdro
