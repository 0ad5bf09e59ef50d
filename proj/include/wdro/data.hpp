#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wdro/core.hpp"
#include "wdro/errors.hpp"
#include "wdro/rng.hpp"

namespace wdro {

constexpr int kMissingGroup = -1;

enum class Split { kTrain, kVal, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

// A labeled binary-classification dataset with (possibly missing) group ids.
// true_groups exists for evaluation only; training code must not read it.
struct GroupedDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> groups;  // kMissingGroup where the annotation was dropped
  std::vector<int> true_groups;
  int num_groups = 0;
  Split split = Split::kTrain;

  int n() const { return features.rows; }
  int dim() const { return features.cols; }

  void validate() const {
    const std::size_t count = static_cast<std::size_t>(features.rows);
    if (labels.size() != count || groups.size() != count || true_groups.size() != count)
      throw ShapeMismatch("dataset columns disagree on sample count");
    if (num_groups < 1) throw InvalidConfig("dataset needs at least one group");
    for (std::size_t i = 0; i < count; ++i) {
      if (labels[i] != 0 && labels[i] != 1) throw InvalidConfig("labels must be 0 or 1");
      if (true_groups[i] < 0 || true_groups[i] >= num_groups)
        throw InvalidConfig("true group id out of range");
      if (groups[i] == kMissingGroup) {
        if (split != Split::kTrain)
          throw InvalidConfig("missing group annotations are only allowed in the train split");
      } else if (groups[i] != true_groups[i]) {
        throw InvalidConfig("observed group annotation contradicts the true group");
      }
    }
  }
};

struct MarginalEstimate {
  std::vector<double> p_bar;
  int labeled_count = 0;
};

struct CmnistConfig {
  int n = 20000;
  std::vector<double> flip_probs{0.2, 0.1, 0.9};
  std::vector<double> group_fractions{0.45, 0.45, 0.10};
  double core_snr = 1.75;
  double spurious_snr = 3.0;
  int dim = 20;

  void validate() const {
    if (n < 1) throw InvalidConfig("n must be >= 1");
    if (dim < 2) throw InvalidConfig("dim must be >= 2 (core and spurious coordinates)");
    if (flip_probs.size() != group_fractions.size() || flip_probs.empty())
      throw InvalidConfig("flip_probs and group_fractions must have equal nonzero length");
    for (double p : flip_probs)
      if (p < 0.0 || p > 1.0) throw InvalidConfig("flip probabilities must be in [0,1]");
    double s = 0.0;
    for (double f : group_fractions) {
      if (f <= 0.0) throw InvalidConfig("group fractions must be positive");
      s += f;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidConfig("group fractions must sum to 1");
  }
};

// Label drives coordinate 0 weakly, a label-correlated nuisance attribute
// drives coordinate 1 strongly, and the nuisance flips against the label at a
// per-group rate. Learners that lean on coordinate 1 fail exactly on the
// groups with high flip rates.
inline GroupedDataset gen_cmnist_like(const CmnistConfig& cfg, std::uint64_t seed,
                                      Split split = Split::kTrain) {
  cfg.validate();
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  GroupedDataset ds;
  ds.split = split;
  ds.num_groups = static_cast<int>(cfg.group_fractions.size());
  ds.features = Matrix(cfg.n, cfg.dim);
  ds.labels.resize(static_cast<std::size_t>(cfg.n));
  ds.groups.resize(static_cast<std::size_t>(cfg.n));
  ds.true_groups.resize(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    const int y = coin(rng) ? 1 : 0;
    const int g = sample_index(rng, cfg.group_fractions);
    const int c = (unit(rng) < cfg.flip_probs[g]) ? 1 - y : y;
    ds.labels[i] = y;
    ds.true_groups[i] = g;
    ds.groups[i] = g;
    ds.features(i, 0) = (2 * y - 1) * cfg.core_snr + noise(rng);
    ds.features(i, 1) = (2 * c - 1) * cfg.spurious_snr + noise(rng);
    for (int j = 2; j < cfg.dim; ++j) ds.features(i, j) = noise(rng);
  }
  return ds;
}

struct AdultConfig {
  int n = 12943;
  std::vector<double> pos_rate_per_group{0.06, 0.94, 0.94, 0.94};
  std::vector<double> group_fractions{0.005, 0.335, 0.33, 0.33};
  int dim = 20;

  void validate() const {
    if (n < 1) throw InvalidConfig("n must be >= 1");
    if (pos_rate_per_group.size() != group_fractions.size() || pos_rate_per_group.empty())
      throw InvalidConfig("pos rates and group fractions must have equal nonzero length");
    if (dim < static_cast<int>(group_fractions.size()) + 1)
      throw InvalidConfig("dim must exceed the group count (one coordinate per group bump)");
    for (double r : pos_rate_per_group)
      if (r < 0.0 || r > 1.0) throw InvalidConfig("positive rates must be in [0,1]");
    double s = 0.0;
    for (double f : group_fractions) {
      if (f <= 0.0) throw InvalidConfig("group fractions must be positive");
      s += f;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidConfig("group fractions must sum to 1");
  }
};

// Tabular-flavored counterpart: the label rate is group-dependent (severely
// imbalanced under the defaults) and each group shifts its own feature
// coordinate, so group structure is visible but noisy.
inline GroupedDataset gen_adult_like(const AdultConfig& cfg, std::uint64_t seed,
                                     Split split = Split::kTrain) {
  cfg.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  GroupedDataset ds;
  ds.split = split;
  ds.num_groups = static_cast<int>(cfg.group_fractions.size());
  ds.features = Matrix(cfg.n, cfg.dim);
  ds.labels.resize(static_cast<std::size_t>(cfg.n));
  ds.groups.resize(static_cast<std::size_t>(cfg.n));
  ds.true_groups.resize(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    const int g = sample_index(rng, cfg.group_fractions);
    const int y = (unit(rng) < cfg.pos_rate_per_group[g]) ? 1 : 0;
    ds.labels[i] = y;
    ds.true_groups[i] = g;
    ds.groups[i] = g;
    ds.features(i, 0) = (2 * y - 1) * 1.0 + noise(rng);
    for (int j = 1; j < cfg.dim; ++j)
      ds.features(i, j) = noise(rng) + (j - 1 == g ? 1.5 : 0.0);
  }
  return ds;
}

// Drops each group annotation independently with probability
// 1 - labeled_fraction. True groups stay for evaluation.
inline GroupedDataset mask_mcar(const GroupedDataset& ds, double labeled_fraction,
                                std::uint64_t seed) {
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
    throw InvalidConfig("labeled_fraction must be in (0, 1]");
  if (ds.split != Split::kTrain)
    throw InvalidConfig("group annotations can only be masked on the train split");
  GroupedDataset out = ds;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < out.groups.size(); ++i)
    if (!(unit(rng) < labeled_fraction)) out.groups[i] = kMissingGroup;
  return out;
}

inline MarginalEstimate estimate_marginals(const GroupedDataset& ds) {
  std::vector<int> counts(static_cast<std::size_t>(ds.num_groups), 0);
  int labeled = 0;
  for (int g : ds.groups) {
    if (g == kMissingGroup) continue;
    ++counts[g];
    ++labeled;
  }
  for (int j = 0; j < ds.num_groups; ++j) {
    if (counts[j] == 0)
      throw UnobservedGroup("group " + std::to_string(j) + " has no labeled sample");
  }
  MarginalEstimate est;
  est.labeled_count = labeled;
  est.p_bar.resize(static_cast<std::size_t>(ds.num_groups));
  for (int j = 0; j < ds.num_groups; ++j)
    est.p_bar[j] = counts[j] / static_cast<double>(labeled);
  return est;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// One header line `f0,...,f{d-1},y,g`, then one CSV row per sample with g = -1
// for a missing annotation. A sibling file at path + ".truth" holds the true
// group ids, one per line.
inline void write_dataset(const std::filesystem::path& path, const GroupedDataset& ds) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (int j = 0; j < ds.dim(); ++j) out << "f" << j << ",";
  out << "y,g\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) out << detail::format_double(ds.features(i, j)) << ",";
    out << ds.labels[i] << "," << ds.groups[i] << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());

  std::ofstream truth(path.string() + ".truth");
  if (!truth) throw IoError("cannot open " + path.string() + ".truth for writing");
  for (int g : ds.true_groups) truth << g << "\n";
  if (!truth) throw IoError("failed writing " + path.string() + ".truth");
}

inline GroupedDataset read_dataset(const std::filesystem::path& path,
                                   Split split = Split::kTrain) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file " + path.string());
  int dim = 0;
  {
    std::stringstream header(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(header, field, ',')) fields.push_back(field);
    if (fields.size() < 3 || fields[fields.size() - 2] != "y" || fields.back() != "g")
      throw IoError("bad header in " + path.string());
    dim = static_cast<int>(fields.size()) - 2;
  }

  std::vector<double> values;
  std::vector<int> labels, groups;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (static_cast<int>(fields.size()) != dim + 2)
      throw IoError("row " + std::to_string(rows + 1) + " of " + path.string() +
                    " has the wrong field count");
    for (int j = 0; j < dim; ++j) values.push_back(std::strtod(fields[j].c_str(), nullptr));
    labels.push_back(std::atoi(fields[dim].c_str()));
    groups.push_back(std::atoi(fields[dim + 1].c_str()));
    ++rows;
  }

  GroupedDataset ds;
  ds.split = split;
  ds.features = Matrix(rows, dim);
  ds.features.data = std::move(values);
  ds.labels = std::move(labels);
  ds.groups = std::move(groups);

  std::ifstream truth(path.string() + ".truth");
  if (truth) {
    int g;
    while (truth >> g) ds.true_groups.push_back(g);
    if (ds.true_groups.size() != static_cast<std::size_t>(rows))
      throw IoError("truth file row count does not match " + path.string());
  } else {
    for (int g : ds.groups)
      if (g == kMissingGroup)
        throw IoError("dataset has missing annotations but no truth file: " + path.string());
    ds.true_groups = ds.groups;
  }

  int max_group = 0;
  for (int g : ds.true_groups) max_group = std::max(max_group, g);
  for (int g : ds.groups) max_group = std::max(max_group, g);
  ds.num_groups = max_group + 1;
  ds.validate();
  return ds;
}

}  // namespace wdro
