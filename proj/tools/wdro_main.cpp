#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wdro/assignment.hpp"
#include "wdro/bounds.hpp"
#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/eval.hpp"
#include "wdro/experiments.hpp"
#include "wdro/predictor.hpp"
#include "wdro/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerification = 3;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw wdro::IoError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw wdro::ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

// json::exception carries little context, so config lookups funnel through
// here to name the offending key.
template <typename T>
T get_field(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw wdro::ConfigError("config field '" + key + "' has the wrong type");
  }
}

template <typename T>
T require_field(const json& j, const std::string& key) {
  if (!j.contains(key)) throw wdro::ConfigError("config is missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw wdro::ConfigError("config field '" + key + "' has the wrong type");
  }
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

wdro::ArchSpec parse_arch(const json& j) {
  wdro::ArchSpec arch;
  const std::string kind = get_field<std::string>(j, "kind", "linear");
  if (kind == "linear") {
    arch.kind = wdro::ModelKind::kLinear;
  } else if (kind == "mlp") {
    arch.kind = wdro::ModelKind::kMlp;
    arch.hidden = require_field<std::vector<int>>(j, "hidden");
    const std::string act = get_field<std::string>(j, "activation", "relu");
    if (act == "relu")
      arch.activation = wdro::Activation::kRelu;
    else if (act == "tanh")
      arch.activation = wdro::Activation::kTanh;
    else
      throw wdro::ConfigError("unknown activation: " + act);
  } else {
    throw wdro::ConfigError("unknown model kind: " + kind);
  }
  arch.validate();
  return arch;
}

wdro::TrainConfig parse_train_config(const json& j, std::uint64_t seed) {
  wdro::TrainConfig cfg;
  cfg.algorithm = wdro::algorithm_from_name(require_field<std::string>(j, "algorithm"));
  cfg.eta_w = get_field<double>(j, "eta_w", cfg.eta_w);
  cfg.eta_q = get_field<double>(j, "eta_q", cfg.eta_q);
  cfg.weight_decay = get_field<double>(j, "weight_decay", cfg.weight_decay);
  cfg.epsilon = get_field<double>(j, "epsilon", cfg.epsilon);
  cfg.eta_udro = get_field<double>(j, "eta_udro", cfg.eta_udro);
  cfg.batch_size = get_field<int>(j, "batch_size", cfg.batch_size);
  cfg.epochs = get_field<int>(j, "epochs", cfg.epochs);
  cfg.audit_ground_truth = get_field<bool>(j, "audit_ground_truth", false);
  if (j.contains("model")) cfg.model = parse_arch(j.at("model"));
  if (j.contains("marginals")) cfg.marginals = require_field<std::vector<double>>(j, "marginals");
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

struct DataBundle {
  wdro::GroupedDataset train;
  std::optional<wdro::GroupedDataset> val;
  std::optional<wdro::GroupedDataset> test;
};

// Exactly one dataset source: a directory of previously written files, or an
// inline generator block. Generated splits draw from the master seed through
// fixed labels, so any command given the same seed sees the same data.
DataBundle build_datasets(const json& dataset_cfg, std::uint64_t master_seed) {
  const bool has_path = dataset_cfg.contains("path");
  const bool has_generator = dataset_cfg.contains("generator");
  if (has_path == has_generator)
    throw wdro::ConfigError("dataset needs exactly one of 'path' or 'generator'");

  DataBundle bundle;
  if (has_path) {
    const fs::path dir = require_field<std::string>(dataset_cfg, "path");
    bundle.train = wdro::read_dataset(dir / "train.csv", wdro::Split::kTrain);
    if (fs::exists(dir / "val.csv"))
      bundle.val = wdro::read_dataset(dir / "val.csv", wdro::Split::kVal);
    if (fs::exists(dir / "test.csv"))
      bundle.test = wdro::read_dataset(dir / "test.csv", wdro::Split::kTest);
    return bundle;
  }

  const std::string generator = require_field<std::string>(dataset_cfg, "generator");
  const int n_train = get_field<int>(dataset_cfg, "n_train", 20000);
  const int n_val = get_field<int>(dataset_cfg, "n_val", 5000);
  const int n_test = get_field<int>(dataset_cfg, "n_test", 5000);
  const double labeled_fraction = get_field<double>(dataset_cfg, "labeled_fraction", 1.0);

  auto generate = [&](int n, wdro::Split split, const char* label) {
    const std::uint64_t seed = wdro::derive_seed(master_seed, label);
    if (generator == "cmnist") {
      wdro::CmnistConfig cfg;
      cfg.n = n;
      cfg.flip_probs = get_field<std::vector<double>>(dataset_cfg, "flip_probs", cfg.flip_probs);
      cfg.group_fractions =
          get_field<std::vector<double>>(dataset_cfg, "group_fractions", cfg.group_fractions);
      cfg.core_snr = get_field<double>(dataset_cfg, "core_snr", cfg.core_snr);
      cfg.spurious_snr = get_field<double>(dataset_cfg, "spurious_snr", cfg.spurious_snr);
      cfg.dim = get_field<int>(dataset_cfg, "dim", cfg.dim);
      return wdro::gen_cmnist_like(cfg, seed, split);
    }
    if (generator == "adult") {
      wdro::AdultConfig cfg;
      cfg.n = n;
      cfg.pos_rate_per_group = get_field<std::vector<double>>(dataset_cfg, "pos_rate_per_group",
                                                             cfg.pos_rate_per_group);
      cfg.group_fractions =
          get_field<std::vector<double>>(dataset_cfg, "group_fractions", cfg.group_fractions);
      cfg.dim = get_field<int>(dataset_cfg, "dim", cfg.dim);
      return wdro::gen_adult_like(cfg, seed, split);
    }
    throw wdro::ConfigError("unknown generator: " + generator);
  };

  bundle.train = generate(n_train, wdro::Split::kTrain, "data-train");
  if (labeled_fraction < 1.0)
    bundle.train = wdro::mask_mcar(bundle.train, labeled_fraction,
                                   wdro::derive_seed(master_seed, "mask"));
  if (n_val > 0) bundle.val = generate(n_val, wdro::Split::kVal, "data-val");
  if (n_test > 0) bundle.test = generate(n_test, wdro::Split::kTest, "data-test");
  return bundle;
}

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw wdro::IoError("cannot create output directory " + out.string());
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw wdro::IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw wdro::IoError("failed writing " + path.string());
}

// Wall-clock timestamps live only here; every other output is byte-stable.
void append_log(const fs::path& out, const std::string& message) {
  std::ofstream log(out / "run.log", std::ios::app);
  if (!log) return;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%F %T", std::localtime(&now));
  log << stamp << " " << message << "\n";
}

std::string counts_table(const DataBundle& bundle) {
  std::ostringstream os;
  os << "split,# Labeled,# UnLabeled,Total samples,# Groups\n";
  auto row = [&os](const char* name, const wdro::GroupedDataset& ds) {
    int labeled = 0;
    for (int g : ds.groups)
      if (g != wdro::kMissingGroup) ++labeled;
    os << name << "," << labeled << "," << ds.n() - labeled << "," << ds.n() << ","
       << ds.num_groups << "\n";
  };
  row("train", bundle.train);
  if (bundle.val) row("val", *bundle.val);
  if (bundle.test) row("test", *bundle.test);
  return os.str();
}

int cmd_gen_data(const json& config, const fs::path& out, std::uint64_t seed) {
  const DataBundle bundle = build_datasets(require_field<json>(config, "dataset"), seed);
  ensure_out_dir(out);
  wdro::write_dataset(out / "train.csv", bundle.train);
  if (bundle.val) wdro::write_dataset(out / "val.csv", *bundle.val);
  if (bundle.test) wdro::write_dataset(out / "test.csv", *bundle.test);
  std::cout << counts_table(bundle);
  return kExitOk;
}

wdro::RunRecord record_from_eval(const wdro::EvalResult& ev, wdro::Split split, int epoch,
                                 const wdro::TrainedRun& run) {
  wdro::RunRecord rec;
  rec.epoch = epoch;
  rec.split = wdro::split_name(split);
  rec.loss = ev.loss;
  rec.acc_overall = ev.acc_overall;
  rec.acc_group = ev.acc_group;
  rec.q = run.q.values;
  rec.eps_relaxations = run.eps_relaxations_total;
  return rec;
}

int cmd_train(const json& config, const fs::path& out, std::uint64_t seed) {
  const DataBundle bundle = build_datasets(require_field<json>(config, "dataset"), seed);
  const wdro::TrainConfig cfg = parse_train_config(require_field<json>(config, "train"), seed);
  ensure_out_dir(out);
  append_log(out, "train start: algorithm=" + std::string(wdro::algorithm_name(cfg.algorithm)));

  const wdro::TrainedRun run = wdro::train(bundle.train, cfg);

  std::ostringstream metrics;
  for (const wdro::RunRecord& rec : run.records) metrics << wdro::run_record_json(rec) << "\n";
  const int last_epoch = std::max(0, cfg.epochs - 1);
  std::vector<wdro::RunRecord> finals;
  if (bundle.val)
    finals.push_back(
        record_from_eval(wdro::evaluate(run.params, *bundle.val), wdro::Split::kVal, last_epoch, run));
  if (bundle.test)
    finals.push_back(record_from_eval(wdro::evaluate(run.params, *bundle.test), wdro::Split::kTest,
                                      last_epoch, run));
  for (const wdro::RunRecord& rec : finals) metrics << wdro::run_record_json(rec) << "\n";
  write_text(out / "metrics.jsonl", metrics.str());
  wdro::save_params(out / "params.json", run.params);

  for (const std::string& w : run.warnings) append_log(out, "warning: " + w);
  append_log(out, "train done");
  if (!run.records.empty()) std::cout << wdro::run_record_json(run.records.back()) << "\n";
  for (const wdro::RunRecord& rec : finals) std::cout << wdro::run_record_json(rec) << "\n";
  return kExitOk;
}

// Cartesian grid over the list-valued hyperparameters, rightmost fastest.
// Scalars are one-point axes, so a fully scalar block is a single run.
std::vector<wdro::TrainConfig> expand_grid(const json& sweep_cfg, std::uint64_t seed) {
  auto axis = [&sweep_cfg](const char* key, double fallback) {
    if (!sweep_cfg.contains(key)) return std::vector<double>{fallback};
    const json& v = sweep_cfg.at(key);
    if (v.is_array()) {
      const auto vals = v.get<std::vector<double>>();
      if (vals.empty()) throw wdro::ConfigError(std::string("grid axis '") + key + "' is empty");
      return vals;
    }
    return std::vector<double>{v.get<double>()};
  };
  std::vector<std::string> algorithms;
  if (sweep_cfg.contains("algorithm") && sweep_cfg.at("algorithm").is_array())
    algorithms = sweep_cfg.at("algorithm").get<std::vector<std::string>>();
  else
    algorithms.push_back(require_field<std::string>(sweep_cfg, "algorithm"));

  const std::vector<double> eta_ws = axis("eta_w", 0.1);
  const std::vector<double> eta_qs = axis("eta_q", 0.1);
  const std::vector<double> decays = axis("weight_decay", 0.0);
  const std::vector<double> epsilons = axis("epsilon", 0.01);
  const std::vector<double> eta_udros = axis("eta_udro", 0.5);

  json point = sweep_cfg;
  std::vector<wdro::TrainConfig> configs;
  for (const std::string& alg : algorithms)
    for (double eta_w : eta_ws)
      for (double eta_q : eta_qs)
        for (double decay : decays)
          for (double eps : epsilons)
            for (double eta_udro : eta_udros) {
              point["algorithm"] = alg;
              point["eta_w"] = eta_w;
              point["eta_q"] = eta_q;
              point["weight_decay"] = decay;
              point["epsilon"] = eps;
              point["eta_udro"] = eta_udro;
              configs.push_back(parse_train_config(point, seed));
            }
  return configs;
}

json sweep_entry_json(const wdro::SweepEntry& e, int config_id, int minority) {
  json j;
  j["config_id"] = config_id;
  j["algorithm"] = wdro::algorithm_name(e.config.algorithm);
  j["eta_w"] = e.config.eta_w;
  j["eta_q"] = e.config.eta_q;
  j["weight_decay"] = e.config.weight_decay;
  j["epsilon"] = e.config.epsilon;
  j["eta_udro"] = e.config.eta_udro;
  if (e.ok()) {
    j["val_acc_overall"] = e.val_record.acc_overall;
    j["val_acc_minority"] = e.val_record.acc_group[minority];
    j["test_acc_overall"] = e.test_record.acc_overall;
    j["test_acc_minority"] = e.test_record.acc_group[minority];
  } else {
    j["error"] = e.error;
  }
  return j;
}

int cmd_sweep(const json& config, const fs::path& out, std::uint64_t seed, int jobs) {
  const DataBundle bundle = build_datasets(require_field<json>(config, "dataset"), seed);
  if (!bundle.val || !bundle.test)
    throw wdro::ConfigError("sweep needs val and test splits");
  const std::vector<wdro::TrainConfig> configs =
      expand_grid(require_field<json>(config, "sweep"), seed);
  ensure_out_dir(out);
  append_log(out, "sweep start: " + std::to_string(configs.size()) + " configs");

  const wdro::SweepResult sweep =
      wdro::run_sweep(bundle.train, *bundle.val, *bundle.test, configs, jobs);
  const int minority = wdro::minority_group(bundle.train);

  std::ostringstream csv;
  csv << "config_id,algorithm,eta_w,eta_q,weight_decay,epsilon,eta_udro,"
         "val_loss,val_acc_overall,val_acc_minority,test_loss,test_acc_overall,"
         "test_acc_minority,error\n";
  for (std::size_t i = 0; i < sweep.entries.size(); ++i) {
    const wdro::SweepEntry& e = sweep.entries[i];
    csv << i << "," << wdro::algorithm_name(e.config.algorithm) << "," << format_g(e.config.eta_w)
        << "," << format_g(e.config.eta_q) << "," << format_g(e.config.weight_decay) << ","
        << format_g(e.config.epsilon) << "," << format_g(e.config.eta_udro) << ",";
    if (e.ok()) {
      csv << format_g(e.val_record.loss) << "," << format_g(e.val_record.acc_overall) << ","
          << format_g(e.val_record.acc_group[minority]) << "," << format_g(e.test_record.loss)
          << "," << format_g(e.test_record.acc_overall) << ","
          << format_g(e.test_record.acc_group[minority]) << ",";
    } else {
      csv << ",,,,,," << e.error;
    }
    csv << "\n";
  }
  write_text(out / "sweep.csv", csv.str());

  const int winner = wdro::nvp_select(sweep, minority);
  json selection = sweep_entry_json(sweep.entries[winner], winner, minority);
  write_text(out / "selection.json", selection.dump(2) + "\n");
  append_log(out, "sweep done");
  std::cout << selection.dump() << "\n";
  return kExitOk;
}

int cmd_verify_solver(int instances, std::uint64_t seed, json& report) {
  wdro::Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int failures = 0;
  for (int t = 0; t < instances; ++t) {
    const int m = 2 + static_cast<int>(rng() % 2);
    const int n = 1 + static_cast<int>(rng() % 8);
    wdro::SolveProblem problem;
    problem.losses.resize(static_cast<std::size_t>(n));
    for (double& l : problem.losses) l = 5.0 * unit(rng);
    problem.weights.values.resize(static_cast<std::size_t>(m));
    double qsum = 0.0;
    for (double& v : problem.weights.values) qsum += (v = 0.05 + unit(rng));
    for (double& v : problem.weights.values) v /= qsum;
    problem.constraints.marginals.resize(static_cast<std::size_t>(m));
    double psum = 0.0;
    for (double& p : problem.constraints.marginals) psum += (p = 0.1 + unit(rng));
    for (double& p : problem.constraints.marginals) p /= psum;
    for (int i = 0; i < n; ++i)
      if (unit(rng) < 0.4)
        problem.constraints.pinned.emplace_back(i, static_cast<int>(rng() % m));
    problem.constraints.epsilon = 0.0;
    const wdro::FeasibilityReport feas = wdro::check_feasible(problem.constraints, n);
    problem.constraints.epsilon = feas.min_epsilon + 0.02 + 0.3 * unit(rng);

    const wdro::SolveResult greedy = wdro::solve_assignments(problem);
    const wdro::SolveResult oracle = wdro::brute_force_oracle(problem);
    const auto violation = wdro::check_assignment(greedy.assignment, problem.constraints, 1e-9);
    if (std::abs(greedy.objective - oracle.objective) > 1e-6 || violation) ++failures;
  }
  report["check"] = "solver_oracle";
  report["instances"] = instances;
  report["failures"] = failures;
  report["pass"] = failures == 0;
  return failures == 0 ? kExitOk : kExitVerification;
}

int cmd_verify_bounds(long long trials, std::uint64_t seed, json& report) {
  int failures = 0;
  const std::vector<double> p_star{0.45, 0.45, 0.10};
  json settings = json::array();
  for (const long long n : {100LL, 1000LL, 10000LL}) {
    for (const double eps : {0.02, 0.05, 0.1}) {
      const wdro::CoverageReport cov =
          wdro::monte_carlo_coverage(p_star, n, eps, trials, wdro::derive_seed(seed, "true"));
      const double sigma = std::sqrt(std::max(cov.analytic_bound * (1.0 - cov.analytic_bound),
                                              1e-12) /
                                     static_cast<double>(trials));
      bool ok = true;
      if (cov.analytic_bound > 0.0)
        for (double f : cov.per_group_frequency)
          if (f < cov.analytic_bound - 3.0 * sigma) ok = false;
      if (!ok) ++failures;
      json s;
      s["n"] = n;
      s["eps"] = eps;
      s["bound"] = cov.analytic_bound;
      s["min_frequency"] =
          *std::min_element(cov.per_group_frequency.begin(), cov.per_group_frequency.end());
      s["pass"] = ok;
      settings.push_back(s);
    }
  }
  for (const long long n : {100LL, 1000LL, 10000LL}) {
    for (const long long k : {50LL, 500LL}) {
      for (const double eps : {0.02, 0.05, 0.1}) {
        for (const double delta : {0.05, 0.1}) {
          const wdro::CoverageReport cov = wdro::monte_carlo_coverage_estimated(
              p_star, n, k, eps, delta, trials, wdro::derive_seed(seed, "estimated"));
          const double sigma = std::sqrt(
              std::max(cov.analytic_bound * (1.0 - cov.analytic_bound), 1e-12) /
              static_cast<double>(trials));
          bool ok = true;
          if (cov.analytic_bound > 0.0)
            for (double f : cov.per_group_frequency)
              if (f < cov.analytic_bound - 3.0 * sigma) ok = false;
          if (!ok) ++failures;
          json s;
          s["n"] = n;
          s["k"] = k;
          s["eps"] = eps;
          s["delta"] = delta;
          s["bound"] = cov.analytic_bound;
          s["min_frequency"] =
              *std::min_element(cov.per_group_frequency.begin(), cov.per_group_frequency.end());
          s["pass"] = ok;
          settings.push_back(s);
        }
      }
    }
  }
  report["check"] = "coverage_bounds";
  report["trials"] = trials;
  report["failures"] = failures;
  report["settings"] = settings;
  report["pass"] = failures == 0;
  return failures == 0 ? kExitOk : kExitVerification;
}

int cmd_verify_lower_bound(int instances, std::uint64_t seed, json& report) {
  const wdro::LowerBoundReport r = wdro::verify_groupdro_lower_bound(instances, seed);
  report["check"] = "assignment_lower_bound";
  report["instances"] = r.instances;
  report["violations"] = r.violations;
  report["counterexamples"] = r.counterexamples;
  report["pass"] = r.pass();
  return r.pass() ? kExitOk : kExitVerification;
}

int cmd_assign(const json& config) {
  wdro::SolveProblem problem;
  if (config.contains("losses_file")) {
    const std::string path = require_field<std::string>(config, "losses_file");
    std::ifstream in(path);
    if (!in) throw wdro::IoError("cannot open losses file " + path);
    double v = 0.0;
    while (in >> v) problem.losses.push_back(v);
    if (problem.losses.empty()) throw wdro::IoError("losses file " + path + " holds no numbers");
  } else {
    problem.losses = require_field<std::vector<double>>(config, "losses");
  }
  problem.constraints.marginals = require_field<std::vector<double>>(config, "marginals");
  problem.constraints.epsilon = require_field<double>(config, "epsilon");
  if (config.contains("q"))
    problem.weights.values = require_field<std::vector<double>>(config, "q");
  else
    problem.weights =
        wdro::GroupWeights::uniform(static_cast<int>(problem.constraints.marginals.size()));
  if (config.contains("pins"))
    for (const auto& pin : require_field<std::vector<std::vector<int>>>(config, "pins")) {
      if (pin.size() != 2) throw wdro::ConfigError("each pin is a [row, group] pair");
      problem.constraints.pinned.emplace_back(pin[0], pin[1]);
    }

  const wdro::SolveResult solved = wdro::solve_assignments(problem);
  for (int i = 0; i < solved.assignment.num_samples(); ++i) {
    for (int j = 0; j < solved.assignment.num_groups(); ++j)
      std::cout << (j ? "," : "") << format_g(solved.assignment.values(i, j));
    std::cout << "\n";
  }
  std::cout << "objective," << format_g(solved.objective) << "\n";
  return kExitOk;
}

std::vector<std::uint64_t> parse_seeds(const json& config, std::uint64_t master) {
  if (config.contains("seeds")) return require_field<std::vector<std::uint64_t>>(config, "seeds");
  return {master, master + 1, master + 2};
}

int cmd_ablate_fraction(const json& config, const fs::path& out, std::uint64_t seed, int jobs) {
  const DataBundle bundle = build_datasets(require_field<json>(config, "dataset"), seed);
  if (!bundle.test) throw wdro::ConfigError("fraction ablation needs a test split");
  const wdro::TrainConfig base = parse_train_config(require_field<json>(config, "train"), seed);
  const auto fractions = require_field<std::vector<double>>(config, "fractions");
  const std::vector<wdro::AblationRow> rows = wdro::ablate_labeled_fraction(
      bundle.train, *bundle.test, base, fractions, parse_seeds(config, seed), jobs);
  const std::string csv = wdro::ablation_csv(rows);
  ensure_out_dir(out);
  write_text(out / "ablate_fraction.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_ablate_eps(const json& config, const fs::path& out, std::uint64_t seed, int jobs) {
  const DataBundle bundle = build_datasets(require_field<json>(config, "dataset"), seed);
  if (!bundle.test) throw wdro::ConfigError("epsilon ablation needs a test split");
  json train_cfg = require_field<json>(config, "train");
  train_cfg["algorithm"] = "worstoff_dro";
  const wdro::TrainConfig base = parse_train_config(train_cfg, seed);
  const auto eps_values = require_field<std::vector<double>>(config, "eps_values");
  const std::vector<wdro::AblationRow> rows = wdro::ablate_epsilon(
      bundle.train, *bundle.test, base, eps_values, parse_seeds(config, seed), jobs);
  const std::string csv = wdro::ablation_csv(rows);
  ensure_out_dir(out);
  write_text(out / "ablate_eps.csv", csv);
  std::cout << csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"worst-off group-robust training toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;
  app.add_option("--config", config_path, "path to a JSON config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed; every consumer derives from it");
  app.add_option("--jobs", jobs, "worker threads for sweeps and ablations")
      ->check(CLI::PositiveNumber);

  CLI::App* gen = app.add_subcommand("gen-data", "generate dataset files and print a counts table");
  CLI::App* tr = app.add_subcommand("train", "train one model; writes metrics.jsonl and params.json");
  CLI::App* sweep = app.add_subcommand("sweep", "grid search; writes sweep.csv and selection.json");
  CLI::App* verify = app.add_subcommand("verify", "run a property suite and report as JSON");
  bool verify_bounds = false, verify_solver = false, verify_lower = false;
  int verify_instances = 200;
  long long verify_trials = 10000;
  verify->add_flag("--bounds", verify_bounds, "coverage frequencies dominate analytic bounds");
  verify->add_flag("--solver", verify_solver, "greedy solver matches the exhaustive oracle");
  verify->add_flag("--lemma1", verify_lower,
                   "solver value dominates the hard-label objective at exact counts");
  verify->add_option("--instances", verify_instances, "random instances per solver-style check");
  verify->add_option("--trials", verify_trials, "Monte Carlo trials per coverage setting");
  CLI::App* assign = app.add_subcommand("assign", "solve one assignment instance, print CSV");
  CLI::App* abl_frac =
      app.add_subcommand("ablate-fraction", "re-mask at each labeled fraction and aggregate");
  CLI::App* abl_eps = app.add_subcommand("ablate-eps", "sweep the constraint slack and aggregate");
  // Let the global flags appear after the subcommand name as well.
  for (CLI::App* sub : {gen, tr, sweep, verify, assign, abl_frac, abl_eps}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto need_config = [&]() {
      if (config_path.empty()) throw wdro::ConfigError("--config is required for this command");
      return load_json_file(config_path);
    };
    if (gen->parsed()) return cmd_gen_data(need_config(), out_dir, seed);
    if (tr->parsed()) return cmd_train(need_config(), out_dir, seed);
    if (sweep->parsed()) return cmd_sweep(need_config(), out_dir, seed, jobs);
    if (assign->parsed()) return cmd_assign(need_config());
    if (abl_frac->parsed()) return cmd_ablate_fraction(need_config(), out_dir, seed, jobs);
    if (abl_eps->parsed()) return cmd_ablate_eps(need_config(), out_dir, seed, jobs);
    if (verify->parsed()) {
      if (!verify_bounds && !verify_solver && !verify_lower)
        throw wdro::ConfigError("verify needs at least one of --bounds, --solver, --lemma1");
      int rv = kExitOk;
      json reports = json::array();
      if (verify_solver) {
        json r;
        rv = std::max(rv, cmd_verify_solver(verify_instances, wdro::derive_seed(seed, "solver"), r));
        reports.push_back(r);
      }
      if (verify_lower) {
        json r;
        rv = std::max(
            rv, cmd_verify_lower_bound(verify_instances, wdro::derive_seed(seed, "lower"), r));
        reports.push_back(r);
      }
      if (verify_bounds) {
        json r;
        rv = std::max(rv, cmd_verify_bounds(verify_trials, wdro::derive_seed(seed, "bounds"), r));
        reports.push_back(r);
      }
      std::cout << reports.dump(2) << "\n";
      return rv;
    }
  } catch (const wdro::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
