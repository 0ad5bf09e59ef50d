#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed binary through the shell, capturing both streams.
CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out_file = fs::path(::testing::TempDir()) / ("cli_out_" + std::to_string(counter));
  const fs::path err_file = fs::path(::testing::TempDir()) / ("cli_err_" + std::to_string(counter));
  ++counter;
  const std::string cmd =
      std::string(WDRO_CLI_PATH) + " " + args + " >" + out_file.string() + " 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<double>> parse_matrix_csv(const std::string& text, double* objective) {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("objective,", 0) == 0) {
      *objective = std::stod(line.substr(10));
      continue;
    }
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

TEST(Cli, RequiresASubcommand) {
  const CliResult r = run_cli("");
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, AssignSolvesTheWorkedExample) {
  const fs::path cfg = fs::path(::testing::TempDir()) / "assign_worked.json";
  spit(cfg, R"({"losses":[2.0,1.5,1.0],"marginals":[0.6,0.4],"epsilon":0.0,
               "q":[0.7,0.3],"pins":[[0,0],[2,1]]})");
  const CliResult r = run_cli("assign --config " + cfg.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  double objective = -1.0;
  const auto matrix = parse_matrix_csv(r.out, &objective);
  ASSERT_EQ(matrix.size(), 3u);
  const std::vector<std::vector<double>> expect{{1.0, 0.0}, {0.8, 0.2}, {0.0, 1.0}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(matrix[i][j], expect[i][j], 1e-6);
  EXPECT_GT(objective, 0.0);
}

TEST(Cli, AssignVacuousSlackPoursIntoTheBestPricedGroup) {
  const fs::path cfg = fs::path(::testing::TempDir()) / "assign_vacuous.json";
  spit(cfg, R"({"losses":[2.0,1.5,1.0],"marginals":[0.6,0.4],"epsilon":1.0,"q":[0.7,0.3]})");
  const CliResult r = run_cli("assign --config " + cfg.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  double objective = -1.0;
  const auto matrix = parse_matrix_csv(r.out, &objective);
  ASSERT_EQ(matrix.size(), 3u);
  for (const auto& row : matrix) {
    EXPECT_NEAR(row[0], 1.0, 1e-9);
    EXPECT_NEAR(row[1], 0.0, 1e-9);
  }
}

TEST(Cli, AssignInfeasiblePinsReportTheSmallestWorkableSlack) {
  const fs::path cfg = fs::path(::testing::TempDir()) / "assign_infeasible.json";
  spit(cfg, R"({"losses":[1.0,0.5,0.2,0.1],"marginals":[0.9,0.1],"epsilon":0.0,
               "pins":[[0,1],[1,1],[2,1]]})");
  const CliResult r = run_cli("assign --config " + cfg.string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("0.65"), std::string::npos) << r.err;
}

TEST(Cli, GenDataWritesSplitsAndPrintsCounts) {
  const fs::path dir = fresh_dir("cli_gen");
  const fs::path cfg = dir / "gen.json";
  spit(cfg, R"({"dataset":{"generator":"cmnist","n_train":200,"n_val":80,"n_test":80,
               "labeled_fraction":0.25,"dim":5}})");
  const CliResult r =
      run_cli("gen-data --config " + cfg.string() + " --out " + (dir / "data").string() + " --seed 9");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("# Labeled,# UnLabeled,Total samples,# Groups"), std::string::npos);
  EXPECT_NE(r.out.find("train,"), std::string::npos);
  for (const char* name : {"train.csv", "train.csv.truth", "val.csv", "test.csv"})
    EXPECT_TRUE(fs::exists(dir / "data" / name)) << name;
  const std::string train_csv = slurp(dir / "data" / "train.csv");
  EXPECT_NE(train_csv.find(",-1\n"), std::string::npos);
  const std::string val_csv = slurp(dir / "data" / "val.csv");
  EXPECT_EQ(val_csv.find(",-1\n"), std::string::npos);

  const CliResult again =
      run_cli("gen-data --config " + cfg.string() + " --out " + (dir / "data2").string() + " --seed 9");
  ASSERT_EQ(again.exit_code, 0);
  EXPECT_EQ(slurp(dir / "data" / "train.csv"), slurp(dir / "data2" / "train.csv"));
  EXPECT_EQ(slurp(dir / "data" / "train.csv.truth"), slurp(dir / "data2" / "train.csv.truth"));
}

TEST(Cli, TrainWritesByteStableMetricsAndParams) {
  const fs::path dir = fresh_dir("cli_train");
  const fs::path cfg = dir / "train.json";
  spit(cfg, R"({"dataset":{"generator":"cmnist","n_train":200,"n_val":80,"n_test":80,
                "labeled_fraction":0.3,"dim":5},
               "train":{"algorithm":"worstoff_dro","epochs":3,"batch_size":50,
                "epsilon":0.1,"model":{"kind":"linear"}}})");
  const std::string args = "train --config " + cfg.string() + " --seed 21 --out ";
  const CliResult r = run_cli(args + (dir / "run1").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  ASSERT_TRUE(fs::exists(dir / "run1" / "metrics.jsonl"));
  ASSERT_TRUE(fs::exists(dir / "run1" / "params.json"));

  std::istringstream lines(slurp(dir / "run1" / "metrics.jsonl"));
  std::string line;
  int train_lines = 0, val_lines = 0, test_lines = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    ASSERT_TRUE(j.contains("q"));
    ASSERT_EQ(j.at("q").size(), 3u);
    const std::string split = j.at("split").get<std::string>();
    train_lines += split == "train";
    val_lines += split == "val";
    test_lines += split == "test";
  }
  EXPECT_EQ(train_lines, 3);
  EXPECT_EQ(val_lines, 1);
  EXPECT_EQ(test_lines, 1);

  const CliResult again = run_cli(args + (dir / "run2").string());
  ASSERT_EQ(again.exit_code, 0);
  EXPECT_EQ(slurp(dir / "run1" / "metrics.jsonl"), slurp(dir / "run2" / "metrics.jsonl"));
  EXPECT_EQ(slurp(dir / "run1" / "params.json"), slurp(dir / "run2" / "params.json"));
}

TEST(Cli, ErmOnCleanSeparableDataReachesHighTrainAccuracy) {
  const fs::path dir = fresh_dir("cli_trivial");
  const fs::path cfg = dir / "train.json";
  spit(cfg, R"({"dataset":{"generator":"cmnist","n_train":400,"n_val":0,"n_test":0,
                "flip_probs":[0.0,0.0,0.0],"spurious_snr":4.0,"dim":5},
               "train":{"algorithm":"erm","epochs":40,"eta_w":0.5,
                "model":{"kind":"linear"}}})");
  const CliResult r =
      run_cli("train --config " + cfg.string() + " --seed 2 --out " + (dir / "run").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const nlohmann::json last = nlohmann::json::parse(r.out.substr(0, r.out.find('\n')));
  EXPECT_EQ(last.at("split"), "train");
  EXPECT_GE(last.at("acc_overall").get<double>(), 0.99);
}

TEST(Cli, SweepGridProducesRowsAndSelection) {
  const fs::path dir = fresh_dir("cli_sweep");
  const fs::path cfg = dir / "sweep.json";
  spit(cfg, R"({"dataset":{"generator":"cmnist","n_train":150,"n_val":60,"n_test":60,
                "labeled_fraction":0.5,"dim":5},
               "sweep":{"algorithm":"erm","eta_w":[0.1,0.01],"weight_decay":[0.0,0.001],
                "epochs":2,"model":{"kind":"linear"}}})");
  const CliResult r = run_cli("sweep --config " + cfg.string() + " --seed 3 --jobs 2 --out " +
                              (dir / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::istringstream lines(slurp(dir / "out" / "sweep.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 5);  // header + 2x2 grid
  const nlohmann::json sel = nlohmann::json::parse(slurp(dir / "out" / "selection.json"));
  EXPECT_GE(sel.at("config_id").get<int>(), 0);
  EXPECT_LT(sel.at("config_id").get<int>(), 4);
  EXPECT_EQ(sel.at("algorithm"), "erm");
}

TEST(Cli, SinglePointSweepSelectsThatConfig) {
  const fs::path dir = fresh_dir("cli_sweep1");
  const fs::path cfg = dir / "sweep.json";
  spit(cfg, R"({"dataset":{"generator":"cmnist","n_train":120,"n_val":60,"n_test":60,"dim":5},
               "sweep":{"algorithm":"erm","eta_w":0.05,"epochs":2,"model":{"kind":"linear"}}})");
  const CliResult r =
      run_cli("sweep --config " + cfg.string() + " --seed 3 --out " + (dir / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const nlohmann::json sel = nlohmann::json::parse(slurp(dir / "out" / "selection.json"));
  EXPECT_EQ(sel.at("config_id").get<int>(), 0);
  EXPECT_DOUBLE_EQ(sel.at("eta_w").get<double>(), 0.05);
}

TEST(Cli, VerifySolverAndLowerBoundPass) {
  const CliResult r = run_cli("verify --solver --lemma1 --instances 60 --seed 17");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const nlohmann::json reports = nlohmann::json::parse(r.out);
  ASSERT_EQ(reports.size(), 2u);
  for (const auto& rep : reports) EXPECT_TRUE(rep.at("pass").get<bool>());
}

TEST(Cli, VerifyWithoutAFlagIsAUsageError) {
  const CliResult r = run_cli("verify");
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, AblateEpsilonWritesTheFixedColumnSet) {
  const fs::path dir = fresh_dir("cli_abl");
  const fs::path cfg = dir / "abl.json";
  spit(cfg, R"({"dataset":{"generator":"cmnist","n_train":150,"n_val":0,"n_test":60,
                "labeled_fraction":0.4,"dim":5},
               "train":{"algorithm":"worstoff_dro","epochs":2,"model":{"kind":"linear"}},
               "eps_values":[0.01,0.5],"seeds":[1,2]})");
  const CliResult r = run_cli("ablate-eps --config " + cfg.string() + " --jobs 2 --out " +
                              (dir / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string csv = slurp(dir / "out" / "ablate_eps.csv");
  EXPECT_EQ(csv.rfind("config_id,fraction_or_eps,seed_count,min_acc_mean,min_acc_sd,"
                      "avg_acc_mean,avg_acc_sd\n",
                      0),
            0u);
  EXPECT_NE(csv.find("worstoff_dro,0.01,2,"), std::string::npos);
  EXPECT_NE(csv.find("worstoff_dro,0.5,2,"), std::string::npos);
}

TEST(Cli, MissingConfigFieldIsAConfigError) {
  const fs::path cfg = fs::path(::testing::TempDir()) / "bad.json";
  spit(cfg, R"({"dataset":{"generator":"cmnist","n_train":50,"dim":5}})");
  const CliResult r = run_cli("train --config " + cfg.string());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("train"), std::string::npos);
}

TEST(Cli, UnreadableConfigIsARuntimeError) {
  const CliResult r = run_cli("train --config /nonexistent/nowhere.json");
  EXPECT_EQ(r.exit_code, 2);
}

}  // namespace
