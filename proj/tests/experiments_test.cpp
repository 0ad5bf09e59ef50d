#include "wdro/experiments.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <vector>

#include "wdro/data.hpp"

namespace wdro {
namespace {

SweepResult fake_sweep(const std::vector<double>& overall, const std::vector<double>& minority) {
  SweepResult sweep;
  sweep.entries.resize(overall.size());
  for (std::size_t i = 0; i < overall.size(); ++i) {
    sweep.entries[i].val_record.acc_overall = overall[i];
    sweep.entries[i].val_record.acc_group = {0.9, minority[i]};
  }
  return sweep;
}

TEST(NvpSelect, ShortlistsByOverallThenPicksBestMinority) {
  // Config 2 has the best minority accuracy overall but misses the top-5
  // shortlist; config 4 wins among the shortlisted.
  const SweepResult sweep = fake_sweep({0.90, 0.95, 0.80, 0.93, 0.92, 0.94, 0.91},
                                       {0.50, 0.20, 0.99, 0.60, 0.70, 0.60, 0.65});
  EXPECT_EQ(nvp_select(sweep, 1), 4);
}

TEST(NvpSelect, MinorityTieResolvesToEarlierConfig) {
  const SweepResult sweep = fake_sweep({0.90, 0.95, 0.80, 0.93, 0.92, 0.94, 0.91},
                                       {0.50, 0.20, 0.99, 0.60, 0.60, 0.60, 0.55});
  EXPECT_EQ(nvp_select(sweep, 1), 3);
}

TEST(NvpSelect, OverallTiesKeepConfigOrderInShortlist) {
  // Six configs tie on overall accuracy; the shortlist keeps the first five,
  // so the last config's perfect minority score is never considered.
  const SweepResult sweep = fake_sweep({0.9, 0.9, 0.9, 0.9, 0.9, 0.9},
                                       {0.1, 0.2, 0.3, 0.2, 0.1, 1.0});
  EXPECT_EQ(nvp_select(sweep, 1), 2);
}

TEST(NvpSelect, FailedRunsAreExcluded) {
  SweepResult sweep = fake_sweep({0.99, 0.90}, {0.9, 0.5});
  sweep.entries[0].error = "boom";
  EXPECT_EQ(nvp_select(sweep, 1), 1);
  sweep.entries[1].error = "boom";
  EXPECT_THROW(nvp_select(sweep, 1), EmptySplit);
}

TEST(NvpSelect, RejectsOutOfRangeMinority) {
  const SweepResult sweep = fake_sweep({0.9}, {0.5});
  EXPECT_THROW(nvp_select(sweep, 7), ShapeMismatch);
}

TEST(ParallelFor, CoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(100);
  for (auto& h : hits) h = 0;
  detail::parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, PropagatesTheFirstException) {
  EXPECT_THROW(detail::parallel_for(20, 4,
                                    [](std::size_t i) {
                                      if (i == 7) throw InvalidConfig("task failed");
                                    }),
               InvalidConfig);
}

TEST(MeanSd, SampleStatistics) {
  const detail::MeanSd one = detail::mean_sd({0.8});
  EXPECT_DOUBLE_EQ(one.mean, 0.8);
  EXPECT_DOUBLE_EQ(one.sd, 0.0);
  const detail::MeanSd two = detail::mean_sd({0.8, 0.9});
  EXPECT_NEAR(two.mean, 0.85, 1e-15);
  EXPECT_NEAR(two.sd, 0.07071067811865475, 1e-12);
}

TEST(AblationCsv, PinnedHeaderAndRows) {
  AblationRow a;
  a.config_id = "worstoff_dro";
  a.fraction_or_eps = 0.1;
  a.seed_count = 3;
  a.min_acc_mean = 0.625;
  a.min_acc_sd = 0.03125;
  a.avg_acc_mean = 0.875;
  a.avg_acc_sd = 0.015625;
  const std::string csv = ablation_csv({a});
  EXPECT_EQ(csv,
            "config_id,fraction_or_eps,seed_count,min_acc_mean,min_acc_sd,avg_acc_mean,"
            "avg_acc_sd\n"
            "worstoff_dro,0.1,3,0.625,0.03125,0.875,0.015625\n");
}

class SweepFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    CmnistConfig cfg;
    cfg.n = 60;
    cfg.dim = 4;
    train_ds_ = new GroupedDataset(gen_cmnist_like(cfg, 1, Split::kTrain));
    cfg.n = 40;
    val_ds_ = new GroupedDataset(gen_cmnist_like(cfg, 2, Split::kVal));
    test_ds_ = new GroupedDataset(gen_cmnist_like(cfg, 3, Split::kTest));
  }
  static void TearDownTestSuite() {
    delete train_ds_;
    delete val_ds_;
    delete test_ds_;
    train_ds_ = val_ds_ = test_ds_ = nullptr;
  }

  static TrainConfig quick(Algorithm a, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.algorithm = a;
    cfg.epochs = 2;
    cfg.seed = seed;
    cfg.epsilon = 0.2;
    return cfg;
  }

  static GroupedDataset* train_ds_;
  static GroupedDataset* val_ds_;
  static GroupedDataset* test_ds_;
};

GroupedDataset* SweepFixture::train_ds_ = nullptr;
GroupedDataset* SweepFixture::val_ds_ = nullptr;
GroupedDataset* SweepFixture::test_ds_ = nullptr;

TEST_F(SweepFixture, RunsEveryConfigAndKeepsOrder) {
  const std::vector<TrainConfig> configs{quick(Algorithm::kErm, 1),
                                         quick(Algorithm::kGroupDroOracle, 2),
                                         quick(Algorithm::kWorstoffDro, 3)};
  const SweepResult sweep = run_sweep(*train_ds_, *val_ds_, *test_ds_, configs, 1);
  ASSERT_EQ(sweep.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const SweepEntry& e = sweep.entries[i];
    ASSERT_TRUE(e.ok()) << e.error;
    EXPECT_EQ(e.config.algorithm, configs[i].algorithm);
    EXPECT_EQ(e.val_record.split, "val");
    EXPECT_EQ(e.test_record.split, "test");
    EXPECT_EQ(e.val_record.epoch, 1);
    ASSERT_EQ(e.val_record.acc_group.size(), 3u);
    const EvalResult direct = evaluate(e.run.params, *test_ds_);
    EXPECT_EQ(e.test_record.acc_overall, direct.acc_overall);
    EXPECT_EQ(e.test_record.loss, direct.loss);
  }
}

TEST_F(SweepFixture, WorkerCountDoesNotChangeResults) {
  std::vector<TrainConfig> configs;
  for (std::uint64_t s = 0; s < 5; ++s) configs.push_back(quick(Algorithm::kWorstoffDro, s));
  const SweepResult serial = run_sweep(*train_ds_, *val_ds_, *test_ds_, configs, 1);
  const SweepResult parallel = run_sweep(*train_ds_, *val_ds_, *test_ds_, configs, 3);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    EXPECT_EQ(serial.entries[i].run.params.weights, parallel.entries[i].run.params.weights);
    EXPECT_EQ(serial.entries[i].val_record.acc_overall,
              parallel.entries[i].val_record.acc_overall);
    EXPECT_EQ(serial.entries[i].test_record.acc_group,
              parallel.entries[i].test_record.acc_group);
  }
}

TEST_F(SweepFixture, FailedRunIsRecordedWithoutAbortingOthers) {
  TrainConfig bad = quick(Algorithm::kErm, 1);
  bad.eta_w = -1.0;
  const SweepResult sweep =
      run_sweep(*train_ds_, *val_ds_, *test_ds_, {quick(Algorithm::kErm, 1), bad}, 2);
  EXPECT_TRUE(sweep.entries[0].ok());
  EXPECT_FALSE(sweep.entries[1].ok());
  EXPECT_NE(sweep.entries[1].error.find("learning rates"), std::string::npos);
}

TEST_F(SweepFixture, FractionAblationAggregatesAcrossSeeds) {
  const std::vector<AblationRow> rows = ablate_labeled_fraction(
      *train_ds_, *test_ds_, quick(Algorithm::kWorstoffDro, 0), {1.0, 0.5}, {1, 2, 3}, 2);
  ASSERT_EQ(rows.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].config_id, "worstoff_dro");
    EXPECT_EQ(rows[i].seed_count, 3);
    EXPECT_GE(rows[i].min_acc_mean, 0.0);
    EXPECT_LE(rows[i].min_acc_mean, 1.0);
    EXPECT_GE(rows[i].avg_acc_mean, 0.0);
    EXPECT_LE(rows[i].avg_acc_mean, 1.0);
    EXPECT_GE(rows[i].min_acc_sd, 0.0);
  }
  EXPECT_DOUBLE_EQ(rows[0].fraction_or_eps, 1.0);
  EXPECT_DOUBLE_EQ(rows[1].fraction_or_eps, 0.5);
}

TEST_F(SweepFixture, EpsilonAblationSweepsTheSlack) {
  GroupedDataset masked = mask_mcar(*train_ds_, 0.5, 9);
  const std::vector<AblationRow> rows = ablate_epsilon(
      masked, *test_ds_, quick(Algorithm::kWorstoffDro, 0), {0.01, 1.0}, {4, 5}, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].fraction_or_eps, 0.01);
  EXPECT_DOUBLE_EQ(rows[1].fraction_or_eps, 1.0);
  EXPECT_EQ(rows[0].seed_count, 2);
}

TEST_F(SweepFixture, AblationRejectsEmptyGrids) {
  EXPECT_THROW(ablate_labeled_fraction(*train_ds_, *test_ds_, quick(Algorithm::kErm, 0), {},
                                       {1}, 1),
               InvalidConfig);
  EXPECT_THROW(
      ablate_epsilon(*train_ds_, *test_ds_, quick(Algorithm::kWorstoffDro, 0), {0.1}, {}, 1),
      InvalidConfig);
}

}  // namespace
}  // namespace wdro
