// Copyright 2026 The privrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "privrec/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "privrec/csv.hpp"
#include "privrec/dataset.hpp"

namespace csv = privrec::csv;
namespace data = privrec::data;
namespace harness = privrec::harness;
namespace rng = privrec::rng;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double round2(double v) { return std::round(v * 100.0) / 100.0; }

harness::ExperimentRecord make_record(const std::string& model, const std::string& strategy,
                                      double epsilon, double beta, int fold, double mae, double bacc) {
  harness::ExperimentRecord r;
  r.dataset = "unit";
  r.model = model;
  r.strategy = strategy;
  r.epsilon = epsilon;
  r.beta = beta;
  r.fold = fold;
  r.mae = mae;
  r.delta_mae_pct = 1.0;
  r.bacc = bacc;
  r.delta_bacc_pct = -1.0;
  r.seed = 42;
  return r;
}

}  // namespace

TEST(DeltaPct, MatchesReportedRoundedValues) {
  EXPECT_DOUBLE_EQ(round2(harness::delta_pct(0.6985, 0.6857)), 1.87);
  EXPECT_DOUBLE_EQ(round2(harness::delta_pct(0.7438, 0.7429)), 0.12);
  EXPECT_DOUBLE_EQ(harness::delta_pct(2.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(harness::delta_pct(1.0, 2.0), -50.0);
  EXPECT_THROW(harness::delta_pct(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(harness::delta_pct(1.0, -1.0), std::invalid_argument);
}

TEST(Records, LineRoundTripIncludingInfAndNan) {
  harness::ExperimentRecord r = make_record("metamf", "targeted", 0.1, 0.3, 2, 0.91, 0.55);
  auto back = harness::parse_record(harness::record_line(r));
  EXPECT_EQ(back.dataset, r.dataset);
  EXPECT_EQ(back.model, r.model);
  EXPECT_EQ(back.strategy, r.strategy);
  EXPECT_EQ(back.epsilon, r.epsilon);
  EXPECT_EQ(back.beta, r.beta);
  EXPECT_EQ(back.fold, r.fold);
  EXPECT_EQ(back.mae, r.mae);
  EXPECT_EQ(back.bacc, r.bacc);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_TRUE(back.error.empty());
  EXPECT_TRUE(back.ok());

  harness::ExperimentRecord base = make_record("metamf", "none", kInf, 1.0, 0, 0.9, 0.8);
  std::string line = harness::record_line(base);
  EXPECT_NE(line.find(",inf,"), std::string::npos);
  EXPECT_EQ(harness::parse_record(line).epsilon, kInf);

  harness::ExperimentRecord failed = make_record("nometamf", "random", 1.0, 0.5, 1, 0.0, 0.0);
  failed.mae = std::numeric_limits<double>::quiet_NaN();
  failed.bacc = std::numeric_limits<double>::quiet_NaN();
  failed.delta_mae_pct = std::numeric_limits<double>::quiet_NaN();
  failed.delta_bacc_pct = std::numeric_limits<double>::quiet_NaN();
  failed.error = "training diverged, at epoch 3\nhalted";
  failed.error = harness::sanitize_error(failed.error);
  auto failed_back = harness::parse_record(harness::record_line(failed));
  EXPECT_FALSE(failed_back.ok());
  EXPECT_TRUE(std::isnan(failed_back.mae));
  EXPECT_EQ(failed_back.error, "training diverged; at epoch 3;halted");
}

TEST(Records, HeaderIsBitExact) {
  EXPECT_STREQ(harness::kResultsHeader,
               "dataset,model,strategy,epsilon,beta,fold,mae,delta_mae_pct,bacc,delta_bacc_pct,seed,error");
}

TEST(GridSpec, ValidationRejectsBadValues) {
  harness::GridSpec g;
  EXPECT_NO_THROW(harness::validate(g));
  g.betas = {1.2};
  EXPECT_THROW(harness::validate(g), std::invalid_argument);
  g = harness::GridSpec{};
  g.epsilons = {0.0};
  EXPECT_THROW(harness::validate(g), std::invalid_argument);
  g = harness::GridSpec{};
  g.models = {"other"};
  EXPECT_THROW(harness::validate(g), std::invalid_argument);
  g = harness::GridSpec{};
  g.strategies = {"none"};
  EXPECT_THROW(harness::validate(g), std::invalid_argument);
  g = harness::GridSpec{};
  g.folds = 0;
  EXPECT_THROW(harness::validate(g), std::invalid_argument);
}

TEST(GridSpec, JsonParsingWithInfinityAndAnchors) {
  nlohmann::json j = nlohmann::json::parse(R"({
    "betas": [1.0, 0.5, 0.0],
    "epsilons": ["inf", 1.0, 0.1],
    "folds": 2,
    "models": ["metamf"],
    "strategies": ["targeted", "random"],
    "base_seed": 7,
    "model_configs": {
      "default": {"epochs": 3, "batch_size": 16},
      "eps=0.1,beta=0": {"epochs": 5}
    },
    "attack_config": {"runs": 2, "hidden_dim": 8}
  })");
  auto g = harness::grid_from_json(j);
  EXPECT_EQ(g.betas, (std::vector<double>{1.0, 0.5, 0.0}));
  ASSERT_EQ(g.epsilons.size(), 3u);
  EXPECT_TRUE(std::isinf(g.epsilons[0]));
  EXPECT_EQ(g.folds, 2);
  EXPECT_EQ(g.base_seed, 7u);
  EXPECT_EQ(g.attack_config.runs, 2);
  EXPECT_EQ(g.attack_config.hidden_dim, 8);

  // Anchored lookup: beta >= 0.5 anchors at 1, otherwise at 0.
  EXPECT_EQ(harness::anchor_key(0.1, 0.7), "eps=0.1,beta=1");
  EXPECT_EQ(harness::anchor_key(0.1, 0.3), "eps=0.1,beta=0");
  EXPECT_EQ(harness::resolve_model_config(g, 0.1, 0.2).epochs, 5);
  EXPECT_EQ(harness::resolve_model_config(g, 0.1, 0.9).epochs, 3);   // falls to default
  EXPECT_EQ(harness::resolve_model_config(g, 1.0, 0.2).epochs, 3);   // falls to default
  harness::GridSpec empty;
  EXPECT_EQ(harness::resolve_model_config(empty, 1.0, 0.2).epochs, 50);  // built-in defaults

  EXPECT_THROW(harness::grid_from_json(nlohmann::json::parse(R"({"epsilons": ["big"]})")),
               std::invalid_argument);
}

TEST(Pareto, HandExamples) {
  std::vector<harness::ExperimentRecord> records;
  records.push_back(make_record("metamf", "targeted", 1.0, 0.5, 0, 1.0, 0.5));   // frontier
  records.push_back(make_record("metamf", "targeted", 1.0, 0.4, 0, 2.0, 0.4));   // frontier
  records.push_back(make_record("metamf", "targeted", 1.0, 0.3, 0, 2.0, 0.6));   // dominated by first two
  records.push_back(make_record("metamf", "targeted", 1.0, 0.2, 0, 0.5, 0.9));   // frontier
  harness::ExperimentRecord bad = make_record("metamf", "targeted", 1.0, 0.1, 0, 0.0, 0.0);
  bad.error = "boom";
  records.push_back(bad);  // error rows are ignored even if numerically dominant

  auto frontier = harness::pareto_frontier(records);
  ASSERT_EQ(frontier.size(), 3u);
  // Sorted by ascending mae.
  EXPECT_EQ(frontier[0].beta, 0.2);
  EXPECT_EQ(frontier[1].beta, 0.5);
  EXPECT_EQ(frontier[2].beta, 0.4);

  // Duplicate points do not dominate each other.
  std::vector<harness::ExperimentRecord> dupes{make_record("m", "t", 1, 0.5, 0, 1.0, 1.0),
                                               make_record("m", "t", 1, 0.5, 1, 1.0, 1.0)};
  dupes[0].model = "metamf";
  dupes[1].model = "metamf";
  dupes[0].strategy = "targeted";
  dupes[1].strategy = "targeted";
  EXPECT_EQ(harness::pareto_frontier(dupes).size(), 2u);
}

TEST(Pareto, MatchesPairwiseOracle) {
  for (int trial = 0; trial < 30; ++trial) {
    rng::Engine e(800 + trial);
    std::size_t n = 1 + e.index(40);
    std::vector<harness::ExperimentRecord> records;
    std::vector<std::pair<double, double>> points;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values force plenty of ties.
      double mae = static_cast<double>(e.index(5));
      double bacc = static_cast<double>(e.index(5)) / 10.0;
      records.push_back(make_record("metamf", "targeted", 1.0, 0.5, static_cast<int>(i), mae, bacc));
      points.push_back({mae, bacc});
    }
    auto expected_idx = oracle::pareto(points);
    auto frontier = harness::pareto_frontier(records);
    ASSERT_EQ(frontier.size(), expected_idx.size()) << "trial " << trial;
    // Compare as multisets of (mae, bacc) pairs.
    std::multiset<std::pair<double, double>> got, expected;
    for (const auto& r : frontier) got.insert({r.mae, r.bacc});
    for (std::size_t i : expected_idx) expected.insert(points[i]);
    EXPECT_EQ(got, expected) << "trial " << trial;
  }
}

TEST(Summarize, GroupsInFirstAppearanceOrderWithSampleStd) {
  std::vector<harness::ExperimentRecord> records;
  records.push_back(make_record("metamf", "targeted", 1.0, 0.5, 0, 1.0, 0.5));
  records.push_back(make_record("metamf", "targeted", 1.0, 0.0, 0, 3.0, 0.5));
  records.push_back(make_record("metamf", "targeted", 1.0, 0.5, 1, 2.0, 0.7));
  harness::ExperimentRecord bad = make_record("metamf", "targeted", 1.0, 0.5, 2, 100.0, 0.9);
  bad.error = "x";
  records.push_back(bad);

  auto rows = harness::summarize(records);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].beta, 0.5);  // appeared first
  EXPECT_EQ(rows[1].beta, 0.0);
  EXPECT_EQ(rows[0].n, 2);
  EXPECT_DOUBLE_EQ(rows[0].mean_mae, 1.5);
  // Sample std of {1, 2}.
  EXPECT_DOUBLE_EQ(rows[0].std_mae, std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(rows[0].mean_bacc, 0.6);
  EXPECT_EQ(rows[1].n, 1);
  EXPECT_DOUBLE_EQ(rows[1].std_mae, 0.0);

  auto text = harness::summary_csv(rows);
  auto lines = csv::split(text, '\n');
  EXPECT_EQ(lines[0],
            "dataset,model,strategy,epsilon,beta,n,mean_mae,std_mae,mean_delta_mae_pct,"
            "std_delta_mae_pct,mean_bacc,std_bacc,mean_delta_bacc_pct,std_delta_bacc_pct");
  EXPECT_EQ(lines.size(), rows.size() + 2);
}

TEST(Summarize, MatchesOracleOnRandomGroups) {
  for (int trial = 0; trial < 20; ++trial) {
    rng::Engine e(900 + trial);
    std::vector<harness::ExperimentRecord> records;
    std::map<std::string, std::vector<double>> by_group;
    std::size_t n = 5 + e.index(40);
    for (std::size_t i = 0; i < n; ++i) {
      double beta = static_cast<double>(e.index(3)) / 2.0;
      double mae = e.uniform() * 2.0;
      auto r = make_record("metamf", "targeted", 1.0, beta, static_cast<int>(i), mae, e.uniform());
      records.push_back(r);
      by_group[csv::format_double(beta)].push_back(mae);
    }
    auto rows = harness::summarize(records);
    ASSERT_EQ(rows.size(), by_group.size());
    for (const auto& row : rows) {
      auto [mean, sd] = oracle::mean_std(by_group.at(csv::format_double(row.beta)));
      EXPECT_NEAR(row.mean_mae, mean, 1e-12);
      EXPECT_NEAR(row.std_mae, sd, 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// End-to-end grid on a small synthetic dataset.

namespace {

struct GridFixture {
  std::string data_dir;
  harness::GridSpec grid;

  GridFixture() {
    data_dir = ::testing::TempDir() + "privrec_grid_data";
    std::filesystem::create_directories(data_dir);
    auto [ds, attrs] = data::generate_synthetic(40, 30, 10, 0.8, 11);
    data::save_canonical(data_dir, ds, attrs, "synthetic");

    grid.betas = {1.0, 0.5};
    grid.epsilons = {1.0};
    grid.folds = 2;
    grid.models = {"metamf", "nometamf"};
    grid.strategies = {"targeted"};
    grid.base_seed = 5;
    privrec::recsys::RecModelConfig mc;
    mc.user_embedding_dim = 4;
    mc.collaborative_dim = 4;
    mc.item_feature_dim = 3;
    mc.hypernet_hidden_dim = 4;
    mc.prediction_hidden_dim = 4;
    mc.epochs = 3;
    mc.batch_size = 32;
    grid.model_configs["default"] = mc;
    grid.attack_config.hidden_dim = 8;
    grid.attack_config.epochs = 5;
    grid.attack_config.runs = 2;
  }
};

}  // namespace

TEST(RunGrid, ProducesCanonicalRowsAndSharedBaselines) {
  GridFixture fx;
  std::string out_path = ::testing::TempDir() + "privrec_results_a.csv";
  std::remove(out_path.c_str());
  auto outcome = harness::run_grid(fx.grid, fx.data_dir, out_path, 2);

  // 2 models x 2 folds baselines + 2 models x 1 strategy x 1 eps x 2 betas x 2 folds cells.
  ASSERT_EQ(outcome.records.size(), 4u + 8u);
  EXPECT_EQ(outcome.cells_computed, 12);

  // File round trip preserves every row.
  auto from_file = harness::read_results(out_path);
  ASSERT_EQ(from_file.size(), outcome.records.size());
  for (std::size_t i = 0; i < from_file.size(); ++i) {
    EXPECT_EQ(harness::record_line(from_file[i]), harness::record_line(outcome.records[i]));
    EXPECT_TRUE(from_file[i].ok()) << harness::record_line(from_file[i]);
  }

  // Baselines first, in model-major order, with zero deltas.
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(outcome.records[i].strategy, "none");
    EXPECT_TRUE(std::isinf(outcome.records[i].epsilon));
    EXPECT_EQ(outcome.records[i].delta_mae_pct, 0.0);
    EXPECT_EQ(outcome.records[i].delta_bacc_pct, 0.0);
  }
  EXPECT_EQ(outcome.records[0].model, "metamf");
  EXPECT_EQ(outcome.records[2].model, "nometamf");

  // The attack sees only the protected data, so per-fold baseline BAcc is
  // shared across models.
  EXPECT_EQ(outcome.records[0].bacc, outcome.records[2].bacc);
  EXPECT_EQ(outcome.records[1].bacc, outcome.records[3].bacc);

  // beta=1 cells reproduce the no-DP baseline bit for bit.
  for (const auto& r : outcome.records) {
    if (r.strategy == "none" || r.beta != 1.0) continue;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& b = outcome.records[i];
      if (b.model == r.model && b.fold == r.fold) {
        EXPECT_EQ(r.mae, b.mae) << r.model << " fold " << r.fold;
        EXPECT_EQ(r.bacc, b.bacc);
        EXPECT_EQ(r.delta_mae_pct, 0.0);
        EXPECT_EQ(r.delta_bacc_pct, 0.0);
      }
    }
  }

  // Identical protected data gives identical BAcc and delta-BAcc across
  // models at the same cell coordinates.
  std::map<std::string, double> bacc_by_cell;
  for (const auto& r : outcome.records) {
    if (r.strategy == "none") continue;
    std::string key = r.strategy + "|" + csv::format_double(r.beta) + "|" + std::to_string(r.fold);
    if (bacc_by_cell.count(key)) {
      EXPECT_EQ(bacc_by_cell[key], r.bacc) << key;
    } else {
      bacc_by_cell[key] = r.bacc;
    }
  }
  std::remove(out_path.c_str());
}

TEST(RunGrid, ReproducibleAndResumable) {
  GridFixture fx;
  std::string path_a = ::testing::TempDir() + "privrec_results_b1.csv";
  std::string path_b = ::testing::TempDir() + "privrec_results_b2.csv";
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());

  harness::run_grid(fx.grid, fx.data_dir, path_a, 2);
  harness::run_grid(fx.grid, fx.data_dir, path_b, 1);
  std::string bytes_a = csv::read_file(path_a);
  EXPECT_EQ(bytes_a, csv::read_file(path_b));

  // Resume of a complete file recomputes nothing and rewrites it unchanged.
  auto resumed = harness::run_grid(fx.grid, fx.data_dir, path_a, 2);
  EXPECT_EQ(resumed.cells_computed, 0);
  EXPECT_EQ(csv::read_file(path_a), bytes_a);

  // Resume of a truncated file recomputes only the missing rows and restores
  // the identical bytes.
  auto lines = csv::split(bytes_a, '\n');
  std::string truncated;
  for (std::size_t i = 0; i < 6; ++i) truncated += std::string(lines[i]) + "\n";
  truncated += "torn,row";  // interrupted mid-append
  csv::write_file(path_a, truncated);
  auto partial = harness::run_grid(fx.grid, fx.data_dir, path_a, 2);
  EXPECT_EQ(partial.cells_computed, 12 - 5);
  EXPECT_EQ(csv::read_file(path_a), bytes_a);

  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST(RunGrid, RejectsForeignHeader) {
  GridFixture fx;
  std::string path = ::testing::TempDir() + "privrec_results_c.csv";
  csv::write_file(path, "something,else\n1,2\n");
  EXPECT_THROW(harness::run_grid(fx.grid, fx.data_dir, path, 1), csv::ParseError);
  std::remove(path.c_str());
}
