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

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "privrec/attack.hpp"
#include "privrec/csv.hpp"
#include "privrec/dataset.hpp"
#include "privrec/harness.hpp"
#include "privrec/privacy.hpp"
#include "privrec/recsys.hpp"
#include "privrec/rng.hpp"
#include "privrec/stereotype.hpp"

namespace {

namespace data = privrec::data;
namespace stereotype = privrec::stereotype;
namespace privacy = privrec::privacy;
namespace recsys = privrec::recsys;
namespace attack = privrec::attack;
namespace harness = privrec::harness;
namespace csvio = privrec::csv;
namespace rng = privrec::rng;

void print_group_shares(const data::RatingDataset& ds, const data::AttributeTable& attrs) {
  int n_a = attrs.count(1);
  int n_abar = attrs.count(0);
  double total = static_cast<double>(n_a + n_abar);
  std::cout << "users: " << ds.num_users << ", items: " << ds.num_items << ", ratings: " << ds.records.size()
            << "\n";
  std::cout << "attribute a (" << attrs.label_names[1] << "): " << n_a << " ("
            << 100.0 * n_a / total << "%), complement (" << attrs.label_names[0] << "): " << n_abar << " ("
            << 100.0 * n_abar / total << "%)\n";
}

nlohmann::json load_json(const std::string& path) {
  return nlohmann::json::parse(csvio::read_file(path));
}

int cmd_ingest(const std::string& dataset, const std::string& ratings, const std::string& users,
               int min_core, std::optional<double> age_threshold, const std::string& out_dir) {
  data::ParseReport report;
  data::RatingDataset ds;
  data::AttributeTable attrs;
  if (dataset == "movielens1m") {
    std::tie(ds, attrs) = data::parse_movielens(ratings, users, &report);
    if (min_core < 0) min_core = 1;
  } else if (dataset == "bookcrossing") {
    std::tie(ds, attrs) = data::parse_bookcrossing(ratings, users, age_threshold, &report);
    if (min_core < 0) min_core = 5;
  } else {
    std::cerr << "unknown dataset: " << dataset << "\n";
    return 1;
  }
  if (report.dropped_implicit) std::cout << "dropped implicit (rating 0) rows: " << report.dropped_implicit << "\n";
  if (report.dropped_age_users) std::cout << "dropped users without usable age: " << report.dropped_age_users << "\n";
  if (report.dropped_orphan_ratings) std::cout << "dropped ratings of dropped users: " << report.dropped_orphan_ratings << "\n";
  if (report.dropped_duplicates) std::cout << "dropped duplicate (user, item) rows: " << report.dropped_duplicates << "\n";

  if (min_core > 1) {
    data::RatingDataset pruned = data::k_core_prune(ds, min_core);
    attrs = data::align_attributes(pruned, ds, attrs);
    ds = std::move(pruned);
    std::cout << "after " << min_core << "-core pruning:\n";
  }
  std::filesystem::create_directories(out_dir);
  data::save_canonical(out_dir, ds, attrs, dataset);
  print_group_shares(ds, attrs);
  return 0;
}

int cmd_synth(int users, int items, int ratings_per_user, double signal, std::uint64_t seed,
              const std::string& out_dir) {
  auto [ds, attrs] = data::generate_synthetic(users, items, ratings_per_user, signal, seed);
  std::filesystem::create_directories(out_dir);
  data::save_canonical(out_dir, ds, attrs, "synthetic");
  print_group_shares(ds, attrs);
  return 0;
}

int cmd_score(const std::string& data_dir, const std::string& subset, int fold, int folds,
              std::uint64_t seed, const std::string& out_path) {
  data::CanonicalData canon = data::load_canonical(data_dir);
  stereotype::StereotypeIndex index;
  if (subset == "full") {
    index = stereotype::build_index(canon.dataset, canon.attributes, "full");
  } else if (subset == "train") {
    auto splits = data::make_splits(canon.dataset, folds, rng::derive_seed(seed, "splits"));
    if (fold < 0 || fold >= folds) {
      std::cerr << "fold out of range\n";
      return 1;
    }
    data::RatingDataset train = data::subset(canon.dataset, splits[fold], data::SplitPart::train);
    index = stereotype::build_index(train, canon.attributes, "train:fold=" + std::to_string(fold));
  } else {
    std::cerr << "subset must be train or full\n";
    return 1;
  }
  stereotype::save_scores(out_path, index);
  auto summary = stereotype::stereotype_summary(index, canon.dataset, canon.attributes);
  std::cout << "scores written to " << out_path << " (built on " << index.built_on << ")\n";
  std::cout << "items indicative of a: " << 100.0 * summary.frac_items_indicative_a
            << "%, of complement: " << 100.0 * summary.frac_items_indicative_abar << "%\n";
  std::cout << "mean user stereotypicality (mean of profile item scores): "
            << summary.mean_user_stereotypicality << "\n";
  std::cout << "mean stereotypical fraction per profile: " << summary.mean_stereotypical_fraction << "\n";
  return 0;
}

int cmd_protect(const std::string& data_dir, const std::string& scores_path, const std::string& strategy,
                double beta, const std::string& epsilon_text, std::uint64_t seed,
                const std::string& out_dir) {
  data::CanonicalData canon = data::load_canonical(data_dir);
  privacy::PrivacyConfig config;
  config.epsilon = csvio::parse_double(epsilon_text, "epsilon");
  config.beta = beta;
  config.strategy = privacy::parse_strategy(strategy);
  config.seed = seed;

  stereotype::StereotypeIndex index;
  const stereotype::StereotypeIndex* index_ptr = nullptr;
  if (config.strategy == privacy::Strategy::targeted) {
    if (scores_path.empty()) {
      std::cerr << "targeted strategy requires --scores\n";
      return 1;
    }
    index = stereotype::load_scores(scores_path);
    index_ptr = &index;
  }

  std::vector<privacy::ProtectedProfile> profiles;
  data::RatingDataset protected_ds =
      privacy::protect_dataset(canon.dataset, canon.attributes, index_ptr, config, &profiles);
  std::filesystem::create_directories(out_dir);
  data::save_canonical(out_dir, protected_ds, canon.attributes, canon.name);
  csvio::write_file(out_dir + "/protection_manifest.csv", privacy::manifest_csv(profiles, canon.dataset));

  std::size_t selected = 0, replaced = 0;
  for (const auto& p : profiles) {
    selected += p.selected.size();
    replaced += p.replaced.size();
  }
  std::cout << "selected " << selected << " records, replaced " << replaced << "\n";
  return 0;
}

int cmd_train(const std::string& model, const std::string& data_dir, int fold, int folds,
              std::uint64_t seed, const std::string& config_path, const std::string& out_path) {
  data::CanonicalData canon = data::load_canonical(data_dir);
  recsys::RecModelConfig config;
  if (!config_path.empty()) config = recsys::config_from_json(load_json(config_path));
  config.meta_enabled = model == "metamf";
  if (seed != 0 || config.seed == 0) config.seed = seed;

  auto splits = data::make_splits(canon.dataset, folds, rng::derive_seed(seed, "splits"));
  if (fold < 0 || fold >= folds) {
    std::cerr << "fold out of range\n";
    return 1;
  }
  data::RatingDataset train = data::subset(canon.dataset, splits[fold], data::SplitPart::train);
  data::RatingDataset valid = data::subset(canon.dataset, splits[fold], data::SplitPart::valid);
  data::RatingDataset test = data::subset(canon.dataset, splits[fold], data::SplitPart::test);

  recsys::RecModelState state = recsys::train(train, valid, config);
  recsys::save_model(out_path, state);
  std::filesystem::path log_path = std::filesystem::path(out_path).parent_path() / "training_log.csv";
  csvio::write_file(log_path.string(), recsys::training_log_csv(state));

  double best_valid = std::numeric_limits<double>::infinity();
  for (const auto& e : state.log) best_valid = std::min(best_valid, e.valid_mae);
  std::cout << "best validation MAE: " << best_valid << "\n";
  std::cout << "test MAE: " << recsys::evaluate_mae(state, test) << "\n";
  std::cout << "model state written to " << out_path << ", log to " << log_path.string() << "\n";
  return 0;
}

int cmd_attack(const std::string& data_dir, const std::string& attrs_path, int runs, std::uint64_t seed,
               const std::string& config_path, const std::string& out_path) {
  data::CanonicalData canon = data::load_canonical(data_dir);
  data::AttributeTable attrs = canon.attributes;
  if (!attrs_path.empty()) {
    auto lines = csvio::read_lines(attrs_path);
    if (lines.empty() || lines[0] != "user_id,attribute") {
      std::cerr << attrs_path << ": bad attributes header\n";
      return 1;
    }
    attrs.attribute_of.assign(canon.dataset.num_users, 0);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto f = csvio::split(lines[i], ',');
      int u = static_cast<int>(csvio::parse_int(f[0], "user id"));
      attrs.attribute_of[u] = static_cast<std::uint8_t>(csvio::parse_int(f[1], "attribute"));
    }
  }
  attack::AttackConfig config;
  if (!config_path.empty()) config = attack::attack_config_from_json(load_json(config_path));
  if (runs > 0) config.runs = runs;
  config.seed = seed;

  attack::AttackResult result = attack::run_attack(canon.dataset, attrs, config);
  csvio::write_file(out_path, attack::attack_csv(result));
  std::cout << "mean BAcc: " << result.mean_bacc << " (std " << result.std_bacc << ") over "
            << result.per_run.size() << " runs\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& data_dir,
                   const std::string& out_path, int workers) {
  harness::GridSpec grid = harness::grid_from_json(load_json(config_path));
  harness::GridOutcome outcome = harness::run_grid(grid, data_dir, out_path, workers);
  int errors = 0;
  for (const auto& r : outcome.records) errors += !r.error.empty();
  std::cout << outcome.records.size() << " rows written to " << out_path << " ("
            << outcome.cells_computed << " computed this run, "
            << outcome.records.size() - outcome.cells_computed << " resumed";
  if (errors) std::cout << ", " << errors << " with errors";
  std::cout << ")\n";
  return errors == 0 ? 0 : 2;
}

int cmd_pareto(const std::string& in_path, const std::string& out_path) {
  auto records = harness::read_results(in_path);
  auto frontier = harness::pareto_frontier(records);
  std::string out = std::string(harness::kResultsHeader) + "\n";
  for (const auto& r : frontier) out += harness::record_line(r) + "\n";
  csvio::write_file(out_path, out);
  std::cout << frontier.size() << " non-dominated rows written to " << out_path << "\n";
  return 0;
}

int cmd_summarize(const std::string& in_path, const std::string& out_path) {
  auto records = harness::read_results(in_path);
  auto rows = harness::summarize(records);
  csvio::write_file(out_path, harness::summary_csv(rows));
  std::cout << rows.size() << " summary rows written to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted differential privacy for recommender training data"};
  app.require_subcommand(1);

  // ingest
  std::string in_dataset, in_ratings, in_users, in_out;
  int in_min_core = -1;
  double in_age_threshold = -1.0;
  auto* ingest = app.add_subcommand("ingest", "Parse and normalize a raw dataset");
  ingest->add_option("--dataset", in_dataset, "movielens1m or bookcrossing")->required();
  ingest->add_option("--ratings", in_ratings, "ratings file")->required();
  ingest->add_option("--users", in_users, "users file")->required();
  ingest->add_option("--min-core", in_min_core, "k-core threshold (default: 5 for bookcrossing, off for movielens1m)");
  ingest->add_option("--age-threshold", in_age_threshold, "fixed age threshold (bookcrossing; default: median)");
  ingest->add_option("--out", in_out, "output directory")->required();

  // synth
  int sy_users = 0, sy_items = 0, sy_rpu = 0;
  double sy_signal = 0.0;
  std::uint64_t sy_seed = 0;
  std::string sy_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic stereotyped dataset");
  synth->add_option("--users", sy_users)->required();
  synth->add_option("--items", sy_items)->required();
  synth->add_option("--ratings-per-user", sy_rpu)->required();
  synth->add_option("--signal", sy_signal,
                    "own-group item probability in [0, 1]; 0.5 carries no group signal")
      ->required();
  synth->add_option("--seed", sy_seed)->required();
  synth->add_option("--out", sy_out, "output directory")->required();

  // score
  std::string sc_data, sc_subset = "train", sc_out;
  int sc_fold = 0, sc_folds = 5;
  std::uint64_t sc_seed = 0;
  auto* score = app.add_subcommand("score", "Compute per-item stereotypicality scores");
  score->add_option("--data", sc_data, "canonical dataset directory")->required();
  score->add_option("--subset", sc_subset, "train or full");
  score->add_option("--fold", sc_fold, "fold index for --subset train");
  score->add_option("--folds", sc_folds, "fold count for --subset train");
  score->add_option("--seed", sc_seed, "base seed for split derivation");
  score->add_option("--out", sc_out, "scores.csv path")->required();

  // protect
  std::string pr_data, pr_scores, pr_strategy, pr_epsilon, pr_out;
  double pr_beta = 1.0;
  std::uint64_t pr_seed = 0;
  auto* protect = app.add_subcommand("protect", "Apply the privacy mechanism to a dataset");
  protect->add_option("--data", pr_data, "canonical dataset directory")->required();
  protect->add_option("--scores", pr_scores, "scores.csv (targeted strategy)");
  protect->add_option("--strategy", pr_strategy, "targeted or random")->required();
  protect->add_option("--beta", pr_beta, "data budget in [0, 1]")->required();
  protect->add_option("--epsilon", pr_epsilon, "privacy budget (number or inf)")->required();
  protect->add_option("--seed", pr_seed)->required();
  protect->add_option("--out", pr_out, "output directory")->required();

  // train
  std::string tr_model, tr_data, tr_config, tr_out;
  int tr_fold = 0, tr_folds = 5;
  std::uint64_t tr_seed = 0;
  auto* train = app.add_subcommand("train", "Train a recommender on one fold");
  train->add_option("--model", tr_model, "metamf or nometamf")->required();
  train->add_option("--data", tr_data, "canonical dataset directory")->required();
  train->add_option("--fold", tr_fold, "fold index");
  train->add_option("--folds", tr_folds, "fold count");
  train->add_option("--seed", tr_seed, "base seed");
  train->add_option("--config", tr_config, "model config JSON");
  train->add_option("--out", tr_out, "model state output path")->required();

  // attack
  std::string at_data, at_attrs, at_config, at_out;
  int at_runs = 0;
  std::uint64_t at_seed = 0;
  auto* attack_cmd = app.add_subcommand("attack", "Run the attribute-inference attacker");
  attack_cmd->add_option("--data", at_data, "canonical dataset directory")->required();
  attack_cmd->add_option("--attrs", at_attrs, "attributes.csv override");
  attack_cmd->add_option("--runs", at_runs, "number of runs");
  attack_cmd->add_option("--seed", at_seed, "base seed");
  attack_cmd->add_option("--config", at_config, "attack config JSON");
  attack_cmd->add_option("--out", at_out, "attack.csv output path")->required();

  // experiment
  std::string ex_config, ex_data, ex_out;
  int ex_workers = 0;
  auto* experiment = app.add_subcommand("experiment", "Sweep the (model, strategy, epsilon, beta, fold) grid");
  experiment->add_option("--config", ex_config, "grid.json")->required();
  experiment->add_option("--data", ex_data, "canonical dataset directory")->required();
  experiment->add_option("--out", ex_out, "results.csv path")->required();
  experiment->add_option("--workers", ex_workers, "worker threads (default: hardware)");

  // pareto
  std::string pa_in, pa_out;
  auto* pareto = app.add_subcommand("pareto", "Extract the (MAE, BAcc) Pareto frontier");
  pareto->add_option("--in", pa_in, "results.csv")->required();
  pareto->add_option("--out", pa_out, "pareto.csv")->required();

  // summarize
  std::string su_in, su_out;
  auto* summarize = app.add_subcommand("summarize", "Aggregate results per (model, strategy, epsilon, beta)");
  summarize->add_option("--in", su_in, "results.csv")->required();
  summarize->add_option("--out", su_out, "summary.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      std::optional<double> threshold;
      if (in_age_threshold >= 0.0) threshold = in_age_threshold;
      return cmd_ingest(in_dataset, in_ratings, in_users, in_min_core, threshold, in_out);
    }
    if (synth->parsed()) return cmd_synth(sy_users, sy_items, sy_rpu, sy_signal, sy_seed, sy_out);
    if (score->parsed()) return cmd_score(sc_data, sc_subset, sc_fold, sc_folds, sc_seed, sc_out);
    if (protect->parsed()) return cmd_protect(pr_data, pr_scores, pr_strategy, pr_beta, pr_epsilon, pr_seed, pr_out);
    if (train->parsed()) return cmd_train(tr_model, tr_data, tr_fold, tr_folds, tr_seed, tr_config, tr_out);
    if (attack_cmd->parsed()) return cmd_attack(at_data, at_attrs, at_runs, at_seed, at_config, at_out);
    if (experiment->parsed()) return cmd_experiment(ex_config, ex_data, ex_out, ex_workers);
    if (pareto->parsed()) return cmd_pareto(pa_in, pa_out);
    if (summarize->parsed()) return cmd_summarize(su_in, su_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
