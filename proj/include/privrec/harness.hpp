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

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "privrec/attack.hpp"
#include "privrec/csv.hpp"
#include "privrec/dataset.hpp"
#include "privrec/privacy.hpp"
#include "privrec/recsys.hpp"
#include "privrec/rng.hpp"
#include "privrec/stereotype.hpp"

namespace privrec::harness {

inline constexpr const char* kResultsHeader =
    "dataset,model,strategy,epsilon,beta,fold,mae,delta_mae_pct,bacc,delta_bacc_pct,seed,error";

// Relative percentage change against a positive baseline.
inline double delta_pct(double value, double baseline) {
  if (!(baseline > 0.0)) throw std::invalid_argument("delta_pct: baseline must be positive");
  return 100.0 * (value - baseline) / baseline;
}

struct ExperimentRecord {
  std::string dataset;
  std::string model;     // metamf | nometamf
  std::string strategy;  // targeted | random | none (baseline)
  double epsilon = std::numeric_limits<double>::infinity();
  double beta = 1.0;
  int fold = 0;
  double mae = std::numeric_limits<double>::quiet_NaN();
  double delta_mae_pct = std::numeric_limits<double>::quiet_NaN();
  double bacc = std::numeric_limits<double>::quiet_NaN();
  double delta_bacc_pct = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  std::string error;

  bool ok() const { return error.empty() && std::isfinite(mae) && std::isfinite(bacc); }
};

inline std::string sanitize_error(std::string message) {
  for (char& c : message) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return message;
}

inline std::string record_line(const ExperimentRecord& r) {
  std::string out;
  out += r.dataset;
  out += ',';
  out += r.model;
  out += ',';
  out += r.strategy;
  out += ',';
  out += csv::format_double(r.epsilon);
  out += ',';
  out += csv::format_double(r.beta);
  out += ',';
  out += std::to_string(r.fold);
  out += ',';
  out += csv::format_double(r.mae);
  out += ',';
  out += csv::format_double(r.delta_mae_pct);
  out += ',';
  out += csv::format_double(r.bacc);
  out += ',';
  out += csv::format_double(r.delta_bacc_pct);
  out += ',';
  out += std::to_string(r.seed);
  out += ',';
  out += r.error;
  return out;
}

inline ExperimentRecord parse_record(std::string_view line) {
  auto f = csv::split(line, ',');
  if (f.size() != 12) throw csv::ParseError("results row needs 12 fields");
  ExperimentRecord r;
  r.dataset = std::string(f[0]);
  r.model = std::string(f[1]);
  r.strategy = std::string(f[2]);
  r.epsilon = csv::parse_double(f[3], "epsilon");
  r.beta = csv::parse_double(f[4], "beta");
  r.fold = static_cast<int>(csv::parse_int(f[5], "fold"));
  r.mae = csv::parse_double(f[6], "mae");
  r.delta_mae_pct = csv::parse_double(f[7], "delta_mae_pct");
  r.bacc = csv::parse_double(f[8], "bacc");
  r.delta_bacc_pct = csv::parse_double(f[9], "delta_bacc_pct");
  r.seed = csv::parse_u64(f[10], "seed");
  r.error = std::string(f[11]);
  return r;
}

// Cell identity within one results file; rows are reused across resumes by
// this key.
inline std::string record_key(const ExperimentRecord& r) {
  return r.dataset + "|" + r.model + "|" + r.strategy + "|" + csv::format_double(r.epsilon) + "|" +
         csv::format_double(r.beta) + "|" + std::to_string(r.fold);
}

struct GridSpec {
  std::vector<double> betas = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0};
  std::vector<double> epsilons = {3.0, 2.0, 1.0, 0.1};
  int folds = 5;
  std::vector<std::string> models = {"metamf", "nometamf"};
  std::vector<std::string> strategies = {"targeted", "random"};
  std::uint64_t base_seed = 0;
  std::map<std::string, recsys::RecModelConfig> model_configs;  // key "eps=E,beta=B"
  attack::AttackConfig attack_config;
};

inline void validate(const GridSpec& g) {
  if (g.betas.empty() || g.epsilons.empty() || g.models.empty() || g.strategies.empty()) {
    throw std::invalid_argument("grid lists must be nonempty");
  }
  if (g.folds < 1) throw std::invalid_argument("folds must be >= 1");
  for (double b : g.betas) {
    if (b < 0.0 || b > 1.0) throw std::invalid_argument("beta outside [0, 1]");
  }
  for (double e : g.epsilons) {
    if (!(e > 0.0)) throw std::invalid_argument("epsilon must be positive");
  }
  for (const auto& m : g.models) {
    if (m != "metamf" && m != "nometamf") throw std::invalid_argument("unknown model: " + m);
  }
  for (const auto& s : g.strategies) privacy::parse_strategy(s);
}

inline double parse_epsilon_json(const nlohmann::json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("epsilon string must be \"inf\"");
  }
  return v.get<double>();
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  if (j.contains("betas")) g.betas = j.at("betas").get<std::vector<double>>();
  if (j.contains("epsilons")) {
    g.epsilons.clear();
    for (const auto& v : j.at("epsilons")) g.epsilons.push_back(parse_epsilon_json(v));
  }
  g.folds = j.value("folds", g.folds);
  if (j.contains("models")) g.models = j.at("models").get<std::vector<std::string>>();
  if (j.contains("strategies")) g.strategies = j.at("strategies").get<std::vector<std::string>>();
  g.base_seed = j.value("base_seed", g.base_seed);
  if (j.contains("model_configs")) {
    for (const auto& [key, value] : j.at("model_configs").items()) {
      g.model_configs[key] = recsys::config_from_json(value);
    }
  }
  if (j.contains("attack_config")) g.attack_config = attack::attack_config_from_json(j.at("attack_config"));
  validate(g);
  return g;
}

// Hyperparameter anchor: configs are supplied per (epsilon, beta in {0, 1});
// intermediate betas reuse the nearest anchor.
inline std::string anchor_key(double epsilon, double beta) {
  double anchor_beta = beta >= 0.5 ? 1.0 : 0.0;
  return "eps=" + csv::format_double(epsilon) + ",beta=" + csv::format_double(anchor_beta);
}

inline recsys::RecModelConfig resolve_model_config(const GridSpec& grid, double epsilon, double beta) {
  auto it = grid.model_configs.find(anchor_key(epsilon, beta));
  if (it != grid.model_configs.end()) return it->second;
  it = grid.model_configs.find("default");
  if (it != grid.model_configs.end()) return it->second;
  return recsys::RecModelConfig{};
}

// Non-dominated set minimizing (mae, bacc). Quadratic scan: grids are small
// and the definition stays transparent.
inline std::vector<ExperimentRecord> pareto_frontier(const std::vector<ExperimentRecord>& records) {
  std::vector<ExperimentRecord> usable;
  for (const auto& r : records) {
    if (r.ok()) usable.push_back(r);
  }
  std::vector<ExperimentRecord> frontier;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < usable.size() && !dominated; ++j) {
      if (i == j) continue;
      dominated = usable[j].mae <= usable[i].mae && usable[j].bacc <= usable[i].bacc &&
                  (usable[j].mae < usable[i].mae || usable[j].bacc < usable[i].bacc);
    }
    if (!dominated) frontier.push_back(usable[i]);
  }
  std::stable_sort(frontier.begin(), frontier.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    return a.mae != b.mae ? a.mae < b.mae : a.bacc < b.bacc;
  });
  return frontier;
}

struct SummaryRow {
  std::string dataset;
  std::string model;
  std::string strategy;
  double epsilon = 0.0;
  double beta = 0.0;
  int n = 0;
  double mean_mae = 0.0, std_mae = 0.0;
  double mean_delta_mae_pct = 0.0, std_delta_mae_pct = 0.0;
  double mean_bacc = 0.0, std_bacc = 0.0;
  double mean_delta_bacc_pct = 0.0, std_delta_bacc_pct = 0.0;
};

// Mean and sample standard deviation per (model, strategy, epsilon, beta)
// over folds, in first-appearance order; error rows are excluded.
inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ExperimentRecord*>> groups;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    std::string key = r.dataset + "|" + r.model + "|" + r.strategy + "|" + csv::format_double(r.epsilon) +
                      "|" + csv::format_double(r.beta);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  auto mean_std = [](const std::vector<const ExperimentRecord*>& rs, auto field) {
    double sum = 0.0;
    for (const auto* r : rs) sum += r->*field;
    double mean = sum / static_cast<double>(rs.size());
    double sq = 0.0;
    for (const auto* r : rs) sq += (r->*field - mean) * (r->*field - mean);
    double sd = rs.size() > 1 ? std::sqrt(sq / static_cast<double>(rs.size() - 1)) : 0.0;
    return std::pair<double, double>{mean, sd};
  };
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& rs = groups[key];
    SummaryRow row;
    row.dataset = rs[0]->dataset;
    row.model = rs[0]->model;
    row.strategy = rs[0]->strategy;
    row.epsilon = rs[0]->epsilon;
    row.beta = rs[0]->beta;
    row.n = static_cast<int>(rs.size());
    std::tie(row.mean_mae, row.std_mae) = mean_std(rs, &ExperimentRecord::mae);
    std::tie(row.mean_delta_mae_pct, row.std_delta_mae_pct) = mean_std(rs, &ExperimentRecord::delta_mae_pct);
    std::tie(row.mean_bacc, row.std_bacc) = mean_std(rs, &ExperimentRecord::bacc);
    std::tie(row.mean_delta_bacc_pct, row.std_delta_bacc_pct) = mean_std(rs, &ExperimentRecord::delta_bacc_pct);
    out.push_back(std::move(row));
  }
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "dataset,model,strategy,epsilon,beta,n,mean_mae,std_mae,mean_delta_mae_pct,std_delta_mae_pct,"
      "mean_bacc,std_bacc,mean_delta_bacc_pct,std_delta_bacc_pct\n";
  for (const auto& r : rows) {
    out += r.dataset;
    out += ',';
    out += r.model;
    out += ',';
    out += r.strategy;
    out += ',';
    out += csv::format_double(r.epsilon);
    out += ',';
    out += csv::format_double(r.beta);
    out += ',';
    out += std::to_string(r.n);
    for (double v : {r.mean_mae, r.std_mae, r.mean_delta_mae_pct, r.std_delta_mae_pct, r.mean_bacc,
                     r.std_bacc, r.mean_delta_bacc_pct, r.std_delta_bacc_pct}) {
      out += ',';
      out += csv::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<ExperimentRecord> read_results(const std::string& path) {
  auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != kResultsHeader) throw csv::ParseError(path + ": bad results header");
  std::vector<ExperimentRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    out.push_back(parse_record(lines[i]));
  }
  return out;
}

struct GridOutcome {
  std::vector<ExperimentRecord> records;  // canonical order, one per cell
  int cells_computed = 0;                 // cells that actually ran this invocation
};

namespace detail {

// Seed derivations. The recorded per-cell seed hashes the full tuple; the
// internal streams deliberately hash narrower tuples: training depends only
// on (model, fold) so a beta=1 cell reproduces the no-DP baseline bit for
// bit, and the attack stream depends only on the fold so identical protected
// data yields identical BAcc for both models.
inline std::uint64_t cell_seed(std::uint64_t base, const std::string& model, const std::string& strategy,
                               double epsilon, double beta, int fold) {
  return rng::derive_seed(base, model, strategy, epsilon, beta, fold);
}
inline std::uint64_t train_seed(std::uint64_t base, const std::string& model, int fold) {
  return rng::derive_seed(base, "train", model, fold);
}
inline std::uint64_t protect_seed(std::uint64_t base, const std::string& strategy, double epsilon,
                                  double beta, int fold) {
  return rng::derive_seed(base, "protect", strategy, epsilon, beta, fold);
}
inline std::uint64_t attack_seed(std::uint64_t base, int fold) {
  return rng::derive_seed(base, "attack", fold);
}

struct FoldData {
  data::RatingDataset train;
  data::RatingDataset valid;
  data::RatingDataset test;
  stereotype::StereotypeIndex index;  // built on the train split
};

struct BaccCell {
  std::once_flag flag;
  double bacc = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

// Runs `jobs` over `workers` threads and hands each result to `emit` in job
// order as soon as its prefix is complete.
template <typename Job, typename Run, typename Emit>
void ordered_pool(const std::vector<Job>& jobs, int workers, Run run, Emit emit) {
  if (jobs.empty()) return;
  std::vector<std::optional<ExperimentRecord>> done(jobs.size());
  std::mutex mtx;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      ExperimentRecord r = run(jobs[i]);
      {
        std::lock_guard<std::mutex> lock(mtx);
        done[i] = std::move(r);
      }
      cv.notify_all();
    }
  };
  int n = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  pool.reserve(n - 1);
  for (int t = 0; t + 1 < n; ++t) pool.emplace_back(body);
  body();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::unique_lock<std::mutex> lock(mtx);
    cv.wait(lock, [&] { return done[i].has_value(); });
    ExperimentRecord r = std::move(*done[i]);
    lock.unlock();
    emit(std::move(r));
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Sweeps the (model, strategy, epsilon, beta, fold) grid over a canonical
// dataset directory. Per cell: protect the train split, train the model,
// evaluate MAE on the clean test split, attack the protected train split,
// and report deltas against the per-(model, fold) no-DP baseline. Rows are
// appended to `out_path` in canonical order as they complete; an existing
// file is resumed by reusing its rows verbatim, keyed by the cell tuple.
inline GridOutcome run_grid(const GridSpec& grid, const std::string& data_dir,
                            const std::string& out_path, int workers = 0) {
  validate(grid);
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }

  data::CanonicalData canon = data::load_canonical(data_dir);
  const data::RatingDataset& ds = canon.dataset;
  const data::AttributeTable& attrs = canon.attributes;
  const std::string& dataset_name = canon.name;
  const double inf = std::numeric_limits<double>::infinity();

  auto splits = data::make_splits(ds, grid.folds, rng::derive_seed(grid.base_seed, "splits"));
  std::vector<detail::FoldData> folds(grid.folds);
  for (int f = 0; f < grid.folds; ++f) {
    folds[f].train = data::subset(ds, splits[f], data::SplitPart::train);
    folds[f].valid = data::subset(ds, splits[f], data::SplitPart::valid);
    folds[f].test = data::subset(ds, splits[f], data::SplitPart::test);
    folds[f].index = stereotype::build_index(folds[f].train, attrs, "train:fold=" + std::to_string(f));
  }

  // Rows carried over from an interrupted run.
  std::map<std::string, ExperimentRecord> existing;
  if (std::filesystem::exists(out_path)) {
    auto lines = csv::read_lines(out_path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      try {
        ExperimentRecord r = parse_record(lines[i]);
        existing[record_key(r)] = std::move(r);
      } catch (const csv::ParseError&) {
        // A torn final line from an interrupted append is not an error.
      }
    }
    if (!lines.empty() && lines[0] != kResultsHeader) {
      throw csv::ParseError(out_path + ": existing file has a different header");
    }
  }

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
  out << kResultsHeader << '\n';
  out.flush();

  GridOutcome outcome;
  auto emit = [&](ExperimentRecord r) {
    out << record_line(r) << '\n';
    out.flush();
    outcome.records.push_back(std::move(r));
  };

  // Protected-train-split attack results, shared across models.
  std::map<std::string, std::shared_ptr<detail::BaccCell>> bacc_cache;
  std::mutex bacc_mutex;
  auto shared_bacc = [&](const std::string& strategy, double epsilon, double beta, int fold) {
    std::string key = strategy + "|" + csv::format_double(epsilon) + "|" + csv::format_double(beta) + "|" +
                      std::to_string(fold);
    std::shared_ptr<detail::BaccCell> cell;
    {
      std::lock_guard<std::mutex> lock(bacc_mutex);
      auto& slot = bacc_cache[key];
      if (!slot) slot = std::make_shared<detail::BaccCell>();
      cell = slot;
    }
    std::call_once(cell->flag, [&] {
      try {
        const detail::FoldData& fd = folds[fold];
        data::RatingDataset protected_train;
        if (strategy == "none") {
          protected_train = fd.train;
        } else {
          privacy::PrivacyConfig pc{epsilon, beta, privacy::parse_strategy(strategy),
                                    detail::protect_seed(grid.base_seed, strategy, epsilon, beta, fold)};
          protected_train = privacy::protect_dataset(fd.train, attrs, &fd.index, pc);
        }
        attack::AttackConfig ac = grid.attack_config;
        ac.seed = detail::attack_seed(grid.base_seed, fold);
        cell->bacc = attack::run_attack(protected_train, attrs, ac).mean_bacc;
      } catch (const std::exception& e) {
        cell->error = e.what();
      }
    });
    if (!cell->error.empty()) throw std::runtime_error(cell->error);
    return cell->bacc;
  };

  // Phase A: per-(model, fold) no-DP baselines (strategy none, eps=inf, beta=1).
  struct BaselineJob {
    std::string model;
    int fold;
  };
  std::vector<BaselineJob> baseline_jobs;
  for (const auto& model : grid.models) {
    for (int f = 0; f < grid.folds; ++f) baseline_jobs.push_back({model, f});
  }

  auto run_baseline = [&](const BaselineJob& job) {
    ExperimentRecord r;
    r.dataset = dataset_name;
    r.model = job.model;
    r.strategy = "none";
    r.epsilon = inf;
    r.beta = 1.0;
    r.fold = job.fold;
    r.seed = detail::cell_seed(grid.base_seed, job.model, "none", inf, 1.0, job.fold);
    try {
      const detail::FoldData& fd = folds[job.fold];
      recsys::RecModelConfig cfg = resolve_model_config(grid, inf, 1.0);
      cfg.meta_enabled = job.model == "metamf";
      cfg.seed = detail::train_seed(grid.base_seed, job.model, job.fold);
      recsys::RecModelState state = recsys::train(fd.train, fd.valid, cfg);
      r.mae = recsys::evaluate_mae(state, fd.test);
      r.bacc = shared_bacc("none", inf, 1.0, job.fold);
      r.delta_mae_pct = 0.0;
      r.delta_bacc_pct = 0.0;
    } catch (const std::exception& e) {
      r.error = sanitize_error(e.what());
    }
    return r;
  };

  // Baseline metrics keyed for delta computation in phase B.
  std::map<std::string, double> baseline_mae;  // "model|fold"
  std::map<int, double> baseline_bacc;         // fold
  std::map<std::string, std::string> baseline_error;

  std::vector<BaselineJob> pending;
  std::vector<std::optional<ExperimentRecord>> plan;  // cached rows, aligned with baseline_jobs
  for (const auto& job : baseline_jobs) {
    ExperimentRecord probe;
    probe.dataset = dataset_name;
    probe.model = job.model;
    probe.strategy = "none";
    probe.epsilon = inf;
    probe.beta = 1.0;
    probe.fold = job.fold;
    auto it = existing.find(record_key(probe));
    plan.push_back(it == existing.end() ? std::nullopt : std::optional<ExperimentRecord>(it->second));
    if (it == existing.end()) pending.push_back(job);
  }

  std::map<std::string, ExperimentRecord> computed;
  std::mutex computed_mutex;
  detail::ordered_pool(pending, workers, run_baseline, [&](ExperimentRecord r) {
    std::lock_guard<std::mutex> lock(computed_mutex);
    computed[record_key(r)] = std::move(r);
  });
  outcome.cells_computed += static_cast<int>(pending.size());

  for (std::size_t i = 0; i < baseline_jobs.size(); ++i) {
    ExperimentRecord r;
    if (plan[i].has_value()) {
      r = *plan[i];
    } else {
      ExperimentRecord probe;
      probe.dataset = dataset_name;
      probe.model = baseline_jobs[i].model;
      probe.strategy = "none";
      probe.epsilon = inf;
      probe.beta = 1.0;
      probe.fold = baseline_jobs[i].fold;
      r = computed.at(record_key(probe));
    }
    std::string bkey = r.model + "|" + std::to_string(r.fold);
    if (r.ok()) {
      baseline_mae[bkey] = r.mae;
      baseline_bacc[r.fold] = r.bacc;
    } else {
      baseline_error[bkey] = r.error.empty() ? "baseline metrics not finite" : r.error;
    }
    emit(std::move(r));
  }

  // Phase B: the grid cells.
  struct CellJob {
    std::string model;
    std::string strategy;
    double epsilon;
    double beta;
    int fold;
  };
  std::vector<CellJob> cell_jobs;
  for (const auto& model : grid.models) {
    for (const auto& strategy : grid.strategies) {
      for (double epsilon : grid.epsilons) {
        for (double beta : grid.betas) {
          for (int f = 0; f < grid.folds; ++f) cell_jobs.push_back({model, strategy, epsilon, beta, f});
        }
      }
    }
  }

  auto run_cell = [&](const CellJob& job) {
    ExperimentRecord r;
    r.dataset = dataset_name;
    r.model = job.model;
    r.strategy = job.strategy;
    r.epsilon = job.epsilon;
    r.beta = job.beta;
    r.fold = job.fold;
    r.seed = detail::cell_seed(grid.base_seed, job.model, job.strategy, job.epsilon, job.beta, job.fold);
    try {
      std::string bkey = job.model + "|" + std::to_string(job.fold);
      if (baseline_error.count(bkey)) {
        throw std::runtime_error("baseline unavailable: " + baseline_error[bkey]);
      }
      const detail::FoldData& fd = folds[job.fold];
      privacy::PrivacyConfig pc{job.epsilon, job.beta, privacy::parse_strategy(job.strategy),
                                detail::protect_seed(grid.base_seed, job.strategy, job.epsilon, job.beta,
                                                     job.fold)};
      data::RatingDataset protected_train = privacy::protect_dataset(fd.train, attrs, &fd.index, pc);

      recsys::RecModelConfig cfg = resolve_model_config(grid, job.epsilon, job.beta);
      cfg.meta_enabled = job.model == "metamf";
      cfg.seed = detail::train_seed(grid.base_seed, job.model, job.fold);
      recsys::RecModelState state = recsys::train(protected_train, fd.valid, cfg);
      r.mae = recsys::evaluate_mae(state, fd.test);
      r.bacc = shared_bacc(job.strategy, job.epsilon, job.beta, job.fold);
      r.delta_mae_pct = delta_pct(r.mae, baseline_mae.at(bkey));
      r.delta_bacc_pct = delta_pct(r.bacc, baseline_bacc.at(job.fold));
    } catch (const std::exception& e) {
      r.error = sanitize_error(e.what());
    }
    return r;
  };

  std::vector<CellJob> cell_pending;
  std::vector<std::optional<ExperimentRecord>> cell_plan;
  for (const auto& job : cell_jobs) {
    ExperimentRecord probe;
    probe.dataset = dataset_name;
    probe.model = job.model;
    probe.strategy = job.strategy;
    probe.epsilon = job.epsilon;
    probe.beta = job.beta;
    probe.fold = job.fold;
    auto it = existing.find(record_key(probe));
    cell_plan.push_back(it == existing.end() ? std::nullopt : std::optional<ExperimentRecord>(it->second));
    if (it == existing.end()) cell_pending.push_back(job);
  }

  std::size_t next_pending = 0;
  if (cell_pending.empty()) {
    for (auto& cached : cell_plan) emit(std::move(*cached));
  } else {
    // Stream cached rows and computed rows interleaved in canonical order.
    std::vector<std::optional<ExperimentRecord>> done(cell_pending.size());
    std::mutex mtx;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};
    auto body = [&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= cell_pending.size()) return;
        ExperimentRecord r = run_cell(cell_pending[i]);
        {
          std::lock_guard<std::mutex> lock(mtx);
          done[i] = std::move(r);
        }
        cv.notify_all();
      }
    };
    int n = std::max(1, std::min<int>(workers, static_cast<int>(cell_pending.size())));
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int t = 0; t < n; ++t) pool.emplace_back(body);
    for (std::size_t i = 0; i < cell_plan.size(); ++i) {
      if (cell_plan[i].has_value()) {
        emit(std::move(*cell_plan[i]));
      } else {
        std::unique_lock<std::mutex> lock(mtx);
        cv.wait(lock, [&] { return done[next_pending].has_value(); });
        ExperimentRecord r = std::move(*done[next_pending]);
        lock.unlock();
        next_pending++;
        emit(std::move(r));
      }
    }
    for (auto& t : pool) t.join();
  }
  outcome.cells_computed += static_cast<int>(cell_pending.size());
  return outcome;
}

}  // namespace privrec::harness
