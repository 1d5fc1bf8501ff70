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
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "privrec/csv.hpp"
#include "privrec/dataset.hpp"
#include "privrec/rng.hpp"
#include "privrec/tensor.hpp"

namespace privrec::attack {

using data::AttributeTable;
using data::RatingDataset;
using tensor::Tensor;

struct AttackConfig {
  int hidden_dim = 64;
  double learning_rate = 5e-3;
  int epochs = 30;
  int batch_size = 64;
  int runs = 10;
  std::uint64_t seed = 0;
};

inline void validate(const AttackConfig& c) {
  if (c.hidden_dim < 1 || c.epochs < 1 || c.batch_size < 1 || c.runs < 1 || !(c.learning_rate > 0.0)) {
    throw std::invalid_argument("attack config fields must be positive");
  }
}

inline AttackConfig attack_config_from_json(const nlohmann::json& j) {
  AttackConfig c;
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.runs = j.value("runs", c.runs);
  c.seed = j.value("seed", c.seed);
  validate(c);
  return c;
}

inline nlohmann::ordered_json attack_config_to_json(const AttackConfig& c) {
  nlohmann::ordered_json j;
  j["hidden_dim"] = c.hidden_dim;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  return j;
}

struct AttackRun {
  int run = 0;
  std::uint64_t seed = 0;
  double bacc = 0.0;
};

struct AttackResult {
  std::vector<AttackRun> per_run;
  double mean_bacc = 0.0;
  double std_bacc = 0.0;  // sample standard deviation over runs
};

// The user's rating vector: position i carries the rating given to item i,
// unrated items are 0. Raw values, not presence bits.
inline std::vector<double> featurize(const RatingDataset& ds, int user_id) {
  if (user_id < 0 || user_id >= ds.num_users) throw std::out_of_range("featurize: user id out of range");
  std::vector<double> row(ds.num_items, 0.0);
  auto [begin, end] = ds.user_range(user_id);
  for (std::size_t i = begin; i < end; ++i) row[ds.records[i].item_id] = ds.records[i].rating;
  return row;
}

// Mean of the two per-class recalls.
inline double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("balanced_accuracy: prediction/label count mismatch");
  }
  std::size_t n0 = 0, n1 = 0, hit0 = 0, hit1 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) {
      n0++;
      hit0 += predictions[i] == 0;
    } else if (labels[i] == 1) {
      n1++;
      hit1 += predictions[i] == 1;
    } else {
      throw std::invalid_argument("balanced_accuracy: labels must be 0 or 1");
    }
  }
  if (n0 == 0 || n1 == 0) throw std::invalid_argument("balanced_accuracy: labels contain a single class");
  return 0.5 * (static_cast<double>(hit0) / n0 + static_cast<double>(hit1) / n1);
}

namespace detail {

struct Mlp {
  Tensor w1, b1, w2, b2;  // |I| x hidden, hidden, hidden x 2, 2
};

inline Mlp init_mlp(std::size_t in_dim, std::size_t hidden, rng::Engine& engine) {
  Mlp m;
  m.w1 = Tensor::init_uniform({in_dim, hidden}, in_dim, engine);
  m.b1 = Tensor::init_uniform({hidden}, in_dim, engine);
  m.w2 = Tensor::init_uniform({hidden, 2}, hidden, engine);
  m.b2 = Tensor::init_uniform({2}, hidden, engine);
  return m;
}

inline Tensor batch_rows(const Tensor& features, const std::vector<int>& users) {
  std::size_t c = features.shape[1];
  Tensor out = Tensor::zeros({users.size(), c});
  for (std::size_t i = 0; i < users.size(); ++i) {
    std::copy_n(&features.values[static_cast<std::size_t>(users[i]) * c], c, &out.values[i * c]);
  }
  return out;
}

// Argmax class per row; ties resolve to the lower class index.
inline std::vector<int> predict(const Mlp& m, const Tensor& features, const std::vector<int>& users) {
  tensor::Graph g;
  tensor::NodeId x = g.constant(batch_rows(features, users));
  tensor::NodeId h = g.relu(g.add(g.matmul(x, g.constant(m.w1)), g.constant(m.b1)));
  tensor::NodeId logits = g.add(g.matmul(h, g.constant(m.w2)), g.constant(m.b2));
  const Tensor& L = g.value(logits);
  std::vector<int> out(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    out[i] = L.values[i * 2 + 1] > L.values[i * 2] ? 1 : 0;
  }
  return out;
}

inline double bacc_on(const Mlp& m, const Tensor& features, const std::vector<int>& users,
                      const AttributeTable& attrs) {
  std::vector<int> labels;
  labels.reserve(users.size());
  for (int u : users) labels.push_back(attrs.attribute_of[u]);
  return balanced_accuracy(predict(m, features, users), labels);
}

inline bool has_both_classes(const std::vector<int>& users, const AttributeTable& attrs) {
  bool c0 = false, c1 = false;
  for (int u : users) (attrs.attribute_of[u] ? c1 : c0) = true;
  return c0 && c1;
}

}  // namespace detail

// One hidden ReLU layer and two linear output neurons, trained with
// cross-entropy over `runs` independent user-level 60/20/20 splits. Each
// run's epoch snapshot is selected by validation balanced accuracy and
// scored on the held-out test users.
inline AttackResult run_attack(const RatingDataset& ds, const AttributeTable& attrs,
                               const AttackConfig& config) {
  validate(config);
  data::check_attributes(ds, attrs);

  Tensor features = Tensor::zeros({static_cast<std::size_t>(ds.num_users),
                                   static_cast<std::size_t>(ds.num_items)});
  for (const auto& r : ds.records) {
    features.values[static_cast<std::size_t>(r.user_id) * ds.num_items + r.item_id] = r.rating;
  }

  AttackResult result;
  for (int run = 0; run < config.runs; ++run) {
    std::uint64_t run_seed = rng::derive_seed(config.seed, "attack-run", run);
    rng::Engine engine(run_seed);

    std::vector<int> users(ds.num_users);
    for (int u = 0; u < ds.num_users; ++u) users[u] = u;
    std::size_t n_train = data::floor_fraction(0.6, users.size());
    std::size_t n_valid = data::floor_fraction(0.2, users.size());
    std::vector<int> train_users, valid_users, test_users;
    constexpr int kMaxRetries = 100;
    for (int attempt = 0;; ++attempt) {
      engine.shuffle(users);
      train_users.assign(users.begin(), users.begin() + n_train);
      valid_users.assign(users.begin() + n_train, users.begin() + n_train + n_valid);
      test_users.assign(users.begin() + n_train + n_valid, users.end());
      if (detail::has_both_classes(train_users, attrs) && detail::has_both_classes(valid_users, attrs) &&
          detail::has_both_classes(test_users, attrs)) {
        break;
      }
      if (attempt >= kMaxRetries) {
        throw std::runtime_error("attack split failed to contain both classes after " +
                                 std::to_string(kMaxRetries) + " retries");
      }
    }

    detail::Mlp mlp = detail::init_mlp(ds.num_items, config.hidden_dim, engine);
    tensor::AdamState adam;
    detail::Mlp best = mlp;
    double best_valid = -1.0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      engine.shuffle(train_users);
      std::size_t batch = static_cast<std::size_t>(config.batch_size);
      for (std::size_t begin = 0; begin < train_users.size(); begin += batch) {
        std::size_t end = std::min(begin + batch, train_users.size());
        std::vector<int> batch_users(train_users.begin() + begin, train_users.begin() + end);
        std::vector<int> labels;
        labels.reserve(batch_users.size());
        for (int u : batch_users) labels.push_back(attrs.attribute_of[u]);

        tensor::Graph g;
        tensor::NodeId x = g.constant(detail::batch_rows(features, batch_users));
        tensor::NodeId w1 = g.parameter(mlp.w1), b1 = g.parameter(mlp.b1);
        tensor::NodeId w2 = g.parameter(mlp.w2), b2 = g.parameter(mlp.b2);
        tensor::NodeId h = g.relu(g.add(g.matmul(x, w1), b1));
        tensor::NodeId logits = g.add(g.matmul(h, w2), b2);
        tensor::NodeId loss = g.cross_entropy_with_logits(logits, labels);
        g.backward(loss);
        tensor::adam_step({&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2},
                          {&g.grad(w1), &g.grad(b1), &g.grad(w2), &g.grad(b2)}, adam,
                          config.learning_rate);
      }
      double valid = detail::bacc_on(mlp, features, valid_users, attrs);
      if (valid > best_valid) {
        best_valid = valid;
        best = mlp;
      }
    }

    result.per_run.push_back({run, run_seed, detail::bacc_on(best, features, test_users, attrs)});
  }

  double sum = 0.0;
  for (const auto& r : result.per_run) sum += r.bacc;
  result.mean_bacc = sum / static_cast<double>(result.per_run.size());
  double sq = 0.0;
  for (const auto& r : result.per_run) sq += (r.bacc - result.mean_bacc) * (r.bacc - result.mean_bacc);
  result.std_bacc = result.per_run.size() > 1
                        ? std::sqrt(sq / static_cast<double>(result.per_run.size() - 1))
                        : 0.0;
  return result;
}

inline std::string attack_csv(const AttackResult& result) {
  std::string out = "run,seed,bacc\n";
  for (const auto& r : result.per_run) {
    out += std::to_string(r.run);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += csv::format_double(r.bacc);
    out += '\n';
  }
  return out;
}

}  // namespace privrec::attack
