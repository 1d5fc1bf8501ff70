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
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "privrec/csv.hpp"
#include "privrec/dataset.hpp"
#include "privrec/rng.hpp"
#include "privrec/tensor.hpp"

namespace privrec::recsys {

using data::RatingDataset;
using tensor::Tensor;

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RecModelConfig {
  int user_embedding_dim = 32;    // d_u
  int collaborative_dim = 32;     // d_c
  int item_feature_dim = 16;      // r, the shared low-rank item dimension
  int hypernet_hidden_dim = 32;
  int prediction_hidden_dim = 32; // h; also the private item-embedding width
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 50;
  std::uint64_t seed = 0;
  bool meta_enabled = true;       // false = freeze the meta path (stop-gradient)
};

inline void validate(const RecModelConfig& c) {
  if (c.user_embedding_dim < 1 || c.collaborative_dim < 1 || c.item_feature_dim < 1 ||
      c.hypernet_hidden_dim < 1 || c.prediction_hidden_dim < 1) {
    throw std::invalid_argument("model dimensions must be >= 1");
  }
  if (c.batch_size < 1 || c.epochs < 1 || !(c.learning_rate > 0.0)) {
    throw std::invalid_argument("batch_size, epochs and learning_rate must be positive");
  }
}

inline RecModelConfig config_from_json(const nlohmann::json& j) {
  RecModelConfig c;
  c.user_embedding_dim = j.value("user_embedding_dim", c.user_embedding_dim);
  c.collaborative_dim = j.value("collaborative_dim", c.collaborative_dim);
  c.item_feature_dim = j.value("item_feature_dim", c.item_feature_dim);
  c.hypernet_hidden_dim = j.value("hypernet_hidden_dim", c.hypernet_hidden_dim);
  c.prediction_hidden_dim = j.value("prediction_hidden_dim", c.prediction_hidden_dim);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.meta_enabled = j.value("meta_enabled", c.meta_enabled);
  validate(c);
  return c;
}

inline nlohmann::ordered_json config_to_json(const RecModelConfig& c) {
  nlohmann::ordered_json j;
  j["user_embedding_dim"] = c.user_embedding_dim;
  j["collaborative_dim"] = c.collaborative_dim;
  j["item_feature_dim"] = c.item_feature_dim;
  j["hypernet_hidden_dim"] = c.hypernet_hidden_dim;
  j["prediction_hidden_dim"] = c.prediction_hidden_dim;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["meta_enabled"] = c.meta_enabled;
  return j;
}

struct TrainLogEntry {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_mae = 0.0;
};

// All learnable state. The hypernetwork maps a user's collaborative vector
// to (head A) the user's private prediction MLP and (head B) the user's
// low-rank item transform.
struct RecModelState {
  RecModelConfig config;
  int num_users = 0;
  int num_items = 0;
  double min_rating = 1.0;
  double max_rating = 5.0;

  Tensor user_embeddings;  // |U| x d_u
  Tensor memory;           // d_u x d_c
  Tensor head_a_w1, head_a_b1;  // d_c x hh, hh
  Tensor head_a_w2, head_a_b2;  // hh x P, P where P = h*h + 2h + 1
  Tensor head_b_w1, head_b_b1;  // d_c x hh, hh
  Tensor head_b_w2, head_b_b2;  // hh x (h*r), h*r
  Tensor item_features;    // |I| x r

  tensor::AdamState adam;
  std::vector<TrainLogEntry> log;

  // Generated parameter vector layout for head A, in columns of its output:
  // [W1 (h x h) | b1 (h) | W2 (h) | b2 (1)].
  std::size_t head_a_out() const {
    std::size_t h = config.prediction_hidden_dim;
    return h * h + 2 * h + 1;
  }
  std::size_t head_b_out() const {
    return static_cast<std::size_t>(config.prediction_hidden_dim) * config.item_feature_dim;
  }
};

inline const std::vector<std::string>& parameter_names() {
  static const std::vector<std::string> names = {
      "user_embeddings", "memory",    "head_a_w1", "head_a_b1", "head_a_w2", "head_a_b2",
      "head_b_w1",       "head_b_b1", "head_b_w2", "head_b_b2", "item_features"};
  return names;
}

inline std::vector<Tensor*> parameter_tensors(RecModelState& s) {
  return {&s.user_embeddings, &s.memory,    &s.head_a_w1, &s.head_a_b1, &s.head_a_w2, &s.head_a_b2,
          &s.head_b_w1,       &s.head_b_b1, &s.head_b_w2, &s.head_b_b2, &s.item_features};
}

inline std::vector<const Tensor*> parameter_tensors(const RecModelState& s) {
  return {&s.user_embeddings, &s.memory,    &s.head_a_w1, &s.head_a_b1, &s.head_a_w2, &s.head_a_b2,
          &s.head_b_w1,       &s.head_b_b1, &s.head_b_w2, &s.head_b_b2, &s.item_features};
}

inline RecModelState init_model(const RecModelConfig& config, int num_users, int num_items,
                                double min_rating, double max_rating) {
  validate(config);
  if (num_users < 1 || num_items < 1) throw std::invalid_argument("init_model: need users and items");
  RecModelState s;
  s.config = config;
  s.num_users = num_users;
  s.num_items = num_items;
  s.min_rating = min_rating;
  s.max_rating = max_rating;

  rng::Engine engine(rng::derive_seed(config.seed, "model-init"));
  auto du = static_cast<std::size_t>(config.user_embedding_dim);
  auto dc = static_cast<std::size_t>(config.collaborative_dim);
  auto r = static_cast<std::size_t>(config.item_feature_dim);
  auto hh = static_cast<std::size_t>(config.hypernet_hidden_dim);

  s.user_embeddings = Tensor::init_uniform({static_cast<std::size_t>(num_users), du}, du, engine);
  s.memory = Tensor::init_uniform({du, dc}, du, engine);
  s.head_a_w1 = Tensor::init_uniform({dc, hh}, dc, engine);
  s.head_a_b1 = Tensor::init_uniform({hh}, dc, engine);
  s.head_a_w2 = Tensor::init_uniform({hh, s.head_a_out()}, hh, engine);
  s.head_a_b2 = Tensor::init_uniform({s.head_a_out()}, hh, engine);
  s.head_b_w1 = Tensor::init_uniform({dc, hh}, dc, engine);
  s.head_b_b1 = Tensor::init_uniform({hh}, dc, engine);
  s.head_b_w2 = Tensor::init_uniform({hh, s.head_b_out()}, hh, engine);
  s.head_b_b2 = Tensor::init_uniform({s.head_b_out()}, hh, engine);
  s.item_features = Tensor::init_uniform({static_cast<std::size_t>(num_items), r}, r, engine);
  return s;
}

struct ForwardNodes {
  tensor::NodeId prediction = -1;            // shape (batch)
  std::vector<tensor::NodeId> parameters;    // same order as parameter_names()
};

// Records the batched forward pass on the graph:
//   c_u     = tanh(e_u M)
//   head A  : c_u -> [W1_u | b1_u | W2_u | b2_u]   (private prediction MLP)
//   head B  : c_u -> G_u                            (private item transform)
//   q_{u,i} = G_u f_i
//   score   = W2_u relu(W1_u q + b1_u) + b2_u
// With the meta path disabled, both head outputs pass through stop_gradient,
// freezing everything upstream of them at its initial value.
inline ForwardNodes build_forward(tensor::Graph& g, const RecModelState& s,
                                  const std::vector<int>& users, const std::vector<int>& items,
                                  bool training) {
  const auto& c = s.config;
  auto h = static_cast<std::size_t>(c.prediction_hidden_dim);
  auto r = static_cast<std::size_t>(c.item_feature_dim);

  ForwardNodes out;
  auto leaf = [&](const Tensor& t) { return training ? g.parameter(t) : g.constant(t); };
  tensor::NodeId user_emb = leaf(s.user_embeddings);
  tensor::NodeId memory = leaf(s.memory);
  tensor::NodeId a_w1 = leaf(s.head_a_w1), a_b1 = leaf(s.head_a_b1);
  tensor::NodeId a_w2 = leaf(s.head_a_w2), a_b2 = leaf(s.head_a_b2);
  tensor::NodeId b_w1 = leaf(s.head_b_w1), b_b1 = leaf(s.head_b_b1);
  tensor::NodeId b_w2 = leaf(s.head_b_w2), b_b2 = leaf(s.head_b_b2);
  tensor::NodeId item_feat = leaf(s.item_features);
  out.parameters = {user_emb, memory, a_w1, a_b1, a_w2, a_b2, b_w1, b_b1, b_w2, b_b2, item_feat};

  tensor::NodeId e_u = g.gather_rows(user_emb, users);
  tensor::NodeId c_u = g.tanh(g.matmul(e_u, memory));

  tensor::NodeId ha = g.relu(g.add(g.matmul(c_u, a_w1), a_b1));
  tensor::NodeId pa = g.add(g.matmul(ha, a_w2), a_b2);
  tensor::NodeId hb = g.relu(g.add(g.matmul(c_u, b_w1), b_b1));
  tensor::NodeId pb = g.add(g.matmul(hb, b_w2), b_b2);
  if (!c.meta_enabled) {
    pa = g.stop_gradient(pa);
    pb = g.stop_gradient(pb);
  }

  tensor::NodeId f_i = g.gather_rows(item_feat, items);
  tensor::NodeId q = g.batched_matvec(pb, f_i, h, r);

  std::size_t w1_end = h * h;
  tensor::NodeId w1 = g.slice_cols(pa, 0, w1_end);
  tensor::NodeId b1 = g.slice_cols(pa, w1_end, w1_end + h);
  tensor::NodeId w2 = g.slice_cols(pa, w1_end + h, w1_end + 2 * h);
  tensor::NodeId b2 = g.slice_cols(pa, w1_end + 2 * h, w1_end + 2 * h + 1);

  tensor::NodeId z = g.relu(g.add(g.batched_matvec(w1, q, h, h), b1));
  tensor::NodeId score = g.add(g.row_sum(g.mul(w2, z)), g.reshape(b2, {users.size()}));
  out.prediction = score;
  return out;
}

// Raw (unclamped) prediction for one (user, item) pair.
inline double forward(const RecModelState& s, int user_id, int item_id) {
  if (user_id < 0 || user_id >= s.num_users) throw std::out_of_range("forward: user id out of range");
  if (item_id < 0 || item_id >= s.num_items) throw std::out_of_range("forward: item id out of range");
  tensor::Graph g;
  ForwardNodes nodes = build_forward(g, s, {user_id}, {item_id}, /*training=*/false);
  return g.value(nodes.prediction).values[0];
}

// Ratings are trained in a normalized [-1, 1] target range so the randomly
// initialized score scale is commensurate with the targets; these map between
// the two. A degenerate scale (min == max) trains against constant zeros.
inline double rating_mid(const RecModelState& s) { return (s.min_rating + s.max_rating) / 2.0; }
inline double rating_halfspan(const RecModelState& s) {
  double half = (s.max_rating - s.min_rating) / 2.0;
  return half > 0.0 ? half : 1.0;
}

// Mean absolute error over a dataset, predictions mapped back from the
// normalized training range and clamped to the rating scale.
inline double evaluate_mae(const RecModelState& s, const RatingDataset& ds) {
  if (ds.records.empty()) throw std::invalid_argument("evaluate_mae: empty dataset");
  constexpr std::size_t kChunk = 2048;
  double total = 0.0;
  for (std::size_t begin = 0; begin < ds.records.size(); begin += kChunk) {
    std::size_t end = std::min(begin + kChunk, ds.records.size());
    std::vector<int> users, items;
    users.reserve(end - begin);
    items.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      users.push_back(ds.records[i].user_id);
      items.push_back(ds.records[i].item_id);
    }
    tensor::Graph g;
    ForwardNodes nodes = build_forward(g, s, users, items, /*training=*/false);
    const Tensor& pred = g.value(nodes.prediction);
    for (std::size_t i = begin; i < end; ++i) {
      double raw = rating_mid(s) + rating_halfspan(s) * pred.values[i - begin];
      double p = std::clamp(raw, s.min_rating, s.max_rating);
      total += std::abs(p - ds.records[i].rating);
    }
  }
  return total / static_cast<double>(ds.records.size());
}

// Observer receiving every batch's parameter gradients, in
// parameter_names() order. Used by tests probing gradient flow.
using BatchObserver = std::function<void(const std::vector<const Tensor*>&)>;

// Mini-batch squared-error training with Adam on normalized targets; keeps
// the epoch snapshot with the lowest validation MAE. Deterministic for a
// fixed config.
inline RecModelState train(const RatingDataset& train_ds, const RatingDataset& valid_ds,
                           const RecModelConfig& config, const BatchObserver& observer = nullptr) {
  if (train_ds.records.empty()) throw std::invalid_argument("train: empty training set");
  RecModelState s = init_model(config, train_ds.num_users, train_ds.num_items,
                               train_ds.min_rating(), train_ds.max_rating());

  rng::Engine shuffle_engine(rng::derive_seed(config.seed, "train-shuffle"));
  std::vector<std::size_t> order(train_ds.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_mae = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best;
  int best_epoch = -1;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_engine.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batch = static_cast<std::size_t>(config.batch_size);
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += batch) {
        std::size_t end = std::min(begin + batch, order.size());
        std::vector<int> users, items;
        std::vector<double> targets;
        users.reserve(end - begin);
        items.reserve(end - begin);
        targets.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          const auto& rec = train_ds.records[order[i]];
          users.push_back(rec.user_id);
          items.push_back(rec.item_id);
          targets.push_back((rec.rating - rating_mid(s)) / rating_halfspan(s));
        }
        tensor::Graph g;
        ForwardNodes nodes = build_forward(g, s, users, items, /*training=*/true);
        tensor::NodeId target = g.constant(Tensor({targets.size()}, targets));
        tensor::NodeId loss = g.squared_error(nodes.prediction, target);
        g.backward(loss);
        loss_sum += g.value(loss).values[0] * static_cast<double>(end - begin);

        std::vector<const Tensor*> grads;
        grads.reserve(nodes.parameters.size());
        for (tensor::NodeId id : nodes.parameters) grads.push_back(&g.grad(id));
        if (observer) observer(grads);
        tensor::adam_step(parameter_tensors(s), grads, s.adam, config.learning_rate);
      }
    } catch (const tensor::NumericError& e) {
      throw TrainError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    double train_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(train_loss)) {
      throw TrainError("training diverged at epoch " + std::to_string(epoch));
    }
    double valid_mae = valid_ds.records.empty() ? train_loss : evaluate_mae(s, valid_ds);
    s.log.push_back({epoch, train_loss, valid_mae});
    if (valid_mae < best_mae) {
      best_mae = valid_mae;
      best_epoch = epoch;
      best.clear();
      for (Tensor* t : parameter_tensors(s)) best.push_back(*t);
    }
  }

  if (best_epoch >= 0) {
    auto params = parameter_tensors(s);
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
  }
  return s;
}

inline std::string training_log_csv(const RecModelState& s) {
  std::string out = "epoch,train_loss,valid_mae\n";
  for (const auto& e : s.log) {
    out += std::to_string(e.epoch);
    out += ',';
    out += csv::format_double(e.train_loss);
    out += ',';
    out += csv::format_double(e.valid_mae);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Versioned binary state file: magic, JSON metadata blob, named f64 tensors
// (little-endian, as on every platform this builds for).

namespace detail {

constexpr char kMagic[8] = {'P', 'R', 'E', 'C', 'M', 'D', 'L', '1'};

inline void write_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ofstream& f, std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }

inline std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline std::uint64_t read_u64(std::ifstream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

inline void write_tensor(std::ofstream& f, const std::string& name, const Tensor& t) {
  write_u32(f, static_cast<std::uint32_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(f, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) write_u64(f, d);
  f.write(reinterpret_cast<const char*>(t.values.data()),
          static_cast<std::streamsize>(t.values.size() * sizeof(double)));
}

inline std::pair<std::string, Tensor> read_tensor(std::ifstream& f) {
  std::uint32_t name_len = read_u32(f);
  std::string name(name_len, '\0');
  f.read(name.data(), name_len);
  std::uint32_t ndim = read_u32(f);
  std::vector<std::size_t> shape(ndim);
  for (auto& d : shape) d = read_u64(f);
  Tensor t = Tensor::zeros(shape);
  f.read(reinterpret_cast<char*>(t.values.data()),
         static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!f) throw std::runtime_error("model file truncated while reading tensor " + name);
  return {std::move(name), std::move(t)};
}

}  // namespace detail

inline void save_model(const std::string& path, const RecModelState& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(detail::kMagic, 8);

  nlohmann::ordered_json meta;
  meta["config"] = config_to_json(s.config);
  meta["num_users"] = s.num_users;
  meta["num_items"] = s.num_items;
  meta["min_rating"] = s.min_rating;
  meta["max_rating"] = s.max_rating;
  meta["adam_step"] = s.adam.step;
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  for (const auto& e : s.log) log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_mae", e.valid_mae}});
  meta["log"] = std::move(log);
  std::string blob = meta.dump();
  detail::write_u32(f, static_cast<std::uint32_t>(blob.size()));
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  auto params = parameter_tensors(s);
  std::uint32_t count = static_cast<std::uint32_t>(params.size() + s.adam.m.size() + s.adam.v.size());
  detail::write_u32(f, count);
  for (std::size_t i = 0; i < params.size(); ++i) detail::write_tensor(f, parameter_names()[i], *params[i]);
  for (std::size_t i = 0; i < s.adam.m.size(); ++i) detail::write_tensor(f, "adam_m_" + std::to_string(i), s.adam.m[i]);
  for (std::size_t i = 0; i < s.adam.v.size(); ++i) detail::write_tensor(f, "adam_v_" + std::to_string(i), s.adam.v[i]);
  if (!f) throw std::runtime_error("failed writing " + path);
}

inline RecModelState load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, detail::kMagic, 8) != 0) {
    throw std::runtime_error(path + " is not a model state file");
  }
  std::uint32_t blob_len = detail::read_u32(f);
  std::string blob(blob_len, '\0');
  f.read(blob.data(), blob_len);
  auto meta = nlohmann::json::parse(blob);

  RecModelState s;
  s.config = config_from_json(meta.at("config"));
  s.num_users = meta.at("num_users").get<int>();
  s.num_items = meta.at("num_items").get<int>();
  s.min_rating = meta.at("min_rating").get<double>();
  s.max_rating = meta.at("max_rating").get<double>();
  s.adam.step = meta.at("adam_step").get<long>();
  for (const auto& e : meta.at("log")) {
    s.log.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("valid_mae").get<double>()});
  }

  std::uint32_t count = detail::read_u32(f);
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(detail::read_tensor(f));

  auto params = parameter_tensors(s);
  for (auto& [name, t] : tensors) {
    auto it = std::find(parameter_names().begin(), parameter_names().end(), name);
    if (it != parameter_names().end()) {
      *params[static_cast<std::size_t>(it - parameter_names().begin())] = std::move(t);
    } else if (name.rfind("adam_m_", 0) == 0) {
      std::size_t idx = std::stoul(name.substr(7));
      if (s.adam.m.size() <= idx) s.adam.m.resize(idx + 1);
      s.adam.m[idx] = std::move(t);
    } else if (name.rfind("adam_v_", 0) == 0) {
      std::size_t idx = std::stoul(name.substr(7));
      if (s.adam.v.size() <= idx) s.adam.v.resize(idx + 1);
      s.adam.v[idx] = std::move(t);
    } else {
      throw std::runtime_error(path + ": unknown tensor " + name);
    }
  }
  return s;
}

}  // namespace privrec::recsys
