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
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "privrec/csv.hpp"
#include "privrec/dataset.hpp"
#include "privrec/rng.hpp"
#include "privrec/stereotype.hpp"

namespace privrec::privacy {

using data::AttributeTable;
using data::RatingDataset;
using data::RatingRecord;
using stereotype::StereotypeIndex;

enum class Strategy { targeted, random };

inline const char* strategy_name(Strategy s) { return s == Strategy::targeted ? "targeted" : "random"; }

inline Strategy parse_strategy(const std::string& name) {
  if (name == "targeted") return Strategy::targeted;
  if (name == "random") return Strategy::random;
  throw std::invalid_argument("unknown strategy: " + name);
}

struct PrivacyConfig {
  double epsilon = std::numeric_limits<double>::infinity();  // > 0, may be infinite
  double beta = 1.0;                                         // in [0, 1]
  Strategy strategy = Strategy::targeted;
  std::uint64_t seed = 0;
};

inline void validate(const PrivacyConfig& config) {
  if (!(config.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (config.beta < 0.0 || config.beta > 1.0) throw std::invalid_argument("beta outside [0, 1]");
}

// Probability that the coin-flip mechanism keeps a record:
// e^eps / (e^eps + 1), written as a logistic for stability at large eps.
inline double keep_probability(double epsilon) {
  return 1.0 / (1.0 + std::exp(-epsilon));
}

// Items available as replacements for one user: the items outside the user's
// profile, each usable at most once so the one-record-per-(user, item)
// invariant survives.
class ReplacementPool {
 public:
  ReplacementPool(const RatingDataset& ds, int user_id) {
    auto [begin, end] = ds.user_range(user_id);
    items_.reserve(ds.num_items - (end - begin));
    std::size_t next = begin;
    for (int i = 0; i < ds.num_items; ++i) {
      if (next < end && ds.records[next].item_id == i) {
        ++next;
      } else {
        items_.push_back(i);
      }
    }
    live_ = items_.size();
  }

  std::size_t remaining() const { return live_; }

  // Uniform over the not-yet-used candidates, consuming one engine draw.
  int draw(rng::Engine& engine) {
    if (live_ == 0) throw std::runtime_error("no replacement candidates: user rated every item");
    std::size_t pick = engine.index(live_);
    std::swap(items_[pick], items_[live_ - 1]);
    return items_[--live_];
  }

 private:
  std::vector<int> items_;
  std::size_t live_ = 0;
};

struct FlipOutcome {
  bool kept = true;
  RatingRecord record;  // the original when kept, the substitute otherwise
};

// Randomized response on one record: keep with probability e^eps/(e^eps+1);
// otherwise substitute an unused item outside the profile with a rating drawn
// uniformly from the full scale. Infinite epsilon keeps without consuming
// randomness, so protected and unprotected pipelines share this code path.
inline FlipOutcome coin_flip(const RatingRecord& record, double epsilon,
                             const std::vector<double>& rating_scale, ReplacementPool& pool,
                             rng::Engine& engine) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (std::isinf(epsilon)) return {true, record};
  if (engine.uniform() < keep_probability(epsilon)) return {true, record};
  FlipOutcome out;
  out.kept = false;
  out.record.user_id = record.user_id;
  out.record.item_id = pool.draw(engine);
  out.record.rating = rating_scale[engine.index(rating_scale.size())];
  return out;
}

// Standalone form with the pool built from the dataset on the fly.
inline FlipOutcome coin_flip(const RatingRecord& record, const RatingDataset& ds, int user_id,
                             double epsilon, rng::Engine& engine) {
  ReplacementPool pool(ds, user_id);
  return coin_flip(record, epsilon, ds.rating_scale, pool, engine);
}

struct Replacement {
  int original_item = 0;
  RatingRecord record;
};

struct ProtectedProfile {
  std::vector<RatingRecord> kept;      // untouched records plus coin-flip survivors
  std::vector<Replacement> replaced;
  std::vector<int> selected;           // D^s_u: the items the mechanism targeted, ascending
};

// Applies the mechanism to one user: the selection strategy picks
// ceil((1-beta)*|D_u|) records, each goes through the coin flip, the rest
// pass through untouched. Selected records are flipped in ascending item
// order so the consumed randomness is reproducible.
inline ProtectedProfile protect_user(const RatingDataset& ds, const AttributeTable& attrs,
                                     const StereotypeIndex* index, int user_id,
                                     const PrivacyConfig& config, rng::Engine& engine) {
  validate(config);
  std::vector<int> selected;
  if (config.strategy == Strategy::targeted) {
    if (!index) throw std::invalid_argument("targeted strategy requires a stereotype index");
    selected = stereotype::select_stereotypical(*index, ds, attrs, user_id, config.beta);
  } else {
    selected = stereotype::select_random(ds, user_id, config.beta, engine);
  }

  ProtectedProfile out;
  out.selected = selected;
  auto [begin, end] = ds.user_range(user_id);
  out.kept.reserve(end - begin);

  ReplacementPool pool(ds, user_id);
  std::size_t sel = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const RatingRecord& rec = ds.records[i];
    // `selected` and the profile are both ascending by item id.
    if (sel < selected.size() && selected[sel] == rec.item_id) {
      ++sel;
      FlipOutcome outcome = coin_flip(rec, config.epsilon, ds.rating_scale, pool, engine);
      if (outcome.kept) {
        out.kept.push_back(outcome.record);
      } else {
        out.replaced.push_back({rec.item_id, outcome.record});
      }
    } else {
      out.kept.push_back(rec);
    }
  }
  return out;
}

// Whole-dataset protection. Each user's randomness comes from an independent
// stream derived from (seed, user id), so results do not depend on iteration
// order and users may be processed concurrently.
inline RatingDataset protect_dataset(const RatingDataset& ds, const AttributeTable& attrs,
                                     const StereotypeIndex* index, const PrivacyConfig& config,
                                     std::vector<ProtectedProfile>* profiles_out = nullptr) {
  validate(config);
  RatingDataset out;
  out.num_users = ds.num_users;
  out.num_items = ds.num_items;
  out.rating_scale = ds.rating_scale;
  out.user_ids = ds.user_ids;
  out.item_ids = ds.item_ids;
  out.records.reserve(ds.records.size());
  if (profiles_out) profiles_out->clear();
  for (int u = 0; u < ds.num_users; ++u) {
    rng::Engine engine(rng::derive_seed(config.seed, "protect-user", u));
    ProtectedProfile profile = protect_user(ds, attrs, index, u, config, engine);
    for (const auto& r : profile.kept) out.records.push_back(r);
    for (const auto& r : profile.replaced) out.records.push_back(r.record);
    if (profiles_out) profiles_out->push_back(std::move(profile));
  }
  data::finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// protection_manifest.csv: one row per targeted record, stating what the coin
// decided. Records outside the selection are untouched and not listed.

inline std::string manifest_csv(const std::vector<ProtectedProfile>& profiles,
                                const RatingDataset& original) {
  std::string out = "user_id,original_item,action,new_item,new_rating\n";
  for (int u = 0; u < static_cast<int>(profiles.size()); ++u) {
    const auto& profile = profiles[u];
    auto [begin, end] = original.user_range(u);
    std::size_t next_replaced = 0;
    for (int item : profile.selected) {
      out += std::to_string(u);
      out += ',';
      out += std::to_string(item);
      if (next_replaced < profile.replaced.size() &&
          profile.replaced[next_replaced].original_item == item) {
        const auto& r = profile.replaced[next_replaced++].record;
        out += ",replaced,";
        out += std::to_string(r.item_id);
        out += ',';
        out += csv::format_double(r.rating);
      } else {
        auto it = std::lower_bound(original.records.begin() + begin, original.records.begin() + end,
                                   item, [](const RatingRecord& r, int id) { return r.item_id < id; });
        out += ",kept,";
        out += std::to_string(item);
        out += ',';
        out += csv::format_double(it->rating);
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace privrec::privacy
