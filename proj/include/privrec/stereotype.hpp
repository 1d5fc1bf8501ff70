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
#include <stdexcept>
#include <string>
#include <vector>

#include "privrec/csv.hpp"
#include "privrec/dataset.hpp"
#include "privrec/rng.hpp"

namespace privrec::stereotype {

using data::AttributeTable;
using data::RatingDataset;

// Per-item fraction of each attribute group that rated the item, computed
// over one record subset (a train split or the full dataset).
struct StereotypeIndex {
  std::vector<double> igi_a;     // indexed by item id
  std::vector<double> igi_abar;
  std::string built_on;          // which record subset produced the counts
};

struct ScoredItem {
  int item_id = 0;
  double signed_score = 0.0;  // in [-1, 1], positive = inclined toward the user's group
};

// IGI(i, g) = |{u in group g : (u, i) rated in `records`}| / |group g|.
// Group sizes come from the attribute table, so users absent from the record
// subset still count in the denominator.
inline StereotypeIndex build_index(const RatingDataset& records, const AttributeTable& attrs,
                                   std::string built_on = "full") {
  if (records.records.empty()) throw std::invalid_argument("build_index: empty record subset");
  data::check_attributes(records, attrs);

  const double n_a = attrs.count(1);
  const double n_abar = attrs.count(0);

  StereotypeIndex index;
  index.built_on = std::move(built_on);
  index.igi_a.assign(records.num_items, 0.0);
  index.igi_abar.assign(records.num_items, 0.0);
  for (const auto& r : records.records) {
    // One record per (user, item), so each record is one distinct rater.
    if (attrs.attribute_of[r.user_id]) {
      index.igi_a[r.item_id] += 1.0;
    } else {
      index.igi_abar[r.item_id] += 1.0;
    }
  }
  for (auto& v : index.igi_a) v /= n_a;
  for (auto& v : index.igi_abar) v /= n_abar;
  return index;
}

// Signed stereotypicality of an item for a user of the given group:
// +(IGI_a - IGI_abar) / max(IGI_a, IGI_abar) for group a, negated for the
// complement, and 0 when the item is unrated by both groups.
inline double item_score(const StereotypeIndex& index, int item_id, int user_group) {
  if (item_id < 0 || item_id >= static_cast<int>(index.igi_a.size())) {
    throw std::out_of_range("item_score: unknown item " + std::to_string(item_id));
  }
  double a = index.igi_a[item_id];
  double abar = index.igi_abar[item_id];
  double denom = std::max(a, abar);
  if (denom == 0.0) return 0.0;
  double score = (a - abar) / denom;
  return user_group == 1 ? score : -score;
}

// Number of records the privacy mechanism targets: k = ceil((1-beta) * n).
inline std::size_t selection_size(double beta, std::size_t profile_size) {
  return data::ceil_fraction(1.0 - beta, profile_size);
}

// The k most stereotypical items of the user's profile for their own group,
// ties broken by ascending item id. Returned ascending by item id.
inline std::vector<int> select_stereotypical(const StereotypeIndex& index, const RatingDataset& ds,
                                             const AttributeTable& attrs, int user_id, double beta) {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("select_stereotypical: beta outside [0, 1]");
  const int group = attrs.attribute_of[user_id];
  auto [begin, end] = ds.user_range(user_id);
  std::vector<ScoredItem> scored;
  scored.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    scored.push_back({ds.records[i].item_id, item_score(index, ds.records[i].item_id, group)});
  }
  std::size_t k = selection_size(beta, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(),
                    [](const ScoredItem& x, const ScoredItem& y) {
                      return x.signed_score != y.signed_score ? x.signed_score > y.signed_score
                                                              : x.item_id < y.item_id;
                    });
  std::vector<int> items;
  items.reserve(k);
  for (std::size_t i = 0; i < k; ++i) items.push_back(scored[i].item_id);
  std::sort(items.begin(), items.end());
  return items;
}

// k items drawn uniformly without replacement from the user's profile.
inline std::vector<int> select_random(const RatingDataset& ds, int user_id, double beta,
                                      rng::Engine& engine) {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("select_random: beta outside [0, 1]");
  auto [begin, end] = ds.user_range(user_id);
  std::size_t n = end - begin;
  std::size_t k = selection_size(beta, n);
  std::vector<int> items;
  items.reserve(k);
  for (std::size_t idx : engine.sample_indices(n, k)) {
    items.push_back(ds.records[begin + idx].item_id);
  }
  std::sort(items.begin(), items.end());
  return items;
}

// Mean signed score over the user's current profile.
inline double user_stereotypicality(const StereotypeIndex& index, const RatingDataset& ds,
                                    const AttributeTable& attrs, int user_id) {
  auto [begin, end] = ds.user_range(user_id);
  if (begin == end) throw std::invalid_argument("user_stereotypicality: empty profile");
  const int group = attrs.attribute_of[user_id];
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    sum += item_score(index, ds.records[i].item_id, group);
  }
  return sum / static_cast<double>(end - begin);
}

struct StereotypeSummary {
  double frac_items_indicative_a = 0.0;     // items whose a-side score is positive
  double frac_items_indicative_abar = 0.0;  // items whose complement-side score is positive
  double mean_user_stereotypicality = 0.0;  // mean-of-item-scores reading, see module notes
  double mean_stereotypical_fraction = 0.0; // mean per-user share of positive-score profile items
};

inline StereotypeSummary stereotype_summary(const StereotypeIndex& index, const RatingDataset& ds,
                                            const AttributeTable& attrs) {
  StereotypeSummary out;
  int pos_a = 0, pos_abar = 0;
  for (int i = 0; i < ds.num_items; ++i) {
    double s = item_score(index, i, 1);
    pos_a += s > 0.0;
    pos_abar += -s > 0.0;
  }
  out.frac_items_indicative_a = static_cast<double>(pos_a) / ds.num_items;
  out.frac_items_indicative_abar = static_cast<double>(pos_abar) / ds.num_items;

  double sum_stereo = 0.0, sum_frac = 0.0;
  int users = 0;
  for (int u = 0; u < ds.num_users; ++u) {
    auto [begin, end] = ds.user_range(u);
    if (begin == end) continue;
    const int group = attrs.attribute_of[u];
    double sum = 0.0;
    int pos = 0;
    for (std::size_t i = begin; i < end; ++i) {
      double s = item_score(index, ds.records[i].item_id, group);
      sum += s;
      pos += s > 0.0;
    }
    sum_stereo += sum / static_cast<double>(end - begin);
    sum_frac += static_cast<double>(pos) / static_cast<double>(end - begin);
    users++;
  }
  if (users > 0) {
    out.mean_user_stereotypicality = sum_stereo / users;
    out.mean_stereotypical_fraction = sum_frac / users;
  }
  return out;
}

// ---------------------------------------------------------------------------
// scores.csv: `item_id,igi_a,igi_abar,score_a_side`, one row per item.

inline void save_scores(const std::string& path, const StereotypeIndex& index) {
  std::string out = "item_id,igi_a,igi_abar,score_a_side\n";
  for (std::size_t i = 0; i < index.igi_a.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += csv::format_double(index.igi_a[i]);
    out += ',';
    out += csv::format_double(index.igi_abar[i]);
    out += ',';
    out += csv::format_double(item_score(index, static_cast<int>(i), 1));
    out += '\n';
  }
  csv::write_file(path, out);
}

inline StereotypeIndex load_scores(const std::string& path) {
  auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "item_id,igi_a,igi_abar,score_a_side") {
    throw csv::ParseError(path + ": bad header");
  }
  StereotypeIndex index;
  index.built_on = "loaded:" + path;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto f = csv::split(lines[ln], ',');
    if (f.size() != 4) throw csv::ParseError(path + ":" + std::to_string(ln + 1) + ": expected 4 fields");
    int item = static_cast<int>(csv::parse_int(f[0], "item id"));
    if (item != static_cast<int>(index.igi_a.size())) {
      throw csv::ParseError(path + ":" + std::to_string(ln + 1) + ": item ids must be dense and ascending");
    }
    index.igi_a.push_back(csv::parse_double(f[1], "igi_a"));
    index.igi_abar.push_back(csv::parse_double(f[2], "igi_abar"));
  }
  return index;
}

}  // namespace privrec::stereotype
