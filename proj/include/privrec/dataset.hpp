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
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "privrec/csv.hpp"
#include "privrec/rng.hpp"

namespace privrec::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RatingRecord {
  int user_id = 0;
  int item_id = 0;
  double rating = 0.0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

// Dense-indexed rating triples. Records are kept sorted by (user, item) so a
// user's profile is a contiguous range; original ids survive only in the
// id maps for reporting.
struct RatingDataset {
  std::vector<RatingRecord> records;
  int num_users = 0;
  int num_items = 0;
  std::vector<double> rating_scale;        // ascending
  std::vector<std::string> user_ids;       // dense index -> original id
  std::vector<std::string> item_ids;
  std::vector<std::size_t> user_offsets;   // size num_users + 1

  std::size_t size() const { return records.size(); }

  std::pair<std::size_t, std::size_t> user_range(int user) const {
    return {user_offsets[user], user_offsets[user + 1]};
  }

  std::size_t profile_size(int user) const {
    return user_offsets[user + 1] - user_offsets[user];
  }

  double min_rating() const { return rating_scale.front(); }
  double max_rating() const { return rating_scale.back(); }
};

// Sorts records, rebuilds the per-user offset table, and enforces the
// one-record-per-(user, item) invariant.
inline void finalize(RatingDataset& ds) {
  std::sort(ds.records.begin(), ds.records.end(), [](const RatingRecord& a, const RatingRecord& b) {
    return a.user_id != b.user_id ? a.user_id < b.user_id : a.item_id < b.item_id;
  });
  for (std::size_t i = 1; i < ds.records.size(); ++i) {
    if (ds.records[i].user_id == ds.records[i - 1].user_id &&
        ds.records[i].item_id == ds.records[i - 1].item_id) {
      throw DataError("duplicate (user, item) pair: user " + std::to_string(ds.records[i].user_id) +
                      ", item " + std::to_string(ds.records[i].item_id));
    }
  }
  ds.user_offsets.assign(static_cast<std::size_t>(ds.num_users) + 1, 0);
  for (const auto& r : ds.records) ds.user_offsets[static_cast<std::size_t>(r.user_id) + 1]++;
  for (std::size_t u = 0; u < static_cast<std::size_t>(ds.num_users); ++u) {
    ds.user_offsets[u + 1] += ds.user_offsets[u];
  }
}

struct AttributeTable {
  std::vector<std::uint8_t> attribute_of;  // per dense user id; 1 = a, 0 = complement
  std::array<std::string, 2> label_names;  // [1] names a, [0] names the complement

  int count(int label) const {
    int n = 0;
    for (auto v : attribute_of) n += (v == label);
    return n;
  }
};

inline void check_attributes(const RatingDataset& ds, const AttributeTable& attrs) {
  if (attrs.attribute_of.size() != static_cast<std::size_t>(ds.num_users)) {
    throw DataError("attribute table does not cover every user");
  }
  if (attrs.count(0) == 0 || attrs.count(1) == 0) {
    throw DataError("attribute table must contain both classes");
  }
}

enum class SplitPart : std::uint8_t { train = 0, valid = 1, test = 2 };

struct SplitAssignment {
  int fold_id = 0;
  std::vector<SplitPart> assignment;  // indexed by record position in the dataset
};

struct ParseReport {
  std::size_t dropped_implicit = 0;       // rating == 0 rows (Bookcrossing)
  std::size_t dropped_age_users = 0;      // users without a usable age
  std::size_t dropped_orphan_ratings = 0; // ratings whose user was dropped/missing
  std::size_t dropped_duplicates = 0;     // repeated (user, item) rows, first kept
};

namespace detail {

inline std::vector<std::string_view> split_double_colon(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find("::", start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 2;
  }
  return fields;
}

// Assembles a dense dataset from (original user id, original item id, rating)
// triples; dense ids follow the sorted order of the original ids.
template <typename Id>
RatingDataset densify(std::vector<std::tuple<Id, Id, double>>& triples, std::vector<double> scale,
                      ParseReport* report) {
  std::vector<Id> users, items;
  users.reserve(triples.size());
  items.reserve(triples.size());
  for (const auto& [u, i, r] : triples) {
    users.push_back(u);
    items.push_back(i);
  }
  auto uniq = [](std::vector<Id>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(users);
  uniq(items);

  std::map<Id, int> user_index, item_index;
  for (std::size_t i = 0; i < users.size(); ++i) user_index[users[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < items.size(); ++i) item_index[items[i]] = static_cast<int>(i);

  RatingDataset ds;
  ds.num_users = static_cast<int>(users.size());
  ds.num_items = static_cast<int>(items.size());
  ds.rating_scale = std::move(scale);
  for (const auto& u : users) {
    if constexpr (std::is_same_v<Id, long long>) {
      ds.user_ids.push_back(std::to_string(u));
    } else {
      ds.user_ids.push_back(u);
    }
  }
  for (const auto& i : items) {
    if constexpr (std::is_same_v<Id, long long>) {
      ds.item_ids.push_back(std::to_string(i));
    } else {
      ds.item_ids.push_back(i);
    }
  }

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(triples.size() * 2);
  ds.records.reserve(triples.size());
  for (const auto& [u, i, r] : triples) {
    int du = user_index[u];
    int di = item_index[i];
    std::uint64_t key = (static_cast<std::uint64_t>(du) << 32) | static_cast<std::uint32_t>(di);
    if (!seen.insert(key).second) {
      if (report) report->dropped_duplicates++;
      continue;
    }
    ds.records.push_back({du, di, r});
  }
  finalize(ds);
  return ds;
}

}  // namespace detail

// MovieLens 1M: `UserID::MovieID::Rating::Timestamp` plus
// `UserID::Gender::Age::Occupation::Zip-code`. Attribute a = female.
inline std::pair<RatingDataset, AttributeTable> parse_movielens(const std::string& ratings_path,
                                                                const std::string& users_path,
                                                                ParseReport* report = nullptr) {
  ParseReport local;
  if (!report) report = &local;

  std::unordered_map<long long, char> gender_of;
  {
    auto lines = csv::read_lines(users_path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      auto f = detail::split_double_colon(lines[ln]);
      if (f.size() != 5) {
        throw csv::ParseError(users_path + ":" + std::to_string(ln + 1) + ": expected 5 '::' fields");
      }
      long long uid = csv::parse_int(csv::trim(f[0]), "user id");
      std::string_view g = csv::trim(f[1]);
      if (g != "F" && g != "M") {
        throw csv::ParseError(users_path + ":" + std::to_string(ln + 1) + ": gender must be F or M");
      }
      gender_of[uid] = g[0];
    }
  }

  std::vector<std::tuple<long long, long long, double>> triples;
  {
    auto lines = csv::read_lines(ratings_path);
    triples.reserve(lines.size());
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      auto f = detail::split_double_colon(lines[ln]);
      if (f.size() != 4) {
        throw csv::ParseError(ratings_path + ":" + std::to_string(ln + 1) + ": expected 4 '::' fields");
      }
      long long uid = csv::parse_int(csv::trim(f[0]), "user id");
      long long iid = csv::parse_int(csv::trim(f[1]), "item id");
      long long rating = csv::parse_int(csv::trim(f[2]), "rating");
      if (rating < 1 || rating > 5) {
        throw csv::ParseError(ratings_path + ":" + std::to_string(ln + 1) + ": rating outside 1..5");
      }
      if (!gender_of.count(uid)) {
        throw DataError("user " + std::to_string(uid) + " appears in ratings but not in users file");
      }
      triples.emplace_back(uid, iid, static_cast<double>(rating));
    }
  }

  RatingDataset ds = detail::densify(triples, {1, 2, 3, 4, 5}, report);
  AttributeTable attrs;
  attrs.label_names = {"male", "female"};
  attrs.attribute_of.resize(ds.user_ids.size());
  for (std::size_t u = 0; u < ds.user_ids.size(); ++u) {
    long long uid = csv::parse_int(ds.user_ids[u], "user id");
    attrs.attribute_of[u] = gender_of.at(uid) == 'F' ? 1 : 0;
  }
  if (!ds.records.empty()) check_attributes(ds, attrs);
  return {std::move(ds), std::move(attrs)};
}

// Bookcrossing: semicolon-separated, quoted CSV. Implicit (rating 0) rows are
// dropped; users without a plausible age (5..100) are dropped with a count.
// Attribute a = age below the threshold; by default the threshold is the
// median age over retained users, a fixed threshold can be supplied instead.
inline std::pair<RatingDataset, AttributeTable> parse_bookcrossing(
    const std::string& ratings_path, const std::string& users_path,
    std::optional<double> age_threshold = std::nullopt, ParseReport* report = nullptr) {
  ParseReport local;
  if (!report) report = &local;

  std::unordered_map<std::string, double> age_of;
  {
    auto lines = csv::read_lines(users_path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      auto f = csv::split_quoted(lines[ln], ';');
      if (f.size() != 3) {
        throw csv::ParseError(users_path + ":" + std::to_string(ln + 1) + ": expected 3 fields");
      }
      if (ln == 0 && f[0] == "User-ID") continue;  // header
      double age = 0.0;
      auto text = csv::trim(f[2]);
      try {
        age = csv::parse_double(text, "age");
      } catch (const csv::ParseError&) {
        report->dropped_age_users++;
        continue;
      }
      if (!(age >= 5.0 && age <= 100.0)) {
        report->dropped_age_users++;
        continue;
      }
      age_of[f[0]] = age;
    }
  }

  std::vector<std::tuple<std::string, std::string, double>> triples;
  {
    auto lines = csv::read_lines(ratings_path);
    triples.reserve(lines.size());
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      auto f = csv::split_quoted(lines[ln], ';');
      if (f.size() != 3) {
        throw csv::ParseError(ratings_path + ":" + std::to_string(ln + 1) + ": expected 3 fields");
      }
      if (ln == 0 && f[0] == "User-ID") continue;  // header
      double rating = csv::parse_double(csv::trim(f[2]), "rating");
      if (rating == 0.0) {
        report->dropped_implicit++;
        continue;
      }
      if (rating < 1.0 || rating > 10.0 || rating != std::floor(rating)) {
        throw csv::ParseError(ratings_path + ":" + std::to_string(ln + 1) + ": rating outside 1..10");
      }
      if (!age_of.count(f[0])) {
        report->dropped_orphan_ratings++;
        continue;
      }
      triples.emplace_back(f[0], f[1], rating);
    }
  }

  RatingDataset ds = detail::densify(triples, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, report);

  double threshold;
  if (age_threshold.has_value()) {
    threshold = *age_threshold;
  } else {
    std::vector<double> ages;
    ages.reserve(ds.user_ids.size());
    for (const auto& uid : ds.user_ids) ages.push_back(age_of.at(uid));
    std::sort(ages.begin(), ages.end());
    if (ages.empty()) throw DataError("no users with usable ages");
    std::size_t n = ages.size();
    threshold = n % 2 == 1 ? ages[n / 2] : 0.5 * (ages[n / 2 - 1] + ages[n / 2]);
  }

  AttributeTable attrs;
  attrs.label_names = {"age_at_least_" + csv::format_double(threshold),
                       "age_under_" + csv::format_double(threshold)};
  attrs.attribute_of.resize(ds.user_ids.size());
  for (std::size_t u = 0; u < ds.user_ids.size(); ++u) {
    attrs.attribute_of[u] = age_of.at(ds.user_ids[u]) < threshold ? 1 : 0;
  }
  if (!ds.records.empty()) check_attributes(ds, attrs);
  return {std::move(ds), std::move(attrs)};
}

// Fixed point of alternately dropping users and items with fewer than k
// ratings. The k-core is unique, so removal order does not matter; indices
// are re-densified preserving order.
inline RatingDataset k_core_prune(const RatingDataset& input, int k) {
  if (k < 1) throw std::invalid_argument("k_core_prune: k must be >= 1");

  std::vector<RatingRecord> records = input.records;
  bool changed = true;
  while (changed) {
    std::vector<int> user_deg(input.num_users, 0), item_deg(input.num_items, 0);
    for (const auto& r : records) {
      user_deg[r.user_id]++;
      item_deg[r.item_id]++;
    }
    std::size_t before = records.size();
    std::erase_if(records, [&](const RatingRecord& r) {
      return user_deg[r.user_id] < k || item_deg[r.item_id] < k;
    });
    changed = records.size() != before;
  }
  if (records.empty()) throw DataError("empty k-core for k=" + std::to_string(k));

  std::vector<int> user_map(input.num_users, -1), item_map(input.num_items, -1);
  for (const auto& r : records) {
    user_map[r.user_id] = 0;
    item_map[r.item_id] = 0;
  }
  RatingDataset out;
  out.rating_scale = input.rating_scale;
  int next_user = 0, next_item = 0;
  for (int u = 0; u < input.num_users; ++u) {
    if (user_map[u] == 0) {
      user_map[u] = next_user++;
      out.user_ids.push_back(input.user_ids.empty() ? std::to_string(u) : input.user_ids[u]);
    }
  }
  for (int i = 0; i < input.num_items; ++i) {
    if (item_map[i] == 0) {
      item_map[i] = next_item++;
      out.item_ids.push_back(input.item_ids.empty() ? std::to_string(i) : input.item_ids[i]);
    }
  }
  out.num_users = next_user;
  out.num_items = next_item;
  out.records.reserve(records.size());
  for (const auto& r : records) {
    out.records.push_back({user_map[r.user_id], item_map[r.item_id], r.rating});
  }
  finalize(out);
  return out;
}

// Re-aligns an attribute table with a dataset whose users are a subset of the
// original's (e.g. after k-core pruning), matching on original ids.
inline AttributeTable align_attributes(const RatingDataset& pruned, const RatingDataset& original,
                                       const AttributeTable& attrs) {
  std::unordered_map<std::string, std::uint8_t> by_orig;
  by_orig.reserve(original.user_ids.size());
  for (std::size_t u = 0; u < original.user_ids.size(); ++u) {
    by_orig[original.user_ids[u]] = attrs.attribute_of[u];
  }
  AttributeTable out;
  out.label_names = attrs.label_names;
  out.attribute_of.resize(pruned.user_ids.size());
  for (std::size_t u = 0; u < pruned.user_ids.size(); ++u) {
    auto it = by_orig.find(pruned.user_ids[u]);
    if (it == by_orig.end()) throw DataError("user " + pruned.user_ids[u] + " missing from attribute table");
    out.attribute_of[u] = it->second;
  }
  check_attributes(pruned, out);
  return out;
}

// Guarded float-to-count helpers; grid values like 0.6*5 land a hair below
// the exact product.
inline std::size_t floor_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}
inline std::size_t ceil_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

// Per-fold seeded 60/20/20 splits, stratified per user: train = floor(0.6*n),
// validation = floor(0.2*n), remainder to test.
inline std::vector<SplitAssignment> make_splits(const RatingDataset& ds, int fold_count,
                                                std::uint64_t seed) {
  if (fold_count < 1) throw std::invalid_argument("make_splits: fold_count must be >= 1");
  std::vector<SplitAssignment> folds;
  folds.reserve(fold_count);
  for (int f = 0; f < fold_count; ++f) {
    rng::Engine engine(rng::derive_seed(seed, "split", f));
    SplitAssignment split;
    split.fold_id = f;
    split.assignment.assign(ds.records.size(), SplitPart::test);
    for (int u = 0; u < ds.num_users; ++u) {
      auto [begin, end] = ds.user_range(u);
      std::vector<std::size_t> idx(end - begin);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
      engine.shuffle(idx);
      std::size_t n = idx.size();
      std::size_t n_train = floor_fraction(0.6, n);
      std::size_t n_valid = floor_fraction(0.2, n);
      for (std::size_t i = 0; i < n; ++i) {
        split.assignment[idx[i]] =
            i < n_train ? SplitPart::train : (i < n_train + n_valid ? SplitPart::valid : SplitPart::test);
      }
    }
    folds.push_back(std::move(split));
  }
  return folds;
}

// Extracts the records of one split part; dimensions, scale and id maps are
// shared with the parent dataset.
inline RatingDataset subset(const RatingDataset& ds, const SplitAssignment& split, SplitPart part) {
  RatingDataset out;
  out.num_users = ds.num_users;
  out.num_items = ds.num_items;
  out.rating_scale = ds.rating_scale;
  out.user_ids = ds.user_ids;
  out.item_ids = ds.item_ids;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (split.assignment[i] == part) out.records.push_back(ds.records[i]);
  }
  finalize(out);
  return out;
}

// Synthetic stereotyped test bed. Items split into an a-inclined half
// [0, m/2) and a complementary half; a user picks an item from their group's
// half with probability signal_strength. 0.5 is uninformative (item choice
// carries no group information), 1.0 is fully group-typed, and values below
// 0.5 invert the inclination. Rating values come from a latent-factor model
// drawn independently of the group, so the sensitive attribute is reflected
// in which items are rated, not in the values.
inline std::pair<RatingDataset, AttributeTable> generate_synthetic(int num_users, int num_items,
                                                                   int ratings_per_user,
                                                                   double signal_strength,
                                                                   std::uint64_t seed) {
  if (num_users < 2 || num_items < 2) throw std::invalid_argument("generate_synthetic: need >= 2 users and items");
  if (signal_strength < 0.0 || signal_strength > 1.0) {
    throw std::invalid_argument("generate_synthetic: signal_strength must be in [0, 1]");
  }
  if (ratings_per_user > num_items) {
    throw std::invalid_argument("generate_synthetic: ratings_per_user exceeds num_items");
  }

  const int half = num_items / 2;
  rng::Engine engine(rng::derive_seed(seed, "synthetic"));

  // Latent factors for rating values.
  constexpr int kLatentDim = 2;
  std::vector<double> item_factors(static_cast<std::size_t>(num_items) * kLatentDim);
  std::vector<double> user_factors(static_cast<std::size_t>(num_users) * kLatentDim);
  for (auto& v : item_factors) v = engine.uniform() * 2.0 - 1.0;
  for (auto& v : user_factors) v = engine.uniform() * 2.0 - 1.0;

  RatingDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  ds.rating_scale = {1, 2, 3, 4, 5};
  for (int u = 0; u < num_users; ++u) ds.user_ids.push_back(std::to_string(u));
  for (int i = 0; i < num_items; ++i) ds.item_ids.push_back(std::to_string(i));

  AttributeTable attrs;
  attrs.label_names = {"group_b", "group_a"};
  attrs.attribute_of.resize(num_users);
  for (int u = 0; u < num_users; ++u) attrs.attribute_of[u] = u < (num_users + 1) / 2 ? 1 : 0;

  const double own_half_prob = signal_strength;
  for (int u = 0; u < num_users; ++u) {
    const bool is_a = attrs.attribute_of[u] == 1;
    const int own_begin = is_a ? 0 : half;
    const int own_size = is_a ? half : num_items - half;
    const int other_begin = is_a ? half : 0;
    const int other_size = num_items - own_size;

    int own_k = 0;
    for (int j = 0; j < ratings_per_user; ++j) own_k += engine.bernoulli(own_half_prob) ? 1 : 0;
    int other_k = ratings_per_user - own_k;
    if (own_k > own_size) {
      if (signal_strength >= 1.0) {
        throw std::invalid_argument("generate_synthetic: inclined half too small for ratings_per_user");
      }
      other_k += own_k - own_size;
      own_k = own_size;
    }
    if (other_k > other_size) {
      own_k += other_k - other_size;
      other_k = other_size;
    }

    std::vector<int> items;
    items.reserve(ratings_per_user);
    for (std::size_t idx : engine.sample_indices(own_size, own_k)) items.push_back(own_begin + static_cast<int>(idx));
    for (std::size_t idx : engine.sample_indices(other_size, other_k)) items.push_back(other_begin + static_cast<int>(idx));
    std::sort(items.begin(), items.end());

    for (int item : items) {
      double dot = 0.0;
      for (int d = 0; d < kLatentDim; ++d) {
        dot += user_factors[u * kLatentDim + d] * item_factors[item * kLatentDim + d];
      }
      double value = 3.0 + 1.4 * dot + 0.6 * engine.gaussian();
      double rating = std::clamp(std::round(value), 1.0, 5.0);
      ds.records.push_back({u, item, rating});
    }
  }
  finalize(ds);
  check_attributes(ds, attrs);
  return {std::move(ds), std::move(attrs)};
}

// ---------------------------------------------------------------------------
// Canonical on-disk form: ratings.csv + attributes.csv + meta.json.

inline void save_canonical(const std::string& dir, const RatingDataset& ds,
                           const AttributeTable& attrs, const std::string& name) {
  std::string ratings = "user_id,item_id,rating\n";
  for (const auto& r : ds.records) {
    ratings += std::to_string(r.user_id);
    ratings += ',';
    ratings += std::to_string(r.item_id);
    ratings += ',';
    ratings += csv::format_double(r.rating);
    ratings += '\n';
  }
  csv::write_file(dir + "/ratings.csv", ratings);

  std::string attributes = "user_id,attribute\n";
  for (std::size_t u = 0; u < attrs.attribute_of.size(); ++u) {
    attributes += std::to_string(u);
    attributes += ',';
    attributes += attrs.attribute_of[u] ? '1' : '0';
    attributes += '\n';
  }
  csv::write_file(dir + "/attributes.csv", attributes);

  nlohmann::ordered_json meta;
  meta["name"] = name;
  meta["num_users"] = ds.num_users;
  meta["num_items"] = ds.num_items;
  meta["rating_scale"] = ds.rating_scale;
  meta["label_names"] = attrs.label_names;
  meta["user_ids"] = ds.user_ids;
  meta["item_ids"] = ds.item_ids;
  csv::write_file(dir + "/meta.json", meta.dump(2) + "\n");
}

struct CanonicalData {
  RatingDataset dataset;
  AttributeTable attributes;
  std::string name;
};

inline CanonicalData load_canonical(const std::string& dir) {
  CanonicalData out;
  auto meta = nlohmann::json::parse(csv::read_file(dir + "/meta.json"));
  out.name = meta.at("name").get<std::string>();
  out.dataset.num_users = meta.at("num_users").get<int>();
  out.dataset.num_items = meta.at("num_items").get<int>();
  out.dataset.rating_scale = meta.at("rating_scale").get<std::vector<double>>();
  out.dataset.user_ids = meta.at("user_ids").get<std::vector<std::string>>();
  out.dataset.item_ids = meta.at("item_ids").get<std::vector<std::string>>();
  out.attributes.label_names = meta.at("label_names").get<std::array<std::string, 2>>();

  auto rating_lines = csv::read_lines(dir + "/ratings.csv");
  if (rating_lines.empty() || rating_lines[0] != "user_id,item_id,rating") {
    throw csv::ParseError(dir + "/ratings.csv: bad header");
  }
  for (std::size_t ln = 1; ln < rating_lines.size(); ++ln) {
    if (rating_lines[ln].empty()) continue;
    auto f = csv::split(rating_lines[ln], ',');
    if (f.size() != 3) throw csv::ParseError(dir + "/ratings.csv:" + std::to_string(ln + 1) + ": expected 3 fields");
    out.dataset.records.push_back({static_cast<int>(csv::parse_int(f[0], "user id")),
                                   static_cast<int>(csv::parse_int(f[1], "item id")),
                                   csv::parse_double(f[2], "rating")});
  }
  finalize(out.dataset);

  auto attr_lines = csv::read_lines(dir + "/attributes.csv");
  if (attr_lines.empty() || attr_lines[0] != "user_id,attribute") {
    throw csv::ParseError(dir + "/attributes.csv: bad header");
  }
  out.attributes.attribute_of.assign(out.dataset.num_users, 0);
  for (std::size_t ln = 1; ln < attr_lines.size(); ++ln) {
    if (attr_lines[ln].empty()) continue;
    auto f = csv::split(attr_lines[ln], ',');
    if (f.size() != 2) throw csv::ParseError(dir + "/attributes.csv:" + std::to_string(ln + 1) + ": expected 2 fields");
    int u = static_cast<int>(csv::parse_int(f[0], "user id"));
    int a = static_cast<int>(csv::parse_int(f[1], "attribute"));
    if (u < 0 || u >= out.dataset.num_users || (a != 0 && a != 1)) {
      throw csv::ParseError(dir + "/attributes.csv:" + std::to_string(ln + 1) + ": bad row");
    }
    out.attributes.attribute_of[u] = static_cast<std::uint8_t>(a);
  }
  check_attributes(out.dataset, out.attributes);
  return out;
}

}  // namespace privrec::data
