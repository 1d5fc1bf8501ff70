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

#include <bit>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace privrec::rng {

// SplitMix64 step; used for seed mixing only, not as the main generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-sensitive accumulator for deriving substream seeds from a base seed
// plus arbitrary tokens (ids, names, grid coordinates).
class SeedHasher {
 public:
  explicit SeedHasher(std::uint64_t base = 0) : state_(base) {
    mix(static_cast<std::uint64_t>(0x243f6a8885a308d3ULL));
  }

  SeedHasher& mix(std::uint64_t word) {
    state_ ^= word + 0x9e3779b97f4a7c15ULL + (state_ << 6) + (state_ >> 2);
    std::uint64_t s = state_;
    state_ = splitmix64(s);
    return *this;
  }
  SeedHasher& mix(std::int64_t word) { return mix(static_cast<std::uint64_t>(word)); }
  SeedHasher& mix(int word) { return mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(word))); }
  SeedHasher& mix(double value) { return mix(std::bit_cast<std::uint64_t>(value)); }
  SeedHasher& mix(std::string_view text) {
    // FNV-1a, folded into the running state.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    mix(h);
    return mix(static_cast<std::uint64_t>(text.size()));
  }

  std::uint64_t finish() const {
    std::uint64_t s = state_;
    return splitmix64(s);
  }

 private:
  std::uint64_t state_;
};

template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t base, Parts&&... parts) {
  SeedHasher h(base);
  (h.mix(std::forward<Parts>(parts)), ...);
  return h.finish();
}

// Deterministic generator with locally implemented draws. std::mt19937_64 is
// bit-exact per the standard; the distributions are implemented here because
// the standard library's are not portable across implementations.
class Engine {
 public:
  explicit Engine(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  bool bernoulli(double p) { return uniform() < p; }

  // Approximately standard normal (Irwin-Hall with 12 summands); adequate for
  // synthetic-data noise and fully portable.
  double gaussian() {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += uniform();
    return s - 6.0;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // Draws k distinct indices from [0, n) via partial Fisher-Yates.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::size_t j = i + index(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

  friend bool operator==(const Engine& a, const Engine& b) { return a.gen_ == b.gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace privrec::rng
