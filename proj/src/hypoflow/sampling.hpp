/*
 * Copyright 2026 The hypoflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "hypoflow/common.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace hypoflow {

/// splitmix64 finalizer; used to derive independent seeds from
/// (seed, index, tag) triples.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                    std::uint64_t tag = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (tag * 0xd1b54a32d192ed03ULL));
}

/// Independent random stream keyed by (seed, index, tag). Two streams with
/// the same key produce the same sequence on every run and every thread.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0)
      : engine_(derive_seed(seed, index, tag)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Radical inverse of `index` in `base` (Halton component).
inline double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

inline constexpr std::array<unsigned, 16> kHaltonPrimes = {
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

/// Axis-aligned box in R^n.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  static Box symmetric(int n, double half_width) {
    return Box{std::vector<double>(n, -half_width), std::vector<double>(n, half_width)};
  }
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains_origin() const {
    for (int i = 0; i < dim(); ++i) {
      if (lower[i] > 0.0 || upper[i] < 0.0) return false;
    }
    return true;
  }
};

/// Deterministic low-discrepancy points filling `box`. Index 0 is skipped so
/// the first point is not the lower corner.
class HaltonSequence {
 public:
  explicit HaltonSequence(Box box) : box_(std::move(box)) {
    if (box_.dim() > static_cast<int>(kHaltonPrimes.size())) {
      throw InvalidInput("Halton sequence supports at most 16 dimensions");
    }
  }

  void point(std::uint64_t index, std::span<double> out) const {
    for (int k = 0; k < box_.dim(); ++k) {
      double u = radical_inverse(index + 1, kHaltonPrimes[k]);
      out[k] = box_.lower[k] + u * (box_.upper[k] - box_.lower[k]);
    }
  }

  /// Unit-cube coordinates without box scaling.
  void unit(std::uint64_t index, std::span<double> out) const {
    for (int k = 0; k < box_.dim(); ++k) out[k] = radical_inverse(index + 1, kHaltonPrimes[k]);
  }

  const Box& box() const { return box_; }

 private:
  Box box_;
};

}  // namespace hypoflow
