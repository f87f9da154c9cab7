// Copyright 2026 The skrig Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>

namespace skrig {

using Engine = std::mt19937_64;

/// Recorded in every report so a run can be matched to the generator that produced it.
inline constexpr const char* kRngDescription =
    "mt19937_64 seeded by splitmix64(stream key); normals via std::normal_distribution (libstdc++)";

/// Roles of the independent streams a study draws from.
enum class Stream : std::uint64_t {
  kTrain = 1,
  kTest = 2,
  kSites = 3,
  kThinning = 4,
  kOracle = 5,
  kPerturbation = 6,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream (master, replication, role). Distinct triples give unrelated seeds.
inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replication,
                                           Stream role) noexcept {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (replication + 0x632be59bd9b4e019ULL));
  return splitmix64(h ^ static_cast<std::uint64_t>(role));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

}  // namespace skrig
