// Copyright 2026 The fedcspack Authors. All Rights Reserved.
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
// =============================================================================

#ifndef FEDCSPACK_RANDOM_H_
#define FEDCSPACK_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedcspack {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for a (purpose, round, client, ...) tuple.
inline std::uint64_t DeriveSeed(std::uint64_t base,
                                std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = Mix64(base);
  for (std::uint64_t p : parts) h = Mix64(h ^ Mix64(p));
  return h;
}

// Stream tags for DeriveSeed.
enum class Stream : std::uint64_t {
  kInit = 1,
  kSample = 2,
  kTrain = 3,
  kPartition = 4,
  kSplit = 5,
  kData = 6,
};

inline Rng MakeRng(std::uint64_t base, Stream stream,
                   std::initializer_list<std::uint64_t> parts = {}) {
  std::uint64_t h = DeriveSeed(base, {static_cast<std::uint64_t>(stream)});
  for (std::uint64_t p : parts) h = Mix64(h ^ Mix64(p));
  return Rng(h);
}

}  // namespace fedcspack

#endif  // FEDCSPACK_RANDOM_H_
