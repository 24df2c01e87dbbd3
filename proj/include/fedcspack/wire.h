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

#ifndef FEDCSPACK_WIRE_H_
#define FEDCSPACK_WIRE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedcspack/aggregation.h"
#include "fedcspack/packing.h"

namespace fedcspack {

// Client -> server frame. All integers and floats little-endian:
//
//   "FCSP" | version u16 | client_id u32 | round u32 | pack u32 | count u32
//   count x ( package_index u32 | theta f32 | beta f32 | len u32 | len x f32 )
//
// Size is 22 + sum(16 + 4 * len).
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kUpdateHeaderBytes = 22;
inline constexpr std::size_t kEntryHeaderBytes = 16;

struct PackedEntry {
  std::uint32_t package_index = 0;
  float theta = 0.0f;
  float beta = 0.0f;
  std::vector<float> payload;

  bool operator==(const PackedEntry&) const = default;
};

struct PackedUpdate {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::uint32_t pack = 0;
  std::vector<PackedEntry> entries;  // ascending package_index

  bool operator==(const PackedUpdate&) const = default;
};

std::size_t EncodedSize(const PackedUpdate& u);
std::vector<std::uint8_t> EncodeUpdate(const PackedUpdate& u);
// Throws DecodeError carrying the byte offset of the first problem.
PackedUpdate DecodeUpdate(std::span<const std::uint8_t> bytes);

// Packs a client's selection for transmission.
PackedUpdate MakePackedUpdate(int client_id, std::size_t round,
                              std::size_t pack,
                              const SimilarityProfile& profile,
                              const LocalMask& mask,
                              const DeltaPackages& payloads, WeightMode mode);

// Server-side view of a received frame. Weights are rebuilt from the reported
// (theta, beta) terms; payload lengths are checked later by Aggregate.
ClientUpdate Unpack(const PackedUpdate& u, std::size_t package_count);

// Server -> client broadcast of the global model and mask:
//
//   "FCSB" | version u16 | round u32 | params u32 | packages u32
//   params x f32 | packages x f32 (mask totals)
//
// Size is 18 + 4 * (params + packages).
inline constexpr std::size_t kBroadcastHeaderBytes = 18;

struct Broadcast {
  std::uint32_t round = 0;
  std::vector<float> params;
  std::vector<float> mask_totals;

  bool operator==(const Broadcast&) const = default;
};

std::vector<std::uint8_t> EncodeBroadcast(const Broadcast& b);
Broadcast DecodeBroadcast(std::span<const std::uint8_t> bytes);

}  // namespace fedcspack

#endif  // FEDCSPACK_WIRE_H_
