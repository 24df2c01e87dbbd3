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

#ifndef FEDCSPACK_AGGREGATION_H_
#define FEDCSPACK_AGGREGATION_H_

#include <cstddef>
#include <span>
#include <vector>

#include "fedcspack/model.h"
#include "fedcspack/packing.h"

namespace fedcspack {

// Per-package weight totals of one round's participants.
struct GlobalMask {
  std::vector<double> totals;
  std::vector<bool> valid;  // totals[j] > 0

  // Every package valid with total 1; used before the first aggregation so
  // clients adopt the initial model in full.
  static GlobalMask AllValid(std::size_t count);
  std::size_t count() const { return totals.size(); }
  std::size_t valid_count() const;
};

struct ServerState {
  FlatParams global_params;
  GlobalMask global_mask;
  std::size_t round = 0;
  std::size_t pack = 1;

  static ServerState Bootstrap(FlatParams initial, std::size_t pack);
};

struct ClientUpdate {
  int client_id = 0;
  LocalMask mask;
  DeltaPackages payloads;
};

struct AggregationResult {
  ServerState state;
  std::vector<int> rejected_clients;  // protocol violations, ascending
};

// Element-wise sum of the masks, in the order given. Throws ShapeError if the
// masks disagree in length.
GlobalMask FoldMasks(std::span<const LocalMask> masks, std::size_t count);

// Throws ProtocolViolation if `update` is not self-consistent against a model
// tiled by `layout`.
void ValidateUpdate(const ClientUpdate& update, const PackageLayout& layout);

// Mask-weighted package aggregation. Updates are folded in ascending client id
// order; inconsistent updates are dropped and reported. For delta payloads
// each valid package moves by the weighted mean of the deltas; for raw
// payloads it is replaced by the weighted mean. Packages nobody shared are
// left bit-for-bit unchanged and become invalid in the new mask.
AggregationResult Aggregate(const ServerState& server,
                            std::vector<ClientUpdate> updates,
                            PayloadKind kind = PayloadKind::kDelta);

// Client-side adoption of the global model at valid positions; elsewhere the
// local packages are kept.
FlatParams SelectivePull(const FlatParams& local, const FlatParams& global,
                         const GlobalMask& mask, std::size_t pack);

}  // namespace fedcspack

#endif  // FEDCSPACK_AGGREGATION_H_
