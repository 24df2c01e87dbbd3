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

#include "fedcspack/aggregation.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedcspack/errors.h"

namespace fedcspack {

GlobalMask GlobalMask::AllValid(std::size_t count) {
  return GlobalMask{std::vector<double>(count, 1.0),
                    std::vector<bool>(count, true)};
}

std::size_t GlobalMask::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

ServerState ServerState::Bootstrap(FlatParams initial, std::size_t pack) {
  const PackageLayout layout(initial.values.size(), pack);
  ServerState s;
  s.global_params = std::move(initial);
  s.global_mask = GlobalMask::AllValid(layout.count());
  s.pack = pack;
  return s;
}

GlobalMask FoldMasks(std::span<const LocalMask> masks, std::size_t count) {
  GlobalMask out;
  out.totals.assign(count, 0.0);
  for (const LocalMask& m : masks) {
    if (m.weights.size() != count) {
      throw ShapeError("mask has " + std::to_string(m.weights.size()) +
                       " packages, expected " + std::to_string(count));
    }
    for (std::size_t j = 0; j < count; ++j) out.totals[j] += m.weights[j];
  }
  out.valid.resize(count);
  for (std::size_t j = 0; j < count; ++j) out.valid[j] = out.totals[j] > 0.0;
  return out;
}

void ValidateUpdate(const ClientUpdate& u, const PackageLayout& layout) {
  const auto fail = [&](const std::string& what) {
    throw ProtocolViolation(
        "client " + std::to_string(u.client_id) + ": " + what, u.client_id);
  };
  if (u.mask.weights.size() != layout.count()) fail("mask length mismatch");
  for (std::size_t j = 0; j < u.mask.weights.size(); ++j) {
    const double w = u.mask.weights[j];
    if (!(w >= 0.0) || !std::isfinite(w)) fail("invalid mask weight");
    const bool selected = std::binary_search(u.mask.selected.begin(),
                                             u.mask.selected.end(), j);
    if ((w > 0.0) != selected) fail("mask weights disagree with selection");
  }
  for (const auto& [j, payload] : u.payloads) {
    if (j >= layout.count()) fail("payload for unknown package");
    if (u.mask.weights[j] == 0.0) {
      fail("payload for package " + std::to_string(j) + " with zero weight");
    }
    if (payload.size() != layout.view(j).len) fail("payload length mismatch");
  }
  if (u.payloads.size() != u.mask.selected.size()) {
    fail("selected package without payload");
  }
}

AggregationResult Aggregate(const ServerState& server,
                            std::vector<ClientUpdate> updates,
                            PayloadKind kind) {
  const PackageLayout layout(server.global_params.values.size(), server.pack);
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) {
              return a.client_id < b.client_id;
            });

  AggregationResult result;
  std::vector<const ClientUpdate*> accepted;
  std::vector<LocalMask> masks;
  for (const ClientUpdate& u : updates) {
    try {
      ValidateUpdate(u, layout);
    } catch (const ProtocolViolation&) {
      result.rejected_clients.push_back(u.client_id);
      continue;
    }
    accepted.push_back(&u);
    masks.push_back(u.mask);
  }

  result.state = server;
  result.state.global_mask = FoldMasks(masks, layout.count());
  const GlobalMask& mask = result.state.global_mask;
  std::vector<float>& global = result.state.global_params.values;

  std::vector<double> acc;
  for (std::size_t j = 0; j < layout.count(); ++j) {
    if (!mask.valid[j]) continue;
    const PackageView v = layout.view(j);
    acc.assign(v.len, 0.0);
    for (const ClientUpdate* u : accepted) {
      const double w = u->mask.weights[j];
      if (w == 0.0) continue;
      const double share = w / mask.totals[j];
      const std::vector<float>& p = u->payloads.at(j);
      for (std::size_t k = 0; k < v.len; ++k) {
        acc[k] += share * static_cast<double>(p[k]);
      }
    }
    float* slice = global.data() + v.offset;
    for (std::size_t k = 0; k < v.len; ++k) {
      slice[k] = kind == PayloadKind::kDelta
                     ? static_cast<float>(static_cast<double>(slice[k]) + acc[k])
                     : static_cast<float>(acc[k]);
    }
  }
  result.state.round = server.round + 1;
  return result;
}

FlatParams SelectivePull(const FlatParams& local, const FlatParams& global,
                         const GlobalMask& mask, std::size_t pack) {
  if (local.values.size() != global.values.size()) {
    throw ShapeError("local and global models differ in size");
  }
  const PackageLayout layout(local.values.size(), pack);
  if (mask.count() != layout.count()) {
    throw ShapeError("mask covers " + std::to_string(mask.count()) +
                     " packages, model has " + std::to_string(layout.count()));
  }
  FlatParams out = local;
  for (std::size_t j = 0; j < layout.count(); ++j) {
    if (!mask.valid[j]) continue;
    const PackageView v = layout.view(j);
    std::copy_n(global.values.begin() + static_cast<std::ptrdiff_t>(v.offset),
                v.len,
                out.values.begin() + static_cast<std::ptrdiff_t>(v.offset));
  }
  return out;
}

}  // namespace fedcspack
