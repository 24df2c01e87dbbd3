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

#ifndef FEDCSPACK_SIMULATOR_H_
#define FEDCSPACK_SIMULATOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fedcspack/aggregation.h"
#include "fedcspack/config.h"
#include "fedcspack/data.h"
#include "fedcspack/model.h"

namespace fedcspack {

struct RoundMetrics {
  std::size_t round = 0;  // 1-based
  double global_test_accuracy = 0.0;
  double mean_personalized_accuracy = 0.0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  double wall_ms = 0.0;
  std::vector<int> participating;  // ascending
  std::size_t protocol_violations = 0;
  std::vector<int> skipped;                 // sampled but without train rows
  std::vector<double> client_accuracy;      // personalized, per client
  std::vector<std::size_t> update_bytes;    // encoded size per participant
};

struct RunOptions {
  bool measure_wall_time = true;
  std::size_t threads = 1;
  // Called after every round with that round's metrics and the new global
  // model.
  std::function<void(const RoundMetrics&, const FlatParams&)> on_round;
};

struct RunResult {
  RunConfig config;
  std::vector<RoundMetrics> rounds;
  FlatParams final_global;
  // Uplink bytes the round would cost if every participant sent its full
  // model as raw float32.
  std::uint64_t dense_bytes_per_round = 0;
};

Dataset BuildDataset(const RunConfig& config);

// ceil(cpr * n) distinct client ids, ascending, drawn from `seed` and `round`.
std::vector<int> SampleClients(std::size_t num_clients, double cpr,
                               std::uint64_t seed, std::size_t round);

struct SparseDelta {
  std::vector<std::size_t> indices;  // ascending
  std::vector<float> values;         // local - global at `indices`
};

// The ceil(fraction * d) coordinates of local - global with the largest
// magnitude; ties go to the lower index.
SparseDelta MagnitudeTopK(const FlatParams& local, const FlatParams& global,
                          double fraction);

struct Evaluation {
  double global_accuracy = 0.0;
  double mean_personalized_accuracy = 0.0;
  std::vector<double> client_accuracy;
};

// Global accuracy is measured on the union of client test rows. Each client's
// personalized model is its local model after pulling the valid packages of
// `server`; with no client models every client uses the global model. The
// mean weights clients by their total row count and skips clients without
// test rows.
Evaluation Evaluate(const ServerState& server,
                    std::span<const FlatParams> client_models,
                    const Dataset& data, const Partition& partition);

// Runs the configured federation. Throws RunError identifying the round and
// client on any failure.
RunResult Run(const RunConfig& config, const RunOptions& options = {});

// Same, on a prebuilt dataset.
RunResult Run(const RunConfig& config, const Dataset& data,
              const RunOptions& options = {});

}  // namespace fedcspack

#endif  // FEDCSPACK_SIMULATOR_H_
