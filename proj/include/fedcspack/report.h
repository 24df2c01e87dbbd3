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

#ifndef FEDCSPACK_REPORT_H_
#define FEDCSPACK_REPORT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcspack/config.h"
#include "fedcspack/simulator.h"

namespace fedcspack {

struct RunSummary {
  std::string method;
  std::size_t rounds = 0;
  double final_global_acc = 0.0;
  double best_global_acc = 0.0;
  // Personalized accuracy after the last round.
  double mean_personalized_acc = 0.0;
  std::uint64_t total_bytes_up = 0;
  // rounds * dense_bytes_per_round / total_bytes_up.
  double compression_vs_dense = 0.0;
  std::vector<double> global_acc_by_round;

  // First 1-based round whose global accuracy reaches `target`.
  std::optional<std::size_t> rounds_to_target(double target) const;

  bool operator==(const RunSummary&) const = default;
};

// Throws std::invalid_argument on empty metrics.
RunSummary Summarize(std::span<const RoundMetrics> metrics,
                     std::uint64_t dense_bytes_per_round,
                     const std::string& method);

// Shortest decimal text that parses back to the same double.
std::string FormatNumber(double v);

inline constexpr const char* kMetricsHeader =
    "round,method,global_acc,personalized_acc,bytes_up,bytes_down,wall_ms,"
    "participants,violations";

// Participants are written as ';'-separated client ids.
void WriteMetricsCsv(const std::filesystem::path& path,
                     const std::string& method,
                     std::span<const RoundMetrics> metrics);

struct MetricsTable {
  std::string method;
  std::vector<RoundMetrics> rounds;
};
MetricsTable ReadMetricsCsv(const std::filesystem::path& path);

// Writes acc_vs_round.csv, bytes_vs_round.csv and per_client_acc.csv (the
// last round's per-client accuracies) into `out_dir`.
void EmitSeries(std::span<const RoundMetrics> metrics,
                const std::filesystem::path& out_dir);

// metrics.csv, run.json and the plot series for one finished run.
void WriteRunOutputs(const RunResult& result,
                     const std::filesystem::path& out_dir);

}  // namespace fedcspack

#endif  // FEDCSPACK_REPORT_H_
