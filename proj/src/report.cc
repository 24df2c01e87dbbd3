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

#include "fedcspack/report.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "json.hpp"

namespace fedcspack {

std::optional<std::size_t> RunSummary::rounds_to_target(double target) const {
  for (std::size_t k = 0; k < global_acc_by_round.size(); ++k) {
    if (global_acc_by_round[k] >= target) return k + 1;
  }
  return std::nullopt;
}

RunSummary Summarize(std::span<const RoundMetrics> metrics,
                     std::uint64_t dense_bytes_per_round,
                     const std::string& method) {
  if (metrics.empty()) throw std::invalid_argument("no rounds to summarize");
  RunSummary s;
  s.method = method;
  s.rounds = metrics.size();
  for (const RoundMetrics& m : metrics) {
    s.global_acc_by_round.push_back(m.global_test_accuracy);
    s.best_global_acc = std::max(s.best_global_acc, m.global_test_accuracy);
    s.total_bytes_up += m.bytes_up;
  }
  s.final_global_acc = metrics.back().global_test_accuracy;
  s.mean_personalized_acc = metrics.back().mean_personalized_accuracy;
  s.compression_vs_dense =
      s.total_bytes_up == 0
          ? 0.0
          : static_cast<double>(s.rounds) *
                static_cast<double>(dense_bytes_per_round) /
                static_cast<double>(s.total_bytes_up);
  return s;
}

std::string FormatNumber(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

namespace {

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void CheckWritten(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

double ParseDouble(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw std::runtime_error("bad number '" + s + "' in metrics csv");
  }
  return v;
}

std::uint64_t ParseUint(const std::string& s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw std::runtime_error("bad integer '" + s + "' in metrics csv");
  }
  return v;
}

std::vector<std::string> SplitOn(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void WriteMetricsCsv(const std::filesystem::path& path,
                     const std::string& method,
                     std::span<const RoundMetrics> metrics) {
  std::ofstream out = OpenForWrite(path);
  out << kMetricsHeader << '\n';
  for (const RoundMetrics& m : metrics) {
    out << m.round << ',' << method << ',' << FormatNumber(m.global_test_accuracy)
        << ',' << FormatNumber(m.mean_personalized_accuracy) << ','
        << m.bytes_up << ',' << m.bytes_down << ',' << FormatNumber(m.wall_ms)
        << ',';
    for (std::size_t k = 0; k < m.participating.size(); ++k) {
      if (k > 0) out << ';';
      out << m.participating[k];
    }
    out << ',' << m.protocol_violations << '\n';
  }
  CheckWritten(out, path);
}

MetricsTable ReadMetricsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("unexpected header in " + path.string());
  }
  MetricsTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = SplitOn(line, ',');
    if (f.size() != 9) {
      throw std::runtime_error("expected 9 columns in " + path.string());
    }
    RoundMetrics m;
    m.round = ParseUint(f[0]);
    table.method = f[1];
    m.global_test_accuracy = ParseDouble(f[2]);
    m.mean_personalized_accuracy = ParseDouble(f[3]);
    m.bytes_up = ParseUint(f[4]);
    m.bytes_down = ParseUint(f[5]);
    m.wall_ms = ParseDouble(f[6]);
    if (!f[7].empty()) {
      for (const std::string& id : SplitOn(f[7], ';')) {
        m.participating.push_back(static_cast<int>(ParseUint(id)));
      }
    }
    m.protocol_violations = ParseUint(f[8]);
    table.rounds.push_back(std::move(m));
  }
  return table;
}

void EmitSeries(std::span<const RoundMetrics> metrics,
                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + out_dir.string() + ": " +
                             ec.message());
  }

  const auto acc_path = out_dir / "acc_vs_round.csv";
  std::ofstream acc = OpenForWrite(acc_path);
  acc << "round,global_acc,personalized_acc\n";
  for (const RoundMetrics& m : metrics) {
    acc << m.round << ',' << FormatNumber(m.global_test_accuracy) << ','
        << FormatNumber(m.mean_personalized_accuracy) << '\n';
  }
  CheckWritten(acc, acc_path);

  const auto bytes_path = out_dir / "bytes_vs_round.csv";
  std::ofstream bytes = OpenForWrite(bytes_path);
  bytes << "round,bytes_up,bytes_down,cumulative_bytes_up\n";
  std::uint64_t cumulative = 0;
  for (const RoundMetrics& m : metrics) {
    cumulative += m.bytes_up;
    bytes << m.round << ',' << m.bytes_up << ',' << m.bytes_down << ','
          << cumulative << '\n';
  }
  CheckWritten(bytes, bytes_path);

  const auto client_path = out_dir / "per_client_acc.csv";
  std::ofstream clients = OpenForWrite(client_path);
  clients << "client,personalized_acc\n";
  if (!metrics.empty()) {
    const auto& last = metrics.back().client_accuracy;
    for (std::size_t i = 0; i < last.size(); ++i) {
      clients << i << ',' << FormatNumber(last[i]) << '\n';
    }
  }
  CheckWritten(clients, client_path);
}

void WriteRunOutputs(const RunResult& result,
                     const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + out_dir.string() + ": " +
                             ec.message());
  }
  const std::string method = MethodName(result.config.method.name);
  WriteMetricsCsv(out_dir / "metrics.csv", method, result.rounds);
  EmitSeries(result.rounds, out_dir);

  nlohmann::json records = nlohmann::json::array();
  for (const RoundMetrics& m : result.rounds) {
    records.push_back({{"round", m.round},
                       {"global_acc", m.global_test_accuracy},
                       {"personalized_acc", m.mean_personalized_accuracy},
                       {"bytes_up", m.bytes_up},
                       {"bytes_down", m.bytes_down},
                       {"wall_ms", m.wall_ms},
                       {"participants", m.participating},
                       {"skipped", m.skipped},
                       {"update_bytes", m.update_bytes},
                       {"violations", m.protocol_violations},
                       {"client_acc", m.client_accuracy}});
  }
  nlohmann::json doc = {{"config", ToJson(result.config)},
                        {"dense_bytes_per_round", result.dense_bytes_per_round},
                        {"rounds", records}};
  if (!result.rounds.empty()) {
    const RunSummary s =
        Summarize(result.rounds, result.dense_bytes_per_round, method);
    doc["summary"] = {{"final_global_acc", s.final_global_acc},
                      {"best_global_acc", s.best_global_acc},
                      {"mean_personalized_acc", s.mean_personalized_acc},
                      {"total_bytes_up", s.total_bytes_up},
                      {"compression_vs_dense", s.compression_vs_dense}};
  }
  const auto path = out_dir / "run.json";
  std::ofstream out = OpenForWrite(path);
  out << doc.dump(2) << '\n';
  CheckWritten(out, path);
}

}  // namespace fedcspack
