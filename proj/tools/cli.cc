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

#include "cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedcspack/config.h"
#include "fedcspack/data.h"
#include "fedcspack/errors.h"
#include "fedcspack/report.h"
#include "fedcspack/simulator.h"

namespace fedcspack {
namespace {

namespace fs = std::filesystem;

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

GridAxis ParseGrid(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("grid '" + spec + "' must look like key=v1,v2,...");
  }
  GridAxis axis{spec.substr(0, eq), {}};
  std::istringstream in(spec.substr(eq + 1));
  std::string v;
  while (std::getline(in, v, ',')) {
    if (v.empty()) throw ConfigError("empty value in grid '" + spec + "'");
    axis.values.push_back(v);
  }
  return axis;
}

nlohmann::json LoadWithOverrides(const std::string& path,
                                 const std::vector<std::string>& overrides) {
  nlohmann::json doc = LoadConfigDocument(path);
  for (const std::string& o : overrides) ApplyOverride(doc, o);
  return doc;
}

std::string CellName(std::size_t index,
                     const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string name = "cell_" + std::to_string(index);
  for (const auto& [k, v] : kv) {
    name += "__" + k + "=" + v;
  }
  std::replace_if(name.begin(), name.end(),
                  [](char c) { return c == '/' || c == ' '; }, '_');
  return name;
}

int DoRun(const std::string& config_path,
          const std::vector<std::string>& overrides, const std::string& out_dir,
          const RunOptions& options, std::ostream& out) {
  const RunConfig config = ParseConfig(LoadWithOverrides(config_path, overrides));
  const RunResult result = Run(config, options);
  WriteRunOutputs(result, out_dir);
  const RunSummary s = Summarize(result.rounds, result.dense_bytes_per_round,
                                 MethodName(config.method.name));
  out << "method=" << s.method << " rounds=" << s.rounds
      << " final_global_acc=" << FormatNumber(s.final_global_acc)
      << " personalized_acc=" << FormatNumber(s.mean_personalized_acc)
      << " bytes_up=" << s.total_bytes_up
      << " compression_vs_dense=" << FormatNumber(s.compression_vs_dense)
      << "\n";
  return 0;
}

int DoPartitionReport(const std::string& config_path,
                      const std::vector<std::string>& overrides,
                      std::ostream& out) {
  const RunConfig config = ParseConfig(LoadWithOverrides(config_path, overrides));
  const Dataset data = BuildDataset(config);
  const Partition p = MakePartition(data, config.partition);
  const auto hist = LabelHistogram(data, p);
  out << "client,rows,train,test,entropy";
  for (std::size_t c = 0; c < data.num_classes; ++c) out << ",label_" << c;
  out << "\n";
  for (std::size_t i = 0; i < p.num_clients(); ++i) {
    const ClientSplit& s = p.clients[i];
    out << i << ',' << s.rows.size() << ',' << s.train.size() << ','
        << s.test.size() << ',' << std::fixed << std::setprecision(4)
        << LabelEntropy(hist[i]) << std::defaultfloat;
    for (std::size_t n : hist[i]) out << ',' << n;
    out << "\n";
  }
  return 0;
}

int DoSweep(const std::string& config_path,
            const std::vector<std::string>& overrides,
            const std::vector<std::string>& grids, const std::string& out_dir,
            const RunOptions& options, std::ostream& out) {
  const nlohmann::json base = LoadWithOverrides(config_path, overrides);
  std::vector<GridAxis> axes;
  for (const std::string& g : grids) axes.push_back(ParseGrid(g));

  fs::create_directories(out_dir);
  const fs::path summary_path = fs::path(out_dir) / "sweep_summary.csv";
  std::ofstream summary(summary_path);
  if (!summary) throw std::runtime_error("cannot write " + summary_path.string());
  summary << "cell";
  for (const GridAxis& a : axes) summary << ',' << a.key;
  summary << ",method,final_global_acc,best_global_acc,personalized_acc,"
             "total_bytes_up,compression_vs_dense\n";

  std::size_t cells = 1;
  for (const GridAxis& a : axes) cells *= a.values.size();

  std::ostringstream table;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    // First axis varies slowest.
    std::vector<std::pair<std::string, std::string>> kv;
    std::size_t rest = cell;
    std::size_t stride = cells;
    for (const GridAxis& a : axes) {
      stride /= a.values.size();
      kv.emplace_back(a.key, a.values[rest / stride]);
      rest %= stride;
    }
    nlohmann::json doc = base;
    for (const auto& [k, v] : kv) ApplyOverride(doc, k + "=" + v);
    const RunConfig config = ParseConfig(doc);
    const RunResult result = Run(config, options);
    const fs::path cell_dir = fs::path(out_dir) / CellName(cell, kv);
    WriteRunOutputs(result, cell_dir);
    const RunSummary s = Summarize(result.rounds, result.dense_bytes_per_round,
                                   MethodName(config.method.name));
    summary << cell;
    for (const auto& [k, v] : kv) summary << ',' << v;
    summary << ',' << s.method << ',' << FormatNumber(s.final_global_acc) << ','
            << FormatNumber(s.best_global_acc) << ','
            << FormatNumber(s.mean_personalized_acc) << ',' << s.total_bytes_up
            << ',' << FormatNumber(s.compression_vs_dense) << '\n';

    std::string label;
    for (const auto& [k, v] : kv) label += (label.empty() ? "" : " ") + k + "=" + v;
    table << std::left << std::setw(28) << label << std::right << std::fixed
          << std::setprecision(4) << std::setw(12) << s.final_global_acc
          << std::setw(12) << s.mean_personalized_acc << std::setw(14)
          << s.total_bytes_up << std::setw(10) << std::setprecision(2)
          << s.compression_vs_dense << '\n';
  }
  out << std::left << std::setw(28) << "cell" << std::right << std::setw(12)
      << "global" << std::setw(12) << "personal" << std::setw(14) << "bytes_up"
      << std::setw(10) << "ratio" << '\n'
      << table.str();
  return 0;
}

}  // namespace

int CliMain(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Federated learning simulator with cosine-guided parameter "
               "packing"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::vector<std::string> grids;
  std::size_t threads = 1;
  bool no_wall_clock = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")
        ->required();
    cmd->add_option("--override", overrides, "key=value applied to the config");
  };
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--threads", threads, "client worker threads");
    cmd->add_flag("--no-wall-clock", no_wall_clock,
                  "record wall_ms as 0 so outputs are byte-reproducible");
  };

  CLI::App* run = app.add_subcommand("run", "run one federation");
  add_common(run);
  add_run_flags(run);

  CLI::App* report =
      app.add_subcommand("partition-report", "print per-client label histograms");
  add_common(report);

  CLI::App* sweep = app.add_subcommand("sweep", "cartesian parameter sweep");
  add_common(sweep);
  add_run_flags(sweep);
  sweep->add_option("--grid", grids, "key=v1,v2,...")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code;
  }

  RunOptions options;
  options.threads = threads;
  options.measure_wall_time = !no_wall_clock;
  try {
    if (run->parsed()) return DoRun(config_path, overrides, out_dir, options, out);
    if (report->parsed()) return DoPartitionReport(config_path, overrides, out);
    if (sweep->parsed()) {
      return DoSweep(config_path, overrides, grids, out_dir, options, out);
    }
  } catch (const RunError& e) {
    err << "error (round " << e.round() << ", client " << e.client_id()
        << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace fedcspack
