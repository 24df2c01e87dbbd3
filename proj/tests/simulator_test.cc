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

#include "fedcspack/simulator.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fedcspack/errors.h"
#include "fedcspack/random.h"
#include "fedcspack/report.h"
#include "fedcspack/wire.h"
#include "test_util.h"

namespace fedcspack {
namespace {

namespace fs = std::filesystem;

RunConfig SmallConfig(Method method) {
  RunConfig c;
  c.method.name = method;
  c.rounds = 3;
  c.clients = 4;
  c.cpr = 0.5;
  c.local_epochs = 1;
  c.lr = 0.1;
  c.batch_size = 16;
  c.pack = 16;
  c.seed = 5;
  c.partition.num_clients = 4;
  c.partition.alpha = 1.0;
  c.model = ShapeSpec::Mlp(8, 16, 4);
  c.dataset.num_classes = 4;
  c.dataset.dim = 8;
  c.dataset.samples_per_class = 40;
  return c;
}

std::vector<FlatParams> GlobalsPerRound(const RunConfig& c) {
  std::vector<FlatParams> out;
  RunOptions opt;
  opt.on_round = [&](const RoundMetrics&, const FlatParams& g) {
    out.push_back(g);
  };
  fedcspack::Run(c, opt);
  return out;
}

TEST(SampleClientsTest, SizeDistinctnessAndReproducibility) {
  for (std::size_t n : {1u, 7u, 20u}) {
    for (double cpr : {0.05, 0.3, 0.5, 1.0}) {
      for (std::size_t round = 0; round < 5; ++round) {
        const auto s = SampleClients(n, cpr, 11, round);
        const auto expected = static_cast<std::size_t>(std::ceil(cpr * n - 1e-9));
        EXPECT_EQ(s.size(), std::max<std::size_t>(expected, 1));
        EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
        EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), s.size());
        for (int id : s) EXPECT_LT(static_cast<std::size_t>(id), n);
        EXPECT_EQ(s, SampleClients(n, cpr, 11, round));
      }
    }
  }
  EXPECT_NE(SampleClients(20, 0.5, 11, 0), SampleClients(20, 0.5, 11, 1));
}

TEST(MagnitudeTopKTest, KeepsLargestMagnitude) {
  const ShapeSpec shape = ShapeSpec::Logistic(1, 3);  // 6 params
  FlatParams global = FlatParams::Zeros(shape);
  FlatParams local = global;
  local.values = {0.1f, -5.0f, 0.2f, 0.0f, 0.0f, 0.0f};
  const SparseDelta one = MagnitudeTopK(local, global, 1.0 / 6.0);
  EXPECT_EQ(one.indices, (std::vector<std::size_t>{1}));
  EXPECT_EQ(one.values, (std::vector<float>{-5.0f}));
  const SparseDelta all = MagnitudeTopK(local, global, 1.0);
  EXPECT_EQ(all.indices.size(), 6u);
  EXPECT_EQ(all.values, local.values);
  // Zero ties resolve toward lower indices.
  EXPECT_EQ(MagnitudeTopK(local, global, 4.0 / 6.0).indices,
            (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(MagnitudeTopK(local, global, 0.0), std::invalid_argument);
}

TEST(MagnitudeTopKTest, AgreesWithFullSortOracle) {
  const ShapeSpec shape = ShapeSpec::Logistic(24, 4);  // 100 params
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> frac(0.01, 1.0);
  std::uniform_int_distribution<int> coarse(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    FlatParams global = FlatParams::Zeros(shape);
    FlatParams local = global;
    // Coarse values force many magnitude ties.
    for (float& v : local.values) v = static_cast<float>(coarse(rng)) * 0.5f;
    const double f = frac(rng);
    std::vector<std::size_t> order(100);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return std::fabs(local.values[a]) > std::fabs(local.values[b]);
    });
    const auto keep = static_cast<std::size_t>(std::ceil(f * 100 - 1e-7));
    order.resize(std::max<std::size_t>(keep, 1));
    std::sort(order.begin(), order.end());
    EXPECT_EQ(MagnitudeTopK(local, global, f).indices, order) << "f=" << f;
  }
}

TEST(RunTest, SingleClientFedAvgGlobalEqualsTrainedModel) {
  RunConfig c = SmallConfig(Method::kFedAvg);
  c.clients = 1;
  c.partition.num_clients = 1;
  c.cpr = 1.0;
  c.payload = PayloadKind::kRaw;
  const Dataset data = BuildDataset(c);
  const Partition part = MakePartition(data, c.partition);
  const Batch train = data.samples.Select(part.clients[0].train);

  FlatParams expected = FlatParams::Init(c.model, c.seed);
  const auto globals = GlobalsPerRound(c);
  ASSERT_EQ(globals.size(), c.rounds);
  TrainOptions opt{c.local_epochs, c.lr, c.batch_size, 0.0};
  for (std::size_t t = 0; t < c.rounds; ++t) {
    const std::uint64_t seed = DeriveSeed(
        c.seed, {static_cast<std::uint64_t>(Stream::kTrain), t, 0});
    expected = LocalTrain(expected, train, opt, expected, seed);
    EXPECT_EQ(globals[t].values, expected.values) << "round " << t;
  }
}

TEST(RunTest, FullSelectionConstantWeightMatchesFedAvg) {
  RunConfig cs = SmallConfig(Method::kFedCsPack);
  cs.rounds = 8;
  cs.pack = cs.model.total_params();
  cs.force_full_selection = true;
  cs.weight_override = 0.5;
  RunConfig avg = cs;
  avg.method.name = Method::kFedAvg;
  const auto a = GlobalsPerRound(cs);
  const auto b = GlobalsPerRound(avg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t k = 0; k < a[t].size(); ++k) {
      ASSERT_NEAR(a[t].values[k], b[t].values[k], 1e-6)
          << "round " << t << " coordinate " << k;
    }
  }
}

TEST(RunTest, SmallPackagesWithFullSelectionAlsoMatchFedAvg) {
  RunConfig cs = SmallConfig(Method::kFedCsPack);
  cs.force_full_selection = true;
  cs.weight_override = 1.0;
  RunConfig avg = cs;
  avg.method.name = Method::kFedAvg;
  const auto a = GlobalsPerRound(cs);
  const auto b = GlobalsPerRound(avg);
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t k = 0; k < a[t].size(); ++k) {
      ASSERT_NEAR(a[t].values[k], b[t].values[k], 1e-6);
    }
  }
}

std::string MetricsText(const RunConfig& c, std::size_t threads) {
  RunOptions opt;
  opt.measure_wall_time = false;
  opt.threads = threads;
  const RunResult r = fedcspack::Run(c, opt);
  const fs::path p = fs::temp_directory_path() /
                     ("fedcspack_det_" + std::to_string(::getpid()) + ".csv");
  WriteMetricsCsv(p, MethodName(c.method.name), r.rounds);
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  fs::remove(p);
  return s.str();
}

TEST(RunTest, DeterministicCsvRegardlessOfThreads) {
  for (Method m : {Method::kFedCsPack, Method::kFedProx,
                   Method::kMagnitudeTopK}) {
    const RunConfig c = SmallConfig(m);
    const std::string once = MetricsText(c, 1);
    EXPECT_EQ(once, MetricsText(c, 1));
    EXPECT_EQ(once, MetricsText(c, 4));
  }
}

TEST(RunTest, TrafficIsExactlyTheCodecOutput) {
  for (Method m : {Method::kFedCsPack, Method::kFedAvg,
                   Method::kMagnitudeTopK}) {
    RunConfig c = SmallConfig(m);
    c.cap_ratio = 0.5;
    const RunResult r = fedcspack::Run(c);
    const std::size_t d = c.model.total_params();
    for (const RoundMetrics& m : r.rounds) {
      EXPECT_EQ(m.bytes_up, std::accumulate(m.update_bytes.begin(),
                                            m.update_bytes.end(),
                                            std::uint64_t{0}));
      EXPECT_EQ(m.update_bytes.size(),
                m.participating.size() - m.skipped.size());
      for (std::size_t b : m.update_bytes) {
        EXPECT_EQ((b - kUpdateHeaderBytes) % 4, 0u);
      }
      const std::size_t mask = c.method.name == Method::kFedCsPack
                                   ? (d + c.pack - 1) / c.pack
                                   : 0;
      EXPECT_EQ(m.bytes_down, m.participating.size() *
                                  (kBroadcastHeaderBytes + 4 * (d + mask)));
      EXPECT_EQ(m.protocol_violations, 0u);
    }
  }
}

TEST(RunTest, FedAvgUplinkIsDenseModelPlusFrameOverhead) {
  const RunConfig c = SmallConfig(Method::kFedAvg);
  const RunResult r = fedcspack::Run(c);
  const std::size_t d = c.model.total_params();
  for (const RoundMetrics& m : r.rounds) {
    for (std::size_t b : m.update_bytes) EXPECT_EQ(b, 22 + 16 + 4 * d);
  }
}

TEST(RunTest, CapRatioNeverIncreasesUplink) {
  RunConfig full = SmallConfig(Method::kFedCsPack);
  full.rounds = 4;
  full.cap_ratio = 1.0;
  const RunResult r1 = fedcspack::Run(full);
  for (double cap : {0.1, 0.25, 0.5}) {
    RunConfig c = full;
    c.cap_ratio = cap;
    const RunResult r = fedcspack::Run(c);
    for (std::size_t t = 0; t < r.rounds.size(); ++t) {
      EXPECT_LE(r.rounds[t].bytes_up, r1.rounds[t].bytes_up) << "cap " << cap;
    }
  }
}

TEST(RunTest, SinglePackageCostsDenseBytesPlusConstant) {
  RunConfig c = SmallConfig(Method::kFedCsPack);
  c.pack = 1u << 20;
  const RunResult r = fedcspack::Run(c);
  const std::size_t d = c.model.total_params();
  for (const RoundMetrics& m : r.rounds) {
    for (std::size_t b : m.update_bytes) EXPECT_EQ(b, 4 * d + 38);
  }
}

TEST(RunTest, MethodsShareInitialModelAndPartition) {
  std::vector<std::vector<int>> participants;
  std::vector<FlatParams> firsts;
  for (Method m : {Method::kFedCsPack, Method::kFedAvg}) {
    RunConfig c = SmallConfig(m);
    c.rounds = 1;
    c.lr = 1e-12;  // keeps the first global model at the shared start
    c.cpr = 1.0;
    const RunResult r = fedcspack::Run(c);
    participants.push_back(r.rounds[0].participating);
    firsts.push_back(r.final_global);
  }
  EXPECT_EQ(participants[0], participants[1]);
  const FlatParams init = FlatParams::Init(SmallConfig(Method::kFedAvg).model, 5);
  for (const FlatParams& f : firsts) {
    for (std::size_t k = 0; k < f.size(); ++k) {
      EXPECT_NEAR(f.values[k], init.values[k], 1e-6);
    }
  }
  const RunConfig a = SmallConfig(Method::kFedCsPack);
  const RunConfig b = SmallConfig(Method::kFedAvg);
  const Dataset data = BuildDataset(a);
  EXPECT_TRUE(MakePartition(data, a.partition) ==
              MakePartition(BuildDataset(b), b.partition));
}

TEST(RunTest, ClientFailureNamesRoundAndClient) {
  RunConfig c = SmallConfig(Method::kFedAvg);
  c.lr = 1e30;
  c.dataset.spread = 100.0;
  try {
    fedcspack::Run(c);
    FAIL() << "expected RunError";
  } catch (const RunError& e) {
    EXPECT_GE(e.client_id(), 0);
    EXPECT_NE(std::string(e.what()).find("client"), std::string::npos);
  }
}

TEST(RunTest, DatasetModelMismatchIsConfigError) {
  RunConfig c = SmallConfig(Method::kFedAvg);
  const Dataset wrong = SynthBlobs(4, 9, 10, 1.0, 1);
  EXPECT_THROW(fedcspack::Run(c, wrong), ConfigError);
}

TEST(EvaluateTest, WeightsClientsByRowCount) {
  // Two clients, |D_1| = 3 |D_2|; a model that always predicts class 0.
  Dataset data;
  data.num_classes = 2;
  data.samples.features = {16, 1, std::vector<float>(16, 1.0f)};
  data.samples.labels = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1,  // client 0
                         0, 1, 1, 1};                          // client 1
  Partition p;
  ClientSplit c0;
  ClientSplit c1;
  for (std::size_t r = 0; r < 12; ++r) c0.rows.push_back(r);
  for (std::size_t r = 12; r < 16; ++r) c1.rows.push_back(r);
  c0.test = {8, 9, 10, 11};  // acc 0.75
  c0.train = {0, 1, 2, 3, 4, 5, 6, 7};
  c1.test = {12, 13};  // acc 0.5
  c1.train = {14, 15};
  p.clients = {c0, c1};

  const ShapeSpec shape = ShapeSpec::Logistic(1, 2);
  FlatParams g = FlatParams::Zeros(shape);
  g.values[2] = 1.0f;  // bias for class 0
  const ServerState server = ServerState::Bootstrap(g, 1);
  const Evaluation e = Evaluate(server, {}, data, p);
  EXPECT_DOUBLE_EQ(e.client_accuracy[0], 0.75);
  EXPECT_DOUBLE_EQ(e.client_accuracy[1], 0.5);
  EXPECT_DOUBLE_EQ(e.mean_personalized_accuracy, 0.75 * 0.75 + 0.25 * 0.5);
  EXPECT_DOUBLE_EQ(e.global_accuracy, 4.0 / 6.0);

  // Identical client models under an all-valid mask give the same numbers.
  const std::vector<FlatParams> same(2, g);
  const Evaluation f = Evaluate(server, same, data, p);
  EXPECT_EQ(f.client_accuracy, e.client_accuracy);
}

TEST(EvaluateTest, UntrainedZeroModelIsNearChance) {
  const Dataset data = SynthBlobs(10, 4, 200, 1.0, 3);
  PartitionSpec spec;
  spec.num_clients = 5;
  spec.alpha = 100.0;
  const Partition p = MakePartition(data, spec);
  const ServerState server =
      ServerState::Bootstrap(FlatParams::Zeros(ShapeSpec::Mlp(4, 8, 10)), 8);
  const Evaluation e = Evaluate(server, {}, data, p);
  // Argmax ties go to class 0, exactly one tenth of a balanced pool in
  // expectation.
  EXPECT_NEAR(e.global_accuracy, 0.1, 0.03);
}

}  // namespace
}  // namespace fedcspack
