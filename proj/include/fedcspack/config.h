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

#ifndef FEDCSPACK_CONFIG_H_
#define FEDCSPACK_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "fedcspack/data.h"
#include "fedcspack/model.h"
#include "fedcspack/packing.h"

namespace fedcspack {

enum class Method { kFedCsPack, kFedAvg, kFedProx, kMagnitudeTopK };

struct MethodSpec {
  Method name = Method::kFedCsPack;
  double mu = 0.01;       // fedprox
  double fraction = 0.1;  // magnitude_topk
};

struct DatasetSpec {
  enum class Kind { kBlobs, kIdx };
  Kind kind = Kind::kBlobs;
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  std::size_t samples_per_class = 300;
  double spread = 1.0;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  std::string images;
  std::string labels;
};

struct RunConfig {
  MethodSpec method;
  std::size_t rounds = 30;
  std::size_t clients = 20;
  double cpr = 0.5;
  std::size_t local_epochs = 3;
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::size_t pack = 128;
  double cap_ratio = 1.0;
  PayloadKind payload = PayloadKind::kDelta;
  WeightMode weight_mode = WeightMode::kDual;
  std::uint64_t seed = 0;
  PartitionSpec partition;
  ShapeSpec model = ShapeSpec::Mlp(32, 64, 10);
  DatasetSpec dataset;
  // Test hooks: share every package, and report a constant weight in (0, 1]
  // instead of the similarity terms.
  bool force_full_selection = false;
  std::optional<double> weight_override;

  // Throws ConfigError naming the offending field.
  void Validate() const;
};

std::string MethodName(Method m);
std::string WeightModeName(WeightMode m);

// Unknown keys anywhere in the document are rejected with ConfigError.
// Absent keys keep their defaults; partition.num_clients and partition.seed
// default to clients and seed.
RunConfig ParseConfig(const nlohmann::json& doc);
RunConfig LoadConfig(const std::filesystem::path& path);
nlohmann::json LoadConfigDocument(const std::filesystem::path& path);
nlohmann::json ToJson(const RunConfig& config);

// Applies "a.b.c=value" to `doc`. The value is parsed as JSON when possible
// and taken as a string otherwise.
void ApplyOverride(nlohmann::json& doc, std::string_view assignment);

}  // namespace fedcspack

#endif  // FEDCSPACK_CONFIG_H_
