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

#include "fedcspack/config.h"

#include <gtest/gtest.h>

#include <string>

#include "fedcspack/errors.h"

namespace fedcspack {
namespace {

using nlohmann::json;

std::string ConfigErrorText(const json& doc) {
  try {
    ParseConfig(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ConfigTest, EmptyDocumentGivesDefaults) {
  const RunConfig c = ParseConfig(json::object());
  EXPECT_EQ(c.method.name, Method::kFedCsPack);
  EXPECT_EQ(c.rounds, 30u);
  EXPECT_EQ(c.clients, 20u);
  EXPECT_EQ(c.pack, 128u);
  EXPECT_EQ(c.model.total_params(), 32u * 64 + 64 + 64 * 10 + 10);
  EXPECT_EQ(c.partition.num_clients, 20u);
  EXPECT_EQ(c.partition.law, PartitionLaw::kDirichlet);
}

TEST(ConfigTest, UnknownKeysAreRejectedAtEveryLevel) {
  EXPECT_NE(ConfigErrorText({{"roundz", 3}}).find("roundz"), std::string::npos);
  EXPECT_NE(ConfigErrorText({{"partition", {{"alhpa", 1.0}}}}).find("alhpa"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText({{"method", {{"name", "fedprox"}, {"m", 1}}}})
                .find("method.m"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText({{"dataset", {{"dims", 3}}}}).find("dims"),
            std::string::npos);
}

TEST(ConfigTest, BadValuesNameTheField) {
  EXPECT_NE(ConfigErrorText({{"cpr", 0.0}}).find("cpr"), std::string::npos);
  EXPECT_NE(ConfigErrorText({{"cap_ratio", 1.5}}).find("cap_ratio"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText({{"rounds", "many"}}).find("rounds"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText({{"method", "fedsgd"}}).find("fedsgd"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText({{"weight_mode", "both"}}).find("weight_mode"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText({{"weight_override", 0.0}}).find("weight_override"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText({{"dataset", {{"dim", 16}}}}).find("dataset.dim"),
            std::string::npos);
  EXPECT_NE(ConfigErrorText(
                {{"model", {{"layer_dims", json::array({json::array({32, 10})})}, {"total_params", 5}}}})
                .find("total_params"),
            std::string::npos);
}

TEST(ConfigTest, MethodAsObjectCarriesParameters) {
  const RunConfig c =
      ParseConfig({{"method", {{"name", "fedprox"}, {"mu", 0.5}}}});
  EXPECT_EQ(c.method.name, Method::kFedProx);
  EXPECT_DOUBLE_EQ(c.method.mu, 0.5);
  const RunConfig t =
      ParseConfig({{"method", {{"name", "magnitude_topk"}, {"fraction", 0.2}}}});
  EXPECT_DOUBLE_EQ(t.method.fraction, 0.2);
}

TEST(ConfigTest, PartitionInheritsClientsAndSeed) {
  const RunConfig c = ParseConfig({{"clients", 7}, {"seed", 42}});
  EXPECT_EQ(c.partition.num_clients, 7u);
  EXPECT_EQ(c.partition.seed, 42u);
  EXPECT_FALSE(
      ConfigErrorText({{"clients", 7}, {"partition", {{"num_clients", 8}}}})
          .empty());
}

TEST(ConfigTest, LogisticModel) {
  const RunConfig c = ParseConfig(
      {{"model", {{"layer_dims", json::array({json::array({32, 10})})}, {"activation", "identity"}}}});
  EXPECT_EQ(c.model.total_params(), 330u);
}

TEST(ConfigTest, OverridesParseJsonOrFallBackToString) {
  json doc = json::object();
  ApplyOverride(doc, "cap_ratio=0.25");
  ApplyOverride(doc, "weight_mode=kl_only");
  ApplyOverride(doc, "partition.alpha=0.1");
  ApplyOverride(doc, "method.name=fedprox");
  ApplyOverride(doc, "method.mu=1e6");
  const RunConfig c = ParseConfig(doc);
  EXPECT_DOUBLE_EQ(c.cap_ratio, 0.25);
  EXPECT_EQ(c.weight_mode, WeightMode::kKlOnly);
  EXPECT_DOUBLE_EQ(c.partition.alpha, 0.1);
  EXPECT_EQ(c.method.name, Method::kFedProx);
  EXPECT_DOUBLE_EQ(c.method.mu, 1e6);
  EXPECT_THROW(ApplyOverride(doc, "novalue"), ConfigError);
  EXPECT_THROW(ApplyOverride(doc, "cap_ratio.x=1"), ConfigError);
}

TEST(ConfigTest, DottedOverrideExpandsStringMethod) {
  json doc = {{"method", "fedavg"}};
  ApplyOverride(doc, "method.name=fedprox");
  ApplyOverride(doc, "method.mu=0.5");
  const RunConfig c = ParseConfig(doc);
  EXPECT_EQ(c.method.name, Method::kFedProx);
  EXPECT_DOUBLE_EQ(c.method.mu, 0.5);
}

TEST(ConfigTest, OverrideReplacesStringMethod) {
  json doc = {{"method", "fedavg"}};
  ApplyOverride(doc, "method=magnitude_topk");
  EXPECT_EQ(ParseConfig(doc).method.name, Method::kMagnitudeTopK);
}

TEST(ConfigTest, ToJsonRoundTrips) {
  json doc = {{"method", {{"name", "magnitude_topk"}, {"fraction", 0.3}}},
              {"rounds", 4},
              {"clients", 5},
              {"cpr", 0.6},
              {"pack", 16},
              {"payload", "raw"},
              {"weight_mode", "cos_only"},
              {"seed", 9},
              {"partition", {{"law", "pathological"}, {"shards_per_client", 3}}},
              {"dataset", {{"dim", 32}, {"samples_per_class", 40}, {"seed", 3}}},
              {"weight_override", 0.5}};
  const RunConfig c = ParseConfig(doc);
  const json echoed = ToJson(c);
  const RunConfig back = ParseConfig(echoed);
  EXPECT_EQ(ToJson(back), echoed);
  EXPECT_EQ(back.method.name, Method::kMagnitudeTopK);
  EXPECT_EQ(back.payload, PayloadKind::kRaw);
  EXPECT_EQ(back.partition.shards_per_client, 3u);
  EXPECT_EQ(back.dataset.seed, std::optional<std::uint64_t>(3));
  EXPECT_EQ(back.weight_override, std::optional<double>(0.5));
}

TEST(ConfigTest, IdxDatasetNeedsPaths) {
  EXPECT_NE(ConfigErrorText({{"dataset", {{"kind", "idx"}}}}).find("idx"),
            std::string::npos);
}

}  // namespace
}  // namespace fedcspack
