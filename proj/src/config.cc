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

#include <fstream>
#include <set>
#include <vector>

#include "fedcspack/errors.h"

namespace fedcspack {

using nlohmann::json;

std::string MethodName(Method m) {
  switch (m) {
    case Method::kFedCsPack: return "fedcspack";
    case Method::kFedAvg: return "fedavg";
    case Method::kFedProx: return "fedprox";
    case Method::kMagnitudeTopK: return "magnitude_topk";
  }
  return "unknown";
}

std::string WeightModeName(WeightMode m) {
  switch (m) {
    case WeightMode::kDual: return "dual";
    case WeightMode::kCosOnly: return "cos_only";
    case WeightMode::kKlOnly: return "kl_only";
  }
  return "unknown";
}

namespace {

void RejectUnknown(const json& obj, const std::set<std::string>& known,
                   const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) {
      throw ConfigError("unknown key '" + where + key + "'");
    }
  }
}

template <typename T>
void Read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + where + key + "': " + e.what());
  }
}

template <typename E>
E ParseEnum(const json& obj, const char* key, E fallback,
            std::initializer_list<std::pair<const char*, E>> names,
            const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw ConfigError("'" + where + key + "' must be a string");
  const std::string s = it->get<std::string>();
  for (const auto& [name, value] : names) {
    if (s == name) return value;
  }
  throw ConfigError("unknown value '" + s + "' for '" + where + key + "'");
}

Method ParseMethodName(const std::string& s) {
  for (Method m : {Method::kFedCsPack, Method::kFedAvg, Method::kFedProx,
                   Method::kMagnitudeTopK}) {
    if (MethodName(m) == s) return m;
  }
  throw ConfigError("unknown method '" + s + "'");
}

MethodSpec ParseMethod(const json& j) {
  MethodSpec m;
  if (j.is_string()) {
    m.name = ParseMethodName(j.get<std::string>());
    return m;
  }
  RejectUnknown(j, {"name", "mu", "fraction"}, "method.");
  if (!j.contains("name")) throw ConfigError("method.name is required");
  std::string name;
  Read(j, "name", name, "method.");
  m.name = ParseMethodName(name);
  Read(j, "mu", m.mu, "method.");
  Read(j, "fraction", m.fraction, "method.");
  return m;
}

bool IsCount(const json& v) {
  return v.is_number_integer() && v.get<std::int64_t>() >= 0;
}

ShapeSpec ParseModel(const json& j) {
  RejectUnknown(j, {"layer_dims", "activation", "total_params"}, "model.");
  std::vector<LayerDims> layers;
  if (!j.contains("layer_dims")) throw ConfigError("model.layer_dims is required");
  for (const json& l : j.at("layer_dims")) {
    if (!l.is_array() || l.size() != 2 || !IsCount(l[0]) || !IsCount(l[1])) {
      throw ConfigError("model.layer_dims entries must be [in, out] pairs");
    }
    layers.push_back({l[0].get<std::size_t>(), l[1].get<std::size_t>()});
  }
  const Activation act = ParseEnum<Activation>(
      j, "activation", Activation::kRelu,
      {{"relu", Activation::kRelu}, {"identity", Activation::kIdentity}},
      "model.");
  try {
    ShapeSpec shape(std::move(layers), act);
    if (j.contains("total_params") &&
        (!IsCount(j.at("total_params")) ||
         j.at("total_params").get<std::size_t>() != shape.total_params())) {
      throw ConfigError("model.total_params disagrees with layer_dims (" +
                        std::to_string(shape.total_params()) + ")");
    }
    return shape;
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

}  // namespace

void RunConfig::Validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (clients < 1) throw ConfigError("clients must be >= 1");
  if (!(cpr > 0.0 && cpr <= 1.0)) throw ConfigError("cpr must lie in (0, 1]");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pack < 1) throw ConfigError("pack must be >= 1");
  if (!(cap_ratio > 0.0 && cap_ratio <= 1.0)) {
    throw ConfigError("cap_ratio must lie in (0, 1]");
  }
  if (method.name == Method::kFedProx && !(method.mu >= 0.0)) {
    throw ConfigError("method.mu must be >= 0");
  }
  if (method.name == Method::kMagnitudeTopK &&
      !(method.fraction > 0.0 && method.fraction <= 1.0)) {
    throw ConfigError("method.fraction must lie in (0, 1]");
  }
  if (weight_override &&
      !(*weight_override > 0.0 && *weight_override <= 1.0)) {
    throw ConfigError("weight_override must lie in (0, 1]");
  }
  if (partition.num_clients != clients) {
    throw ConfigError("partition.num_clients must equal clients");
  }
  partition.Validate();
  if (dataset.kind == DatasetSpec::Kind::kBlobs) {
    if (dataset.dim != model.input_dim()) {
      throw ConfigError("dataset.dim does not match the model input");
    }
    if (dataset.num_classes != model.num_classes()) {
      throw ConfigError("dataset.num_classes does not match the model output");
    }
  }
}

RunConfig ParseConfig(const json& doc) {
  RejectUnknown(doc,
                {"method", "rounds", "clients", "cpr", "local_epochs", "lr",
                 "batch_size", "pack", "cap_ratio", "payload", "weight_mode",
                 "seed", "partition", "model", "dataset",
                 "force_full_selection", "weight_override"},
                "");
  RunConfig c;
  if (doc.contains("method")) c.method = ParseMethod(doc.at("method"));
  Read(doc, "rounds", c.rounds, "");
  Read(doc, "clients", c.clients, "");
  Read(doc, "cpr", c.cpr, "");
  Read(doc, "local_epochs", c.local_epochs, "");
  Read(doc, "lr", c.lr, "");
  Read(doc, "batch_size", c.batch_size, "");
  Read(doc, "pack", c.pack, "");
  Read(doc, "cap_ratio", c.cap_ratio, "");
  Read(doc, "seed", c.seed, "");
  Read(doc, "force_full_selection", c.force_full_selection, "");
  if (doc.contains("weight_override") && !doc.at("weight_override").is_null()) {
    double w = 0.0;
    Read(doc, "weight_override", w, "");
    c.weight_override = w;
  }
  c.payload = ParseEnum<PayloadKind>(
      doc, "payload", c.payload,
      {{"delta", PayloadKind::kDelta}, {"raw", PayloadKind::kRaw}}, "");
  c.weight_mode = ParseEnum<WeightMode>(
      doc, "weight_mode", c.weight_mode,
      {{"dual", WeightMode::kDual},
       {"cos_only", WeightMode::kCosOnly},
       {"kl_only", WeightMode::kKlOnly}},
      "");

  c.partition.num_clients = c.clients;
  c.partition.seed = c.seed;
  if (doc.contains("partition")) {
    const json& p = doc.at("partition");
    RejectUnknown(p,
                  {"law", "alpha", "shards_per_client", "num_clients", "seed",
                   "test_fraction"},
                  "partition.");
    c.partition.law = ParseEnum<PartitionLaw>(
        p, "law", c.partition.law,
        {{"dirichlet", PartitionLaw::kDirichlet},
         {"pathological", PartitionLaw::kPathological}},
        "partition.");
    Read(p, "alpha", c.partition.alpha, "partition.");
    Read(p, "shards_per_client", c.partition.shards_per_client, "partition.");
    Read(p, "num_clients", c.partition.num_clients, "partition.");
    Read(p, "seed", c.partition.seed, "partition.");
    Read(p, "test_fraction", c.partition.test_fraction, "partition.");
  }

  if (doc.contains("model")) c.model = ParseModel(doc.at("model"));

  if (doc.contains("dataset")) {
    const json& d = doc.at("dataset");
    RejectUnknown(d,
                  {"kind", "num_classes", "dim", "samples_per_class", "spread",
                   "seed", "images", "labels"},
                  "dataset.");
    c.dataset.kind = ParseEnum<DatasetSpec::Kind>(
        d, "kind", c.dataset.kind,
        {{"blobs", DatasetSpec::Kind::kBlobs}, {"idx", DatasetSpec::Kind::kIdx}},
        "dataset.");
    Read(d, "num_classes", c.dataset.num_classes, "dataset.");
    Read(d, "dim", c.dataset.dim, "dataset.");
    Read(d, "samples_per_class", c.dataset.samples_per_class, "dataset.");
    Read(d, "spread", c.dataset.spread, "dataset.");
    if (d.contains("seed") && !d.at("seed").is_null()) {
      std::uint64_t s = 0;
      Read(d, "seed", s, "dataset.");
      c.dataset.seed = s;
    }
    Read(d, "images", c.dataset.images, "dataset.");
    Read(d, "labels", c.dataset.labels, "dataset.");
    if (c.dataset.kind == DatasetSpec::Kind::kIdx &&
        (c.dataset.images.empty() || c.dataset.labels.empty())) {
      throw ConfigError("dataset kind idx needs images and labels paths");
    }
  }

  c.Validate();
  return c;
}

json LoadConfigDocument(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " +
                      e.what());
  }
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  return ParseConfig(LoadConfigDocument(path));
}

json ToJson(const RunConfig& c) {
  json method = {{"name", MethodName(c.method.name)}};
  if (c.method.name == Method::kFedProx) method["mu"] = c.method.mu;
  if (c.method.name == Method::kMagnitudeTopK) {
    method["fraction"] = c.method.fraction;
  }
  json layers = json::array();
  for (const LayerDims& l : c.model.layers()) layers.push_back({l.in, l.out});

  json dataset = {
      {"kind", c.dataset.kind == DatasetSpec::Kind::kBlobs ? "blobs" : "idx"}};
  if (c.dataset.kind == DatasetSpec::Kind::kBlobs) {
    dataset["num_classes"] = c.dataset.num_classes;
    dataset["dim"] = c.dataset.dim;
    dataset["samples_per_class"] = c.dataset.samples_per_class;
    dataset["spread"] = c.dataset.spread;
    dataset["seed"] = c.dataset.seed ? json(*c.dataset.seed) : json(nullptr);
  } else {
    dataset["images"] = c.dataset.images;
    dataset["labels"] = c.dataset.labels;
  }

  return {
      {"method", method},
      {"rounds", c.rounds},
      {"clients", c.clients},
      {"cpr", c.cpr},
      {"local_epochs", c.local_epochs},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"pack", c.pack},
      {"cap_ratio", c.cap_ratio},
      {"payload", c.payload == PayloadKind::kDelta ? "delta" : "raw"},
      {"weight_mode", WeightModeName(c.weight_mode)},
      {"seed", c.seed},
      {"partition",
       {{"law", c.partition.law == PartitionLaw::kDirichlet ? "dirichlet"
                                                            : "pathological"},
        {"alpha", c.partition.alpha},
        {"shards_per_client", c.partition.shards_per_client},
        {"num_clients", c.partition.num_clients},
        {"seed", c.partition.seed},
        {"test_fraction", c.partition.test_fraction}}},
      {"model",
       {{"layer_dims", layers},
        {"activation",
         c.model.activation() == Activation::kRelu ? "relu" : "identity"},
        {"total_params", c.model.total_params()}}},
      {"dataset", dataset},
      {"force_full_selection", c.force_full_selection},
      {"weight_override",
       c.weight_override ? json(*c.weight_override) : json(nullptr)},
  };
}

void ApplyOverride(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) +
                      "' must look like key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("empty path segment in '" + key + "'");
    if (!node->is_object()) {
      throw ConfigError("override '" + key + "' descends into a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    // A method given by name alone accepts parameter overrides.
    if (node->is_string() && node == &doc["method"]) {
      *node = json{{"name", node->get<std::string>()}};
    }
    start = dot + 1;
  }
}

}  // namespace fedcspack
