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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <optional>
#include <string>

#include "fedcspack/errors.h"
#include "fedcspack/packing.h"
#include "fedcspack/random.h"
#include "fedcspack/wire.h"

namespace fedcspack {

Dataset BuildDataset(const RunConfig& config) {
  const DatasetSpec& d = config.dataset;
  if (d.kind == DatasetSpec::Kind::kIdx) return LoadIdx(d.images, d.labels);
  return SynthBlobs(d.num_classes, d.dim, d.samples_per_class, d.spread,
                    d.seed.value_or(config.seed));
}

std::vector<int> SampleClients(std::size_t num_clients, double cpr,
                               std::uint64_t seed, std::size_t round) {
  const std::size_t m =
      std::clamp<std::size_t>(CeilFraction(cpr, num_clients), 1, num_clients);
  std::vector<int> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = MakeRng(seed, Stream::kSample, {round});
  for (std::size_t k = 0; k < m; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, num_clients - 1);
    std::swap(ids[k], ids[pick(rng)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

SparseDelta MagnitudeTopK(const FlatParams& local, const FlatParams& global,
                          double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fraction must lie in (0, 1]");
  }
  if (local.values.size() != global.values.size()) {
    throw ShapeError("local and global models differ in size");
  }
  const std::size_t d = local.values.size();
  std::vector<float> delta(d);
  for (std::size_t k = 0; k < d; ++k) {
    delta[k] = local.values[k] - global.values[k];
  }
  const std::size_t keep = std::clamp<std::size_t>(CeilFraction(fraction, d), 1, d);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    const float ma = std::fabs(delta[a]);
    const float mb = std::fabs(delta[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::nth_element(order.begin(),
                   order.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                   order.end(), before);
  order.resize(keep);
  std::sort(order.begin(), order.end());

  SparseDelta out;
  out.indices = order;
  out.values.reserve(keep);
  for (std::size_t k : order) out.values.push_back(delta[k]);
  return out;
}

namespace {

struct ClientBatches {
  std::vector<Batch> train;
  std::vector<Batch> test;
  std::vector<std::size_t> sizes;
  Batch pooled_test;
};

ClientBatches MakeBatches(const Dataset& data, const Partition& partition) {
  ClientBatches b;
  std::vector<std::size_t> pooled;
  for (const ClientSplit& c : partition.clients) {
    b.train.push_back(data.samples.Select(c.train));
    b.test.push_back(data.samples.Select(c.test));
    b.sizes.push_back(c.rows.size());
    pooled.insert(pooled.end(), c.test.begin(), c.test.end());
  }
  std::sort(pooled.begin(), pooled.end());
  b.pooled_test = data.samples.Select(pooled);
  return b;
}

Evaluation EvaluateBatches(const ServerState& server,
                           std::span<const FlatParams> client_models,
                           const ClientBatches& batches) {
  Evaluation e;
  e.global_accuracy = Accuracy(server.global_params, batches.pooled_test);
  const std::size_t n = batches.test.size();
  e.client_accuracy.assign(n, 0.0);
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (batches.test[i].empty()) continue;
    if (client_models.empty()) {
      e.client_accuracy[i] = Accuracy(server.global_params, batches.test[i]);
    } else {
      const FlatParams personal =
          SelectivePull(client_models[i], server.global_params,
                        server.global_mask, server.pack);
      e.client_accuracy[i] = Accuracy(personal, batches.test[i]);
    }
    const double w = static_cast<double>(batches.sizes[i]);
    weighted += w * e.client_accuracy[i];
    total += w;
  }
  e.mean_personalized_accuracy = total > 0.0 ? weighted / total : 0.0;
  return e;
}

// What one sampled client hands back to the round loop.
struct ClientOutcome {
  int client_id = 0;
  bool skipped = false;
  std::vector<std::uint8_t> frame;
  std::size_t expected_bytes = 0;
  std::optional<FlatParams> trained;  // retained locally (fedcspack only)
};

struct RoundContext {
  const RunConfig& config;
  const ClientBatches& batches;
  const FlatParams& global;
  const GlobalMask& mask;
  std::span<const FlatParams> client_models;
  std::size_t round;
};

ClientOutcome RunClient(const RoundContext& ctx, int id) {
  const RunConfig& cfg = ctx.config;
  ClientOutcome out;
  out.client_id = id;
  const auto i = static_cast<std::size_t>(id);
  const Batch& train = ctx.batches.train[i];
  if (train.empty()) {
    out.skipped = true;
    return out;
  }
  TrainOptions opt;
  opt.epochs = cfg.local_epochs;
  opt.lr = cfg.lr;
  opt.batch_size = cfg.batch_size;
  opt.prox_mu = cfg.method.name == Method::kFedProx ? cfg.method.mu : 0.0;
  const std::uint64_t seed = DeriveSeed(
      cfg.seed, {static_cast<std::uint64_t>(Stream::kTrain), ctx.round, i});

  PackedUpdate update;
  update.client_id = static_cast<std::uint32_t>(id);
  update.round = static_cast<std::uint32_t>(ctx.round);
  const std::size_t d = ctx.global.size();

  switch (cfg.method.name) {
    case Method::kFedCsPack: {
      const FlatParams local = SelectivePull(ctx.client_models[i], ctx.global,
                                             ctx.mask, cfg.pack);
      FlatParams trained = LocalTrain(local, train, opt, ctx.global, seed);
      const SimilarityProfile profile =
          ScorePackages(trained, ctx.global, cfg.pack);
      std::vector<std::size_t> selected;
      if (cfg.force_full_selection) {
        selected.resize(profile.per_package_cos.size());
        std::iota(selected.begin(), selected.end(), std::size_t{0});
      } else {
        selected = SelectTopK(profile, cfg.cap_ratio);
      }
      const LocalMask mask = BuildMask(profile, selected, cfg.weight_mode);
      const DeltaPackages payloads =
          ExtractDeltas(trained, ctx.global, selected, cfg.pack, cfg.payload);
      update = MakePackedUpdate(id, ctx.round, cfg.pack, profile, mask,
                                payloads, cfg.weight_mode);
      if (cfg.weight_override) {
        for (PackedEntry& e : update.entries) {
          e.theta = static_cast<float>(*cfg.weight_override);
          e.beta = 0.0f;
        }
      }
      out.trained = std::move(trained);
      break;
    }
    case Method::kFedAvg:
    case Method::kFedProx: {
      const FlatParams trained =
          LocalTrain(ctx.global, train, opt, ctx.global, seed);
      PackedEntry e;
      e.package_index = 0;
      e.theta = static_cast<float>(Cosine(trained.span(), ctx.global.span()));
      e.payload = trained.values;
      if (cfg.payload == PayloadKind::kDelta) {
        for (std::size_t k = 0; k < d; ++k) e.payload[k] -= ctx.global.values[k];
      }
      update.pack = static_cast<std::uint32_t>(d);
      update.entries.push_back(std::move(e));
      break;
    }
    case Method::kMagnitudeTopK: {
      const FlatParams trained =
          LocalTrain(ctx.global, train, opt, ctx.global, seed);
      const SparseDelta sparse =
          MagnitudeTopK(trained, ctx.global, cfg.method.fraction);
      update.pack = 1;
      for (std::size_t k = 0; k < sparse.indices.size(); ++k) {
        update.entries.push_back(
            PackedEntry{static_cast<std::uint32_t>(sparse.indices[k]), 1.0f,
                        0.0f, {sparse.values[k]}});
      }
      break;
    }
  }
  out.expected_bytes = EncodedSize(update);
  out.frame = EncodeUpdate(update);
  return out;
}

std::size_t ServerPack(const RunConfig& cfg, std::size_t d) {
  switch (cfg.method.name) {
    case Method::kFedCsPack: return cfg.pack;
    case Method::kMagnitudeTopK: return 1;
    case Method::kFedAvg:
    case Method::kFedProx: break;
  }
  return d;
}

// Plain mean of full-model payloads, folded in ascending client id order.
ServerState FedAvgFold(const ServerState& server,
                       const std::vector<PackedUpdate>& updates,
                       PayloadKind kind, std::size_t& violations) {
  const std::size_t d = server.global_params.size();
  std::vector<double> acc(d, 0.0);
  std::size_t n = 0;
  for (const PackedUpdate& u : updates) {
    if (u.entries.size() != 1 || u.entries[0].package_index != 0 ||
        u.entries[0].payload.size() != d) {
      ++violations;
      continue;
    }
    const std::vector<float>& p = u.entries[0].payload;
    for (std::size_t k = 0; k < d; ++k) acc[k] += static_cast<double>(p[k]);
    ++n;
  }
  ServerState next = server;
  next.round = server.round + 1;
  if (n == 0) return next;
  std::vector<float>& g = next.global_params.values;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < d; ++k) {
    g[k] = kind == PayloadKind::kDelta
               ? static_cast<float>(static_cast<double>(g[k]) + acc[k] * inv)
               : static_cast<float>(acc[k] * inv);
  }
  return next;
}

}  // namespace

Evaluation Evaluate(const ServerState& server,
                    std::span<const FlatParams> client_models,
                    const Dataset& data, const Partition& partition) {
  if (!client_models.empty() &&
      client_models.size() != partition.num_clients()) {
    throw ShapeError("one client model per client is required");
  }
  return EvaluateBatches(server, client_models, MakeBatches(data, partition));
}

RunResult Run(const RunConfig& config, const RunOptions& options) {
  Dataset data;
  try {
    data = BuildDataset(config);
  } catch (const std::exception& e) {
    throw RunError(std::string("dataset: ") + e.what(), 0, -1);
  }
  return Run(config, data, options);
}

RunResult Run(const RunConfig& config, const Dataset& data,
              const RunOptions& options) {
  config.Validate();
  const ShapeSpec& shape = config.model;
  if (data.dim() != shape.input_dim()) {
    throw ConfigError("dataset has " + std::to_string(data.dim()) +
                      " features, model expects " +
                      std::to_string(shape.input_dim()));
  }
  if (data.num_classes > shape.num_classes()) {
    throw ConfigError("dataset has more classes than the model outputs");
  }

  Partition partition;
  try {
    partition = MakePartition(data, config.partition);
  } catch (const std::exception& e) {
    throw RunError(std::string("partition: ") + e.what(), 0, -1);
  }
  const ClientBatches batches = MakeBatches(data, partition);

  const FlatParams initial = FlatParams::Init(shape, config.seed);
  const std::size_t d = shape.total_params();
  const std::size_t server_pack = ServerPack(config, d);
  const PackageLayout layout(d, server_pack);
  const bool personalized = config.method.name == Method::kFedCsPack;

  ServerState server = ServerState::Bootstrap(initial, server_pack);
  std::vector<FlatParams> client_models;
  if (personalized) client_models.assign(config.clients, initial);

  RunResult result;
  result.config = config;
  const std::size_t per_round =
      std::clamp<std::size_t>(CeilFraction(config.cpr, config.clients), 1,
                              config.clients);
  result.dense_bytes_per_round = per_round * 4 * d;

  for (std::size_t t = 0; t < config.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    RoundMetrics m;
    m.round = t + 1;
    m.participating = SampleClients(config.clients, config.cpr, config.seed, t);

    // Step 1: broadcast.
    Broadcast cast;
    cast.round = static_cast<std::uint32_t>(t);
    cast.params = server.global_params.values;
    if (personalized) {
      for (double w : server.global_mask.totals) {
        cast.mask_totals.push_back(static_cast<float>(w));
      }
    }
    const std::vector<std::uint8_t> cast_frame = EncodeBroadcast(cast);
    m.bytes_down = cast_frame.size() * m.participating.size();
    const Broadcast received = DecodeBroadcast(cast_frame);
    const FlatParams global_rx{received.params, shape};
    GlobalMask mask_rx;
    for (float w : received.mask_totals) {
      mask_rx.totals.push_back(w);
      mask_rx.valid.push_back(w > 0.0f);
    }

    // Steps 2-3: clients.
    const RoundContext ctx{config, batches, global_rx, mask_rx, client_models,
                           t};
    std::vector<ClientOutcome> outcomes(m.participating.size());
    auto run_one = [&](std::size_t k) {
      const int id = m.participating[k];
      try {
        outcomes[k] = RunClient(ctx, id);
      } catch (const std::exception& e) {
        throw RunError("round " + std::to_string(t) + ", client " +
                           std::to_string(id) + ": " + e.what(),
                       t, id);
      }
    };
    const std::size_t workers =
        std::min(std::max<std::size_t>(options.threads, 1), outcomes.size());
    if (workers <= 1) {
      for (std::size_t k = 0; k < outcomes.size(); ++k) run_one(k);
    } else {
      std::vector<std::future<void>> jobs;
      for (std::size_t w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
          for (std::size_t k = w; k < outcomes.size(); k += workers) run_one(k);
        }));
      }
      for (auto& j : jobs) j.get();
    }

    // Step 4: server.
    std::vector<PackedUpdate> decoded;
    std::vector<ClientUpdate> updates;
    for (ClientOutcome& o : outcomes) {
      if (o.skipped) {
        m.skipped.push_back(o.client_id);
        continue;
      }
      if (o.frame.size() != o.expected_bytes) {
        throw RunError("encoded size disagrees with the frame layout", t,
                       o.client_id);
      }
      m.bytes_up += o.frame.size();
      m.update_bytes.push_back(o.frame.size());
      PackedUpdate u;
      try {
        u = DecodeUpdate(o.frame);
      } catch (const DecodeError& e) {
        throw RunError(std::string("decode: ") + e.what(), t, o.client_id);
      }
      if (u.client_id != static_cast<std::uint32_t>(o.client_id) ||
          u.round != t || u.pack != server_pack) {
        ++m.protocol_violations;
        continue;
      }
      if (personalized || config.method.name == Method::kMagnitudeTopK) {
        try {
          updates.push_back(Unpack(u, layout.count()));
        } catch (const ProtocolViolation&) {
          ++m.protocol_violations;
        }
      }
      decoded.push_back(std::move(u));
      if (o.trained) {
        client_models[static_cast<std::size_t>(o.client_id)] =
            std::move(*o.trained);
      }
    }

    try {
      if (personalized || config.method.name == Method::kMagnitudeTopK) {
        AggregationResult agg =
            Aggregate(server, std::move(updates),
                      personalized ? config.payload : PayloadKind::kDelta);
        m.protocol_violations += agg.rejected_clients.size();
        server = std::move(agg.state);
      } else {
        server = FedAvgFold(server, decoded, config.payload,
                            m.protocol_violations);
      }
    } catch (const std::exception& e) {
      throw RunError(std::string("aggregation: ") + e.what(), t, -1);
    }

    const Evaluation eval = EvaluateBatches(server, client_models, batches);
    m.global_test_accuracy = eval.global_accuracy;
    m.mean_personalized_accuracy = eval.mean_personalized_accuracy;
    m.client_accuracy = eval.client_accuracy;
    if (options.measure_wall_time) {
      m.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - started)
                      .count();
    }
    if (options.on_round) options.on_round(m, server.global_params);
    result.rounds.push_back(std::move(m));
  }
  result.final_global = server.global_params;
  return result;
}

}  // namespace fedcspack
