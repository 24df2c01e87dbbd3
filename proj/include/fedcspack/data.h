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

#ifndef FEDCSPACK_DATA_H_
#define FEDCSPACK_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedcspack/model.h"

namespace fedcspack {

struct Dataset {
  Batch samples;
  std::size_t num_classes = 0;
  std::string name;

  std::size_t size() const { return samples.size(); }
  std::size_t dim() const { return samples.features.cols; }
};

// Isotropic Gaussian blobs, one per class, around centers drawn uniformly
// from [-1, 1]^dim. Rows are ordered class by class.
Dataset SynthBlobs(std::size_t num_classes, std::size_t dim,
                   std::size_t samples_per_class, double spread,
                   std::uint64_t seed);

// MNIST-style IDX pair (ubyte images, ubyte labels). Pixels scale to [0, 1];
// num_classes is max label + 1. Throws IngestError naming the file and offset.
Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path);

// Writes `data` as an IDX pair with images of image_rows x image_cols.
// Features are clamped to [0, 1] and quantized to bytes.
void WriteIdx(const Dataset& data, std::size_t image_rows,
              std::size_t image_cols, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

enum class PartitionLaw { kDirichlet, kPathological };

struct PartitionSpec {
  PartitionLaw law = PartitionLaw::kDirichlet;
  double alpha = 1.0;                 // dirichlet concentration
  std::size_t shards_per_client = 2;  // pathological
  std::size_t num_clients = 1;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;

  // Throws ConfigError on an out-of-range field.
  void Validate() const;
};

struct ClientSplit {
  std::vector<std::size_t> rows;   // all rows owned by the client, ascending
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

struct Partition {
  std::vector<ClientSplit> clients;

  std::size_t num_clients() const { return clients.size(); }
  bool operator==(const Partition& other) const;
};

// Per class, Dir(alpha) shares with largest-remainder rounding. Clients left
// with fewer than two rows are topped up one row at a time from the largest
// client. Throws InsufficientDataError when rows < num_clients.
Partition PartitionDirichlet(const Dataset& data, const PartitionSpec& spec);

// Label-sorted rows cut into num_clients * shards_per_client contiguous
// shards, dealt at random. Throws ConfigError if a shard would be empty.
Partition PartitionPathological(const Dataset& data, const PartitionSpec& spec);

Partition MakePartition(const Dataset& data, const PartitionSpec& spec);

// Seeded holdout of `test_fraction` of `rows`, stratified by label.
// Clients with at least two rows get at least one row on each side.
void SplitTrainTest(const Dataset& data, ClientSplit& split,
                    double test_fraction, std::uint64_t seed);

// counts[client][label] over each client's full row set.
std::vector<std::vector<std::size_t>> LabelHistogram(const Dataset& data,
                                                     const Partition& p);

// Shannon entropy (nats) of a label histogram; 0 for an empty one.
double LabelEntropy(std::span<const std::size_t> counts);

}  // namespace fedcspack

#endif  // FEDCSPACK_DATA_H_
