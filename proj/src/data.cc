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

#include "fedcspack/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

#include "fedcspack/errors.h"
#include "fedcspack/random.h"

namespace fedcspack {

Dataset SynthBlobs(std::size_t num_classes, std::size_t dim,
                   std::size_t samples_per_class, double spread,
                   std::uint64_t seed) {
  if (num_classes == 0 || dim == 0 || samples_per_class == 0) {
    throw ConfigError("blob counts must be >= 1");
  }
  if (!(spread > 0.0)) throw ConfigError("blob spread must be > 0");

  Rng rng = MakeRng(seed, Stream::kData);
  std::uniform_real_distribution<double> center_dist(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, spread);

  std::vector<double> centers(num_classes * dim);
  for (double& c : centers) c = center_dist(rng);

  Dataset d;
  d.num_classes = num_classes;
  d.name = "blobs";
  Matrix& x = d.samples.features;
  x.rows = num_classes * samples_per_class;
  x.cols = dim;
  x.data.reserve(x.rows * dim);
  d.samples.labels.reserve(x.rows);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < samples_per_class; ++s) {
      for (std::size_t k = 0; k < dim; ++k) {
        x.data.push_back(static_cast<float>(centers[c * dim + k] + noise(rng)));
      }
      d.samples.labels.push_back(static_cast<std::int32_t>(c));
    }
  }
  return d;
}

namespace {

std::vector<unsigned char> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string(), path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t ReadBe32(const std::vector<unsigned char>& bytes,
                       std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw IngestError("truncated header in " + path.string() + " at offset " +
                          std::to_string(offset),
                      path.string(), offset);
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

void CheckMagic(std::uint32_t magic, std::uint32_t expected,
                const std::filesystem::path& path) {
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "wrong magic 0x%08x (expected 0x%08x)",
                  magic, expected);
    throw IngestError(std::string(buf) + " in " + path.string() +
                          " at offset 0",
                      path.string(), 0);
  }
}

void WriteBe32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path) {
  const auto images = ReadFile(images_path);
  const auto labels = ReadFile(labels_path);

  CheckMagic(ReadBe32(images, 0, images_path), 0x00000803u, images_path);
  const std::size_t n = ReadBe32(images, 4, images_path);
  const std::size_t rows = ReadBe32(images, 8, images_path);
  const std::size_t cols = ReadBe32(images, 12, images_path);
  CheckMagic(ReadBe32(labels, 0, labels_path), 0x00000801u, labels_path);
  const std::size_t n_labels = ReadBe32(labels, 4, labels_path);

  if (n != n_labels) {
    throw IngestError("count mismatch: " + std::to_string(n) + " images in " +
                          images_path.string() + " vs " +
                          std::to_string(n_labels) + " labels in " +
                          labels_path.string() + " at offset 4",
                      labels_path.string(), 4);
  }
  const std::size_t dim = rows * cols;
  if (dim == 0) {
    throw IngestError("zero-sized images in " + images_path.string(),
                      images_path.string(), 8);
  }
  if (images.size() < 16 + n * dim) {
    throw IngestError("truncated image data in " + images_path.string() +
                          " at offset " + std::to_string(images.size()),
                      images_path.string(), images.size());
  }
  if (labels.size() < 8 + n) {
    throw IngestError("truncated label data in " + labels_path.string() +
                          " at offset " + std::to_string(labels.size()),
                      labels_path.string(), labels.size());
  }

  Dataset d;
  d.name = images_path.stem().string();
  d.samples.features.rows = n;
  d.samples.features.cols = dim;
  d.samples.features.data.resize(n * dim);
  for (std::size_t k = 0; k < n * dim; ++k) {
    d.samples.features.data[k] = static_cast<float>(images[16 + k]) / 255.0f;
  }
  d.samples.labels.resize(n);
  std::size_t max_label = 0;
  for (std::size_t k = 0; k < n; ++k) {
    d.samples.labels[k] = labels[8 + k];
    max_label = std::max<std::size_t>(max_label, labels[8 + k]);
  }
  d.num_classes = n == 0 ? 0 : max_label + 1;
  return d;
}

void WriteIdx(const Dataset& data, std::size_t image_rows,
              std::size_t image_cols, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  if (image_rows * image_cols != data.dim()) {
    throw ShapeError("image geometry does not match feature dimension");
  }
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) {
    throw std::runtime_error("cannot write IDX files at " +
                             images_path.string());
  }
  WriteBe32(img, 0x00000803u);
  WriteBe32(img, static_cast<std::uint32_t>(data.size()));
  WriteBe32(img, static_cast<std::uint32_t>(image_rows));
  WriteBe32(img, static_cast<std::uint32_t>(image_cols));
  for (float v : data.samples.features.data) {
    const double q = std::round(std::clamp(static_cast<double>(v), 0.0, 1.0) *
                                255.0);
    img.put(static_cast<char>(static_cast<unsigned char>(q)));
  }
  WriteBe32(lab, 0x00000801u);
  WriteBe32(lab, static_cast<std::uint32_t>(data.size()));
  for (std::int32_t y : data.samples.labels) {
    lab.put(static_cast<char>(static_cast<unsigned char>(y)));
  }
}

void PartitionSpec::Validate() const {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (law == PartitionLaw::kDirichlet && !(alpha > 0.0)) {
    throw ConfigError("dirichlet alpha must be > 0");
  }
  if (law == PartitionLaw::kPathological && shards_per_client < 1) {
    throw ConfigError("shards_per_client must be >= 1");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
}

bool Partition::operator==(const Partition& other) const {
  if (clients.size() != other.clients.size()) return false;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const ClientSplit& a = clients[i];
    const ClientSplit& b = other.clients[i];
    if (a.rows != b.rows || a.train != b.train || a.test != b.test) {
      return false;
    }
  }
  return true;
}

void SplitTrainTest(const Dataset& data, ClientSplit& split,
                    double test_fraction, std::uint64_t seed) {
  Rng rng = MakeRng(seed, Stream::kSplit);
  // Label-grouped, shuffled within each label; a systematic sample over this
  // order is stratified.
  std::vector<std::size_t> ordered = split.rows;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](std::size_t a, std::size_t b) {
                     return data.samples.labels[a] < data.samples.labels[b];
                   });
  for (auto it = ordered.begin(); it != ordered.end();) {
    const auto label = data.samples.labels[*it];
    auto end = std::find_if(it, ordered.end(), [&](std::size_t r) {
      return data.samples.labels[r] != label;
    });
    std::shuffle(it, end, rng);
    it = end;
  }

  const std::size_t n = ordered.size();
  std::size_t n_test = 0;
  if (n >= 2) {
    n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  }
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) {
    is_test[(2 * i + 1) * n / (2 * n_test)] = true;
  }
  split.train.clear();
  split.test.clear();
  for (std::size_t k = 0; k < n; ++k) {
    (is_test[k] ? split.test : split.train).push_back(ordered[k]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
}

namespace {

void FinishPartition(const Dataset& data, const PartitionSpec& spec,
                     Partition& p) {
  for (std::size_t i = 0; i < p.clients.size(); ++i) {
    ClientSplit& c = p.clients[i];
    std::sort(c.rows.begin(), c.rows.end());
    SplitTrainTest(data, c, spec.test_fraction,
                   DeriveSeed(spec.seed, {static_cast<std::uint64_t>(
                                             Stream::kSplit), i}));
  }
}

// Largest-remainder apportionment of `total` items by `shares` (sum 1).
std::vector<std::size_t> Apportion(std::span<const double> shares,
                                   std::size_t total) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    ++counts[remainders[k % remainders.size()].second];
  }
  return counts;
}

}  // namespace

Partition PartitionDirichlet(const Dataset& data, const PartitionSpec& spec) {
  spec.Validate();
  if (spec.law != PartitionLaw::kDirichlet) {
    throw ConfigError("PartitionDirichlet needs a dirichlet spec");
  }
  const std::size_t n_clients = spec.num_clients;
  if (data.size() < n_clients) {
    throw InsufficientDataError(
        "insufficient data: " + std::to_string(data.size()) + " rows for " +
        std::to_string(n_clients) + " clients");
  }

  Rng rng = MakeRng(spec.seed, Stream::kPartition);
  std::gamma_distribution<double> gamma(spec.alpha, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n_clients - 1);

  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t r = 0; r < data.size(); ++r) {
    by_class[static_cast<std::size_t>(data.samples.labels[r])].push_back(r);
  }

  Partition p;
  p.clients.resize(n_clients);
  std::vector<double> shares(n_clients);
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    double sum = 0.0;
    for (double& s : shares) {
      s = gamma(rng);
      sum += s;
    }
    if (sum > 0.0) {
      for (double& s : shares) s /= sum;
    } else {
      // Every draw underflowed (tiny alpha): all mass on one client.
      std::fill(shares.begin(), shares.end(), 0.0);
      shares[pick(rng)] = 1.0;
    }
    const std::vector<std::size_t> counts = Apportion(shares, rows.size());
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      auto& dst = p.clients[i].rows;
      dst.insert(dst.end(), rows.begin() + static_cast<std::ptrdiff_t>(cursor),
                 rows.begin() + static_cast<std::ptrdiff_t>(cursor + counts[i]));
      cursor += counts[i];
    }
  }

  // Floor rule: at least two rows per client where the data allows it.
  for (;;) {
    auto size_of = [](const ClientSplit& c) { return c.rows.size(); };
    auto small = std::find_if(p.clients.begin(), p.clients.end(),
                              [&](const ClientSplit& c) { return size_of(c) < 2; });
    if (small == p.clients.end()) break;
    auto large = std::max_element(
        p.clients.begin(), p.clients.end(),
        [&](const ClientSplit& a, const ClientSplit& b) {
          return size_of(a) < size_of(b);
        });
    if (size_of(*large) <= 2) break;
    std::sort(large->rows.begin(), large->rows.end());
    small->rows.push_back(large->rows.back());
    large->rows.pop_back();
  }

  FinishPartition(data, spec, p);
  return p;
}

Partition PartitionPathological(const Dataset& data,
                                const PartitionSpec& spec) {
  spec.Validate();
  if (spec.law != PartitionLaw::kPathological) {
    throw ConfigError("PartitionPathological needs a pathological spec");
  }
  const std::size_t n_shards = spec.num_clients * spec.shards_per_client;
  const std::size_t n = data.size();
  if (n < n_shards) {
    throw ConfigError("shard size would be 0: " + std::to_string(n) +
                      " rows for " + std::to_string(n_shards) + " shards");
  }

  std::vector<std::size_t> sorted(n);
  std::iota(sorted.begin(), sorted.end(), std::size_t{0});
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) {
                     return data.samples.labels[a] < data.samples.labels[b];
                   });

  std::vector<std::size_t> deal(n_shards);
  std::iota(deal.begin(), deal.end(), std::size_t{0});
  Rng rng = MakeRng(spec.seed, Stream::kPartition);
  std::shuffle(deal.begin(), deal.end(), rng);

  Partition p;
  p.clients.resize(spec.num_clients);
  for (std::size_t k = 0; k < n_shards; ++k) {
    const std::size_t shard = deal[k];
    const std::size_t begin = shard * n / n_shards;
    const std::size_t end = (shard + 1) * n / n_shards;
    auto& dst = p.clients[k / spec.shards_per_client].rows;
    dst.insert(dst.end(), sorted.begin() + static_cast<std::ptrdiff_t>(begin),
               sorted.begin() + static_cast<std::ptrdiff_t>(end));
  }
  FinishPartition(data, spec, p);
  return p;
}

Partition MakePartition(const Dataset& data, const PartitionSpec& spec) {
  return spec.law == PartitionLaw::kDirichlet
             ? PartitionDirichlet(data, spec)
             : PartitionPathological(data, spec);
}

std::vector<std::vector<std::size_t>> LabelHistogram(const Dataset& data,
                                                     const Partition& p) {
  std::vector<std::vector<std::size_t>> hist(
      p.num_clients(), std::vector<std::size_t>(data.num_classes, 0));
  for (std::size_t i = 0; i < p.num_clients(); ++i) {
    for (std::size_t r : p.clients[i].rows) {
      ++hist[i][static_cast<std::size_t>(data.samples.labels[r])];
    }
  }
  return hist;
}

double LabelEntropy(std::span<const std::size_t> counts) {
  const double total =
      static_cast<double>(std::accumulate(counts.begin(), counts.end(),
                                          std::size_t{0}));
  if (total == 0.0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double q = static_cast<double>(c) / total;
    h -= q * std::log(q);
  }
  return h;
}

}  // namespace fedcspack
