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

#include "fedcspack/packing.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedcspack/errors.h"

namespace fedcspack {

PackageLayout::PackageLayout(std::size_t total_params, std::size_t pack)
    : total_(total_params), pack_(pack) {
  if (pack == 0) throw std::invalid_argument("pack must be >= 1");
  if (total_params == 0) throw ShapeError("cannot package an empty model");
  count_ = (total_params + pack - 1) / pack;
}

PackageView PackageLayout::view(std::size_t j) const {
  if (j >= count_) {
    throw std::out_of_range("package " + std::to_string(j) + " of " +
                            std::to_string(count_));
  }
  const std::size_t offset = j * pack_;
  return {j, offset, std::min(pack_, total_ - offset)};
}

double Cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("cosine of unequal lengths");
  if (a.empty()) throw ShapeError("cosine of empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = a[k];
    const double y = b[k];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

std::vector<double> Softmax(std::span<const float> v) {
  const float m = *std::max_element(v.begin(), v.end());
  std::vector<double> p(v.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    p[k] = std::exp(static_cast<double>(v[k]) - static_cast<double>(m));
    sum += p[k];
  }
  for (double& x : p) x /= sum;
  return p;
}

// Raises every entry to at least kKlFloor and returns the new total.
double FloorAtEpsilon(std::vector<double>& dist) {
  double sum = 0.0;
  for (double& x : dist) {
    x = std::max(x, kKlFloor);
    sum += x;
  }
  return sum;
}

}  // namespace

double KlPackage(std::span<const float> local, std::span<const float> global) {
  if (local.size() != global.size()) throw ShapeError("KL of unequal lengths");
  if (local.empty()) throw ShapeError("KL of empty vectors");
  std::vector<double> p = Softmax(local);
  std::vector<double> q = Softmax(global);
  const double psum = FloorAtEpsilon(p);
  const double qsum = FloorAtEpsilon(q);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = p[k] / psum;
    kl += pk * std::log(pk * qsum / q[k]);
  }
  return std::max(kl, 0.0);
}

SimilarityProfile ScorePackages(const FlatParams& local,
                                const FlatParams& global, std::size_t pack) {
  if (local.values.size() != global.values.size()) {
    throw ShapeError("local and global models differ in size");
  }
  const PackageLayout layout(local.values.size(), pack);
  SimilarityProfile profile;
  profile.overall = Cosine(local.span(), global.span());
  profile.per_package_cos.resize(layout.count());
  profile.per_package_kl.resize(layout.count());
  for (std::size_t j = 0; j < layout.count(); ++j) {
    const auto l = layout.slice(local.span(), j);
    const auto g = layout.slice(global.span(), j);
    profile.per_package_cos[j] = Cosine(l, g);
    profile.per_package_kl[j] = KlPackage(l, g);
  }
  return profile;
}

std::size_t CeilFraction(double ratio, std::size_t n) {
  const double x = ratio * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

std::vector<std::size_t> SelectTopK(const SimilarityProfile& profile,
                                    double cap_ratio) {
  if (!(cap_ratio > 0.0 && cap_ratio <= 1.0)) {
    throw std::invalid_argument("cap_ratio must lie in (0, 1]");
  }
  const auto& cos = profile.per_package_cos;
  if (cos.empty()) return {};
  std::vector<std::size_t> order(cos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cos[a] < cos[b]; });

  std::vector<std::size_t> candidates;
  for (std::size_t j : order) {
    if (cos[j] < profile.overall) candidates.push_back(j);
  }
  if (candidates.empty()) return {order.front()};

  const std::size_t cap = std::max<std::size_t>(
      1, CeilFraction(cap_ratio, cos.size()));
  candidates.resize(std::min(candidates.size(), cap));
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

double MaskWeight(double theta, double beta) {
  return std::max(theta + beta, kMinMaskWeight);
}

std::pair<double, double> ReportedTerms(const SimilarityProfile& profile,
                                        std::size_t j, WeightMode mode) {
  const double theta = profile.per_package_cos.at(j);
  const double beta = profile.per_package_kl.at(j);
  switch (mode) {
    case WeightMode::kCosOnly:
      return {theta, 0.0};
    case WeightMode::kKlOnly:
      return {0.0, beta};
    case WeightMode::kDual:
      break;
  }
  return {theta, beta};
}

LocalMask BuildMask(const SimilarityProfile& profile,
                    std::span<const std::size_t> selected, WeightMode mode) {
  LocalMask mask;
  const std::size_t count = profile.per_package_cos.size();
  mask.weights.assign(count, 0.0);
  mask.selected.assign(selected.begin(), selected.end());
  std::sort(mask.selected.begin(), mask.selected.end());
  if (std::adjacent_find(mask.selected.begin(), mask.selected.end()) !=
      mask.selected.end()) {
    throw std::invalid_argument("duplicate package in selection");
  }
  for (std::size_t j : mask.selected) {
    if (j >= count) {
      throw std::out_of_range("selected package " + std::to_string(j) +
                              " out of range");
    }
    const auto [theta, beta] = ReportedTerms(profile, j, mode);
    mask.weights[j] = MaskWeight(theta, beta);
  }
  return mask;
}

DeltaPackages ExtractDeltas(const FlatParams& local, const FlatParams& global,
                            std::span<const std::size_t> selected,
                            std::size_t pack, PayloadKind kind) {
  if (local.values.size() != global.values.size()) {
    throw ShapeError("local and global models differ in size");
  }
  const PackageLayout layout(local.values.size(), pack);
  DeltaPackages out;
  for (std::size_t j : selected) {
    const auto l = layout.slice(local.span(), j);
    const auto g = layout.slice(global.span(), j);
    std::vector<float> payload(l.begin(), l.end());
    if (kind == PayloadKind::kDelta) {
      for (std::size_t k = 0; k < payload.size(); ++k) payload[k] -= g[k];
    }
    out.emplace(j, std::move(payload));
  }
  return out;
}

}  // namespace fedcspack
