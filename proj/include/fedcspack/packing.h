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

#ifndef FEDCSPACK_PACKING_H_
#define FEDCSPACK_PACKING_H_

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "fedcspack/model.h"

namespace fedcspack {

// Floor applied to the global-side distribution before KL.
inline constexpr double kKlFloor = 1e-8;
// Smallest weight a shared package may carry.
inline constexpr double kMinMaskWeight = 1e-6;

// One contiguous slice of a flattened model.
struct PackageView {
  std::size_t index = 0;
  std::size_t offset = 0;
  std::size_t len = 0;
};

// Fixed tiling of [0, total) into ceil(total / pack) packages; only the last
// may be short.
class PackageLayout {
 public:
  PackageLayout(std::size_t total_params, std::size_t pack);

  std::size_t total_params() const { return total_; }
  std::size_t pack() const { return pack_; }
  std::size_t count() const { return count_; }
  PackageView view(std::size_t j) const;

  template <typename T>
  std::span<T> slice(std::span<T> flat, std::size_t j) const {
    const PackageView v = view(j);
    return flat.subspan(v.offset, v.len);
  }

 private:
  std::size_t total_;
  std::size_t pack_;
  std::size_t count_;
};

struct SimilarityProfile {
  double overall = 0.0;                 // cosine over the whole model
  std::vector<double> per_package_cos;  // directional weight per package
  std::vector<double> per_package_kl;   // distribution distance per package
};

// Which terms of the dual weight a client contributes.
enum class WeightMode { kDual, kCosOnly, kKlOnly };

struct LocalMask {
  std::vector<double> weights;        // zero outside `selected`
  std::vector<std::size_t> selected;  // ascending
};

// Selected package index -> local-minus-global slice (or raw local slice).
using DeltaPackages = std::map<std::size_t, std::vector<float>>;

// Cosine similarity with 64-bit accumulation, clamped to [-1, 1]. Zero when
// either vector has zero norm.
double Cosine(std::span<const float> a, std::span<const float> b);

// KL(softmax(local) || softmax(global)). Both distributions are floored at
// kKlFloor and renormalized, so identical inputs give exactly 0. Always >= 0.
double KlPackage(std::span<const float> local, std::span<const float> global);

SimilarityProfile ScorePackages(const FlatParams& local,
                                const FlatParams& global, std::size_t pack);

// Packages whose cosine falls below the overall cosine, least similar first
// up to ceil(cap_ratio * J), returned in ascending index order. Falls back to
// the single least similar package when no package qualifies.
std::vector<std::size_t> SelectTopK(const SimilarityProfile& profile,
                                    double cap_ratio);

// Weight a shared package carries given the (already mode-adjusted) terms.
double MaskWeight(double theta, double beta);

// The (theta, beta) pair a client reports for package j under `mode`.
std::pair<double, double> ReportedTerms(const SimilarityProfile& profile,
                                        std::size_t j, WeightMode mode);

LocalMask BuildMask(const SimilarityProfile& profile,
                    std::span<const std::size_t> selected,
                    WeightMode mode = WeightMode::kDual);

enum class PayloadKind { kDelta, kRaw };

DeltaPackages ExtractDeltas(const FlatParams& local, const FlatParams& global,
                            std::span<const std::size_t> selected,
                            std::size_t pack,
                            PayloadKind kind = PayloadKind::kDelta);

// ceil(ratio * n), tolerant of representation error in `ratio` (0.3 * 10 is
// 3, not 4).
std::size_t CeilFraction(double ratio, std::size_t n);

}  // namespace fedcspack

#endif  // FEDCSPACK_PACKING_H_
