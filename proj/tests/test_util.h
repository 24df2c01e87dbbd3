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

#ifndef FEDCSPACK_TESTS_TEST_UTIL_H_
#define FEDCSPACK_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fedcspack/model.h"
#include "fedcspack/wire.h"

namespace fedcspack::testing {

inline Batch RandomBatch(std::size_t rows, std::size_t dim, std::size_t classes,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> x(0.0, 1.0);
  std::uniform_int_distribution<int> y(0, static_cast<int>(classes) - 1);
  Batch b;
  b.features.rows = rows;
  b.features.cols = dim;
  for (std::size_t k = 0; k < rows * dim; ++k) {
    b.features.data.push_back(static_cast<float>(x(rng)));
  }
  for (std::size_t r = 0; r < rows; ++r) b.labels.push_back(y(rng));
  return b;
}

inline FlatParams RandomParams(const ShapeSpec& shape, std::uint64_t seed,
                               double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, scale);
  FlatParams p = FlatParams::Zeros(shape);
  for (float& v : p.values) v = static_cast<float>(w(rng));
  return p;
}

inline std::vector<float> RandomVector(std::size_t n, std::mt19937_64& rng,
                                       double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(d(rng));
  return v;
}

// Random well-formed update: sorted distinct indices, legal weight terms,
// payload lengths in [1, pack].
inline PackedUpdate RandomPackedUpdate(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> id(0, 1u << 20);
  std::uniform_int_distribution<std::uint32_t> pack_d(1, 64);
  std::uniform_int_distribution<std::size_t> count_d(0, 12);
  std::uniform_real_distribution<float> theta_d(-1.0f, 1.0f);
  std::exponential_distribution<float> beta_d(1.0f);
  std::normal_distribution<float> value_d(0.0f, 3.0f);
  PackedUpdate u;
  u.client_id = id(rng);
  u.round = id(rng);
  u.pack = pack_d(rng);
  std::uint32_t index = 0;
  const std::size_t count = count_d(rng);
  std::uniform_int_distribution<std::uint32_t> gap(0, 5);
  std::uniform_int_distribution<std::uint32_t> len_d(1, u.pack);
  for (std::size_t k = 0; k < count; ++k) {
    index += gap(rng) + (k == 0 ? 0 : 1);
    PackedEntry e;
    e.package_index = index;
    e.theta = theta_d(rng);
    e.beta = beta_d(rng);
    e.payload.resize(len_d(rng));
    for (float& v : e.payload) v = value_d(rng);
    u.entries.push_back(std::move(e));
  }
  return u;
}

// Sign pattern of every hidden pre-activation over the batch.
inline std::vector<bool> ReluPattern(const std::vector<double>& x,
                                     const ShapeSpec& shape, const Batch& b) {
  std::vector<bool> pattern;
  const auto& layers = shape.layers();
  for (std::size_t r = 0; r < b.size(); ++r) {
    const auto row = b.features.row(r);
    std::vector<double> a(row.begin(), row.end());
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      const LayerDims& d = layers[l];
      const double* w = x.data() + shape.layer_offset(l);
      std::vector<double> z(w + d.in * d.out, w + d.in * d.out + d.out);
      for (std::size_t i = 0; i < d.in; ++i) {
        for (std::size_t o = 0; o < d.out; ++o) z[o] += a[i] * w[i * d.out + o];
      }
      for (double& v : z) {
        pattern.push_back(v > 0.0);
        if (shape.activation() == Activation::kRelu) v = std::max(v, 0.0);
      }
      a = std::move(z);
    }
  }
  return pattern;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t redrawn = 0;
};

// Compares LossGradient with central differences of step h on `coords`
// random coordinates. A coordinate whose +-h step flips any ReLU is redrawn.
inline GradientCheck CheckGradient(const FlatParams& p, const Batch& b,
                                   std::size_t coords, double h,
                                   std::mt19937_64& rng) {
  const std::vector<double> g = LossGradient(p, b);
  const std::vector<double> base(p.values.begin(), p.values.end());
  const std::vector<bool> pattern = ReluPattern(base, p.shape, b);
  std::uniform_int_distribution<std::size_t> pick(0, p.values.size() - 1);
  GradientCheck out;
  while (out.checked < coords) {
    if (out.redrawn > 100 * coords) break;
    const std::size_t k = pick(rng);
    std::vector<double> up = base;
    std::vector<double> down = base;
    up[k] += h;
    down[k] -= h;
    if (ReluPattern(up, p.shape, b) != pattern ||
        ReluPattern(down, p.shape, b) != pattern) {
      ++out.redrawn;
      continue;
    }
    const double fd = (MeanCrossEntropy(up, p.shape, b) -
                       MeanCrossEntropy(down, p.shape, b)) /
                      (2 * h);
    const double rel = std::abs(g[k] - fd) /
                       std::max({std::abs(g[k]), std::abs(fd), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  }
  return out;
}

}  // namespace fedcspack::testing

#endif  // FEDCSPACK_TESTS_TEST_UTIL_H_
