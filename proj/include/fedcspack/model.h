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

#ifndef FEDCSPACK_MODEL_H_
#define FEDCSPACK_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fedcspack {

enum class Activation { kRelu, kIdentity };

struct LayerDims {
  std::size_t in = 0;
  std::size_t out = 0;
  bool operator==(const LayerDims&) const = default;
};

// Architecture of a fully connected network. Hidden layers use `activation`;
// the final layer always emits raw logits.
//
// Flattened layout: layers in order, each as its in x out weight matrix
// (row-major, element (i, o) at i * out + o) followed by its out biases.
// Package indices are defined over this layout.
class ShapeSpec {
 public:
  ShapeSpec() = default;
  // Throws ShapeError if `layers` is empty, a dim is zero or dims do not chain.
  ShapeSpec(std::vector<LayerDims> layers, Activation activation);

  // in -> classes.
  static ShapeSpec Logistic(std::size_t in, std::size_t classes);
  // in -> hidden (relu) -> classes.
  static ShapeSpec Mlp(std::size_t in, std::size_t hidden, std::size_t classes);

  const std::vector<LayerDims>& layers() const { return layers_; }
  Activation activation() const { return activation_; }
  std::size_t total_params() const { return total_params_; }
  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t num_classes() const { return layers_.back().out; }
  // Offset of layer `l`'s weight block; its biases follow at
  // offset + in * out.
  std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

  bool operator==(const ShapeSpec& other) const {
    return layers_ == other.layers_ && activation_ == other.activation_;
  }

 private:
  std::vector<LayerDims> layers_;
  Activation activation_ = Activation::kRelu;
  std::vector<std::size_t> offsets_;
  std::size_t total_params_ = 0;
};

struct FlatParams {
  std::vector<float> values;
  ShapeSpec shape;

  static FlatParams Zeros(const ShapeSpec& shape);
  // Glorot-uniform weights, zero biases.
  static FlatParams Init(const ShapeSpec& shape, std::uint64_t seed);

  std::span<const float> span() const { return values; }
  std::size_t size() const { return values.size(); }
};

// Row-major dense matrix of features.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data).subspan(r * cols, cols);
  }
};

struct Batch {
  Matrix features;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  Batch Select(std::span<const std::size_t> rows) const;
};

struct LossResult {
  double loss = 0.0;  // mean cross-entropy
  std::size_t correct = 0;
};

// Per-layer weight / bias views into a flattened parameter vector.
struct LayerView {
  std::span<const float> weights;
  std::span<const float> bias;
};
std::vector<LayerView> Unflatten(const FlatParams& params);
// Inverse of Unflatten: concatenates weight and bias blocks in layer order.
FlatParams Flatten(const ShapeSpec& shape,
                   std::span<const std::vector<float>> weights,
                   std::span<const std::vector<float>> biases);

LossResult ForwardLoss(const FlatParams& params, const Batch& batch);

// Same loss over a double-precision parameter vector laid out per `shape`.
double MeanCrossEntropy(std::span<const double> params, const ShapeSpec& shape,
                        const Batch& batch);

// Gradient of the mean cross-entropy, evaluated in double precision.
// Throws NumericError naming the first layer with a non-finite entry.
std::vector<double> LossGradient(const FlatParams& params, const Batch& batch,
                                 double* loss = nullptr);

FlatParams SgdStep(const FlatParams& params, const Batch& batch, double lr);

struct TrainOptions {
  std::size_t epochs = 1;
  double lr = 0.05;
  std::size_t batch_size = 32;
  // FedProx coefficient. The proximal term mu/2 ||w - anchor||^2 is applied
  // as an implicit (proximal) step so large values stay stable.
  double prox_mu = 0.0;
};

// Minibatch SGD over `data` in an order shuffled from `seed` each epoch.
// Throws InsufficientDataError if `data` is empty.
FlatParams LocalTrain(const FlatParams& params, const Batch& data,
                      const TrainOptions& options, const FlatParams& anchor,
                      std::uint64_t seed);

// Fraction of rows whose argmax logit equals the label; 0 for empty batches.
double Accuracy(const FlatParams& params, const Batch& batch);

}  // namespace fedcspack

#endif  // FEDCSPACK_MODEL_H_
