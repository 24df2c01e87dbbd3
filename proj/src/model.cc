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

#include "fedcspack/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedcspack/errors.h"
#include "fedcspack/random.h"

namespace fedcspack {

ShapeSpec::ShapeSpec(std::vector<LayerDims> layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
  if (layers_.empty()) throw ShapeError("ShapeSpec needs at least one layer");
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerDims& d = layers_[l];
    if (d.in == 0 || d.out == 0) {
      throw ShapeError("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l > 0 && layers_[l - 1].out != d.in) {
      throw ShapeError("layer " + std::to_string(l) + " input " +
                       std::to_string(d.in) + " does not chain from output " +
                       std::to_string(layers_[l - 1].out));
    }
    offsets_.push_back(offset);
    offset += d.in * d.out + d.out;
  }
  total_params_ = offset;
}

ShapeSpec ShapeSpec::Logistic(std::size_t in, std::size_t classes) {
  return ShapeSpec({{in, classes}}, Activation::kIdentity);
}

ShapeSpec ShapeSpec::Mlp(std::size_t in, std::size_t hidden,
                         std::size_t classes) {
  return ShapeSpec({{in, hidden}, {hidden, classes}}, Activation::kRelu);
}

FlatParams FlatParams::Zeros(const ShapeSpec& shape) {
  return FlatParams{std::vector<float>(shape.total_params(), 0.0f), shape};
}

FlatParams FlatParams::Init(const ShapeSpec& shape, std::uint64_t seed) {
  FlatParams p = Zeros(shape);
  Rng rng = MakeRng(seed, Stream::kInit);
  for (std::size_t l = 0; l < shape.layers().size(); ++l) {
    const LayerDims& d = shape.layers()[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(d.in + d.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    float* w = p.values.data() + shape.layer_offset(l);
    for (std::size_t k = 0; k < d.in * d.out; ++k) {
      w[k] = static_cast<float>(dist(rng));
    }
  }
  return p;
}

Batch Batch::Select(std::span<const std::size_t> rows) const {
  Batch out;
  out.features.rows = rows.size();
  out.features.cols = features.cols;
  out.features.data.reserve(rows.size() * features.cols);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    auto src = features.row(r);
    out.features.data.insert(out.features.data.end(), src.begin(), src.end());
    out.labels.push_back(labels[r]);
  }
  return out;
}

std::vector<LayerView> Unflatten(const FlatParams& params) {
  if (params.values.size() != params.shape.total_params()) {
    throw ShapeError("parameter vector length does not match shape");
  }
  std::vector<LayerView> views;
  std::span<const float> all(params.values);
  for (std::size_t l = 0; l < params.shape.layers().size(); ++l) {
    const LayerDims& d = params.shape.layers()[l];
    const std::size_t off = params.shape.layer_offset(l);
    views.push_back({all.subspan(off, d.in * d.out),
                     all.subspan(off + d.in * d.out, d.out)});
  }
  return views;
}

FlatParams Flatten(const ShapeSpec& shape,
                   std::span<const std::vector<float>> weights,
                   std::span<const std::vector<float>> biases) {
  const auto& layers = shape.layers();
  if (weights.size() != layers.size() || biases.size() != layers.size()) {
    throw ShapeError("layer count does not match shape");
  }
  FlatParams p;
  p.shape = shape;
  p.values.reserve(shape.total_params());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (weights[l].size() != layers[l].in * layers[l].out ||
        biases[l].size() != layers[l].out) {
      throw ShapeError("block size mismatch in layer " + std::to_string(l));
    }
    p.values.insert(p.values.end(), weights[l].begin(), weights[l].end());
    p.values.insert(p.values.end(), biases[l].begin(), biases[l].end());
  }
  return p;
}

namespace {

void CheckCompatible(std::size_t param_count, const ShapeSpec& shape,
                     const Batch& batch) {
  if (param_count != shape.total_params()) {
    throw ShapeError("parameter vector has " + std::to_string(param_count) +
                     " entries, shape expects " +
                     std::to_string(shape.total_params()));
  }
  if (batch.features.rows != batch.labels.size()) {
    throw ShapeError("batch feature rows do not match label count");
  }
  if (!batch.empty() && batch.features.cols != shape.input_dim()) {
    throw ShapeError("batch has " + std::to_string(batch.features.cols) +
                     " features, model expects " +
                     std::to_string(shape.input_dim()));
  }
  for (std::int32_t y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= shape.num_classes()) {
      throw ShapeError("label " + std::to_string(y) + " out of range");
    }
  }
}

// Activations of every layer for one sample. acts[0] is the input,
// acts[l + 1] the (post-activation) output of layer l; the last entry holds
// logits.
template <typename T>
void ForwardSample(std::span<const T> params, const ShapeSpec& shape,
                   std::span<const float> x,
                   std::vector<std::vector<double>>& acts) {
  const auto& layers = shape.layers();
  acts.resize(layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerDims& d = layers[l];
    const T* w = params.data() + shape.layer_offset(l);
    const T* b = w + d.in * d.out;
    std::vector<double>& out = acts[l + 1];
    out.assign(d.out, 0.0);
    for (std::size_t o = 0; o < d.out; ++o) out[o] = static_cast<double>(b[o]);
    const std::vector<double>& in = acts[l];
    for (std::size_t i = 0; i < d.in; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const T* wr = w + i * d.out;
      for (std::size_t o = 0; o < d.out; ++o) {
        out[o] += xi * static_cast<double>(wr[o]);
      }
    }
    const bool hidden = l + 1 < layers.size();
    if (hidden && shape.activation() == Activation::kRelu) {
      for (double& v : out) v = std::max(v, 0.0);
    }
  }
}

// Softmax probabilities in place; returns -log p[label].
double SoftmaxCrossEntropy(std::vector<double>& logits, std::size_t label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  const double shifted_label = logits[label] - m;
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return std::log(sum) - shifted_label;
}

std::size_t Argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());
}

template <typename T>
LossResult EvaluateLoss(std::span<const T> params, const ShapeSpec& shape,
                        const Batch& batch) {
  LossResult result;
  std::vector<std::vector<double>> acts;
  double total = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    ForwardSample(params, shape, batch.features.row(r), acts);
    std::vector<double>& logits = acts.back();
    const auto label = static_cast<std::size_t>(batch.labels[r]);
    if (Argmax(logits) == label) ++result.correct;
    total += SoftmaxCrossEntropy(logits, label);
  }
  result.loss = total / static_cast<double>(batch.size());
  return result;
}

}  // namespace

LossResult ForwardLoss(const FlatParams& params, const Batch& batch) {
  CheckCompatible(params.values.size(), params.shape, batch);
  if (batch.empty()) throw ShapeError("ForwardLoss on an empty batch");
  return EvaluateLoss(params.span(), params.shape, batch);
}

double MeanCrossEntropy(std::span<const double> params, const ShapeSpec& shape,
                        const Batch& batch) {
  CheckCompatible(params.size(), shape, batch);
  if (batch.empty()) throw ShapeError("MeanCrossEntropy on an empty batch");
  return EvaluateLoss(params, shape, batch).loss;
}

std::vector<double> LossGradient(const FlatParams& params, const Batch& batch,
                                 double* loss) {
  const ShapeSpec& shape = params.shape;
  CheckCompatible(params.values.size(), shape, batch);
  if (batch.empty()) throw ShapeError("LossGradient on an empty batch");

  const auto& layers = shape.layers();
  std::vector<double> grad(shape.total_params(), 0.0);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  for (std::size_t r = 0; r < batch.size(); ++r) {
    ForwardSample(params.span(), shape, batch.features.row(r), acts);
    delta = acts.back();
    const auto label = static_cast<std::size_t>(batch.labels[r]);
    total += SoftmaxCrossEntropy(delta, label);
    delta[label] -= 1.0;  // d(loss)/d(logits) = softmax - onehot

    for (std::size_t l = layers.size(); l-- > 0;) {
      const LayerDims& d = layers[l];
      const std::size_t off = shape.layer_offset(l);
      double* gw = grad.data() + off;
      double* gb = gw + d.in * d.out;
      const std::vector<double>& in = acts[l];
      for (std::size_t o = 0; o < d.out; ++o) gb[o] += delta[o] * inv_n;
      for (std::size_t i = 0; i < d.in; ++i) {
        const double xi = in[i] * inv_n;
        if (xi == 0.0) continue;
        double* gr = gw + i * d.out;
        for (std::size_t o = 0; o < d.out; ++o) gr[o] += xi * delta[o];
      }
      if (l == 0) break;
      const float* w = params.values.data() + off;
      prev_delta.assign(d.in, 0.0);
      for (std::size_t i = 0; i < d.in; ++i) {
        const float* wr = w + i * d.out;
        double s = 0.0;
        for (std::size_t o = 0; o < d.out; ++o) {
          s += static_cast<double>(wr[o]) * delta[o];
        }
        // acts[l] is a hidden activation here.
        if (shape.activation() == Activation::kRelu && in[i] <= 0.0) s = 0.0;
        prev_delta[i] = s;
      }
      delta.swap(prev_delta);
    }
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t begin = shape.layer_offset(l);
    const std::size_t end =
        begin + layers[l].in * layers[l].out + layers[l].out;
    for (std::size_t k = begin; k < end; ++k) {
      if (!std::isfinite(grad[k])) {
        throw NumericError("non-finite gradient in layer " + std::to_string(l),
                           l);
      }
    }
  }
  if (loss != nullptr) *loss = total * inv_n;
  return grad;
}

namespace {

// One (optionally proximal) gradient step written into `out`.
void ApplyStep(std::vector<float>& values, std::span<const double> grad,
               const TrainOptions& opt, std::span<const float> anchor) {
  if (opt.prox_mu > 0.0) {
    // argmin_w  <g, w> + ||w - v||^2 / (2 lr) + mu/2 ||w - a||^2
    const double scale = 1.0 / (1.0 + opt.lr * opt.prox_mu);
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double v = static_cast<double>(values[k]) - opt.lr * grad[k];
      values[k] = static_cast<float>(
          (v + opt.lr * opt.prox_mu * static_cast<double>(anchor[k])) * scale);
    }
  } else {
    for (std::size_t k = 0; k < values.size(); ++k) {
      values[k] =
          static_cast<float>(static_cast<double>(values[k]) - opt.lr * grad[k]);
    }
  }
}

}  // namespace

FlatParams SgdStep(const FlatParams& params, const Batch& batch, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  FlatParams out = params;
  if (lr == 0.0) return out;
  const std::vector<double> grad = LossGradient(params, batch);
  TrainOptions opt;
  opt.lr = lr;
  ApplyStep(out.values, grad, opt, {});
  return out;
}

FlatParams LocalTrain(const FlatParams& params, const Batch& data,
                      const TrainOptions& options, const FlatParams& anchor,
                      std::uint64_t seed) {
  if (data.empty()) throw InsufficientDataError("client has no data");
  if (options.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (options.batch_size < 1) {
    throw std::invalid_argument("batch_size must be >= 1");
  }
  if (!(options.prox_mu >= 0.0)) {
    throw std::invalid_argument("prox_mu must be >= 0");
  }
  if (!(options.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (anchor.values.size() != params.values.size()) {
    throw ShapeError("anchor shape does not match parameters");
  }

  FlatParams w = params;
  Rng rng = MakeRng(seed, Stream::kTrain);
  std::vector<std::size_t> order(data.size());
  std::vector<std::size_t> rows;
  for (std::size_t e = 0; e < options.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      rows.assign(order.begin() + start, order.begin() + end);
      std::sort(rows.begin(), rows.end());
      const Batch mb = data.Select(rows);
      const std::vector<double> grad = LossGradient(w, mb);
      ApplyStep(w.values, grad, options, anchor.span());
    }
  }
  return w;
}

double Accuracy(const FlatParams& params, const Batch& batch) {
  if (batch.empty()) return 0.0;
  const LossResult r = ForwardLoss(params, batch);
  return static_cast<double>(r.correct) / static_cast<double>(batch.size());
}

}  // namespace fedcspack
