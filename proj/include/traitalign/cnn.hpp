//  Copyright 2026 The traitalign Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

// Text CNN over a token grid with one or two embedding channels.
//
// Channel 0 is dynamic: its word vectors are model parameters. Channel 1,
// when present, is a static table that never receives gradients. Each
// (channel, width) pair runs `filters` valid convolutions over token
// positions, then ReLU and max over time. The pooled features feed a tanh
// hidden layer and a softmax-2 or linear-1 head.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "traitalign/models.hpp"

namespace traitalign {

enum class CnnHead { softmax2, linear1 };

struct CnnConfig {
  std::vector<std::size_t> widths{3, 4, 5};
  std::size_t filters = 64;
  std::size_t fc_hidden = 100;
  CnnHead head = CnnHead::softmax2;
  std::size_t max_tokens = 1000;

  void validate() const;
};

// One row id per grid position; -1 marks OOV tokens and padding.
using TokenIds = std::vector<int>;

// Rows shared by both channels: one per distinct (language, word) pair that
// occurs in the given documents and has a dynamic-channel vector.
class CnnVocabulary {
 public:
  CnnVocabulary(const std::vector<const UserDocument*>& documents, const FeatureVectorizer& dynamic,
                const FeatureVectorizer* static_channel);

  std::size_t size() const { return keys_.size(); }
  const Matrix& dynamic_init() const { return dynamic_; }
  const std::optional<Matrix>& static_table() const { return static_; }
  // Truncates to the first max_tokens tokens and pads with -1.
  TokenIds encode(const UserDocument& doc, std::size_t max_tokens) const;
  std::optional<int> id(std::string_view language, std::string_view word) const;

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, int> index_;
  Matrix dynamic_;
  std::optional<Matrix> static_;
};

class CnnModel {
 public:
  CnnModel(CnnConfig config, Matrix dynamic_embeddings, std::optional<Matrix> static_embeddings,
           Rng& rng);

  const CnnConfig& config() const { return config_; }
  std::size_t channels() const { return static_.has_value() ? 2 : 1; }
  std::size_t dim() const { return static_cast<std::size_t>(params_[0].cols()); }
  std::size_t feature_count() const;
  std::size_t output_size() const { return config_.head == CnnHead::softmax2 ? 2 : 1; }

  // Trainable blocks in a fixed order: "embedding.dynamic", then
  // "conv.c<c>.w<w>.weight" ((w*d) x filters) and ".bias" (1 x filters) for
  // each channel and width, "fc.weight", "fc.bias", "out.weight", "out.bias".
  const std::vector<std::string>& parameter_names() const { return names_; }
  const std::vector<Matrix>& parameters() const { return params_; }
  std::vector<Matrix>& mutable_parameters() { return params_; }
  const std::optional<Matrix>& static_embeddings() const { return static_; }

  struct Activations {
    std::vector<Matrix> grids;           // per channel, T x d
    Vector pre_pool_max;                 // max over positions, before ReLU
    std::vector<Eigen::Index> argmax;    // first position attaining the max
    Vector features;                     // pooled, after ReLU
    Vector hidden;                       // tanh layer
    Vector output;                       // logits or regression value
  };

  // Logits (softmax2) or the prediction (linear1). `ids` must have
  // max_tokens entries.
  Vector forward(const TokenIds& ids, Activations* cache = nullptr) const;
  // Softmax probability of the positive class (softmax2 only).
  double positive_probability(const TokenIds& ids) const;
  double predict_value(const TokenIds& ids) const;
  Label classify(const TokenIds& ids) const;

  // Mean loss over the batch (bce on the softmax output, or mse). When
  // `grads` is given it receives one block per parameter, same order.
  double loss_and_gradients(std::span<const TokenIds* const> batch, std::span<const double> targets,
                            std::vector<Matrix>* grads) const;

 private:
  std::size_t block(std::size_t channel, std::size_t width_index) const;

  CnnConfig config_;
  std::vector<std::string> names_;
  std::vector<Matrix> params_;
  std::optional<Matrix> static_;
};

struct CnnTrainResult {
  std::vector<double> loss_curve;
};

// Fixed-epoch Adam on shuffled mini-batches. Throws TrainingError naming the
// parameter when a gradient is non-finite.
CnnTrainResult train_cnn(CnnModel& model, const std::vector<TokenIds>& documents,
                         std::span<const double> targets, const TrainConfig& config);

Checkpoint cnn_checkpoint(const CnnModel& model, const TrainConfig& config);
CnnModel cnn_from_checkpoint(const Checkpoint& ckpt);

}  // namespace traitalign
