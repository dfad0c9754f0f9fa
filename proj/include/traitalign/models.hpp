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

// Losses, Adam, averaged-embedding features and the linear (logistic or
// least-squares) model. The CNN lives in cnn.hpp.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traitalign/align.hpp"
#include "traitalign/corpus.hpp"
#include "traitalign/embeddings.hpp"
#include "traitalign/json_util.hpp"

namespace traitalign {

enum class LossKind { bce, mse };

std::string_view loss_name(LossKind k);
LossKind parse_loss(std::string_view name);

// bce: -mean[y ln p + (1 - y) ln(1 - p)] with p clamped to [1e-9, 1 - 1e-9].
// mse: mean (y - yhat)^2.
double loss(LossKind kind, std::span<const double> predictions, std::span<const double> targets);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed list of parameter blocks, addressed by position.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update to every block; grads[i] matches params[i] in shape.
  void step(std::span<Matrix* const> params, std::span<const Matrix> grads);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 10;
  AdamConfig adam{};
  LossKind loss = LossKind::bce;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class FeatureMode { mono, multi, global_trait };

std::string_view feature_mode_name(FeatureMode m);

// Word lookup for one feature mode. Tables are stored already mapped:
// mono keeps raw vectors, multi applies W_muse to source languages and
// global_trait applies W_trait * W_muse; target-language words are never
// mapped.
class FeatureVectorizer {
 public:
  static FeatureVectorizer mono(std::vector<EmbeddingTable> tables);
  // semantic_maps: source language -> W_muse. Languages without a map must
  // be the target.
  static FeatureVectorizer multi(const std::vector<EmbeddingTable>& mono_tables,
                                 const std::map<std::string, OrthogonalMap>& semantic_maps,
                                 const std::string& target_language);
  static FeatureVectorizer global_trait(const std::vector<EmbeddingTable>& mono_tables,
                                        const std::map<std::string, OrthogonalMap>& semantic_maps,
                                        const std::map<std::string, TraitAlignment>& trait_maps,
                                        const std::string& target_language, Trait trait);

  FeatureMode mode() const { return mode_; }
  std::optional<Trait> trait() const { return trait_; }
  std::size_t dim() const { return dim_; }
  const EmbeddingTable& table(std::string_view language) const;
  bool has_language(std::string_view language) const;
  const std::vector<EmbeddingTable>& tables() const { return tables_; }

 private:
  FeatureMode mode_ = FeatureMode::mono;
  std::optional<Trait> trait_;
  std::size_t dim_ = 0;
  std::vector<EmbeddingTable> tables_;
};

struct AverageFeatures {
  Vector vector;
  std::size_t known_tokens = 0;
  bool all_oov = false;  // vector is zero
};

// Mean vector of the in-vocabulary tokens; OOV tokens are skipped.
AverageFeatures vectorize_average(const UserDocument& doc, const FeatureVectorizer& vz);

// p = sigmoid(w.x + b) for bce, yhat = w.x + b for mse.
struct LinearModel {
  Vector weights;
  double bias = 0.0;
  LossKind loss = LossKind::bce;

  double predict(const Vector& x) const;
  // Positive iff p >= 0.5 (bce only).
  Label classify(const Vector& x) const;
};

// Mean loss over the rows of `features` and its gradient.
double linear_loss_gradient(const LinearModel& model, const Matrix& features,
                            std::span<const double> targets, Vector& grad_w, double& grad_b);

struct LinearTrainResult {
  LinearModel model;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

// Zero-initialised weights, fixed-epoch Adam on shuffled mini-batches.
// Throws ValueError for a single-class bce training set and TrainingError
// on a non-finite loss.
LinearTrainResult train_linear(const Matrix& features, std::span<const double> targets,
                               const TrainConfig& config);

// Flat named parameter arrays plus free-form metadata. Doubles are written
// in shortest round-trip form, so reload is bit-exact.
struct Checkpoint {
  json metadata = json::object();
  std::vector<std::pair<std::string, Matrix>> parameters;

  const Matrix& parameter(std::string_view name) const;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint linear_checkpoint(const LinearModel& model, const TrainConfig& config);
LinearModel linear_from_checkpoint(const Checkpoint& ckpt);

}  // namespace traitalign
