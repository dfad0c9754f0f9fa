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

#pragma once

#include <span>

#include "traitalign/common.hpp"

namespace traitalign {

// MLP d -> h -> h -> 1 with leaky-ReLU(0.2) hidden units and a logistic
// output giving P(source = 1 | z). Parameters are single precision; inputs
// and outputs are converted at the boundary.
class Discriminator {
 public:
  Discriminator(std::size_t input_dim, std::size_t hidden, double input_dropout, Rng& rng);

  // All weights zero and output bias logit(p): outputs p for every input.
  static Discriminator constant(std::size_t input_dim, std::size_t hidden, double p);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  double input_dropout() const { return dropout_; }
  std::size_t parameter_count() const;

  // Evaluation-mode probabilities, one per row of `rows`.
  Vector predict(const Matrix& rows) const;

  // One SGD step on sum_i weight_i * BCE(p_i, target_i) with input dropout.
  // Returns the pre-step loss.
  double train_step(const Matrix& rows, const Vector& targets, const Vector& weights, double lr,
                    Rng& rng);

  // Evaluation-mode gradient of sum_i weight_i * BCE(p_i, target_i) with
  // respect to each input row. Returns the loss.
  double input_gradient(const Matrix& rows, const Vector& targets, const Vector& weights,
                        Matrix& grad) const;

  bool finite() const;

 private:
  Discriminator() = default;

  struct Cache {
    Eigen::MatrixXf x, z1, a1, z2, a2;
    Eigen::RowVectorXf p;
  };
  void forward(const Eigen::MatrixXf& x, Cache& c) const;

  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  double dropout_ = 0.0;
  Eigen::MatrixXf w1_, w2_;
  Eigen::VectorXf b1_, b2_;
  Eigen::RowVectorXf w3_;
  float b3_ = 0.0f;
};

// Clamp used before every log in the adversarial and classification losses.
inline constexpr double kProbClamp = 1e-9;

// Fraction of a balanced probe classified correctly (mapped source rows
// should score >= 0.5, target rows < 0.5).
double discriminator_accuracy(const Discriminator& d, const Matrix& mapped_source,
                              const Matrix& target);

}  // namespace traitalign
