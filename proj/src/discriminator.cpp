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

#include "traitalign/discriminator.hpp"

#include <algorithm>
#include <cmath>

namespace traitalign {

namespace {

constexpr float kSlope = 0.2f;

Eigen::MatrixXf leaky(const Eigen::MatrixXf& z) {
  return z.unaryExpr([](float v) { return v > 0.0f ? v : kSlope * v; });
}

Eigen::MatrixXf leaky_grad(const Eigen::MatrixXf& z, const Eigen::MatrixXf& upstream) {
  return upstream.binaryExpr(z, [](float g, float v) { return v > 0.0f ? g : kSlope * g; });
}

void fill_uniform(Eigen::Ref<Eigen::MatrixXf> m, float bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    }
  }
}

Eigen::MatrixXf to_columns(const Matrix& rows) { return rows.transpose().cast<float>(); }

double weighted_bce(const Eigen::RowVectorXf& p, const Vector& targets, const Vector& weights) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(static_cast<double>(p(i)), kProbClamp, 1.0 - kProbClamp);
    loss -= weights(i) * (targets(i) * std::log(pi) + (1.0 - targets(i)) * std::log(1.0 - pi));
  }
  return loss;
}

}  // namespace

Discriminator::Discriminator(std::size_t input_dim, std::size_t hidden, double input_dropout,
                             Rng& rng)
    : input_dim_(input_dim), hidden_(hidden), dropout_(input_dropout) {
  if (input_dim == 0 || hidden == 0) throw ValueError("discriminator sizes must be positive");
  if (input_dropout < 0.0 || input_dropout >= 1.0) throw ValueError("dropout must lie in [0, 1)");
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  const float bound1 = 1.0f / std::sqrt(static_cast<float>(input_dim));
  const float bound2 = 1.0f / std::sqrt(static_cast<float>(hidden));
  w1_.resize(h, d);
  b1_.resize(h);
  w2_.resize(h, h);
  b2_.resize(h);
  w3_.resize(h);
  fill_uniform(w1_, bound1, rng);
  fill_uniform(b1_, bound1, rng);
  fill_uniform(w2_, bound2, rng);
  fill_uniform(b2_, bound2, rng);
  fill_uniform(w3_, bound2, rng);
  b3_ = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound2);
}

Discriminator Discriminator::constant(std::size_t input_dim, std::size_t hidden, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValueError("constant discriminator needs p in (0, 1)");
  Discriminator d;
  d.input_dim_ = input_dim;
  d.hidden_ = hidden;
  const auto di = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  d.w1_ = Eigen::MatrixXf::Zero(h, di);
  d.b1_ = Eigen::VectorXf::Zero(h);
  d.w2_ = Eigen::MatrixXf::Zero(h, h);
  d.b2_ = Eigen::VectorXf::Zero(h);
  d.w3_ = Eigen::RowVectorXf::Zero(h);
  d.b3_ = static_cast<float>(std::log(p / (1.0 - p)));
  return d;
}

std::size_t Discriminator::parameter_count() const {
  const std::size_t d = input_dim_, h = hidden_;
  return d * h + h + h * h + h + h + 1;
}

void Discriminator::forward(const Eigen::MatrixXf& x, Cache& c) const {
  c.x = x;
  c.z1.noalias() = w1_ * x;
  c.z1.colwise() += b1_;
  c.a1 = leaky(c.z1);
  c.z2.noalias() = w2_ * c.a1;
  c.z2.colwise() += b2_;
  c.a2 = leaky(c.z2);
  Eigen::RowVectorXf z3 = w3_ * c.a2;
  z3.array() += b3_;
  c.p = z3.unaryExpr([](float v) { return 1.0f / (1.0f + std::exp(-v)); });
}

Vector Discriminator::predict(const Matrix& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != input_dim_) {
    throw ValueError("discriminator input dimension mismatch");
  }
  Cache c;
  forward(to_columns(rows), c);
  return c.p.transpose().cast<double>();
}

double Discriminator::train_step(const Matrix& rows, const Vector& targets, const Vector& weights,
                                 double lr, Rng& rng) {
  Eigen::MatrixXf x = to_columns(rows);
  if (dropout_ > 0.0) {
    const float keep = static_cast<float>(1.0 - dropout_);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        x(i, j) = rng.uniform() < dropout_ ? 0.0f : x(i, j) / keep;
      }
    }
  }
  Cache c;
  forward(x, c);
  const double loss = weighted_bce(c.p, targets, weights);

  Eigen::RowVectorXf dz3(c.p.size());
  for (Eigen::Index i = 0; i < dz3.size(); ++i) {
    dz3(i) = static_cast<float>(weights(i) * (c.p(i) - targets(i)));
  }
  const Eigen::RowVectorXf dw3 = dz3 * c.a2.transpose();
  const float db3 = dz3.sum();
  const Eigen::MatrixXf dz2 = leaky_grad(c.z2, w3_.transpose() * dz3);
  const Eigen::MatrixXf dw2 = dz2 * c.a1.transpose();
  const Eigen::VectorXf db2 = dz2.rowwise().sum();
  const Eigen::MatrixXf dz1 = leaky_grad(c.z1, w2_.transpose() * dz2);
  const Eigen::MatrixXf dw1 = dz1 * c.x.transpose();
  const Eigen::VectorXf db1 = dz1.rowwise().sum();

  const float step = static_cast<float>(lr);
  w3_ -= step * dw3;
  b3_ -= step * db3;
  w2_ -= step * dw2;
  b2_ -= step * db2;
  w1_ -= step * dw1;
  b1_ -= step * db1;
  return loss;
}

double Discriminator::input_gradient(const Matrix& rows, const Vector& targets,
                                     const Vector& weights, Matrix& grad) const {
  Cache c;
  forward(to_columns(rows), c);
  const double loss = weighted_bce(c.p, targets, weights);
  Eigen::RowVectorXf dz3(c.p.size());
  for (Eigen::Index i = 0; i < dz3.size(); ++i) {
    dz3(i) = static_cast<float>(weights(i) * (c.p(i) - targets(i)));
  }
  const Eigen::MatrixXf dz2 = leaky_grad(c.z2, w3_.transpose() * dz3);
  const Eigen::MatrixXf dz1 = leaky_grad(c.z1, w2_.transpose() * dz2);
  const Eigen::MatrixXf dx = w1_.transpose() * dz1;
  grad = dx.transpose().cast<double>();
  return loss;
}

bool Discriminator::finite() const {
  return w1_.allFinite() && w2_.allFinite() && w3_.allFinite() && b1_.allFinite() &&
         b2_.allFinite() && std::isfinite(b3_);
}

double discriminator_accuracy(const Discriminator& d, const Matrix& mapped_source,
                              const Matrix& target) {
  const Vector ps = d.predict(mapped_source);
  const Vector pt = d.predict(target);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) correct += ps(i) >= 0.5;
  for (Eigen::Index i = 0; i < pt.size(); ++i) correct += pt(i) < 0.5;
  return static_cast<double>(correct) / static_cast<double>(ps.size() + pt.size());
}

}  // namespace traitalign
